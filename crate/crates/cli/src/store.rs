//! On-disk layout of a corpus directory.
//!
//! ```text
//! corpus.json            resources, ACLs, pod flags
//! config.json            workbench config used to generate it (optional)
//! indexes/<server>/...   one index file per indexed pod
//! metadata/system.json   system tier
//! metadata/servers/...   one file per server
//! sketches.json          bloom sketches for both tiers
//! overlay.json           replicated logical tables
//! state.json             digest of the corpus the metadata was built from
//! ```

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use scoped_search::gen::WorkbenchConfig;
use scoped_search::metadata::RefreshConfig;
use scoped_search::par::Exec;
use scoped_search::search::MetadataMode;
use scoped_search::sim::{Simulation, CORPUS_FILE, OVERLAY_FILE, SKETCH_FILE};
use scoped_search::Error;
use serde::{Deserialize, Serialize};

pub const CONFIG_FILE: &str = "config.json";
pub const STATE_FILE: &str = "state.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    pub corpus_digest: String,
    pub as_of: u64,
    pub mode: MetadataMode,
}

pub struct Store {
    pub dir: PathBuf,
}

impl Store {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn read(&self, rel: &str) -> Result<Option<String>> {
        match fs::read_to_string(self.path(rel)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e).with_context(|| format!("reading {}", self.path(rel).display())),
        }
    }

    pub fn write(&self, rel: &str, contents: &str) -> Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn config(&self) -> Result<WorkbenchConfig> {
        match self.read(CONFIG_FILE)? {
            Some(json) => Ok(serde_json::from_str(&json).context("parsing config.json")?),
            None => Ok(WorkbenchConfig::default()),
        }
    }

    pub fn state(&self) -> Result<Option<State>> {
        self.read(STATE_FILE)?
            .map(|json| serde_json::from_str(&json).context("parsing state.json"))
            .transpose()
    }

    pub fn load(&self) -> Result<Simulation> {
        if self.read(CORPUS_FILE)?.is_none() {
            anyhow::bail!("no {CORPUS_FILE} in {}", self.dir.display());
        }
        let cfg = self.config()?;
        let refresh = RefreshConfig {
            bloom: cfg.bloom,
            exec: Exec::default(),
        };
        let sim = Simulation::restore(cfg.overlay_nodes, refresh, |rel| {
            self.read(rel).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
        })?;
        Ok(sim)
    }

    /// Load a simulation whose metadata is current for the corpus on disk.
    pub fn load_fresh(&self) -> Result<(Simulation, State)> {
        let sim = self.load()?;
        let state = self.state()?.ok_or_else(|| {
            Error::StaleMetadata("metadata has never been refreshed for this corpus".into())
        })?;
        if sim.metadata.is_none() || state.corpus_digest != sim.corpus.digest()? {
            return Err(Error::StaleMetadata(
                "corpus changed since the last refresh; run refresh".into(),
            )
            .into());
        }
        Ok((sim, state))
    }

    /// Replace every derived artifact with the simulation's current ones.
    pub fn save(&self, sim: &Simulation) -> Result<()> {
        for dir in ["indexes", "metadata"] {
            remove_dir(&self.path(dir))?;
        }
        for file in [SKETCH_FILE, OVERLAY_FILE] {
            remove_file(&self.path(file))?;
        }
        for (rel, contents) in sim.artifacts()? {
            self.write(&rel, &contents)?;
        }
        Ok(())
    }
}

fn remove_dir(p: &Path) -> Result<()> {
    match fs::remove_dir_all(p) {
        Err(e) if e.kind() != ErrorKind::NotFound => Err(e).with_context(|| format!("removing {}", p.display())),
        _ => Ok(()),
    }
}

fn remove_file(p: &Path) -> Result<()> {
    match fs::remove_file(p) {
        Err(e) if e.kind() != ErrorKind::NotFound => Err(e).with_context(|| format!("removing {}", p.display())),
        _ => Ok(()),
    }
}
