use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bloom_fpr::FprReport;
use super::checks::ConservativityReport;
use super::faults::FaultKind;
use super::verdict::Verdict;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Guarantee {
    PG1,
    PG2,
    PG3,
    PG4,
}

const ALL_GUARANTEES: [Guarantee; 4] = [Guarantee::PG1, Guarantee::PG2, Guarantee::PG3, Guarantee::PG4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoalStatus {
    /// Every covering guarantee passed and no residual risk is recorded.
    Mitigated,
    /// Covering guarantees passed but correlation-based inference remains.
    ResidualRisk,
    /// At least one covering guarantee failed.
    Degraded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalRow {
    pub goal: String,
    pub name: String,
    pub covering: Vec<Guarantee>,
    /// Guarantees that help only partially against this goal.
    pub partial: Vec<Guarantee>,
    pub residual: bool,
    pub status: GoalStatus,
}

struct GoalDef {
    goal: &'static str,
    name: &'static str,
    covering: &'static [Guarantee],
    partial: &'static [Guarantee],
}

use Guarantee::*;

const GOALS: [GoalDef; 7] = [
    GoalDef { goal: "G1", name: "membership inference", covering: &[PG1, PG3], partial: &[] },
    GoalDef { goal: "G2", name: "access pattern inference", covering: &[PG1, PG4], partial: &[] },
    GoalDef { goal: "G3", name: "keyword frequency estimation", covering: &[PG2, PG3], partial: &[] },
    GoalDef { goal: "G4", name: "index reconstruction", covering: &[PG2, PG3, PG4], partial: &[] },
    GoalDef { goal: "G5", name: "indirect inference via correlation", covering: &[PG1, PG2], partial: &[PG3, PG4] },
    GoalDef { goal: "I1", name: "direct identification", covering: &[PG1, PG2], partial: &[] },
    GoalDef { goal: "I2", name: "re-identification via quasi-identifiers", covering: &[PG1, PG2], partial: &[PG3] },
];

/// Per-guarantee outcome; `None` means the check was not run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GuaranteeOutcomes {
    pub pg1: Option<bool>,
    pub pg2: Option<bool>,
    pub pg3: Option<bool>,
    pub pg4: Option<bool>,
}

impl GuaranteeOutcomes {
    fn get(&self, g: Guarantee) -> Option<bool> {
        match g {
            PG1 => self.pg1,
            PG2 => self.pg2,
            PG3 => self.pg3,
            PG4 => self.pg4,
        }
    }
}

/// Map guarantee outcomes onto the adversary goals. Goals with partial
/// coverage carry a residual flag and never report as mitigated.
pub fn emit_goal_matrix(outcomes: &GuaranteeOutcomes) -> Result<Vec<GoalRow>> {
    let missing: Vec<String> = ALL_GUARANTEES
        .iter()
        .filter(|g| outcomes.get(**g).is_none())
        .map(|g| format!("{g:?}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteAudit(missing.join(", ")));
    }
    Ok(GOALS
        .iter()
        .map(|g| {
            let residual = !g.partial.is_empty();
            let covered = g.covering.iter().all(|c| outcomes.get(*c) == Some(true));
            GoalRow {
                goal: g.goal.to_string(),
                name: g.name.to_string(),
                covering: g.covering.to_vec(),
                partial: g.partial.to_vec(),
                residual,
                status: match (covered, residual) {
                    (false, _) => GoalStatus::Degraded,
                    (true, true) => GoalStatus::ResidualRisk,
                    (true, false) => GoalStatus::Mitigated,
                },
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultOutcome {
    pub kind: FaultKind,
    pub applicable: bool,
    pub description: String,
    pub detected_by: Vec<Guarantee>,
}

impl FaultOutcome {
    pub fn detected(&self) -> bool {
        !self.detected_by.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub servers: usize,
    pub pods: usize,
    pub resources: usize,
    pub webids: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub seed: u64,
    pub corpus: CorpusSummary,
    pub pg1: Verdict,
    pub pg2: Verdict,
    pub pg3: FprReport,
    pub pg4_conservativity: ConservativityReport,
    pub pg4_separability: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fault_injection: Vec<FaultOutcome>,
    pub goal_matrix: Vec<GoalRow>,
}

impl AuditReport {
    pub fn outcomes(&self) -> GuaranteeOutcomes {
        GuaranteeOutcomes {
            pg1: Some(self.pg1.pass),
            pg2: Some(self.pg2.pass),
            pg3: Some(self.pg3.pass),
            pg4: Some(self.pg4_conservativity.pass() && self.pg4_separability.pass),
        }
    }

    /// True when every guarantee holds and every applicable injected fault
    /// was caught. Residual-risk goals do not count as failures.
    pub fn exit_ok(&self) -> bool {
        let o = self.outcomes();
        ALL_GUARANTEES.iter().all(|g| o.get(*g) == Some(true))
            && self
                .fault_injection
                .iter()
                .all(|f| !f.applicable || f.detected())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        let c = &self.corpus;
        let _ = writeln!(
            out,
            "corpus: {} servers, {} pods, {} resources, {} webids (seed {})",
            c.servers, c.pods, c.resources, c.webids, self.seed
        );
        let _ = writeln!(out, "PG1 scope isolation      {}  ({} checks, {} failures)", mark(self.pg1.pass), self.pg1.checked, self.pg1.failures);
        let _ = writeln!(out, "PG2 index isolation      {}  ({} checks, {} failures)", mark(self.pg2.pass), self.pg2.checked, self.pg2.failures);
        let _ = writeln!(
            out,
            "PG3 bloom sketches       {}  (false negatives {}, monotone {})",
            mark(self.pg3.pass),
            self.pg3.false_negatives,
            self.pg3.monotone_in_n
        );
        let cons = &self.pg4_conservativity;
        let _ = writeln!(
            out,
            "PG4 conservativity       {}  ({} cells, {} stat cells)",
            mark(cons.pass()),
            cons.structure.checked,
            cons.statistics.checked
        );
        let _ = writeln!(out, "PG4 separability         {}  ({} checks)", mark(self.pg4_separability.pass), self.pg4_separability.checked);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}", "sized", "n", "m", "k", "measured", "theory", "3-term");
        for cell in &self.pg3.cells {
            let _ = writeln!(
                out,
                "{:>8} {:>8} {:>8} {:>8} {:>10.5} {:>10.5} {:>10.6}",
                cell.sized_for, cell.n, cell.m, cell.k, cell.measured_fpr, cell.theoretical_fpr, cell.conjunctive_fpr
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<44} {:^5} {:^5} {:^5} {:^5}  status", "adversary goal", "PG1", "PG2", "PG3", "PG4");
        for row in &self.goal_matrix {
            let cell = |g: Guarantee| {
                if row.covering.contains(&g) {
                    "x"
                } else if row.partial.contains(&g) {
                    "~"
                } else {
                    ""
                }
            };
            let status = match row.status {
                GoalStatus::Mitigated => "mitigated",
                GoalStatus::ResidualRisk => "residual risk",
                GoalStatus::Degraded => "DEGRADED",
            };
            let _ = writeln!(
                out,
                "{:<44} {:^5} {:^5} {:^5} {:^5}  {status}",
                format!("({}) {}", row.goal, row.name),
                cell(PG1),
                cell(PG2),
                cell(PG3),
                cell(PG4)
            );
        }
        if !self.fault_injection.is_empty() {
            let _ = writeln!(out);
            for f in &self.fault_injection {
                let state = match (f.applicable, f.detected()) {
                    (false, _) => "not applicable".to_string(),
                    (true, true) => format!("detected by {:?}", f.detected_by),
                    (true, false) => "MISSED".to_string(),
                };
                let _ = writeln!(out, "fault {:?}: {state} ({})", f.kind, f.description);
            }
        }
        out
    }
}
