use serde::{Deserialize, Serialize};

/// Counterexamples kept per verdict; the total is still counted.
const KEPT: usize = 50;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub webid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub detail: String,
}

impl Counterexample {
    pub fn new(kind: &str, detail: impl Into<String>) -> Self {
        Self {
            kind: kind.to_string(),
            detail: detail.into(),
            ..Self::default()
        }
    }

    pub fn webid(mut self, w: impl ToString) -> Self {
        self.webid = Some(w.to_string());
        self
    }

    pub fn term(mut self, t: impl ToString) -> Self {
        self.term = Some(t.to_string());
        self
    }

    pub fn at(mut self, loc: impl ToString) -> Self {
        self.location = Some(loc.to_string());
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub checked: u64,
    pub failures: u64,
    pub counterexamples: Vec<Counterexample>,
}

/// Accumulates check outcomes; mergeable across parallel workers.
#[derive(Debug, Default)]
pub(crate) struct Tally {
    checked: u64,
    failures: u64,
    examples: Vec<Counterexample>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, example: impl FnOnce() -> Counterexample) {
        self.checked += 1;
        if !ok {
            self.fail(example());
        }
    }

    pub fn fail(&mut self, example: Counterexample) {
        self.failures += 1;
        if self.examples.len() < KEPT {
            self.examples.push(example);
        }
    }

    pub fn merge(&mut self, other: Tally) {
        self.checked += other.checked;
        self.failures += other.failures;
        let room = KEPT.saturating_sub(self.examples.len());
        self.examples.extend(other.examples.into_iter().take(room));
    }

    pub fn verdict(self) -> Verdict {
        Verdict {
            pass: self.failures == 0,
            checked: self.checked,
            failures: self.failures,
            counterexamples: self.examples,
        }
    }
}

impl FromIterator<Tally> for Tally {
    fn from_iter<I: IntoIterator<Item = Tally>>(iter: I) -> Self {
        let mut out = Tally::default();
        for t in iter {
            out.merge(t);
        }
        out
    }
}
