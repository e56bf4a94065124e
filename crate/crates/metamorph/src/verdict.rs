//! Uniform outcome record for every metamorphic relation check.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MrStatus {
    Pass,
    Warn,
    Fail,
}

/// Outcome of one relation: what was observed, what the relation expected,
/// and the tolerance the comparison used. `status` is `Fail` exactly when
/// the stated relation is violated beyond the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrVerdict {
    pub mr_id: String,
    pub status: MrStatus,
    pub observed: String,
    pub expected: String,
    pub tolerance: f64,
    pub details: String,
}

impl MrVerdict {
    pub fn new(
        mr_id: impl Into<String>,
        status: MrStatus,
        observed: impl Into<String>,
        expected: impl Into<String>,
        tolerance: f64,
        details: impl Into<String>,
    ) -> Self {
        MrVerdict {
            mr_id: mr_id.into(),
            status,
            observed: observed.into(),
            expected: expected.into(),
            tolerance,
            details: details.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == MrStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == MrStatus::Fail
    }
}

/// Folds sub-case outcomes into one verdict: any fail fails, else any warn
/// warns, else pass.
pub fn combine(
    mr_id: impl Into<String>,
    expected: impl Into<String>,
    tolerance: f64,
    cases: &[(String, MrStatus)],
) -> MrVerdict {
    let status = cases
        .iter()
        .map(|(_, s)| *s)
        .fold(MrStatus::Pass, |acc, s| match (acc, s) {
            (MrStatus::Fail, _) | (_, MrStatus::Fail) => MrStatus::Fail,
            (MrStatus::Warn, _) | (_, MrStatus::Warn) => MrStatus::Warn,
            _ => MrStatus::Pass,
        });
    let details = cases
        .iter()
        .map(|(d, s)| format!("[{}] {d}", status_tag(*s)))
        .collect::<Vec<_>>()
        .join("; ");
    MrVerdict {
        mr_id: mr_id.into(),
        status,
        observed: details.clone(),
        expected: expected.into(),
        tolerance,
        details,
    }
}

fn status_tag(s: MrStatus) -> &'static str {
    match s {
        MrStatus::Pass => "pass",
        MrStatus::Warn => "warn",
        MrStatus::Fail => "fail",
    }
}
