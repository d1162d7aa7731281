use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Fairness notion a schedule, metric or constraint system targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// Equalized odds.
    Eo,
    /// Demographic parity.
    Dp,
    /// Equalized opportunity (positive class only).
    EqOpt,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::Eo => "eo",
            ConstraintKind::Dp => "dp",
            ConstraintKind::EqOpt => "eqopt",
        })
    }
}

impl FromStr for ConstraintKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eo" => Ok(ConstraintKind::Eo),
            "dp" => Ok(ConstraintKind::Dp),
            "eqopt" => Ok(ConstraintKind::EqOpt),
            other => Err(format!("unknown constraint kind `{other}` (expected eo, dp or eqopt)")),
        }
    }
}
