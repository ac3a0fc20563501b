//! JSON documents written by the subcommands. Each is checked by
//! re-parsing it into its own type before it is emitted.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sle0::loewner::FlowStatus;
use sle0::{Complex64, LinkPattern};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolesDoc {
    pub x: Vec<f64>,
    pub complete: bool,
    pub expected: usize,
    pub solutions: Vec<PoleEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleEntry {
    pub zeta: Vec<Complex64>,
    pub pattern: LinkPattern,
    pub residual: f64,
    pub generic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullVecDoc {
    pub x: Vec<f64>,
    pub solutions: Vec<NullVecEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullVecEntry {
    pub pattern: LinkPattern,
    #[serde(rename = "U")]
    pub u: Vec<f64>,
    /// Absent at non-generic solutions.
    #[serde(rename = "Z_log")]
    pub z_log: Option<f64>,
    pub nv_residual: Vec<f64>,
    pub cwi_residual: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocusDoc {
    pub x: Vec<f64>,
    pub solutions: Vec<LocusEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocusEntry {
    pub pattern: LinkPattern,
    pub curves: Vec<CurveEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveEntry {
    pub curve_id: usize,
    /// One-based critical indices; `end` is absent for unbounded branches.
    pub start: usize,
    pub end: Option<usize>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveDoc {
    pub x0: Vec<f64>,
    pub pattern: LinkPattern,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub final_t: f64,
    pub status: FlowStatus,
    pub tau0_events: u32,
    pub stopped_at_tau: bool,
    pub max_n_drift: f64,
    pub stale_tips: usize,
    pub samples: usize,
    pub series: Series,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub t: Vec<f64>,
    pub n_drift: Vec<f64>,
    /// `s_1, .., s_4` (or fewer when there are fewer driving points).
    pub s: Vec<Vec<f64>>,
}

/// Serializes `value`, re-parses it into `T` and requires equality.
pub fn validated_json<T>(value: &T) -> Result<String, CliError>
where
    T: Serialize + DeserializeOwned + PartialEq,
{
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    let back: T = serde_json::from_str(&text)
        .map_err(|e| CliError::Internal(format!("output schema: {e}")))?;
    if &back != value {
        return Err(CliError::Internal(
            "output schema: round trip changed the document".to_string(),
        ));
    }
    Ok(text)
}
