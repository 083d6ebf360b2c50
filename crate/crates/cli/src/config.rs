//! Run configurations, their JSON form and error classification.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sl1_core::analysis::GridSpec;
use sl1_core::bundle::FORMAT_REVISION;
use sl1_core::conditions::{LemmaBoundInputs, SamplingBudget};
use sl1_core::generators::{Amplitude, NoiseSpec, SignalSpec};
use sl1_core::Error;

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NONCONVERGED: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    /// Any failure while reading an input file, whatever the cause.
    pub fn input(context: &str, err: Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{context}: {err}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Io { .. } | Error::Json { .. } | Error::Format { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, Failure>;

fn revision() -> String {
    FORMAT_REVISION.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub revision: String,
    /// Bundle directory.
    pub out: Option<PathBuf>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub stream: u64,
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            revision: revision(),
            out: None,
            n: 64,
            m: 32,
            k: 4,
            seed: 0,
            stream: 0,
            signal: SignalSpec::Sparse {
                amplitude: Amplitude::Gaussian,
            },
            noise: NoiseSpec::Sparse { count: 2, epsilon: 1.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub revision: String,
    pub bundle: Option<PathBuf>,
    /// Defaults to `result.json` inside the bundle.
    pub out: Option<PathBuf>,
    pub solver: sl1_core::SolverConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            revision: revision(),
            bundle: None,
            out: None,
            solver: Default::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsConfig {
    pub revision: String,
    /// Binary or `.csv` matrix.
    pub matrix: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(rename = "K")]
    pub k: usize,
    /// Calibration constant; the Gaussian value when absent.
    pub nu: Option<f64>,
    pub budget: SamplingBudget,
    pub seed: u64,
    pub stream: u64,
    /// Also evaluate the sample-size condition and its probability at this `M`.
    pub lemma: Option<LemmaBoundInputs>,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        ConditionsConfig {
            revision: revision(),
            matrix: None,
            out: None,
            k: 1,
            nu: None,
            budget: SamplingBudget::default(),
            seed: 0,
            stream: 0,
            lemma: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSettings {
    pub budget: SamplingBudget,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub revision: String,
    pub bundle: Option<PathBuf>,
    /// Defaults to `trace.json` inside the bundle.
    pub out: Option<PathBuf>,
    pub solver: sl1_core::SolverConfig,
    /// Estimate δ₂K and δ₃K on the bundle's matrix to evaluate the conditional steps.
    pub estimate: Option<EstimateSettings>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            revision: revision(),
            bundle: None,
            out: None,
            solver: Default::default(),
            estimate: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub revision: String,
    /// Receives `trials.csv` and `summary.json`.
    pub out_dir: Option<PathBuf>,
    pub grid: GridSpec,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            revision: revision(),
            out_dir: None,
            grid: GridSpec::default(),
        }
    }
}

/// Reads a config file. A top-level `config` member is unwrapped, so every
/// output of this tool can be fed back as its own configuration.
pub fn load<C: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<C> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let text = sl1_core::io::read_to_string(path).map_err(|e| Failure::input("config", e))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

pub fn check_revision(found: &str) -> CliResult<()> {
    if found != FORMAT_REVISION {
        return Err(Failure::invalid(format!(
            "config revision {found:?} is not supported (expected {FORMAT_REVISION:?})"
        )));
    }
    Ok(())
}

pub fn required(path: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    path.clone()
        .ok_or_else(|| Failure::invalid(format!("missing {what}: pass it as a flag or in the config file")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapped_and_bare_configs_agree() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GenConfig {
            out: Some("b".into()),
            n: 10,
            ..Default::default()
        };
        let bare = dir.path().join("bare.json");
        let wrapped = dir.path().join("wrapped.json");
        std::fs::write(&bare, serde_json::to_string(&cfg).unwrap()).unwrap();
        std::fs::write(&wrapped, serde_json::json!({"config": cfg, "other": 1}).to_string()).unwrap();
        assert_eq!(load::<GenConfig>(Some(&bare)).unwrap(), cfg);
        assert_eq!(load::<GenConfig>(Some(&wrapped)).unwrap(), cfg);
    }

    #[test]
    fn unknown_fields_and_missing_files_are_classified() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"N": 4, "colour": 1}"#).unwrap();
        assert_eq!(load::<GenConfig>(Some(&p)).unwrap_err().code, EXIT_INVALID);
        let missing = dir.path().join("none.json");
        assert_eq!(load::<GenConfig>(Some(&missing)).unwrap_err().code, EXIT_IO);
        assert_eq!(load::<GenConfig>(None).unwrap(), GenConfig::default());
    }

    #[test]
    fn partial_configs_keep_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"grid": {"N": 12, "trials": 1}}"#).unwrap();
        let g: GridConfig = load(Some(&p)).unwrap();
        assert_eq!(g.grid.n, 12);
        assert_eq!(g.grid.ms, GridSpec::default().ms);
        assert!(check_revision(&g.revision).is_ok());
        assert!(check_revision("0").is_err());
    }
}
