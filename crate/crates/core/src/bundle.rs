//! Instance bundles on disk.
//!
//! A bundle is a directory holding `phi.bin` (binary matrix), `x.csv`,
//! `n.csv`, `y.csv` (one value per line) and `meta.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{InstanceSeeds, NoiseSpec, SignalSpec, SparseInstance};
use crate::io::{load_matrix_binary, load_vector_csv, matrix_to_binary, read_to_string, vector_to_csv, write_atomic};
use crate::rng::{RngSpec, NORMAL_SAMPLER};

/// Version of the on-disk formats written by this crate.
pub const FORMAT_REVISION: &str = "1";

pub const PHI_FILE: &str = "phi.bin";
pub const X_FILE: &str = "x.csv";
pub const NOISE_FILE: &str = "n.csv";
pub const Y_FILE: &str = "y.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub epsilon: f64,
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
    pub base_rng: RngSpec,
    pub seeds: InstanceSeeds,
    pub sampler: String,
    pub revision: String,
    /// Configuration that produced the bundle, echoed verbatim.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl BundleMeta {
    pub fn new(
        instance: &SparseInstance<f64>,
        signal: SignalSpec,
        noise: NoiseSpec,
        base_rng: RngSpec,
        config: serde_json::Value,
    ) -> Self {
        BundleMeta {
            n: instance.n_dim(),
            m: instance.m_dim(),
            k: instance.k,
            epsilon: instance.epsilon,
            signal,
            noise,
            base_rng,
            seeds: InstanceSeeds::derive(&base_rng),
            sampler: NORMAL_SAMPLER.to_string(),
            revision: FORMAT_REVISION.to_string(),
            config,
        }
    }
}

/// Writes every file of the bundle, creating `dir` if needed.
pub fn write_bundle(dir: &Path, instance: &SparseInstance<f64>, meta: &BundleMeta) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join(PHI_FILE), &matrix_to_binary(&instance.phi))?;
    write_atomic(&dir.join(X_FILE), vector_to_csv(&instance.x).as_bytes())?;
    write_atomic(&dir.join(NOISE_FILE), vector_to_csv(&instance.n).as_bytes())?;
    write_atomic(&dir.join(Y_FILE), vector_to_csv(&instance.y).as_bytes())?;
    let mut json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    json.push('\n');
    write_atomic(&dir.join(META_FILE), json.as_bytes())
}

/// Reads and cross-checks a bundle.
pub fn read_bundle(dir: &Path) -> Result<(SparseInstance<f64>, BundleMeta)> {
    let meta_path = dir.join(META_FILE);
    let meta: BundleMeta = serde_json::from_str(&read_to_string(&meta_path)?).map_err(|source| Error::Json {
        path: meta_path.clone(),
        source,
    })?;
    let phi = load_matrix_binary(&dir.join(PHI_FILE))?;
    let x = load_vector_csv(&dir.join(X_FILE))?;
    let n = load_vector_csv(&dir.join(NOISE_FILE))?;
    let y = load_vector_csv(&dir.join(Y_FILE))?;
    if (phi.rows(), phi.cols()) != (meta.m, meta.n) {
        return Err(Error::Format {
            format: "bundle",
            reason: format!(
                "{PHI_FILE} is {}×{} but {META_FILE} records M = {}, N = {}",
                phi.rows(),
                phi.cols(),
                meta.m,
                meta.n
            ),
        });
    }
    let instance = SparseInstance::from_parts(x, phi, n, y, meta.epsilon, meta.k)?;
    Ok((instance, meta))
}
