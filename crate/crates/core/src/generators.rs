//! Seed-driven generation of Gaussian sensing matrices, sparse and
//! compressible signals, and ℓ1-bounded measurement noise.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::model::{mat_vec, norm1, Matrix, Vector};
use crate::rng::{RngSpec, SeededRng};
use crate::scalar::Scalar;

/// I.i.d. `N(0, 1)` entries, row-major draw order, no `1/√m` normalization.
pub fn gen_gaussian_matrix<T: Scalar>(m: usize, n: usize, rng: &RngSpec) -> Result<Matrix<T>> {
    if m == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "sensing matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let mut r = rng.rng();
    let data = (0..m * n).map(|_| T::lit(r.standard_normal())).collect();
    Matrix::new(m, n, data)
}

/// Law of the nonzero entries of a sparse signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Amplitude {
    /// Random signs, unit magnitude.
    Unit,
    /// Standard normal values.
    Gaussian,
    /// Random sign times a magnitude uniform on `[low, high)`, `0 < low <= high`.
    Uniform { low: f64, high: f64 },
}

impl Amplitude {
    fn validate(&self) -> Result<()> {
        if let Amplitude::Uniform { low, high } = *self {
            if !(low > 0.0 && low <= high && high.is_finite()) {
                return Err(Error::invalid(format!(
                    "uniform amplitude needs 0 < low <= high < inf, got [{low}, {high})"
                )));
            }
        }
        Ok(())
    }

    fn draw(&self, r: &mut SeededRng) -> f64 {
        match *self {
            Amplitude::Unit => r.sign(),
            Amplitude::Gaussian => loop {
                let z = r.standard_normal();
                if z != 0.0 {
                    break z;
                }
            },
            Amplitude::Uniform { low, high } => {
                let s = r.sign();
                s * (low + (high - low) * r.uniform())
            }
        }
    }
}

/// Exactly `k` nonzeros on a uniformly random support.
pub fn gen_sparse_signal<T: Scalar>(n: usize, k: usize, amplitude: Amplitude, rng: &RngSpec) -> Result<Vector<T>> {
    if n == 0 {
        return Err(Error::invalid("signal dimension must be positive"));
    }
    if k > n {
        return Err(Error::invalid(format!("sparsity {k} exceeds signal dimension {n}")));
    }
    amplitude.validate()?;
    let mut r = rng.rng();
    let support = r.subset(n, k);
    let mut x = vec![T::zero(); n];
    for i in support {
        x[i] = T::lit(amplitude.draw(&mut r));
    }
    Vector::new(x)
}

/// Power-law compressible signal: the sorted magnitudes are exactly `i^{-decay}`,
/// `i = 1..=n`, placed by a random permutation with random signs.
pub fn gen_compressible_signal<T: Scalar>(n: usize, decay: f64, rng: &RngSpec) -> Result<Vector<T>> {
    if n == 0 {
        return Err(Error::invalid("signal dimension must be positive"));
    }
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::invalid(format!("decay exponent must be positive, got {decay}")));
    }
    let mut r = rng.rng();
    let perm = r.permutation(n);
    let mut x = vec![T::zero(); n];
    for (rank, &slot) in perm.iter().enumerate() {
        let magnitude = ((rank + 1) as f64).powf(-decay);
        x[slot] = T::lit(r.sign() * magnitude);
    }
    Vector::new(x)
}

/// Exactly `s` nonzeros on a random support, rescaled so that `‖n‖₁` lands on
/// `epsilon` (never above it).
pub fn gen_sparse_noise<T: Scalar>(m: usize, s: usize, epsilon: f64, rng: &RngSpec) -> Result<Vector<T>> {
    if m == 0 {
        return Err(Error::invalid("noise dimension must be positive"));
    }
    if s > m {
        return Err(Error::invalid(format!(
            "noise sparsity {s} exceeds measurement count {m}"
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "noise budget must be finite and nonnegative, got {epsilon}"
        )));
    }
    let mut out = vec![T::zero(); m];
    if epsilon == 0.0 || s == 0 {
        return Vector::new(out);
    }
    let mut r = rng.rng();
    let support = r.subset(m, s);
    let raw: Vec<f64> = support.iter().map(|_| Amplitude::Gaussian.draw(&mut r)).collect();
    let scale = epsilon / raw.iter().map(|v| v.abs()).sum::<f64>();
    for (&i, &v) in support.iter().zip(&raw) {
        out[i] = T::lit(v * scale);
    }
    // Put the rounding residue on the last entry, then step it down until the
    // computed ℓ1 norm no longer exceeds the budget.
    let eps_t = T::lit(epsilon);
    let last = *support.last().expect("s >= 1");
    let head = support[..s - 1].iter().fold(T::zero(), |acc, &i| acc + out[i].abs());
    let mut mag = (eps_t - head).max(T::min_positive_value());
    let sgn = if raw[s - 1] > 0.0 { T::one() } else { -T::one() };
    out[last] = sgn * mag;
    while norm1(&out) > eps_t && mag > T::min_positive_value() {
        mag = mag - mag * T::epsilon();
        out[last] = sgn * mag;
    }
    Vector::new(out)
}

/// Dense Laplacian noise together with the budget it respects with probability `quantile`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LaplacianNoise<T> {
    pub noise: Vector<T>,
    /// `quantile`-quantile of `‖n‖₁ ~ Gamma(m, 1)`.
    pub epsilon: T,
    /// Set when this draw landed above `epsilon`.
    pub exceeds_budget: bool,
}

/// Quantile of `Gamma(shape = m, rate = 1)`, the law of `‖n‖₁` for `m` unit Laplace entries.
pub fn laplacian_l1_quantile(m: usize, quantile: f64) -> Result<f64> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::invalid(format!(
            "quantile must lie strictly between 0 and 1, got {quantile}"
        )));
    }
    if m == 0 {
        return Err(Error::invalid("noise dimension must be positive"));
    }
    if m == 1 {
        return Ok(-(-quantile).ln_1p());
    }
    let law = Gamma::new(m as f64, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(law.inverse_cdf(quantile))
}

pub fn gen_laplacian_noise<T: Scalar>(m: usize, quantile: f64, rng: &RngSpec) -> Result<LaplacianNoise<T>> {
    let epsilon = laplacian_l1_quantile(m, quantile)?;
    let mut r = rng.rng();
    let noise: Vec<T> = (0..m).map(|_| T::lit(r.laplace())).collect();
    let exceeds_budget = norm1(&noise) > T::lit(epsilon);
    Ok(LaplacianNoise {
        noise: Vector::new(noise)?,
        epsilon: T::lit(epsilon),
        exceeds_budget,
    })
}

/// How to draw the ground-truth signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalSpec {
    /// `k`-sparse with the given amplitude law.
    Sparse { amplitude: Amplitude },
    /// Power-law decay `i^{-decay}`; `k` only enters through `e0(k)`.
    Compressible { decay: f64 },
}

/// How to draw the measurement noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSpec {
    /// `n = 0`, `ε = 0`.
    None,
    /// `count` corrupted measurements with `‖n‖₁ = epsilon`.
    Sparse { count: usize, epsilon: f64 },
    /// Unit Laplace entries, `ε` at the given quantile of `‖n‖₁`. Draws above
    /// the budget are rejected and redrawn from the next substream.
    Laplacian { quantile: f64 },
}

/// Seeds of the three independent draws in an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSeeds {
    pub matrix: RngSpec,
    pub signal: RngSpec,
    pub noise: RngSpec,
}

impl InstanceSeeds {
    pub fn derive(base: &RngSpec) -> Self {
        InstanceSeeds {
            matrix: base.substream(0),
            signal: base.substream(1),
            noise: base.substream(2),
        }
    }
}

/// One trial of the observation model `y = Φx + n` with `‖n‖₁ ≤ ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SparseInstance<T> {
    pub x: Vector<T>,
    pub phi: Matrix<T>,
    pub n: Vector<T>,
    pub y: Vector<T>,
    pub epsilon: T,
    pub k: usize,
}

impl<T: Scalar> SparseInstance<T> {
    /// Assembles an instance from its parts; `y` must be given explicitly.
    pub fn from_parts(x: Vector<T>, phi: Matrix<T>, n: Vector<T>, y: Vector<T>, epsilon: T, k: usize) -> Result<Self> {
        if phi.cols() != x.len() {
            return Err(Error::DimensionMismatch {
                what: "signal length vs matrix columns",
                expected: phi.cols(),
                got: x.len(),
            });
        }
        for (what, got) in [("noise length", n.len()), ("measurement length", y.len())] {
            if got != phi.rows() {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: phi.rows(),
                    got,
                });
            }
        }
        if !(epsilon >= T::zero() && epsilon.is_finite()) {
            return Err(Error::invalid("noise budget must be finite and nonnegative"));
        }
        if k == 0 || k > x.len() {
            return Err(Error::invalid(format!(
                "sparsity level {k} must lie in 1..={}",
                x.len()
            )));
        }
        Ok(SparseInstance {
            x,
            phi,
            n,
            y,
            epsilon,
            k,
        })
    }

    pub fn n_dim(&self) -> usize {
        self.phi.cols()
    }

    pub fn m_dim(&self) -> usize {
        self.phi.rows()
    }

    /// `‖y − Φx‖₁`.
    pub fn residual_of_truth(&self) -> T {
        let ax = mat_vec(&self.phi, &self.x).expect("dimensions checked");
        norm1(&self.y.iter().zip(ax.iter()).map(|(&a, &b)| a - b).collect::<Vec<T>>())
    }
}

/// Draws `Φ`, `x` and `n` from independent substreams of `base` and forms `y = Φx + n`.
pub fn make_instance<T: Scalar>(
    n: usize,
    m: usize,
    k: usize,
    noise: &NoiseSpec,
    signal: &SignalSpec,
    base: &RngSpec,
) -> Result<SparseInstance<T>> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!("sparsity K = {k} must lie in 1..=N (N = {n})")));
    }
    let seeds = InstanceSeeds::derive(base);
    let phi = gen_gaussian_matrix::<T>(m, n, &seeds.matrix)?;
    let x = match *signal {
        SignalSpec::Sparse { amplitude } => gen_sparse_signal(n, k, amplitude, &seeds.signal)?,
        SignalSpec::Compressible { decay } => gen_compressible_signal(n, decay, &seeds.signal)?,
    };
    let (noise_vec, epsilon) = match *noise {
        NoiseSpec::None => (Vector::zeros(m), T::zero()),
        NoiseSpec::Sparse { count, epsilon } => (gen_sparse_noise(m, count, epsilon, &seeds.noise)?, T::lit(epsilon)),
        NoiseSpec::Laplacian { quantile } => {
            const MAX_DRAWS: u64 = 10_000;
            let mut draw = 0;
            loop {
                let spec = if draw == 0 {
                    seeds.noise
                } else {
                    seeds.noise.substream(draw)
                };
                let ln = gen_laplacian_noise::<T>(m, quantile, &spec)?;
                if !ln.exceeds_budget {
                    break (ln.noise, ln.epsilon);
                }
                draw += 1;
                if draw == MAX_DRAWS {
                    return Err(Error::invalid(format!(
                        "no Laplacian draw within the {quantile}-quantile budget after {MAX_DRAWS} tries"
                    )));
                }
            }
        }
    };
    let y = mat_vec(&phi, &x)?.add(&noise_vec)?;
    SparseInstance::from_parts(x, phi, noise_vec, y, epsilon, k)
}
