//! Error bounds, a numeric tracer for the recovery proof, and trial grids.
//!
//! With `h = x* − x`, `T₀` the support of `H_K(x)` and `T₁, T₂, …` the
//! blocks of `K` indices of `h` off `T₀` in decreasing magnitude, the tracer
//! evaluates each inequality of the argument on the actual vectors:
//!
//! ```text
//! ‖h‖ ≤ ‖h_T01‖ + ‖h_T01ᶜ‖ ≤ ‖h_T01‖ + ∑_{k≥2} ‖h_Tk‖
//! ∑_{k≥2} ‖h_Tk‖ ≤ ‖h_T0ᶜ‖₁/√K ≤ ‖h_T01‖ + 2e₀(K) + excess/√K
//! ⟨sign(Φh_T01), Φh⟩ ≤ ‖Φh‖₁ ≤ ‖Φx* − y‖₁ + ‖Φx − y‖₁ ≤ 2ε + 2·tol
//! |⟨sign(Φh_T01), Φh_Tk⟩| ≤ M δ₃K ‖h_Tk‖                  (needs δ₃K)
//! M(ν − δ₂K)‖h_T01‖ ≤ ‖Φh_T01‖₁                           (needs δ₂K)
//! ```
//!
//! `excess = max(0, ‖x*‖₁ − ‖x‖₁)` is zero for an exact minimizer; keeping it
//! makes the cone step valid for any feasible point a solver returns. The
//! residual step reads the triangle inequality through `x*`, the feasible
//! point returned by the solver, and `x`, whose residual is the noise.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{theorem_condition_holds, ConditionEstimate, ConditionVerdict};
use crate::error::{Error, Result};
use crate::generators::{make_instance, Amplitude, NoiseSpec, SignalSpec, SparseInstance};
use crate::model::{compress_error_e0, hard_threshold, norm1, norm2, partition_support, sign, SupportSet, Vector};
use crate::rng::RngSpec;
use crate::scalar::Scalar;
use crate::solver::{solve, SolverConfig, SolverResult, SolverStatus};

/// `8ε/M + 12e₀(K)`.
pub fn theorem_bound<T: Scalar>(epsilon: T, m: usize, e0: T) -> T {
    T::lit(8.0) * epsilon / T::from_usize_lossy(m) + T::lit(12.0) * e0
}

/// `(4/θ)(ε/M) + 4((ν + δ₃K − δ₂K)/θ)e₀` with `θ = ν − δ₂K − δ₃K > 0`.
pub fn sharp_bound<T: Scalar>(epsilon: T, m: usize, e0: T, nu: T, d2k: T, d3k: T) -> Result<T> {
    let theta = nu - d2k - d3k;
    if !(theta > T::zero()) {
        return Err(Error::invalid(format!("ν − (δ₂K + δ₃K) = {theta} must be positive")));
    }
    let four = T::lit(4.0);
    Ok(four / theta * epsilon / T::from_usize_lossy(m) + four * (nu + d3k - d2k) / theta * e0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityKind {
    /// Holds for every feasible solver output.
    Unconditional,
    /// Uses the δ estimates.
    Conditional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaProvenance {
    /// Sampled lower bounds.
    Estimated,
    /// Every support enumerated.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InequalityRecord<T> {
    pub name: String,
    pub kind: InequalityKind,
    pub lhs: T,
    pub rhs: T,
    /// `rhs − lhs`.
    pub slack: T,
    /// Rounding allowance: the record holds iff `slack ≥ −tolerance`.
    pub tolerance: T,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceInputs<T> {
    pub nu: T,
    pub delta2k: Option<T>,
    pub delta3k: Option<T>,
    pub provenance: Option<DeltaProvenance>,
    pub verdict: Option<ConditionVerdict>,
    pub epsilon: T,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub feasibility_tol: T,
    pub e0: T,
    pub excess: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ProofTrace<T> {
    pub inputs: TraceInputs<T>,
    pub error_l2: T,
    pub records: Vec<InequalityRecord<T>>,
}

impl<T: Scalar> ProofTrace<T> {
    pub fn unconditional_hold(&self) -> bool {
        self.records
            .iter()
            .filter(|r| r.kind == InequalityKind::Unconditional)
            .all(|r| r.holds)
    }

    pub fn record(&self, name: &str) -> Option<&InequalityRecord<T>> {
        self.records.iter().find(|r| r.name == name)
    }
}

struct Recorder<T> {
    records: Vec<InequalityRecord<T>>,
}

impl<T: Scalar> Recorder<T> {
    fn push(&mut self, name: impl Into<String>, kind: InequalityKind, lhs: T, rhs: T) {
        let tolerance = T::lit(1e-12) * T::one().max(lhs.abs()).max(rhs.abs());
        let slack = rhs - lhs;
        self.records.push(InequalityRecord {
            name: name.into(),
            kind,
            lhs,
            rhs,
            slack,
            tolerance,
            holds: slack >= -tolerance,
        });
    }
}

fn restricted<T: Scalar>(h: &[T], s: &SupportSet) -> Vec<T> {
    let mut out = vec![T::zero(); h.len()];
    for &i in s.indices() {
        out[i] = h[i];
    }
    out
}

/// Evaluates every step of the recovery argument for `result` on `instance`.
///
/// The result must be feasible to `feasibility_tol`, and so must the ground
/// truth. Conditional records are emitted only when `est` is given.
pub fn trace_proof<T: Scalar>(
    instance: &SparseInstance<T>,
    result: &SolverResult<T>,
    est: Option<&ConditionEstimate<T>>,
    feasibility_tol: T,
) -> Result<ProofTrace<T>> {
    let phi = &instance.phi;
    let (m, n, k) = (phi.rows(), phi.cols(), instance.k);
    let eps = instance.epsilon;
    if result.u_star.len() != n {
        return Err(Error::DimensionMismatch {
            what: "solution length vs matrix columns",
            expected: n,
            got: result.u_star.len(),
        });
    }
    let mut buf = vec![T::zero(); m];
    let resid = |u: &[T], buf: &mut Vec<T>| {
        phi.mul_into(u, buf);
        buf.iter()
            .zip(instance.y.iter())
            .fold(T::zero(), |acc, (&a, &y)| acc + (a - y).abs())
    };
    let res_star = resid(result.u_star.as_slice(), &mut buf);
    if res_star > eps + feasibility_tol {
        return Err(Error::invalid(format!(
            "solution is infeasible: ‖y − Φx*‖₁ = {res_star} exceeds ε = {eps}"
        )));
    }
    let res_truth = resid(instance.x.as_slice(), &mut buf);
    if res_truth > eps + feasibility_tol {
        return Err(Error::invalid(format!(
            "ground truth is infeasible: ‖y − Φx‖₁ = {res_truth} exceeds ε = {eps}"
        )));
    }

    let h: Vec<T> = result
        .u_star
        .iter()
        .zip(instance.x.iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let hv = Vector::from_raw(h.clone());
    let t0 = SupportSet::support_of(&hard_threshold(&instance.x, k)?);
    let partition = partition_support(&hv, &t0, k)?;
    let t01 = partition.t01();
    let h01 = restricted(&h, &t01);
    let h01c = restricted(&h, &partition.t01_complement());
    let tails: Vec<Vec<T>> = partition.tail_blocks().iter().map(|b| restricted(&h, b)).collect();
    let tail_norms: Vec<T> = tails.iter().map(|b| norm2(b)).collect();
    let tail_sum = tail_norms.iter().fold(T::zero(), |a, &b| a + b);

    let e0 = compress_error_e0(&instance.x, k)?;
    let sqrt_k = T::from_usize_lossy(k).sqrt();
    let excess = (result.u_star.norm1() - instance.x.norm1()).max(T::zero());
    let h_norm = norm2(&h);
    let n01 = norm2(&h01);

    use InequalityKind::{Conditional, Unconditional};
    let mut rec = Recorder { records: Vec::new() };
    rec.push("triangle-split", Unconditional, h_norm, n01 + norm2(&h01c));
    rec.push("tail-block-sum", Unconditional, norm2(&h01c), tail_sum);
    let h_t0c = restricted(&h, &t0.complement());
    rec.push("block-decay", Unconditional, tail_sum, norm1(&h_t0c) / sqrt_k);
    let x_t0c = restricted(instance.x.as_slice(), &t0.complement());
    let h_t0 = restricted(&h, &t0);
    rec.push(
        "cone-constraint",
        Unconditional,
        norm1(&h_t0c),
        norm1(&h_t0) + T::lit(2.0) * norm1(&x_t0c) + excess,
    );
    let two = T::lit(2.0);
    let chain_rhs = n01 + two * e0 + excess / sqrt_k;
    rec.push("compressibility-chain", Unconditional, tail_sum, chain_rhs);
    rec.push(
        "error-split",
        Unconditional,
        h_norm,
        two * n01 + two * e0 + excess / sqrt_k,
    );

    let mut phi_h = vec![T::zero(); m];
    phi.mul_into(&h, &mut phi_h);
    let mut phi_h01 = vec![T::zero(); m];
    phi.mul_into(&h01, &mut phi_h01);
    let signs: Vec<T> = phi_h01.iter().map(|&v| sign(v)).collect();
    let corr = signs.iter().zip(&phi_h).fold(T::zero(), |a, (&s, &v)| a + s * v);
    let phi_h_l1 = norm1(&phi_h);
    rec.push("holder", Unconditional, corr, phi_h_l1);
    rec.push("residual-triangle", Unconditional, phi_h_l1, res_star + res_truth);
    rec.push(
        "feasibility",
        Unconditional,
        phi_h_l1,
        two * eps + two * feasibility_tol,
    );

    let nu = est.map_or_else(crate::conditions::nu_gaussian, |e| e.nu);
    let mut inputs = TraceInputs {
        nu,
        delta2k: None,
        delta3k: None,
        provenance: None,
        verdict: None,
        epsilon: eps,
        m,
        k,
        feasibility_tol,
        e0,
        excess,
    };
    if let Some(est) = est {
        let (d2, d3) = (est.delta2k_lower, est.delta3k_lower);
        let verdict = theorem_condition_holds(est);
        inputs.delta2k = Some(d2);
        inputs.delta3k = Some(d3);
        inputs.provenance = Some(if est.exhaustive {
            DeltaProvenance::Exhaustive
        } else {
            DeltaProvenance::Estimated
        });
        inputs.verdict = Some(verdict);
        let mf = T::from_usize_lossy(m);
        for (idx, (block, &bn)) in tails.iter().zip(&tail_norms).enumerate() {
            let mut pb = vec![T::zero(); m];
            phi.mul_into(block, &mut pb);
            let c = signs.iter().zip(&pb).fold(T::zero(), |a, (&s, &v)| a + s * v).abs();
            rec.push(format!("cross-term[{}]", idx + 2), Conditional, c, mf * d3 * bn);
        }
        rec.push("norm-lower-bound", Conditional, mf * (nu - d2) * n01, norm1(&phi_h01));
        let theta = nu - d2 - d3;
        if theta > T::zero() {
            let e_eff = e0 + excess / (two * sqrt_k);
            let eps_eff = eps + feasibility_tol;
            let head = (two * eps_eff / mf + d3 * (two * e_eff)) / theta;
            rec.push("head-bound", Conditional, n01, head);
            let sharp = sharp_bound(eps_eff, m, e_eff, nu, d2, d3)?;
            rec.push("sharp-bound", Conditional, h_norm, sharp);
        }
        if verdict != ConditionVerdict::Violated {
            rec.push("theorem-bound", Conditional, h_norm, theorem_bound(eps, m, e0));
        }
    }
    Ok(ProofTrace {
        inputs,
        error_l2: h_norm,
        records: rec.records,
    })
}

/// One trial: draw an instance, solve it, compare the error with the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub solver: SolverConfig<f64>,
    /// Record wall-clock time; off by default so outputs stay reproducible.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Corrupted measurements, 0 without sparse noise.
    pub s: usize,
    pub eps: f64,
    pub seed: u64,
    /// `None` when the trial failed before solving.
    pub status: Option<SolverStatus>,
    pub error: Option<String>,
    pub err_l2: f64,
    pub e0: f64,
    pub bound: f64,
    pub bound_holds: bool,
    pub exact_recovery: bool,
    pub iters: usize,
    pub runtime_ms: Option<f64>,
}

/// Absolute allowance on the bound comparison, relative to `max(1, ‖x‖)`.
pub const BOUND_ROUNDOFF: f64 = 1e-9;

/// `‖x* − x‖ ≤ bound`, up to [`BOUND_ROUNDOFF`].
pub fn bound_holds(err_l2: f64, bound: f64, x_norm: f64) -> bool {
    err_l2 <= bound + BOUND_ROUNDOFF * x_norm.max(1.0)
}

/// `‖x* − x‖ ≤ 1e-5 · max(1, ‖x‖)`.
pub fn is_exact_recovery(err_l2: f64, x_norm: f64) -> bool {
    err_l2 <= 1e-5 * x_norm.max(1.0)
}

fn noise_count(noise: &NoiseSpec) -> usize {
    match *noise {
        NoiseSpec::Sparse { count, .. } => count,
        _ => 0,
    }
}

/// Runs one trial; failures are recorded, not returned.
pub fn run_trial(spec: &TrialSpec) -> TrialRecord {
    let start = spec.timing.then(Instant::now);
    let mut record = TrialRecord {
        n: spec.n,
        m: spec.m,
        k: spec.k,
        s: noise_count(&spec.noise),
        eps: 0.0,
        seed: spec.seed,
        status: None,
        error: None,
        err_l2: f64::NAN,
        e0: f64::NAN,
        bound: f64::NAN,
        bound_holds: false,
        exact_recovery: false,
        iters: 0,
        runtime_ms: None,
    };
    let outcome = (|| -> Result<(SparseInstance<f64>, SolverResult<f64>)> {
        let inst = make_instance::<f64>(
            spec.n,
            spec.m,
            spec.k,
            &spec.noise,
            &spec.signal,
            &RngSpec::new(spec.seed, 0),
        )?;
        let result = solve(&inst.phi, &inst.y, inst.epsilon, &spec.solver)?;
        Ok((inst, result))
    })();
    match outcome {
        Ok((inst, result)) => {
            let err = result.u_star.sub(&inst.x).expect("same length").norm2();
            let e0 = compress_error_e0(&inst.x, spec.k).expect("k validated");
            let bound = theorem_bound(inst.epsilon, spec.m, e0);
            record.eps = inst.epsilon;
            record.status = Some(result.status);
            record.err_l2 = err;
            record.e0 = e0;
            record.bound = bound;
            record.bound_holds = result.status.is_feasible() && bound_holds(err, bound, inst.x.norm2());
            record.exact_recovery = result.status.is_feasible() && is_exact_recovery(err, inst.x.norm2());
            record.iters = result.iters;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.runtime_ms = start.map(|t| t.elapsed().as_secs_f64() * 1e3);
    record
}

/// Cells over `ms × ks × noise_counts`, `trials` each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub ms: Vec<usize>,
    pub ks: Vec<usize>,
    /// Corrupted measurements per trial; 0 means noiseless.
    pub noise_counts: Vec<usize>,
    /// `‖n‖₁ = ε` for sparse noise.
    pub noise_l1: f64,
    pub trials: usize,
    pub seed: u64,
    pub signal: SignalSpec,
    pub solver: SolverConfig<f64>,
    pub timing: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 64,
            ms: vec![32, 48],
            ks: vec![2, 4],
            noise_counts: vec![2],
            noise_l1: 1.0,
            trials: 3,
            seed: 0,
            signal: SignalSpec::Sparse {
                amplitude: Amplitude::Gaussian,
            },
            solver: SolverConfig::default(),
            timing: false,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 {
            return Err(Error::invalid("grid needs N ≥ 1 and at least one trial"));
        }
        if self.ms.is_empty() || self.ks.is_empty() || self.noise_counts.is_empty() {
            return Err(Error::invalid("grid axes must be nonempty"));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k == 0 || k > self.n) {
            return Err(Error::invalid(format!("K = {k} must lie in 1..=N (N = {})", self.n)));
        }
        if let Some(&m) = self.ms.iter().find(|&&m| m == 0) {
            return Err(Error::invalid(format!("M = {m} must be positive")));
        }
        if let Some(&s) = self
            .noise_counts
            .iter()
            .find(|&&s| s > 0 && self.ms.iter().any(|&m| s > m))
        {
            return Err(Error::invalid(format!("noise count {s} exceeds some M")));
        }
        if !(self.noise_l1 >= 0.0 && self.noise_l1.is_finite()) {
            return Err(Error::invalid("noise_l1 must be finite and nonnegative"));
        }
        self.solver.validate()
    }

    /// Trial specs in cell order (`M` outermost, then `K`, then `s`), trials innermost.
    pub fn trial_specs(&self) -> Vec<TrialSpec> {
        let mut out = Vec::new();
        let mut cell = 0u64;
        for &m in &self.ms {
            for &k in &self.ks {
                for &s in &self.noise_counts {
                    let noise = if s == 0 {
                        NoiseSpec::None
                    } else {
                        NoiseSpec::Sparse {
                            count: s,
                            epsilon: self.noise_l1,
                        }
                    };
                    for t in 0..self.trials as u64 {
                        out.push(TrialSpec {
                            n: self.n,
                            m,
                            k,
                            signal: self.signal,
                            noise,
                            seed: self.seed.wrapping_add(cell * self.trials as u64 + t),
                            solver: self.solver.clone(),
                            timing: self.timing,
                        });
                    }
                    cell += 1;
                }
            }
        }
        out
    }
}

/// All trials of the grid, in the order of [`GridSpec::trial_specs`].
pub fn run_grid(spec: &GridSpec) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    Ok(spec.trial_specs().par_iter().map(run_trial).collect())
}

pub const TRIALS_CSV_HEADER: &str = "N,M,K,s,eps,seed,status,err_l2,e0,bound,bound_holds,iters,runtime_ms";

fn status_name(record: &TrialRecord) -> &'static str {
    match record.status {
        Some(SolverStatus::Optimal) => "optimal",
        Some(SolverStatus::FeasibleSuboptimal) => "feasible-suboptimal",
        Some(SolverStatus::InfeasibleDetected) => "infeasible-detected",
        Some(SolverStatus::IterationLimit) => "iteration-limit",
        None => "error",
    }
}

/// One row per trial under [`TRIALS_CSV_HEADER`].
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(TRIALS_CSV_HEADER);
    out.push('\n');
    for r in records {
        let runtime = r.runtime_ms.map(|t| format!("{t:.3}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.m,
            r.k,
            r.s,
            r.eps,
            r.seed,
            status_name(r),
            r.err_l2,
            r.e0,
            r.bound,
            r.bound_holds,
            r.iters,
            runtime
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Quantiles {
            min: v[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub s: usize,
    pub trials: usize,
    pub feasible: usize,
    pub failed: usize,
    pub exact_recovery_rate: f64,
    pub bound_rate: f64,
    pub error_quantiles: Option<Quantiles>,
    pub mean_iters: f64,
}

/// Per-cell aggregates, folded in record order.
pub fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<(usize, usize, usize, usize, Vec<&TrialRecord>)> = Vec::new();
    for r in records {
        match cells.last_mut() {
            Some(c) if (c.0, c.1, c.2, c.3) == (r.n, r.m, r.k, r.s) => c.4.push(r),
            _ => cells.push((r.n, r.m, r.k, r.s, vec![r])),
        }
    }
    cells
        .into_iter()
        .map(|(n, m, k, s, rs)| {
            let trials = rs.len();
            let feasible = rs.iter().filter(|r| r.status.is_some_and(|s| s.is_feasible())).count();
            let failed = rs.iter().filter(|r| r.status.is_none()).count();
            let errors: Vec<f64> = rs.iter().filter(|r| r.status.is_some()).map(|r| r.err_l2).collect();
            let rate = |f: &dyn Fn(&TrialRecord) -> bool| rs.iter().filter(|r| f(r)).count() as f64 / trials as f64;
            CellSummary {
                n,
                m,
                k,
                s,
                trials,
                feasible,
                failed,
                exact_recovery_rate: rate(&|r| r.exact_recovery),
                bound_rate: rate(&|r| r.bound_holds),
                error_quantiles: Quantiles::of(&errors),
                mean_iters: rs.iter().map(|r| r.iters as f64).sum::<f64>() / trials as f64,
            }
        })
        .collect()
}
