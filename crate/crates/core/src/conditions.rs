//! Empirical estimation of the matrix conditions behind the recovery guarantee.
//!
//! For `u ∈ Σ₂K` and `v ∈ Σ_K` with `⟨u, v⟩ = 0` the guarantee needs
//!
//! ```text
//! |(1/M)‖Φu‖₁ − ν‖u‖| ≤ δ₂K ‖u‖
//! |(1/M)⟨sign(Φu), Φv⟩| ≤ δ₃K ‖v‖
//! ```
//!
//! The true suprema are combinatorial, so the estimators return lower bounds,
//! each backed by a stored witness that re-evaluates to the reported value.
//! Supports are enumerated when there are few enough of them; otherwise they
//! are sampled. On a two-dimensional support the search over the unit circle
//! is exact: `sign(Φ_S w)` is constant between the `M` breakpoints where a
//! row of `Φ_S` is orthogonal to `w`, so finitely many candidates cover the
//! whole circle. Larger supports use multi-start ascent.
//!
//! The lemma helpers evaluate the sample-size and probability formulas with
//! user-supplied constants `C` and `c`. Their defaults of 1 are placeholders:
//! the constants are existential and have no known numeric value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::gen_gaussian_matrix;
use crate::model::{dot, norm2, sign, top_k_indices, Matrix, Vector};
use crate::rng::{RngSpec, SeededRng};
use crate::scalar::Scalar;

/// `ν = E|g| = √(2/π)` for `g ~ N(0, 1)`.
pub fn nu_gaussian<T: Scalar>() -> T {
    T::FRAC_2_PI().sqrt()
}

fn check_cols<T: Scalar>(phi: &Matrix<T>, v: &Vector<T>, what: &'static str) -> Result<()> {
    if v.len() != phi.cols() {
        return Err(Error::DimensionMismatch {
            what,
            expected: phi.cols(),
            got: v.len(),
        });
    }
    Ok(())
}

/// `|(1/M)‖Φu‖₁ − ν‖u‖| / ‖u‖`, the smallest `δ` that `u` is consistent with.
pub fn deviation_norm<T: Scalar>(phi: &Matrix<T>, u: &Vector<T>, nu: T) -> Result<T> {
    check_cols(phi, u, "vector length vs matrix columns")?;
    let norm = u.norm2();
    if norm == T::zero() {
        return Err(Error::invalid("deviation_norm needs a nonzero vector"));
    }
    let mut buf = vec![T::zero(); phi.rows()];
    phi.mul_into(u.as_slice(), &mut buf);
    let mean = l1_mean(&buf);
    Ok((mean - nu * norm).abs() / norm)
}

/// `|(1/M)⟨sign(Φu), Φv⟩| / ‖v‖` for orthogonal `u` and `v`.
pub fn deviation_cross<T: Scalar>(phi: &Matrix<T>, u: &Vector<T>, v: &Vector<T>) -> Result<T> {
    check_cols(phi, u, "first vector length vs matrix columns")?;
    check_cols(phi, v, "second vector length vs matrix columns")?;
    let (nu_, nv) = (u.norm2(), v.norm2());
    if nu_ == T::zero() || nv == T::zero() {
        return Err(Error::invalid("deviation_cross needs nonzero vectors"));
    }
    let inner = dot(u.as_slice(), v.as_slice());
    if inner.abs() > T::lit(1e-12) * nu_ * nv {
        return Err(Error::invalid(format!(
            "deviation_cross needs orthogonal vectors, ⟨u, v⟩ = {inner}"
        )));
    }
    let m = phi.rows();
    let mut pu = vec![T::zero(); m];
    let mut pv = vec![T::zero(); m];
    phi.mul_into(u.as_slice(), &mut pu);
    phi.mul_into(v.as_slice(), &mut pv);
    let corr = pu.iter().zip(&pv).fold(T::zero(), |acc, (&a, &b)| acc + sign(a) * b);
    Ok((corr / T::from_usize_lossy(m)).abs() / nv)
}

fn l1_mean<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, &x| acc + x.abs()) / T::from_usize_lossy(values.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    /// Evaluate the sampled directions only.
    None,
    /// Improve every sampled direction by local ascent; exact on two-dimensional supports.
    #[default]
    LocalAscent,
}

/// How much work an estimator may spend.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingBudget {
    /// Random supports drawn when enumeration is too expensive.
    pub samples: usize,
    /// Starting directions per support.
    pub restarts: usize,
    /// Ascent iterations per start.
    pub ascent_steps: usize,
    /// Supports are enumerated when there are at most this many.
    pub exhaustive_cap: u64,
    pub refinement: Refinement,
    /// Also search pairs whose supports overlap (δ₃K only).
    pub overlapping: bool,
}

impl Default for SamplingBudget {
    fn default() -> Self {
        SamplingBudget {
            samples: 2000,
            restarts: 4,
            ascent_steps: 60,
            exhaustive_cap: 10_000,
            refinement: Refinement::LocalAscent,
            overlapping: true,
        }
    }
}

impl SamplingBudget {
    /// No evaluations at all; every estimate is zero.
    pub fn zero() -> Self {
        SamplingBudget {
            samples: 0,
            restarts: 0,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Witness<T> {
    pub support: Vec<usize>,
    pub u: Vector<T>,
    /// Second vector of a cross-term witness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vector<T>>,
    pub value: T,
}

/// Lower bound on one deviation constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeltaEstimate<T> {
    pub value: T,
    pub witness: Option<Witness<T>>,
    /// Directions evaluated.
    pub evaluations: usize,
    /// Supports visited.
    pub supports: u64,
    /// All supports were visited.
    pub exhaustive: bool,
    /// The search on every visited support was exact.
    pub sphere_exact: bool,
}

impl<T: Scalar> DeltaEstimate<T> {
    fn empty() -> Self {
        DeltaEstimate {
            value: T::zero(),
            witness: None,
            evaluations: 0,
            supports: 0,
            exhaustive: false,
            sphere_exact: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Delta3Estimate<T> {
    /// Pairs with disjoint supports.
    pub disjoint: DeltaEstimate<T>,
    /// Pairs with overlapping supports, `v` projected onto `u⊥`.
    pub overlapping: DeltaEstimate<T>,
}

impl<T: Scalar> Delta3Estimate<T> {
    pub fn value(&self) -> T {
        self.disjoint.value.max(self.overlapping.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConditionEstimate<T> {
    pub nu: T,
    pub delta2k_lower: T,
    pub delta3k_lower: T,
    pub k: usize,
    pub samples: usize,
    pub restarts: usize,
    pub refinement: Refinement,
    /// Every support of both searches was enumerated.
    pub exhaustive: bool,
    pub delta2k: DeltaEstimate<T>,
    pub delta3k: Delta3Estimate<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionVerdict {
    Satisfied,
    Violated,
    Inconclusive,
}

/// Checks `δ₂K + δ₃K ≤ ν − 1/2` against lower bounds: these can refute the
/// condition, and certify it only after enumeration.
pub fn theorem_condition_holds<T: Scalar>(est: &ConditionEstimate<T>) -> ConditionVerdict {
    let sum = est.delta2k_lower + est.delta3k_lower;
    let threshold = est.nu - T::lit(0.5);
    if sum > threshold {
        ConditionVerdict::Violated
    } else if est.exhaustive {
        ConditionVerdict::Satisfied
    } else {
        ConditionVerdict::Inconclusive
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Supports to search and whether they are all of them.
fn supports(n: usize, size: usize, budget: &SamplingBudget, rng: &RngSpec) -> (Vec<Vec<usize>>, bool) {
    if budget.restarts == 0 {
        return (Vec::new(), false);
    }
    if binomial(n, size) <= budget.exhaustive_cap {
        (combinations(n, size), true)
    } else {
        let list = (0..budget.samples)
            .map(|i| rng.substream(i as u64).rng().subset(n, size))
            .collect();
        (list, false)
    }
}

fn random_direction<T: Scalar>(rng: &mut SeededRng, d: usize) -> Vec<T> {
    loop {
        let w: Vec<T> = (0..d).map(|_| T::lit(rng.standard_normal())).collect();
        let norm = norm2(&w);
        if norm > T::zero() {
            return w.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn normalize<T: Scalar>(w: &mut [T]) -> bool {
    let norm = norm2(w);
    if norm == T::zero() || !norm.is_finite() {
        return false;
    }
    w.iter_mut().for_each(|x| *x = *x / norm);
    true
}

fn embed<T: Scalar>(n: usize, support: &[usize], w: &[T]) -> Vec<T> {
    let mut u = vec![T::zero(); n];
    for (&i, &c) in support.iter().zip(w) {
        u[i] = c;
    }
    u
}

/// Evaluation of the two deviation objectives restricted to one support.
struct Local<'a, T> {
    phi: &'a Matrix<T>,
    support: &'a [usize],
    buf: Vec<T>,
    signs: Vec<T>,
    grad: Vec<T>,
    evaluations: usize,
}

impl<'a, T: Scalar> Local<'a, T> {
    fn new(phi: &'a Matrix<T>, support: &'a [usize]) -> Self {
        Local {
            phi,
            support,
            buf: vec![T::zero(); phi.rows()],
            signs: vec![T::zero(); phi.rows()],
            grad: vec![T::zero(); phi.cols()],
            evaluations: 0,
        }
    }

    fn m(&self) -> T {
        T::from_usize_lossy(self.phi.rows())
    }

    /// `(1/M)‖Φ_S w‖₁`, leaving `sign(Φ_S w)` in `signs`.
    fn mean(&mut self, w: &[T]) -> T {
        self.evaluations += 1;
        self.phi.mul_sparse_into(self.support, w, &mut self.buf);
        for (s, &b) in self.signs.iter_mut().zip(&self.buf) {
            *s = sign(b);
        }
        l1_mean(&self.buf)
    }

    /// `(Φ_Sᵀ s)/M` for the current signs, as a support-local vector.
    fn local_gradient(&self) -> Vec<T> {
        let m = self.m();
        self.support
            .iter()
            .map(|&i| {
                let mut acc = T::zero();
                for (j, &s) in self.signs.iter().enumerate() {
                    acc = acc + s * self.phi.get(j, i);
                }
                acc / m
            })
            .collect()
    }

    /// `(Φᵀ sign(Φ_S w))/M` over all columns, in `grad`.
    fn full_gradient(&mut self, w: &[T]) {
        self.mean(w);
        self.phi.mul_t_into(&self.signs, &mut self.grad);
        let m = self.m();
        self.grad.iter_mut().for_each(|g| *g = *g / m);
    }

    /// Candidate directions on a two-dimensional support: the breakpoints and,
    /// for each arc between them, the maximizer of the linear piece.
    fn circle_candidates(&mut self) -> Vec<[T; 2]> {
        let (a, b) = (self.support[0], self.support[1]);
        let pi = T::PI();
        let mut angles: Vec<T> = (0..self.phi.rows())
            .filter_map(|j| {
                let (p, q) = (self.phi.get(j, a), self.phi.get(j, b));
                if p == T::zero() && q == T::zero() {
                    return None;
                }
                let t = q.atan2(p) + T::FRAC_PI_2();
                Some(((t % pi) + pi) % pi)
            })
            .collect();
        angles.sort_by(|x, y| x.partial_cmp(y).expect("finite angles"));
        angles.dedup();
        let mut out: Vec<[T; 2]> = angles.iter().map(|&t| [t.cos(), t.sin()]).collect();
        if angles.is_empty() {
            out.push([T::one(), T::zero()]);
            return out;
        }
        let two = T::lit(2.0);
        for (i, &t) in angles.iter().enumerate() {
            let next = if i + 1 < angles.len() {
                angles[i + 1]
            } else {
                angles[0] + pi
            };
            let mid = (t + next) / two;
            let w = [mid.cos(), mid.sin()];
            self.mean(&w);
            let g = self.local_gradient();
            let mut g = [g[0], g[1]];
            if normalize(&mut g) {
                out.push(g);
            }
            out.push(w);
        }
        out
    }
}

/// Best candidate found on one support, with the index used for tie-breaking.
struct Best<T> {
    value: T,
    index: usize,
    u: Vec<T>,
    v: Option<Vec<T>>,
}

fn better<T: Scalar>(a: Option<Best<T>>, b: Option<Best<T>>) -> Option<Best<T>> {
    match (a, b) {
        (Some(a), Some(b)) => {
            if b.value > a.value || (b.value == a.value && b.index < a.index) {
                Some(b)
            } else {
                Some(a)
            }
        }
        (a, None) => a,
        (None, b) => b,
    }
}

struct Found<T> {
    best: Option<Best<T>>,
    evaluations: usize,
    exact: bool,
}

fn merge<T: Scalar>(
    phi: &Matrix<T>,
    results: Vec<Found<T>>,
    supports: &[Vec<usize>],
    complete: bool,
    eval: impl Fn(&Best<T>) -> T,
) -> DeltaEstimate<T> {
    let mut est = DeltaEstimate::empty();
    est.supports = supports.len() as u64;
    est.exhaustive = complete;
    est.sphere_exact = !results.is_empty() && results.iter().all(|r| r.exact);
    let mut best = None;
    for r in results {
        est.evaluations += r.evaluations;
        best = better(best, r.best);
    }
    if let Some(b) = best {
        let value = eval(&b);
        let support: Vec<usize> = (0..phi.cols())
            .filter(|&i| b.u[i] != T::zero() || b.v.as_ref().is_some_and(|v| v[i] != T::zero()))
            .collect();
        est.value = value;
        est.witness = Some(Witness {
            support,
            u: Vector::from_raw(b.u),
            v: b.v.map(Vector::from_raw),
            value,
        });
    }
    est
}

fn check_k(n: usize, k: usize, factor: usize) -> Result<()> {
    if k == 0 || factor * k > n {
        return Err(Error::invalid(format!(
            "need 1 ≤ K and {factor}K ≤ N, got K = {k}, N = {n}"
        )));
    }
    Ok(())
}

/// Lower bound on `δ₂K`: the largest `deviation_norm` found over `u ∈ Σ₂K`.
pub fn estimate_delta2k<T: Scalar>(
    phi: &Matrix<T>,
    k: usize,
    nu: T,
    budget: &SamplingBudget,
    rng: &RngSpec,
) -> Result<DeltaEstimate<T>> {
    check_k(phi.cols(), k, 2)?;
    let n = phi.cols();
    let (list, complete) = supports(n, 2 * k, budget, rng);
    let results: Vec<Found<T>> = list
        .par_iter()
        .enumerate()
        .map(|(idx, s)| delta2k_on_support(phi, s, nu, budget, &rng.substream(idx as u64), idx))
        .collect();
    Ok(merge(phi, results, &list, complete, |b| {
        deviation_norm(phi, &Vector::from_raw(b.u.clone()), nu).expect("witness is nonzero")
    }))
}

fn delta2k_on_support<T: Scalar>(
    phi: &Matrix<T>,
    support: &[usize],
    nu: T,
    budget: &SamplingBudget,
    rng: &RngSpec,
    index: usize,
) -> Found<T> {
    let n = phi.cols();
    let mut local = Local::new(phi, support);
    let mut best: Option<Best<T>> = None;
    let mut offer = |w: &[T], f: T| {
        let cand = Best {
            value: (f - nu).abs(),
            index,
            u: embed(n, support, w),
            v: None,
        };
        best = better(best.take(), Some(cand));
    };
    let exact = budget.refinement == Refinement::LocalAscent && support.len() == 2;
    if exact {
        for w in local.circle_candidates() {
            let f = local.mean(&w);
            offer(&w, f);
        }
    } else {
        for r in 0..budget.restarts {
            let start: Vec<T> = random_direction(&mut rng.substream(r as u64).rng(), support.len());
            let f = local.mean(&start);
            offer(&start, f);
            if budget.refinement == Refinement::None {
                continue;
            }
            // Ascent for the maximum: w ← Φ_Sᵀ sign(Φ_S w), normalized.
            let mut fw = f;
            for _ in 0..budget.ascent_steps {
                let mut g = local.local_gradient();
                if !normalize(&mut g) {
                    break;
                }
                let fg = local.mean(&g);
                if fg <= fw {
                    break;
                }
                fw = fg;
                offer(&g, fw);
            }
            // Projected subgradient descent for the minimum.
            let mut w = start;
            local.mean(&w);
            for t in 0..budget.ascent_steps {
                let g = local.local_gradient();
                let along = dot(&g, &w);
                let eta = T::lit(0.5) / T::from_usize_lossy(t + 1).sqrt();
                for (wi, &gi) in w.iter_mut().zip(&g) {
                    *wi = *wi - eta * (gi - along * *wi);
                }
                if !normalize(&mut w) {
                    break;
                }
                let fw = local.mean(&w);
                offer(&w, fw);
            }
        }
    }
    Found {
        best,
        evaluations: local.evaluations,
        exact,
    }
}

/// Lower bound on `δ₃K`, searching disjoint and overlapping pairs separately.
pub fn estimate_delta3k<T: Scalar>(
    phi: &Matrix<T>,
    k: usize,
    budget: &SamplingBudget,
    rng: &RngSpec,
) -> Result<Delta3Estimate<T>> {
    let n = phi.cols();
    check_k(n, k, 2)?;
    let disjoint_possible = 3 * k <= n;
    if !disjoint_possible && !budget.overlapping {
        return Err(Error::invalid(format!(
            "3K > N (K = {k}, N = {n}) leaves no disjoint pairs and overlapping pairs are disabled"
        )));
    }
    let (list, complete) = supports(n, 2 * k, budget, rng);
    let results: Vec<(Found<T>, Found<T>)> = list
        .par_iter()
        .enumerate()
        .map(|(idx, s)| delta3k_on_support(phi, s, k, budget, &rng.substream(idx as u64), idx, disjoint_possible))
        .collect();
    let (disjoint, overlapping): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let eval = |b: &Best<T>| {
        deviation_cross(
            phi,
            &Vector::from_raw(b.u.clone()),
            &Vector::from_raw(b.v.clone().expect("cross witness has v")),
        )
        .expect("witness pair is orthogonal")
    };
    let mut d = merge(phi, disjoint, &list, complete, eval);
    let mut o = merge(phi, overlapping, &list, complete, eval);
    if !disjoint_possible {
        d = DeltaEstimate::empty();
        d.exhaustive = complete;
    }
    if !budget.overlapping {
        o = DeltaEstimate::empty();
        o.exhaustive = complete;
    }
    Ok(Delta3Estimate {
        disjoint: d,
        overlapping: o,
    })
}

fn delta3k_on_support<T: Scalar>(
    phi: &Matrix<T>,
    support: &[usize],
    k: usize,
    budget: &SamplingBudget,
    rng: &RngSpec,
    index: usize,
    disjoint: bool,
) -> (Found<T>, Found<T>) {
    let n = phi.cols();
    let mut local = Local::new(phi, support);
    let mut best_d: Option<Best<T>> = None;
    let mut best_o: Option<Best<T>> = None;
    let in_support = {
        let mut mask = vec![false; n];
        support.iter().for_each(|&i| mask[i] = true);
        mask
    };

    // Best v for a fixed u; returns the disjoint value used to drive the ascent.
    let score = |local: &mut Local<T>, w: &[T], best_d: &mut Option<Best<T>>, best_o: &mut Option<Best<T>>| -> T {
        local.full_gradient(w);
        let g = &local.grad;
        let u = embed(n, support, w);
        let mut drive = T::zero();
        if disjoint {
            // sup over v supported off supp u is the norm of the K largest |g_i| there.
            let off: Vec<T> = (0..n).map(|i| if in_support[i] { T::zero() } else { g[i] }).collect();
            let top = top_k_indices(&off, k);
            let mut v = vec![T::zero(); n];
            for &i in &top {
                v[i] = off[i];
            }
            let value = norm2(&v);
            drive = value;
            if value > T::zero() {
                *best_d = better(
                    best_d.take(),
                    Some(Best {
                        value,
                        index,
                        u: u.clone(),
                        v: Some(v),
                    }),
                );
            }
        }
        if budget.overlapping {
            for &pivot in support {
                let rest: Vec<T> = (0..n).map(|i| if i == pivot { T::zero() } else { g[i] }).collect();
                let mut cols = top_k_indices(&rest, k - 1);
                cols.push(pivot);
                let mut v = vec![T::zero(); n];
                for &i in &cols {
                    v[i] = g[i];
                }
                let uu: T = cols.iter().fold(T::zero(), |acc, &i| acc + u[i] * u[i]);
                if uu > T::zero() {
                    let c = cols.iter().fold(T::zero(), |acc, &i| acc + v[i] * u[i]) / uu;
                    for &i in &cols {
                        v[i] = v[i] - c * u[i];
                    }
                }
                let value = norm2(&v);
                if value > T::lit(1e-12) * norm2(g).max(T::min_positive_value()) {
                    *best_o = better(
                        best_o.take(),
                        Some(Best {
                            value,
                            index,
                            u: u.clone(),
                            v: Some(v),
                        }),
                    );
                }
            }
        }
        drive
    };

    let exact = budget.refinement == Refinement::LocalAscent && support.len() == 2;
    if exact {
        for w in local.circle_candidates() {
            score(&mut local, &w, &mut best_d, &mut best_o);
        }
    } else {
        for r in 0..budget.restarts {
            let mut stream = rng.substream(r as u64).rng();
            let mut w: Vec<T> = random_direction(&mut stream, support.len());
            let mut fw = score(&mut local, &w, &mut best_d, &mut best_o);
            if budget.refinement == Refinement::None {
                continue;
            }
            // Random-perturbation hill climbing on the sign pattern.
            let mut step = T::lit(0.5);
            for _ in 0..budget.ascent_steps {
                let mut cand = w.clone();
                for c in cand.iter_mut() {
                    *c = *c + step * T::lit(stream.standard_normal());
                }
                if !normalize(&mut cand) {
                    continue;
                }
                let fc = score(&mut local, &cand, &mut best_d, &mut best_o);
                if fc > fw {
                    w = cand;
                    fw = fc;
                } else {
                    step = step * T::lit(0.7);
                }
            }
        }
    }
    let evaluations = local.evaluations;
    (
        Found {
            best: best_d,
            evaluations,
            exact: exact && disjoint,
        },
        Found {
            best: best_o,
            evaluations,
            exact: false,
        },
    )
}

/// Both estimates plus the verdict inputs.
pub fn estimate_conditions<T: Scalar>(
    phi: &Matrix<T>,
    k: usize,
    nu: T,
    budget: &SamplingBudget,
    rng: &RngSpec,
) -> Result<ConditionEstimate<T>> {
    let delta2k = estimate_delta2k(phi, k, nu, budget, &rng.substream(0))?;
    let delta3k = estimate_delta3k(phi, k, budget, &rng.substream(1))?;
    let exhaustive = delta2k.exhaustive && delta3k.disjoint.exhaustive && delta3k.overlapping.exhaustive;
    Ok(ConditionEstimate {
        nu,
        delta2k_lower: delta2k.value,
        delta3k_lower: delta3k.value(),
        k,
        samples: delta2k.evaluations + delta3k.disjoint.evaluations,
        restarts: budget.restarts,
        refinement: budget.refinement,
        exhaustive,
        delta2k,
        delta3k,
    })
}

/// Inputs of the sample-size condition `M ≥ C δ⁻⁶ K ln(2N/K)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaBoundInputs {
    #[serde(rename = "C")]
    pub c_big: f64,
    #[serde(rename = "c")]
    pub c_small: f64,
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

impl LemmaBoundInputs {
    /// Placeholder constants `C = c = 1`.
    pub fn with_unit_constants(delta: f64, k: usize, n: usize) -> Self {
        LemmaBoundInputs {
            c_big: 1.0,
            c_small: 1.0,
            delta,
            k,
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_big > 0.0 && self.c_small > 0.0 && self.c_big.is_finite() && self.c_small.is_finite()) {
            return Err(Error::invalid("constants C and c must be positive"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::invalid(format!("δ = {} must lie in (0, 1]", self.delta)));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::invalid(format!(
                "need 1 ≤ K ≤ N, got K = {}, N = {}",
                self.k, self.n
            )));
        }
        Ok(())
    }
}

/// `⌈C δ⁻⁶ K ln(2N/K)⌉`.
pub fn lemma_sample_bound(inputs: &LemmaBoundInputs) -> Result<u64> {
    inputs.validate()?;
    let ratio = 2.0 * inputs.n as f64 / inputs.k as f64;
    if ratio <= 1.0 {
        return Err(Error::invalid("2N/K must exceed 1"));
    }
    let value = inputs.c_big * inputs.delta.powi(-6) * inputs.k as f64 * ratio.ln();
    Ok(value.ceil() as u64)
}

/// `1 − 8 exp(−c δ² M)`, clamped to `[0, 1)`.
pub fn lemma_probability_bound(c: f64, delta: f64, m: usize) -> f64 {
    let p = 1.0 - 8.0 * (-c * delta * delta * m as f64).exp();
    p.clamp(0.0, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub samples_per_trial: usize,
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaTrial {
    pub norm_violation_fraction: f64,
    pub cross_violation_fraction: f64,
    pub max_norm_deviation: f64,
    pub max_cross_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckReport {
    pub config: LemmaCheckConfig,
    pub nu: f64,
    /// Fraction of sampled unit `u` with `|(1/M)‖Φu‖₁ − ν| > δ`.
    pub norm_violation_fraction: f64,
    /// Fraction of sampled orthogonal pairs with `|(1/M)⟨sign(Φu), Φv⟩| > δ`.
    pub cross_violation_fraction: f64,
    /// Mean of `(1/M)‖Φu‖₁` over all sampled unit `u`.
    pub mean_normalized_l1: f64,
    pub trials: Vec<LemmaTrial>,
}

fn sparse_unit(rng: &mut SeededRng, n: usize, k: usize) -> (Vec<usize>, Vec<f64>) {
    let support = rng.subset(n, k);
    let coeffs = random_direction::<f64>(rng, k);
    (support, coeffs)
}

/// Sampled check of both concentration statements on fresh Gaussian matrices.
pub fn montecarlo_lemma_check(config: &LemmaCheckConfig, rng: &RngSpec) -> Result<LemmaCheckReport> {
    let LemmaCheckConfig { n, m, k, delta, .. } = *config;
    if k == 0 || k > n || m == 0 {
        return Err(Error::invalid(format!(
            "need 1 ≤ K ≤ N and M ≥ 1, got N = {n}, M = {m}, K = {k}"
        )));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::invalid("δ must be finite and nonnegative"));
    }
    let nu = nu_gaussian::<f64>();
    let per_trial: Vec<Result<(LemmaTrial, f64)>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let spec = rng.substream(t as u64);
            let phi = gen_gaussian_matrix::<f64>(m, n, &spec.substream(0))?;
            let mut draw = spec.substream(1).rng();
            let mut pu = vec![0.0; m];
            let mut pv = vec![0.0; m];
            let (mut norm_bad, mut cross_bad, mut sum) = (0usize, 0usize, 0.0);
            let (mut max_norm, mut max_cross) = (0.0f64, 0.0f64);
            for _ in 0..config.samples_per_trial {
                let (su, cu) = sparse_unit(&mut draw, n, k);
                phi.mul_sparse_into(&su, &cu, &mut pu);
                let mean = l1_mean(&pu);
                sum += mean;
                let dev = (mean - nu).abs();
                max_norm = max_norm.max(dev);
                norm_bad += usize::from(dev > delta);

                // v on its own support, projected onto u⊥ there.
                let (sv, cv) = loop {
                    let (sv, mut cv) = sparse_unit(&mut draw, n, k);
                    // u restricted to supp v
                    let uv: Vec<f64> = sv
                        .iter()
                        .map(|i| su.iter().position(|j| j == i).map_or(0.0, |p| cu[p]))
                        .collect();
                    let uu = dot(&uv, &uv);
                    if uu > 0.0 {
                        let c = dot(&uv, &cv) / uu;
                        for (y, x) in cv.iter_mut().zip(&uv) {
                            *y -= c * x;
                        }
                    }
                    if normalize(&mut cv) {
                        break (sv, cv);
                    }
                };
                phi.mul_sparse_into(&sv, &cv, &mut pv);
                let corr = pu.iter().zip(&pv).map(|(&a, &b)| sign(a) * b).sum::<f64>() / m as f64;
                max_cross = max_cross.max(corr.abs());
                cross_bad += usize::from(corr.abs() > delta);
            }
            let s = config.samples_per_trial.max(1) as f64;
            Ok((
                LemmaTrial {
                    norm_violation_fraction: norm_bad as f64 / s,
                    cross_violation_fraction: cross_bad as f64 / s,
                    max_norm_deviation: max_norm,
                    max_cross_deviation: max_cross,
                },
                sum,
            ))
        })
        .collect();
    let mut trials = Vec::with_capacity(config.trials);
    let mut total = 0.0;
    for r in per_trial {
        let (t, s) = r?;
        trials.push(t);
        total += s;
    }
    let count = (config.trials * config.samples_per_trial).max(1) as f64;
    let frac = |f: fn(&LemmaTrial) -> f64| trials.iter().map(f).sum::<f64>() / config.trials.max(1) as f64;
    Ok(LemmaCheckReport {
        config: *config,
        nu,
        norm_violation_fraction: frac(|t| t.norm_violation_fraction),
        cross_violation_fraction: frac(|t| t.cross_violation_fraction),
        mean_normalized_l1: total / count,
        trials,
    })
}
