//! Restarted primal-dual hybrid gradient for `min ‖u‖₁ + ι{‖y − Φu‖₁ ≤ ε}`.
//!
//! Iteration, with `B = { z : ‖y − z‖₁ ≤ ε }` and primal weight `ω`:
//!
//! ```text
//! τ = η/ω,  σ = ηω,  η = step_scale / ‖Φ‖₂
//! u⁺ = soft(u − τΦᵀp, τ)
//! w  = p + σΦ(2u⁺ − u)
//! p⁺ = w − σ·proj_B(w/σ)
//! ```
//!
//! Every `check_every` iterations the current and averaged iterates are
//! scored by a KKT residual; the better one becomes the restart point when
//! it has made enough progress, and `ω` is rebalanced from the primal and
//! dual movement since the last restart. At the same checkpoints the active
//! structure of the iterate (signal support and signs, zero residual rows,
//! residual signs) is read off at several thresholds and the corresponding
//! vertex equations are solved directly, in both the primal and the dual.
//! A polished primal point is kept only if it is feasible; every dual point
//! is scaled onto `‖Φᵀq‖∞ ≤ 1` and so always yields a valid lower bound.
//! The solve stops once the best feasible objective is within
//! `objective_tol` of the best bound.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use super::prox::{operator_norm_estimate, project_l1_ball_in_place, soft_threshold_in_place};
use super::{
    check_problem, dual_bound, residual_into, solve_basic, zero_solution, Certificate, Progress, SolverConfig,
    SolverResult, SolverStatus,
};
use crate::error::Result;
use crate::model::{dot, norm1, norm2, norm_inf, Matrix, Vector};
use crate::rng::RngSpec;
use crate::scalar::Scalar;

const NORM_SEED: u64 = 0x5eed_0f0b;
const POLISH_THRESHOLDS: [f64; 4] = [1e-3, 1e-5, 1e-7, 1e-9];
const RESTART_SUFFICIENT: f64 = 0.2;
const RESTART_NECESSARY: f64 = 0.8;
const RESTART_ARTIFICIAL: f64 = 0.36;

struct Iterate<T> {
    u: Vec<T>,
    p: Vec<T>,
    /// `Φu`
    au: Vec<T>,
    /// `Φᵀp`
    atp: Vec<T>,
}

impl<T: Scalar> Iterate<T> {
    fn zeros(m: usize, n: usize) -> Self {
        Iterate {
            u: vec![T::zero(); n],
            p: vec![T::zero(); m],
            au: vec![T::zero(); m],
            atp: vec![T::zero(); n],
        }
    }

    fn accumulate(&mut self, other: &Iterate<T>) {
        for (a, &b) in self.u.iter_mut().zip(&other.u) {
            *a = *a + b;
        }
        for (a, &b) in self.p.iter_mut().zip(&other.p) {
            *a = *a + b;
        }
        for (a, &b) in self.au.iter_mut().zip(&other.au) {
            *a = *a + b;
        }
        for (a, &b) in self.atp.iter_mut().zip(&other.atp) {
            *a = *a + b;
        }
    }

    fn scaled(&self, c: T) -> Iterate<T> {
        let s = |v: &[T]| v.iter().map(|&x| x * c).collect();
        Iterate {
            u: s(&self.u),
            p: s(&self.p),
            au: s(&self.au),
            atp: s(&self.atp),
        }
    }

    fn reset(&mut self) {
        for v in [&mut self.u, &mut self.p, &mut self.au, &mut self.atp] {
            v.iter_mut().for_each(|x| *x = T::zero());
        }
    }
}

fn diff_norm<T: Scalar>(a: &[T], b: &[T]) -> T {
    let d: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    norm2(&d)
}

struct Tracker<T> {
    best_u: Option<Vec<T>>,
    best_objective: T,
    best_residual: T,
    best_q: Vec<T>,
    best_bound: T,
}

impl<T: Scalar> Tracker<T> {
    fn offer_primal(&mut self, u: Vec<T>, objective: T, residual: T) {
        if self.best_u.is_none() || objective < self.best_objective {
            self.best_u = Some(u);
            self.best_objective = objective;
            self.best_residual = residual;
        }
    }

    fn offer_dual(&mut self, q: Vec<T>, bound: T) {
        if bound > self.best_bound {
            self.best_q = q;
            self.best_bound = bound;
        }
    }

    fn gap_closed(&self, tol: T) -> bool {
        self.best_u.is_some() && self.best_objective - self.best_bound <= tol * (T::one() + self.best_objective.abs())
    }
}

struct Context<'a, T> {
    phi: &'a Matrix<T>,
    y: &'a [T],
    epsilon: T,
    feasibility_tol: T,
    scratch_r: Vec<T>,
}

impl<T: Scalar> Context<'_, T> {
    /// Combined primal infeasibility, dual infeasibility and duality gap.
    fn kkt(&self, it: &Iterate<T>) -> T {
        let res: T = it
            .au
            .iter()
            .zip(self.y)
            .fold(T::zero(), |acc, (&a, &y)| acc + (y - a).abs());
        let primal = (res - self.epsilon).max(T::zero());
        let dual = it.atp.iter().fold(T::zero(), |acc, &g| {
            let e = (g.abs() - T::one()).max(T::zero());
            acc + e * e
        });
        let dual_obj = -dot(&it.p, self.y) - self.epsilon * norm_inf(&it.p);
        let gap = (norm1(&it.u) - dual_obj).abs();
        (primal * primal + dual + gap * gap).sqrt()
    }

    fn feasible(&self, residual: T) -> bool {
        residual <= self.epsilon + self.feasibility_tol
    }

    fn evaluate(&mut self, u: &[T]) -> T {
        let mut r = std::mem::take(&mut self.scratch_r);
        let res = residual_into(self.phi, self.y, u, &mut r);
        self.scratch_r = r;
        res
    }

    /// Solves the vertex equations for the structure read off at threshold `theta`.
    fn polish(&mut self, u: &[T], r: &[T], theta: T, tracker: &mut Tracker<T>) {
        let (m, n) = (self.phi.rows(), self.phi.cols());
        let u_scale = norm_inf(u);
        if u_scale == T::zero() {
            return;
        }
        let r_scale = norm_inf(self.y).max(norm_inf(r));
        let support: Vec<usize> = (0..n).filter(|&i| u[i].abs() > theta * u_scale).collect();
        let signs: Vec<T> = support.iter().map(|&i| u[i].signum()).collect();
        let zero_rows: Vec<usize> = (0..m).filter(|&j| r[j].abs() <= theta * r_scale).collect();
        let active_rows: Vec<usize> = (0..m).filter(|&j| r[j].abs() > theta * r_scale).collect();
        let sigma: Vec<T> = active_rows.iter().map(|&j| r[j].signum()).collect();
        let with_budget = !active_rows.is_empty();

        // Primal: Φ_{Z,S} u_S = y_Z and ∑_{j∉Z} σ_j (y_j − Φ_{j,S} u_S) = ε.
        let k = support.len();
        let rows = zero_rows.len() + usize::from(with_budget);
        if rows > 0 {
            let mut a = Vec::with_capacity(rows * k);
            let mut b = Vec::with_capacity(rows);
            for &j in &zero_rows {
                let row = self.phi.row(j);
                a.extend(support.iter().map(|&i| row[i]));
                b.push(self.y[j]);
            }
            if with_budget {
                let mut agg = vec![T::zero(); k];
                let mut rhs = -self.epsilon;
                for (&j, &s) in active_rows.iter().zip(&sigma) {
                    let row = self.phi.row(j);
                    for (c, &i) in support.iter().enumerate() {
                        agg[c] = agg[c] + s * row[i];
                    }
                    rhs = rhs + s * self.y[j];
                }
                a.extend(agg);
                b.push(rhs);
            }
            let (coef, _) = solve_basic(&a, rows, k, &b);
            if coef.iter().all(|c| c.is_finite()) {
                let mut cand = vec![T::zero(); n];
                for (&i, &c) in support.iter().zip(&coef) {
                    cand[i] = c;
                }
                let res = self.evaluate(&cand);
                if self.feasible(res) {
                    let obj = norm1(&cand);
                    tracker.offer_primal(cand, obj, res);
                }
            }
        }

        // Dual: (Φᵀq)_S = sign(u_S) with q_j = λσ_j off the zero rows.
        let unknowns = zero_rows.len() + usize::from(with_budget);
        if unknowns > 0 && k > 0 {
            let mut a = Vec::with_capacity(k * unknowns);
            for &i in &support {
                for &j in &zero_rows {
                    a.push(self.phi.get(j, i));
                }
                if with_budget {
                    let agg = active_rows
                        .iter()
                        .zip(&sigma)
                        .fold(T::zero(), |acc, (&j, &s)| acc + s * self.phi.get(j, i));
                    a.push(agg);
                }
            }
            let (sol, _) = solve_basic(&a, k, unknowns, &signs);
            if sol.iter().all(|c| c.is_finite()) {
                let mut q = vec![T::zero(); m];
                for (&j, &v) in zero_rows.iter().zip(&sol) {
                    q[j] = v;
                }
                if with_budget {
                    let lambda = sol[unknowns - 1];
                    for (&j, &s) in active_rows.iter().zip(&sigma) {
                        q[j] = lambda * s;
                    }
                }
                let (q, bound) = dual_bound(self.phi, self.y, self.epsilon, &q);
                tracker.offer_dual(q, bound);
            }
        }
    }

    fn structure_key(&self, u: &[T], r: &[T], theta: T) -> u64 {
        let u_scale = norm_inf(u);
        let r_scale = norm_inf(self.y).max(norm_inf(r));
        let mut h = DefaultHasher::new();
        for (i, &x) in u.iter().enumerate() {
            if x.abs() > theta * u_scale {
                (i, x > T::zero()).hash(&mut h);
            }
        }
        usize::MAX.hash(&mut h);
        for (j, &x) in r.iter().enumerate() {
            if x.abs() > theta * r_scale {
                (j, x > T::zero()).hash(&mut h);
            }
        }
        h.finish()
    }
}

/// First-order solve; see the module documentation for the scheme.
pub fn solve_first_order<T: Scalar>(
    phi: &Matrix<T>,
    y: &Vector<T>,
    epsilon: T,
    config: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    config.validate()?;
    check_problem(phi, y, epsilon)?;
    if y.norm1() <= epsilon {
        return Ok(zero_solution(phi, y));
    }
    let sp = config.step_params.clone().unwrap_or_default();
    let (m, n) = (phi.rows(), phi.cols());
    let op_norm = operator_norm_estimate(phi, sp.norm_iters, &RngSpec::new(NORM_SEED, 0))?;
    if op_norm == T::zero() {
        // Φ = 0 and ‖y‖₁ > ε: nothing is feasible.
        return Ok(SolverResult {
            objective: T::zero(),
            residual_l1: y.norm1(),
            status: SolverStatus::InfeasibleDetected,
            iters: 0,
            u_star: Vector::zeros(n),
            certificate: None,
            progress: Vec::new(),
        });
    }
    let eta = sp.step_scale / op_norm;
    let lo = T::lit(1e-4);
    let hi = T::lit(1e4);
    let mut omega = sp.primal_weight.unwrap_or_else(|| {
        let w = T::from_usize_lossy(n).sqrt() / y.norm2();
        w.max(lo).min(hi)
    });

    let yv = y.as_slice();
    let mut ctx = Context {
        phi,
        y: yv,
        epsilon,
        feasibility_tol: config.feasibility_tol,
        scratch_r: vec![T::zero(); m],
    };
    let mut tracker = Tracker {
        best_u: None,
        best_objective: T::infinity(),
        best_residual: T::infinity(),
        best_q: vec![T::zero(); m],
        best_bound: T::zero(),
    };
    let mut progress = Vec::new();
    let mut tried: HashSet<u64> = HashSet::new();

    let mut cur = Iterate::zeros(m, n);
    let mut next = Iterate::zeros(m, n);
    let mut sum = Iterate::zeros(m, n);
    let mut count = 0usize;
    let mut anchor_u = cur.u.clone();
    let mut anchor_p = cur.p.clone();
    let mut anchor_kkt = ctx.kkt(&cur);
    let mut prev_candidate_kkt = T::infinity();
    let mut since_restart = 0usize;
    let mut w = vec![T::zero(); m];
    let mut proj_scratch = Vec::new();
    let mut r = vec![T::zero(); m];

    let mut iters = 0;
    let mut status = None;
    while iters < config.max_iters {
        let tau = eta / omega;
        let sigma = eta * omega;

        for i in 0..n {
            next.u[i] = cur.u[i] - tau * cur.atp[i];
        }
        soft_threshold_in_place(&mut next.u, tau);
        phi.mul_into(&next.u, &mut next.au);
        for j in 0..m {
            let extrap = next.au[j] + next.au[j] - cur.au[j];
            w[j] = cur.p[j] + sigma * extrap;
        }
        // p⁺ = w − σ(y + proj_{εB₁}(w/σ − y))
        for j in 0..m {
            r[j] = w[j] / sigma - yv[j];
        }
        project_l1_ball_in_place(&mut r, epsilon, &mut proj_scratch);
        for j in 0..m {
            next.p[j] = w[j] - sigma * (yv[j] + r[j]);
        }
        phi.mul_t_into(&next.p, &mut next.atp);
        std::mem::swap(&mut cur, &mut next);
        sum.accumulate(&cur);
        count += 1;
        since_restart += 1;
        iters += 1;

        if iters % sp.check_every != 0 && iters != config.max_iters {
            continue;
        }

        let avg = sum.scaled(T::one() / T::from_usize_lossy(count));
        let kkt_cur = ctx.kkt(&cur);
        let kkt_avg = ctx.kkt(&avg);
        let (candidate, kkt_cand) = if kkt_avg < kkt_cur {
            (avg, kkt_avg)
        } else {
            (
                Iterate {
                    u: cur.u.clone(),
                    p: cur.p.clone(),
                    au: cur.au.clone(),
                    atp: cur.atp.clone(),
                },
                kkt_cur,
            )
        };

        // Raw iterate and its dual.
        for it in [&cur, &candidate] {
            let res = ctx.evaluate(&it.u);
            if ctx.feasible(res) {
                tracker.offer_primal(it.u.clone(), norm1(&it.u), res);
            }
            let q: Vec<T> = it.p.iter().map(|&v| -v).collect();
            let (q, bound) = dual_bound(phi, yv, epsilon, &q);
            tracker.offer_dual(q, bound);
        }

        // Active-set polish of the candidate.
        let mut resid = vec![T::zero(); m];
        for (j, rj) in resid.iter_mut().enumerate() {
            *rj = yv[j] - candidate.au[j];
        }
        for &theta in &POLISH_THRESHOLDS {
            let theta = T::lit(theta);
            let key = ctx.structure_key(&candidate.u, &resid, theta);
            if tried.insert(key) {
                ctx.polish(&candidate.u, &resid, theta, &mut tracker);
            }
        }

        progress.push(Progress {
            iter: iters,
            best_feasible_objective: tracker.best_u.as_ref().map(|_| tracker.best_objective),
            lower_bound: tracker.best_bound,
        });
        if tracker.gap_closed(config.objective_tol) {
            status = Some(SolverStatus::Optimal);
            break;
        }

        let restart = kkt_cand <= T::lit(RESTART_SUFFICIENT) * anchor_kkt
            || (kkt_cand <= T::lit(RESTART_NECESSARY) * anchor_kkt && kkt_cand > prev_candidate_kkt)
            || T::from_usize_lossy(since_restart) >= T::lit(RESTART_ARTIFICIAL) * T::from_usize_lossy(iters);
        prev_candidate_kkt = kkt_cand;
        if restart {
            let du = diff_norm(&candidate.u, &anchor_u);
            let dp = diff_norm(&candidate.p, &anchor_p);
            let tiny = T::lit(1e-10);
            if du > tiny && dp > tiny {
                let target = (dp / du).ln();
                omega = (T::lit(0.5) * target + T::lit(0.5) * omega.ln()).exp().max(lo).min(hi);
            }
            anchor_u.clone_from(&candidate.u);
            anchor_p.clone_from(&candidate.p);
            anchor_kkt = kkt_cand;
            prev_candidate_kkt = T::infinity();
            cur = candidate;
            sum.reset();
            count = 0;
            since_restart = 0;
        }
    }

    let certificate = Some(Certificate {
        dual: Vector::from_raw(tracker.best_q.clone()),
        lower_bound: tracker.best_bound,
    });
    let result = match (tracker.best_u.take(), status) {
        (Some(u), status) => SolverResult {
            objective: tracker.best_objective,
            residual_l1: tracker.best_residual,
            status: status.unwrap_or(SolverStatus::FeasibleSuboptimal),
            iters,
            u_star: Vector::from_raw(u),
            certificate,
            progress,
        },
        (None, _) => {
            let res = ctx.evaluate(&cur.u);
            SolverResult {
                objective: norm1(&cur.u),
                residual_l1: res,
                status: SolverStatus::IterationLimit,
                iters,
                u_star: Vector::from_raw(cur.u),
                certificate,
                progress,
            }
        }
    };
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{make_instance, Amplitude, NoiseSpec, SignalSpec};
    use crate::solver::{lp_formulate, solve_lp_exact, SolverMethod};

    #[test]
    fn zero_is_optimal_when_inside_budget() {
        let phi = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let y = Vector::new(vec![0.1, -0.2]).unwrap();
        let r = solve_first_order(&phi, &y, 0.5, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn noiseless_overdetermined_recovers_signal() {
        let signal = SignalSpec::Sparse {
            amplitude: Amplitude::Gaussian,
        };
        for seed in 0..5 {
            let inst = make_instance::<f64>(12, 20, 3, &NoiseSpec::None, &signal, &RngSpec::new(seed, 0)).unwrap();
            let r = solve_first_order(&inst.phi, &inst.y, 0.0, &SolverConfig::default()).unwrap();
            assert_eq!(r.status, SolverStatus::Optimal, "seed {seed}");
            assert!(r.u_star.sub(&inst.x).unwrap().norm2() <= 1e-5);
        }
    }

    #[test]
    fn matches_simplex_on_noisy_instances() {
        let signal = SignalSpec::Sparse {
            amplitude: Amplitude::Gaussian,
        };
        for seed in 0..10 {
            let noise = NoiseSpec::Sparse { count: 3, epsilon: 1.0 };
            let inst = make_instance::<f64>(30, 20, 3, &noise, &signal, &RngSpec::new(seed, 5)).unwrap();
            let fo = solve_first_order(&inst.phi, &inst.y, inst.epsilon, &SolverConfig::default()).unwrap();
            let lp = solve_lp_exact(&lp_formulate(&inst.phi, &inst.y, inst.epsilon).unwrap());
            assert_eq!(fo.status, SolverStatus::Optimal, "seed {seed}: {} iters", fo.iters);
            assert!(fo.residual_l1 <= inst.epsilon + 1e-8);
            assert!((fo.objective - lp.objective).abs() <= 1e-6 * (1.0 + lp.objective));
        }
    }

    #[test]
    fn iteration_limit_reports_status() {
        let signal = SignalSpec::Sparse {
            amplitude: Amplitude::Gaussian,
        };
        let noise = NoiseSpec::Sparse { count: 2, epsilon: 0.5 };
        let inst = make_instance::<f64>(30, 15, 3, &noise, &signal, &RngSpec::new(1, 1)).unwrap();
        let config = SolverConfig {
            method: SolverMethod::FirstOrder,
            max_iters: 3,
            ..Default::default()
        };
        let r = solve_first_order(&inst.phi, &inst.y, inst.epsilon, &config).unwrap();
        assert_eq!(r.iters, 3);
        assert!(matches!(
            r.status,
            SolverStatus::IterationLimit | SolverStatus::FeasibleSuboptimal | SolverStatus::Optimal
        ));
        if r.status.is_feasible() {
            assert!(r.residual_l1 <= inst.epsilon + 1e-8);
        }
    }
}
