//! Solvers for `min ‖u‖₁ s.t. ‖y − Φu‖₁ ≤ ε`.
//!
//! Two methods share one result type: an exact simplex on the LP
//! reformulation (small problems, used as the reference) and a restarted
//! primal-dual first-order method with active-set polishing (the scalable
//! path). Both report a dual certificate: a residual multiplier `q` with
//! `‖Φᵀq‖∞ ≤ 1`, whose value `⟨q, y⟩ − ε‖q‖∞` lower-bounds the optimum.

mod first_order;
mod linsolve;
mod lp;
mod prox;
mod simplex;

use serde::{Deserialize, Serialize};

pub use first_order::solve_first_order;
pub use lp::{lp_formulate, BpdnLp, LinearProgram};
pub use prox::{operator_norm_estimate, project_l1_ball, soft_threshold};
pub use simplex::{simplex, LpSolution, LpStatus, SimplexOptions};

pub(crate) use linsolve::solve_basic;

use crate::error::{Error, Result};
use crate::model::{dot, norm1, norm_inf, Matrix, Vector};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    LpExact,
    #[default]
    FirstOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    FeasibleSuboptimal,
    InfeasibleDetected,
    IterationLimit,
}

impl SolverStatus {
    pub fn is_feasible(self) -> bool {
        matches!(self, SolverStatus::Optimal | SolverStatus::FeasibleSuboptimal)
    }
}

/// Tuning of the first-order method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct StepParams<T> {
    /// `τσ‖Φ‖² ≤ step_scale²`; must stay below 1.
    pub step_scale: T,
    /// Initial ratio `σ/τ`; derived from the data when absent.
    pub primal_weight: Option<T>,
    /// Power iterations for the `‖Φ‖₂` estimate.
    pub norm_iters: usize,
    /// Iterations between restart, polish and termination checks.
    pub check_every: usize,
}

impl<T: Scalar> Default for StepParams<T> {
    fn default() -> Self {
        StepParams {
            step_scale: T::lit(0.95),
            primal_weight: None,
            norm_iters: 100,
            check_every: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct SolverConfig<T> {
    pub method: SolverMethod,
    /// Absolute slack allowed on `‖y − Φu‖₁ − ε`.
    pub feasibility_tol: T,
    /// Relative optimality gap `(‖u‖₁ − bound) / (1 + ‖u‖₁)` required for `Optimal`.
    pub objective_tol: T,
    pub max_iters: usize,
    pub step_params: Option<StepParams<T>>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::FirstOrder,
            feasibility_tol: T::lit(1e-8),
            objective_tol: T::lit(1e-7),
            max_iters: 50_000,
            step_params: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_method(method: SolverMethod) -> Self {
        SolverConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.feasibility_tol > T::zero() && self.objective_tol > T::zero()) {
            return Err(Error::invalid("solver tolerances must be strictly positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if let Some(sp) = &self.step_params {
            if !(sp.step_scale > T::zero() && sp.step_scale < T::one()) {
                return Err(Error::invalid("step_scale must lie in (0, 1)"));
            }
            if sp.check_every == 0 || sp.norm_iters == 0 {
                return Err(Error::invalid("check_every and norm_iters must be positive"));
            }
            if let Some(w) = sp.primal_weight {
                if !(w > T::zero() && w.is_finite()) {
                    return Err(Error::invalid("primal_weight must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Dual witness for the optimal value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Certificate<T> {
    /// Residual multiplier `q`, scaled so that `‖Φᵀq‖∞ ≤ 1`.
    pub dual: Vector<T>,
    /// `⟨q, y⟩ − ε‖q‖∞ ≤ min ‖u‖₁`.
    pub lower_bound: T,
}

/// Best objective and bound known at a given iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Progress<T> {
    pub iter: usize,
    pub best_feasible_objective: Option<T>,
    pub lower_bound: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverResult<T> {
    pub objective: T,
    pub residual_l1: T,
    pub status: SolverStatus,
    pub iters: usize,
    pub u_star: Vector<T>,
    #[serde(default)]
    pub certificate: Option<Certificate<T>>,
    #[serde(skip)]
    pub progress: Vec<Progress<T>>,
}

pub(crate) fn check_problem<T: Scalar>(phi: &Matrix<T>, y: &Vector<T>, epsilon: T) -> Result<()> {
    if y.len() != phi.rows() {
        return Err(Error::DimensionMismatch {
            what: "measurement length vs matrix rows",
            expected: phi.rows(),
            got: y.len(),
        });
    }
    if !(epsilon >= T::zero() && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "noise budget must be finite and nonnegative, got {epsilon}"
        )));
    }
    Ok(())
}

/// `‖y − Φu‖₁`, with the residual written to `r`.
pub(crate) fn residual_into<T: Scalar>(phi: &Matrix<T>, y: &[T], u: &[T], r: &mut [T]) -> T {
    phi.mul_into(u, r);
    for (ri, &yi) in r.iter_mut().zip(y) {
        *ri = yi - *ri;
    }
    norm1(r)
}

pub fn residual_l1<T: Scalar>(phi: &Matrix<T>, y: &Vector<T>, u: &Vector<T>) -> T {
    let mut r = vec![T::zero(); phi.rows()];
    residual_into(phi, y.as_slice(), u.as_slice(), &mut r)
}

/// Scales `q` onto `‖Φᵀq‖∞ ≤ 1` and returns it with its dual objective.
pub(crate) fn dual_bound<T: Scalar>(phi: &Matrix<T>, y: &[T], epsilon: T, q: &[T]) -> (Vec<T>, T) {
    let mut g = vec![T::zero(); phi.cols()];
    phi.mul_t_into(q, &mut g);
    let scale = norm_inf(&g).max(T::one());
    let q: Vec<T> = q.iter().map(|&v| v / scale).collect();
    let value = dot(&q, y) - epsilon * norm_inf(&q);
    (q, value)
}

pub(crate) fn zero_solution<T: Scalar>(phi: &Matrix<T>, y: &Vector<T>) -> SolverResult<T> {
    SolverResult {
        objective: T::zero(),
        residual_l1: y.norm1(),
        status: SolverStatus::Optimal,
        iters: 0,
        u_star: Vector::zeros(phi.cols()),
        certificate: Some(Certificate {
            dual: Vector::zeros(phi.rows()),
            lower_bound: T::zero(),
        }),
        progress: Vec::new(),
    }
}

/// Exact solve of the LP reformulation by simplex.
pub fn solve_lp_exact<T: Scalar>(problem: &BpdnLp<T>) -> SolverResult<T> {
    solve_lp_exact_with(problem, &SimplexOptions::default())
}

pub fn solve_lp_exact_with<T: Scalar>(problem: &BpdnLp<T>, opts: &SimplexOptions<T>) -> SolverResult<T> {
    let sol = simplex(&problem.lp, opts);
    let u = Vector::from_raw(problem.signal_from(&sol.x));
    let residual = residual_l1(&problem.phi, &problem.y, &u);
    let status = match sol.status {
        LpStatus::Optimal => SolverStatus::Optimal,
        LpStatus::Infeasible => SolverStatus::InfeasibleDetected,
        // The objective is bounded below by zero; an unbounded ray means the data is malformed.
        LpStatus::Unbounded => SolverStatus::InfeasibleDetected,
        LpStatus::PivotLimit => SolverStatus::IterationLimit,
    };
    let certificate = (status == SolverStatus::Optimal).then(|| {
        let q = problem.residual_dual_from(&sol.row_multipliers);
        let (q, lower_bound) = dual_bound(&problem.phi, problem.y.as_slice(), problem.epsilon, &q);
        Certificate {
            dual: Vector::from_raw(q),
            lower_bound,
        }
    });
    SolverResult {
        objective: u.norm1(),
        residual_l1: residual,
        status,
        iters: sol.pivots,
        u_star: u,
        certificate,
        progress: Vec::new(),
    }
}

/// Dispatches on `config.method`.
pub fn solve<T: Scalar>(
    phi: &Matrix<T>,
    y: &Vector<T>,
    epsilon: T,
    config: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    config.validate()?;
    match config.method {
        SolverMethod::LpExact => Ok(solve_lp_exact(&lp_formulate(phi, y, epsilon)?)),
        SolverMethod::FirstOrder => solve_first_order(phi, y, epsilon, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> Vector<f64> {
        Vector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn lp_exact_small_cases() {
        let phi = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap();
        // ‖y‖₁ ≤ ε: zero is optimal.
        let r = solve_lp_exact(&lp_formulate(&phi, &v(&[0.5, -0.25]), 1.0).unwrap());
        assert_eq!(r.status, SolverStatus::Optimal);
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.u_star, Vector::zeros(2));

        // ε = 0, Φ = I: u* = y.
        let id = Matrix::identity(3).unwrap();
        let y = v(&[1.5, -2.0, 0.25]);
        let r = solve_lp_exact(&lp_formulate(&id, &y, 0.0).unwrap());
        assert_eq!(r.status, SolverStatus::Optimal);
        for (a, b) in r.u_star.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        // ε = 0, invertible Φ: u* = Φ⁻¹y = (1, 1) for y = (3, 2).
        let r = solve_lp_exact(&lp_formulate(&phi, &v(&[3.0, 2.0]), 0.0).unwrap());
        assert!((r.u_star[0] - 1.0).abs() < 1e-12 && (r.u_star[1] - 1.0).abs() < 1e-12);
        let cert = r.certificate.unwrap();
        assert!((cert.lower_bound - r.objective).abs() < 1e-10);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::<f64>::default();
        assert!(c.validate().is_ok());
        c.feasibility_tol = 0.0;
        assert!(c.validate().is_err());
        let c = SolverConfig::<f64> {
            step_params: Some(StepParams {
                step_scale: 1.5,
                ..Default::default()
            }),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
