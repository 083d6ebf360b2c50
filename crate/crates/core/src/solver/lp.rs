//! Linear-program form of `min ‖u‖₁ s.t. ‖y − Φu‖₁ ≤ ε`.
//!
//! Variables are `z = (u⁺, u⁻, t)` with `u = u⁺ − u⁻` and `t ≥ |y − Φu|`:
//!
//! ```text
//! minimize    ∑ u⁺ + ∑ u⁻
//! subject to   Φu⁺ − Φu⁻ − t ≤  y      (rows 0..m)
//!             −Φu⁺ + Φu⁻ − t ≤ −y      (rows m..2m)
//!                        ∑ t ≤  ε      (row 2m)
//!                          z ≥ 0
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Matrix, Vector};
use crate::scalar::Scalar;

/// `min cᵀz` subject to `A z ≤ b`, `z ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Matrix<T>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>, constraints: Matrix<T>, rhs: Vec<T>) -> Result<Self> {
        if objective.len() != constraints.cols() {
            return Err(Error::DimensionMismatch {
                what: "objective length vs constraint columns",
                expected: constraints.cols(),
                got: objective.len(),
            });
        }
        if rhs.len() != constraints.rows() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side length vs constraint rows",
                expected: constraints.rows(),
                got: rhs.len(),
            });
        }
        if objective.iter().chain(&rhs).any(|v| !v.is_finite()) {
            return Err(Error::invalid("linear program data must be finite"));
        }
        Ok(LinearProgram {
            objective,
            constraints,
            rhs,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.constraints.cols()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.rows()
    }
}

/// The LP together with the problem data needed to map a solution back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BpdnLp<T> {
    pub lp: LinearProgram<T>,
    pub phi: Matrix<T>,
    pub y: Vector<T>,
    pub epsilon: T,
}

impl<T: Scalar> BpdnLp<T> {
    pub fn n(&self) -> usize {
        self.phi.cols()
    }

    pub fn m(&self) -> usize {
        self.phi.rows()
    }

    /// `u = u⁺ − u⁻` from an LP point.
    pub fn signal_from(&self, z: &[T]) -> Vec<T> {
        let n = self.n();
        (0..n).map(|i| z[i] - z[n + i]).collect()
    }

    /// Residual multipliers `q = β − α` from the row multipliers of the LP, where
    /// `α` and `β` belong to the upper and lower residual rows.
    pub fn residual_dual_from(&self, row_multipliers: &[T]) -> Vec<T> {
        let m = self.m();
        (0..m).map(|j| row_multipliers[m + j] - row_multipliers[j]).collect()
    }
}

pub fn lp_formulate<T: Scalar>(phi: &Matrix<T>, y: &Vector<T>, epsilon: T) -> Result<BpdnLp<T>> {
    let (m, n) = (phi.rows(), phi.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            what: "measurement length vs matrix rows",
            expected: m,
            got: y.len(),
        });
    }
    if !(epsilon >= T::zero() && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "noise budget must be finite and nonnegative, got {epsilon}"
        )));
    }
    let vars = 2 * n + m;
    let rows = 2 * m + 1;
    let mut a = vec![T::zero(); rows * vars];
    let mut b = vec![T::zero(); rows];
    for j in 0..m {
        let upper = j * vars;
        let lower = (m + j) * vars;
        for i in 0..n {
            let v = phi.get(j, i);
            a[upper + i] = v;
            a[upper + n + i] = -v;
            a[lower + i] = -v;
            a[lower + n + i] = v;
        }
        a[upper + 2 * n + j] = -T::one();
        a[lower + 2 * n + j] = -T::one();
        b[j] = y[j];
        b[m + j] = -y[j];
    }
    let last = 2 * m * vars;
    for j in 0..m {
        a[last + 2 * n + j] = T::one();
    }
    b[2 * m] = epsilon;
    let mut c = vec![T::zero(); vars];
    c[..2 * n].iter_mut().for_each(|v| *v = T::one());
    let lp = LinearProgram::new(c, Matrix::new(rows, vars, a)?, b)?;
    Ok(BpdnLp {
        lp,
        phi: phi.clone(),
        y: y.clone(),
        epsilon,
    })
}
