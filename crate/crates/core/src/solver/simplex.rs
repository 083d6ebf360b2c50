//! Two-phase dense tableau simplex with Bland's anti-cycling rule.

use serde::{Deserialize, Serialize};

use super::linsolve::solve_basic;
use super::lp::LinearProgram;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    PivotLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimplexOptions<T> {
    /// Entries below this magnitude are never pivoted on.
    pub pivot_tol: T,
    /// A reduced cost must be below `-cost_tol` to enter.
    pub cost_tol: T,
    /// Phase-one objective above this declares the program infeasible.
    pub infeasibility_tol: T,
    pub max_pivots: usize,
}

impl<T: Scalar> Default for SimplexOptions<T> {
    fn default() -> Self {
        SimplexOptions {
            pivot_tol: T::lit(1e-9),
            cost_tol: T::lit(1e-11),
            infeasibility_tol: T::lit(1e-9),
            max_pivots: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Primal point (meaningful for `Optimal`; the last basic point otherwise).
    pub x: Vec<T>,
    pub objective: T,
    /// Nonnegative multiplier of each `≤` row at the final basis.
    pub row_multipliers: Vec<T>,
    pub pivots: usize,
}

struct Tableau<T> {
    rows: usize,
    /// Structural + slack + artificial columns; the right-hand side is stored separately.
    cols: usize,
    a: Vec<T>,
    rhs: Vec<T>,
    cost: Vec<T>,
    /// Negated objective value of the current basis.
    cost_rhs: T,
    basis: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.cols + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let p = self.at(r, c);
        for j in 0..cols {
            self.a[r * cols + j] = self.a[r * cols + j] / p;
        }
        self.rhs[r] = self.rhs[r] / p;
        self.a[r * cols + c] = T::one();
        let (before, rest) = self.a.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        // Rows above and below the pivot row.
        let pr = self.rhs[r];
        for (i, row) in before.chunks_exact_mut(cols).enumerate() {
            let f = row[c];
            if f != T::zero() {
                for (x, &pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *x = *x - f * pv;
                }
                row[c] = T::zero();
                self.rhs[i] = self.rhs[i] - f * pr;
            }
        }
        for (off, row) in after.chunks_exact_mut(cols).enumerate() {
            let i = r + 1 + off;
            let f = row[c];
            if f != T::zero() {
                for (x, &pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *x = *x - f * pv;
                }
                row[c] = T::zero();
                self.rhs[i] = self.rhs[i] - f * pr;
            }
        }
        let f = self.cost[c];
        if f != T::zero() {
            for (x, &pv) in self.cost.iter_mut().zip(pivot_row.iter()) {
                *x = *x - f * pv;
            }
            self.cost[c] = T::zero();
            self.cost_rhs = self.cost_rhs - f * pr;
        }
        self.basis[r] = c;
    }

    /// Recomputes reduced costs for cost vector `c` under the current basis.
    fn set_cost(&mut self, c: &[T]) {
        self.cost.copy_from_slice(c);
        self.cost_rhs = T::zero();
        for i in 0..self.rows {
            let cb = c[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            for j in 0..self.cols {
                self.cost[j] = self.cost[j] - cb * self.at(i, j);
            }
            self.cost_rhs = self.cost_rhs - cb * self.rhs[i];
        }
    }

    /// Runs Bland's rule until optimal or unbounded. `allowed[j]` gates entering columns.
    fn optimize(&mut self, allowed: &[bool], opts: &SimplexOptions<T>, pivots: &mut usize) -> LpStatus {
        loop {
            let entering = (0..self.cols).find(|&j| allowed[j] && self.cost[j] < -opts.cost_tol);
            let Some(c) = entering else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows {
                let v = self.at(i, c);
                if v > opts.pivot_tol {
                    let ratio = self.rhs[i].max(T::zero()) / v;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr || (ratio == lr && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return LpStatus::Unbounded;
            };
            if *pivots >= opts.max_pivots {
                return LpStatus::PivotLimit;
            }
            self.pivot(r, c);
            *pivots += 1;
        }
    }
}

/// Solves `min cᵀx s.t. Ax ≤ b, x ≥ 0`.
pub fn simplex<T: Scalar>(lp: &LinearProgram<T>, opts: &SimplexOptions<T>) -> LpSolution<T> {
    let (rows, nv) = (lp.num_rows(), lp.num_vars());
    let negated: Vec<bool> = lp.rhs.iter().map(|&b| b < T::zero()).collect();
    let n_art = negated.iter().filter(|&&x| x).count();
    let slack0 = nv;
    let art0 = nv + rows;
    let cols = nv + rows + n_art;

    let mut a = vec![T::zero(); rows * cols];
    let mut rhs = vec![T::zero(); rows];
    let mut basis = vec![0; rows];
    let mut next_art = art0;
    for i in 0..rows {
        let s = if negated[i] { -T::one() } else { T::one() };
        for j in 0..nv {
            a[i * cols + j] = s * lp.constraints.get(i, j);
        }
        a[i * cols + slack0 + i] = s;
        rhs[i] = s * lp.rhs[i];
        if negated[i] {
            a[i * cols + next_art] = T::one();
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = slack0 + i;
        }
    }
    let original = a.clone();
    let original_rhs = rhs.clone();

    let mut t = Tableau {
        rows,
        cols,
        a,
        rhs,
        cost: vec![T::zero(); cols],
        cost_rhs: T::zero(),
        basis,
    };
    let mut pivots = 0;

    let is_art = |j: usize| j >= art0;
    if n_art > 0 {
        let phase1: Vec<T> = (0..cols)
            .map(|j| if is_art(j) { T::one() } else { T::zero() })
            .collect();
        t.set_cost(&phase1);
        let all = vec![true; cols];
        let status = t.optimize(&all, opts, &mut pivots);
        if status == LpStatus::PivotLimit {
            return finish(lp, &t, LpStatus::PivotLimit, pivots, slack0);
        }
        let infeasibility = -t.cost_rhs;
        if infeasibility > opts.infeasibility_tol * (T::one() + norm_inf(&lp.rhs)) {
            return finish(lp, &t, LpStatus::Infeasible, pivots, slack0);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..rows {
            if !is_art(t.basis[i]) {
                continue;
            }
            let col = (0..art0).find(|&j| t.at(i, j).abs() > opts.pivot_tol);
            if let Some(c) = col {
                t.rhs[i] = T::zero();
                t.pivot(i, c);
                pivots += 1;
            }
        }
    }

    let mut phase2 = vec![T::zero(); cols];
    phase2[..nv].copy_from_slice(&lp.objective);
    t.set_cost(&phase2);
    let allowed: Vec<bool> = (0..cols).map(|j| !is_art(j)).collect();
    let status = t.optimize(&allowed, opts, &mut pivots);
    refine(&mut t, &original, &original_rhs);
    finish(lp, &t, status, pivots, slack0)
}

fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Re-solves `B x_B = b` from the original data to shed accumulated pivoting error.
fn refine<T: Scalar>(t: &mut Tableau<T>, original: &[T], original_rhs: &[T]) {
    let rows = t.rows;
    let mut b_mat = vec![T::zero(); rows * rows];
    for i in 0..rows {
        for (k, &col) in t.basis.iter().enumerate() {
            b_mat[i * rows + k] = original[i * t.cols + col];
        }
    }
    let (x_b, rank) = solve_basic(&b_mat, rows, rows, original_rhs);
    if rank < rows {
        return;
    }
    let drift = x_b
        .iter()
        .zip(&t.rhs)
        .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
    let scale = T::one() + norm_inf(&t.rhs);
    if drift <= T::lit(1e-6) * scale && x_b.iter().all(|&v| v >= -T::lit(1e-9) * scale) {
        t.rhs = x_b;
    }
}

fn finish<T: Scalar>(
    lp: &LinearProgram<T>,
    t: &Tableau<T>,
    status: LpStatus,
    pivots: usize,
    slack0: usize,
) -> LpSolution<T> {
    let nv = lp.num_vars();
    let mut x = vec![T::zero(); nv];
    for (i, &col) in t.basis.iter().enumerate() {
        if col < nv {
            x[col] = t.rhs[i].max(T::zero());
        }
    }
    let objective = x
        .iter()
        .zip(&lp.objective)
        .fold(T::zero(), |acc, (&xi, &ci)| acc + xi * ci);
    let row_multipliers = (0..t.rows).map(|i| t.cost[slack0 + i].max(T::zero())).collect();
    LpSolution {
        status,
        x,
        objective,
        row_multipliers,
        pivots,
    }
}
