//! Dense Gaussian elimination with complete pivoting.

use crate::scalar::Scalar;

/// Basic solution of `A x = b` for a row-major `rows × cols` matrix of any shape.
///
/// Pivots are chosen by complete pivoting; variables that never become pivots
/// are set to zero. Returns the solution and the numerical rank. The system
/// may be inconsistent, callers check the residual.
pub(crate) fn solve_basic<T: Scalar>(a: &[T], rows: usize, cols: usize, b: &[T]) -> (Vec<T>, usize) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(b.len(), rows);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    let scale = m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    let tol = scale * T::epsilon() * T::from_usize_lossy(rows.max(cols)) * T::lit(16.0);
    let mut rank = 0;
    let steps = rows.min(cols);
    for k in 0..steps {
        let mut best = T::zero();
        let (mut pr, mut pc) = (k, k);
        for i in k..rows {
            for j in k..cols {
                let v = m[i * cols + j].abs();
                if v > best {
                    best = v;
                    pr = i;
                    pc = j;
                }
            }
        }
        if best <= tol || best == T::zero() {
            break;
        }
        if pr != k {
            for j in 0..cols {
                m.swap(k * cols + j, pr * cols + j);
            }
            rhs.swap(k, pr);
        }
        if pc != k {
            for i in 0..rows {
                m.swap(i * cols + k, i * cols + pc);
            }
            col_perm.swap(k, pc);
        }
        let pivot = m[k * cols + k];
        for i in k + 1..rows {
            let f = m[i * cols + k] / pivot;
            if f == T::zero() {
                continue;
            }
            m[i * cols + k] = T::zero();
            for j in k + 1..cols {
                m[i * cols + j] = m[i * cols + j] - f * m[k * cols + j];
            }
            rhs[i] = rhs[i] - f * rhs[k];
        }
        rank += 1;
    }
    let mut z = vec![T::zero(); cols];
    for k in (0..rank).rev() {
        let mut acc = rhs[k];
        for j in k + 1..rank {
            acc = acc - m[k * cols + j] * z[j];
        }
        z[k] = acc / m[k * cols + k];
    }
    let mut x = vec![T::zero(); cols];
    for (k, &c) in col_perm.iter().enumerate() {
        x[c] = z[k];
    }
    (x, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &[f64], rows: usize, cols: usize, x: &[f64], b: &[f64]) -> f64 {
        (0..rows)
            .map(|i| {
                let ax: f64 = (0..cols).map(|j| a[i * cols + j] * x[j]).sum();
                (ax - b[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn square_system() {
        let a: [f64; 4] = [2.0, 1.0, 1.0, 3.0];
        let (x, rank) = solve_basic(&a, 2, 2, &[3.0, 5.0]);
        assert_eq!(rank, 2);
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn consistent_overdetermined_and_underdetermined() {
        let a = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let (x, rank) = solve_basic(&a, 3, 2, &[1.0, 2.0, 3.0]);
        assert_eq!(rank, 2);
        assert!(residual(&a, 3, 2, &x, &[1.0, 2.0, 3.0]) < 1e-14);

        let a = [1.0, 2.0, 3.0];
        let (x, rank) = solve_basic(&a, 1, 3, &[6.0]);
        assert_eq!(rank, 1);
        assert!(residual(&a, 1, 3, &x, &[6.0]) < 1e-14);
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn rank_deficient() {
        let a = [1.0, 2.0, 2.0, 4.0];
        let (x, rank) = solve_basic(&a, 2, 2, &[1.0, 2.0]);
        assert_eq!(rank, 1);
        assert!(residual(&a, 2, 2, &x, &[1.0, 2.0]) < 1e-14);
    }
}
