//! Soft thresholding, ℓ1-ball projection and a power-iteration norm estimate.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{norm1, norm2, Matrix, Vector};
use crate::rng::RngSpec;
use crate::scalar::Scalar;

/// `sign(v_i) · max(|v_i| − tau, 0)` with the ordinary sign (`0 ↦ 0`), not [`crate::model::sign`].
pub fn soft_threshold<T: Scalar>(v: &Vector<T>, tau: T) -> Result<Vector<T>> {
    if !(tau >= T::zero()) {
        return Err(Error::invalid(format!("threshold must be nonnegative, got {tau}")));
    }
    let mut out = v.as_slice().to_vec();
    soft_threshold_in_place(&mut out, tau);
    Ok(Vector::from_raw(out))
}

pub(crate) fn soft_threshold_in_place<T: Scalar>(v: &mut [T], tau: T) {
    for x in v.iter_mut() {
        let mag = x.abs() - tau;
        *x = if mag > T::zero() { x.signum() * mag } else { T::zero() };
    }
}

/// Euclidean projection onto `{ z : ‖z‖₁ ≤ radius }`.
pub fn project_l1_ball<T: Scalar>(v: &Vector<T>, radius: T) -> Result<Vector<T>> {
    if !(radius >= T::zero()) {
        return Err(Error::invalid(format!("radius must be nonnegative, got {radius}")));
    }
    let mut out = v.as_slice().to_vec();
    let mut scratch = Vec::new();
    project_l1_ball_in_place(&mut out, radius, &mut scratch);
    Ok(Vector::from_raw(out))
}

/// Sort-based threshold search: with `μ` the sorted magnitudes, the threshold is
/// `θ = (∑_{i≤ρ} μ_i − radius) / ρ` for the largest `ρ` with `μ_ρ > θ_ρ`.
pub(crate) fn project_l1_ball_in_place<T: Scalar>(v: &mut [T], radius: T, scratch: &mut Vec<T>) {
    if norm1(v) <= radius {
        return;
    }
    if radius == T::zero() {
        v.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    scratch.clear();
    scratch.extend(v.iter().map(|x| x.abs()));
    scratch.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &mu) in scratch.iter().enumerate() {
        cumsum = cumsum + mu;
        let candidate = (cumsum - radius) / T::from_usize_lossy(j + 1);
        if mu > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    soft_threshold_in_place(v, theta.max(T::zero()));
}

/// Power iteration on `ΦᵀΦ`. Returns `‖Φv‖` for the final unit iterate `v`, which
/// can only under-estimate the spectral norm.
pub fn operator_norm_estimate<T: Scalar>(phi: &Matrix<T>, iters: usize, rng: &RngSpec) -> Result<T> {
    if iters == 0 {
        return Err(Error::invalid("power iteration needs at least one step"));
    }
    let mut r = rng.rng();
    let mut v: Vec<T> = (0..phi.cols()).map(|_| T::lit(r.standard_normal())).collect();
    let mut av = vec![T::zero(); phi.rows()];
    let mut best = T::zero();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    for _ in 0..iters {
        phi.mul_into(&v, &mut av);
        let est = norm2(&av);
        if est > best {
            best = est;
        }
        if est == T::zero() {
            break;
        }
        phi.mul_t_into(&av, &mut v);
        let nv = norm2(&v);
        if nv == T::zero() {
            break;
        }
        v.iter_mut().for_each(|x| *x = *x / nv);
    }
    Ok(best)
}
