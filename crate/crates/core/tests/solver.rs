use proptest::prelude::*;
use sl1_core::generators::{make_instance, Amplitude, NoiseSpec, SignalSpec};
use sl1_core::model::{Matrix, Vector};
use sl1_core::rng::RngSpec;
use sl1_core::solver::{
    lp_formulate, residual_l1, solve, solve_first_order, solve_lp_exact, SolverConfig, SolverMethod, SolverStatus,
};

const GAUSSIAN: SignalSpec = SignalSpec::Sparse {
    amplitude: Amplitude::Gaussian,
};

/// Solves a square system by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-11 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum of `‖u‖₁` over the vertices of `{(u⁺, u⁻, t) ≥ 0 : −t ≤ y − Φu ≤ t, ∑t ≤ ε}`.
fn vertex_enumeration(phi: &[Vec<f64>], y: &[f64], eps: f64) -> f64 {
    let (m, n) = (phi.len(), phi[0].len());
    let vars = 2 * n + m;
    // Every constraint as `a·z ≤ b`, nonnegativity included.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..m {
        let mut up = vec![0.0; vars];
        let mut lo = vec![0.0; vars];
        for i in 0..n {
            up[i] = phi[j][i];
            up[n + i] = -phi[j][i];
            lo[i] = -phi[j][i];
            lo[n + i] = phi[j][i];
        }
        up[2 * n + j] = -1.0;
        lo[2 * n + j] = -1.0;
        rows.push((up, y[j]));
        rows.push((lo, -y[j]));
    }
    let mut budget = vec![0.0; vars];
    budget[2 * n..].iter_mut().for_each(|v| *v = 1.0);
    rows.push((budget, eps));
    for i in 0..vars {
        let mut e = vec![0.0; vars];
        e[i] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best = f64::INFINITY;
    for active in combinations(rows.len(), vars) {
        let a = active.iter().map(|&r| rows[r].0.clone()).collect();
        let b = active.iter().map(|&r| rows[r].1).collect();
        let Some(z) = solve_square(a, b) else {
            continue;
        };
        let feasible = rows.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(&z).map(|(p, q)| p * q).sum();
            lhs <= b + 1e-9 * (1.0 + b.abs())
        });
        if feasible {
            best = best.min(z[..2 * n].iter().sum());
        }
    }
    best
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut checked = 0;
    for seed in 0..60u64 {
        let n = 1 + (seed as usize) % 3;
        let m = 1 + (seed as usize / 3) % 3;
        let noise = match seed % 3 {
            0 => NoiseSpec::None,
            1 => NoiseSpec::Sparse { count: 1, epsilon: 0.3 },
            _ => NoiseSpec::Sparse { count: 1, epsilon: 2.0 },
        };
        let inst = make_instance::<f64>(n, m, 1, &noise, &GAUSSIAN, &RngSpec::new(seed, 11)).unwrap();
        let phi: Vec<Vec<f64>> = (0..m).map(|j| inst.phi.row(j).to_vec()).collect();
        let oracle = vertex_enumeration(&phi, inst.y.as_slice(), inst.epsilon);
        let lp = solve_lp_exact(&lp_formulate(&inst.phi, &inst.y, inst.epsilon).unwrap());
        assert_eq!(lp.status, SolverStatus::Optimal);
        assert!(
            (lp.objective - oracle).abs() <= 1e-9,
            "seed {seed}: simplex {} vs vertices {oracle}",
            lp.objective
        );
        checked += 1;
    }
    assert_eq!(checked, 60);
}

#[test]
fn first_order_matches_simplex_on_mixed_instances() {
    for seed in 0..20u64 {
        let n = 8 + (seed as usize * 7) % 25;
        let m = 6 + (seed as usize * 5) % 20;
        let k = 1 + seed as usize % 4;
        let noise = if seed % 2 == 0 {
            NoiseSpec::Laplacian { quantile: 0.9 }
        } else {
            NoiseSpec::Sparse { count: 2, epsilon: 0.5 }
        };
        let inst = make_instance::<f64>(n, m, k, &noise, &GAUSSIAN, &RngSpec::new(seed, 3)).unwrap();
        let fo = solve_first_order(&inst.phi, &inst.y, inst.epsilon, &SolverConfig::default()).unwrap();
        let lp = solve_lp_exact(&lp_formulate(&inst.phi, &inst.y, inst.epsilon).unwrap());
        assert_eq!(fo.status, SolverStatus::Optimal, "seed {seed}");
        assert!(fo.residual_l1 <= inst.epsilon + 1e-8);
        assert!(lp.residual_l1 <= inst.epsilon + 1e-8);
        assert!((fo.objective - lp.objective).abs() <= 1e-6 * (1.0 + lp.objective));
        let cert = fo.certificate.unwrap();
        assert!(cert.lower_bound <= lp.objective + 1e-9);
    }
}

#[test]
fn noiseless_recovery_with_more_measurements_than_unknowns() {
    for seed in 0..5 {
        let inst = make_instance::<f64>(20, 30, 20, &NoiseSpec::None, &GAUSSIAN, &RngSpec::new(seed, 2)).unwrap();
        for method in [SolverMethod::FirstOrder, SolverMethod::LpExact] {
            let r = solve(&inst.phi, &inst.y, 0.0, &SolverConfig::with_method(method)).unwrap();
            assert!(r.u_star.sub(&inst.x).unwrap().norm2() <= 1e-5, "{method:?} seed {seed}");
        }
    }
}

#[test]
fn objective_scales_with_data() {
    let noise = NoiseSpec::Sparse { count: 2, epsilon: 0.4 };
    let inst = make_instance::<f64>(25, 15, 3, &noise, &GAUSSIAN, &RngSpec::new(9, 0)).unwrap();
    let base = solve_first_order(&inst.phi, &inst.y, inst.epsilon, &SolverConfig::default()).unwrap();
    for c in [0.1, 3.0, 250.0] {
        let y = inst.y.scale(c);
        let r = solve_first_order(&inst.phi, &y, c * inst.epsilon, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.objective - c * base.objective).abs() <= 1e-6 * (1.0 + c * base.objective));
    }
}

#[test]
fn best_objective_never_increases() {
    let noise = NoiseSpec::Laplacian { quantile: 0.5 };
    let inst = make_instance::<f64>(60, 30, 4, &noise, &GAUSSIAN, &RngSpec::new(4, 4)).unwrap();
    let r = solve_first_order(&inst.phi, &inst.y, inst.epsilon, &SolverConfig::default()).unwrap();
    assert!(!r.progress.is_empty());
    let feasible: Vec<f64> = r.progress.iter().filter_map(|p| p.best_feasible_objective).collect();
    assert!(feasible.windows(2).all(|w| w[1] <= w[0]));
    let bounds: Vec<f64> = r.progress.iter().map(|p| p.lower_bound).collect();
    assert!(bounds.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn zero_budget_shortcut_and_invalid_inputs() {
    let phi = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let y = Vector::new(vec![0.2, -0.1]).unwrap();
    let r = solve_first_order(&phi, &y, 0.3, &SolverConfig::default()).unwrap();
    assert_eq!(r.objective, 0.0);
    assert_eq!(r.u_star, Vector::zeros(2));
    assert!(solve_first_order(&phi, &y, -1.0, &SolverConfig::default()).is_err());
    let short = Vector::new(vec![1.0]).unwrap();
    assert!(solve_first_order(&phi, &short, 0.0, &SolverConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_statuses_respect_the_budget(seed in 0u64..10_000, n in 3usize..20, m in 2usize..15, eps in 0.0f64..3.0) {
        let inst = make_instance::<f64>(n, m, 1, &NoiseSpec::None, &GAUSSIAN, &RngSpec::new(seed, 7)).unwrap();
        let config = SolverConfig { max_iters: 2000, ..Default::default() };
        let r = solve_first_order(&inst.phi, &inst.y, eps, &config).unwrap();
        if r.status.is_feasible() {
            prop_assert!(residual_l1(&inst.phi, &inst.y, &r.u_star) <= eps + 1e-8);
        }
        if let Some(cert) = r.certificate {
            prop_assert!(cert.lower_bound <= r.objective + 1e-9 || !r.status.is_feasible());
        }
    }
}
