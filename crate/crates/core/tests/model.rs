use proptest::prelude::*;
use sl1_core::model::{
    compress_error_e0, hard_threshold, norm_lp, partition_support, restrict, sign_vec, Norm, SupportSet, Vector,
};

fn vector(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    // Small integer grid so magnitude ties actually occur.
    proptest::collection::vec((-4i32..=4).prop_map(|v| v as f64 * 0.5), 1..=max_len)
}

fn tail_l1(v: &[f64], s: &[usize]) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(i, _)| !s.contains(i))
        .map(|(_, x)| x.abs())
        .sum()
}

fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| (0..n).filter(|&i| m & (1 << i) != 0).collect())
        .collect()
}

proptest! {
    #[test]
    fn hard_threshold_is_best_k_term(v in vector(10), k in 0usize..=10) {
        let k = k.min(v.len());
        let x = Vector::new(v.clone()).unwrap();
        let hk = hard_threshold(&x, k).unwrap();
        prop_assert!(norm_lp(&hk, Norm::L0) <= k as f64);
        let kept = SupportSet::support_of(&hk);
        let err = tail_l1(&v, kept.indices());
        let best = subsets_up_to(v.len(), k)
            .iter()
            .map(|s| tail_l1(&v, s))
            .fold(f64::INFINITY, f64::min);
        prop_assert!((err - best).abs() < 1e-12);
    }

    #[test]
    fn sign_has_no_zeros_and_is_odd(v in vector(12)) {
        let x = Vector::new(v.clone()).unwrap();
        let s = sign_vec(&x);
        prop_assert!(s.iter().all(|&e| e == 1.0 || e == -1.0));
        if v.iter().all(|&e| e != 0.0) {
            let neg = Vector::new(v.iter().map(|e| -e).collect()).unwrap();
            prop_assert_eq!(sign_vec(&neg), s.scale(-1.0));
        }
    }

    #[test]
    fn partition_blocks_decrease(v in vector(12), k in 1usize..5, t0_size in 0usize..5) {
        let n = v.len();
        let k = k.min(n);
        let h = Vector::new(v).unwrap();
        let t0 = SupportSet::new((0..t0_size.min(k)).collect(), n).unwrap();
        let p = partition_support(&h, &t0, k).unwrap();
        let mut covered: Vec<usize> = t0.indices().to_vec();
        for (i, b) in p.blocks.iter().enumerate() {
            prop_assert!(b.len() <= k);
            if i + 1 < p.blocks.len() {
                prop_assert_eq!(b.len(), k);
            }
            covered.extend_from_slice(b.indices());
        }
        covered.sort_unstable();
        prop_assert_eq!(covered, (0..n).collect::<Vec<_>>());
        for w in p.blocks.windows(2) {
            let next_max = w[1].indices().iter().map(|&j| h[j].abs()).fold(0.0, f64::max);
            let cur_min = w[0].indices().iter().map(|&i| h[i].abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(next_max <= cur_min);
        }
    }

    #[test]
    fn e0_vanishes_exactly_on_sparse_vectors(v in vector(10), k in 1usize..=10) {
        let k = k.min(v.len());
        let x = Vector::new(v.clone()).unwrap();
        let sparse = v.iter().filter(|&&e| e != 0.0).count() <= k;
        prop_assert_eq!(compress_error_e0(&x, k).unwrap() == 0.0, sparse);
    }

    #[test]
    fn restrict_is_idempotent_and_splits(v in vector(10), mask in 0u32..1024) {
        let n = v.len();
        let idx: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let s = SupportSet::new(idx, n).unwrap();
        let x = Vector::new(v).unwrap();
        let r = restrict(&x, &s).unwrap();
        prop_assert_eq!(restrict(&r, &s).unwrap(), r.clone());
        let rest = restrict(&x, &s.complement()).unwrap();
        prop_assert_eq!(r.add(&rest).unwrap(), x);
    }
}
