use nalgebra::DMatrix;
use proptest::prelude::*;

use pencil_core::linalg::{gen_sym_def_eigen, kernel_basis, restrict_form, sym_eigen};
use pencil_core::oracles::{brute_force_spectrum, decomposition_residual, random_moving_pencil, random_pencil, vc_lower_bound};
use pencil_core::{Pencil, SymMatrix};

fn sym_matrix(max_dim: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_dim).prop_flat_map(|n| {
        prop::collection::vec(-3.0..3.0f64, n * n).prop_map(move |e| {
            let m = DMatrix::from_row_slice(n, n, &e);
            SymMatrix::new((&m + m.transpose()) * 0.5).unwrap()
        })
    })
}

fn spd_pair(max_dim: usize) -> impl Strategy<Value = (SymMatrix, SymMatrix)> {
    (1..=max_dim).prop_flat_map(|n| {
        (prop::collection::vec(-3.0..3.0f64, n * n), prop::collection::vec(-3.0..3.0f64, n * n)).prop_map(move |(x, y)| {
            let m = DMatrix::from_row_slice(n, n, &x);
            let r = DMatrix::from_row_slice(n, n, &y);
            let a = r.transpose() * &r + DMatrix::identity(n, n) * 0.5;
            (SymMatrix::new((&m + m.transpose()) * 0.5).unwrap(), SymMatrix::new(a).unwrap())
        })
    })
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0)
}

fn sorted_finite(p: &Pencil, t: f64) -> Vec<f64> {
    let s = p.spectrum_at(t).unwrap();
    let mut v: Vec<f64> = s.positive_values().into_iter().chain(s.negative_values()).collect();
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sym_eigen_reconstructs_and_preserves_trace(m in sym_matrix(8)) {
        let dec = sym_eigen(&m);
        let norm = m.matrix().norm().max(1.0);
        prop_assert!(dec.values.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..dec.len() {
            let v = dec.vector(k);
            prop_assert!((m.matrix() * &v - &v * dec.values[k]).norm() <= 1e-8 * norm);
        }
        let n = m.dim();
        prop_assert!((dec.vectors.transpose() * &dec.vectors - DMatrix::<f64>::identity(n, n)).amax() <= 1e-8);
        prop_assert!((m.matrix().trace() - dec.values.iter().sum::<f64>()).abs() <= 1e-8 * norm);
    }

    #[test]
    fn generalized_eigenvalues_match_standard_form((m, a) in spd_pair(8)) {
        let dec = gen_sym_def_eigen(&m, &a).unwrap();
        // Independent factor: nalgebra Cholesky, inverted explicitly.
        let l = a.matrix().clone().cholesky().unwrap().l();
        let li = l.try_inverse().unwrap();
        let std = SymMatrix::new({
            let s = &li * m.matrix() * li.transpose();
            (&s + s.transpose()) * 0.5
        }).unwrap();
        let want = sym_eigen(&std).values;
        for (x, y) in dec.values.iter().zip(&want) {
            prop_assert!(rel_close(*x, *y, 1e-8), "{x} vs {y}");
        }
        let n = m.dim();
        prop_assert!((dec.vectors.transpose() * a.matrix() * &dec.vectors - DMatrix::<f64>::identity(n, n)).amax() <= 1e-8);
    }

    #[test]
    fn restriction_to_kernel_vanishes(x in prop::collection::vec(-3.0..3.0f64, 1..=6), n in 2usize..=8) {
        // Low-rank PSD matrix so the kernel is nontrivial.
        let w = DMatrix::from_fn(n, x.len().min(n - 1), |i, j| x[j] * (1.0 + i as f64).sin() + (i * j) as f64 * 0.1);
        let m = SymMatrix::new(&w * w.transpose()).unwrap();
        let ker = kernel_basis(&m, 1e-10);
        prop_assert!(ker.dim() >= 1);
        prop_assert!(ker.gram_residual(&SymMatrix::identity(n)) <= 1e-8);
        let r = restrict_form(&m, &ker).unwrap();
        prop_assert!(r.matrix().norm() <= 1e-8 * m.matrix().norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_agrees_with_solver(seed in 0u64..10_000, d in 2usize..=6, t in -50.0..50.0f64) {
        let p = random_pencil(seed, d).unwrap();
        let fast = p.spectrum_at(t).unwrap();
        let slow = brute_force_spectrum(&p, t).unwrap();
        prop_assert_eq!(fast.positives.len(), slow.positives.len());
        prop_assert_eq!(fast.negatives.len(), slow.negatives.len());
        for (x, y) in fast.positive_values().iter().zip(slow.positive_values()) {
            prop_assert!(rel_close(*x, y, 1e-7), "{x} vs {y}");
        }
        for (x, y) in fast.negative_values().iter().zip(slow.negative_values()) {
            prop_assert!(rel_close(*x, y, 1e-7), "{x} vs {y}");
        }
    }

    #[test]
    fn spectrum_counts_and_decomposition(seed in 0u64..10_000, d in 2usize..=8, t in -50.0..50.0f64) {
        let p = random_pencil(seed, d).unwrap();
        let s = p.spectrum_at(t).unwrap();
        prop_assert_eq!(s.finite_count() + s.zero_multiplicity + s.infinity_multiplicity, s.active_dim);
        prop_assert!(s.positive_values().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.negative_values().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.positive_values().iter().all(|&x| x > 0.0));
        prop_assert!(s.negative_values().iter().all(|&x| x < 0.0));
        let bt = p.b_at(t);
        let scale = p.a().matrix().norm() + bt.matrix().norm();
        for e in s.positives.iter().chain(&s.negatives) {
            let r = p.a().matrix() * &e.vector - bt.matrix() * &e.vector * e.lambda;
            prop_assert!(r.norm() <= 1e-8 * scale * e.lambda.abs().max(1.0));
        }
        let (res, gap) = decomposition_residual(&p, t, &s);
        prop_assert!(res <= 1e-8, "residual {res}");
        prop_assert_eq!(gap, 0);
    }

    #[test]
    fn mirror_identity(seed in 0u64..10_000, d in 2usize..=8, t in -50.0..50.0f64) {
        let p = random_pencil(seed, d).unwrap();
        let q = p.negated_b();
        let neg = p.spectrum_at(t).unwrap().negative_values();
        let pos = q.spectrum_at(-t).unwrap().positive_values();
        prop_assert_eq!(neg.len(), pos.len());
        for (x, y) in neg.iter().zip(&pos) {
            prop_assert!(rel_close(*x, -y, 1e-10), "{x} vs {}", -y);
        }
    }

    #[test]
    fn draining_bound(seed in 0u64..10_000, d in 2usize..=6, t in 0.0..200.0f64) {
        let p = random_pencil(seed, d).unwrap();
        let mu = gen_sym_def_eigen(p.b(), p.a()).unwrap().values.last().copied().unwrap();
        prop_assume!(mu > 0.0);
        for e in &p.spectrum_at(t).unwrap().positives {
            prop_assert!(t * p.c().quad(&e.vector) <= mu + 1e-8, "t·C(u) = {} > μ = {mu}", t * p.c().quad(&e.vector));
        }
    }

    #[test]
    fn variational_bound_is_attained(seed in 0u64..10_000, d in 2usize..=6, t in -20.0..20.0f64) {
        let p = random_pencil(seed, d).unwrap();
        let n_pos = p.spectrum_at(t).unwrap().positives.len();
        for j in 1..=n_pos {
            let est = vc_lower_bound(&p, t, j, 32, seed).unwrap();
            prop_assert!(est.sampled_max <= est.target + 1e-9 * est.target.max(1.0));
            prop_assert!(rel_close(est.eigen_span, est.target, 1e-9));
        }
    }

    #[test]
    fn deflation_keeps_nonzero_spectrum(seed in 0u64..10_000, d in 3usize..=7, k in 1usize..=2, u in 0.1..5.0f64, neg in any::<bool>()) {
        prop_assume!(k < d - 1);
        let p = random_moving_pencil(seed, d, k).unwrap();
        let t = (p.threshold_t().unwrap() * (1.0 + u)).max(1.0) * if neg { -1.0 } else { 1.0 };
        let bt = p.b_at(t);
        // Full problem A v = λ B^t v through the nonsymmetric matrix (B^t)⁻¹A.
        let inv = bt.matrix().clone().try_inverse();
        prop_assume!(inv.is_some());
        let full = (inv.unwrap() * p.a().matrix()).complex_eigenvalues();
        let max = full.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let mut nonzero: Vec<f64> = full.iter().filter(|z| z.norm() > 1e-8 * max).map(|z| {
            assert!(z.im.abs() <= 1e-6 * max, "complex eigenvalue {z}");
            z.re
        }).collect();
        nonzero.sort_by(f64::total_cmp);
        let deflated = sorted_finite(&p, t);
        prop_assert_eq!(nonzero.len(), deflated.len(), "{:?} vs {:?}", nonzero, deflated);
        for (x, y) in nonzero.iter().zip(&deflated) {
            prop_assert!(rel_close(*x, *y, 1e-6), "{x} vs {y}");
        }
    }
}
