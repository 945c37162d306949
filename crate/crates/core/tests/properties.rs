use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use revsob_core::conformal::{pullback, Bubble, ConformalMap};
use revsob_core::decompose::{SolverOptions, Target};
use revsob_core::field::random_positive;
use revsob_core::quadform::SpectralEngine;
use revsob_core::specialfn::{alpha, gamma, local_constant, sobolev_constant, sobolev_constant_from_area, SpectralParams};
use revsob_core::Exec;

const MATRIX: [(usize, f64); 4] = [(2, 1.5), (2, 2.5), (1, 0.75), (1, 2.0)];

fn sigma_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![0.01f64..0.99, 1.01f64..1.99]
}

proptest! {
    #[test]
    fn gamma_recurrence(x in -20.0f64..25.0) {
        prop_assume!((x - x.round()).abs() > 1e-3);
        let lhs = gamma(x + 1.0).unwrap();
        let rhs = x * gamma(x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
    }

    #[test]
    fn eigenvalue_identities(n in 1usize..5, sigma in sigma_strategy()) {
        let p = SpectralParams::new(n, sigma + n as f64 / 2.0).unwrap();
        prop_assert!((alpha(&p, 1) - (p.p - 1.0) * alpha(&p, 0)).abs() <= 1e-12 * alpha(&p, 1).abs());
        prop_assert!((1.0 - alpha(&p, 1) / alpha(&p, 2) - local_constant(&p)).abs() <= 1e-12);
        let (a, b) = (sobolev_constant(&p), sobolev_constant_from_area(&p));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        prop_assert_eq!(a < 0.0, sigma < 1.0);
        prop_assert!(p.p < 0.0);
    }

    #[test]
    fn alpha_increases_from_degree_one(n in 1usize..3, sigma in sigma_strategy(), l in 1usize..40) {
        let p = SpectralParams::new(n, sigma + n as f64 / 2.0).unwrap();
        prop_assert!(alpha(&p, l + 1) > alpha(&p, l));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn deficit_nonnegative(k in 0usize..4, seed in any::<u64>()) {
        let (n, s) = MATRIX[k];
        let e = SpectralEngine::new(SpectralParams::new(n, s).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_positive(&e.params, 0.6, &mut rng);
        let d = e.deficit(&u).unwrap();
        prop_assert!(d.deficit >= -1e-7 * d.scale, "{:?}", d);
    }

    #[test]
    fn a2s_conformally_invariant(k in 0usize..4, seed in any::<u64>()) {
        let (n, s) = MATRIX[k];
        let e = SpectralEngine::new(SpectralParams::new(n, s).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_positive(&e.params, 0.5, &mut rng);
        let v = pullback(&u, &ConformalMap::random(n, &mut rng, 3.0), &e.params);
        let (a, b) = (e.deficit(&u).unwrap(), e.deficit(&v).unwrap());
        prop_assert!((a.a2s - b.a2s).abs() <= 1e-6 * a.a2s.abs());
        prop_assert!((a.norm_p - b.norm_p).abs() <= 1e-8 * a.norm_p);
    }

    #[test]
    fn bubbles_have_zero_deficit(k in 0usize..4, seed in any::<u64>(), r in 0.0f64..0.9, c in 0.1f64..5.0) {
        let (n, s) = MATRIX[k];
        let e = SpectralEngine::new(SpectralParams::new(n, s).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = revsob_core::conformal::random_unit(n, &mut rng);
        let b = Bubble::new(n, c, [r * d[0], r * d[1], r * d[2]]).unwrap();
        let def = e.deficit(&b.field(&e.params)).unwrap();
        prop_assert!(def.deficit.abs() <= 1e-6 * def.scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn decomposition_gates_and_homogeneity(k in 0usize..4, seed in any::<u64>(), lambda in 0.2f64..5.0) {
        let (n, s) = MATRIX[k];
        let e = SpectralEngine::new(SpectralParams::new(n, s).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_positive(&e.params, 0.5, &mut rng);
        let opts = SolverOptions { budget: 4, ..Default::default() };
        let t = Target::new(&e, &u).unwrap();
        let d = t.distance(&opts).unwrap();
        for p in &d.set.points {
            prop_assert!(p.residual_norm < 1e-10 * t.scale());
            prop_assert!(p.orthogonality < 1e-8 * t.scale());
            prop_assert!(p.rho_energy >= -1e-8 * t.scale());
        }
        prop_assert!(d.distance > 0.0);
        let scaled = Target::new(&e, &u.scaled(lambda)).unwrap().distance(&opts).unwrap();
        prop_assert!((scaled.distance / (lambda * lambda * d.distance) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn execution_policies_agree(k in 0usize..4, seed in any::<u64>()) {
        let (n, s) = MATRIX[k];
        let params = SpectralParams::new(n, s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_positive(&params, 0.5, &mut rng);
        let a = SpectralEngine::new(params).with_exec(Exec::Sequential).deficit(&u).unwrap();
        let b = SpectralEngine::new(params).with_exec(Exec::Parallel).deficit(&u).unwrap();
        prop_assert_eq!(a, b);
    }
}
