use revsob_core::decompose::SolverOptions;
use revsob_core::field::SphereField;
use revsob_core::quadform::SpectralEngine;
use revsob_core::specialfn::{band_quotient_limit, local_constant, SpectralParams};
use revsob_core::sphere::zonal;
use revsob_core::stability::{
    bubble_study, explore_min, predicted_local, probe_local, probe_sharpness, ExploreOptions, ExploreStart,
};
use revsob_core::Error;

fn engine(n: usize, s: f64) -> SpectralEngine {
    SpectralEngine::new(SpectralParams::new(n, s).unwrap())
}

fn opts() -> SolverOptions {
    SolverOptions { budget: 4, ..Default::default() }
}

#[test]
fn mixed_bands_predict_above_local_constant() {
    let e = engine(2, 1.5);
    let rho = SphereField::new(2, "Y2 + Y4", |p| zonal(2, 2, p) + 0.5 * zonal(2, 4, p));
    let pred = predicted_local(&e, &rho).unwrap();
    assert!(pred > local_constant(&e.params) + 1e-3);
    let rows = probe_local(&e, &rho, &[0.02, 0.01], &opts()).unwrap();
    assert!((rows[1].quotient - pred).abs() < 0.01);
}

#[test]
fn degree_five_band_in_upper_window() {
    let e = engine(2, 2.5);
    let rows = probe_sharpness(&e, &[2, 5], 0.01, &opts()).unwrap();
    let p5 = band_quotient_limit(&e.params, 5);
    assert!(p5 > 1.0 && p5 < band_quotient_limit(&e.params, 2));
    assert!((rows[1].quotient / p5 - 1.0).abs() < 0.02);
}

#[test]
fn positivity_violation_is_rejected() {
    let e = engine(2, 1.5);
    let rho = SphereField::new(2, "Y2", |p| zonal(2, 2, p));
    assert!(matches!(probe_local(&e, &rho, &[4.0], &opts()), Err(Error::InvalidInput(_))));
}

#[test]
fn small_beta_gives_one_critical_point() {
    let e = engine(1, 2.0);
    let rows = bubble_study(&e, &[0.1], &opts()).unwrap();
    assert_eq!(rows[0].critical_points, 1);
    assert!(rows[0].quotient > 0.0);
}

#[test]
fn explorer_descends_below_local_constant() {
    let e = engine(2, 1.5);
    let t = explore_min(&e, &ExploreOptions { iterations: 3, solver: opts(), ..Default::default() }).unwrap();
    assert!(t.steps[0].quotient < local_constant(&e.params));
    assert!(t.below_local);
    for w in t.steps.windows(2) {
        assert!(w[1].quotient <= w[0].quotient + 1e-9);
        assert!(w[1].min_u > 1e-3);
    }
}

#[test]
fn explorer_rejects_constant_start() {
    let e = engine(2, 1.5);
    let r = explore_min(&e, &ExploreOptions { start: ExploreStart::Zero, ..Default::default() });
    assert!(matches!(r, Err(Error::OnManifold { .. })));
}
