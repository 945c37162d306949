//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::cell::Cell;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revsob_core::conformal::{pullback, Bubble, ConformalMap};
use revsob_core::decompose::{project_off_tangent, SolverOptions, Target};
use revsob_core::field::{random_positive, two_bubble, SphereField};
use revsob_core::quadform::SpectralEngine;
use revsob_core::specialfn::{
    alpha, local_constant, sobolev_constant, sobolev_constant_from_area, sphere_area, SpectralParams,
};
use revsob_core::sphere::{transform_for, zonal, Point};
use revsob_core::stability::{
    alpha_deviation, balance_sweep, check_balance_constant, check_concentration_constant, concentration_ratio,
    probe_local, probe_sharpness, probe_strict, quotient, richardson_ratios,
};
use revsob_core::Result;

type Outcome = Result<(bool, String)>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

const MATRIX: [(usize, f64); 4] = [(2, 1.5), (2, 2.5), (1, 0.75), (1, 2.0)];

fn engine(n: usize, s: f64) -> SpectralEngine {
    SpectralEngine::new(SpectralParams::new(n, s).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn directions(n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut d = vec![[0.0; 3]; 5];
    d[0][n] = 1.0;
    d[1][0] = -1.0;
    for v in d.iter_mut().skip(2) {
        *v = revsob_core::conformal::random_unit(n, rng);
    }
    d
}

fn constants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let n = 1 + k % 4;
        let sigma = loop {
            let x = 2.0 * rng.random::<f64>();
            if (x - 1.0).abs() > 1e-3 && x > 1e-3 && x < 2.0 - 1e-3 {
                break x;
            }
        };
        let p = SpectralParams::new(n, sigma + n as f64 / 2.0)?;
        worst = worst
            .max(rel(sobolev_constant(&p), sobolev_constant_from_area(&p)))
            .max(rel(alpha(&p, 1), (p.p - 1.0) * alpha(&p, 0)))
            .max(rel(1.0 - alpha(&p, 1) / alpha(&p, 2), local_constant(&p)));
    }
    Ok((worst < 1e-12, format!("worst relative error {worst:.2e} over 50 pairs")))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for (n, s) in MATRIX {
        let e = engine(n, s);
        let area = sphere_area(n);
        for dir in directions(n, &mut rng) {
            for r in [0.0, 0.3, 0.6, 0.9] {
                let b = Bubble::unit(n, [r * dir[0], r * dir[1], r * dir[2]])?;
                let v = b.field(&e.params);
                let (c, _) = e.converged(&v)?;
                let t = transform_for(n, c.degree);
                let samples = v.samples(&t.grid, e.exec);
                let int_p = t.grid.integrate_samples(&samples.iter().map(|x| x.powf(e.params.p)).collect::<Vec<_>>())?;
                worst = worst.max(rel(int_p, area)).max(rel(e.value(&c), e.alpha()[0] * area));
            }
        }
    }
    Ok((worst < 1e-6, format!("worst relative error {worst:.2e} over 80 bubbles")))
}

fn invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut wa, mut wd): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        let (n, s) = MATRIX[k % 4];
        let e = engine(n, s);
        let u = random_positive(&e.params, 0.5, &mut rng);
        let map = ConformalMap::random(n, &mut rng, 3.0);
        let v = pullback(&u, &map, &e.params);
        let (du, dv) = (e.deficit(&u)?, e.deficit(&v)?);
        wa = wa.max((du.a2s - dv.a2s).abs() / du.a2s.abs());
        wd = wd.max((du.deficit - dv.deficit).abs() / du.a2s.abs());
    }
    Ok((wa <= 1e-6 && wd <= 1e-6, format!("a_2s drift {wa:.2e}, deficit drift {wd:.2e} (relative to |a_2s|)")))
}

fn positivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    for k in 0..200 {
        let (n, s) = MATRIX[k % 4];
        let e = engine(n, s);
        let u = random_positive(&e.params, 0.6, &mut rng);
        let d = e.deficit(&u)?;
        worst = worst.min(d.deficit / d.scale);
    }
    let mut bubble_worst: f64 = 0.0;
    for (n, s) in MATRIX {
        let e = engine(n, s);
        for r in [0.0, 0.5, 0.9] {
            let mut z = [0.0; 3];
            z[0] = r;
            let d = e.deficit(&Bubble::new(n, 1.7, z)?.field(&e.params))?;
            bubble_worst = bubble_worst.max(d.deficit / d.scale);
        }
    }
    Ok((
        worst >= -1e-7 && bubble_worst <= 1e-6,
        format!("min deficit/scale {worst:.2e} over 200 fields; max on bubbles {bubble_worst:.2e}"),
    ))
}

fn decomposition() -> Outcome {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut recovery: f64 = 0.0;
    let mut gates = true;
    let mut cases = 0;
    for (n, s) in MATRIX {
        let e = engine(n, s);
        for r in [0.0, 0.5, 0.8] {
            let dir = revsob_core::conformal::random_unit(n, &mut rng);
            let zeta = [r * dir[0], r * dir[1], r * dir[2]];
            let g = SphereField::new(n, "g", move |p| p[0] * p[0] - p[1] + 0.3 * p[0] * p[n]);
            let rho = project_off_tangent(&e, &zeta, &g)?;
            let c = 0.5 + rng.random::<f64>();
            let u = Bubble::new(n, c, zeta)?.field(&e.params).combine(1.0, &rho, 0.05 * c);
            let t = Target::new(&e, &u)?;
            let d = t.solve_branch(t.g(&[0.0; 3]) / sphere_area(n), [0.0; 3], "origin", &opts)?;
            recovery = recovery.max((d.c - c).abs());
            for (got, want) in d.zeta.iter().zip(&zeta) {
                recovery = recovery.max((got - want).abs());
            }
            gates &= d.residual_norm < 1e-10 * t.scale() && d.orthogonality < 1e-8 * t.scale();
            cases += 1;
        }
        for _ in 0..3 {
            let u = random_positive(&e.params, 0.6, &mut rng);
            let t = Target::new(&e, &u)?;
            let set = t.enumerate(&SolverOptions { budget: 8, ..opts })?;
            for p in &set.points {
                gates &= p.residual_norm < 1e-10 * t.scale()
                    && p.orthogonality < 1e-8 * t.scale()
                    && p.rho_energy >= -1e-8 * t.scale();
            }
            cases += 1;
        }
    }
    Ok((
        recovery < 1e-6 && gates,
        format!("{cases} cases, worst (c, zeta) error {recovery:.2e}, gates {}", if gates { "held" } else { "violated" }),
    ))
}

fn y(n: usize, ell: usize) -> SphereField {
    SphereField::new(n, format!("Y_{ell}"), move |p| zonal(n, ell, p))
}

fn local(lowest_upper: &Cell<f64>) -> Outcome {
    let e = engine(2, 1.5);
    let rows = probe_local(&e, &y(2, 2), &[0.04, 0.02, 0.01], &SolverOptions { budget: 4, ..Default::default() })?;
    let ratios = richardson_ratios(&rows);
    let last = rows.last().unwrap();
    let gap = (last.quotient - 6.0 / 7.0).abs();
    let rate = ratios.iter().all(|r| (1.6..=2.4).contains(r));
    let e = engine(2, 2.5);
    let r = quotient(&e, &SphereField::constant(2, 1.0).combine(1.0, &y(2, 2), 0.05), &SolverOptions::default(), None)?;
    lowest_upper.set(lowest_upper.get().min(r.quotient));
    Ok((
        rate && gap < 0.01,
        format!("E = {:.6} at eps = 0.01, gap {gap:.2e}, halving ratios {ratios:.3?}", last.quotient),
    ))
}

fn sharpness(lowest_upper: &Cell<f64>) -> Outcome {
    let e = engine(2, 2.5);
    let rows = probe_sharpness(&e, &[2, 4, 6, 10], 0.01, &SolverOptions { budget: 4, ..Default::default() })?;
    let worst = rows.iter().map(|r| rel(r.quotient, r.predicted.unwrap())).fold(0.0, f64::max);
    let decreasing = rows.windows(2).all(|w| w[1].quotient < w[0].quotient);
    let above = rows.iter().all(|r| r.quotient > 1.0);
    for r in &rows {
        lowest_upper.set(lowest_upper.get().min(r.quotient));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (n, s) in [(2, 2.5), (1, 2.0)] {
        let e = engine(n, s);
        for _ in 0..6 {
            let u = random_positive(&e.params, 0.5, &mut rng);
            let r = quotient(&e, &u, &SolverOptions { budget: 4, ..Default::default() }, None)?;
            lowest_upper.set(lowest_upper.get().min(r.quotient));
        }
    }
    let floor = lowest_upper.get();
    let values: Vec<String> = rows.iter().map(|r| format!("{}:{:.5}", r.ell.unwrap(), r.quotient)).collect();
    Ok((
        worst < 0.02 && decreasing && above && floor >= 1.0 - 1e-6,
        format!("E by degree [{}], worst mismatch {worst:.2e}, lowest E seen for s - n/2 in (1,2): {floor:.6}", values.join(", ")),
    ))
}

fn strict() -> Outcome {
    let e = engine(2, 1.5);
    let r = probe_strict(&e, &[0.05, -0.05, 0.02, -0.02], &SolverOptions { budget: 4, ..Default::default() })?;
    Ok((
        r.slope_relative_error < 0.05 && r.min_quotient < 6.0 / 7.0 - 1e-3,
        format!(
            "slope {:.5} vs predicted {:.5} ({:.2}%), min E {:.6} at eps = {}",
            r.slope_measured,
            r.slope_predicted,
            100.0 * r.slope_relative_error,
            r.min_quotient,
            r.argmin_epsilon
        ),
    ))
}

fn asymptotic_constants() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut dev_max: f64 = 0.0;
    let (mut conc, mut cc, mut cb): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut monotone = true;
    for (n, s) in MATRIX {
        let e = engine(n, s);
        let d = alpha_deviation(&e.params, 1000)?;
        dev_max = dev_max.max(d.max_scaled);
        ok &= d.max_scaled.is_finite() && (d.last_scaled - d.limit).abs() < 0.05 * d.limit.max(1.0);
        cc = cc.max(check_concentration_constant(&e.params)?.relative_error);
        cb = cb.max(check_balance_constant(&e.params)?.relative_error);
        let u = SphereField::new(n, "u", move |p| 1.0 + 0.3 * p[n] + 0.2 * p[0] * p[1]);
        let mut nu = [0.0; 3];
        nu[n] = 1.0;
        conc = conc.max(concentration_ratio(&e, &u, &nu, 0.99)?.relative_error);
        let xis: Vec<Point> = if n == 1 {
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-0.6, 0.8, 0.0]]
        } else {
            vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.48, -0.6, 0.64]]
        };
        for sweep in balance_sweep(&e, &u, &xis, &[5.0, 10.0, 20.0, 40.0])? {
            monotone &= sweep.monotone;
        }
    }
    ok &= conc < 0.03 && cc < 1e-8 && cb < 1e-8 && monotone;
    notes.push(format!("max k*deviation {dev_max:.3}"));
    notes.push(format!("concentration ratio error {:.2}%", 100.0 * conc));
    notes.push(format!("c_conc {cc:.1e}, c_bal {cb:.1e}"));
    notes.push(format!("balance map improvement {}", if monotone { "monotone" } else { "not monotone" }));
    Ok((ok, notes.join("; ")))
}

fn two_bubbles() -> Outcome {
    let e = engine(1, 2.0);
    let u = two_bubble(&e.params, 0.95);
    let t = Target::new(&e, &u)?;
    let d = t.distance(&SolverOptions::default())?;
    let pts = &d.set.points;
    let mut spread = f64::INFINITY;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            if a.zeta.iter().zip(&b.zeta).any(|(x, y)| (x - y).abs() > 1e-6) {
                spread = spread.min(rel(a.rho_energy, b.rho_energy));
            }
        }
    }
    Ok((
        pts.len() >= 2 && spread < 1e-8 && d.distance > 0.0,
        format!("{} critical points, closest pair energy spread {spread:.1e}, d = {:.6e}", pts.len(), d.distance),
    ))
}

fn main() -> ExitCode {
    let lowest_upper = Cell::new(f64::INFINITY);
    let criteria: Vec<Criterion> = vec![
        ("constants identities", Box::new(constants)),
        ("bubble normalization", Box::new(normalization)),
        ("conformal invariance", Box::new(invariance)),
        ("reverse Sobolev positivity", Box::new(positivity)),
        ("decomposition correctness", Box::new(decomposition)),
        ("local constant", Box::new(|| local(&lowest_upper))),
        ("sharpness in the upper window", Box::new(|| sharpness(&lowest_upper))),
        ("strict inequality", Box::new(strict)),
        ("asymptotic constants", Box::new(asymptotic_constants)),
        ("two-bubble multiplicity", Box::new(two_bubbles)),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
