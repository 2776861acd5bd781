use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use resonant_imaging::green::{
    gex, green_vector, im_gex_real, im_green_fixed_frequency, perturbed_green, zeta, FieldPoint,
    GreenError, GreenModel, ZetaMode,
};
use resonant_imaging::resonance::resonances_asymptotic;
use resonant_imaging::system::{build_system, interaction_matrices, ResonatorSystem, SystemConfig};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `sin(u)/u` by its Taylor series.
fn sinc_series(u: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..40 {
        term *= -u * u / ((2 * n) as f64 * (2 * n + 1) as f64);
        sum += term;
    }
    sum
}

fn pair(eps: f64) -> ResonatorSystem {
    build_system(&SystemConfig::with_centers(eps, &[[0.0, 0.0], [2.0, 0.5]])).unwrap()
}

#[test]
fn free_green_values() {
    let x = [0.0, 0.0, 1.0];
    let y = [0.0, 0.0, 2.0];
    assert!((gex(x, y, c(0.0)).unwrap() - c(1.0 / TAU)).norm() < 1e-16);
    let g = gex(x, y, c(0.5 * PI)).unwrap();
    assert!((g - Complex64::new(0.0, 1.0 / TAU)).norm() < 1e-16);
    // complex wavenumber decays
    let g = gex(x, y, Complex64::new(0.0, 1.0)).unwrap();
    assert!((g - c((-1.0f64).exp() / TAU)).norm() < 1e-16);
    assert_eq!(gex(x, x, c(1.0)), Err(GreenError::Coincident(0.0)));
}

#[test]
fn im_green_matches_sine_series() {
    for (r, k) in [(0.0, 0.7), (1e-6, 0.3), (0.4, 1.1), (2.5, 0.9), (7.0, 0.2)] {
        let exact = k * sinc_series(k * r) / TAU;
        assert!((im_gex_real(r, k) - exact).abs() < 1e-14, "r={r} k={k}");
        if r > 0.0 {
            let x = [0.0, 0.0, 1.0];
            let y = [r, 0.0, 1.0];
            assert!((gex(x, y, c(k)).unwrap().im - exact).abs() < 1e-14);
        }
    }
}

#[test]
fn green_vector_is_translation_covariant() {
    let base = pair(1e-2);
    let shift = [3.0, -1.5];
    let mut moved = base.clone();
    for z in &mut moved.centers {
        z[0] += shift[0];
        z[1] += shift[1];
    }
    let x = [0.3, 0.7, 1.2];
    let xs = [x[0] + shift[0], x[1] + shift[1], x[2]];
    let a = green_vector(x, c(0.4), &base).unwrap();
    let b = green_vector(xs, c(0.4), &moved).unwrap();
    assert!((a - b).norm() < 1e-15);
    // component j equals the direct evaluation
    for (j, z) in base.centers.iter().enumerate() {
        let r = ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + x[2].powi(2)).sqrt();
        let direct = Complex64::from_polar(1.0 / (TAU * r), 0.4 * r);
        assert!((green_vector(x, c(0.4), &base).unwrap()[j] - direct).norm() < 1e-15);
    }
}

#[test]
fn zeta_single_resonator_above_centre() {
    let sys = build_system(&SystemConfig::single(1e-2)).unwrap();
    let sp = interaction_matrices(&sys);
    let x = [0.0, 0.0, 1.0];
    let z = zeta(1, x, x, c(0.0), &sp, &sys).unwrap();
    assert!((z - c(1.0 / (TAU * TAU))).norm() < 1e-16);
    assert_eq!(
        zeta(2, x, x, c(0.0), &sp, &sys),
        Err(GreenError::BadMode(2))
    );
    assert_eq!(
        zeta(0, x, x, c(0.0), &sp, &sys),
        Err(GreenError::BadMode(0))
    );
}

#[test]
fn zeta_symmetry_and_completeness() {
    let sys = build_system(&SystemConfig::with_centers(
        1e-2,
        &[[0.0, 0.0], [1.5, 0.0], [0.4, 2.0]],
    ))
    .unwrap();
    let sp = interaction_matrices(&sys);
    let x = [0.2, -0.3, 0.8];
    let x0 = [1.0, 1.0, 1.5];
    let k = c(0.3);
    let gx = green_vector(x, k, &sys).unwrap();
    let gx0 = green_vector(x0, k, &sys).unwrap();
    // orthonormal Y: sum_j zeta_j = G(x)^T G(x0)
    let direct: Complex64 = gx.iter().zip(gx0.iter()).map(|(a, b)| a * b).sum();
    let mut total = c(0.0);
    for j in 1..=3 {
        let z = zeta(j, x, x0, k, &sp, &sys).unwrap();
        let zr = zeta(j, x0, x, k, &sp, &sys).unwrap();
        assert!((z - zr).norm() < 1e-16);
        total += z;
    }
    assert!((total - direct).norm() < 1e-15);
}

fn parts(
    sys: &ResonatorSystem,
    model: &GreenModel,
    x: [f64; 3],
    x0: [f64; 3],
    k: f64,
) -> resonant_imaging::green::GreenParts {
    let sp = interaction_matrices(sys);
    let res = resonances_asymptotic(sys, &sp).unwrap();
    let x = FieldPoint::new(x, sys).unwrap();
    let x0 = FieldPoint::new(x0, sys).unwrap();
    perturbed_green(x, x0, k, sys, &sp, &res, model).unwrap()
}

#[test]
fn perturbation_vanishes_as_eps_shrinks() {
    let x = [0.5, 0.2, 1.0];
    let x0 = [-0.3, 0.4, 0.7];
    let mut prev = f64::INFINITY;
    for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
        let p = parts(&pair(eps), &GreenModel::default(), x, x0, 0.4);
        let d = (p.total - p.g1).norm();
        assert!(d < prev, "eps {eps}: {d} >= {prev}");
        prev = d;
    }
    assert!(prev < 1e-6);
}

#[test]
fn g3_is_bounded_away_from_resonances() {
    // at k = k1/2 the resonances sit near 0, far from k
    for eps in [1e-2, 1e-3] {
        let sys = pair(eps);
        let k = 0.5 * sys.k1();
        let p = parts(
            &sys,
            &GreenModel::default(),
            [0.5, 0.0, 1.0],
            [0.0, 0.5, 1.0],
            k,
        );
        let bound =
            4.0 * (sys.capacity * eps).powf(1.5) * sys.epsilon.sqrt() * sys.tau1() / (k * k);
        assert!(p.g3.norm() < bound, "{} vs {bound}", p.g3.norm());
    }
}

#[test]
fn peak_of_resonant_term_single_resonator() {
    let eps = 1e-4;
    let sys = build_system(&SystemConfig::single(eps)).unwrap();
    let sp = interaction_matrices(&sys);
    let res = resonances_asymptotic(&sys, &sp).unwrap();
    let k = res[0].value.re;
    let (x, x0) = ([0.0, 0.0, 1.0], [0.3, 0.0, 1.0]);
    for mode in [ZetaMode::AtK, ZetaMode::Frozen] {
        let model = GreenModel {
            zeta_mode: mode,
            ..GreenModel::default()
        };
        let p = parts(&sys, &model, x, x0, k);
        let z = zeta(
            1,
            x,
            x0,
            c(if mode == ZetaMode::AtK { k } else { 0.0 }),
            &sp,
            &sys,
        )
        .unwrap();
        // |Im k_res| = eps^2 / pi^2 for the unit disk in the unit cylinder
        let peak = (sys.capacity * eps).powf(1.5) / PI.sqrt() * z.norm() * PI * PI / (eps * eps);
        assert!(
            (p.g3.norm() - peak).abs() < 1e-3 * peak,
            "{} vs {peak}",
            p.g3.norm()
        );
        assert_eq!(p.near_pole, vec![(1, 1)]);
    }
}

#[test]
fn green_is_reciprocal() {
    let sys = pair(1e-2);
    let (x, x0) = ([0.6, -0.2, 0.9], [1.4, 0.8, 0.5]);
    for model in [
        GreenModel::default(),
        GreenModel {
            zeta_mode: ZetaMode::Frozen,
            ..GreenModel::default()
        },
    ] {
        for k in [0.01, 0.0707, 0.3] {
            let a = parts(&sys, &model, x, x0, k);
            let b = parts(&sys, &model, x0, x, k);
            assert!((a.total - b.total).norm() < 1e-14 * a.total.norm());
        }
    }
}

#[test]
fn robust_model_is_seeded() {
    let sys = pair(1e-2);
    let a = GreenModel::robust(&sys, 7);
    let b = GreenModel::robust(&sys, 7);
    let d = GreenModel::robust(&sys, 8);
    assert_eq!(a, b);
    assert_ne!(a, d);
    assert_eq!(a.residual.len(), 4);
    assert!(a
        .residual
        .iter()
        .all(|t| (t.amplitude.norm() - 1e-4).abs() < 1e-18));
}

#[test]
fn field_point_validation() {
    let sys = pair(1e-2);
    assert_eq!(
        FieldPoint::new([0.0, 0.0, 0.0], &sys),
        Err(GreenError::NotExterior([0.0, 0.0, 0.0]))
    );
    assert!(matches!(
        FieldPoint::new([0.0, 0.0, f64::NAN], &sys),
        Err(GreenError::NotExterior(_))
    ));
    assert!(matches!(
        FieldPoint::new([2.0, 0.5, 5e-3], &sys),
        Err(GreenError::InsideAperture { aperture: 1, .. })
    ));
    assert!(FieldPoint::new([2.0, 0.5, 2e-2], &sys).is_ok());
}

#[test]
fn outside_window_rejected() {
    let sys = pair(1e-2);
    let sp = interaction_matrices(&sys);
    let res = resonances_asymptotic(&sys, &sp).unwrap();
    let x = FieldPoint::new([0.0, 0.0, 1.0], &sys).unwrap();
    let k = 0.51 * sys.k1();
    let err = perturbed_green(x, x, k, &sys, &sp, &res, &GreenModel::default()).unwrap_err();
    assert!(matches!(err, GreenError::OutsideWindow { .. }));
}

#[test]
fn fixed_frequency_estimate() {
    // beta = 0 and alpha0 = 0 leave tau3 = 0
    let sys = build_system(&SystemConfig::single(1e-2)).unwrap();
    let sp = interaction_matrices(&sys);
    let x = FieldPoint::new([0.0, 0.0, 1.0], &sys).unwrap();
    assert_eq!(
        im_green_fixed_frequency(x, x, &sys, &sp),
        Err(GreenError::DegenerateMode { mode: 1 })
    );

    let sys = build_system(&SystemConfig {
        alpha0: 0.3,
        ..SystemConfig::single(1e-2)
    })
    .unwrap();
    let sp = interaction_matrices(&sys);
    let (xa, xb) = ([0.0, 0.0, 1.0], [3.0, 0.0, 1.0]);
    let x0 = FieldPoint::new(xa, &sys).unwrap();
    let x = FieldPoint::new(xb, &sys).unwrap();
    let v = im_green_fixed_frequency(x, x0, &sys, &sp).unwrap();
    // single mode: beta = 0, Y = 1, Im(Y^T S Y) = 1/(2 pi)
    let eps: f64 = 1e-2;
    let cap = sys.capacity;
    let tau3 = -0.5 * 0.3 * sys.tau1() * cap;
    let im_tau4 = -0.5 * cap * cap / PI / TAU;
    let zeta0 = 1.0 / (TAU * 1.0) / (TAU * 10f64.sqrt());
    let k = sys.tau1() * eps.sqrt();
    let expect = (3.0 * k).sin() / (TAU * 3.0)
        + cap.powf(1.5) / PI.sqrt() * eps.sqrt() * im_tau4 / (tau3 * tau3) * zeta0;
    assert!((v - expect).abs() < 1e-14, "{v} vs {expect}");
}
