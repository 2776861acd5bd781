use num_complex::Complex64;
use proptest::prelude::*;
use resonant_imaging::green::{gex, perturbed_green, FieldPoint, GreenModel};
use resonant_imaging::lorentzian::{
    abs_im_lorentzian_integral, complex_lorentzian_integral, LorentzianSpec,
};
use resonant_imaging::resonance::{passive, resonances_asymptotic};
use resonant_imaging::system::{build_system, interaction_matrices, SystemConfig};

fn point() -> impl Strategy<Value = [f64; 3]> {
    (-3.0..3.0f64, -3.0..3.0f64, 0.1..3.0f64).prop_map(|(a, b, c)| [a, b, c])
}

/// Well-separated centres: a jittered row.
fn layout(m: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-0.4..0.4f64, -0.4..0.4f64), m).prop_map(|j| {
        j.iter()
            .enumerate()
            .map(|(i, (dx, dy))| [1.5 * i as f64 + dx, *dy])
            .collect()
    })
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_green_is_symmetric(x in point(), y in point(), k in 0.0..2.0f64) {
        let a = gex(x, y, Complex64::new(k, 0.0)).unwrap();
        let b = gex(y, x, Complex64::new(k, 0.0)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn perturbed_green_is_reciprocal(
        centers in layout(2),
        x in point(),
        x0 in point(),
        frac in 0.01..0.99f64,
        eps in 1e-4..2e-2f64,
    ) {
        let sys = build_system(&SystemConfig::with_centers(eps, &centers)).unwrap();
        let sp = interaction_matrices(&sys);
        let res = resonances_asymptotic(&sys, &sp).unwrap();
        let (Ok(px), Ok(px0)) = (FieldPoint::new(x, &sys), FieldPoint::new(x0, &sys)) else {
            return Ok(());
        };
        prop_assume!((0..3).map(|i| (x[i] - x0[i]).powi(2)).sum::<f64>() > 1e-6);
        let k = frac * 0.5 * sys.k1();
        let m = GreenModel::default();
        let a = perturbed_green(px, px0, k, &sys, &sp, &res, &m).unwrap().total;
        let b = perturbed_green(px0, px, k, &sys, &sp, &res, &m).unwrap().total;
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-12));
    }

    #[test]
    fn resonances_are_passive(centers in layout(3), eps in 1e-4..2e-2f64) {
        let sys = build_system(&SystemConfig::with_centers(eps, &centers)).unwrap();
        let sp = interaction_matrices(&sys);
        for r in resonances_asymptotic(&sys, &sp).unwrap() {
            prop_assert!(passive(r.value), "{:?}", r.value);
            prop_assert!(r.value.im < 0.0);
        }
    }

    #[test]
    fn interaction_matrix_is_traceless_and_symmetric(centers in layout(4)) {
        let sys = build_system(&SystemConfig::with_centers(1e-2, &centers)).unwrap();
        let sp = interaction_matrices(&sys);
        prop_assert_eq!(sp.t.trace(), 0.0);
        prop_assert!((&sp.t - sp.t.transpose()).amax() == 0.0);
        let sum: f64 = sp.betas.iter().sum();
        prop_assert!(sum.abs() < 1e-13);
    }

    #[test]
    fn spectrum_is_translation_invariant(centers in layout(3), dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let moved: Vec<[f64; 2]> = centers.iter().map(|c| [c[0] + dx, c[1] + dy]).collect();
        let a = interaction_matrices(&build_system(&SystemConfig::with_centers(1e-2, &centers)).unwrap());
        let b = interaction_matrices(&build_system(&SystemConfig::with_centers(1e-2, &moved)).unwrap());
        for (x, y) in a.betas.iter().zip(&b.betas) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn abs_im_integral_is_below_pi(a1 in -5.0..0.0f64, a2 in 0.0..5.0f64, b in 1e-6..3.0f64) {
        let s = LorentzianSpec::new(a1, a2, 0.0, b).unwrap();
        let v = abs_im_lorentzian_integral(&s);
        prop_assert!(v > 0.0 && v <= std::f64::consts::PI);
    }

    #[test]
    fn complex_integral_matches_simpson(
        a1 in -2.0..0.0f64,
        a2 in 0.5..2.0f64,
        a in -1.0..1.0f64,
        b in 0.05..1.0f64,
    ) {
        let s = LorentzianSpec::new(a1, a2, a, b).unwrap();
        let z = complex_lorentzian_integral(&s);
        let den = |k: f64| (k - a).powi(2) + b * b;
        let re = simpson(|k| (k - a) / den(k), a1, a2, 20_000);
        let im = simpson(|k| b / den(k), a1, a2, 20_000);
        prop_assert!((z.re - re).abs() < 1e-8 && (z.im - im).abs() < 1e-8);
    }
}
