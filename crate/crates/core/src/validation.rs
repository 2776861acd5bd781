//! Acceptance checks. Each check returns a [`CriterionReport`] plus any CSV
//! artifacts it produced; [`run_all`] strings them together for the
//! `validate` command.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aperture::{
    assemble_riesz_matrix, density_csv, disk_density, solve_with, ApertureMesh, ApertureShape,
    DEFAULT_RESOLUTION,
};
use crate::green::{im_green_fixed_frequency, perturbed_green, FieldPoint, GreenModel, ZetaMode};
use crate::imaging::{
    focal_metrics, imaging_functional, imaging_scan, theorem28_prediction, ImagingOptions,
};
use crate::lorentzian::{
    abs_im_lorentzian_integral, abs_ratio_integral, complex_lorentzian_integral,
    paper_approx_abs_im, paper_approx_abs_ratio, paper_approx_weighted, weighted_abs_im_lorentzian,
    LorentzianSpec,
};
use crate::output::{csv_table, fmt_f64};
use crate::quadrature::{integrate_vector, AdaptiveOptions};
use crate::resonance::{
    pair_roots, passive, resonance_csv, resonance_table, resonances_asymptotic, resonances_oracle,
};
use crate::signal::{
    make_root_signal, signal_bounds, SignalKind, SignalSpec, DEFAULT_DELTA, DEFAULT_SAMPLES,
};
use crate::system::{build_system, interaction_matrices, ResonatorSystem, SystemConfig};

/// Seed used by the randomized checks unless overridden.
pub const DEFAULT_SEED: u64 = 2024;
/// Root-signal support length used by the imaging checks.
pub const DEFAULT_C1: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: String,
    pub title: String,
    pub passed: bool,
    /// Key measured quantities, `name = value`.
    pub measured: Vec<(String, f64)>,
    pub detail: String,
    /// Wall time, seconds (printed, never written to artifacts).
    #[serde(skip)]
    pub seconds: f64,
}

impl CriterionReport {
    fn new(id: &str, title: &str) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            passed: true,
            measured: Vec::new(),
            detail: String::new(),
            seconds: 0.0,
        }
    }

    fn put(&mut self, name: impl Into<String>, v: f64) {
        self.measured.push((name.into(), v));
    }

    fn require(&mut self, ok: bool, what: impl AsRef<str>) {
        if !ok {
            self.passed = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(what.as_ref());
        }
    }

    fn fail(id: &str, title: &str, err: impl std::fmt::Display) -> Self {
        let mut r = Self::new(id, title);
        r.require(false, format!("error: {err}"));
        r
    }

    /// One-line summary, `criterion <id> PASS|FAIL: name=value ...`.
    pub fn line(&self) -> String {
        let mut s = format!(
            "criterion {} {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title
        );
        for (k, v) in &self.measured {
            let _ = write!(s, " {k}={v:.6e}");
        }
        if !self.detail.is_empty() {
            let _ = write!(s, " [{}]", self.detail);
        }
        let _ = write!(s, " ({:.2}s)", self.seconds);
        s
    }
}

/// A named CSV body produced by a check.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub body: String,
}

pub type Outcome = (CriterionReport, Vec<Artifact>);

fn timed(f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let (mut r, a) = f();
    r.seconds = start.elapsed().as_secs_f64();
    (r, a)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Unit-disk capacity and equilibrium density.
pub fn criterion_1(resolution: usize) -> Outcome {
    timed(|| {
        let title = "unit-disk capacity and equilibrium density";
        let mut r = CriterionReport::new("1", title);
        let mesh = match ApertureMesh::new(ApertureShape::UnitDisk, resolution) {
            Ok(m) => m,
            Err(e) => return (CriterionReport::fail("1", title, e), vec![]),
        };
        let start = Instant::now();
        let dens = match assemble_riesz_matrix(&mesh).and_then(|m| solve_with(&m, &mesh)) {
            Ok(d) => d,
            Err(e) => return (CriterionReport::fail("1", title, e), vec![]),
        };
        let secs = start.elapsed().as_secs_f64();
        let rel = (dens.capacity - 2.0).abs() / 2.0;
        let mut worst: f64 = 0.0;
        for (p, mu) in mesh.nodes.iter().zip(&dens.values) {
            if p[0].hypot(p[1]) <= 0.8 {
                worst = worst.max((mu / disk_density(*p) - 1.0).abs());
            }
        }
        r.put("nodes", mesh.len() as f64);
        r.put("capacity", dens.capacity);
        r.put("capacity_rel_err", rel);
        r.put("density_max_rel_err", worst);
        r.require(mesh.len() <= 5000, "mesh exceeds 5000 nodes");
        r.require(rel <= 5e-3, "capacity off by more than 0.5%");
        r.require(worst <= 2e-2, "density off by more than 2% on |x| <= 0.8");
        r.require(secs <= 30.0, format!("solve took {secs:.1}s > 30s"));
        let art = Artifact {
            name: "density.csv".into(),
            body: density_csv(&mesh, &dens),
        };
        (r, vec![art])
    })
}

/// Capacity of `eps Λ` equals `eps c_Λ` on the scaled mesh.
pub fn criterion_2(resolution: usize) -> Outcome {
    timed(|| {
        let title = "capacity scaling of eps*Lambda";
        let mut r = CriterionReport::new("2", title);
        let run = || -> Result<Vec<(f64, f64)>, crate::aperture::ApertureError> {
            let mesh = ApertureMesh::new(ApertureShape::UnitDisk, resolution)?;
            let base = solve_with(&assemble_riesz_matrix(&mesh)?, &mesh)?.capacity;
            let mut out = vec![(1.0, base)];
            for eps in [1e-1, 1e-3] {
                let m = mesh.scaled(eps);
                out.push((eps, solve_with(&assemble_riesz_matrix(&m)?, &m)?.capacity));
            }
            Ok(out)
        };
        match run() {
            Ok(v) => {
                let base = v[0].1;
                for (eps, c) in &v[1..] {
                    let rel = (c - eps * base).abs() / (eps * base);
                    r.put(format!("rel_err_eps_{eps:e}"), rel);
                    r.require(
                        rel <= 1e-8,
                        format!("scaling off by {rel:e} at eps = {eps:e}"),
                    );
                }
            }
            Err(e) => return (CriterionReport::fail("2", title, e), vec![]),
        }
        (r, vec![])
    })
}

/// Sweep used by the order-of-accuracy check.
pub const ORDER_SWEEP: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Largest `|k_asym - k_oracle|` over all paired roots at each `eps`.
pub fn order_gaps(base: &SystemConfig, sweep: &[f64]) -> Result<Vec<f64>, String> {
    sweep
        .iter()
        .map(|&eps| {
            let sys = build_system(&SystemConfig {
                epsilon: eps,
                ..base.clone()
            })
            .map_err(|e| e.to_string())?;
            let spec = interaction_matrices(&sys);
            let asym: Vec<Complex64> = resonances_asymptotic(&sys, &spec)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|r| r.value)
                .collect();
            let oracle = resonances_oracle(&sys, &spec).map_err(|e| e.to_string())?;
            Ok(pair_roots(&asym, &oracle)
                .iter()
                .map(|p| p.gap)
                .fold(0.0, f64::max))
        })
        .collect()
}

/// `count` random layouts of `m` centres in `[0, side]^2` with pairwise
/// distance above `min_sep` and a non-degenerate interaction matrix.
pub fn random_layouts(
    m: usize,
    count: usize,
    side: f64,
    min_sep: f64,
    seed: u64,
) -> Vec<Vec<[f64; 2]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let mut c: Vec<[f64; 2]> = Vec::new();
        while c.len() < m {
            let p = [rng.random_range(0.0..side), rng.random_range(0.0..side)];
            if c.iter().all(|q| (q[0] - p[0]).hypot(q[1] - p[1]) > min_sep) {
                c.push(p);
            }
        }
        let sys = build_system(&SystemConfig::with_centers(1e-2, &c)).expect("valid layout");
        if !interaction_matrices(&sys).is_degenerate() {
            out.push(c);
        }
    }
    out
}

/// Order of accuracy of the asymptotic resonances for `m` resonators.
pub fn criterion_3(m: usize, seed: u64) -> Outcome {
    timed(|| {
        let id = format!("3.M{m}");
        let title = format!("resonance remainder slope 2.5 +- 0.2, M = {m}");
        let mut r = CriterionReport::new(&id, &title);
        let layouts = if m == 1 {
            vec![vec![[0.0, 0.0]]]
        } else {
            random_layouts(m, 5, 8.0, 2.0, seed)
        };
        let mut csv = String::from("layout,epsilon,max_gap\n");
        for (li, c) in layouts.iter().enumerate() {
            let start = Instant::now();
            match order_gaps(&SystemConfig::with_centers(1e-2, c), &ORDER_SWEEP) {
                Ok(g) => {
                    let s = loglog_slope(&ORDER_SWEEP, &g);
                    for (e, v) in ORDER_SWEEP.iter().zip(&g) {
                        let _ = writeln!(csv, "{li},{},{}", fmt_f64(*e), fmt_f64(*v));
                    }
                    r.put(format!("slope_layout{li}"), s);
                    r.require((s - 2.5).abs() <= 0.2, format!("layout {li}: slope {s:.3}"));
                }
                Err(e) => r.require(false, format!("layout {li}: {e}")),
            }
            let secs = start.elapsed().as_secs_f64();
            r.require(secs <= 5.0, format!("layout {li} took {secs:.1}s"));
        }
        (
            r,
            vec![Artifact {
                name: format!("order_m{m}.csv"),
                body: csv,
            }],
        )
    })
}

/// Passivity of every resonance and the branch symmetry for
/// `alpha0 = Re alpha1 = 0`.
pub fn criterion_4(seed: u64) -> Outcome {
    timed(|| {
        let mut r = CriterionReport::new("4", "resonance passivity and branch symmetry");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_im: f64 = f64::NEG_INFINITY;
        let mut worst_sym: f64 = 0.0;
        let mut failures = 0usize;
        for case in 0..100 {
            let m = rng.random_range(1..=5usize);
            let eps = 10f64.powf(rng.random_range(-3.0..-1.5));
            let c = random_layouts(m, 1, 10.0, 1.0, rng.random())[0].clone();
            let mut cfg = SystemConfig::with_centers(eps, &c);
            cfg.alpha0 = rng.random_range(-2.0..2.0);
            cfg.re_alpha1 = rng.random_range(-1.0..1.0);
            let check = |cfg: &SystemConfig| -> Result<(Vec<Complex64>, Vec<Complex64>), String> {
                let sys = build_system(cfg).map_err(|e| e.to_string())?;
                let spec = interaction_matrices(&sys);
                let a = resonances_asymptotic(&sys, &spec).map_err(|e| e.to_string())?;
                let o = resonances_oracle(&sys, &spec).map_err(|e| e.to_string())?;
                Ok((a.iter().map(|x| x.value).collect(), o))
            };
            match check(&cfg) {
                Ok((a, o)) => {
                    for k in a.iter() {
                        max_im = max_im.max(k.im / k.norm());
                        if k.im > 0.0 {
                            failures += 1;
                        }
                    }
                    for k in o.iter() {
                        max_im = max_im.max(k.im / k.norm());
                        if !passive(*k) {
                            failures += 1;
                        }
                    }
                }
                Err(e) => r.require(false, format!("case {case}: {e}")),
            }
            cfg.alpha0 = 0.0;
            cfg.re_alpha1 = 0.0;
            match check(&cfg) {
                Ok((a, o)) => {
                    for roots in [a, o] {
                        for k in roots.iter().filter(|k| k.re > 0.0) {
                            let mirror = -k.conj();
                            let d = roots
                                .iter()
                                .map(|q| (q - mirror).norm())
                                .fold(f64::INFINITY, f64::min);
                            worst_sym = worst_sym.max(d / k.norm());
                        }
                    }
                }
                Err(e) => r.require(false, format!("case {case}: {e}")),
            }
        }
        r.put("max_im_over_abs", max_im);
        r.put("active_roots", failures as f64);
        r.put("max_branch_asymmetry", worst_sym);
        r.require(failures == 0, format!("{failures} roots with Im k > 0"));
        r.require(worst_sym <= 1e-12, "branch symmetry violated");
        (r, vec![])
    })
}

/// Mode splitting for two resonators at distance `d`.
pub fn criterion_5(d: f64) -> Outcome {
    timed(|| {
        let title = "two-resonator mode splitting";
        let mut r = CriterionReport::new("5", title);
        let eps = 1e-3;
        let sys = match build_system(&SystemConfig::with_centers(eps, &[[0.0, 0.0], [d, 0.0]])) {
            Ok(s) => s,
            Err(e) => return (CriterionReport::fail("5", title, e), vec![]),
        };
        let spec = interaction_matrices(&sys);
        let expected =
            0.5 * (1.0 / (2.0 * PI * d)) * sys.tau1() * sys.capacity * eps.powf(1.5) * 2.0;
        let oracle = match resonances_oracle(&sys, &spec) {
            Ok(o) => o,
            Err(e) => return (CriterionReport::fail("5", title, e), vec![]),
        };
        let mut pos: Vec<f64> = oracle.iter().filter(|k| k.re > 0.0).map(|k| k.re).collect();
        let mut neg: Vec<f64> = oracle.iter().filter(|k| k.re < 0.0).map(|k| k.re).collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        r.put("expected_gap", expected);
        if pos.len() != 2 || neg.len() != 2 {
            r.require(false, "expected two roots per branch");
            return (r, vec![]);
        }
        for (name, g) in [
            ("gap_branch1", pos[1] - pos[0]),
            ("gap_branch2", neg[1] - neg[0]),
        ] {
            let rel = (g - expected).abs() / expected;
            r.put(name, g);
            r.put(format!("{name}_rel_err"), rel);
            r.require(rel <= 0.05, format!("{name} off by {:.2}%", 100.0 * rel));
        }
        let rows = resonance_table(&sys, &spec).unwrap_or_default();
        (
            r,
            vec![Artifact {
                name: "resonances_m2.csv".into(),
                body: resonance_csv(&rows),
            }],
        )
    })
}

fn lorentzian_quadrature(s: &LorentzianSpec) -> [f64; 5] {
    let b = s.b.abs();
    let mut breaks = vec![s.a];
    let mut w = b;
    while w < (s.a2 - s.a1).abs() {
        breaks.push(s.a - w);
        breaks.push(s.a + w);
        w *= 4.0;
    }
    let opts = AdaptiveOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_panels: 20_000,
    };
    let out = integrate_vector(
        |k, o: &mut [f64]| {
            let d = k - s.a;
            let den = d * d + s.b * s.b;
            o[0] = d / den;
            o[1] = s.b / den;
            o[2] = b / den;
            o[3] = b / den * d.abs();
            o[4] = d.abs() / den.sqrt();
        },
        5,
        s.a1,
        s.a2,
        &breaks,
        opts,
    );
    [
        out.values[0],
        out.values[1],
        out.values[2],
        out.values[3],
        out.values[4],
    ]
}

/// Random Lorentzian specs with `A1 <= a <= A2`, `|b|` log-uniform in
/// `[10^lo, 10^hi]` relative to `scale(a1, a2, a)`.
fn random_specs(n: usize, seed: u64, regime: bool) -> Vec<LorentzianSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let a1 = a - rng.random_range(1e-2..2.0);
            let a2 = a + rng.random_range(1e-2..2.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let b = if regime {
                let room = (a2 - a).min(a - a1);
                room * 10f64.powf(rng.random_range(-6.0..-3.0))
            } else {
                10f64.powf(rng.random_range(-6.0..0.0))
            };
            LorentzianSpec::new(a1, a2, a, sign * b).expect("nonzero width")
        })
        .collect()
}

/// Comparison table of closed forms against quadrature.
pub fn lorentzian_table(n: usize, seed: u64) -> (Vec<[f64; 9]>, f64) {
    let mut worst: f64 = 0.0;
    let rows = random_specs(n, seed, false)
        .iter()
        .map(|s| {
            let q = lorentzian_quadrature(s);
            let z = complex_lorentzian_integral(s);
            let ex = [
                z.re,
                z.im,
                abs_im_lorentzian_integral(s),
                weighted_abs_im_lorentzian(s).expect("centred"),
                abs_ratio_integral(s).expect("centred"),
            ];
            let diff = ex
                .iter()
                .zip(&q)
                .map(|(e, v)| (e - v).abs())
                .fold(0.0, f64::max);
            worst = worst.max(diff);
            [s.a1, s.a2, s.a, s.b, ex[0], ex[1], ex[2], ex[3], diff]
        })
        .collect();
    (rows, worst)
}

/// Closed-form integrals against quadrature; printed leading-order forms in
/// the narrow-width regime.
pub fn criterion_6(seed: u64) -> Outcome {
    timed(|| {
        let mut r = CriterionReport::new("6", "Lorentzian closed forms");
        let (rows, worst) = lorentzian_table(1000, seed);
        r.put("max_abs_err_vs_quadrature", worst);
        r.require(worst <= 1e-10, format!("closed form off by {worst:e}"));
        let mut w_rel: f64 = 0.0;
        let (mut im_ratio, mut ratio_ratio) = ((f64::INFINITY, 0.0_f64), (f64::INFINITY, 0.0_f64));
        for s in random_specs(1000, seed ^ 0x5eed, true) {
            let exact = weighted_abs_im_lorentzian(&s).expect("centred");
            w_rel = w_rel.max((paper_approx_weighted(&s) - exact).abs() / exact);
            let q = paper_approx_abs_im(&s) / abs_im_lorentzian_integral(&s);
            im_ratio = (im_ratio.0.min(q), im_ratio.1.max(q));
            let q = paper_approx_abs_ratio(&s) / abs_ratio_integral(&s).expect("centred");
            ratio_ratio = (ratio_ratio.0.min(q), ratio_ratio.1.max(q));
        }
        r.put("weighted_form_max_rel_err", w_rel);
        r.put("abs_im_printed_over_exact_min", im_ratio.0);
        r.put("abs_im_printed_over_exact_max", im_ratio.1);
        r.put("abs_ratio_printed_over_exact_min", ratio_ratio.0);
        r.put("abs_ratio_printed_over_exact_max", ratio_ratio.1);
        r.require(
            w_rel <= 1e-2,
            format!("weighted leading-order form off by {:.3}%", 100.0 * w_rel),
        );
        let body = csv_table(
            &[
                "a1",
                "a2",
                "a",
                "b",
                "re_complex",
                "im_complex",
                "abs_im",
                "weighted_abs_im",
                "max_abs_err",
            ],
            &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        );
        (
            r,
            vec![Artifact {
                name: "lorentzian.csv".into(),
                body,
            }],
        )
    })
}

fn fixed_frequency_points() -> Vec<([f64; 3], [f64; 3])> {
    vec![
        ([0.3, 0.0, 0.5], [0.0, 0.2, 1.0]),
        ([1.0, 0.0, 0.5], [0.0, 0.0, 1.0]),
        ([0.1, 0.1, 0.2], [0.0, -0.1, 0.3]),
        ([-0.4, 0.3, 0.8], [0.2, 0.0, 0.6]),
    ]
}

/// Fixed-frequency estimate against the perturbed Green function.
pub fn criterion_7() -> Outcome {
    timed(|| {
        let title = "fixed-frequency Im G two-term estimate";
        let mut r = CriterionReport::new("7", title);
        let model = GreenModel {
            zeta_mode: ZetaMode::Frozen,
            residual: vec![],
        };
        let mut consts = Vec::new();
        let mut csv = String::from("epsilon,x1,x2,x3,y1,y2,y3,im_g,estimate,diff\n");
        for eps in [1e-2, 2.5e-3] {
            let mut cfg = SystemConfig::single(eps);
            cfg.alpha0 = 1.0;
            let mut run = || -> Result<f64, String> {
                let sys = build_system(&cfg).map_err(|e| e.to_string())?;
                let spec = interaction_matrices(&sys);
                let res = resonances_asymptotic(&sys, &spec).map_err(|e| e.to_string())?;
                let k = sys.tau1() * eps.sqrt();
                let mut worst: f64 = 0.0;
                for (x, x0) in fixed_frequency_points() {
                    let fx = FieldPoint::new(x, &sys).map_err(|e| e.to_string())?;
                    let fx0 = FieldPoint::new(x0, &sys).map_err(|e| e.to_string())?;
                    let g = perturbed_green(fx, fx0, k, &sys, &spec, &res, &model)
                        .map_err(|e| e.to_string())?;
                    let est = im_green_fixed_frequency(fx, fx0, &sys, &spec)
                        .map_err(|e| e.to_string())?;
                    let d = (g.total.im - est).abs();
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{},{},{}",
                        fmt_f64(eps),
                        fmt_f64(x[0]),
                        fmt_f64(x[1]),
                        fmt_f64(x[2]),
                        fmt_f64(x0[0]),
                        fmt_f64(x0[1]),
                        fmt_f64(x0[2]),
                        fmt_f64(g.total.im),
                        fmt_f64(est),
                        fmt_f64(d)
                    );
                    worst = worst.max(d);
                }
                Ok(worst / eps)
            };
            match run() {
                Ok(c) => {
                    r.put(format!("C_eps_{eps:e}"), c);
                    consts.push(c);
                }
                Err(e) => return (CriterionReport::fail("7", title, e), vec![]),
            }
        }
        // the bound |diff| <= C eps must not deteriorate as eps shrinks
        r.require(
            consts[1] <= 2.0 * consts[0],
            "fitted constant grows by more than 2x",
        );
        r.require(
            consts.iter().all(|c| c.is_finite()),
            "non-finite difference",
        );
        (
            r,
            vec![Artifact {
                name: "fixed_frequency.csv".into(),
                body: csv,
            }],
        )
    })
}

/// Root signal used by the imaging checks at scale `eps`.
pub fn default_signal(eps: f64) -> SignalSpec {
    make_root_signal(SignalKind::SmoothBump, DEFAULT_C1, DEFAULT_SAMPLES)
        .and_then(|s| s.with_scale(eps, DEFAULT_DELTA))
        .expect("default signal is valid")
}

/// Focal widths of the resonator term and of the band term on the plane at
/// height 0.5 above a single resonator (source at height 1).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContrastWidths {
    pub epsilon: f64,
    /// From the `I3` quadrature with `zeta` frozen at `k = 0`.
    pub resonator_fwhm: f64,
    /// From the `I3` quadrature with `zeta` evaluated at `k`.
    pub resonator_fwhm_at_k: f64,
    pub band_fwhm: f64,
}

pub fn contrast_widths(eps: f64) -> Result<(ContrastWidths, Artifact), String> {
    let sys = build_system(&SystemConfig::single(eps)).map_err(|e| e.to_string())?;
    let spec = interaction_matrices(&sys);
    let res = resonances_asymptotic(&sys, &spec).map_err(|e| e.to_string())?;
    let sig = default_signal(eps);
    let x0 = FieldPoint::new([0.0, 0.0, 1.0], &sys).map_err(|e| e.to_string())?;
    let opts = ImagingOptions {
        high_frequency: false,
        ..ImagingOptions::default()
    };
    let pos: Vec<f64> = (0..=120).map(|i| -3.0 + 0.05 * i as f64).collect();
    let pts: Vec<[f64; 3]> = pos.iter().map(|p| [*p, 0.0, 0.5]).collect();
    let mut widths = [0.0; 2];
    let mut body = String::from("x1,x2,x3,i3_frozen,i3_at_k,band\n");
    let mut profiles = Vec::new();
    for (slot, mode) in [ZetaMode::Frozen, ZetaMode::AtK].into_iter().enumerate() {
        let model = GreenModel {
            zeta_mode: mode,
            residual: vec![],
        };
        let scan = imaging_scan(&pts, x0, &sig, &sys, &spec, &res, &model, &opts)
            .map_err(|e| e.to_string())?;
        let i3: Vec<f64> = scan.iter().map(|b| b.i3).collect();
        let sign = i3[60].signum();
        let prof: Vec<f64> = i3.iter().map(|v| v * sign).collect();
        widths[slot] = focal_metrics(&pos, &prof).map_err(|e| e.to_string())?.fwhm;
        profiles.push(i3);
    }
    let reach = 20.0 / eps.sqrt();
    let bpos: Vec<f64> = (0..=400)
        .map(|i| reach * (-1.0 + 0.005 * i as f64))
        .collect();
    let band: Vec<f64> = bpos
        .iter()
        .map(|p| {
            let x = FieldPoint::new([*p, 0.0, 0.5], &sys).expect("exterior point");
            theorem28_prediction(x, x0, 0.0, &sig, &sys).band
        })
        .collect();
    let sign = band[200].signum();
    let prof: Vec<f64> = band.iter().map(|v| v * sign).collect();
    let band_fwhm = focal_metrics(&bpos, &prof).map_err(|e| e.to_string())?.fwhm;
    for (i, p) in pts.iter().enumerate() {
        let _ = writeln!(
            body,
            "{},{},{},{},{},",
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(p[2]),
            fmt_f64(profiles[0][i]),
            fmt_f64(profiles[1][i])
        );
    }
    for (p, v) in bpos.iter().zip(&band) {
        let _ = writeln!(
            body,
            "{},{},{},,,{}",
            fmt_f64(*p),
            fmt_f64(0.0),
            fmt_f64(0.5),
            fmt_f64(*v)
        );
    }
    Ok((
        ContrastWidths {
            epsilon: eps,
            resonator_fwhm: widths[0],
            resonator_fwhm_at_k: widths[1],
            band_fwhm,
        },
        Artifact {
            name: format!("contrast_eps_{eps:e}.csv"),
            body,
        },
    ))
}

/// Broadband super-resolution contrast.
pub fn criterion_8() -> Outcome {
    timed(|| {
        let title = "broadband focal-spot contrast";
        let mut r = CriterionReport::new("8", title);
        let target = 2.0 * 0.75f64.sqrt();
        let mut ws = Vec::new();
        let mut arts = Vec::new();
        for eps in [1e-2, 2.5e-3] {
            match contrast_widths(eps) {
                Ok((w, a)) => {
                    r.put(format!("resonator_fwhm_eps_{eps:e}"), w.resonator_fwhm);
                    r.put(
                        format!("resonator_fwhm_at_k_eps_{eps:e}"),
                        w.resonator_fwhm_at_k,
                    );
                    r.put(format!("band_fwhm_eps_{eps:e}"), w.band_fwhm);
                    let rel = (w.resonator_fwhm - target).abs() / target;
                    r.require(
                        rel <= 0.03,
                        format!("resonator FWHM {:.4} at eps {eps:e}", w.resonator_fwhm),
                    );
                    ws.push(w);
                    arts.push(a);
                }
                Err(e) => return (CriterionReport::fail("8", title, e), arts),
            }
        }
        let drift = (ws[0].resonator_fwhm - ws[1].resonator_fwhm).abs() / ws[0].resonator_fwhm;
        let band_ratio = ws[1].band_fwhm / ws[0].band_fwhm;
        let expected = (ws[0].epsilon / ws[1].epsilon).sqrt();
        let contrast =
            (ws[1].resonator_fwhm / ws[1].band_fwhm) / (ws[0].resonator_fwhm / ws[0].band_fwhm);
        r.put("resonator_fwhm_drift", drift);
        r.put("band_fwhm_ratio", band_ratio);
        r.put("contrast_ratio_of_ratios", 1.0 / contrast);
        r.require(drift <= 0.1, "resonator FWHM depends on eps");
        r.require(
            (band_ratio / expected - 1.0).abs() <= 0.2,
            "band FWHM does not scale as eps^-1/2",
        );
        (r, arts)
    })
}

/// Field points for the hierarchy check: all within distance 1 of the
/// resonator at the origin.
pub fn hierarchy_points() -> Vec<[f64; 3]> {
    vec![
        [0.0, 0.0, 0.3],
        [0.5, 0.0, 0.5],
        [0.0, 0.7, 0.7],
        [-0.6, -0.3, 0.4],
    ]
}

/// `|I3|` dominates `|I2|` and `|I4|` near a resonator.
pub fn criterion_9(seed: u64) -> Outcome {
    timed(|| {
        let title = "imaging hierarchy |I3| >> |I2|, |I4|";
        let mut r = CriterionReport::new("9", title);
        let eps = 2.5e-3;
        let run = || -> Result<Vec<crate::imaging::ImagingBreakdown>, String> {
            let sys = build_system(&SystemConfig::single(eps)).map_err(|e| e.to_string())?;
            let spec = interaction_matrices(&sys);
            let res = resonances_asymptotic(&sys, &spec).map_err(|e| e.to_string())?;
            let sig = default_signal(eps);
            let model = GreenModel::robust(&sys, seed);
            let x0 = FieldPoint::new([0.0, 0.0, 0.2], &sys).map_err(|e| e.to_string())?;
            let opts = ImagingOptions::default();
            hierarchy_points()
                .iter()
                .map(|p| {
                    let x = FieldPoint::new(*p, &sys).map_err(|e| e.to_string())?;
                    imaging_functional(x, x0, &sig, &sys, &spec, &res, &model, &opts)
                        .map_err(|e| e.to_string())
                })
                .collect()
        };
        let start = Instant::now();
        let rows = match run() {
            Ok(v) => v,
            Err(e) => return (CriterionReport::fail("9", title, e), vec![]),
        };
        let secs = start.elapsed().as_secs_f64();
        let need = eps.powf(-0.25);
        let (mut min2, mut min4) = (f64::INFINITY, f64::INFINITY);
        for b in &rows {
            min2 = min2.min((b.i3 / b.i2).abs());
            min4 = min4.min((b.i3 / b.i4).abs());
        }
        r.put("required_factor", need);
        r.put("min_i3_over_i2", min2);
        r.put("min_i3_over_i4", min4);
        r.require(min2 >= need, "I2 not dominated");
        r.require(min4 >= need, "I4 not dominated");
        r.require(secs <= 60.0, "scan slower than 60 s");
        let body = breakdown_csv(&rows, None);
        (
            r,
            vec![Artifact {
                name: "hierarchy.csv".into(),
                body,
            }],
        )
    })
}

/// CSV of imaging breakdowns, optionally with the two-term prediction.
pub fn breakdown_csv(
    rows: &[crate::imaging::ImagingBreakdown],
    prediction: Option<&[f64]>,
) -> String {
    let mut s = String::from("x1,x2,x3,i1,i2,i3,i4,i5,total,i1_band,theorem28_prediction\n");
    for (i, b) in rows.iter().enumerate() {
        let p = prediction.map(|p| fmt_f64(p[i])).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(b.x[0]),
            fmt_f64(b.x[1]),
            fmt_f64(b.x[2]),
            fmt_f64(b.i1),
            fmt_f64(b.i2),
            fmt_f64(b.i3),
            fmt_f64(b.i4),
            fmt_f64(b.i5),
            fmt_f64(b.total),
            fmt_f64(b.i1_band),
            p
        );
    }
    s
}

/// Signal-lemma scaling of `∫|s|` and `max |s'|`.
pub fn criterion_10() -> Outcome {
    timed(|| {
        let mut r = CriterionReport::new("10", "signal lemma scalings");
        let sys = build_system(&SystemConfig::single(1e-2)).expect("default system");
        let k_hi = 50.0 * sys.k1();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut csv =
            String::from("epsilon,abs_integral,max_slope,abs_integral_scaled,max_slope_scaled\n");
        for eps in [1e-2, 1e-3, 1e-4] {
            let sig = default_signal(eps);
            let sb = signal_bounds(&sig, 0.0, k_hi, 4000);
            let (x, y) = (
                sb.abs_integral / eps.powf(0.25),
                sb.max_slope * eps.powf(0.75),
            );
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                fmt_f64(eps),
                fmt_f64(sb.abs_integral),
                fmt_f64(sb.max_slope),
                fmt_f64(x),
                fmt_f64(y)
            );
            r.put(format!("abs_integral_scaled_{eps:e}"), x);
            r.put(format!("max_slope_scaled_{eps:e}"), y);
            a.push(x);
            b.push(y);
        }
        let spread = |v: &[f64]| {
            v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        r.put("abs_integral_spread", spread(&a));
        r.put("max_slope_spread", spread(&b));
        r.require(spread(&a) <= 2.0, "int |s| / eps^1/4 not stable");
        r.require(spread(&b) <= 2.0, "max |s'| eps^3/4 not stable");
        (
            r,
            vec![Artifact {
                name: "signal_bounds.csv".into(),
                body: csv,
            }],
        )
    })
}

/// Every check except determinism, in order.
pub fn run_all(seed: u64) -> Vec<Outcome> {
    let mut out = vec![
        criterion_1(DEFAULT_RESOLUTION),
        criterion_2(DEFAULT_RESOLUTION),
    ];
    for m in 1..=3 {
        out.push(criterion_3(m, seed));
    }
    out.push(criterion_4(seed));
    out.push(criterion_5(3.0));
    out.push(criterion_6(seed));
    out.push(criterion_7());
    out.push(criterion_8());
    out.push(criterion_9(seed));
    out.push(criterion_10());
    out
}

/// Determinism: byte-identical artifact bodies from two runs.
pub fn criterion_11(first: &[Artifact], second: &[Artifact]) -> CriterionReport {
    let mut r = CriterionReport::new("11", "deterministic CSV output");
    let differing: Vec<&str> = first
        .iter()
        .zip(second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.name.as_str())
        .collect();
    r.put("artifacts", first.len() as f64);
    r.put("differing", differing.len() as f64);
    r.require(first.len() == second.len(), "different artifact sets");
    r.require(
        differing.is_empty(),
        format!("differs: {}", differing.join(", ")),
    );
    r
}

/// Default system for the single-resonator checks.
pub fn single_system(eps: f64) -> ResonatorSystem {
    build_system(&SystemConfig::single(eps)).expect("default system")
}
