//! Gauss–Legendre rules and a globally adaptive Gauss–Kronrod (21-point)
//! integrator for scalar and vector-valued integrands.
//!
//! The adaptive driver accepts forced breakpoints so callers can pin panel
//! edges around narrow features (Lorentzian peaks, kinks) that a coarse
//! initial sampling would otherwise step over.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self {
            nodes: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|w| 0.5 * w).collect(),
        }
    }

    /// Gauss rule composed with the cubic smoothstep `u -> 3u^2 - 2u^3`,
    /// whose vanishing end derivatives absorb square-root and `x log x`
    /// endpoint behaviour.
    pub fn smoothstep(n: usize) -> Self {
        let base = Self::gauss(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (u, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(u * u * (3.0 - 2.0 * u));
            weights.push(w * 6.0 * u * (1.0 - u));
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

// Published 30-digit tables, kept verbatim.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_738,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights, paired with XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Number of integrand evaluations per Kronrod panel.
pub const KRONROD_POINTS: usize = 21;

/// Abscissae of the 21-point Kronrod rule on `[a, b]`, in evaluation order.
pub fn kronrod_abscissae(a: f64, b: f64) -> [f64; KRONROD_POINTS] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [0.0; KRONROD_POINTS];
    for j in 0..10 {
        out[2 * j] = c - h * XGK[j];
        out[2 * j + 1] = c + h * XGK[j];
    }
    out[20] = c;
    out
}

/// Applies the Gauss–Kronrod pair to pre-evaluated samples (ordered as in
/// [`kronrod_abscissae`]); returns `(kronrod, |kronrod - gauss|)`.
fn kronrod_combine(samples: &[f64; KRONROD_POINTS], half_width: f64) -> (f64, f64) {
    let mut k = WGK[10] * samples[20];
    let mut g = 0.0;
    for j in 0..10 {
        let pair = samples[2 * j] + samples[2 * j + 1];
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * half_width, ((k - g) * half_width).abs())
}

/// Local (recursive-bisection) adaptive 21-point Gauss–Kronrod for cheap
/// scalar integrands inside hot loops; no heap allocation.
pub fn gk21_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let xs = kronrod_abscissae(a, b);
    let mut s = [0.0; KRONROD_POINTS];
    for (i, x) in xs.iter().enumerate() {
        s[i] = f(*x);
    }
    let (k, err) = kronrod_combine(&s, 0.5 * (b - a));
    if err <= tol || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    gk21_adaptive(f, a, m, 0.5 * tol, depth - 1) + gk21_adaptive(f, m, b, 0.5 * tol, depth - 1)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_panels: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureOutcome {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub panels: usize,
    pub converged: bool,
    /// Widest final panel containing each requested probe point.
    pub probe_widths: Vec<f64>,
}

impl QuadratureOutcome {
    pub fn value(&self) -> f64 {
        self.values[0]
    }

    pub fn error(&self) -> f64 {
        self.errors[0]
    }
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    priority: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive 21-point Gauss–Kronrod integration of a vector-valued
/// integrand `f(x, out)` over `[a, b]` with forced interior breakpoints.
///
/// Convergence requires every component to satisfy
/// `err <= max(abs_tol, rel_tol * |value|)`.
pub fn integrate_vector<F>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: AdaptiveOptions,
) -> QuadratureOutcome
where
    F: FnMut(f64, &mut [f64]),
{
    integrate_vector_probed(&mut f, dim, a, b, breaks, &[], opts)
}

/// As [`integrate_vector`], additionally reporting the final width of the
/// panel that contains each probe point.
pub fn integrate_vector_probed<F>(
    f: &mut F,
    dim: usize,
    a: f64,
    b: f64,
    breaks: &[f64],
    probes: &[f64],
    opts: AdaptiveOptions,
) -> QuadratureOutcome
where
    F: FnMut(f64, &mut [f64]),
{
    let mut edges: Vec<f64> = vec![a, b];
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    edges.extend(breaks.iter().copied().filter(|x| *x > lo && *x < hi));
    edges.sort_by(|x, y| x.total_cmp(y));
    edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    if a > b {
        edges.reverse();
    }

    let mut scratch = vec![0.0; dim];
    let mut samples = vec![[0.0; KRONROD_POINTS]; dim];
    let mut eval =
        |pa: f64, pb: f64, scratch: &mut [f64], samples: &mut [[f64; KRONROD_POINTS]]| {
            let xs = kronrod_abscissae(pa, pb);
            for (idx, x) in xs.iter().enumerate() {
                f(*x, scratch);
                for c in 0..dim {
                    samples[c][idx] = scratch[c];
                }
            }
            let hw = 0.5 * (pb - pa);
            let mut vals = vec![0.0; dim];
            let mut errs = vec![0.0; dim];
            for c in 0..dim {
                let (v, e) = kronrod_combine(&samples[c], hw);
                vals[c] = v;
                errs[c] = e;
            }
            (vals, errs)
        };

    let mut heap = BinaryHeap::new();
    let mut totals = vec![0.0; dim];
    let mut total_err = vec![0.0; dim];
    for w in edges.windows(2) {
        let (v, e) = eval(w[0], w[1], &mut scratch, &mut samples);
        for c in 0..dim {
            totals[c] += v[c];
            total_err[c] += e[c];
        }
        heap.push(Panel {
            a: w[0],
            b: w[1],
            values: v,
            errors: e,
            priority: 0.0,
        });
    }

    let tolerance = |totals: &[f64], c: usize| opts.abs_tol.max(opts.rel_tol * totals[c].abs());
    let reprioritize = |heap: BinaryHeap<Panel>, totals: &[f64]| -> BinaryHeap<Panel> {
        heap.into_iter()
            .map(|mut p| {
                p.priority = (0..dim)
                    .map(|c| p.errors[c] / tolerance(totals, c))
                    .fold(0.0, f64::max);
                p
            })
            .collect()
    };
    heap = reprioritize(heap, &totals);

    let mut converged = false;
    let mut since_refresh = 0usize;
    loop {
        if (0..dim).all(|c| total_err[c] <= tolerance(&totals, c)) {
            converged = true;
            break;
        }
        if heap.len() >= opts.max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid == worst.a || mid == worst.b {
            heap.push(worst);
            break;
        }
        let (lv, le) = eval(worst.a, mid, &mut scratch, &mut samples);
        let (rv, re) = eval(mid, worst.b, &mut scratch, &mut samples);
        for c in 0..dim {
            totals[c] += lv[c] + rv[c] - worst.values[c];
            total_err[c] += le[c] + re[c] - worst.errors[c];
        }
        for (pa, pb, v, e) in [(worst.a, mid, lv, le), (mid, worst.b, rv, re)] {
            let priority = (0..dim)
                .map(|c| e[c] / tolerance(&totals, c))
                .fold(0.0, f64::max);
            heap.push(Panel {
                a: pa,
                b: pb,
                values: v,
                errors: e,
                priority,
            });
        }
        since_refresh += 1;
        if since_refresh >= 64 {
            // re-sum so cancellation in the running updates cannot stall convergence
            totals.iter_mut().for_each(|t| *t = 0.0);
            total_err.iter_mut().for_each(|t| *t = 0.0);
            for p in heap.iter() {
                for c in 0..dim {
                    totals[c] += p.values[c];
                    total_err[c] += p.errors[c];
                }
            }
            heap = reprioritize(heap, &totals);
            since_refresh = 0;
        }
    }

    // Re-sum in a fixed order so the result does not depend on heap layout.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    for p in &panels {
        for c in 0..dim {
            values[c] += p.values[c];
            errors[c] += p.errors[c];
        }
    }
    let converged = converged || (0..dim).all(|c| errors[c] <= tolerance(&values, c));
    let probe_widths = probes
        .iter()
        .map(|x| {
            panels
                .iter()
                .filter(|p| p.a.min(p.b) <= *x && *x <= p.a.max(p.b))
                .map(|p| (p.b - p.a).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    QuadratureOutcome {
        values,
        errors,
        panels: panels.len(),
        converged,
        probe_widths,
    }
}

/// Scalar convenience wrapper around [`integrate_vector`].
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: AdaptiveOptions,
) -> QuadratureOutcome
where
    F: FnMut(f64) -> f64,
{
    integrate_vector(|x, out| out[0] = f(x), 1, a, b, breaks, opts)
}
