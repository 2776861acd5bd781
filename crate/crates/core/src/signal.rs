//! Root signals `F` on `[0, C1]`, their transform
//! `F^(k) = ∫ F(t) e^{ikt} dt`, and the scaled signal
//! `s(k) = eps^{-1/4} Im(F^(k / sqrt(eps)) e^{ikt})` seen by the imaging functional.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{integrate, AdaptiveOptions};

/// Default quasi-stationary exponent.
pub const DEFAULT_DELTA: f64 = 0.25;
/// Default number of sampling intervals on `[0, C1]`.
pub const DEFAULT_SAMPLES: usize = 2048;
/// H² refinement ratio above which the norm is flagged as divergent.
pub const H2_DIVERGENCE_RATIO: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("support length C1 must be positive and finite, got {0}")]
    BadSupport(f64),
    #[error("need at least 8 sampling intervals, got {0}")]
    TooFewSamples(usize),
    #[error("custom signal does not vanish at the endpoints (F(0) = {start:e}, F(C1) = {end:e})")]
    NotCompact { start: f64, end: f64 },
    #[error("custom signal has non-finite samples")]
    NotFinite,
    #[error("custom signal is identically zero")]
    Zero,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("delta must lie in (0, 1/2), got {0}")]
    BadDelta(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// `exp(-1 / (1 - u^2))`, `u = 2t/C1 - 1`, unit L² norm.
    SmoothBump,
    /// `(1 - cos(2 pi t / C1)) / 2`, unit L² norm.
    RaisedCosine,
    /// Indicator of `[0, C1]`; not admissible as a root signal, kept for
    /// transform checks.
    Rectangle,
    /// User samples on the uniform grid; must vanish at both ends.
    Custom(Vec<f64>),
}

impl SignalKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SmoothBump => "smooth_bump",
            Self::RaisedCosine => "raised_cosine",
            Self::Rectangle => "rectangle",
            Self::Custom(_) => "custom",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "smooth_bump" => Some(Self::SmoothBump),
            "raised_cosine" => Some(Self::RaisedCosine),
            "rectangle" => Some(Self::Rectangle),
            _ => None,
        }
    }
}

/// Sampled root signal together with the scale it is used at.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalSpec {
    pub kind: String,
    /// Samples `F(j C1 / n)`, `j = 0..=n`.
    pub samples: Vec<f64>,
    pub c1: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `(k, F^(k))` on a uniform grid over `[0, min(64, Nyquist)]`.
    #[serde(skip)]
    pub spectrum: Vec<(f64, Complex64)>,
}

fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Builds a root signal on `n` uniform intervals of `[0, c1]`.
pub fn make_root_signal(kind: SignalKind, c1: f64, n: usize) -> Result<SignalSpec, SignalError> {
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(SignalError::BadSupport(c1));
    }
    if n < 8 {
        return Err(SignalError::TooFewSamples(n));
    }
    let h = c1 / n as f64;
    let grid = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { (0..=n).map(|j| f(j as f64 * h)).collect() };
    let samples = match &kind {
        SignalKind::SmoothBump => unit_l2(grid(&|t| bump(2.0 * t / c1 - 1.0)), h),
        SignalKind::RaisedCosine => unit_l2(grid(&|t| 0.5 * (1.0 - (2.0 * PI * t / c1).cos())), h),
        SignalKind::Rectangle => vec![1.0; n + 1],
        SignalKind::Custom(v) => {
            if v.len() != n + 1 {
                return Err(SignalError::TooFewSamples(v.len().saturating_sub(1)));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(SignalError::NotFinite);
            }
            let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if peak == 0.0 {
                return Err(SignalError::Zero);
            }
            let (start, end) = (v[0], v[n]);
            if start.abs() > 1e-12 * peak || end.abs() > 1e-12 * peak {
                return Err(SignalError::NotCompact { start, end });
            }
            v.clone()
        }
    };
    let mut sig = SignalSpec {
        kind: kind.name().to_string(),
        samples,
        c1,
        epsilon: 1.0,
        delta: DEFAULT_DELTA,
        spectrum: Vec::new(),
    };
    let kmax = sig.nyquist().min(64.0);
    sig.spectrum = (0..=1024)
        .map(|i| {
            let k = kmax * i as f64 / 1024.0;
            (k, sig.transform(k))
        })
        .collect();
    Ok(sig)
}

fn unit_l2(mut v: Vec<f64>, h: f64) -> Vec<f64> {
    let norm = (trapezoid(&v, h, |x| x * x)).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn trapezoid(v: &[f64], h: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = v.len() - 1;
    h * (0.5 * (f(v[0]) + f(v[n])) + v[1..n].iter().map(|x| f(*x)).sum::<f64>())
}

/// Trapezoidal transform of uniform samples `f(t0 + j dt)` at each `k`:
/// `∑_j w_j f_j e^{i k t_j}`. Returns the values and, if any `k` exceeds the
/// grid Nyquist frequency `pi / dt`, a warning.
pub fn fourier(samples: &[f64], t0: f64, dt: f64, ks: &[f64]) -> (Vec<Complex64>, Option<String>) {
    let values = ks
        .iter()
        .map(|k| transform_pair(samples, t0, dt, *k).0)
        .collect();
    let nyq = PI / dt;
    let worst = ks.iter().fold(0.0_f64, |m, k| m.max(k.abs()));
    let warning = (worst > nyq).then(|| {
        format!("k = {worst} exceeds the sampling Nyquist frequency {nyq}; values are aliased")
    });
    (values, warning)
}

/// `(∑ w f e^{ikt}, ∑ w (i t) f e^{ikt})`, i.e. the transform and its
/// k-derivative, with the phase advanced by rotation.
fn transform_pair(samples: &[f64], t0: f64, dt: f64, k: f64) -> (Complex64, Complex64) {
    let n = samples.len() - 1;
    let step = Complex64::from_polar(1.0, k * dt);
    let mut ph = Complex64::from_polar(1.0, k * t0);
    let (mut acc, mut acc_t) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for (j, f) in samples.iter().enumerate() {
        if j % 64 == 0 {
            // re-anchor to keep the rotated phase from drifting
            ph = Complex64::from_polar(1.0, k * (t0 + j as f64 * dt));
        }
        let w = if j == 0 || j == n { 0.5 * f } else { *f };
        let t = t0 + j as f64 * dt;
        acc += ph * w;
        acc_t += ph * (w * t);
        ph *= step;
    }
    (acc * dt, Complex64::new(0.0, 1.0) * acc_t * dt)
}

impl SignalSpec {
    pub fn len(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.samples.len() <= 1
    }

    pub fn dt(&self) -> f64 {
        self.c1 / self.len() as f64
    }

    /// Largest unaliased frequency of the root-signal grid.
    pub fn nyquist(&self) -> f64 {
        PI / self.dt()
    }

    pub fn with_scale(mut self, epsilon: f64, delta: f64) -> Result<Self, SignalError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(SignalError::BadEpsilon(epsilon));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(SignalError::BadDelta(delta));
        }
        self.epsilon = epsilon;
        self.delta = delta;
        Ok(self)
    }

    /// `F^(u)`.
    pub fn transform(&self, u: f64) -> Complex64 {
        transform_pair(&self.samples, 0.0, self.dt(), u).0
    }

    /// `(F^(u), dF^/du)`.
    pub fn transform_with_derivative(&self, u: f64) -> (Complex64, Complex64) {
        transform_pair(&self.samples, 0.0, self.dt(), u)
    }

    /// Largest `k` at which `s(k)` is unaliased.
    pub fn k_limit(&self) -> f64 {
        self.nyquist() * self.epsilon.sqrt()
    }

    /// `s(k, t) = eps^{-1/4} Im(F^(k/sqrt(eps)) e^{ikt})`; zero beyond
    /// [`SignalSpec::k_limit`].
    pub fn s(&self, k: f64, t: f64) -> f64 {
        if k.abs() > self.k_limit() {
            return 0.0;
        }
        let se = self.epsilon.sqrt();
        (self.transform(k / se) * Complex64::from_polar(1.0, k * t)).im / se.sqrt()
    }

    /// `ds/dk`.
    pub fn s_prime(&self, k: f64, t: f64) -> f64 {
        if k.abs() > self.k_limit() {
            return 0.0;
        }
        let se = self.epsilon.sqrt();
        let (f, df) = self.transform_with_derivative(k / se);
        let d = (df / se + Complex64::new(0.0, t) * f) * Complex64::from_polar(1.0, k * t);
        d.im / se.sqrt()
    }

    /// `∫ F^2 dt`.
    pub fn l2_norm_sq(&self) -> f64 {
        trapezoid(&self.samples, self.dt(), |x| x * x)
    }

    /// Finite-difference `‖F‖_{H²}` of the zero-extended samples using every
    /// `stride`-th sample.
    pub fn h2_norm_at(&self, stride: usize) -> f64 {
        let h = self.dt() * stride as f64;
        let mut v = vec![0.0, 0.0];
        v.extend(self.samples.iter().step_by(stride).copied());
        v.extend([0.0, 0.0]);
        let mut acc = 0.0;
        for i in 1..v.len() - 1 {
            let d1 = (v[i + 1] - v[i - 1]) / (2.0 * h);
            let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            acc += v[i] * v[i] + d1 * d1 + d2 * d2;
        }
        (acc * h).sqrt()
    }
}

/// Quasi-stationarity diagnostics of a root signal at scale `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiStationaryReport {
    pub epsilon: f64,
    pub delta: f64,
    pub h2_norm: f64,
    /// `‖F‖_{H²}` on the full grid over that on the half grid.
    pub h2_refinement_ratio: f64,
    pub h2_ok: bool,
    /// `∫_{eps^{-delta}}^{Nyquist} |F^(k)| dk`.
    pub tail_integral: f64,
    pub tail_ratio: f64,
    pub tail_ok: bool,
    /// `eps^{-1/4} I5`: high-frequency imaging integral in root-signal units.
    pub high_frequency: Option<f64>,
    pub high_frequency_ratio: Option<f64>,
    pub high_frequency_ok: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiThresholds {
    pub tail_ratio: f64,
    pub high_frequency_ratio: f64,
}

impl Default for QuasiThresholds {
    fn default() -> Self {
        Self {
            tail_ratio: 0.1,
            high_frequency_ratio: 0.1,
        }
    }
}

/// Evaluates the H² bound and the spectral tail condition. The
/// high-frequency imaging integral is attached by the caller (it needs a
/// field point pair); pass `i5 = Some(I5)` to include it.
pub fn quasi_stationary_report(
    sig: &SignalSpec,
    i5: Option<f64>,
    th: QuasiThresholds,
) -> QuasiStationaryReport {
    let eps = sig.epsilon;
    let mut warnings = Vec::new();
    let fine = sig.h2_norm_at(1);
    let coarse = sig.h2_norm_at(2);
    let ratio = fine / coarse;
    let h2_ok = fine.is_finite() && ratio <= H2_DIVERGENCE_RATIO;
    if !h2_ok {
        warnings.push(format!(
            "H2 norm grows under refinement (ratio {ratio:.3}); the signal is not in H2"
        ));
    }
    let lo = eps.powf(-sig.delta);
    let hi = sig.nyquist();
    let tail = if lo >= hi {
        warnings.push(format!(
            "spectrum only resolved up to {hi}, below eps^-delta = {lo}"
        ));
        f64::NAN
    } else {
        // breakpoints every 2pi/C1 follow the oscillation of |F^|
        let period = 2.0 * PI / sig.c1;
        let count = (((hi - lo) / period) as usize).min(4000);
        let breaks: Vec<f64> = (1..count)
            .map(|i| lo + i as f64 * (hi - lo) / count as f64)
            .collect();
        let opts = AdaptiveOptions {
            abs_tol: 1e-16,
            rel_tol: 1e-8,
            max_panels: 40_000,
        };
        let out = integrate(|u| sig.transform(u).norm(), lo, hi, &breaks, opts);
        if !out.converged {
            warnings.push(format!(
                "tail integral not converged (error {:e})",
                out.error()
            ));
        }
        out.value()
    };
    let tail_ratio = tail / eps;
    let (hf, hf_ratio, hf_ok) = match i5 {
        Some(v) => {
            let q = v / eps.powf(0.25);
            let r = q.abs() / eps;
            (Some(q), Some(r), Some(r < th.high_frequency_ratio))
        }
        None => (None, None, None),
    };
    QuasiStationaryReport {
        epsilon: eps,
        delta: sig.delta,
        h2_norm: fine,
        h2_refinement_ratio: ratio,
        h2_ok,
        tail_integral: tail,
        tail_ratio,
        tail_ok: tail_ratio < th.tail_ratio,
        high_frequency: hf,
        high_frequency_ratio: hf_ratio,
        high_frequency_ok: hf_ok,
        warnings,
    }
}

/// Signal-lemma quantities over `[0, k_hi]`: `∫|s| dk` and `max |s'|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalBounds {
    pub epsilon: f64,
    pub abs_integral: f64,
    pub max_slope: f64,
}

pub fn signal_bounds(sig: &SignalSpec, t: f64, k_hi: f64, samples: usize) -> SignalBounds {
    let hi = k_hi.min(sig.k_limit());
    let step = sig.epsilon.sqrt() * 2.0 * PI / sig.c1;
    let count = ((hi / step) as usize).clamp(1, 20_000);
    let breaks: Vec<f64> = (1..count).map(|i| i as f64 * hi / count as f64).collect();
    let opts = AdaptiveOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-9,
        max_panels: 40_000,
    };
    let abs_integral = integrate(|k| sig.s(k, t).abs(), 0.0, hi, &breaks, opts).value();
    let max_slope = (0..=samples)
        .map(|i| sig.s_prime(hi * i as f64 / samples as f64, t).abs())
        .fold(0.0, f64::max);
    SignalBounds {
        epsilon: sig.epsilon,
        abs_integral,
        max_slope,
    }
}
