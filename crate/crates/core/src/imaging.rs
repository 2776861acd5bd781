//! Broadband time-reversal imaging functional
//! `I = ∫_0^∞ Im G_eps(x, x0, k) s(k) dk`, split into the four Green
//! constituents over `[0, k1/2]` plus the free-space high-frequency part
//! `I5` over `[k1/2, K_max]`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::green::{im_gex_real, FieldPoint, GreenError, GreenEvaluator, GreenModel, ZERO_WIDTH};
use crate::quadrature::{integrate, integrate_vector_probed, AdaptiveOptions, KRONROD_POINTS};
use crate::resonance::Resonance;
use crate::signal::SignalSpec;
use crate::system::{dist, ResonatorSystem, SpectralData};

#[derive(Debug, Error, PartialEq)]
pub enum ImagingError {
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(
        "quadrature did not converge on [{a}, {b}]: achieved error {error:e} after {panels} panels"
    )]
    NotConverged {
        a: f64,
        b: f64,
        error: f64,
        panels: usize,
    },
    #[error("Lorentzian at k = {centre} undersampled: panel width {width:e} > {limit:e}")]
    Undersampled { centre: f64, width: f64, limit: f64 },
    #[error("profile maximum at scan index {index} is on the boundary")]
    NoPeak { index: usize },
    #[error("profile needs at least 3 samples with increasing positions")]
    BadProfile,
    #[error("parameter error: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy)]
pub struct ImagingOptions {
    /// Evaluation time `t`.
    pub t: f64,
    /// `K_max = kmax_factor * k1` for `I5`.
    pub kmax_factor: f64,
    pub quad: AdaptiveOptions,
    /// Whether to evaluate `I5` at all.
    pub high_frequency: bool,
}

impl Default for ImagingOptions {
    fn default() -> Self {
        Self {
            t: 0.0,
            kmax_factor: 50.0,
            quad: AdaptiveOptions {
                abs_tol: 1e-15,
                rel_tol: 1e-9,
                max_panels: 20_000,
            },
            high_frequency: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImagingBreakdown {
    pub x: [f64; 3],
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub total: f64,
    /// `I1` restricted to `[0, 2 tau1 sqrt(eps)]`.
    pub i1_band: f64,
    /// Estimated quadrature errors of `I1..I5`.
    pub errors: [f64; 5],
    /// Upper end of the `I5` integral (may be clipped by the signal grid).
    pub k_max: f64,
    pub warnings: Vec<String>,
}

/// Forced breakpoints resolving each Lorentzian `1/(k - k_res)` on
/// `[lo, hi]`: a core of width-`2|Im k|` panels around `Re k` and a
/// geometric grading outwards.
fn lorentzian_breaks(resonances: &[Resonance], lo: f64, hi: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    let mut breaks = Vec::new();
    let mut centres = Vec::new();
    for r in resonances {
        let (a, b) = (r.value.re, r.value.im.abs());
        if !(a > lo && a < hi) || b <= ZERO_WIDTH * a.abs() {
            continue;
        }
        centres.push((a, b));
        for j in -2..=2 {
            breaks.push(a + 2.0 * j as f64 * b);
        }
        let mut w = 8.0 * b;
        while w < hi - lo {
            breaks.push(a - w);
            breaks.push(a + w);
            w *= 2.0;
        }
    }
    (breaks, centres)
}

/// Imaging functional and its five-part split at one field point.
#[allow(clippy::too_many_arguments)]
pub fn imaging_functional(
    x: FieldPoint,
    x0: FieldPoint,
    sig: &SignalSpec,
    system: &ResonatorSystem,
    spec: &SpectralData,
    resonances: &[Resonance],
    model: &GreenModel,
    opts: &ImagingOptions,
) -> Result<ImagingBreakdown, ImagingError> {
    let ev = GreenEvaluator::new(x, x0, system, spec, resonances, model)?;
    let t = opts.t;
    let half = 0.5 * system.k1();
    let band = (2.0 * system.tau1() * system.epsilon.sqrt()).min(half);
    let mut warnings = Vec::new();

    let (mut breaks, centres) = lorentzian_breaks(resonances, 0.0, half);
    breaks.push(band);
    // resolve the signal's oscillation scale sqrt(eps) * 2pi / C1
    let osc = system.epsilon.sqrt() * 2.0 * PI / sig.c1;
    let n_osc = ((half / osc) as usize).min(2000);
    breaks.extend((1..n_osc).map(|i| i as f64 * osc));
    let probes: Vec<f64> = centres.iter().map(|c| c.0).collect();

    // Zero-width poles at p: Im[zeta / (k - p + i0)] = Im zeta PV 1/(k - p)
    // - pi Re zeta delta(k - p). The principal value is integrated with its
    // singular part h(p) / (k - p) subtracted and added back in closed form.
    let amp = ev.resonant_amplitude();
    let real_poles: Vec<(f64, f64, f64)> = ev
        .real_poles()
        .iter()
        .filter(|(_, p)| *p < half)
        .map(|&(j, p)| {
            let z = ev.mode_zeta(j, p) * (amp * sig.s(p, t));
            warnings.push(format!(
                "mode {}: resonance k = {p} lies on the real axis; taken as a limit from below",
                j + 1
            ));
            (p, z.im, z.re)
        })
        .collect();
    breaks.extend(real_poles.iter().map(|r| r.0));

    let mut f = |k: f64, out: &mut [f64]| {
        let s = sig.s(k, t);
        let im = ev.im_parts(k);
        for c in 0..4 {
            out[c] = im[c] * s;
        }
        for (p, h, _) in &real_poles {
            out[2] -= h / (k - p);
        }
        out[4] = if k <= band { im[0] * s } else { 0.0 };
    };
    let low = integrate_vector_probed(&mut f, 5, 0.0, half, &breaks, &probes, opts.quad);
    if !low.converged {
        return Err(ImagingError::NotConverged {
            a: 0.0,
            b: half,
            error: low.errors.iter().fold(0.0, |m, e| m.max(*e)),
            panels: low.panels,
        });
    }
    for ((centre, b), w) in centres.iter().zip(&low.probe_widths) {
        // node spacing of a Kronrod panel is at most ~ width / (points - 1)
        let limit = b / 5.0 * (KRONROD_POINTS - 1) as f64;
        if *w > limit {
            return Err(ImagingError::Undersampled {
                centre: *centre,
                width: *w,
                limit,
            });
        }
    }

    let mut k_max = opts.kmax_factor * system.k1();
    if k_max > sig.k_limit() {
        warnings.push(format!(
            "I5 clipped at k = {} (signal grid Nyquist), requested {}",
            sig.k_limit(),
            k_max
        ));
        k_max = sig.k_limit();
    }
    let r = dist(x.0, x0.0);
    let (i5, e5) = if opts.high_frequency && k_max > half {
        let n = ((k_max - half) / osc) as usize;
        let n = n.clamp(1, 20_000);
        let hb: Vec<f64> = (1..n)
            .map(|i| half + i as f64 * (k_max - half) / n as f64)
            .collect();
        let out = integrate(
            |k| im_gex_real(r, k) * sig.s(k, t),
            half,
            k_max,
            &hb,
            opts.quad,
        );
        if !out.converged {
            warnings.push(format!("I5 quadrature error {:e}", out.error()));
        }
        (out.value(), out.error())
    } else {
        (0.0, 0.0)
    };

    let mut v = low.values.clone();
    for (p, h, re) in &real_poles {
        v[2] += h * ((half - p) / p).ln() - PI * re;
    }
    Ok(ImagingBreakdown {
        x: x.0,
        i1: v[0],
        i2: v[1],
        i3: v[2],
        i4: v[3],
        i5,
        total: v[0] + v[1] + v[2] + v[3] + i5,
        i1_band: v[4],
        errors: [
            low.errors[0],
            low.errors[1],
            low.errors[2],
            low.errors[3],
            e5,
        ],
        k_max,
        warnings,
    })
}

/// Breakdowns along a set of field points (parallel over points).
#[allow(clippy::too_many_arguments)]
pub fn imaging_scan(
    points: &[[f64; 3]],
    x0: FieldPoint,
    sig: &SignalSpec,
    system: &ResonatorSystem,
    spec: &SpectralData,
    resonances: &[Resonance],
    model: &GreenModel,
    opts: &ImagingOptions,
) -> Result<Vec<ImagingBreakdown>, ImagingError> {
    points
        .par_iter()
        .map(|p| {
            let x = FieldPoint::new(*p, system)?;
            imaging_functional(x, x0, sig, system, spec, resonances, model, opts)
        })
        .collect()
}

/// The two-term broadband prediction, with the resonator phase evaluated
/// for both signs `e^{±i tau1 sqrt(eps) t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    /// `∫_0^{2 tau1 sqrt(eps)} sin(k r)/(2 pi r) s(k) dk`.
    pub band: f64,
    pub resonator_plus: f64,
    pub resonator_minus: f64,
}

impl Prediction {
    pub fn total(&self) -> f64 {
        self.band + self.resonator_plus
    }
}

/// `sum_j 1 / (4 pi |x - z_j| |x0 - z_j|)`.
pub fn resonator_profile(x: [f64; 3], x0: [f64; 3], system: &ResonatorSystem) -> f64 {
    system
        .centers
        .iter()
        .map(|z| 1.0 / (4.0 * PI * dist(x, *z) * dist(x0, *z)))
        .sum()
}

pub fn theorem28_prediction(
    x: FieldPoint,
    x0: FieldPoint,
    t: f64,
    sig: &SignalSpec,
    system: &ResonatorSystem,
) -> Prediction {
    let eps = system.epsilon;
    let tau1 = system.tau1();
    let c = system.capacity;
    let r = dist(x.0, x0.0);
    let top = 2.0 * tau1 * eps.sqrt();
    let osc = eps.sqrt() * 2.0 * PI / sig.c1;
    let n = ((top / osc) as usize).clamp(1, 2000);
    let breaks: Vec<f64> = (1..n).map(|i| i as f64 * top / n as f64).collect();
    let band = integrate(
        |k| im_gex_real(r, k) * sig.s(k, t),
        0.0,
        top,
        &breaks,
        AdaptiveOptions::default(),
    )
    .value();
    let pref = c.powf(1.5) / system.cavity_volume().sqrt()
        * eps.powf(1.25)
        * resonator_profile(x.0, x0.0, system);
    let f = sig.transform(tau1);
    let phase = tau1 * eps.sqrt() * t;
    Prediction {
        band,
        resonator_plus: pref * (f * num_complex::Complex64::from_polar(1.0, phase)).im,
        resonator_minus: pref * (f * num_complex::Complex64::from_polar(1.0, -phase)).im,
    }
}

/// Peak location (parabolic refinement) and full width at half maximum
/// (linear interpolation of the crossings) of a sampled 1D profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocalMetrics {
    pub peak: f64,
    pub peak_value: f64,
    pub fwhm: f64,
}

pub fn focal_metrics(positions: &[f64], values: &[f64]) -> Result<FocalMetrics, ImagingError> {
    let n = values.len();
    if n < 3 || positions.len() != n || positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ImagingError::BadProfile);
    }
    let (imax, vmax) =
        values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                if *v > bv {
                    (i, *v)
                } else {
                    (bi, bv)
                }
            });
    if imax == 0 || imax == n - 1 {
        return Err(ImagingError::NoPeak { index: imax });
    }
    // parabola through the three samples around the maximum
    let (x0, x1, x2) = (positions[imax - 1], positions[imax], positions[imax + 1]);
    let (y0, y1, y2) = (values[imax - 1], values[imax], values[imax + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    let (peak, peak_value) = if curv < 0.0 {
        let xp = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
        let xp = xp.clamp(x0, x2);
        let yp = y0 + d01 * (xp - x0) + curv * (xp - x0) * (xp - x1);
        (xp, yp.max(vmax))
    } else {
        (x1, vmax)
    };
    let half = 0.5 * peak_value;
    let cross = |range: &mut dyn Iterator<Item = usize>, step: isize| -> Option<f64> {
        for i in range {
            let j = (i as isize + step) as usize;
            if values[j] < half {
                let (xa, ya, xb, yb) = (positions[i], values[i], positions[j], values[j]);
                return Some(xa + (half - ya) * (xb - xa) / (yb - ya));
            }
        }
        None
    };
    let left = cross(&mut (1..=imax).rev(), -1);
    let right = cross(&mut (imax..n - 1), 1);
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        _ => f64::NAN,
    };
    Ok(FocalMetrics {
        peak,
        peak_value,
        fwhm,
    })
}

/// `phi(x, x0, 0) = -(2/pi) ∫_0^{K} Im G(k) Im f^(k) dk` for an arbitrary
/// Im-Green model `im_g`.
pub fn kernel_t0_with(
    im_g: impl Fn(f64) -> f64,
    sig: &SignalSpec,
    k_max: f64,
    breaks: &[f64],
) -> Result<f64, ImagingError> {
    let hi = k_max.min(sig.k_limit());
    let out = integrate(
        |k| im_g(k) * sig.s(k, 0.0),
        0.0,
        hi,
        breaks,
        AdaptiveOptions::default(),
    );
    if !out.converged {
        return Err(ImagingError::NotConverged {
            a: 0.0,
            b: hi,
            error: out.error(),
            panels: out.panels,
        });
    }
    Ok(-2.0 / PI * out.value())
}

/// Resolution kernel at `t = 0` with the perturbed Green function; equals
/// `-(2/pi)` times the imaging functional at `t = 0`.
#[allow(clippy::too_many_arguments)]
pub fn resolution_kernel_t0(
    x: FieldPoint,
    x0: FieldPoint,
    sig: &SignalSpec,
    system: &ResonatorSystem,
    spec: &SpectralData,
    resonances: &[Resonance],
    model: &GreenModel,
    opts: &ImagingOptions,
) -> Result<f64, ImagingError> {
    let o = ImagingOptions { t: 0.0, ..*opts };
    let b = imaging_functional(x, x0, sig, system, spec, resonances, model, &o)?;
    Ok(-2.0 / PI * b.total)
}

/// Recording-time criterion `T = safety / eps^2`.
pub fn recording_time(epsilon: f64, safety: f64) -> Result<f64, ImagingError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(ImagingError::Parameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(safety.is_finite() && safety >= 1.0) {
        return Err(ImagingError::Parameter(format!(
            "safety factor must be >= 1, got {safety}"
        )));
    }
    Ok(safety / (epsilon * epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabolic_peak_is_exact_for_parabola() {
        let xs: Vec<f64> = (0..21).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - (x - 1.03f64).powi(2)).collect();
        let m = focal_metrics(&xs, &ys).unwrap();
        assert!((m.peak - 1.03).abs() < 1e-12);
        assert!((m.peak_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_maximum_is_rejected() {
        let xs = [0.0, 1.0, 2.0];
        assert_eq!(
            focal_metrics(&xs, &[3.0, 2.0, 1.0]),
            Err(ImagingError::NoPeak { index: 0 })
        );
    }
}
