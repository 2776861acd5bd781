//! Closed-form integrals of the Lorentzian `1 / (k - a - b i)` over
//! `[A1, A2]`, plus the leading-order simplifications used in the
//! asymptotic estimates (`paper_approx_*`). Only the weighted form is a
//! genuine small-`|b|` limit of its integral; the other two printed forms are
//! exposed so the discrepancy can be measured.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LorentzianError {
    #[error("half-width b must be nonzero and finite, got {0}")]
    ZeroWidth(f64),
    #[error("centre a = {a} must lie in [A1, A2] = [{a1}, {a2}]")]
    CentreOutside { a: f64, a1: f64, a2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzianSpec {
    pub a1: f64,
    pub a2: f64,
    pub a: f64,
    pub b: f64,
}

impl LorentzianSpec {
    pub fn new(a1: f64, a2: f64, a: f64, b: f64) -> Result<Self, LorentzianError> {
        if b == 0.0 || !b.is_finite() {
            return Err(LorentzianError::ZeroWidth(b));
        }
        Ok(Self { a1, a2, a, b })
    }

    fn centred(&self) -> Result<(), LorentzianError> {
        if self.a1 <= self.a && self.a <= self.a2 {
            Ok(())
        } else {
            Err(LorentzianError::CentreOutside {
                a: self.a,
                a1: self.a1,
                a2: self.a2,
            })
        }
    }
}

/// `∫_{A1}^{A2} dk / (k - a - b i)`.
pub fn complex_lorentzian_integral(s: &LorentzianSpec) -> Complex64 {
    let (u2, u1) = (s.a2 - s.a, s.a1 - s.a);
    let b2 = s.b * s.b;
    let re = 0.5 * ((u2 * u2 + b2) / (u1 * u1 + b2)).ln();
    let im = (u2 / s.b).atan() - (u1 / s.b).atan();
    Complex64::new(re, im)
}

/// `∫ |Im 1/(k - a - b i)| dk = atan((A2-a)/|b|) + atan((a-A1)/|b|)`.
pub fn abs_im_lorentzian_integral(s: &LorentzianSpec) -> f64 {
    let b = s.b.abs();
    ((s.a2 - s.a) / b).atan() + ((s.a - s.a1) / b).atan()
}

/// `∫ |Im 1/(k - a - b i)| |k - a| dk` for `A1 <= a <= A2`:
/// `(|b|/2) [ln(((A2-a)^2 + b^2)/b^2) + ln(((A1-a)^2 + b^2)/b^2)]`.
pub fn weighted_abs_im_lorentzian(s: &LorentzianSpec) -> Result<f64, LorentzianError> {
    s.centred()?;
    let b = s.b.abs();
    let (u2, u1) = ((s.a2 - s.a) / b, (s.a1 - s.a) / b);
    Ok(0.5 * b * (u2.mul_add(u2, 1.0).ln() + u1.mul_add(u1, 1.0).ln()))
}

/// `∫ |k - a| / sqrt((k - a)^2 + b^2) dk` for `A1 <= a <= A2`.
pub fn abs_ratio_integral(s: &LorentzianSpec) -> Result<f64, LorentzianError> {
    s.centred()?;
    let b = s.b.abs();
    let (u2, u1) = (s.a2 - s.a, s.a1 - s.a);
    // sqrt(u^2 + b^2) - |b|, written to avoid cancellation for |u| << |b|.
    let tail = |u: f64| u * u / ((u * u + b * b).sqrt() + b);
    Ok(tail(u2) + tail(u1))
}

/// Leading-order form `|b| (ln|A2-a| + ln|A1-a| - 2 ln|b|)` of
/// [`weighted_abs_im_lorentzian`].
pub fn paper_approx_weighted(s: &LorentzianSpec) -> f64 {
    let b = s.b.abs();
    b * ((s.a2 - s.a).abs().ln() + (s.a1 - s.a).abs().ln() - 2.0 * b.ln())
}

/// Printed form `ln|A2-a| + ln|A1-a| - 2 ln|b|` paired with
/// [`abs_im_lorentzian_integral`]; it does not approximate that integral
/// (whose value tends to `pi`) and is kept only to quantify the mismatch.
pub fn paper_approx_abs_im(s: &LorentzianSpec) -> f64 {
    (s.a2 - s.a).abs().ln() + (s.a1 - s.a).abs().ln() - 2.0 * s.b.abs().ln()
}

/// Printed form `2 (A2 - A1 - 2b)` paired with [`abs_ratio_integral`]; an
/// upper bound of roughly twice the integral, not an approximation.
pub fn paper_approx_abs_ratio(s: &LorentzianSpec) -> f64 {
    2.0 * (s.a2 - s.a1 - 2.0 * s.b)
}
