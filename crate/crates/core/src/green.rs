//! Half-space exterior Green function and its resonator perturbation.
//!
//! `G^ex(x, y, k) = e^{ik|x-y|} / (2 pi |x-y|)` and the four constituents
//!
//! ```text
//! g1 = G^ex(x, x0, k)
//! g2 = -eps c sum_j G^ex(z_j, x0, k) G^ex(x, z_j, k)
//! g3 = -sum_j [(k - k_{j,2})^-1 - (k - k_{j,1})^-1] (c eps)^{3/2} |D|^{-1/2} zeta_j
//! g4 = sum_{j,b} C_{j,b} / (k - k_{j,b})      (modelled residual, default 0)
//! ```

use std::f64::consts::TAU;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::resonance::Resonance;
use crate::system::{dist, ResonatorSystem, SpectralData};

/// Distance below which two points are treated as coincident.
pub const COINCIDENCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GreenError {
    #[error("points coincide (|x - y| = {0:e})")]
    Coincident(f64),
    #[error("field point {0:?} is not in the open upper half space")]
    NotExterior([f64; 3]),
    #[error("field point {point:?} lies within epsilon of aperture {aperture}")]
    InsideAperture { point: [f64; 3], aperture: usize },
    #[error("k = {k} is outside the window |k| <= {half_k1}")]
    OutsideWindow { k: f64, half_k1: f64 },
    #[error("mode {mode}: tau3 = 0 (alpha0 + beta = 0); fixed-frequency estimate undefined")]
    DegenerateMode { mode: usize },
    #[error("mode index {0} out of range")]
    BadMode(usize),
}

/// A point of the exterior half space `x3 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldPoint(pub [f64; 3]);

impl FieldPoint {
    pub fn new(x: [f64; 3], system: &ResonatorSystem) -> Result<Self, GreenError> {
        if x[2].is_nan() || x[2] <= 0.0 || x.iter().any(|v| !v.is_finite()) {
            return Err(GreenError::NotExterior(x));
        }
        for (aperture, z) in system.centers.iter().enumerate() {
            if dist(x, *z) <= system.epsilon {
                return Err(GreenError::InsideAperture { point: x, aperture });
            }
        }
        Ok(Self(x))
    }
}

/// `e^{ik|x-y|} / (2 pi |x-y|)`; symmetric in its arguments.
pub fn gex(x: [f64; 3], y: [f64; 3], k: Complex64) -> Result<Complex64, GreenError> {
    let r = dist(x, y);
    if r < COINCIDENCE {
        return Err(GreenError::Coincident(r));
    }
    Ok((Complex64::i() * k * r).exp() / (TAU * r))
}

/// `sin(k r) / (2 pi r)` for real `k`, continuous at `r = 0` (value `k / 2pi`).
pub fn im_gex_real(r: f64, k: f64) -> f64 {
    let u = k * r;
    if u.abs() < 1e-4 {
        k * (1.0 - u * u / 6.0 + u.powi(4) / 120.0) / TAU
    } else {
        u.sin() / (TAU * r)
    }
}

/// The vector `(G^ex(x, z_j, k))_j`.
pub fn green_vector(
    x: [f64; 3],
    k: Complex64,
    system: &ResonatorSystem,
) -> Result<DVector<Complex64>, GreenError> {
    let mut v = DVector::zeros(system.m());
    for (j, z) in system.centers.iter().enumerate() {
        v[j] = gex(x, *z, k)?;
    }
    Ok(v)
}

/// `zeta_j = (G(x)^T Y_j) (Y_j^T G(x0))` for 1-based mode `j`.
pub fn zeta(
    j: usize,
    x: [f64; 3],
    x0: [f64; 3],
    k: Complex64,
    spec: &SpectralData,
    system: &ResonatorSystem,
) -> Result<Complex64, GreenError> {
    if j == 0 || j > spec.m() {
        return Err(GreenError::BadMode(j));
    }
    let gx = green_vector(x, k, system)?;
    let gx0 = green_vector(x0, k, system)?;
    Ok(zeta_from(&gx, &gx0, spec, j - 1))
}

fn zeta_from(
    gx: &DVector<Complex64>,
    gx0: &DVector<Complex64>,
    spec: &SpectralData,
    j: usize,
) -> Complex64 {
    let y = spec.y.column(j);
    let a: Complex64 = gx.iter().zip(y.iter()).map(|(g, v)| g * v).sum();
    let b: Complex64 = gx0.iter().zip(y.iter()).map(|(g, v)| g * v).sum();
    a * b
}

/// Frequency at which `zeta_j` is evaluated inside `g3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaMode {
    /// `zeta_j(x, x0, k)`.
    #[default]
    AtK,
    /// `zeta_j(x, x0, 0)`.
    Frozen,
}

/// One Lorentzian residual term `amplitude / (k - k_{mode,branch})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualTerm {
    /// 1-based.
    pub mode: usize,
    pub branch: u8,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GreenModel {
    pub zeta_mode: ZetaMode,
    pub residual: Vec<ResidualTerm>,
}

impl GreenModel {
    /// Robustness model: `|C_{j,b}| = eps^2` with seeded uniform phases.
    pub fn robust(system: &ResonatorSystem, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mag = system.epsilon * system.epsilon;
        let mut residual = Vec::new();
        for mode in 1..=system.m() {
            for branch in [1u8, 2] {
                let phase: f64 = rng.random_range(0.0..TAU);
                residual.push(ResidualTerm {
                    mode,
                    branch,
                    amplitude: Complex64::from_polar(mag, phase),
                });
            }
        }
        Self {
            zeta_mode: ZetaMode::AtK,
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenParts {
    #[serde(serialize_with = "crate::resonance::ser_complex")]
    pub g1: Complex64,
    #[serde(serialize_with = "crate::resonance::ser_complex")]
    pub g2: Complex64,
    #[serde(serialize_with = "crate::resonance::ser_complex")]
    pub g3: Complex64,
    #[serde(serialize_with = "crate::resonance::ser_complex")]
    pub g4: Complex64,
    #[serde(serialize_with = "crate::resonance::ser_complex")]
    pub total: Complex64,
    /// `(mode, branch)` pairs with `|k - Re k_res| < 10 |Im k_res|`.
    pub near_pole: Vec<(usize, u8)>,
}

/// Relative width `|Im k| / |Re k|` below which a resonance is treated as
/// lying on the real axis (its width is below what the asymptotics resolve).
pub const ZERO_WIDTH: f64 = 1e-10;

/// Pre-computed data for repeated evaluation at fixed `x`, `x0`.
#[derive(Debug, Clone)]
pub struct GreenEvaluator<'a> {
    system: &'a ResonatorSystem,
    spec: &'a SpectralData,
    model: &'a GreenModel,
    x: [f64; 3],
    x0: [f64; 3],
    /// Distances `|x - z_j|`, `|x0 - z_j|`.
    rx: Vec<f64>,
    rx0: Vec<f64>,
    r: f64,
    /// `k_{j,1}, k_{j,2}` per mode (0-based).
    poles: Vec<(Complex64, Complex64)>,
    amp3: f64,
    frozen_zeta: Vec<Complex64>,
    /// `(mode, p)` (0-based mode) for branch-1 poles of zero width at `p > 0`.
    real_poles: Vec<(usize, f64)>,
}

impl<'a> GreenEvaluator<'a> {
    pub fn new(
        x: FieldPoint,
        x0: FieldPoint,
        system: &'a ResonatorSystem,
        spec: &'a SpectralData,
        resonances: &[Resonance],
        model: &'a GreenModel,
    ) -> Result<Self, GreenError> {
        let (x, x0) = (x.0, x0.0);
        let m = system.m();
        let mut poles = vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); m];
        for r in resonances {
            if r.mode == 0 || r.mode > m {
                return Err(GreenError::BadMode(r.mode));
            }
            if r.branch == 1 {
                poles[r.mode - 1].0 = r.value;
            } else {
                poles[r.mode - 1].1 = r.value;
            }
        }
        // Modes with (sum_i Y_ji) = 0 radiate only beyond the computed order;
        // their poles sit on the real axis and are taken as limits from below.
        let mut real_poles = Vec::new();
        for (j, (p1, p2)) in poles.iter_mut().enumerate() {
            for p in [&mut *p1, &mut *p2] {
                if p.im.abs() <= ZERO_WIDTH * p.re.abs() {
                    p.im = 0.0;
                }
            }
            if p1.im == 0.0 && p1.re > 0.0 {
                real_poles.push((j, p1.re));
            }
        }
        for t in &model.residual {
            if t.mode == 0 || t.mode > m {
                return Err(GreenError::BadMode(t.mode));
            }
        }
        let rx: Vec<f64> = system.centers.iter().map(|z| dist(x, *z)).collect();
        let rx0: Vec<f64> = system.centers.iter().map(|z| dist(x0, *z)).collect();
        let zero = Complex64::new(0.0, 0.0);
        let gx = green_vector(x, zero, system)?;
        let gx0 = green_vector(x0, zero, system)?;
        let frozen_zeta = (0..m).map(|j| zeta_from(&gx, &gx0, spec, j)).collect();
        let c = system.capacity;
        let eps = system.epsilon;
        Ok(Self {
            system,
            spec,
            model,
            x,
            x0,
            rx,
            rx0,
            r: dist(x, x0),
            poles,
            amp3: (c * eps).powf(1.5) / system.cavity_volume().sqrt(),
            frozen_zeta,
            real_poles,
        })
    }

    /// Branch-1 poles on the real axis as `(mode, p)`, mode 0-based.
    pub fn real_poles(&self) -> &[(usize, f64)] {
        &self.real_poles
    }

    /// `(c eps)^{3/2} |D|^{-1/2}`, the amplitude of `g3`.
    pub fn resonant_amplitude(&self) -> f64 {
        self.amp3
    }

    /// `zeta` of 0-based mode `j` as used in `g3` at frequency `k`.
    pub fn mode_zeta(&self, j: usize, k: f64) -> Complex64 {
        self.zetas(k)[j]
    }

    fn check_k(&self, k: f64) -> Result<(), GreenError> {
        let half_k1 = 0.5 * self.system.k1();
        if k.abs() > half_k1 {
            return Err(GreenError::OutsideWindow { k, half_k1 });
        }
        Ok(())
    }

    fn gvec(&self, dists: &[f64], k: f64) -> Vec<Complex64> {
        dists
            .iter()
            .map(|r| Complex64::from_polar(1.0 / (TAU * r), k * r))
            .collect()
    }

    fn zetas(&self, k: f64) -> Vec<Complex64> {
        match self.model.zeta_mode {
            ZetaMode::Frozen => self.frozen_zeta.clone(),
            ZetaMode::AtK => {
                let gx = DVector::from_vec(self.gvec(&self.rx, k));
                let gx0 = DVector::from_vec(self.gvec(&self.rx0, k));
                (0..self.spec.m())
                    .map(|j| zeta_from(&gx, &gx0, self.spec, j))
                    .collect()
            }
        }
    }

    /// `(g2, g3, g4)`, which never involve `|x - x0|`.
    fn resonator_parts(&self, k: f64) -> (Complex64, Complex64, Complex64) {
        let eps = self.system.epsilon;
        let c = self.system.capacity;
        let gx = self.gvec(&self.rx, k);
        let gx0 = self.gvec(&self.rx0, k);
        let g2 = -eps * c * gx.iter().zip(&gx0).map(|(a, b)| a * b).sum::<Complex64>();
        let kc = Complex64::new(k, 0.0);
        let zetas = self.zetas(k);
        let mut g3 = Complex64::new(0.0, 0.0);
        for (j, (p1, p2)) in self.poles.iter().enumerate() {
            g3 -= (1.0 / (kc - p2) - 1.0 / (kc - p1)) * self.amp3 * zetas[j];
        }
        let mut g4 = Complex64::new(0.0, 0.0);
        for t in &self.model.residual {
            let (p1, p2) = self.poles[t.mode - 1];
            let p = if t.branch == 1 { p1 } else { p2 };
            g4 += t.amplitude / (kc - p);
        }
        (g2, g3, g4)
    }

    pub fn parts(&self, k: f64) -> Result<GreenParts, GreenError> {
        self.check_k(k)?;
        let g1 = gex(self.x, self.x0, Complex64::new(k, 0.0))?;
        let (g2, g3, g4) = self.resonator_parts(k);
        let mut near_pole = Vec::new();
        for (j, (p1, p2)) in self.poles.iter().enumerate() {
            for (b, p) in [(1u8, p1), (2u8, p2)] {
                if (k - p.re).abs() < 10.0 * p.im.abs() {
                    near_pole.push((j + 1, b));
                }
            }
        }
        Ok(GreenParts {
            g1,
            g2,
            g3,
            g4,
            total: g1 + g2 + g3 + g4,
            near_pole,
        })
    }

    /// Imaginary parts `[Im g1, Im g2, Im g3, Im g4]`, defined also at `x = x0`.
    pub fn im_parts(&self, k: f64) -> [f64; 4] {
        let (g2, g3, g4) = self.resonator_parts(k);
        [im_gex_real(self.r, k), g2.im, g3.im, g4.im]
    }
}

/// Perturbed exterior Green function at real `k` in the window.
pub fn perturbed_green(
    x: FieldPoint,
    x0: FieldPoint,
    k: f64,
    system: &ResonatorSystem,
    spec: &SpectralData,
    resonances: &[Resonance],
    model: &GreenModel,
) -> Result<GreenParts, GreenError> {
    GreenEvaluator::new(x, x0, system, spec, resonances, model)?.parts(k)
}

/// Two-term fixed-frequency estimate of `Im G` at `k = tau1 sqrt(eps)`:
/// `sin(k r)/(2 pi r) + c^{3/2} |D|^{-1/2} sqrt(eps) sum_j Im(tau4_j)/tau3_j^2 zeta_j(x, x0, 0)`.
pub fn im_green_fixed_frequency(
    x: FieldPoint,
    x0: FieldPoint,
    system: &ResonatorSystem,
    spec: &SpectralData,
) -> Result<f64, GreenError> {
    let taus = crate::resonance::tau_coefficients(system, spec);
    let scale = system.tau1() * system.capacity;
    for (j, t) in taus.iter().enumerate() {
        if t.tau3.abs() <= 1e-14 * scale {
            return Err(GreenError::DegenerateMode { mode: j + 1 });
        }
    }
    let eps = system.epsilon;
    let k = system.tau1() * eps.sqrt();
    let zero = Complex64::new(0.0, 0.0);
    let gx = green_vector(x.0, zero, system)?;
    let gx0 = green_vector(x0.0, zero, system)?;
    let c = system.capacity;
    let pref = c.powf(1.5) / system.cavity_volume().sqrt() * eps.sqrt();
    let mut second = 0.0;
    for (j, t) in taus.iter().enumerate() {
        second += t.tau4.im / (t.tau3 * t.tau3) * zeta_from(&gx, &gx0, spec, j).re;
    }
    Ok(im_gex_real(dist(x.0, x0.0), k) + pref * second)
}
