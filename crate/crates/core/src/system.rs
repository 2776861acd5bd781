//! Resonator geometry, interaction matrices and the frequency window.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};

/// Default upper bound on the aperture scale.
pub const EPS_MAX: f64 = 5e-2;
/// Relative eigenvalue-gap threshold for the distinct-eigenvalue assumption.
pub const GAP_THRESHOLD: f64 = 1e-6;
/// Capacity of the unit disk in the `1/(pi |x-y|)` convention.
pub const DISK_CAPACITY: f64 = 2.0;
/// First positive zero of `J_1'`.
pub const J1P_FIRST_ZERO: f64 = 1.841_183_781_340_659_3;

#[derive(Debug, Error, PartialEq)]
pub enum SystemError {
    #[error(
        "resonators {i} and {j} overlap: centre distance {distance:e} <= 2*epsilon = {limit:e}"
    )]
    Overlap {
        i: usize,
        j: usize,
        distance: f64,
        limit: f64,
    },
    #[error("parameter error: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonatorSystem {
    /// Cylinder height.
    pub h: f64,
    pub epsilon: f64,
    /// Aperture centres `(z1, z2, 0)`.
    pub centers: Vec<[f64; 3]>,
    pub alpha0: f64,
    pub re_alpha1: f64,
    /// Capacity of the unit aperture `Λ` (not of `eps Λ`).
    pub capacity: f64,
    pub eps_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub h: f64,
    pub epsilon: f64,
    pub centers: Vec<[f64; 3]>,
    pub alpha0: f64,
    pub re_alpha1: f64,
    pub capacity: f64,
    pub eps_max: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            h: 1.0,
            epsilon: 1e-2,
            centers: vec![[0.0, 0.0, 0.0]],
            alpha0: 0.0,
            re_alpha1: 0.0,
            capacity: DISK_CAPACITY,
            eps_max: EPS_MAX,
        }
    }
}

impl SystemConfig {
    pub fn single(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn with_centers(epsilon: f64, centers: &[[f64; 2]]) -> Self {
        Self {
            epsilon,
            centers: centers.iter().map(|c| [c[0], c[1], 0.0]).collect(),
            ..Self::default()
        }
    }

    /// Keys: `h`, `epsilon`, `centers`, `alpha0`, `re_alpha1`, `capacity`,
    /// `eps_max`. Only `epsilon` and `centers` are required.
    pub fn from_config(kv: &KeyValues) -> Result<Self, ConfigError> {
        let d = Self::default();
        let centers = kv
            .points("centers", 3)?
            .into_iter()
            .map(|p| [p[0], p[1], p[2]])
            .collect();
        Ok(Self {
            h: kv.f64_or("h", d.h)?,
            epsilon: kv.f64("epsilon")?,
            centers,
            alpha0: kv.f64_or("alpha0", d.alpha0)?,
            re_alpha1: kv.f64_or("re_alpha1", d.re_alpha1)?,
            capacity: kv.f64_or("capacity", d.capacity)?,
            eps_max: kv.f64_or("eps_max", d.eps_max)?,
        })
    }
}

/// Validates a configuration.
pub fn build_system(cfg: &SystemConfig) -> Result<ResonatorSystem, SystemError> {
    let param = |m: String| Err(SystemError::Parameter(m));
    if !(cfg.h.is_finite() && cfg.h > 0.0) {
        return param(format!("cylinder height must be positive, got {}", cfg.h));
    }
    if !(cfg.eps_max.is_finite() && cfg.eps_max > 0.0) {
        return param(format!("eps_max must be positive, got {}", cfg.eps_max));
    }
    if !(cfg.epsilon.is_finite() && cfg.epsilon > 0.0) {
        return param(format!("epsilon must be positive, got {}", cfg.epsilon));
    }
    if cfg.epsilon > cfg.eps_max {
        return param(format!(
            "epsilon = {} exceeds eps_max = {}",
            cfg.epsilon, cfg.eps_max
        ));
    }
    if !(cfg.capacity.is_finite() && cfg.capacity > 0.0) {
        return param(format!("capacity must be positive, got {}", cfg.capacity));
    }
    if !cfg.alpha0.is_finite() || !cfg.re_alpha1.is_finite() {
        return param("alpha0 and re_alpha1 must be finite".into());
    }
    if cfg.centers.is_empty() {
        return param("at least one resonator centre is required".into());
    }
    for (i, c) in cfg.centers.iter().enumerate() {
        if c.iter().any(|v| !v.is_finite()) {
            return param(format!("centre {i} is not finite"));
        }
        if c[2] != 0.0 {
            return param(format!("centre {i} must lie on the plane x3 = 0"));
        }
    }
    let limit = 2.0 * cfg.epsilon;
    for i in 0..cfg.centers.len() {
        for j in i + 1..cfg.centers.len() {
            let distance = dist(cfg.centers[i], cfg.centers[j]);
            if distance <= limit {
                return Err(SystemError::Overlap {
                    i,
                    j,
                    distance,
                    limit,
                });
            }
        }
    }
    Ok(ResonatorSystem {
        h: cfg.h,
        epsilon: cfg.epsilon,
        centers: cfg.centers.clone(),
        alpha0: cfg.alpha0,
        re_alpha1: cfg.re_alpha1,
        capacity: cfg.capacity,
        eps_max: cfg.eps_max,
    })
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl ResonatorSystem {
    pub fn m(&self) -> usize {
        self.centers.len()
    }

    /// `|D| = pi h` for the unit-radius cylinder.
    pub fn cavity_volume(&self) -> f64 {
        PI * self.h
    }

    pub fn alpha1(&self) -> Complex64 {
        Complex64::new(self.re_alpha1, 1.0 / TAU)
    }

    /// `tau_1 = sqrt(c / |D|)`.
    pub fn tau1(&self) -> f64 {
        (self.capacity / self.cavity_volume()).sqrt()
    }

    pub fn k1(&self) -> f64 {
        neumann_k1(self.h)
    }

    /// Same system at a different aperture scale (re-validated).
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, SystemError> {
        build_system(&SystemConfig {
            h: self.h,
            epsilon,
            centers: self.centers.clone(),
            alpha0: self.alpha0,
            re_alpha1: self.re_alpha1,
            capacity: self.capacity,
            eps_max: self.eps_max,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub t: DMatrix<f64>,
    pub s: DMatrix<Complex64>,
    /// Ascending.
    pub betas: Vec<f64>,
    /// Column `j` is `Y_j`, its largest-magnitude entry positive.
    pub y: DMatrix<f64>,
    /// Smallest pairwise eigenvalue gap (infinite for `M = 1`).
    pub min_gap: f64,
    /// Gap threshold applied (absolute).
    pub gap_threshold: f64,
}

impl SpectralData {
    pub fn m(&self) -> usize {
        self.betas.len()
    }

    pub fn mode(&self, j: usize) -> DVector<f64> {
        self.y.column(j).into_owned()
    }

    /// Whether the distinct-eigenvalue assumption fails.
    pub fn is_degenerate(&self) -> bool {
        self.min_gap < self.gap_threshold
    }

    pub fn warnings(&self) -> Vec<String> {
        if self.is_degenerate() {
            vec![format!(
                "eigenvalue gap {:e} below threshold {:e}; resonance expansions unreliable",
                self.min_gap, self.gap_threshold
            )]
        } else {
            Vec::new()
        }
    }

    /// `Y_j^T S Y_j`, using `S = Re(alpha1) I + i/(2 pi) 1 1^T` so the
    /// imaginary part `(sum_i Y_ij)^2 / (2 pi)` is non-negative exactly.
    pub fn ysy(&self, j: usize, system: &ResonatorSystem) -> Complex64 {
        let col = self.y.column(j);
        let sum: f64 = col.iter().sum();
        Complex64::new(system.re_alpha1 * col.norm_squared(), sum * sum / TAU)
    }

    /// `Y_i^T S Y_j` by direct matrix product.
    pub fn ysy_pair(&self, i: usize, j: usize) -> Complex64 {
        let yi = self.y.column(i).map(|v| Complex64::new(v, 0.0));
        let yj = self.y.column(j).map(|v| Complex64::new(v, 0.0));
        (yi.transpose() * &self.s * yj)[(0, 0)]
    }
}

/// `T`, `S` and the eigen-decomposition of `T`.
pub fn interaction_matrices(system: &ResonatorSystem) -> SpectralData {
    interaction_matrices_with(system, GAP_THRESHOLD)
}

pub fn interaction_matrices_with(system: &ResonatorSystem, rel_gap: f64) -> SpectralData {
    let m = system.m();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            1.0 / (TAU * dist(system.centers[i], system.centers[j]))
        }
    });
    let alpha1 = system.alpha1();
    let s = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha1
        } else {
            Complex64::new(0.0, 1.0 / TAU)
        }
    });
    let eig = SymmetricEigen::new(t.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let betas: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut y = DMatrix::zeros(m, m);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        v /= v.norm();
        let amax = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        // First entry within rounding of the maximum decides the sign, so
        // ties (e.g. symmetric pairs) resolve to the leading index.
        let lead = v
            .iter()
            .position(|x| x.abs() >= amax * (1.0 - 1e-10))
            .unwrap_or(0);
        if v[lead] < 0.0 {
            v = -v;
        }
        y.set_column(col, &v);
    }
    let min_gap = betas
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let scale = betas.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    SpectralData {
        t,
        s,
        betas,
        y,
        min_gap,
        gap_threshold: rel_gap * scale,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralJson {
    pub t: Vec<Vec<f64>>,
    pub s_re: Vec<Vec<f64>>,
    pub s_im: Vec<Vec<f64>>,
    pub betas: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub min_gap: f64,
    pub degenerate: bool,
}

impl From<&SpectralData> for SpectralJson {
    fn from(s: &SpectralData) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        Self {
            t: rows(&s.t),
            s_re: rows(&s.s.map(|z| z.re)),
            s_im: rows(&s.s.map(|z| z.im)),
            betas: s.betas.clone(),
            y: rows(&s.y),
            min_gap: if s.min_gap.is_finite() {
                s.min_gap
            } else {
                -1.0
            },
            degenerate: s.is_degenerate(),
        }
    }
}

/// `J_1'(x)` from the power series (accurate for moderate `x`).
fn bessel_j1_prime(x: f64) -> f64 {
    // J1'(x) = sum_m (-1)^m (2m+1) (x/2)^(2m) / (2 m! (m+1)!)
    let q = 0.25 * x * x;
    let mut term = 0.5; // m = 0: 1 / (2 * 0! * 1!)
    let mut sum = term;
    for m in 1..60 {
        let mf = m as f64;
        // ratio of (x/2)^(2m)/(m!(m+1)!) successive terms
        term *= -q / (mf * (mf + 1.0));
        let add = term * (2.0 * mf + 1.0);
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// First positive zero of `J_1'` by bisection on the series.
pub fn j1_prime_first_zero() -> f64 {
    let (mut a, mut b) = (1.0, 3.0);
    let fa = bessel_j1_prime(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if (bessel_j1_prime(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// First nonzero Neumann eigenvalue (as a wavenumber) of the unit-radius
/// cylinder of height `h`: `min(j'_{1,1}, pi / h)`.
pub fn neumann_k1(h: f64) -> f64 {
    j1_prime_first_zero().min(PI / h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_zero_matches_reference_constant() {
        assert!((j1_prime_first_zero() - J1P_FIRST_ZERO).abs() < 1e-14);
    }

    #[test]
    fn ysy_structured_matches_matrix_product() {
        let sys = build_system(&SystemConfig {
            re_alpha1: 0.3,
            ..SystemConfig::with_centers(1e-2, &[[0.0, 0.0], [1.0, 0.2], [-0.4, 0.9]])
        })
        .unwrap();
        let sp = interaction_matrices(&sys);
        for j in 0..3 {
            assert!((sp.ysy(j, &sys) - sp.ysy_pair(j, j)).norm() < 1e-14);
        }
    }
}
