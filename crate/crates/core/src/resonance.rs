//! Quasi-static resonances: closed-form asymptotics, characteristic vectors
//! and a numeric oracle built from the truncated characteristic matrix.
//!
//! Branch 1 has positive real part, branch 2 negative:
//!
//! ```text
//! k_{j,1} =  tau1 eps^{1/2} + tau3_j eps^{3/2} + tau4_j eps^2
//! k_{j,2} = -tau1 eps^{1/2} - tau3_j eps^{3/2} + tau4_j eps^2
//! ```
//!
//! The oracle solves `k v = ± s (I - eps c/2 (alpha0 I + T) - eps c/2 k S) v`
//! with `s = sqrt(eps c / |D|)`; being affine in `k` this is the generalized
//! eigenproblem `k (I ± s eps c/2 S) v = ± s (I - eps c/2 (alpha0 I + T)) v`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::output::fmt_f64;
use crate::system::{ResonatorSystem, SpectralData};

#[derive(Debug, Error, PartialEq)]
pub enum ResonanceError {
    #[error("resonance {k} of mode {mode}, branch {branch} lies outside the window |k| <= k1/2 = {half_k1}")]
    OutsideWindow {
        k: Complex64,
        mode: usize,
        branch: u8,
        half_k1: f64,
    },
    #[error("eigenvalues {i} and {j} of T are degenerate (gap {gap:e}); characteristic vectors undefined")]
    Degenerate { i: usize, j: usize, gap: f64 },
    #[error("oracle pencil is near-singular (epsilon too large): {0}")]
    SingularPencil(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauCoefficients {
    pub tau1: f64,
    pub tau3: f64,
    #[serde(serialize_with = "ser_complex")]
    pub tau4: Complex64,
}

pub(crate) fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    /// 1 (positive real part) or 2 (negative).
    pub branch: u8,
    /// Mode index, 1-based (`j` in `1..=M`).
    pub mode: usize,
    pub tau1: f64,
    pub tau3: f64,
    #[serde(serialize_with = "ser_complex")]
    pub tau4: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicVector {
    /// 1-based.
    pub mode: usize,
    pub branch: u8,
    pub vector: DVector<Complex64>,
}

/// `(tau1, tau3_j, tau4_j)` for every mode `j` (in ascending-`beta` order).
pub fn tau_coefficients(system: &ResonatorSystem, spec: &SpectralData) -> Vec<TauCoefficients> {
    let c = system.capacity;
    let vol = system.cavity_volume();
    let tau1 = system.tau1();
    (0..spec.m())
        .map(|j| TauCoefficients {
            tau1,
            tau3: -0.5 * (system.alpha0 + spec.betas[j]) * tau1 * c,
            tau4: -0.5 * (c * c / vol) * spec.ysy(j, system),
        })
        .collect()
}

/// The two branch values for one mode at scale `eps`.
pub fn branch_values(t: &TauCoefficients, eps: f64) -> (Complex64, Complex64) {
    let se = eps.sqrt();
    let real = t.tau1 * se + t.tau3 * eps * se;
    let corr = t.tau4 * eps * eps;
    (
        Complex64::new(real, 0.0) + corr,
        Complex64::new(-real, 0.0) + corr,
    )
}

/// All `2M` asymptotic resonances, ordered mode by mode, branch 1 first.
pub fn resonances_asymptotic(
    system: &ResonatorSystem,
    spec: &SpectralData,
) -> Result<Vec<Resonance>, ResonanceError> {
    let half_k1 = 0.5 * system.k1();
    let mut out = Vec::with_capacity(2 * spec.m());
    for (j, t) in tau_coefficients(system, spec).iter().enumerate() {
        let (k1, k2) = branch_values(t, system.epsilon);
        for (branch, value) in [(1u8, k1), (2u8, k2)] {
            if !window_check(value, system) {
                return Err(ResonanceError::OutsideWindow {
                    k: value,
                    mode: j + 1,
                    branch,
                    half_k1,
                });
            }
            out.push(Resonance {
                value,
                branch,
                mode: j + 1,
                tau1: t.tau1,
                tau3: t.tau3,
                tau4: t.tau4,
            });
        }
    }
    Ok(out)
}

fn check_gaps(spec: &SpectralData) -> Result<(), ResonanceError> {
    for i in 0..spec.m() {
        for j in i + 1..spec.m() {
            let gap = (spec.betas[j] - spec.betas[i]).abs();
            if gap < spec.gap_threshold || gap == 0.0 {
                return Err(ResonanceError::Degenerate {
                    i: i + 1,
                    j: j + 1,
                    gap,
                });
            }
        }
    }
    Ok(())
}

/// First-order characteristic vectors
/// `Y_j ± sqrt(eps) sum_{i != j} tau1 / (beta_j - beta_i) Y_i (Y_i^T S Y_j)`.
pub fn characteristic_vectors(
    system: &ResonatorSystem,
    spec: &SpectralData,
) -> Result<Vec<CharacteristicVector>, ResonanceError> {
    check_gaps(spec)?;
    let m = spec.m();
    let tau1 = system.tau1();
    let se = system.epsilon.sqrt();
    let mut out = Vec::with_capacity(2 * m);
    for j in 0..m {
        let base = spec.mode(j).map(|v| Complex64::new(v, 0.0));
        let mut corr = DVector::<Complex64>::zeros(m);
        for i in (0..m).filter(|&i| i != j) {
            let coeff = spec.ysy_pair(i, j) * (tau1 / (spec.betas[j] - spec.betas[i]));
            corr += spec.mode(i).map(|v| Complex64::new(v, 0.0)) * coeff;
        }
        out.push(CharacteristicVector {
            mode: j + 1,
            branch: 1,
            vector: &base + &corr * Complex64::new(se, 0.0),
        });
        out.push(CharacteristicVector {
            mode: j + 1,
            branch: 2,
            vector: &base - &corr * Complex64::new(se, 0.0),
        });
    }
    Ok(out)
}

/// One oracle solution: eigenvalue `k` of the `sign` pencil with its null
/// vector (unit 2-norm).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRoot {
    pub k: Complex64,
    /// +1 or -1.
    pub sign: i8,
    pub vector: DVector<Complex64>,
}

fn pencil(
    system: &ResonatorSystem,
    spec: &SpectralData,
    sign: f64,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let m = spec.m();
    let eps = system.epsilon;
    let c = system.capacity;
    let s = (eps * c / system.cavity_volume()).sqrt();
    let half = 0.5 * eps * c;
    let id = DMatrix::<Complex64>::identity(m, m);
    let static_part = DMatrix::from_fn(m, m, |i, j| {
        let d = if i == j {
            1.0 - half * system.alpha0
        } else {
            0.0
        };
        Complex64::new(d - half * spec.t[(i, j)], 0.0)
    });
    let a = static_part * Complex64::new(sign * s, 0.0);
    let b = id + &spec.s * Complex64::new(sign * s * half, 0.0);
    (a, b)
}

/// Solves both sign pencils; returns `2M` roots with null vectors.
pub fn oracle_solutions(
    system: &ResonatorSystem,
    spec: &SpectralData,
) -> Result<Vec<OracleRoot>, ResonanceError> {
    let mut out = Vec::with_capacity(2 * spec.m());
    for sign in [1.0, -1.0] {
        let (a, b) = pencil(system, spec, sign);
        let lu = b.clone().lu();
        let mat = lu
            .solve(&a)
            .ok_or_else(|| ResonanceError::SingularPencil("B is singular".into()))?;
        if mat.iter().any(|z| !z.is_finite()) {
            return Err(ResonanceError::SingularPencil("non-finite B^-1 A".into()));
        }
        let schur = Schur::try_new(mat, f64::EPSILON, 10_000).ok_or_else(|| {
            ResonanceError::SingularPencil("Schur iteration did not converge".into())
        })?;
        let ks = schur
            .eigenvalues()
            .ok_or_else(|| ResonanceError::SingularPencil("eigenvalues unavailable".into()))?;
        let mut ks: Vec<Complex64> = ks.iter().copied().collect();
        ks.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        for k in ks {
            let residual = &a - &b * k;
            let svd = SVD::new(residual, false, true);
            let vt = svd
                .v_t
                .ok_or_else(|| ResonanceError::SingularPencil("SVD failed".into()))?;
            let (idx, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .expect("non-empty");
            let v: DVector<Complex64> = vt.row(idx).adjoint();
            out.push(OracleRoot {
                k,
                sign: sign as i8,
                vector: v,
            });
        }
    }
    Ok(out)
}

/// All `2M` oracle roots.
pub fn resonances_oracle(
    system: &ResonatorSystem,
    spec: &SpectralData,
) -> Result<Vec<Complex64>, ResonanceError> {
    Ok(oracle_solutions(system, spec)?
        .into_iter()
        .map(|r| r.k)
        .collect())
}

/// `|k| <= k1 / 2`.
pub fn window_check(k: Complex64, system: &ResonatorSystem) -> bool {
    k.norm() <= 0.5 * system.k1()
}

/// Rounding allowance for passivity checks on computed roots.
pub fn passive(k: Complex64) -> bool {
    k.im <= 64.0 * f64::EPSILON * k.norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pairing {
    pub asym: usize,
    pub oracle: usize,
    pub gap: f64,
    /// The match was not mutually nearest.
    pub ambiguous: bool,
}

/// Greedy global nearest-neighbour matching of two root lists.
pub fn pair_roots(asym: &[Complex64], oracle: &[Complex64]) -> Vec<Pairing> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in asym.iter().enumerate() {
        for (j, o) in oracle.iter().enumerate() {
            cand.push(((a - o).norm(), i, j));
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; asym.len()];
    let mut used_o = vec![false; oracle.len()];
    let mut out = Vec::new();
    for (gap, i, j) in cand {
        if used_a[i] || used_o[j] {
            continue;
        }
        used_a[i] = true;
        used_o[j] = true;
        let nearest_o = (0..oracle.len())
            .min_by(|&p, &q| {
                (asym[i] - oracle[p])
                    .norm()
                    .total_cmp(&(asym[i] - oracle[q]).norm())
            })
            .unwrap_or(j);
        let nearest_a = (0..asym.len())
            .min_by(|&p, &q| {
                (asym[p] - oracle[j])
                    .norm()
                    .total_cmp(&(asym[q] - oracle[j]).norm())
            })
            .unwrap_or(i);
        out.push(Pairing {
            asym: i,
            oracle: j,
            gap,
            ambiguous: nearest_o != j || nearest_a != i,
        });
    }
    out.sort_by_key(|p| p.asym);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceRow {
    pub j: usize,
    pub branch: u8,
    pub re_k: f64,
    pub im_k: f64,
    pub re_k_oracle: f64,
    pub im_k_oracle: f64,
    pub gap: f64,
    pub ambiguous: bool,
}

/// Asymptotic resonances paired with oracle roots.
pub fn resonance_table(
    system: &ResonatorSystem,
    spec: &SpectralData,
) -> Result<Vec<ResonanceRow>, ResonanceError> {
    let asym = resonances_asymptotic(system, spec)?;
    let oracle = resonances_oracle(system, spec)?;
    let values: Vec<Complex64> = asym.iter().map(|r| r.value).collect();
    Ok(pair_roots(&values, &oracle)
        .into_iter()
        .map(|p| {
            let r = &asym[p.asym];
            let o = oracle[p.oracle];
            ResonanceRow {
                j: r.mode,
                branch: r.branch,
                re_k: r.value.re,
                im_k: r.value.im,
                re_k_oracle: o.re,
                im_k_oracle: o.im,
                gap: p.gap,
                ambiguous: p.ambiguous,
            }
        })
        .collect())
}

/// CSV with columns `j,branch,re_k,im_k,re_k_oracle,im_k_oracle,gap`.
pub fn resonance_csv(rows: &[ResonanceRow]) -> String {
    let mut s = String::from("j,branch,re_k,im_k,re_k_oracle,im_k_oracle,gap\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.j,
            r.branch,
            fmt_f64(r.re_k),
            fmt_f64(r.im_k),
            fmt_f64(r.re_k_oracle),
            fmt_f64(r.im_k_oracle),
            fmt_f64(r.gap)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{build_system, interaction_matrices, SystemConfig};

    #[test]
    fn pairing_is_mutual_for_separated_roots() {
        let a = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let o = [Complex64::new(-1.01, 0.0), Complex64::new(0.99, 0.0)];
        let p = pair_roots(&a, &o);
        assert_eq!((p[0].oracle, p[1].oracle), (1, 0));
        assert!(p.iter().all(|q| !q.ambiguous));
    }

    #[test]
    fn oracle_vectors_are_null_vectors() {
        let sys = build_system(&SystemConfig::with_centers(
            1e-2,
            &[[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]],
        ))
        .unwrap();
        let spec = interaction_matrices(&sys);
        for r in oracle_solutions(&sys, &spec).unwrap() {
            let (a, b) = pencil(&sys, &spec, r.sign as f64);
            assert!(((a - b * r.k) * &r.vector).norm() < 1e-13);
        }
    }
}
