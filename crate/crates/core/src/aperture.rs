//! Riesz potential on a flat aperture, equilibrium density and capacity.
//!
//! The operator `L[mu](x) = ∫ mu(y) / (pi |x - y|) dy` is discretised by a
//! piecewise-constant Galerkin scheme. With `chi_i` the indicator of panel
//! `P_i`, the matrix entries are
//!
//! ```text
//! G_ij = (1/pi) ∫_{P_i} ∫_{P_j} 1/|x - y| dy dx
//! ```
//!
//! i.e. the *unnormalised* double integral (no division by panel areas). A
//! single disk panel of radius `r` therefore has self-term `16 r^3 / 3`.
//! The equilibrium system is `G mu = w` with `w_i = |P_i|`, and the capacity
//! is `sum_i mu_i w_i`.
//!
//! Near and self interactions use the polar form of the inner integral,
//! `∫_{P_j} 1/|p - y| dy = ∫_0^{2pi} len(p, theta) dtheta`, where `len` is the
//! length of the ray from `p` inside `P_j`; the integrand is bounded, so the
//! weak singularity never reaches a quadrature node.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::output::fmt_f64;
use crate::quadrature::{gk21_adaptive, UnitRule};

#[derive(Debug, Error)]
pub enum ApertureError {
    #[error("aperture mesh has no panels")]
    EmptyMesh,
    #[error("panel {index} is degenerate (area {area:e})")]
    DegeneratePanel { index: usize, area: f64 },
    #[error("assembled Riesz matrix ({size}x{size}) is not positive definite; singular quadrature is inaccurate")]
    NotPositiveDefinite { size: usize },
    #[error("invalid aperture shape: {0}")]
    InvalidShape(String),
    #[error("equilibrium solve is ill-conditioned ({0}); refine the mesh")]
    IllConditioned(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApertureShape {
    UnitDisk,
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Star-shaped (w.r.t. the origin) polygon; vertices in either orientation.
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

impl ApertureShape {
    pub fn name(&self) -> &'static str {
        match self {
            Self::UnitDisk => "unit_disk",
            Self::Ellipse { .. } => "ellipse",
            Self::Polygon { .. } => "polygon",
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Self::UnitDisk => PI,
            Self::Ellipse { a, b } => PI * a * b,
            Self::Polygon { vertices } => polygon_signed_area(vertices).abs(),
        }
    }

    /// Membership of the closed set, with a small relative slack.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let slack = 1e-12;
        match self {
            Self::UnitDisk => p[0].hypot(p[1]) <= 1.0 + slack,
            Self::Ellipse { a, b } => (p[0] / a).hypot(p[1] / b) <= 1.0 + slack,
            Self::Polygon { vertices } => {
                let v = ccw(vertices);
                (0..v.len()).all(|k| {
                    let a = v[k];
                    let b = v[(k + 1) % v.len()];
                    let scale = (b[0] - a[0]).hypot(b[1] - a[1]);
                    cross(sub(b, a), sub(p, a)) >= -slack * scale
                })
            }
        }
    }

    fn validate(&self) -> Result<(), ApertureError> {
        match self {
            Self::UnitDisk => Ok(()),
            Self::Ellipse { a, b } => {
                if a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0 {
                    Ok(())
                } else {
                    Err(ApertureError::InvalidShape(format!(
                        "ellipse semi-axes must be positive, got a={a}, b={b}"
                    )))
                }
            }
            Self::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(ApertureError::InvalidShape(
                        "polygon needs at least 3 vertices".into(),
                    ));
                }
                let v = ccw(vertices);
                for k in 0..v.len() {
                    if cross(v[k], v[(k + 1) % v.len()]) <= 0.0 {
                        return Err(ApertureError::InvalidShape(
                            "polygon must be strictly star-shaped with respect to the origin"
                                .into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }
}

fn polygon_signed_area(v: &[[f64; 2]]) -> f64 {
    0.5 * (0..v.len())
        .map(|k| cross(v[k], v[(k + 1) % v.len()]))
        .sum::<f64>()
}

fn ccw(v: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = v.to_vec();
    if polygon_signed_area(&out) < 0.0 {
        out.reverse();
    }
    out
}

#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// A mesh cell. Sectors live in the stretched polar frame
/// `(sx rho cos phi, sy rho sin phi)`; fan cells are the convex quadrilaterals
/// (triangles when `rho0 = 0`) `rho (va + sigma (vb - va))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Panel {
    Sector {
        r_in: f64,
        r_out: f64,
        theta0: f64,
        theta1: f64,
        sx: f64,
        sy: f64,
    },
    Fan {
        va: [f64; 2],
        vb: [f64; 2],
        rho0: f64,
        rho1: f64,
        sig0: f64,
        sig1: f64,
    },
}

impl Panel {
    pub fn area(&self) -> f64 {
        match *self {
            Panel::Sector {
                r_in,
                r_out,
                theta0,
                theta1,
                sx,
                sy,
            } => 0.5 * sx * sy * (theta1 - theta0) * (r_out * r_out - r_in * r_in),
            Panel::Fan {
                va,
                vb,
                rho0,
                rho1,
                sig0,
                sig1,
            } => 0.5 * cross(va, vb) * (sig1 - sig0) * (rho1 * rho1 - rho0 * rho0),
        }
    }

    pub fn centroid(&self) -> [f64; 2] {
        match *self {
            Panel::Sector {
                r_in,
                r_out,
                theta0,
                theta1,
                sx,
                sy,
            } => {
                let rbar =
                    2.0 / 3.0 * (r_out.powi(3) - r_in.powi(3)) / (r_out * r_out - r_in * r_in);
                let span = theta1 - theta0;
                let cx = (theta1.sin() - theta0.sin()) / span;
                let cy = (theta0.cos() - theta1.cos()) / span;
                [sx * rbar * cx, sy * rbar * cy]
            }
            Panel::Fan {
                va,
                vb,
                rho0,
                rho1,
                sig0,
                sig1,
            } => {
                let rbar = 2.0 / 3.0 * (rho1.powi(3) - rho0.powi(3)) / (rho1 * rho1 - rho0 * rho0);
                let s = 0.5 * (sig0 + sig1);
                [
                    rbar * (va[0] + s * (vb[0] - va[0])),
                    rbar * (va[1] + s * (vb[1] - va[1])),
                ]
            }
        }
    }

    /// Point and Jacobian for reference coordinates `(u, v)` in `[0, 1]^2`.
    #[inline]
    pub fn map(&self, u: f64, v: f64) -> ([f64; 2], f64) {
        match *self {
            Panel::Sector {
                r_in,
                r_out,
                theta0,
                theta1,
                sx,
                sy,
            } => {
                let rho = r_in + u * (r_out - r_in);
                let phi = theta0 + v * (theta1 - theta0);
                let (s, c) = phi.sin_cos();
                (
                    [sx * rho * c, sy * rho * s],
                    sx * sy * rho * (r_out - r_in) * (theta1 - theta0),
                )
            }
            Panel::Fan {
                va,
                vb,
                rho0,
                rho1,
                sig0,
                sig1,
            } => {
                let rho = rho0 + u * (rho1 - rho0);
                let sig = sig0 + v * (sig1 - sig0);
                (
                    [
                        rho * (va[0] + sig * (vb[0] - va[0])),
                        rho * (va[1] + sig * (vb[1] - va[1])),
                    ],
                    rho * cross(va, vb) * (rho1 - rho0) * (sig1 - sig0),
                )
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Panel {
        match *self {
            Panel::Sector {
                r_in,
                r_out,
                theta0,
                theta1,
                sx,
                sy,
            } => Panel::Sector {
                r_in: r_in * s,
                r_out: r_out * s,
                theta0,
                theta1,
                sx,
                sy,
            },
            Panel::Fan {
                va,
                vb,
                rho0,
                rho1,
                sig0,
                sig1,
            } => Panel::Fan {
                va: [va[0] * s, va[1] * s],
                vb: [vb[0] * s, vb[1] * s],
                rho0,
                rho1,
                sig0,
                sig1,
            },
        }
    }

    fn is_full_sector(theta0: f64, theta1: f64) -> bool {
        theta1 - theta0 >= TAU * (1.0 - 1e-14)
    }
}

/// Panel with cached geometry used during assembly.
#[derive(Debug, Clone)]
struct PanelGeom {
    panel: Panel,
    centroid: [f64; 2],
    radius: f64,
    corners: Vec<[f64; 2]>,
    // CCW convex outline, fan cells only.
    outline: Vec<[f64; 2]>,
}

impl PanelGeom {
    fn new(panel: Panel) -> Self {
        let centroid = panel.centroid();
        let mut corners = Vec::new();
        let mut outline = Vec::new();
        match panel {
            Panel::Sector {
                r_in,
                r_out,
                theta0,
                theta1,
                sx,
                sy,
            } => {
                if !Panel::is_full_sector(theta0, theta1) {
                    for r in [r_in, r_out] {
                        if r > 0.0 {
                            for t in [theta0, theta1] {
                                corners.push([sx * r * t.cos(), sy * r * t.sin()]);
                            }
                        } else {
                            corners.push([0.0, 0.0]);
                        }
                    }
                }
            }
            Panel::Fan {
                va,
                vb,
                rho0,
                rho1,
                sig0,
                sig1,
            } => {
                let ea = [
                    va[0] + sig0 * (vb[0] - va[0]),
                    va[1] + sig0 * (vb[1] - va[1]),
                ];
                let eb = [
                    va[0] + sig1 * (vb[0] - va[0]),
                    va[1] + sig1 * (vb[1] - va[1]),
                ];
                let mut pts = vec![[rho0 * ea[0], rho0 * ea[1]], [rho0 * eb[0], rho0 * eb[1]]];
                pts.push([rho1 * eb[0], rho1 * eb[1]]);
                pts.push([rho1 * ea[0], rho1 * ea[1]]);
                if rho0 == 0.0 {
                    pts.remove(1);
                }
                let pts = ccw(&pts);
                corners = pts.clone();
                outline = pts;
            }
        }
        // Bounding radius from a boundary sample.
        let mut radius: f64 = 0.0;
        let n = 8;
        for a in 0..=n {
            for b in 0..=n {
                if a != 0 && a != n && b != 0 && b != n {
                    continue;
                }
                let (p, _) = panel.map(a as f64 / n as f64, b as f64 / n as f64);
                radius = radius.max((p[0] - centroid[0]).hypot(p[1] - centroid[1]));
            }
        }
        Self {
            panel,
            centroid,
            radius,
            corners,
            outline,
        }
    }

    /// Length of `{p + t e : t > 0}` inside the panel.
    #[inline]
    fn chord(&self, p: [f64; 2], e: [f64; 2]) -> f64 {
        match self.panel {
            Panel::Sector {
                r_in,
                r_out,
                theta0,
                theta1,
                sx,
                sy,
            } => {
                let q = [p[0] / sx, p[1] / sy];
                let d = [e[0] / sx, e[1] / sy];
                let full = Panel::is_full_sector(theta0, theta1);
                let mut ts = [0.0f64; 8];
                let mut n = 1;
                let a = dot(d, d);
                let b = dot(q, d);
                let qq = dot(q, q);
                for r in [r_in, r_out] {
                    if r <= 0.0 {
                        continue;
                    }
                    let disc = b * b - a * (qq - r * r);
                    if disc > 0.0 {
                        let s = disc.sqrt();
                        for t in [(-b - s) / a, (-b + s) / a] {
                            if t > 0.0 {
                                ts[n] = t;
                                n += 1;
                            }
                        }
                    }
                }
                if !full {
                    for th in [theta0, theta1] {
                        let (s, c) = th.sin_cos();
                        let nrm = [-s, c];
                        let den = dot(nrm, d);
                        if den != 0.0 {
                            let t = -dot(nrm, q) / den;
                            if t > 0.0 {
                                ts[n] = t;
                                n += 1;
                            }
                        }
                    }
                }
                let ts = &mut ts[..n];
                ts.sort_by(|x, y| x.total_cmp(y));
                let mut total = 0.0;
                for k in 0..n - 1 {
                    let (t0, t1) = (ts[k], ts[k + 1]);
                    if t1 <= t0 {
                        continue;
                    }
                    let tm = 0.5 * (t0 + t1);
                    let m = [q[0] + tm * d[0], q[1] + tm * d[1]];
                    let rho = m[0].hypot(m[1]);
                    if rho < r_in || rho > r_out {
                        continue;
                    }
                    if !full {
                        let ang = (m[1].atan2(m[0]) - theta0).rem_euclid(TAU);
                        if ang > theta1 - theta0 {
                            continue;
                        }
                    }
                    total += t1 - t0;
                }
                total
            }
            Panel::Fan { .. } => {
                let v = &self.outline;
                let mut lo = 0.0f64;
                let mut hi = f64::INFINITY;
                for k in 0..v.len() {
                    let a = v[k];
                    let b = v[(k + 1) % v.len()];
                    let edge = sub(b, a);
                    let nrm = [-edge[1], edge[0]];
                    let num = dot(nrm, sub(p, a));
                    let den = dot(nrm, e);
                    if den == 0.0 {
                        if num < 0.0 {
                            return 0.0;
                        }
                    } else {
                        let t = -num / den;
                        if den > 0.0 {
                            lo = lo.max(t);
                        } else {
                            hi = hi.min(t);
                        }
                    }
                }
                (hi - lo).max(0.0)
            }
        }
    }

    /// Directions from `p` tangent to the panel's circular arcs.
    fn tangent_angles(&self, p: [f64; 2], out: &mut Vec<f64>) {
        if let Panel::Sector {
            r_in,
            r_out,
            sx,
            sy,
            ..
        } = self.panel
        {
            let q = [p[0] / sx, p[1] / sy];
            let dq = q[0].hypot(q[1]);
            for r in [r_in, r_out] {
                if r > 0.0 && dq > r {
                    let base = (-q[1]).atan2(-q[0]);
                    let off = (r / dq).asin();
                    for psi in [base - off, base + off] {
                        let (s, c) = psi.sin_cos();
                        out.push((sy * s).atan2(sx * c));
                    }
                }
            }
        }
    }

    /// `∫_{P} 1/|p - y| dy` by the ray method.
    fn potential(&self, p: [f64; 2], tol: f64) -> f64 {
        let mut br: Vec<f64> = Vec::with_capacity(12);
        let scale = self.radius;
        for c in &self.corners {
            let d = sub(*c, p);
            if d[0].hypot(d[1]) > 1e-13 * scale {
                br.push(d[1].atan2(d[0]));
            }
        }
        self.tangent_angles(p, &mut br);
        br.sort_by(|a, b| a.total_cmp(b));
        br.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        if br.is_empty() {
            br.push(0.0);
        }
        let n = br.len();
        let mut total = 0.0;
        for k in 0..n {
            let a = br[k];
            let b = if k + 1 < n { br[k + 1] } else { br[0] + TAU };
            let span = b - a;
            if span <= 1e-15 {
                continue;
            }
            let pieces = (span / FRAC_PI_4).ceil().max(1.0) as usize;
            let h = span / pieces as f64;
            for m in 0..pieces {
                let lo = a + m as f64 * h;
                // Smoothstep substitution flattens sqrt-type behaviour at
                // tangent directions and the 1/angle growth near edges.
                let g = |u: f64| {
                    let s = u * u * (3.0 - 2.0 * u);
                    let th = lo + h * s;
                    let (si, co) = th.sin_cos();
                    self.chord(p, [co, si]) * h * 6.0 * u * (1.0 - u)
                };
                total += gk21_adaptive(&g, 0.0, 1.0, tol / (n * pieces) as f64, 30);
            }
        }
        total
    }
}

/// Tensor rule for the outer integral over a panel.
/// Full-disk panels are periodic in angle and get a trapezoid rule there.
fn tensor_points(panel: &Panel, rule: &UnitRule) -> Vec<([f64; 2], f64)> {
    let periodic = matches!(*panel, Panel::Sector { theta0, theta1, .. } if Panel::is_full_sector(theta0, theta1));
    let (vn, vw): (Vec<f64>, Vec<f64>) = if periodic {
        let m = 2 * rule.len();
        (
            (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect(),
            vec![1.0 / m as f64; m],
        )
    } else {
        (rule.nodes.clone(), rule.weights.clone())
    };
    let mut out = Vec::with_capacity(rule.len() * vn.len());
    for (u, wu) in rule.nodes.iter().zip(&rule.weights) {
        for (v, wv) in vn.iter().zip(&vw) {
            let (p, j) = panel.map(*u, *v);
            out.push((p, wu * wv * j));
        }
    }
    out
}

/// Rotational structure of a disk-like mesh: panel `k` is ring
/// `ring[k]`, position `slot[k]` out of `counts[ring[k]]` (1 or `order`).
#[derive(Debug, Clone, PartialEq)]
pub struct RingLayout {
    pub order: usize,
    pub ring: Vec<usize>,
    pub slot: Vec<usize>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ApertureMesh {
    pub shape: ApertureShape,
    pub resolution: usize,
    /// Geometric scale: the mesh discretises `scale * Λ`.
    pub scale: f64,
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub panels: Vec<Panel>,
    pub layout: Option<RingLayout>,
}

/// Number of angular sectors per ring for a given radial resolution.
fn sectors_for(resolution: usize) -> usize {
    (4 * resolution.div_ceil(6)).max(8)
}

impl ApertureMesh {
    /// Graded mesh of `shape` with `resolution` radial layers, clustered
    /// quadratically towards the rim (`r_k = sin(pi k / 2n)`).
    pub fn new(shape: ApertureShape, resolution: usize) -> Result<Self, ApertureError> {
        Self::with_rotation(shape, resolution, 0.0)
    }

    /// As [`ApertureMesh::new`] with the angular seams of disk/ellipse meshes
    /// rotated by `angle`. Polygon meshes follow the polygon's own edges.
    pub fn with_rotation(
        shape: ApertureShape,
        resolution: usize,
        angle: f64,
    ) -> Result<Self, ApertureError> {
        shape.validate()?;
        if resolution < 2 {
            return Err(ApertureError::InvalidShape(
                "mesh resolution must be at least 2".into(),
            ));
        }
        let n = resolution;
        let radii: Vec<f64> = (0..=n)
            .map(|k| {
                if k == n {
                    1.0
                } else {
                    (PI * k as f64 / (2.0 * n as f64)).sin()
                }
            })
            .collect();
        let mut panels = Vec::new();
        let mut layout = None;
        match &shape {
            ApertureShape::UnitDisk | ApertureShape::Ellipse { .. } => {
                let (sx, sy) = match shape {
                    ApertureShape::Ellipse { a, b } => (a, b),
                    _ => (1.0, 1.0),
                };
                let order = sectors_for(n);
                let mut ring = vec![0];
                let mut slot = vec![0];
                let mut counts = vec![1];
                panels.push(Panel::Sector {
                    r_in: 0.0,
                    r_out: radii[1],
                    theta0: angle,
                    theta1: angle + TAU,
                    sx,
                    sy,
                });
                for k in 1..n {
                    counts.push(order);
                    for s in 0..order {
                        let t0 = angle + TAU * s as f64 / order as f64;
                        let t1 = angle + TAU * (s + 1) as f64 / order as f64;
                        panels.push(Panel::Sector {
                            r_in: radii[k],
                            r_out: radii[k + 1],
                            theta0: t0,
                            theta1: t1,
                            sx,
                            sy,
                        });
                        ring.push(k);
                        slot.push(s);
                    }
                }
                if sx == sy {
                    layout = Some(RingLayout {
                        order,
                        ring,
                        slot,
                        counts,
                    });
                }
            }
            ApertureShape::Polygon { vertices } => {
                let v = ccw(vertices);
                let perimeter: f64 = (0..v.len())
                    .map(|k| {
                        let d = sub(v[(k + 1) % v.len()], v[k]);
                        d[0].hypot(d[1])
                    })
                    .sum();
                let total = sectors_for(n) as f64;
                for k in 0..v.len() {
                    let va = v[k];
                    let vb = v[(k + 1) % v.len()];
                    let d = sub(vb, va);
                    let m = ((total * d[0].hypot(d[1]) / perimeter).round() as usize).max(1);
                    for layer in 0..n {
                        for s in 0..m {
                            panels.push(Panel::Fan {
                                va,
                                vb,
                                rho0: radii[layer],
                                rho1: radii[layer + 1],
                                sig0: s as f64 / m as f64,
                                sig1: (s + 1) as f64 / m as f64,
                            });
                        }
                    }
                }
            }
        }
        Self::from_panels(shape, resolution, panels, layout)
    }

    /// Mesh from explicit panels (e.g. a single-panel test mesh).
    pub fn from_panels(
        shape: ApertureShape,
        resolution: usize,
        panels: Vec<Panel>,
        layout: Option<RingLayout>,
    ) -> Result<Self, ApertureError> {
        if panels.is_empty() {
            return Err(ApertureError::EmptyMesh);
        }
        let mut nodes = Vec::with_capacity(panels.len());
        let mut weights = Vec::with_capacity(panels.len());
        for (index, p) in panels.iter().enumerate() {
            let area = p.area();
            if !(area.is_finite() && area > 0.0) {
                return Err(ApertureError::DegeneratePanel { index, area });
            }
            nodes.push(p.centroid());
            weights.push(area);
        }
        Ok(Self {
            shape,
            resolution,
            scale: 1.0,
            nodes,
            weights,
            panels,
            layout,
        })
    }

    /// The same mesh mapped onto `epsilon * Λ`.
    pub fn scaled(&self, epsilon: f64) -> Self {
        let panels: Vec<Panel> = self.panels.iter().map(|p| p.scaled(epsilon)).collect();
        Self {
            shape: self.shape.clone(),
            resolution: self.resolution,
            scale: self.scale * epsilon,
            nodes: panels.iter().map(|p| p.centroid()).collect(),
            weights: panels.iter().map(|p| p.area()).collect(),
            panels,
            layout: self.layout.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Mesh resolution giving capacity to about 1e-4 relative on the unit disk.
pub const DEFAULT_RESOLUTION: usize = 48;

const SELF_ORDER: usize = 10;
const NEAR_ORDER: usize = 6;
const MID_ORDER: usize = 4;
const FAR_ORDER: usize = 2;
const NEAR_FACTOR: f64 = 2.0;
const MID_FACTOR: f64 = 8.0;

struct Rules {
    selfr: UnitRule,
    near: UnitRule,
    mid: UnitRule,
    far: UnitRule,
}

impl Rules {
    fn new() -> Self {
        Self {
            selfr: UnitRule::smoothstep(SELF_ORDER),
            near: UnitRule::smoothstep(NEAR_ORDER),
            mid: UnitRule::gauss(MID_ORDER),
            far: UnitRule::gauss(FAR_ORDER),
        }
    }
}

fn pair_entry(gi: &PanelGeom, gj: &PanelGeom, same: bool, rules: &Rules) -> f64 {
    // Integrate over the smaller panel: the larger panel's potential is the
    // smoother of the two on the other's support.
    let (gi, gj) = if gi.radius > gj.radius {
        (gj, gi)
    } else {
        (gi, gj)
    };
    let d = (gi.centroid[0] - gj.centroid[0]).hypot(gi.centroid[1] - gj.centroid[1]);
    let reach = gi.radius + gj.radius;
    let val = if same || d < NEAR_FACTOR * reach {
        let rule = if same { &rules.selfr } else { &rules.near };
        let tol = 1e-10 * gj.radius;
        tensor_points(&gi.panel, rule)
            .iter()
            .map(|(p, w)| w * gj.potential(*p, tol))
            .sum::<f64>()
    } else {
        let rule = if d < MID_FACTOR * reach {
            &rules.mid
        } else {
            &rules.far
        };
        let pi = tensor_points(&gi.panel, rule);
        let pj = tensor_points(&gj.panel, rule);
        let mut s = 0.0;
        for (x, wx) in &pi {
            for (y, wy) in &pj {
                s += wx * wy / (x[0] - y[0]).hypot(x[1] - y[1]);
            }
        }
        s
    };
    val / PI
}

/// Galerkin matrix of the Riesz operator; symmetric by construction and
/// verified positive definite (its Cholesky factor is kept for solves).
#[derive(Debug, Clone)]
pub struct RieszMatrix {
    pub matrix: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl RieszMatrix {
    pub fn smallest_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_mesh(mesh: &ApertureMesh) -> Result<(), ApertureError> {
    if mesh.is_empty() {
        return Err(ApertureError::EmptyMesh);
    }
    for (index, w) in mesh.weights.iter().enumerate() {
        if !(w.is_finite() && *w > 0.0) {
            return Err(ApertureError::DegeneratePanel { index, area: *w });
        }
    }
    Ok(())
}

/// Assembles the Riesz matrix, exploiting rotational structure when present.
pub fn assemble_riesz_matrix(mesh: &ApertureMesh) -> Result<RieszMatrix, ApertureError> {
    check_mesh(mesh)?;
    let matrix = match &mesh.layout {
        Some(layout) => assemble_circulant(mesh, layout),
        None => assemble_dense(mesh),
    };
    finish(matrix)
}

/// Entry-by-entry assembly ignoring any symmetry (reference path).
pub fn assemble_riesz_matrix_dense(mesh: &ApertureMesh) -> Result<RieszMatrix, ApertureError> {
    check_mesh(mesh)?;
    finish(assemble_dense(mesh))
}

fn finish(matrix: DMatrix<f64>) -> Result<RieszMatrix, ApertureError> {
    let size = matrix.nrows();
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(ApertureError::NotPositiveDefinite { size });
    }
    let factor =
        Cholesky::new(matrix.clone()).ok_or(ApertureError::NotPositiveDefinite { size })?;
    Ok(RieszMatrix { matrix, factor })
}

fn assemble_dense(mesh: &ApertureMesh) -> DMatrix<f64> {
    let geoms: Vec<PanelGeom> = mesh.panels.iter().map(|p| PanelGeom::new(*p)).collect();
    let rules = Rules::new();
    let n = geoms.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| pair_entry(&geoms[i], &geoms[j], i == j, &rules))
                .collect()
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            m[(i, i + off)] = *v;
            m[(i + off, i)] = *v;
        }
    }
    m
}

fn assemble_circulant(mesh: &ApertureMesh, layout: &RingLayout) -> DMatrix<f64> {
    let geoms: Vec<PanelGeom> = mesh.panels.iter().map(|p| PanelGeom::new(*p)).collect();
    let rules = Rules::new();
    let nr = layout.counts.len();
    let order = layout.order;
    // Representative panel index for (ring, slot).
    let mut index = vec![vec![usize::MAX; order]; nr];
    for k in 0..geoms.len() {
        index[layout.ring[k]][layout.slot[k]] = k;
    }
    let mut jobs = Vec::new();
    for ri in 0..nr {
        for rj in ri..nr {
            let offsets = if layout.counts[ri] == 1 || layout.counts[rj] == 1 {
                1
            } else if ri == rj {
                order / 2 + 1
            } else {
                order
            };
            for m in 0..offsets {
                jobs.push((ri, rj, m));
            }
        }
    }
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(ri, rj, m)| {
            let i = index[ri][0];
            let j = index[rj][m];
            pair_entry(&geoms[i], &geoms[j], i == j, &rules)
        })
        .collect();
    let mut table = vec![vec![Vec::new(); nr]; nr];
    for (&(ri, rj, m), v) in jobs.iter().zip(&values) {
        let row = &mut table[ri][rj];
        if row.len() <= m {
            row.resize(m + 1, 0.0);
        }
        row[m] = *v;
    }
    // Same-ring tables are symmetric under m -> order - m.
    for (ri, row) in table.iter_mut().enumerate() {
        let t = &mut row[ri];
        if layout.counts[ri] == order {
            t.resize(order, 0.0);
            for m in order / 2 + 1..order {
                t[m] = t[order - m];
            }
        }
    }
    let n = geoms.len();
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let (ra, sa, rb, sb) = (
                layout.ring[a],
                layout.slot[a],
                layout.ring[b],
                layout.slot[b],
            );
            let v = if ra <= rb {
                let m = if layout.counts[ra] == 1 || layout.counts[rb] == 1 {
                    0
                } else {
                    (sb + order - sa) % order
                };
                table[ra][rb][m]
            } else {
                let m = if layout.counts[ra] == 1 || layout.counts[rb] == 1 {
                    0
                } else {
                    (sa + order - sb) % order
                };
                table[rb][ra][m]
            };
            out[(a, b)] = v;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumDensity {
    /// Panel-average density `mu = L^{-1}[1]`.
    pub values: Vec<f64>,
    pub capacity: f64,
}

/// Solves `L[mu] = 1` on the mesh and returns `mu` and `(mu, 1)`.
pub fn solve_equilibrium(mesh: &ApertureMesh) -> Result<EquilibriumDensity, ApertureError> {
    let riesz = assemble_riesz_matrix(mesh)?;
    solve_with(&riesz, mesh)
}

pub fn solve_with(
    riesz: &RieszMatrix,
    mesh: &ApertureMesh,
) -> Result<EquilibriumDensity, ApertureError> {
    let w = DVector::from_column_slice(&mesh.weights);
    let mu = riesz.factor.solve(&w);
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(ApertureError::IllConditioned("non-finite density".into()));
    }
    let residual = (&riesz.matrix * &mu - &w).norm() / w.norm();
    if residual > 1e-8 {
        return Err(ApertureError::IllConditioned(format!(
            "relative residual {residual:e}"
        )));
    }
    let capacity = mu.dot(&w);
    Ok(EquilibriumDensity {
        values: mu.iter().copied().collect(),
        capacity,
    })
}

/// `c_{eps Λ} = eps c_Λ`.
pub fn scaled_capacity(c_unit: f64, epsilon: f64) -> f64 {
    epsilon * c_unit
}

/// The disk's closed-form equilibrium density `(1/pi) (1 - |x|^2)^{-1/2}`.
pub fn disk_density(x: [f64; 2]) -> f64 {
    1.0 / (PI * (1.0 - x[0] * x[0] - x[1] * x[1]).sqrt())
}

/// CSV with columns `x1,x2,weight,density`.
pub fn density_csv(mesh: &ApertureMesh, density: &EquilibriumDensity) -> String {
    let mut s = String::from("x1,x2,weight,density\n");
    for ((p, w), mu) in mesh.nodes.iter().zip(&mesh.weights).zip(&density.values) {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(*w),
            fmt_f64(*mu)
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityRecord {
    pub shape: String,
    pub resolution: usize,
    pub capacity: f64,
}

pub fn capacity_record(mesh: &ApertureMesh, density: &EquilibriumDensity) -> CapacityRecord {
    CapacityRecord {
        shape: mesh.shape.name().to_string(),
        resolution: mesh.resolution,
        capacity: density.capacity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_panel(r: f64) -> Panel {
        Panel::Sector {
            r_in: 0.0,
            r_out: r,
            theta0: 0.0,
            theta1: TAU,
            sx: 1.0,
            sy: 1.0,
        }
    }

    #[test]
    fn sector_chord_matches_brute_force() {
        let g = PanelGeom::new(Panel::Sector {
            r_in: 0.4,
            r_out: 0.9,
            theta0: 0.3,
            theta1: 1.4,
            sx: 1.3,
            sy: 0.7,
        });
        let p = [-0.2, 0.1];
        for k in 0..50 {
            let th = 0.1 + k as f64 * 0.12;
            let e = [th.cos(), th.sin()];
            let steps = 200_000;
            let dt = 3.0 / steps as f64;
            let mut len = 0.0;
            for s in 0..steps {
                let t = (s as f64 + 0.5) * dt;
                let x = [(p[0] + t * e[0]) / 1.3, (p[1] + t * e[1]) / 0.7];
                let r = x[0].hypot(x[1]);
                let a = x[1].atan2(x[0]);
                if (0.4..=0.9).contains(&r) && (0.3..=1.4).contains(&a) {
                    len += dt;
                }
            }
            assert!((g.chord(p, e) - len).abs() < 1e-4, "theta={th}");
        }
    }

    #[test]
    fn fan_chord_matches_triangle_geometry() {
        let g = PanelGeom::new(Panel::Fan {
            va: [1.0, 0.0],
            vb: [0.0, 1.0],
            rho0: 0.0,
            rho1: 1.0,
            sig0: 0.0,
            sig1: 1.0,
        });
        // From (0.1, 0.1) along +x the ray exits through the hypotenuse at x = 0.9.
        assert!((g.chord([0.1, 0.1], [1.0, 0.0]) - 0.8).abs() < 1e-14);
        assert_eq!(g.chord([0.1, 0.1], [-1.0, 0.0]), 0.1);
        assert_eq!(g.chord([2.0, 2.0], [1.0, 0.0]), 0.0);
    }

    #[test]
    fn disk_potential_at_centre() {
        // ∫_{|y|<r} 1/|y| dy = 2 pi r
        let g = PanelGeom::new(disk_panel(0.7));
        assert!((g.potential([0.0, 0.0], 1e-12) - TAU * 0.7).abs() < 1e-10);
    }

    #[test]
    fn polygon_area_and_orientation() {
        let sq = ApertureShape::Polygon {
            vertices: vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
        };
        assert!((sq.area() - 4.0).abs() < 1e-15);
        let m = ApertureMesh::new(sq.clone(), 6).unwrap();
        assert!((m.total_weight() - 4.0).abs() < 1e-12);
        assert!(m.nodes.iter().all(|p| sq.contains(*p)));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ApertureMesh::new(ApertureShape::Ellipse { a: -1.0, b: 1.0 }, 4).is_err());
        let bent = ApertureShape::Polygon {
            vertices: vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -0.5], [0.5, 0.5]],
        };
        assert!(ApertureMesh::new(bent, 4).is_err());
    }

    #[test]
    fn degenerate_panel_rejected() {
        let p = Panel::Sector {
            r_in: 0.5,
            r_out: 0.5,
            theta0: 0.0,
            theta1: 1.0,
            sx: 1.0,
            sy: 1.0,
        };
        let err = ApertureMesh::from_panels(ApertureShape::UnitDisk, 1, vec![p], None).unwrap_err();
        assert!(matches!(
            err,
            ApertureError::DegeneratePanel { index: 0, .. }
        ));
    }

    #[test]
    fn scaled_capacity_is_linear() {
        assert_eq!(scaled_capacity(2.0, 0.5), 1.0);
        assert_eq!(scaled_capacity(2.0, 1.0), 2.0);
        assert!((scaled_capacity(2.0, 1e-4) - 2e-4).abs() < 1e-20);
    }
}
