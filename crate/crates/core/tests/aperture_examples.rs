use std::f64::consts::{PI, TAU};

use resonant_imaging::aperture::{
    assemble_riesz_matrix, assemble_riesz_matrix_dense, disk_density, solve_equilibrium,
    solve_with, ApertureMesh, ApertureShape, Panel,
};

/// Complete elliptic integral of the second kind by composite Simpson.
fn ellip_e(k: f64) -> f64 {
    let n = 2000;
    let h = 0.5 * PI / n as f64;
    let f = |t: f64| (1.0 - k * k * t.sin().powi(2)).sqrt();
    let mut s = f(0.0) + f(0.5 * PI);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    while (a - b).abs() > 1e-15 * a {
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    a
}

#[test]
fn single_disk_panel_self_term() {
    // ∫∫ 1/(pi |x - y|) over a disk of radius r: the potential of the
    // uniform disk at radius rho is 4 r E(rho / r), integrated over rings.
    let r = 0.37;
    let n = 4000;
    let h = r / n as f64;
    let mut oracle = 0.0;
    for i in 0..n {
        let rho = (i as f64 + 0.5) * h;
        oracle += TAU * rho * 4.0 * r * ellip_e(rho / r) * h;
    }
    oracle /= PI;
    assert!((oracle - 16.0 * r.powi(3) / 3.0).abs() < 1e-5 * oracle);

    let panel = Panel::Sector {
        r_in: 0.0,
        r_out: r,
        theta0: 0.0,
        theta1: TAU,
        sx: 1.0,
        sy: 1.0,
    };
    let mesh = ApertureMesh::from_panels(ApertureShape::UnitDisk, 1, vec![panel], None).unwrap();
    let m = assemble_riesz_matrix(&mesh).unwrap();
    assert!(
        (m.matrix[(0, 0)] - oracle).abs() < 1e-5 * oracle,
        "{} vs {oracle}",
        m.matrix[(0, 0)]
    );
}

#[test]
fn riesz_matrix_is_symmetric() {
    for shape in [
        ApertureShape::UnitDisk,
        ApertureShape::Ellipse { a: 1.5, b: 0.6 },
        ApertureShape::Polygon {
            vertices: vec![[1.0, 0.0], [0.0, 1.2], [-0.8, 0.1], [0.1, -0.9]],
        },
    ] {
        let mesh = ApertureMesh::new(shape, 6).unwrap();
        let m = assemble_riesz_matrix_dense(&mesh).unwrap().matrix;
        let scale = m.amax();
        assert!((&m - m.transpose()).amax() <= 1e-14 * scale);
    }
}

#[test]
fn smallest_eigenvalue_positive_at_two_levels() {
    for res in [6, 12] {
        let mesh = ApertureMesh::new(ApertureShape::UnitDisk, res).unwrap();
        let m = assemble_riesz_matrix(&mesh).unwrap();
        // independent dense eigensolve of the assembled matrix
        let eig = m.matrix.clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() > 0.0);
        assert!((m.smallest_eigenvalue() - eig.min()).abs() <= 1e-12 * eig.max());
    }
}

#[test]
fn disk_capacity_and_density() {
    let mesh = ApertureMesh::new(ApertureShape::UnitDisk, 48).unwrap();
    let d = solve_equilibrium(&mesh).unwrap();
    assert!((d.capacity - 2.0).abs() < 0.01, "capacity {}", d.capacity);
    assert!(d.values.iter().all(|v| *v >= 0.0));
    let inner: f64 = d.values.iter().zip(&mesh.weights).map(|(m, w)| m * w).sum();
    assert!((inner - d.capacity).abs() < 1e-12);
    for (p, mu) in mesh.nodes.iter().zip(&d.values) {
        if p[0].hypot(p[1]) <= 0.8 {
            let exact = disk_density(*p);
            assert!(
                (mu - exact).abs() < 0.02 * exact,
                "at {p:?}: {mu} vs {exact}"
            );
        }
    }
}

#[test]
fn round_ellipse_equals_disk() {
    let disk = solve_equilibrium(&ApertureMesh::new(ApertureShape::UnitDisk, 12).unwrap()).unwrap();
    let ell = solve_equilibrium(
        &ApertureMesh::new(ApertureShape::Ellipse { a: 1.0, b: 1.0 }, 12).unwrap(),
    )
    .unwrap();
    assert!((disk.capacity - ell.capacity).abs() < 1e-12);
}

#[test]
fn ellipse_capacity_matches_agm_formula() {
    // c = 2a AGM(1, b/a) in the normalisation where the unit disk gives 2
    let (a, b) = (1.6, 0.8);
    let exact = 2.0 * a * agm(1.0, b / a);
    let d = solve_equilibrium(&ApertureMesh::new(ApertureShape::Ellipse { a, b }, 20).unwrap())
        .unwrap();
    assert!(
        (d.capacity - exact).abs() < 5e-3 * exact,
        "{} vs {exact}",
        d.capacity
    );
}

#[test]
fn weights_sum_to_area_and_nodes_inside() {
    let shapes = [
        ApertureShape::UnitDisk,
        ApertureShape::Ellipse { a: 2.0, b: 0.5 },
        ApertureShape::Polygon {
            vertices: vec![
                [1.0, 0.0],
                [0.5, 0.9],
                [-0.7, 0.6],
                [-0.6, -0.7],
                [0.4, -0.8],
            ],
        },
    ];
    for shape in shapes {
        let mesh = ApertureMesh::new(shape.clone(), 10).unwrap();
        assert!(
            (mesh.total_weight() - shape.area()).abs() < 1e-6 * shape.area(),
            "{}",
            shape.name()
        );
        assert!(mesh.nodes.iter().all(|p| shape.contains(*p)));
        assert!(mesh.weights.iter().all(|w| *w > 0.0));
    }
}

#[test]
fn energy_identity() {
    let mesh = ApertureMesh::new(ApertureShape::Ellipse { a: 1.2, b: 0.7 }, 10).unwrap();
    let riesz = assemble_riesz_matrix(&mesh).unwrap();
    let d = solve_with(&riesz, &mesh).unwrap();
    let mu = nalgebra::DVector::from_vec(d.values.clone());
    let w = nalgebra::DVector::from_vec(mesh.weights.clone());
    // with panel-average unknowns the Galerkin system is L mu = w, so the
    // quadratic form mu^T L mu equals (mu, 1) = capacity
    let quad = mu.dot(&(&riesz.matrix * &mu));
    assert!((quad - d.capacity).abs() < 1e-10 * d.capacity);
    assert!((mu.dot(&w) - d.capacity).abs() < 1e-12 * d.capacity);
}

#[test]
fn capacity_converges_under_refinement() {
    let caps: Vec<f64> = [6, 12, 24, 48]
        .iter()
        .map(|r| {
            solve_equilibrium(&ApertureMesh::new(ApertureShape::UnitDisk, *r).unwrap())
                .unwrap()
                .capacity
        })
        .collect();
    let diffs: Vec<f64> = caps.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{caps:?}");
}

#[test]
fn rotated_disk_mesh_same_capacity() {
    let base = solve_equilibrium(&ApertureMesh::new(ApertureShape::UnitDisk, 12).unwrap())
        .unwrap()
        .capacity;
    for angle in [0.3, 1.1, 2.9] {
        let mesh = ApertureMesh::with_rotation(ApertureShape::UnitDisk, 12, angle).unwrap();
        let c = solve_equilibrium(&mesh).unwrap().capacity;
        assert!((c - base).abs() < 1e-10, "angle {angle}: {c} vs {base}");
    }
}

#[test]
fn scaled_mesh_capacity_is_linear() {
    let mesh = ApertureMesh::new(ApertureShape::Ellipse { a: 1.3, b: 0.9 }, 10).unwrap();
    let c = solve_equilibrium(&mesh).unwrap().capacity;
    for eps in [1e-1, 1e-3] {
        let ce = solve_equilibrium(&mesh.scaled(eps)).unwrap().capacity;
        assert!((ce - eps * c).abs() < 1e-8 * eps * c);
    }
}
