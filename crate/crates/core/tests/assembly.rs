mod common;

use std::sync::Arc;

use common::{block_diag, max_abs_diff, skewed_two_cell_mesh, Oracle};
use nudge_ns::fem::assembly::{scalar_convection, scalar_p1_mass, scalar_p1_stiffness, scalar_p2_mass, scalar_p2_stiffness, ConvectionForm};
use nudge_ns::fem::{assemble_divergence, assemble_graddiv, assemble_mass, assemble_stiffness, load_vector, DofMap, FieldKind};
use nudge_ns::mesh::{unit_square_mesh, BoundaryTag, Mesh, Point};
use proptest::prelude::*;

fn space(m: Mesh) -> DofMap {
    DofMap::new(Arc::new(m))
}

#[test]
fn reference_triangle_p1_exact() {
    let m = Mesh::with_boundary_tags(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)], vec![[0, 1, 2]], |_, _| BoundaryTag::Wall).unwrap();
    let s = space(m);
    let mass = [[1.0 / 12.0, 1.0 / 24.0, 1.0 / 24.0], [1.0 / 24.0, 1.0 / 12.0, 1.0 / 24.0], [1.0 / 24.0, 1.0 / 24.0, 1.0 / 12.0]];
    let stiff = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    let (m1, k1) = (scalar_p1_mass(&s), scalar_p1_stiffness(&s));
    for i in 0..3 {
        for j in 0..3 {
            assert!((m1.get(i, j) - mass[i][j]).abs() <= 1e-13, "M[{i},{j}]");
            assert!((k1.get(i, j) - stiff[i][j]).abs() <= 1e-13, "K[{i},{j}]");
        }
    }
}

fn check_forms(s: &DofMap, tol: f64) {
    let o = Oracle::new(s);
    assert!(max_abs_diff(&scalar_p2_mass(s).to_dense(), &o.p2_mass()) <= tol);
    assert!(max_abs_diff(&scalar_p2_stiffness(s).to_dense(), &o.p2_stiffness()) <= tol);
    assert!(max_abs_diff(&assemble_mass(s, FieldKind::Velocity).to_dense(), &block_diag(&o.p2_mass())) <= tol);
    assert!(max_abs_diff(&assemble_stiffness(s, FieldKind::Velocity).to_dense(), &block_diag(&o.p2_stiffness())) <= tol);
    assert!(max_abs_diff(&assemble_mass(s, FieldKind::Pressure).to_dense(), &o.p1_mass()) <= tol);
    assert!(max_abs_diff(&assemble_stiffness(s, FieldKind::Pressure).to_dense(), &o.p1_stiffness()) <= tol);
    assert!(max_abs_diff(&assemble_divergence(s).to_dense(), &o.divergence()) <= tol);

    let nn = s.num_nodes();
    let mut g = vec![vec![0.0; 2 * nn]; 2 * nn];
    for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        // row block a (test component), column block b (trial component)
        let d = o.p2_derivative_pair(a, b);
        for i in 0..nn {
            for j in 0..nn {
                g[a * nn + i][b * nn + j] = d[i][j];
            }
        }
    }
    assert!(max_abs_diff(&assemble_graddiv(s).to_dense(), &g) <= tol);

    let w: Vec<f64> = (0..2 * nn).map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0).collect();
    let c = o.p2_convection(&w);
    assert!(max_abs_diff(&scalar_convection(s, &w, ConvectionForm::Plain).unwrap().to_dense(), &c) <= tol);
    let skew: Vec<Vec<f64>> = (0..nn).map(|i| (0..nn).map(|j| 0.5 * (c[i][j] - c[j][i])).collect()).collect();
    assert!(max_abs_diff(&scalar_convection(s, &w, ConvectionForm::Skew).unwrap().to_dense(), &skew) <= tol);

    let f = |p: Point| [p.x * p.x - 2.0 * p.y + 1.0, p.x * p.y * p.y];
    let (lib, ora) = (load_vector(s, 7, f), o.load(f));
    assert!(lib.iter().zip(&ora).all(|(a, b)| (a - b).abs() <= tol));
}

#[test]
fn two_cell_forms_match_oracle() {
    check_forms(&space(unit_square_mesh(1)), 1e-10);
    check_forms(&space(skewed_two_cell_mesh()), 1e-10);
}

#[test]
fn forms_match_oracle_on_small_square() {
    check_forms(&space(unit_square_mesh(3)), 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_triangle_forms(ax in -2.0..2.0f64, ay in -2.0..2.0f64, bx in -2.0..2.0f64, by in -2.0..2.0f64, cx in -2.0..2.0f64, cy in -2.0..2.0f64) {
        let area2 = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay);
        prop_assume!(area2 > 0.05);
        let m = Mesh::with_boundary_tags(vec![Point::new(ax, ay), Point::new(bx, by), Point::new(cx, cy)], vec![[0, 1, 2]], |_, _| BoundaryTag::Wall).unwrap();
        check_forms(&space(m), 1e-9);
    }
}
