use morphrom::field::NodalField;
use morphrom::interp::{apply, transfer_operator, transfer_to_mesh, CellLocator};
use morphrom::mesh::{rectangle_mesh, Mesh};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Structured mesh with interior nodes jittered by up to `amp` of a cell.
fn jittered(n: usize, amp: f64, seed: u64) -> Mesh {
    let m = rectangle_mesh(0.0, 1.0, 0.0, 1.0, n, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let nodes = m
        .nodes()
        .iter()
        .map(|&[x, y]| {
            let interior = x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0;
            if interior {
                [x + amp * h * rng.random_range(-1.0..1.0), y + amp * h * rng.random_range(-1.0..1.0)]
            } else {
                [x, y]
            }
        })
        .collect();
    m.with_nodes(nodes).unwrap()
}

fn sample_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect()
}

#[test]
fn affine_fields_reproduced() {
    let src = jittered(17, 0.3, 1);
    let loc = CellLocator::build(&src, None);
    let f = |p: [f64; 2]| 2.5 - 1.25 * p[0] + 3.75 * p[1];
    let g = |p: [f64; 2]| -0.5 + 4.0 * p[0] + 0.125 * p[1];
    let values: Vec<f64> = src.nodes().iter().flat_map(|&p| [f(p), g(p)]).collect();
    let field = NodalField::on_mesh(&src, 2, values).unwrap();

    let pts = sample_points(3000, 2);
    let op = transfer_operator(&src, &pts, &loc).unwrap();
    assert_eq!(op.n_out_of_domain(), 0);
    let out = op.apply_values(field.values(), 2).unwrap();
    for (k, &p) in pts.iter().enumerate() {
        assert!((out[2 * k] - f(p)).abs() <= 1e-12);
        assert!((out[2 * k + 1] - g(p)).abs() <= 1e-12);
    }

    let tgt = jittered(23, 0.4, 3);
    let op = transfer_to_mesh(&src, &tgt, &loc, &[("outer", true)]).unwrap();
    let moved = apply(&op, &field).unwrap();
    assert_eq!(moved.mesh_id(), tgt.id());
    for (i, &p) in tgt.nodes().iter().enumerate() {
        assert!((moved.node(i)[0] - f(p)).abs() <= 1e-12);
        assert!((moved.node(i)[1] - g(p)).abs() <= 1e-12);
    }
}

#[test]
fn rows_sum_to_one() {
    let src = jittered(13, 0.35, 4);
    let loc = CellLocator::build(&src, None);
    let mut pts = sample_points(2000, 5);
    pts.extend(src.nodes().iter().copied());
    // a few points just outside the square are clamped back onto it
    pts.extend([[-0.01, 0.5], [1.02, 1.02], [0.5, -1e-3]]);
    let op = transfer_operator(&src, &pts, &loc).unwrap();
    assert_eq!(op.n_out_of_domain(), 3);
    for row in op.rows() {
        assert!(row.entries.len() <= 3);
        let s: f64 = row.entries.iter().map(|e| e.1).sum();
        assert!((s - 1.0).abs() <= 1e-12);
        assert!(row.entries.iter().all(|e| e.1 >= -1e-12));
    }
}

#[test]
fn quadratic_field_converges_at_second_order() {
    let q = |p: [f64; 2]| p[0] * p[0] - 0.7 * p[0] * p[1] + 1.3 * p[1] * p[1] + p[0];
    let pts = sample_points(4000, 6);
    let exact: Vec<f64> = pts.iter().map(|&p| q(p)).collect();
    let errors: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let src = rectangle_mesh(0.0, 1.0, 0.0, 1.0, n, n);
            let loc = CellLocator::build(&src, None);
            let vals: Vec<f64> = src.nodes().iter().map(|&p| q(p)).collect();
            let out = transfer_operator(&src, &pts, &loc).unwrap().apply_values(&vals, 1).unwrap();
            let mse: f64 = out.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pts.len() as f64;
            mse.sqrt()
        })
        .collect();
    for w in errors.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((1.7..=2.3).contains(&slope), "slope {slope} from {errors:?}");
    }
}

#[test]
fn boundary_nodes_keep_boundary_values() {
    let src = jittered(11, 0.3, 7);
    let tgt = jittered(19, 0.3, 8);
    let loc = CellLocator::build(&src, None);
    // zero on the boundary, nonzero inside
    let vals: Vec<f64> = src.nodes().iter().map(|&[x, y]| x * (1.0 - x) * y * (1.0 - y)).collect();
    let field = NodalField::on_mesh(&src, 1, vals).unwrap();
    let op = transfer_to_mesh(&src, &tgt, &loc, &[("outer", true)]).unwrap();
    let out = apply(&op, &field).unwrap();
    for &i in tgt.group("outer").unwrap() {
        assert_eq!(out.values()[i], 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interior_point_weights_are_barycentric(x in 0.0f64..1.0, y in 0.0f64..1.0, seed in 0u64..1000) {
        let src = jittered(6, 0.3, seed);
        let loc = CellLocator::build(&src, None);
        let op = transfer_operator(&src, &[[x, y]], &loc).unwrap();
        let row = &op.rows()[0];
        let (mut px, mut py, mut s) = (0.0, 0.0, 0.0);
        for &(i, w) in &row.entries {
            prop_assert!(w >= -1e-12);
            px += w * src.nodes()[i][0];
            py += w * src.nodes()[i][1];
            s += w;
        }
        prop_assert!((s - 1.0).abs() <= 1e-12);
        prop_assert!((px - x).abs() <= 1e-12 && (py - y).abs() <= 1e-12);
    }
}
