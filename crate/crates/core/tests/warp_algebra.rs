//! Group-law suite for the warp algebra, checked against hand-rolled 3x3
//! matrix routines that never touch the implementation's linear algebra.

use ndarray::Array2;
use threemti_core::data::{
    apply_warp_plane, compose_warps, invert_warp, sample_warp, WarpParams, WarpRanges,
};
use threemti_core::nn::rng_from_seed;

type M3 = [[f64; 3]; 3];

fn to_m3(w: &WarpParams) -> M3 {
    let m = w.matrix();
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = m[(r, c)];
        }
    }
    out
}

/// Oracle: plain triple-loop product.
fn mat_mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            for k in 0..3 {
                out[r][c] += a[r][k] * b[k][c];
            }
        }
    }
    out
}

/// Oracle: inverse via the adjugate formula.
fn mat_inv(a: &M3) -> M3 {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    assert!(det.abs() > 1e-12, "oracle: singular matrix");
    let mut adj = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let m = |i: usize, j: usize| a[i][j];
            let (r1, r2) = match r {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c1, c2) = match c {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m(r1, c1) * m(r2, c2) - m(r1, c2) * m(r2, c1);
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            adj[c][r] = sign * minor; // transpose of cofactor matrix
        }
    }
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = adj[r][c] / det;
        }
    }
    out
}

fn normalize_m3(a: &M3) -> M3 {
    let s = a[2][2];
    let mut out = *a;
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] /= s;
        }
    }
    out
}

fn max_abs_diff(a: &M3, b: &M3) -> f64 {
    let mut d: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            d = d.max((a[r][c] - b[r][c]).abs());
        }
    }
    d
}

fn random_warps(n: usize, seed: u64) -> Vec<WarpParams> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| sample_warp(&mut rng, &WarpRanges::default()).unwrap()).collect()
}

#[test]
fn composition_matches_matrix_product_oracle() {
    let warps = random_warps(200, 31);
    for pair in warps.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let got = to_m3(&compose_warps(a, b).unwrap());
        let want = normalize_m3(&mat_mul(&to_m3(a), &to_m3(b)));
        assert!(max_abs_diff(&got, &want) < 1e-12);
    }
}

#[test]
fn inverse_matches_adjugate_oracle_and_is_two_sided() {
    let warps = random_warps(100, 47);
    let id: M3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for w in &warps {
        let inv = invert_warp(w).unwrap();
        let want = normalize_m3(&mat_inv(&to_m3(w)));
        assert!(max_abs_diff(&to_m3(&inv), &want) < 1e-9);
        // two-sided inverse after normalization
        let left = normalize_m3(&mat_mul(&to_m3(&inv), &to_m3(w)));
        let right = normalize_m3(&mat_mul(&to_m3(w), &to_m3(&inv)));
        assert!(max_abs_diff(&left, &id) < 1e-9);
        assert!(max_abs_diff(&right, &id) < 1e-9);
    }
}

#[test]
fn identity_is_neutral_and_composition_associative() {
    let warps = random_warps(100, 59);
    let e = WarpParams::identity();
    for chunk in warps.chunks(3) {
        if chunk.len() < 3 {
            continue;
        }
        let (a, b, c) = (&chunk[0], &chunk[1], &chunk[2]);
        let left_id = compose_warps(&e, a).unwrap();
        let right_id = compose_warps(a, &e).unwrap();
        assert!(max_abs_diff(&to_m3(&left_id), &to_m3(a)) < 1e-12);
        assert!(max_abs_diff(&to_m3(&right_id), &to_m3(a)) < 1e-12);
        // identity composition keeps the parametric form
        assert_eq!(left_id.components, a.components);

        let ab_c = compose_warps(&compose_warps(a, b).unwrap(), c).unwrap();
        let a_bc = compose_warps(a, &compose_warps(b, c).unwrap()).unwrap();
        assert!(max_abs_diff(&to_m3(&ab_c), &to_m3(&a_bc)) < 1e-9);
    }
}

#[test]
fn ninety_degree_rotation_matches_index_permutation_oracle() {
    let mut rng = rng_from_seed(77);
    let n = 33;
    let img = Array2::<f32>::from_shape_simple_fn((n, n), || rand::Rng::gen::<f32>(&mut rng));
    let w = WarpParams::from_components(threemti_core::data::WarpComponents {
        theta: 90.0,
        ..threemti_core::data::WarpComponents::identity()
    })
    .unwrap();
    let got = apply_warp_plane(&img, &w, 0.0).unwrap();
    // oracle: exact 90-degree grid rotation
    for y in 0..n {
        for x in 0..n {
            let want = img[(n - 1 - x, y)];
            assert!(
                (got[(y, x)] - want).abs() < 1e-5,
                "pixel ({y},{x}): got {} want {want}",
                got[(y, x)]
            );
        }
    }
}

#[test]
fn monte_carlo_samples_stay_inside_ranges() {
    let ranges = WarpRanges::default();
    let mut rng = rng_from_seed(99);
    let mut seen = [(f64::INFINITY, f64::NEG_INFINITY); 4];
    for _ in 0..10_000 {
        let w = sample_warp(&mut rng, &ranges).unwrap();
        let c = w.components.unwrap();
        for (slot, (value, (lo, hi))) in [
            (0usize, (c.tx, ranges.tx)),
            (1, (c.ty, ranges.ty)),
            (2, (c.scale, ranges.scale)),
            (3, (c.theta, ranges.theta)),
        ] {
            assert!(value >= lo && value <= hi, "parameter {slot} out of range: {value}");
            seen[slot].0 = seen[slot].0.min(value);
            seen[slot].1 = seen[slot].1.max(value);
        }
        for corner in c.corner_jitter {
            for v in corner {
                assert!(v >= ranges.corner_jitter.0 && v <= ranges.corner_jitter.1);
            }
        }
    }
    // the sampler actually explores the intervals
    assert!(seen[0].0 < -0.04 && seen[0].1 > 0.04);
    assert!(seen[2].0 < 0.96 && seen[2].1 > 1.04);
}
