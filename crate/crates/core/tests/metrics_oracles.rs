//! Metric contracts checked against independent brute-force references.

use ndarray::{Array2, Array4};
use threemti_core::data::generate_toy_scene;
use threemti_core::error::Error;
use threemti_core::metrics::{
    l2_loss, perceptual_distance_plane, psnr, ssim, LossConfig, MetricsReport, PerImageMetrics,
    PerceptualDistance, TotalLoss,
};
use threemti_core::nn::rng_from_seed;

fn rand_img(h: usize, w: usize, seed: u64) -> Array2<f32> {
    let mut rng = rng_from_seed(seed);
    Array2::from_shape_simple_fn((h, w), || rand::Rng::gen::<f32>(&mut rng))
}

/// Oracle: PSNR by plain scalar accumulation.
fn psnr_oracle(a: &Array2<f32>, b: &Array2<f32>) -> f64 {
    let mut se = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        se += (*x as f64 - *y as f64) * (*x as f64 - *y as f64);
    }
    let mse = se / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Oracle: SSIM from explicitly materialized weighted moment maps.
fn ssim_oracle(a: &Array2<f32>, b: &Array2<f32>) -> f64 {
    let (h, w) = a.dim();
    let win = 11usize;
    let sigma = 1.5f64;
    let c = (win / 2) as f64;
    let mut weights = vec![0.0f64; win * win];
    let mut sum = 0.0;
    for i in 0..win {
        for j in 0..win {
            let v = (-((i as f64 - c).powi(2) + (j as f64 - c).powi(2)) / (2.0 * sigma * sigma))
                .exp();
            weights[i * win + j] = v;
            sum += v;
        }
    }
    for v in weights.iter_mut() {
        *v /= sum;
    }
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;
    let mut acc = 0.0;
    let mut count = 0;
    for y0 in 0..=(h - win) {
        for x0 in 0..=(w - win) {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for idx in 0..win * win {
                let (i, j) = (idx / win, idx % win);
                let wv = weights[idx];
                let va = a[(y0 + i, x0 + j)] as f64;
                let vb = b[(y0 + i, x0 + j)] as f64;
                ma += wv * va;
                mb += wv * vb;
                saa += wv * va * va;
                sbb += wv * vb * vb;
                sab += wv * va * vb;
            }
            let (va, vb, cab) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cab + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

#[test]
fn psnr_sentinel_closed_form_and_oracle() {
    let a = rand_img(32, 32, 1);
    assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);

    let uniform = a.mapv(|v| (v * 0.0) + 0.3);
    let shifted = uniform.mapv(|v| v + 0.1);
    let got = psnr(&uniform, &shifted, 1.0).unwrap();
    assert!((got - 20.0).abs() < 1e-6, "uniform 0.1 diff gives {got} dB");

    for seed in 0..10u64 {
        let x = rand_img(32, 32, 100 + seed);
        let y = rand_img(32, 32, 200 + seed);
        let got = psnr(&x, &y, 1.0).unwrap();
        let want = psnr_oracle(&x, &y);
        assert!((got - want).abs() < 1e-6, "psnr {got} vs oracle {want}");
    }
}

#[test]
fn psnr_rejects_shape_mismatch_and_decreases_with_noise() {
    let a = rand_img(16, 16, 3);
    let b = rand_img(16, 17, 3);
    assert!(matches!(psnr(&a, &b, 1.0), Err(Error::ShapeMismatch { .. })));

    let base = rand_img(64, 64, 5);
    let mut last = f64::INFINITY;
    for amp in [0.01f32, 0.02, 0.05, 0.1] {
        let mut rng = rng_from_seed(42);
        let noisy = base.mapv(|v| v + amp * (rand::Rng::gen::<f32>(&mut rng) - 0.5));
        let p = psnr(&base, &noisy, 1.0).unwrap();
        assert!(p < last, "psnr must strictly decrease: {p} !< {last}");
        last = p;
    }
}

#[test]
fn ssim_identity_symmetry_and_oracle() {
    let a = rand_img(32, 32, 7);
    assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);

    for seed in 0..10u64 {
        let x = rand_img(32, 32, 300 + seed);
        let y = rand_img(32, 32, 400 + seed);
        let got = ssim(&x, &y).unwrap();
        let want = ssim_oracle(&x, &y);
        assert!((got - want).abs() < 1e-4, "ssim {got} vs oracle {want}");
        let sym = ssim(&y, &x).unwrap();
        assert!((got - sym).abs() < 1e-9, "ssim not symmetric");
    }
}

#[test]
fn ssim_of_inverted_half_plane_is_negative() {
    let mut a = Array2::<f32>::zeros((32, 32));
    for y in 0..32 {
        for x in 16..32 {
            a[(y, x)] = 1.0;
        }
    }
    let b = a.mapv(|v| 1.0 - v);
    let got = ssim(&a, &b).unwrap();
    let want = ssim_oracle(&a, &b);
    assert!(got < 0.0, "anti-correlated structure must give negative ssim, got {got}");
    assert!((got - want).abs() < 1e-4);
}

#[test]
fn ssim_rejects_small_and_mismatched_inputs() {
    let a = rand_img(8, 8, 1);
    assert!(matches!(ssim(&a, &a), Err(Error::TooSmall { .. })));
    let b = rand_img(32, 32, 1);
    let c = rand_img(32, 31, 1);
    assert!(matches!(ssim(&b, &c), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn l2_loss_closed_forms_and_loop_oracle() {
    let mut rng = rng_from_seed(9);
    let a = Array4::<f64>::from_shape_simple_fn((2, 1, 8, 8), || rand::Rng::gen::<f64>(&mut rng));
    assert_eq!(l2_loss(&a, &a).unwrap(), 0.0);

    let b = a.mapv(|v| v + 0.1);
    let got = l2_loss(&a, &b).unwrap();
    assert!((got - 0.01).abs() < 1e-12, "uniform 0.1 shift gives {got}");

    let c = Array4::<f64>::from_shape_simple_fn((2, 1, 8, 8), || rand::Rng::gen::<f64>(&mut rng));
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(c.iter()) {
        acc += (x - y) * (x - y);
    }
    let want = acc / a.len() as f64;
    assert!((l2_loss(&a, &c).unwrap() - want).abs() < 1e-7);
}

#[test]
fn perceptual_zero_symmetry_and_reproducibility() {
    let cfg = LossConfig::default();
    let mut net = PerceptualDistance::<f32>::from_config(&cfg).unwrap();
    let a = rand_img(64, 64, 11);
    let b = rand_img(64, 64, 12);
    assert_eq!(perceptual_distance_plane(&mut net, &a, &a).unwrap(), 0.0);

    let d_ab = perceptual_distance_plane(&mut net, &a, &b).unwrap();
    let d_ba = perceptual_distance_plane(&mut net, &b, &a).unwrap();
    assert!((d_ab - d_ba).abs() < 1e-7, "not symmetric: {d_ab} vs {d_ba}");
    assert!(d_ab > 0.0);

    // a fresh extractor with the same seed reproduces the value bitwise
    let mut net2 = PerceptualDistance::<f32>::from_config(&cfg).unwrap();
    let d2 = perceptual_distance_plane(&mut net2, &a, &b).unwrap();
    assert_eq!(d_ab.to_bits(), d2.to_bits());

    // out-of-range values are rejected at the metric surface
    let bad = a.mapv(|v| v + 0.5);
    assert!(matches!(
        perceptual_distance_plane(&mut net, &bad, &b),
        Err(Error::Range { .. })
    ));
}

fn gaussian_blur3(img: &Array2<f32>) -> Array2<f32> {
    let (h, w) = img.dim();
    let k = [[1.0f32, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]];
    let mut out = Array2::<f32>::zeros((h, w));
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let yy = (y + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x + dx).clamp(0, w as isize - 1) as usize;
                    acc += img[(yy, xx)] * k[(dy + 1) as usize][(dx + 1) as usize];
                }
            }
            out[(y as usize, x as usize)] = acc / 16.0;
        }
    }
    out
}

fn shuffle_patches(img: &Array2<f32>, patch: usize, seed: u64) -> Array2<f32> {
    let (h, w) = img.dim();
    let (py, px) = (h / patch, w / patch);
    let mut order: Vec<usize> = (0..py * px).collect();
    let mut rng = rng_from_seed(seed);
    for i in (1..order.len()).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    let mut out = Array2::<f32>::zeros((h, w));
    for (dst, &src) in order.iter().enumerate() {
        let (dy, dx) = (dst / px * patch, dst % px * patch);
        let (sy, sx) = (src / px * patch, src % px * patch);
        for y in 0..patch {
            for x in 0..patch {
                out[(dy + y, dx + x)] = img[(sy + y, sx + x)];
            }
        }
    }
    out
}

#[test]
fn perceptual_ranks_structure_destruction_above_blur() {
    // the fitness gate for the random-feature proxy
    let cfg = LossConfig::default();
    let mut net = PerceptualDistance::<f32>::from_config(&cfg).unwrap();
    let mut wins = 0;
    let total = 100;
    for seed in 0..total {
        let mut rng = rng_from_seed(7000 + seed);
        let (_, thermal) = generate_toy_scene(&mut rng, 128).unwrap();
        let blur = gaussian_blur3(&thermal);
        let shuffled = shuffle_patches(&thermal, 16, seed);
        let d_blur = perceptual_distance_plane(&mut net, &thermal, &blur).unwrap();
        let d_shuf = perceptual_distance_plane(&mut net, &thermal, &shuffled).unwrap();
        if d_blur < d_shuf {
            wins += 1;
        }
    }
    assert!(wins >= 95, "sensitivity ordering held only {wins}/{total} times");
}

#[test]
fn total_loss_zero_lambda_and_additivity() {
    let mut rng = rng_from_seed(21);
    let pred =
        Array4::<f32>::from_shape_simple_fn((1, 1, 32, 32), || rand::Rng::gen::<f32>(&mut rng));
    let gt =
        Array4::<f32>::from_shape_simple_fn((1, 1, 32, 32), || rand::Rng::gen::<f32>(&mut rng));

    let mut loss = TotalLoss::<f32>::from_config(&LossConfig::default()).unwrap();
    let parts_same = loss.value(&pred, &pred).unwrap();
    assert_eq!(parts_same.total, 0.0);

    let mut loss0 =
        TotalLoss::<f32>::from_config(&LossConfig { lambda: 0.0, ..LossConfig::default() })
            .unwrap();
    let parts0 = loss0.value(&pred, &gt).unwrap();
    assert_eq!(parts0.total, parts0.l2);
    assert_eq!(parts0.perceptual, 0.0);

    // lambda = 1: total is the exact sum of separately computed components
    let parts = loss.value(&pred, &gt).unwrap();
    let l2 = l2_loss(&pred, &gt).unwrap() as f64;
    let mut net = PerceptualDistance::<f32>::from_config(&LossConfig::default()).unwrap();
    let p = net
        .distance(&pred, &gt)
        .unwrap() as f64;
    assert!((parts.l2 - l2).abs() < 1e-7);
    assert!((parts.perceptual - p).abs() < 1e-7);
    assert!((parts.total - (l2 + p)).abs() < 1e-7);
}

#[test]
fn total_loss_gradient_matches_finite_differences() {
    // f64 at 4x4 so central differences are trustworthy
    let mut rng = rng_from_seed(33);
    let mut pred =
        Array4::<f64>::from_shape_simple_fn((1, 1, 4, 4), || rand::Rng::gen_range(&mut rng, 0.2..0.8));
    let gt =
        Array4::<f64>::from_shape_simple_fn((1, 1, 4, 4), || rand::Rng::gen_range(&mut rng, 0.2..0.8));
    let mut loss = TotalLoss::<f64>::from_config(&LossConfig::default()).unwrap();
    let (_, grad) = loss.value_and_grad(&pred, &gt).unwrap();

    let h = 1e-4;
    let mut max_rel = 0.0f64;
    for idx in 0..16 {
        let (y, x) = (idx / 4, idx % 4);
        let orig = pred[(0, 0, y, x)];
        pred[(0, 0, y, x)] = orig + h;
        let fp = loss.value(&pred, &gt).unwrap().total;
        pred[(0, 0, y, x)] = orig - h;
        let fm = loss.value(&pred, &gt).unwrap().total;
        pred[(0, 0, y, x)] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let analytic = grad[(0, 0, y, x)];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    assert!(max_rel < 1e-3, "total_loss grad rel err {max_rel}");
}

#[test]
fn report_aggregates_recompute_exactly_and_round_trip() {
    let rows = vec![
        PerImageMetrics { id: "a".into(), psnr_db: 30.0, ssim: 0.9, perceptual: 0.2 },
        PerImageMetrics { id: "b".into(), psnr_db: 28.5, ssim: 0.85, perceptual: 0.3 },
        PerImageMetrics { id: "c".into(), psnr_db: f64::INFINITY, ssim: 1.0, perceptual: 0.0 },
    ];
    let report = MetricsReport::from_rows(rows, "cfg".into(), 7);
    let recomputed = MetricsReport::compute_aggregates(&report.per_image);
    assert_eq!(report.aggregates, recomputed);

    // +inf sentinel survives JSON
    let json = serde_json::to_string(&report).unwrap();
    let back: MetricsReport = serde_json::from_str(&json).unwrap();
    assert!(back.per_image[2].psnr_db.is_infinite());
    assert!(back.aggregates.psnr_mean.is_infinite());
}
