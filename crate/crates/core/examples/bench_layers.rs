//! Rough per-layer timing to size the toy models.
use ndarray::{Array3, Array4};
use std::time::Instant;
use threemti_core::nn::{rng_from_seed, Attention, Conv2d, Scalar};

fn time<F: FnMut()>(label: &str, iters: usize, mut f: F) {
    let t0 = Instant::now();
    for _ in 0..iters {
        f();
    }
    let dt = t0.elapsed().as_secs_f64() / iters as f64;
    println!("{label}: {:.2} ms", dt * 1e3);
}

fn main() {
    let mut rng = rng_from_seed(1);
    // batch 4, typical codec/unet shapes
    for (cin, cout, hw, stride, b) in [
        (1usize, 16usize, 128usize, 1usize, 8usize),
        (16, 32, 128, 2, 8),
        (32, 64, 64, 2, 8),
        (4, 32, 32, 1, 8),
        (32, 32, 32, 1, 8),
        (64, 64, 16, 1, 8),
        (128, 128, 8, 1, 8),
        (24, 12, 128, 1, 4),
        (48, 24, 64, 1, 4),
    ] {
        let mut conv = Conv2d::<f32>::new("c", &mut rng, cin, cout, 3, stride, 1);
        let x = Array4::from_shape_simple_fn((b, cin, hw, hw), || f32::standard_normal(&mut rng));
        let y = conv.forward(&x, true);
        let _ = conv.forward(&x, true);
        time(&format!("conv {cin}->{cout} @{hw} s{stride} b{b} fwd"), 20, || {
            let _ = conv.forward(&x, true);
        });
        time(&format!("conv {cin}->{cout} @{hw} s{stride} b{b} bwd"), 20, || {
            let _ = conv.forward(&x, true);
            let _ = conv.backward(&y);
        });
    }
    for (t, c, heads, b) in [(512usize, 64usize, 4usize, 4usize), (128, 128, 4, 4)] {
        let mut attn = Attention::<f32>::new("a", &mut rng, c, c, heads);
        let x = Array3::from_shape_simple_fn((b, t, c), || f32::standard_normal(&mut rng));
        let y = attn.forward(&x, None, true);
        time(&format!("attn T{t} C{c} b{b} fwd"), 20, || {
            let _ = attn.forward(&x, None, true);
        });
        time(&format!("attn T{t} C{c} b{b} fwd+bwd"), 20, || {
            let _ = attn.forward(&x, None, true);
            let _ = attn.backward(&y);
        });
    }
}
