use ndarray::Array4;
use std::time::Instant;
use threemti_core::nn::{rng_from_seed, Conv2d, Scalar};

fn main() {
    let mut rng = rng_from_seed(1);
    let (b, cin, cout, hw) = (4usize, 24usize, 12usize, 128usize);
    let mut conv = Conv2d::<f32>::new("c", &mut rng, cin, cout, 3, 1, 1);
    let x = Array4::from_shape_simple_fn((b, cin, hw, hw), || f32::standard_normal(&mut rng));
    for _ in 0..3 {
        let _ = conv.forward(&x, true);
    }
    for label in ["infer", "train"] {
        let train = label == "train";
        let t0 = Instant::now();
        for _ in 0..20 {
            let y = conv.forward(&x, train);
            std::hint::black_box(&y);
        }
        println!("forward({label}): {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / 20.0);
    }
    let y = conv.forward(&x, true);
    let t0 = Instant::now();
    for _ in 0..20 {
        let _ = conv.forward(&x, true);
        let gx = conv.backward(&y);
        std::hint::black_box(&gx);
    }
    println!("forward+backward: {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / 20.0);
}
