use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use std::time::Instant;

fn main() {
    for (m, k, n) in [
        (512usize, 512usize, 512usize),
        (12, 216, 16384),
        (32, 288, 16384),
        (64, 576, 4096),
        (128, 1152, 1024),
        (216, 12, 16384),
    ] {
        let a = Array2::<f32>::from_elem((m, k), 1.01);
        let b = Array2::<f32>::from_elem((k, n), 0.99);
        let mut c = Array2::<f32>::zeros((m, n));
        // warmup
        general_mat_mul(1.0, &a, &b, 0.0, &mut c);
        let iters = 10;
        let t0 = Instant::now();
        for _ in 0..iters {
            general_mat_mul(1.0, &a, &b, 0.0, &mut c);
        }
        let dt = t0.elapsed().as_secs_f64() / iters as f64;
        let gflops = 2.0 * (m * k * n) as f64 / dt / 1e9;
        println!("gemm {m}x{k}x{n}: {:.2} ms, {gflops:.1} GFLOPS", dt * 1e3);
    }
}
