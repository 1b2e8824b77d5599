use ndarray::Array2;
use std::time::Instant;

fn main() {
    // alloc+zero+drop churn at im2col sizes
    let t0 = Instant::now();
    let mut sink = 0.0f32;
    for i in 0..20 {
        let mut a = Array2::<f32>::zeros((216, 16384));
        a[(i % 216, i % 16384)] = i as f32;
        sink += a[(0, 0)] + a[(215, 16383)];
        drop(a);
    }
    println!("alloc+zero 14MB x20: {:.2} ms each, sink {sink}", t0.elapsed().as_secs_f64() * 1e3 / 20.0);

    // touch every element after zeros (first-write page faults)
    let t0 = Instant::now();
    for _ in 0..20 {
        let mut a = Array2::<f32>::zeros((216, 16384));
        a.mapv_inplace(|v| v + 1.0);
        sink += a[(10, 10)];
    }
    println!("alloc+zero+fill x20: {:.2} ms each, sink {sink}", t0.elapsed().as_secs_f64() * 1e3 / 20.0);

    // reuse buffer fill
    let mut a = Array2::<f32>::zeros((216, 16384));
    let t0 = Instant::now();
    for _ in 0..20 {
        a.mapv_inplace(|v| v + 1.0);
    }
    println!("reused fill x20: {:.2} ms each, sink {}", t0.elapsed().as_secs_f64() * 1e3 / 20.0, a[(0,0)]);
}
