use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array4, Axis};
use std::time::Instant;
use threemti_core::nn::{rng_from_seed, Scalar};

fn im2col(img: &ndarray::ArrayView3<f32>, k: usize, stride: usize, pad: usize, ho: usize, wo: usize) -> Array2<f32> {
    let (c, h, w) = img.dim();
    let mut cols = Array2::<f32>::zeros((c * k * k, ho * wo));
    let img_slice = img.as_slice().unwrap();
    let cols_slice = cols.as_slice_mut().unwrap();
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k * k + ky * k + kx) * (ho * wo);
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let out_base = row + oy * wo;
                    if iy < 0 || iy >= h as isize { continue; }
                    let in_base = ci * h * w + iy as usize * w;
                    if stride == 1 {
                        let off = kx as isize - pad as isize;
                        let ox_start = (-off).max(0) as usize;
                        let ox_end = (w as isize - off).min(wo as isize).max(0) as usize;
                        if ox_start < ox_end {
                            let src = in_base + (ox_start as isize + off) as usize;
                            cols_slice[out_base + ox_start..out_base + ox_end]
                                .copy_from_slice(&img_slice[src..src + (ox_end - ox_start)]);
                        }
                    } else {
                        for ox in 0..wo {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                cols_slice[out_base + ox] = img_slice[in_base + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn main() {
    let mut rng = rng_from_seed(1);
    let (b, cin, cout, hw, k) = (4usize, 24usize, 12usize, 128usize, 3usize);
    let x = Array4::from_shape_simple_fn((b, cin, hw, hw), || f32::standard_normal(&mut rng));
    let w2 = Array2::<f32>::from_elem((cout, cin * k * k), 0.01);
    let (ho, wo) = (hw, hw);

    for round in 0..3 {
        let mut t_im2col = 0.0;
        let mut t_gemm = 0.0;
        let mut t_asm = 0.0;
        let iters = 10;
        for _ in 0..iters {
            let mut y = Array4::<f32>::zeros((b, cout, ho, wo));
            let mut colsv = Vec::new();
            for bi in 0..b {
                let t0 = Instant::now();
                let cols = im2col(&x.index_axis(Axis(0), bi), k, 1, 1, ho, wo);
                t_im2col += t0.elapsed().as_secs_f64();
                let t0 = Instant::now();
                let mut y2 = Array2::<f32>::zeros((cout, ho * wo));
                general_mat_mul(1.0, &w2, &cols, 0.0, &mut y2);
                t_gemm += t0.elapsed().as_secs_f64();
                let t0 = Instant::now();
                let y3 = y2.into_shape_with_order((cout, ho, wo)).unwrap();
                y.index_axis_mut(Axis(0), bi).assign(&y3);
                t_asm += t0.elapsed().as_secs_f64();
                colsv.push(cols);
            }
            std::hint::black_box(&y);
            std::hint::black_box(&colsv);
        }
        println!(
            "round {round}: im2col {:.2} ms, gemm {:.2} ms, asm {:.2} ms (per call, b={b})",
            t_im2col * 1e3 / iters as f64,
            t_gemm * 1e3 / iters as f64,
            t_asm * 1e3 / iters as f64
        );
    }
}
