use ndarray::{Array3, Array4, Axis};
use ndarray::linalg::general_mat_mul;
use std::time::Instant;
use threemti_core::nn::{rng_from_seed, Scalar};

// copy of the im2col hot loop for isolated timing
fn im2col_probe(img: &ndarray::ArrayView3<f32>, k: usize, stride: usize, pad: usize, ho: usize, wo: usize) -> ndarray::Array2<f32> {
    let (c, h, w) = img.dim();
    let mut cols = ndarray::Array2::<f32>::zeros((c * k * k, ho * wo));
    let img_slice = img.as_slice().expect("contiguous image");
    let cols_slice = cols.as_slice_mut().expect("contiguous cols");
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k * k + ky * k + kx) * (ho * wo);
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    let out_base = row + oy * wo;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
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
    let x = Array4::from_shape_simple_fn((4, 24, 128, 128), || f32::standard_normal(&mut rng));
    let img = x.index_axis(Axis(0), 0);
    // warm
    let c0 = im2col_probe(&img, 3, 1, 1, 128, 128);
    let t0 = Instant::now();
    for _ in 0..20 {
        let c = im2col_probe(&img, 3, 1, 1, 128, 128);
        std::hint::black_box(&c);
    }
    println!("im2col (24,128,128): {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / 20.0);

    let w2 = ndarray::Array2::<f32>::from_elem((12, 216), 0.01);
    let mut y2 = ndarray::Array2::<f32>::zeros((12, 128 * 128));
    let t0 = Instant::now();
    for _ in 0..20 {
        general_mat_mul(1.0, &w2, &c0, 0.0, &mut y2);
    }
    println!("gemm 12x216x16384: {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / 20.0);

    // col2im-ish scatter
    let mut acc = Array3::<f32>::zeros((24, 128, 128));
    let d = c0.as_slice().unwrap();
    let t0 = Instant::now();
    for _ in 0..10 {
        let a = acc.as_slice_mut().unwrap();
        let (c, h, w, k, ho, wo, pad, stride) = (24usize, 128usize, 128usize, 3usize, 128usize, 128usize, 1usize, 1usize);
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k * k + ky * k + kx) * (ho * wo);
                    for oy in 0..ho {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize { continue; }
                        let in_base = ci * h * w + iy as usize * w;
                        let out_base = row + oy * wo;
                        for ox in 0..wo {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                a[in_base + ix as usize] += d[out_base + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    println!("col2im scatter: {:.2} ms", t0.elapsed().as_secs_f64() * 1e3 / 10.0);
}
