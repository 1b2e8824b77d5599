use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array4, Axis};
use rayon::prelude::*;
use std::time::Instant;
use threemti_core::nn::{rng_from_seed, Scalar};

fn main() {
    unsafe { libc::mallopt(libc::M_MMAP_THRESHOLD, 64 * 1024 * 1024); libc::mallopt(-1 /* M_TRIM_THRESHOLD */, 512 * 1024 * 1024); }
    let mut rng = rng_from_seed(1);
    let (b, cin, cout, hw, k) = (4usize, 24usize, 12usize, 128usize, 3usize);
    let ckk = cin * k * k;
    let l = hw * hw;
    let x = Array4::from_shape_simple_fn((b, cin, hw, hw), || f32::standard_normal(&mut rng));
    let gy = Array4::from_shape_simple_fn((b, cout, hw, hw), || f32::standard_normal(&mut rng));
    let cols: Vec<Array2<f32>> = (0..b).map(|_| Array2::from_elem((ckk, l), 0.5f32)).collect();
    let w2t = Array2::<f32>::from_elem((ckk, cout), 0.01);
    let _ = &x;

    for _ in 0..3 {
        // phase 1: dcols gemms only
        let t0 = Instant::now();
        let dcols_all: Vec<Array2<f32>> = (0..b)
            .into_par_iter()
            .map(|bi| {
                let gy2 = gy.index_axis(Axis(0), bi).into_shape_with_order((cout, l)).unwrap();
                let mut dcols = Array2::<f32>::zeros((ckk, l));
                general_mat_mul(1.0, &w2t, &gy2, 0.0, &mut dcols);
                dcols
            })
            .collect();
        let t_dcols = t0.elapsed().as_secs_f64() * 1e3;

        // phase 2: col2im
        let t0 = Instant::now();
        let mut gx = Array4::<f32>::zeros((b, cin, hw, hw));
        gx.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(bi, mut gxi)| {
            let d = dcols_all[bi].as_slice().unwrap();
            let a = gxi.as_slice_mut().unwrap();
            for ci in 0..cin {
                for ky in 0..k {
                    for kx in 0..k {
                        let row = (ci * k * k + ky * k + kx) * l;
                        for oy in 0..hw {
                            let iy = (oy + ky) as isize - 1;
                            if iy < 0 || iy >= hw as isize { continue; }
                            let in_base = ci * hw * hw + iy as usize * hw;
                            let out_base = row + oy * hw;
                            for ox in 0..hw {
                                let ix = (ox + kx) as isize - 1;
                                if ix >= 0 && ix < hw as isize {
                                    a[in_base + ix as usize] += d[out_base + ox];
                                }
                            }
                        }
                    }
                }
            }
        });
        let t_col2im = t0.elapsed().as_secs_f64() * 1e3;

        // phase 3: dW gemms
        let t0 = Instant::now();
        let dws: Vec<Array2<f32>> = (0..b)
            .into_par_iter()
            .map(|bi| {
                let gy2 = gy.index_axis(Axis(0), bi).into_shape_with_order((cout, l)).unwrap();
                let mut gy2t = Array2::<f32>::zeros((l, cout));
                gy2t.assign(&gy2.t());
                let mut dwt = Array2::<f32>::zeros((ckk, cout));
                general_mat_mul(1.0, &cols[bi], &gy2t, 0.0, &mut dwt);
                let mut dw = Array2::<f32>::zeros((cout, ckk));
                dw.assign(&dwt.t());
                dw
            })
            .collect();
        let t_dw = t0.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(&gx);
        std::hint::black_box(&dws);
        println!("dcols {t_dcols:.2} ms | col2im {t_col2im:.2} ms | dw {t_dw:.2} ms");
    }
}
