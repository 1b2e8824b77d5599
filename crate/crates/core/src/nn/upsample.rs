//! Nearest-neighbour 2x upsampling (parameter-free).

use ndarray::Array4;

use super::scalar::Scalar;

pub fn upsample2x_nearest<S: Scalar>(x: &Array4<S>) -> Array4<S> {
    let (b, c, h, w) = x.dim();
    let mut y = Array4::<S>::zeros((b, c, h * 2, w * 2));
    for bi in 0..b {
        for ci in 0..c {
            for yi in 0..h {
                for xi in 0..w {
                    let v = x[(bi, ci, yi, xi)];
                    y[(bi, ci, 2 * yi, 2 * xi)] = v;
                    y[(bi, ci, 2 * yi, 2 * xi + 1)] = v;
                    y[(bi, ci, 2 * yi + 1, 2 * xi)] = v;
                    y[(bi, ci, 2 * yi + 1, 2 * xi + 1)] = v;
                }
            }
        }
    }
    y
}

pub fn upsample2x_nearest_backward<S: Scalar>(gy: &Array4<S>) -> Array4<S> {
    let (b, c, h2, w2) = gy.dim();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut gx = Array4::<S>::zeros((b, c, h, w));
    for bi in 0..b {
        for ci in 0..c {
            for yi in 0..h {
                for xi in 0..w {
                    gx[(bi, ci, yi, xi)] = gy[(bi, ci, 2 * yi, 2 * xi)]
                        + gy[(bi, ci, 2 * yi, 2 * xi + 1)]
                        + gy[(bi, ci, 2 * yi + 1, 2 * xi)]
                        + gy[(bi, ci, 2 * yi + 1, 2 * xi + 1)];
                }
            }
        }
    }
    gx
}
