use rayon::prelude::*;

use super::matmul::{gemm_nn, gemm_nt, gemm_tn};
use crate::elem::Elem;
use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::Result;

#[derive(Clone, Copy)]
struct ConvDims {
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvDims {
    fn in_frame(&self) -> usize {
        self.c_in * self.h * self.w
    }
    fn out_frame(&self) -> usize {
        self.c_out * self.oh * self.ow
    }
    fn col_rows(&self) -> usize {
        self.c_in * self.k * self.k
    }
    fn out_spatial(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfolds one padded frame into a (c_in*k*k) x (oh*ow) column matrix.
/// Stride-1 rows are contiguous input windows, copied wholesale.
fn im2col<T: Elem>(frame: &[T], d: &ConvDims, cols: &mut [T]) {
    let osp = d.out_spatial();
    for c in 0..d.c_in {
        let plane = &frame[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ki in 0..d.k {
            for kj in 0..d.k {
                let row = &mut cols[(c * d.k * d.k + ki * d.k + kj) * osp..][..osp];
                for oy in 0..d.oh {
                    let iy = (oy * d.stride + ki) as isize - d.pad as isize;
                    let dst = &mut row[oy * d.ow..(oy + 1) * d.ow];
                    if iy < 0 || iy >= d.h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    if d.stride == 1 {
                        // Valid ox range: pad - kj <= ox < w + pad - kj.
                        let lo = d.pad.saturating_sub(kj).min(d.ow);
                        let hi = (d.w + d.pad - kj).min(d.ow).max(lo);
                        dst[..lo].fill(T::zero());
                        dst[hi..].fill(T::zero());
                        let src_start = lo + kj - d.pad;
                        dst[lo..hi].copy_from_slice(&src[src_start..src_start + (hi - lo)]);
                    } else {
                        for (ox, v) in dst.iter_mut().enumerate() {
                            let ix = (ox * d.stride + kj) as isize - d.pad as isize;
                            *v = if ix < 0 || ix >= d.w as isize {
                                T::zero()
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of `im2col`: scatter-adds column gradients back onto the frame.
fn col2im<T: Elem>(cols: &[T], d: &ConvDims, frame: &mut [T]) {
    let osp = d.out_spatial();
    for c in 0..d.c_in {
        let plane = &mut frame[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ki in 0..d.k {
            for kj in 0..d.k {
                let row = &cols[(c * d.k * d.k + ki * d.k + kj) * osp..][..osp];
                for oy in 0..d.oh {
                    let iy = (oy * d.stride + ki) as isize - d.pad as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    let src = &row[oy * d.ow..(oy + 1) * d.ow];
                    if d.stride == 1 {
                        let lo = d.pad.saturating_sub(kj).min(d.ow);
                        let hi = (d.w + d.pad - kj).min(d.ow).max(lo);
                        let dst_start = lo + kj - d.pad;
                        let dst_win = &mut dst_row[dst_start..dst_start + (hi - lo)];
                        for (dv, &sv) in dst_win.iter_mut().zip(&src[lo..hi]) {
                            *dv = *dv + sv;
                        }
                    } else {
                        for (ox, &v) in src.iter().enumerate() {
                            let ix = (ox * d.stride + kj) as isize - d.pad as isize;
                            if ix >= 0 && ix < d.w as isize {
                                dst_row[ix as usize] = dst_row[ix as usize] + v;
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<T: Elem> Tensor<T> {
    /// 2-D cross-correlation of a B x C_in x H x W input with a
    /// C_out x C_in x k x k kernel. Output spatial size is
    /// floor((H + 2*pad - k)/stride) + 1 per dimension.
    pub fn conv2d(&self, weight: &Tensor<T>, stride: usize, padding: usize) -> Result<Tensor<T>> {
        let (si, sw) = (self.shape(), weight.shape());
        if si.len() != 4 || sw.len() != 4 {
            return Err(TensorError::shape("conv2d", "rank-4 input and weight", (si, sw)));
        }
        if si[1] != sw[1] {
            return Err(TensorError::shape("conv2d", si[1], sw[1]));
        }
        if sw[2] != sw[3] {
            return Err(TensorError::invalid("conv2d", "kernel must be square"));
        }
        if stride == 0 {
            return Err(TensorError::invalid("conv2d", "stride must be >= 1"));
        }
        let (batch, c_in, h, w) = (si[0], si[1], si[2], si[3]);
        let (c_out, k) = (sw[0], sw[2]);
        if h + 2 * padding < k || w + 2 * padding < k {
            return Err(TensorError::invalid(
                "conv2d",
                format!("kernel {k} does not fit padded input {h}x{w} (pad {padding})"),
            ));
        }
        let oh = (h + 2 * padding - k) / stride + 1;
        let ow = (w + 2 * padding - k) / stride + 1;
        let d = ConvDims { batch, c_in, h, w, c_out, k, stride, pad: padding, oh, ow };

        let mut out = vec![T::zero(); batch * d.out_frame()];
        {
            let input_ref = self.data();
            let weight_ref = weight.data();
            let input: &[T] = &input_ref;
            let wdata: &[T] = &weight_ref;
            out.par_chunks_mut(d.out_frame()).enumerate().for_each(|(b, out_b)| {
                let mut cols = vec![T::zero(); d.col_rows() * d.out_spatial()];
                im2col(&input[b * d.in_frame()..(b + 1) * d.in_frame()], &d, &mut cols);
                gemm_nn(d.c_out, d.col_rows(), d.out_spatial(), wdata, &cols, out_b);
            });
        }

        let input_t = self.clone();
        let weight_t = weight.clone();
        let input_needs = self.needs_grad();
        let weight_needs = weight.needs_grad();
        Ok(Tensor::from_op(
            vec![batch, c_out, oh, ow],
            out,
            vec![self.clone(), weight.clone()],
            Box::new(move |g| {
                let input_ref = input_t.data();
                let weight_ref = weight_t.data();
                let input: &[T] = &input_ref;
                let wdata: &[T] = &weight_ref;
                let osp = d.out_spatial();

                // Weight gradient: per-frame partials, combined in frame order.
                let dw = weight_needs.then(|| {
                    let partials: Vec<Vec<T>> = (0..d.batch)
                        .into_par_iter()
                        .map(|b| {
                            let mut cols = vec![T::zero(); d.col_rows() * osp];
                            im2col(&input[b * d.in_frame()..(b + 1) * d.in_frame()], &d, &mut cols);
                            let mut dw_b = vec![T::zero(); d.c_out * d.col_rows()];
                            gemm_nt(
                                d.c_out,
                                osp,
                                d.col_rows(),
                                &g[b * d.out_frame()..(b + 1) * d.out_frame()],
                                &cols,
                                &mut dw_b,
                            );
                            dw_b
                        })
                        .collect();
                    let mut dw = vec![T::zero(); d.c_out * d.col_rows()];
                    for p in &partials {
                        for (acc, &v) in dw.iter_mut().zip(p) {
                            *acc = *acc + v;
                        }
                    }
                    dw
                });

                let dx = input_needs.then(|| {
                    let mut dx = vec![T::zero(); d.batch * d.in_frame()];
                    dx.par_chunks_mut(d.in_frame()).enumerate().for_each(|(b, dx_b)| {
                        let mut dcols = vec![T::zero(); d.col_rows() * osp];
                        gemm_tn(
                            d.col_rows(),
                            d.c_out,
                            osp,
                            wdata,
                            &g[b * d.out_frame()..(b + 1) * d.out_frame()],
                            &mut dcols,
                        );
                        col2im(&dcols, &d, dx_b);
                    });
                    dx
                });

                vec![dx, dw]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct six-loop convolution used as the reference.
    fn naive_conv(
        input: &[f64],
        weight: &[f64],
        b: usize,
        cin: usize,
        h: usize,
        w: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Vec<f64> {
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        let mut out = vec![0.0; b * cout * oh * ow];
        for bi in 0..b {
            for co in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for ci in 0..cin {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    acc += input
                                        [((bi * cin + ci) * h + iy as usize) * w + ix as usize]
                                        * weight[((co * cin + ci) * k + ky) * k + kx];
                                }
                            }
                        }
                        out[((bi * cout + co) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let x = Tensor::<f64>::from_vec(vec![1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let w = Tensor::<f64>::from_vec(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let y = x.conv2d(&w, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn zero_weight_gives_zero_output_and_zero_input_grad() {
        let x = Tensor::<f64>::param(vec![1, 2, 4, 4], vec![0.5; 32]).unwrap();
        let w = Tensor::<f64>::param(vec![3, 2, 3, 3], vec![0.0; 54]).unwrap();
        let y = x.conv2d(&w, 1, 1).unwrap();
        assert!(y.to_vec().iter().all(|&v| v == 0.0));
        y.sum_all().backward().unwrap();
        assert!(x.grad().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_case_matches_naive_reference() {
        let mut seed = 42u64;
        let input: Vec<f64> = (0..1 * 2 * 4 * 4).map(|_| lcg(&mut seed)).collect();
        let weight: Vec<f64> = (0..3 * 2 * 3 * 3).map(|_| lcg(&mut seed)).collect();
        let x = Tensor::from_vec(vec![1, 2, 4, 4], input.clone()).unwrap();
        let w = Tensor::from_vec(vec![3, 2, 3, 3], weight.clone()).unwrap();
        let y = x.conv2d(&w, 1, 1).unwrap();
        let want = naive_conv(&input, &weight, 1, 2, 4, 4, 3, 3, 1, 1);
        assert_eq!(y.shape(), &[1, 3, 4, 4]);
        for (a, b) in y.to_vec().iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn strided_output_shape_follows_floor_arithmetic() {
        let x = Tensor::<f32>::zeros(vec![2, 3, 64, 44]);
        let w = Tensor::<f32>::zeros(vec![8, 3, 3, 3]);
        let y = x.conv2d(&w, 2, 1).unwrap();
        assert_eq!(y.shape(), &[2, 8, 32, 22]);
        let y2 = y.conv2d(&Tensor::zeros(vec![4, 8, 3, 3]), 2, 1).unwrap();
        assert_eq!(y2.shape(), &[2, 4, 16, 11]);
    }

    #[test]
    fn channel_mismatch_is_error() {
        let x = Tensor::<f32>::zeros(vec![1, 3, 8, 8]);
        let w = Tensor::<f32>::zeros(vec![4, 2, 3, 3]);
        assert!(x.conv2d(&w, 1, 1).is_err());
    }
}
