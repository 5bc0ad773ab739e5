use std::cell::RefCell;
use std::rc::Rc;

use crate::elem::Elem;
use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::Result;

/// Running first/second moments of a batch-norm layer. Shared with the
/// owning layer; updated in place during training-mode forwards.
pub struct RunningStats<T: Elem> {
    pub mean: Rc<RefCell<Vec<T>>>,
    pub var: Rc<RefCell<Vec<T>>>,
}

impl<T: Elem> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: Rc::new(RefCell::new(vec![T::zero(); channels])),
            var: Rc::new(RefCell::new(vec![T::one(); channels])),
        }
    }
}

/// Sum of squared deviations from `mean`, lane-accumulated.
#[inline]
fn sq_dev_lanes<T: Elem>(xs: &[T], mean: T) -> T {
    const LANES: usize = 8;
    let chunks = xs.len() / LANES;
    let mut acc = [T::zero(); LANES];
    for c in 0..chunks {
        let xv = &xs[c * LANES..(c + 1) * LANES];
        for l in 0..LANES {
            let d = xv[l] - mean;
            acc[l] = acc[l] + d * d;
        }
    }
    let mut total = T::zero();
    for &v in &xs[chunks * LANES..] {
        let d = v - mean;
        total = total + d * d;
    }
    for l in 0..LANES {
        total = total + acc[l];
    }
    total
}

impl<T: Elem> Clone for RunningStats<T> {
    fn clone(&self) -> Self {
        RunningStats { mean: Rc::clone(&self.mean), var: Rc::clone(&self.var) }
    }
}

impl<T: Elem> Tensor<T> {
    /// Batch normalization over axis 1 of a rank >= 2 tensor.
    ///
    /// Training mode normalizes with per-channel batch statistics and
    /// updates `running` in place (momentum-weighted, unbiased variance);
    /// eval mode normalizes with the running statistics.
    pub fn batch_norm(
        &self,
        gamma: &Tensor<T>,
        beta: &Tensor<T>,
        running: &RunningStats<T>,
        training: bool,
        momentum: T,
        eps: T,
    ) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if shape.len() < 2 {
            return Err(TensorError::shape("batch_norm", "rank >= 2", &shape));
        }
        let (batch, channels) = (shape[0], shape[1]);
        let spatial: usize = shape[2..].iter().product();
        if gamma.numel() != channels || beta.numel() != channels {
            return Err(TensorError::shape("batch_norm", channels, (gamma.numel(), beta.numel())));
        }
        let n = batch * spatial;
        if training && n == 0 {
            return Err(TensorError::EmptyInput { op: "batch_norm" });
        }

        let (mean, invstd): (Vec<T>, Vec<T>) = if training {
            let x = self.data();
            let mut mean = vec![T::zero(); channels];
            let mut var = vec![T::zero(); channels];
            let n_t = T::from_usize(n);
            for c in 0..channels {
                let mut acc = T::zero();
                for b in 0..batch {
                    let base = (b * channels + c) * spatial;
                    acc = acc + super::matmul::sum_lanes(&x[base..base + spatial]);
                }
                mean[c] = acc / n_t;
                let mut sq = T::zero();
                for b in 0..batch {
                    let base = (b * channels + c) * spatial;
                    sq = sq + sq_dev_lanes(&x[base..base + spatial], mean[c]);
                }
                var[c] = sq / n_t;
            }
            {
                let mut rm = running.mean.borrow_mut();
                let mut rv = running.var.borrow_mut();
                let keep = T::one() - momentum;
                let unbias = if n > 1 {
                    T::from_usize(n) / T::from_usize(n - 1)
                } else {
                    T::one()
                };
                for c in 0..channels {
                    rm[c] = keep * rm[c] + momentum * mean[c];
                    rv[c] = keep * rv[c] + momentum * var[c] * unbias;
                }
            }
            let invstd = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
            (mean, invstd)
        } else {
            let mean = running.mean.borrow().clone();
            let invstd = running.var.borrow().iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
            (mean, invstd)
        };

        let mut xhat = vec![T::zero(); self.numel()];
        let mut out = vec![T::zero(); self.numel()];
        {
            let x = self.data();
            let g = gamma.data();
            let bt = beta.data();
            for b in 0..batch {
                for c in 0..channels {
                    let base = (b * channels + c) * spatial;
                    for i in 0..spatial {
                        let h = (x[base + i] - mean[c]) * invstd[c];
                        xhat[base + i] = h;
                        out[base + i] = g[c] * h + bt[c];
                    }
                }
            }
        }

        let gamma_t = gamma.clone();
        let input_needs = self.needs_grad();
        let gamma_needs = gamma.needs_grad();
        let beta_needs = beta.needs_grad();
        let numel = self.numel();
        Ok(Tensor::from_op(
            shape,
            out,
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |gout| {
                let gdata = gamma_t.data();
                let n_t = T::from_usize(n);

                // Per-channel reductions of the output gradient.
                let mut sum_g = vec![T::zero(); channels];
                let mut sum_gx = vec![T::zero(); channels];
                for b in 0..batch {
                    for c in 0..channels {
                        let base = (b * channels + c) * spatial;
                        let gs = &gout[base..base + spatial];
                        sum_g[c] = sum_g[c] + super::matmul::sum_lanes(gs);
                        sum_gx[c] =
                            sum_gx[c] + super::matmul::dot_lanes(gs, &xhat[base..base + spatial]);
                    }
                }

                let dx = input_needs.then(|| {
                    let mut dx = vec![T::zero(); numel];
                    for b in 0..batch {
                        for c in 0..channels {
                            let base = (b * channels + c) * spatial;
                            let scale = gdata[c] * invstd[c];
                            for i in 0..spatial {
                                let idx = base + i;
                                let centered = if training {
                                    gout[idx] - sum_g[c] / n_t - xhat[idx] * sum_gx[c] / n_t
                                } else {
                                    gout[idx]
                                };
                                dx[idx] = scale * centered;
                            }
                        }
                    }
                    dx
                });
                let dgamma = gamma_needs.then(|| sum_gx.clone());
                let dbeta = beta_needs.then(|| sum_g.clone());
                vec![dx, dgamma, dbeta]
            }),
        ))
    }

    /// Scales every slice along `axis` to unit L2 norm. Zero slices are
    /// left untouched via a tiny norm floor.
    pub fn l2_normalize(&self, axis: usize) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis { op: "l2_normalize", axis, rank: shape.len() });
        }
        let (outer, len, inner) = super::axis_strides(&shape, axis);
        let floor = T::from_f64(1e-12);
        let mut norms = vec![T::zero(); outer * inner];
        let mut out = vec![T::zero(); self.numel()];
        {
            let x = self.data();
            for o in 0..outer {
                for i in 0..inner {
                    let mut acc = T::zero();
                    for a in 0..len {
                        let v = x[(o * len + a) * inner + i];
                        acc = acc + v * v;
                    }
                    let norm = acc.sqrt().max(floor);
                    norms[o * inner + i] = norm;
                    for a in 0..len {
                        let idx = (o * len + a) * inner + i;
                        out[idx] = x[idx] / norm;
                    }
                }
            }
        }
        let out_copy = out.clone();
        let numel = self.numel();
        Ok(Tensor::from_op(
            shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![T::zero(); numel];
                for o in 0..outer {
                    for i in 0..inner {
                        let norm = norms[o * inner + i];
                        let mut dot = T::zero();
                        for a in 0..len {
                            let idx = (o * len + a) * inner + i;
                            dot = dot + g[idx] * out_copy[idx];
                        }
                        for a in 0..len {
                            let idx = (o * len + a) * inner + i;
                            dx[idx] = (g[idx] - out_copy[idx] * dot) / norm;
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }
}
