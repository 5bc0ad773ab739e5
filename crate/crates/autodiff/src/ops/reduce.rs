use crate::elem::Elem;
use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::Result;

/// Decomposes `shape` around `axis` into (outer, len, inner) so that the
/// flat index of element (o, a, i) is `(o * len + a) * inner + i`.
pub(crate) fn axis_strides(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, len, inner)
}

impl<T: Elem> Tensor<T> {
    fn check_axis(&self, axis: usize, op: &'static str) -> Result<()> {
        if axis >= self.shape().len() {
            return Err(TensorError::InvalidAxis { op, axis, rank: self.shape().len() });
        }
        Ok(())
    }

    /// Maximum along `axis` (axis removed). Gradient flows to the first
    /// maximal element along the axis, making backward deterministic under
    /// ties.
    pub fn max_over(&self, axis: usize) -> Result<Tensor<T>> {
        self.check_axis(axis, "max_over")?;
        let shape = self.shape().to_vec();
        let (outer, len, inner) = axis_strides(&shape, axis);
        if len == 0 {
            return Err(TensorError::EmptyInput { op: "max_over" });
        }
        let mut out = vec![T::zero(); outer * inner];
        let mut argmax = vec![0u32; outer * inner];
        {
            let x = self.data();
            for o in 0..outer {
                for i in 0..inner {
                    let mut best = x[(o * len) * inner + i];
                    let mut best_a = 0u32;
                    for a in 1..len {
                        let v = x[(o * len + a) * inner + i];
                        if v > best {
                            best = v;
                            best_a = a as u32;
                        }
                    }
                    out[o * inner + i] = best;
                    argmax[o * inner + i] = best_a;
                }
            }
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let numel = self.numel();
        Ok(Tensor::from_op(
            out_shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![T::zero(); numel];
                for o in 0..outer {
                    for i in 0..inner {
                        let a = argmax[o * inner + i] as usize;
                        dx[(o * len + a) * inner + i] = g[o * inner + i];
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Mean along `axis` (axis removed).
    pub fn mean_over(&self, axis: usize) -> Result<Tensor<T>> {
        self.check_axis(axis, "mean_over")?;
        let shape = self.shape().to_vec();
        let (outer, len, inner) = axis_strides(&shape, axis);
        if len == 0 {
            return Err(TensorError::EmptyInput { op: "mean_over" });
        }
        let inv = T::one() / T::from_usize(len);
        let mut out = vec![T::zero(); outer * inner];
        {
            let x = self.data();
            for o in 0..outer {
                for a in 0..len {
                    let base = (o * len + a) * inner;
                    let row = &x[base..base + inner];
                    let acc = &mut out[o * inner..(o + 1) * inner];
                    for (s, &v) in acc.iter_mut().zip(row) {
                        *s = *s + v;
                    }
                }
            }
            for s in out.iter_mut() {
                *s = *s * inv;
            }
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let numel = self.numel();
        Ok(Tensor::from_op(
            out_shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![T::zero(); numel];
                for o in 0..outer {
                    for a in 0..len {
                        let base = (o * len + a) * inner;
                        for i in 0..inner {
                            dx[base + i] = g[o * inner + i] * inv;
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Sum of all elements (scalar).
    pub fn sum_all(&self) -> Tensor<T> {
        let total: T = self.data().iter().copied().sum();
        let numel = self.numel();
        Tensor::from_op(
            vec![1],
            vec![total],
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0]; numel])]),
        )
    }

    /// Mean of all elements (scalar).
    pub fn mean_all(&self) -> Tensor<T> {
        let numel = self.numel();
        let inv = T::one() / T::from_usize(numel.max(1));
        self.sum_all().scalar_mul(inv)
    }
}
