use crate::elem::Elem;
use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::Result;

impl<T: Elem> Tensor<T> {
    /// Same data, new shape (element count must match).
    pub fn reshape(&self, new_shape: impl Into<Vec<usize>>) -> Result<Tensor<T>> {
        let new_shape = new_shape.into();
        let numel: usize = new_shape.iter().product();
        if numel != self.numel() {
            return Err(TensorError::shape("reshape", &new_shape, self.shape()));
        }
        Ok(Tensor::from_op(
            new_shape,
            self.to_vec(),
            vec![self.clone()],
            Box::new(|g| vec![Some(g.to_vec())]),
        ))
    }

    /// Contiguous sub-tensor of `len` entries starting at `start` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis { op: "narrow", axis, rank: shape.len() });
        }
        if start + len > shape[axis] || len == 0 {
            return Err(TensorError::invalid(
                "narrow",
                format!("range {start}..{} out of bounds for axis size {}", start + len, shape[axis]),
            ));
        }
        let (outer, alen, inner) = super::axis_strides(&shape, axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        {
            let x = self.data();
            for o in 0..outer {
                let base = (o * alen + start) * inner;
                out.extend_from_slice(&x[base..base + len * inner]);
            }
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let numel = self.numel();
        Ok(Tensor::from_op(
            out_shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut dx = vec![T::zero(); numel];
                for o in 0..outer {
                    let src = o * len * inner;
                    let dst = (o * alen + start) * inner;
                    dx[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Concatenates tensors along `axis`. All other dimensions must agree.
    pub fn concat(tensors: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        if tensors.is_empty() {
            return Err(TensorError::EmptyInput { op: "concat" });
        }
        let first = tensors[0].shape().to_vec();
        if axis >= first.len() {
            return Err(TensorError::InvalidAxis { op: "concat", axis, rank: first.len() });
        }
        let mut axis_total = 0usize;
        for t in tensors {
            let s = t.shape();
            if s.len() != first.len()
                || s[..axis] != first[..axis]
                || s[axis + 1..] != first[axis + 1..]
            {
                return Err(TensorError::shape("concat", &first, s));
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;

        let (outer, _, inner) = super::axis_strides(&out_shape, axis);
        let mut out = vec![T::zero(); outer * axis_total * inner];
        let mut offset = 0usize;
        let mut segments = Vec::with_capacity(tensors.len());
        for t in tensors {
            let alen = t.shape()[axis];
            let x = t.data();
            for o in 0..outer {
                let src = o * alen * inner;
                let dst = (o * axis_total + offset) * inner;
                out[dst..dst + alen * inner].copy_from_slice(&x[src..src + alen * inner]);
            }
            segments.push((offset, alen));
            offset += alen;
        }

        let parents: Vec<Tensor<T>> = tensors.iter().map(|t| (*t).clone()).collect();
        Ok(Tensor::from_op(
            out_shape,
            out,
            parents,
            Box::new(move |g| {
                segments
                    .iter()
                    .map(|&(off, alen)| {
                        let mut dx = vec![T::zero(); outer * alen * inner];
                        for o in 0..outer {
                            let src = (o * axis_total + off) * inner;
                            let dst = o * alen * inner;
                            dx[dst..dst + alen * inner]
                                .copy_from_slice(&g[src..src + alen * inner]);
                        }
                        Some(dx)
                    })
                    .collect()
            }),
        ))
    }
}
