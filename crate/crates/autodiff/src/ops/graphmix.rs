use crate::elem::Elem;
use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::Result;

/// Sum in ascending value order: the result depends only on the multiset
/// of terms, not their initial arrangement.
fn sorted_sum<T: Elem>(terms: &mut [T]) -> T {
    terms.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    let mut acc = T::zero();
    for &t in terms.iter() {
        acc = acc + t;
    }
    acc
}

impl<T: Elem> Tensor<T> {
    /// Per-pixel foreground/background blend of a feature map stack.
    ///
    /// `self` is (frames x channels x h x w), `mask` is (frames x h x w)
    /// with 0/1 entries, `gamma` is a one-element tensor. Output pixel
    /// value is `gamma * f * m + (1 - gamma) * f * (1 - m)`; the result is
    /// differentiable in both the feature map and gamma.
    pub fn regional_blend(&self, mask: &Tensor<T>, gamma: &Tensor<T>) -> Result<Tensor<T>> {
        let fs = self.shape().to_vec();
        if fs.len() != 4 {
            return Err(TensorError::shape("regional_blend", "rank-4 features", &fs));
        }
        let (frames, channels, h, w) = (fs[0], fs[1], fs[2], fs[3]);
        if mask.shape() != [frames, h, w] {
            return Err(TensorError::shape("regional_blend", [frames, h, w], mask.shape()));
        }
        if gamma.numel() != 1 {
            return Err(TensorError::shape("regional_blend", 1usize, gamma.numel()));
        }
        let plane = h * w;
        let gamma_v = gamma.data()[0];
        let inv_gamma = T::one() - gamma_v;

        let mut out = vec![T::zero(); self.numel()];
        {
            let f = self.data();
            let m = mask.data();
            for fr in 0..frames {
                let mplane = &m[fr * plane..(fr + 1) * plane];
                for c in 0..channels {
                    let base = (fr * channels + c) * plane;
                    for p in 0..plane {
                        let mv = mplane[p];
                        let weight = gamma_v * mv + inv_gamma * (T::one() - mv);
                        out[base + p] = f[base + p] * weight;
                    }
                }
            }
        }

        let f_t = self.clone();
        let m_t = mask.clone();
        let f_needs = self.needs_grad();
        let g_needs = gamma.needs_grad();
        let numel = self.numel();
        Ok(Tensor::from_op(
            fs,
            out,
            vec![self.clone(), mask.clone(), gamma.clone()],
            Box::new(move |g| {
                let m = m_t.data();
                let df = f_needs.then(|| {
                    let mut df = vec![T::zero(); numel];
                    for fr in 0..frames {
                        let mplane = &m[fr * plane..(fr + 1) * plane];
                        for c in 0..channels {
                            let base = (fr * channels + c) * plane;
                            for p in 0..plane {
                                let mv = mplane[p];
                                let weight = gamma_v * mv + inv_gamma * (T::one() - mv);
                                df[base + p] = g[base + p] * weight;
                            }
                        }
                    }
                    df
                });
                let dgamma = g_needs.then(|| {
                    let f = f_t.data();
                    let mut acc = T::zero();
                    for fr in 0..frames {
                        let mplane = &m[fr * plane..(fr + 1) * plane];
                        for c in 0..channels {
                            let base = (fr * channels + c) * plane;
                            for p in 0..plane {
                                let sign = mplane[p] + mplane[p] - T::one(); // 2m - 1
                                acc = acc + g[base + p] * f[base + p] * sign;
                            }
                        }
                    }
                    vec![acc]
                });
                vec![df, None, dgamma]
            }),
        ))
    }

    /// Mixes node features with a constant matrix: for every leading index
    /// `f`, `out[f] = mix * x[f]` where `self` is (frames x nodes x dim) and
    /// `mix` is (nodes x nodes). Used for normalized-adjacency propagation.
    ///
    /// Each output element sums its product terms in value-sorted order, so
    /// relabeling nodes with a permutation P maps the output bitwise to its
    /// permutation (the term multiset is permutation-invariant). Node counts
    /// are small, so the sort is cheap.
    pub fn node_mix(&self, mix: &Tensor<T>) -> Result<Tensor<T>> {
        let xs = self.shape().to_vec();
        if xs.len() != 3 {
            return Err(TensorError::shape("node_mix", "rank-3 node features", &xs));
        }
        let (frames, nodes, dim) = (xs[0], xs[1], xs[2]);
        if mix.shape() != [nodes, nodes] {
            return Err(TensorError::shape("node_mix", [nodes, nodes], mix.shape()));
        }
        let mut out = vec![T::zero(); self.numel()];
        {
            let x = self.data();
            let a = mix.data();
            let mut terms = vec![T::zero(); nodes];
            for f in 0..frames {
                let xf = &x[f * nodes * dim..(f + 1) * nodes * dim];
                let of = &mut out[f * nodes * dim..(f + 1) * nodes * dim];
                for i in 0..nodes {
                    for d in 0..dim {
                        for (j, t) in terms.iter_mut().enumerate() {
                            *t = a[i * nodes + j] * xf[j * dim + d];
                        }
                        of[i * dim + d] = sorted_sum(&mut terms);
                    }
                }
            }
        }

        let mix_t = mix.clone();
        let numel = self.numel();
        Ok(Tensor::from_op(
            xs,
            out,
            vec![self.clone(), mix.clone()],
            Box::new(move |g| {
                let a = mix_t.data();
                let mut dx = vec![T::zero(); numel];
                let mut terms = vec![T::zero(); nodes];
                for f in 0..frames {
                    let gf = &g[f * nodes * dim..(f + 1) * nodes * dim];
                    let df = &mut dx[f * nodes * dim..(f + 1) * nodes * dim];
                    for j in 0..nodes {
                        for d in 0..dim {
                            for (i, t) in terms.iter_mut().enumerate() {
                                *t = a[i * nodes + j] * gf[i * dim + d];
                            }
                            df[j * dim + d] = sorted_sum(&mut terms);
                        }
                    }
                }
                vec![Some(dx), None]
            }),
        ))
    }
}
