use crate::elem::Elem;
use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::Result;

/// Copies part `p` of a (batch x parts x dim) buffer into a contiguous
/// (batch x dim) block.
fn gather_part<T: Elem>(x: &[T], batch: usize, parts: usize, dim: usize, p: usize) -> Vec<T> {
    let mut rows = vec![T::zero(); batch * dim];
    for i in 0..batch {
        let src = (i * parts + p) * dim;
        rows[i * dim..(i + 1) * dim].copy_from_slice(&x[src..src + dim]);
    }
    rows
}

/// Pairwise euclidean distances between the rows of a (b x d) block.
fn pairwise_dists<T: Elem>(rows: &[T], b: usize, d: usize) -> Vec<T> {
    let mut dist = vec![T::zero(); b * b];
    for i in 0..b {
        for j in (i + 1)..b {
            let ri = &rows[i * d..(i + 1) * d];
            let rj = &rows[j * d..(j + 1) * d];
            let mut acc = T::zero();
            for (&a, &c) in ri.iter().zip(rj) {
                let diff = a - c;
                acc = acc + diff * diff;
            }
            let v = acc.sqrt();
            dist[i * b + j] = v;
            dist[j * b + i] = v;
        }
    }
    dist
}

impl<T: Elem> Tensor<T> {
    /// Mean over the batch of `-log softmax(logits)[target]`, computed with
    /// max-subtraction stabilization. `logits` is (batch x classes).
    pub fn softmax_cross_entropy(&self, targets: &[usize]) -> Result<Tensor<T>> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(TensorError::shape("softmax_cross_entropy", "rank-2 logits", shape));
        }
        let (batch, classes) = (shape[0], shape[1]);
        if batch == 0 {
            return Err(TensorError::EmptyInput { op: "softmax_cross_entropy" });
        }
        if targets.len() != batch {
            return Err(TensorError::shape("softmax_cross_entropy", batch, targets.len()));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(TensorError::TargetOutOfRange {
                op: "softmax_cross_entropy",
                index: bad,
                classes,
            });
        }

        let mut probs = vec![T::zero(); batch * classes];
        let mut loss = T::zero();
        {
            let x = self.data();
            for i in 0..batch {
                let row = &x[i * classes..(i + 1) * classes];
                let m = row.iter().copied().fold(row[0], T::max);
                let mut denom = T::zero();
                for (j, &v) in row.iter().enumerate() {
                    let e = (v - m).exp();
                    probs[i * classes + j] = e;
                    denom = denom + e;
                }
                for p in &mut probs[i * classes..(i + 1) * classes] {
                    *p = *p / denom;
                }
                loss = loss - (row[targets[i]] - m - denom.ln());
            }
        }
        let batch_t = T::from_usize(batch);
        loss = loss / batch_t;

        let targets = targets.to_vec();
        Ok(Tensor::from_op(
            vec![1],
            vec![loss],
            vec![self.clone()],
            Box::new(move |g| {
                let scale = g[0] / batch_t;
                let mut dx = probs.clone();
                for (i, &t) in targets.iter().enumerate() {
                    dx[i * classes + t] = dx[i * classes + t] - T::one();
                }
                for v in &mut dx {
                    *v = *v * scale;
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Batch-all hinge triplet loss on euclidean distances, evaluated
    /// independently per part and averaged over parts.
    ///
    /// `self` is (batch x parts x dim); `labels[i]` is the class of sample
    /// `i`. Within each part, every (anchor, positive, negative) triple
    /// contributes `max(0, d(a,p) - d(a,n) + margin)`; the part loss is the
    /// mean over strictly positive terms (0 when none are active).
    pub fn batch_all_triplet(&self, labels: &[usize], margin: T) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if shape.len() != 3 {
            return Err(TensorError::shape("batch_all_triplet", "rank-3 embeddings", &shape));
        }
        let (batch, parts, dim) = (shape[0], shape[1], shape[2]);
        if labels.len() != batch {
            return Err(TensorError::shape("batch_all_triplet", batch, labels.len()));
        }
        let distinct = {
            let mut ls = labels.to_vec();
            ls.sort_unstable();
            ls.dedup();
            ls.len()
        };
        if distinct < 2 || distinct == batch {
            return Err(TensorError::invalid(
                "batch_all_triplet",
                "batch must contain >= 2 classes and at least one positive pair",
            ));
        }

        let mut total = T::zero();
        {
            let x = self.data();
            for p in 0..parts {
                let rows = gather_part(&x, batch, parts, dim, p);
                let dist = pairwise_dists(&rows, batch, dim);
                let mut sum = T::zero();
                let mut count = 0usize;
                for a in 0..batch {
                    for pos in 0..batch {
                        if pos == a || labels[pos] != labels[a] {
                            continue;
                        }
                        for neg in 0..batch {
                            if labels[neg] == labels[a] {
                                continue;
                            }
                            let h = dist[a * batch + pos] - dist[a * batch + neg] + margin;
                            if h > T::zero() {
                                sum = sum + h;
                                count += 1;
                            }
                        }
                    }
                }
                if count > 0 {
                    total = total + sum / T::from_usize(count);
                }
            }
        }
        let parts_t = T::from_usize(parts);
        total = total / parts_t;

        let labels = labels.to_vec();
        let input = self.clone();
        Ok(Tensor::from_op(
            vec![1],
            vec![total],
            vec![self.clone()],
            Box::new(move |g| {
                let x = input.data();
                let mut dx = vec![T::zero(); batch * parts * dim];
                for p in 0..parts {
                    let rows = gather_part(&x, batch, parts, dim, p);
                    let dist = pairwise_dists(&rows, batch, dim);

                    // First pass: count active triplets for the mean.
                    let mut count = 0usize;
                    for a in 0..batch {
                        for pos in 0..batch {
                            if pos == a || labels[pos] != labels[a] {
                                continue;
                            }
                            for neg in 0..batch {
                                if labels[neg] == labels[a] {
                                    continue;
                                }
                                if dist[a * batch + pos] - dist[a * batch + neg] + margin
                                    > T::zero()
                                {
                                    count += 1;
                                }
                            }
                        }
                    }
                    if count == 0 {
                        continue;
                    }
                    let w = g[0] / (parts_t * T::from_usize(count));

                    // dL/d dist(i,j) accumulated per ordered pair.
                    let mut dd = vec![T::zero(); batch * batch];
                    for a in 0..batch {
                        for pos in 0..batch {
                            if pos == a || labels[pos] != labels[a] {
                                continue;
                            }
                            for neg in 0..batch {
                                if labels[neg] == labels[a] {
                                    continue;
                                }
                                if dist[a * batch + pos] - dist[a * batch + neg] + margin
                                    > T::zero()
                                {
                                    dd[a * batch + pos] = dd[a * batch + pos] + w;
                                    dd[a * batch + neg] = dd[a * batch + neg] - w;
                                }
                            }
                        }
                    }

                    // Chain through d(i,j) = ||e_i - e_j||; zero distances
                    // contribute no gradient (subgradient choice).
                    for i in 0..batch {
                        for j in 0..batch {
                            if i == j {
                                continue;
                            }
                            let coeff = dd[i * batch + j];
                            if coeff == T::zero() {
                                continue;
                            }
                            let d_ij = dist[i * batch + j];
                            if d_ij <= T::zero() {
                                continue;
                            }
                            let scale = coeff / d_ij;
                            let (ri, rj) = (i * dim, j * dim);
                            for t in 0..dim {
                                let diff = rows[ri + t] - rows[rj + t];
                                let di = (i * parts + p) * dim + t;
                                let dj = (j * parts + p) * dim + t;
                                dx[di] = dx[di] + scale * diff;
                                dx[dj] = dx[dj] - scale * diff;
                            }
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }
}
