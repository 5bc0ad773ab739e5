//! Finite-difference verification of the reverse-mode gradients.
//!
//! Runs in `f64`: analytic gradients from `backward` are compared against
//! central differences `(f(x+eps) - f(x-eps)) / (2*eps)` element by element.

use crate::tensor::{no_grad, Tensor};
use crate::{Result, TensorError};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckResult {
    pub name: String,
    /// max over elements of |analytic - numeric| / max(1, |analytic| + |numeric|)
    pub max_rel_err: f64,
    pub checked: usize,
    pub tol: f64,
}

impl GradCheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err.is_finite() && self.max_rel_err < self.tol
    }
}

impl std::fmt::Display for GradCheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} (max rel err {:.3e} over {} elements, tol {:.1e})",
            self.name,
            if self.passed() { "ok" } else { "FAIL" },
            self.max_rel_err,
            self.checked,
            self.tol
        )
    }
}

/// Checks the gradient of a scalar-valued function of several tensors.
/// Every input is treated as differentiable; the reported error is the
/// worst over all elements of all inputs.
pub fn grad_check_multi<F>(
    name: &str,
    f: F,
    inputs: &[Tensor<f64>],
    eps: f64,
    tol: f64,
) -> Result<GradCheckResult>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    let params: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|t| Tensor::param(t.shape().to_vec(), t.to_vec()))
        .collect::<Result<_>>()?;

    let out = f(&params)?;
    if out.numel() != 1 {
        return Err(TensorError::NonScalarRoot { shape: out.shape().to_vec() });
    }
    out.backward()?;

    let mut max_rel_err = 0.0f64;
    let mut checked = 0usize;
    for (pi, p) in params.iter().enumerate() {
        // A disconnected input legitimately has a zero gradient.
        let analytic = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
        let base = p.to_vec();
        for i in 0..base.len() {
            let eval = |v: f64| -> Result<f64> {
                let mut data = base.clone();
                data[i] = v;
                let mut probe: Vec<Tensor<f64>> =
                    params.iter().map(|t| t.detach()).collect();
                probe[pi] = Tensor::from_vec(p.shape().to_vec(), data)?;
                no_grad(|| f(&probe))?.item()
            };
            let fp = eval(base[i] + eps)?;
            let fm = eval(base[i] - eps)?;
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic[i];
            let rel = (a - numeric).abs() / 1.0f64.max(a.abs() + numeric.abs());
            if rel > max_rel_err {
                max_rel_err = rel;
            }
            checked += 1;
        }
    }

    Ok(GradCheckResult { name: name.to_string(), max_rel_err, checked, tol })
}

/// Single-input convenience wrapper around [`grad_check_multi`].
pub fn grad_check<F>(
    name: &str,
    f: F,
    input: &Tensor<f64>,
    eps: f64,
    tol: f64,
) -> Result<GradCheckResult>
where
    F: Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
{
    grad_check_multi(name, |xs| f(&xs[0]), std::slice::from_ref(input), eps, tol)
}

struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn tensor(&mut self, shape: &[usize]) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| self.next_f64()).collect();
        Tensor::from_vec(shape.to_vec(), data).unwrap()
    }

    /// Values bounded away from zero, for kinked ops.
    fn tensor_offset(&mut self, shape: &[usize]) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n)
            .map(|_| {
                let v = self.next_f64();
                v.signum() * (0.2 + 0.8 * v.abs())
            })
            .collect();
        Tensor::from_vec(shape.to_vec(), data).unwrap()
    }

    fn binary(&mut self, shape: &[usize]) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| f64::from(self.next_f64() > 0.0)).collect();
        Tensor::from_vec(shape.to_vec(), data).unwrap()
    }
}

/// The full verification pass over every differentiable primitive plus the
/// blend -> pooling -> graph-mix -> loss composite, each on several seeded
/// shapes. Backs the CLI `gradcheck` command and the acceptance gate.
pub fn standard_suite() -> Result<Vec<GradCheckResult>> {
    let mut rng = Lcg(0x5DEECE66D);
    let mut results = Vec::new();
    let eps = DEFAULT_EPS;
    let tol = DEFAULT_TOL;

    for shape in [vec![5], vec![2, 3], vec![2, 2, 3]] {
        let a = rng.tensor(&shape);
        let b = rng.tensor(&shape);
        results.push(grad_check_multi(
            "add+mul",
            |xs| Ok(xs[0].add(&xs[1])?.mul(&xs[0])?.sum_all()),
            &[a.clone(), b.clone()],
            eps,
            tol,
        )?);
        results.push(grad_check_multi(
            "sub",
            |xs| Ok(xs[0].sub(&xs[1])?.mul(&xs[0])?.sum_all()),
            &[a, b],
            eps,
            tol,
        )?);
    }

    for shape in [vec![7], vec![3, 4], vec![2, 3, 2]] {
        let x = rng.tensor_offset(&shape);
        results.push(grad_check("relu", |t| Ok(t.relu().mul(t)?.sum_all()), &x, eps, tol)?);
        results.push(grad_check("scalar_mul", |t| Ok(t.scalar_mul(1.7).mul(t)?.sum_all()), &x, eps, tol)?);
    }

    for (m, k, n) in [(2usize, 3usize, 4usize), (1, 5, 2), (4, 4, 4)] {
        let a = rng.tensor(&[m, k]);
        let b = rng.tensor(&[k, n]);
        results.push(grad_check_multi(
            "matmul",
            |xs| {
                let y = xs[0].matmul(&xs[1])?;
                Ok(y.mul(&y)?.sum_all())
            },
            &[a, b],
            eps,
            tol,
        )?);
    }

    for (shape, axis) in [(vec![4, 3], 1usize), (vec![2, 5, 3], 1), (vec![3, 2, 4], 2)] {
        let x = rng.tensor(&shape);
        results.push(grad_check(
            "max_over",
            move |t| Ok(t.max_over(axis)?.mul(&t.max_over(axis)?)?.sum_all()),
            &x,
            eps,
            tol,
        )?);
        results.push(grad_check(
            "mean_over",
            move |t| Ok(t.mean_over(axis)?.mul(&t.mean_over(axis)?)?.sum_all()),
            &x,
            eps,
            tol,
        )?);
    }

    for (shape, axis, start, len) in
        [(vec![5, 3], 0usize, 1usize, 3usize), (vec![4, 6], 1, 2, 2), (vec![2, 3, 4], 2, 0, 3)]
    {
        let x = rng.tensor(&shape);
        results.push(grad_check(
            "reshape+narrow",
            move |t| {
                let v = t.reshape(vec![t.numel()])?;
                let w = t.narrow(axis, start, len)?;
                Ok(v.mul(&v)?.sum_all().add(&w.mul(&w)?.sum_all())?)
            },
            &x,
            eps,
            tol,
        )?);
    }

    for axis in [0usize, 1] {
        let a = rng.tensor(&[3, 3]);
        let b = rng.tensor(&[3, 3]);
        let c = rng.tensor(&[3, 3]);
        results.push(grad_check_multi(
            "concat",
            move |xs| {
                let y = Tensor::concat(&[&xs[0], &xs[1], &xs[2]], axis)?;
                Ok(y.mul(&y)?.sum_all())
            },
            &[a, b, c],
            eps,
            tol,
        )?);
    }

    for (b, cin, h, w, cout, k, stride, pad) in [
        (1usize, 2usize, 4usize, 4usize, 3usize, 3usize, 1usize, 1usize),
        (2, 1, 5, 4, 2, 3, 2, 1),
        (1, 3, 6, 5, 2, 1, 1, 0),
    ] {
        let x = rng.tensor(&[b, cin, h, w]);
        let wt = rng.tensor(&[cout, cin, k, k]);
        results.push(grad_check_multi(
            "conv2d",
            move |xs| {
                let y = xs[0].conv2d(&xs[1], stride, pad)?;
                Ok(y.mul(&y)?.sum_all())
            },
            &[x, wt],
            eps,
            tol,
        )?);
    }

    for (b, c, s) in [(4usize, 2usize, 3usize), (3, 4, 1), (2, 3, 5)] {
        let x = rng.tensor(&[b, c, s]);
        let gamma = rng.tensor_offset(&[c]);
        let beta = rng.tensor(&[c]);
        for training in [true, false] {
            results.push(grad_check_multi(
                if training { "batch_norm(train)" } else { "batch_norm(eval)" },
                move |xs| {
                    let running = crate::RunningStats::new(c);
                    running
                        .var
                        .borrow_mut()
                        .iter_mut()
                        .enumerate()
                        .for_each(|(i, v)| *v = 1.0 + 0.2 * i as f64);
                    let y = xs[0].batch_norm(&xs[1], &xs[2], &running, training, 0.1, 1e-5)?;
                    Ok(y.mul(&y)?.sum_all())
                },
                &[x.clone(), gamma.clone(), beta.clone()],
                eps,
                1e-3,
            )?);
        }
    }

    for (shape, axis) in [(vec![3, 4], 1usize), (vec![2, 3, 2], 1), (vec![4, 2], 0)] {
        let x = rng.tensor_offset(&shape);
        results.push(grad_check(
            "l2_normalize",
            move |t| {
                let y = t.l2_normalize(axis)?;
                let w = Tensor::from_vec(
                    y.shape().to_vec(),
                    (0..y.numel()).map(|i| 0.1 * i as f64).collect(),
                )?;
                Ok(y.mul(&w)?.sum_all())
            },
            &x,
            eps,
            tol,
        )?);
    }

    for (b, c) in [(4usize, 5usize), (2, 3), (6, 2)] {
        let x = rng.tensor(&[b, c]);
        let targets: Vec<usize> = (0..b).map(|i| (i * 7) % c).collect();
        results.push(grad_check(
            "softmax_cross_entropy",
            move |t| t.softmax_cross_entropy(&targets),
            &x,
            eps,
            tol,
        )?);
    }

    for (b, p, d) in [(4usize, 2usize, 3usize), (6, 1, 2), (4, 3, 2)] {
        let x = rng.tensor(&[b, p, d]);
        let labels: Vec<usize> = (0..b).map(|i| i / 2).collect();
        results.push(grad_check(
            "batch_all_triplet",
            move |t| t.batch_all_triplet(&labels, 0.3),
            &x,
            eps,
            tol,
        )?);
    }

    for (frames, c, h, w) in [(1usize, 2usize, 3usize, 2usize), (2, 1, 2, 2), (2, 3, 2, 3)] {
        let f = rng.tensor(&[frames, c, h, w]);
        let mask = rng.binary(&[frames, h, w]);
        let gamma = Tensor::from_vec(vec![1], vec![0.3 + 0.4 * rng.next_f64().abs()]).unwrap();
        results.push(grad_check_multi(
            "regional_blend",
            move |xs| {
                let y = xs[0].regional_blend(&mask, &xs[1])?;
                Ok(y.mul(&y)?.sum_all())
            },
            &[f, gamma],
            eps,
            tol,
        )?);
    }

    for (frames, nodes, dim) in [(2usize, 3usize, 2usize), (1, 5, 3), (3, 2, 2)] {
        let x = rng.tensor(&[frames, nodes, dim]);
        let mix = {
            let m = rng.tensor(&[nodes, nodes]);
            Tensor::from_vec(vec![nodes, nodes], m.to_vec().iter().map(|v| v.abs()).collect())
                .unwrap()
        };
        results.push(grad_check(
            "node_mix",
            move |t| {
                let y = t.node_mix(&mix)?;
                Ok(y.mul(&y)?.sum_all())
            },
            &x,
            eps,
            tol,
        )?);
    }

    // Blend -> regional pooling -> two mix layers -> triplet + CE chain.
    for trial in 0..3u64 {
        let (frames, c, h, w, nodes) = (4usize, 3usize, 2usize, 2usize, 3usize);
        let feats = rng.tensor(&[frames, c, h, w]);
        let gamma = Tensor::from_vec(vec![1], vec![0.75]).unwrap();
        let w1 = rng.tensor(&[c, c]);
        let w2 = rng.tensor(&[c, c]);
        let mask = rng.binary(&[frames, h, w]);
        let mix = {
            let m = rng.tensor(&[nodes, nodes]);
            Tensor::from_vec(
                vec![nodes, nodes],
                m.to_vec().iter().map(|v| 0.1 + 0.4 * v.abs()).collect(),
            )
            .unwrap()
        };
        let labels = vec![0usize, 0, 1, 1];
        let _ = trial;
        results.push(grad_check_multi(
            "blend->pool->mix->losses",
            move |xs| {
                let feats = &xs[0];
                let gamma = &xs[1];
                let (w1, w2) = (&xs[2], &xs[3]);
                let hw = h * w;
                let mut per_node = Vec::new();
                for _ in 0..nodes {
                    let blended = feats.regional_blend(&mask, gamma)?;
                    let flat = blended.reshape(vec![frames, c, hw])?;
                    let pooled = flat.max_over(2)?.add(&flat.mean_over(2)?)?;
                    per_node.push(pooled.reshape(vec![frames, 1, c])?);
                }
                let refs: Vec<&Tensor<f64>> = per_node.iter().collect();
                let x0 = Tensor::concat(&refs, 1)?;
                let h1 = x0.node_mix(&mix)?.reshape(vec![frames * nodes, c])?.matmul(w1)?.relu();
                let h1 = h1.reshape(vec![frames, nodes, c])?;
                let h2 = h1.node_mix(&mix)?.reshape(vec![frames * nodes, c])?.matmul(w2)?.relu();
                let emb = h2.reshape(vec![frames, nodes, c])?;
                let tri = emb.batch_all_triplet(&labels, 0.3)?;
                let logits = emb.reshape(vec![frames * nodes, c])?;
                let targets: Vec<usize> =
                    (0..frames * nodes).map(|i| labels[i / nodes] % c).collect();
                let ce = logits.softmax_cross_entropy(&targets)?;
                tri.add(&ce)
            },
            &[feats, gamma, w1, w2],
            eps,
            tol,
        )?);
    }

    Ok(results)
}
