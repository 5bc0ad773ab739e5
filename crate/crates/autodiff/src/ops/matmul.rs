use rayon::prelude::*;

use crate::elem::Elem;
use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::Result;

/// Work size above which GEMMs split rows across the rayon pool. The split
/// is by fixed row blocks, so results do not depend on the worker count.
const PAR_FLOPS: usize = 1 << 16;

/// C += A (m x k) * B (k x n), row-major.
pub(crate) fn gemm_nn<T: Elem>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let row = |ci: &mut [T], i: usize| {
        for l in 0..k {
            let av = a[i * k + l];
            if av == T::zero() {
                continue;
            }
            let brow = &b[l * n..l * n + n];
            for (cv, &bv) in ci.iter_mut().zip(brow) {
                *cv = *cv + av * bv;
            }
        }
    };
    if m * k * n >= PAR_FLOPS && m > 1 {
        c.par_chunks_mut(n).enumerate().for_each(|(i, ci)| row(ci, i));
    } else {
        for (i, ci) in c.chunks_mut(n).enumerate() {
            row(ci, i);
        }
    }
}

/// Slice sum with eight independent accumulator lanes (fixed combine
/// order), so the reduction vectorizes.
#[inline]
pub(crate) fn sum_lanes<T: Elem>(a: &[T]) -> T {
    const LANES: usize = 8;
    let chunks = a.len() / LANES;
    let mut acc = [T::zero(); LANES];
    for c in 0..chunks {
        let av = &a[c * LANES..(c + 1) * LANES];
        for l in 0..LANES {
            acc[l] = acc[l] + av[l];
        }
    }
    let mut total = T::zero();
    for &v in &a[chunks * LANES..] {
        total = total + v;
    }
    for l in 0..LANES {
        total = total + acc[l];
    }
    total
}

/// Dot product with eight independent accumulator lanes (fixed combine
/// order), so the reduction vectorizes.
#[inline]
pub(crate) fn dot_lanes<T: Elem>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 8;
    let chunks = a.len() / LANES;
    let mut acc = [T::zero(); LANES];
    for c in 0..chunks {
        let av = &a[c * LANES..(c + 1) * LANES];
        let bv = &b[c * LANES..(c + 1) * LANES];
        for l in 0..LANES {
            acc[l] = acc[l] + av[l] * bv[l];
        }
    }
    let mut total = T::zero();
    for i in chunks * LANES..a.len() {
        total = total + a[i] * b[i];
    }
    for l in 0..LANES {
        total = total + acc[l];
    }
    total
}

/// C += A (m x k) * B^T where B is (n x k), row-major.
pub(crate) fn gemm_nt<T: Elem>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    let row = |ci: &mut [T], i: usize| {
        let arow = &a[i * k..i * k + k];
        for (j, cv) in ci.iter_mut().enumerate() {
            let brow = &b[j * k..j * k + k];
            *cv = *cv + dot_lanes(arow, brow);
        }
    };
    if m * k * n >= PAR_FLOPS && m > 1 {
        c.par_chunks_mut(n).enumerate().for_each(|(i, ci)| row(ci, i));
    } else {
        for (i, ci) in c.chunks_mut(n).enumerate() {
            row(ci, i);
        }
    }
}

/// C += A^T * B where A is (k x m) and B is (k x n), row-major.
pub(crate) fn gemm_tn<T: Elem>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let row = |ci: &mut [T], i: usize| {
        for l in 0..k {
            let av = a[l * m + i];
            if av == T::zero() {
                continue;
            }
            let brow = &b[l * n..l * n + n];
            for (cv, &bv) in ci.iter_mut().zip(brow) {
                *cv = *cv + av * bv;
            }
        }
    };
    if m * k * n >= PAR_FLOPS && m > 1 {
        c.par_chunks_mut(n).enumerate().for_each(|(i, ci)| row(ci, i));
    } else {
        for (i, ci) in c.chunks_mut(n).enumerate() {
            row(ci, i);
        }
    }
}

impl<T: Elem> Tensor<T> {
    /// 2-D matrix product: (m x k) * (k x n) -> (m x n).
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![T::zero(); m * n];
        gemm_nn(m, k, n, &self.data(), &other.data(), &mut out);
        let lhs = self.clone();
        let rhs = other.clone();
        let lhs_needs = self.needs_grad();
        let rhs_needs = other.needs_grad();
        Ok(Tensor::from_op(
            vec![m, n],
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let da = lhs_needs.then(|| {
                    let mut da = vec![T::zero(); m * k];
                    gemm_nt(m, n, k, g, &rhs.data(), &mut da);
                    da
                });
                let db = rhs_needs.then(|| {
                    let mut db = vec![T::zero(); k * n];
                    gemm_tn(k, m, n, &lhs.data(), g, &mut db);
                    db
                });
                vec![da, db]
            }),
        ))
    }
}
