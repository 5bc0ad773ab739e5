use std::cell::{Cell, Ref, RefCell};
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::elem::Elem;
use crate::error::TensorError;
use crate::Result;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` with gradient recording disabled on this thread. Operations
/// performed inside compute values but record no tape, so the result owns
/// no graph history.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let out = f();
    GRAD_ENABLED.with(|g| g.set(prev));
    out
}

pub(crate) fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Adjoint of one recorded operation: maps the output gradient to per-parent
/// gradient contributions (`None` for parents that need no gradient).
pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Option<Vec<T>>>>;

pub(crate) struct OpRecord<T: Elem> {
    pub parents: Vec<Tensor<T>>,
    pub backward: BackwardFn<T>,
}

pub(crate) struct Inner<T: Elem> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    /// Persistent gradient accumulator; allocated lazily, leaves only.
    grad: RefCell<Option<Vec<T>>>,
    /// Leaf marker: `backward` accumulates into `grad`.
    requires_grad: bool,
    /// True if this node or any ancestor requires a gradient.
    needs_grad: bool,
    op: Option<OpRecord<T>>,
}

/// A dense row-major n-dimensional array, optionally carrying tape history.
///
/// Cloning is cheap (reference-counted handle). Tensors are immutable after
/// construction except for two explicitly-owned mutations: gradient
/// accumulation and in-place parameter updates through
/// [`Tensor::update_data`].
pub struct Tensor<T: Elem> {
    inner: Rc<Inner<T>>,
}

impl<T: Elem> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor { inner: Rc::clone(&self.inner) }
    }
}

impl<T: Elem> Tensor<T> {
    fn new_inner(
        shape: Vec<usize>,
        data: Vec<T>,
        requires_grad: bool,
        needs_grad: bool,
        op: Option<OpRecord<T>>,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                needs_grad,
                op,
            }),
        }
    }

    /// Constant tensor (no gradient tracking).
    pub fn from_vec(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::shape("from_vec", &shape, data.len()));
        }
        Ok(Self::new_inner(shape, data, false, false, None))
    }

    /// Leaf tensor that participates in `backward` gradient accumulation.
    pub fn param(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::shape("param", &shape, data.len()));
        }
        Ok(Self::new_inner(shape, data, true, true, None))
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        Self::new_inner(shape, vec![T::zero(); numel], false, false, None)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        Self::new_inner(shape, vec![value; numel], false, false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::new_inner(vec![1], vec![value], false, false, None)
    }

    /// Result node of an operation. When gradients are globally disabled or
    /// no parent needs a gradient, the tape entry is dropped and the result
    /// is a plain constant.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        parents: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Self {
        let record = grad_enabled() && parents.iter().any(|p| p.inner.needs_grad);
        if record {
            Self::new_inner(shape, data, false, true, Some(OpRecord { parents, backward }))
        } else {
            Self::new_inner(shape, data, false, false, None)
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// True when this tensor or an ancestor participates in gradients.
    pub(crate) fn needs_grad(&self) -> bool {
        self.inner.needs_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarRoot { shape: self.inner.shape.clone() });
        }
        Ok(self.inner.data.borrow()[0])
    }

    /// Detached constant copy sharing no tape history.
    pub fn detach(&self) -> Self {
        Self::new_inner(self.inner.shape.clone(), self.to_vec(), false, false, None)
    }

    /// Accumulated gradient of a leaf, if any.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// In-place data update for leaf parameters (optimizer step, load).
    pub fn update_data(&self, f: impl FnOnce(&mut [T])) {
        f(self.inner.data.borrow_mut().as_mut_slice());
    }

    fn accumulate_grad(&self, contribution: &[T]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, ci) in g.iter_mut().zip(contribution) {
                    *gi = *gi + *ci;
                }
            }
            None => *slot = Some(contribution.to_vec()),
        }
    }

    /// Reverse-mode sweep from a scalar root. Gradients flow through a
    /// per-call workspace and are added into each leaf's persistent
    /// accumulator, so repeated calls accumulate.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarRoot { shape: self.inner.shape.clone() });
        }

        let order = self.topo_order();
        let mut flowing: HashMap<u64, Vec<T>> = HashMap::new();
        flowing.insert(self.inner.id, vec![T::one()]);

        for node in order.iter().rev() {
            let Some(grad_out) = flowing.remove(&node.inner.id) else {
                continue;
            };
            if node.inner.requires_grad {
                node.accumulate_grad(&grad_out);
            }
            if let Some(op) = &node.inner.op {
                let contribs = (op.backward)(&grad_out);
                debug_assert_eq!(contribs.len(), op.parents.len());
                for (parent, contrib) in op.parents.iter().zip(contribs) {
                    let Some(contrib) = contrib else { continue };
                    if !parent.inner.needs_grad {
                        continue;
                    }
                    debug_assert_eq!(contrib.len(), parent.numel());
                    match flowing.entry(parent.inner.id) {
                        std::collections::hash_map::Entry::Occupied(mut e) => {
                            for (gi, ci) in e.get_mut().iter_mut().zip(&contrib) {
                                *gi = *gi + *ci;
                            }
                        }
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(contrib);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Iterative postorder over the tape (children after all parents).
    fn topo_order(&self) -> Vec<Tensor<T>> {
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut visited: std::collections::HashSet<u64> = std::collections::HashSet::new();
        // (node, parents_pushed)
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.inner.id) {
                continue;
            }
            let parents: Option<Vec<Tensor<T>>> = node.inner.op.as_ref().map(|op| {
                op.parents
                    .iter()
                    .filter(|p| p.inner.needs_grad)
                    .cloned()
                    .collect()
            });
            match parents {
                Some(ps) => {
                    stack.push((node, true));
                    for p in ps {
                        if !visited.contains(&p.inner.id) {
                            stack.push((p, false));
                        }
                    }
                }
                None => order.push(node),
            }
        }
        order
    }
}

impl<T: Elem> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_of_sum_is_ones() {
        let p = Tensor::<f64>::param(vec![3], vec![1.0, -2.0, 5.0]).unwrap();
        let s = p.sum_all();
        s.backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_square_sum_is_2p() {
        let p = Tensor::<f64>::param(vec![3], vec![1.0, -2.0, 5.0]).unwrap();
        let s = p.mul(&p).unwrap().sum_all();
        s.backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![2.0, -4.0, 10.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let p = Tensor::<f64>::param(vec![2], vec![3.0, 4.0]).unwrap();
        let s = p.mul(&p).unwrap().sum_all();
        s.backward().unwrap();
        s.backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![12.0, 16.0]);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let p = Tensor::<f64>::param(vec![2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(p.backward(), Err(TensorError::NonScalarRoot { .. })));
    }

    #[test]
    fn no_grad_suppresses_tape() {
        let p = Tensor::<f64>::param(vec![2], vec![1.0, 2.0]).unwrap();
        let out = no_grad(|| p.mul(&p).unwrap().sum_all());
        assert!(out.backward().is_ok());
        assert!(p.grad().is_none());
    }

    #[test]
    fn diamond_graph_grad_is_exact() {
        // y = (p + p) . p  => dy/dp = 4p
        let p = Tensor::<f64>::param(vec![2], vec![1.5, -0.5]).unwrap();
        let s = p.add(&p).unwrap().mul(&p).unwrap().sum_all();
        s.backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![6.0, -2.0]);
    }
}
