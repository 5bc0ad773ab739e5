use crate::elem::Elem;
use crate::tensor::Tensor;
use crate::{Result, TensorError};

/// A named leaf tensor. Names are path-like (`backbone.stage1.conv.weight`)
/// and must be unique within a model; checkpointing keys off them.
pub struct Parameter<T: Elem> {
    pub name: String,
    pub tensor: Tensor<T>,
}

impl<T: Elem> Parameter<T> {
    pub fn new(name: impl Into<String>, tensor: Tensor<T>) -> Self {
        Parameter { name: name.into(), tensor }
    }

    pub fn grad(&self) -> Result<Vec<T>> {
        self.tensor
            .grad()
            .ok_or_else(|| TensorError::MissingGrad { name: self.name.clone() })
    }
}

impl<T: Elem> Clone for Parameter<T> {
    fn clone(&self) -> Self {
        Parameter { name: self.name.clone(), tensor: self.tensor.clone() }
    }
}
