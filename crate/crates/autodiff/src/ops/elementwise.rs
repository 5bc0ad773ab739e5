use crate::elem::Elem;
use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::Result;

impl<T: Elem> Tensor<T> {
    fn check_same_shape(&self, other: &Tensor<T>, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(TensorError::shape(op, self.shape(), other.shape()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_same_shape(other, "add")?;
        let out: Vec<T> = {
            let a = self.data();
            let b = other.data();
            a.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect()
        };
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g| vec![Some(g.to_vec()), Some(g.to_vec())]),
        ))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_same_shape(other, "sub")?;
        let out: Vec<T> = {
            let a = self.data();
            let b = other.data();
            a.iter().zip(b.iter()).map(|(&x, &y)| x - y).collect()
        };
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g| {
                vec![
                    Some(g.to_vec()),
                    Some(g.iter().map(|&v| -v).collect()),
                ]
            }),
        ))
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_same_shape(other, "mul")?;
        let out: Vec<T> = {
            let a = self.data();
            let b = other.data();
            a.iter().zip(b.iter()).map(|(&x, &y)| x * y).collect()
        };
        let lhs = self.clone();
        let rhs = other.clone();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let a = lhs.data();
                let b = rhs.data();
                let da: Vec<T> = g.iter().zip(b.iter()).map(|(&gi, &bi)| gi * bi).collect();
                let db: Vec<T> = g.iter().zip(a.iter()).map(|(&gi, &ai)| gi * ai).collect();
                vec![Some(da), Some(db)]
            }),
        ))
    }

    pub fn scalar_mul(&self, k: T) -> Tensor<T> {
        let out: Vec<T> = self.data().iter().map(|&x| x * k).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone()],
            Box::new(move |g| vec![Some(g.iter().map(|&v| v * k).collect())]),
        )
    }

    pub fn relu(&self) -> Tensor<T> {
        let out: Vec<T> = self
            .data()
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        let input = self.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let x = input.data();
                let dx: Vec<T> = g
                    .iter()
                    .zip(x.iter())
                    .map(|(&gi, &xi)| if xi > T::zero() { gi } else { T::zero() })
                    .collect();
                vec![Some(dx)]
            }),
        )
    }
}
