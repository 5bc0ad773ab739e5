use autodiff::{Elem, Parameter};

use crate::config::TrainConfig;
use crate::error::TrainError;

/// SGD with classical momentum and L2 weight decay:
/// `v <- momentum*v + grad + weight_decay*param; param <- param - lr*v`.
pub struct Sgd<T: Elem> {
    momentum: T,
    weight_decay: T,
    velocities: Vec<Vec<T>>,
}

impl<T: Elem> Sgd<T> {
    pub fn new(params: &[Parameter<T>], momentum: T, weight_decay: T) -> Self {
        let velocities = params.iter().map(|p| vec![T::zero(); p.tensor.numel()]).collect();
        Sgd { momentum, weight_decay, velocities }
    }

    /// One update over the same parameter list the optimizer was built
    /// with (positional alignment). Errors if any gradient is missing.
    pub fn step(&mut self, params: &[Parameter<T>], lr: T) -> Result<(), TrainError> {
        debug_assert_eq!(params.len(), self.velocities.len());
        for (p, v) in params.iter().zip(self.velocities.iter_mut()) {
            let grad = p.grad()?;
            p.tensor.update_data(|data| {
                for ((x, vel), g) in data.iter_mut().zip(v.iter_mut()).zip(&grad) {
                    *vel = self.momentum * *vel + *g + self.weight_decay * *x;
                    *x = *x - lr * *vel;
                }
            });
        }
        Ok(())
    }

    pub fn zero_grad(&self, params: &[Parameter<T>]) {
        for p in params {
            p.tensor.zero_grad();
        }
    }

    /// Momentum buffers keyed for checkpointing, in parameter order.
    pub fn state(&self, params: &[Parameter<T>]) -> Vec<(String, Vec<T>)> {
        params
            .iter()
            .zip(&self.velocities)
            .map(|(p, v)| (format!("optim.momentum.{}", p.name), v.clone()))
            .collect()
    }

    pub fn restore(&mut self, params: &[Parameter<T>], state: &[(String, Vec<T>)]) -> Result<(), TrainError> {
        for (i, p) in params.iter().enumerate() {
            let key = format!("optim.momentum.{}", p.name);
            let entry = state
                .iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| TrainError::Checkpoint(format!("missing optimizer state {key}")))?;
            if entry.1.len() != self.velocities[i].len() {
                return Err(TrainError::Checkpoint(format!("optimizer state {key} has wrong size")));
            }
            self.velocities[i].copy_from_slice(&entry.1);
        }
        Ok(())
    }
}

/// Step schedule: `base_lr * 0.1^(milestones passed)`, with milestones
/// stored as fractions of the total epoch count.
pub fn lr_at(epoch: usize, config: &TrainConfig) -> f64 {
    let passed = config
        .milestones
        .iter()
        .filter(|&&m| epoch >= (m * config.epochs as f64).floor() as usize)
        .count();
    config.base_lr * 0.1f64.powi(passed as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use autodiff::Tensor;

    #[test]
    fn zero_grad_zero_decay_keeps_params() {
        let p = Parameter::new("p", Tensor::<f64>::param(vec![2], vec![1.0, -2.0]).unwrap());
        let params = vec![p];
        let mut opt = Sgd::new(&params, 0.9, 0.0);
        // Build a zero gradient.
        params[0].tensor.zero_grad();
        let loss = params[0].tensor.scalar_mul(0.0).sum_all();
        loss.backward().unwrap();
        opt.step(&params, 0.1).unwrap();
        assert_eq!(params[0].tensor.to_vec(), vec![1.0, -2.0]);
    }

    #[test]
    fn single_step_on_half_square_from_one() {
        // f(p) = p^2 / 2, grad = p = 1; lr 0.1, no momentum/decay -> 0.9.
        let p = Parameter::new("p", Tensor::<f64>::param(vec![1], vec![1.0]).unwrap());
        let params = vec![p];
        let mut opt = Sgd::new(&params, 0.0, 0.0);
        let loss = params[0].tensor.mul(&params[0].tensor).unwrap().scalar_mul(0.5).sum_all();
        loss.backward().unwrap();
        opt.step(&params, 0.1).unwrap();
        assert!((params[0].tensor.to_vec()[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn quadratic_descent_is_monotone_after_warm_in() {
        // Overdamped momentum setting: loss must fall monotonically.
        let p = Parameter::new("p", Tensor::<f64>::param(vec![3], vec![4.0, -3.0, 2.0]).unwrap());
        let params = vec![p];
        let mut opt = Sgd::new(&params, 0.3, 0.0);
        let mut losses = Vec::new();
        for _ in 0..100 {
            opt.zero_grad(&params);
            let loss = params[0].tensor.mul(&params[0].tensor).unwrap().sum_all();
            losses.push(loss.item().unwrap());
            loss.backward().unwrap();
            opt.step(&params, 0.05).unwrap();
        }
        for w in losses[5..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
        assert!(losses.last().unwrap() < &1e-3);
    }

    #[test]
    fn missing_grad_is_error() {
        let p = Parameter::new("p", Tensor::<f64>::param(vec![1], vec![1.0]).unwrap());
        let params = vec![p];
        let mut opt = Sgd::new(&params, 0.9, 0.0);
        assert!(opt.step(&params, 0.1).is_err());
    }

    fn schedule(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, ..Default::default() }
    }

    #[test]
    fn lr_schedule_matches_reference_milestones() {
        let cfg = schedule(400);
        assert_eq!(lr_at(0, &cfg), 0.1);
        assert_eq!(lr_at(134, &cfg), 0.1);
        assert!((lr_at(135, &cfg) - 0.01).abs() < 1e-15);
        assert!((lr_at(300, &cfg) - 0.001).abs() < 1e-15);
        assert!((lr_at(399, &cfg) - 0.0001).abs() < 1e-15);
    }

    #[test]
    fn lr_is_non_increasing() {
        let cfg = schedule(40);
        let mut prev = f64::INFINITY;
        for e in 0..40 {
            let lr = lr_at(e, &cfg);
            assert!(lr <= prev);
            prev = lr;
        }
        assert!((lr_at(39, &cfg) - 0.1 * 1e-3).abs() < 1e-15);
    }
}
