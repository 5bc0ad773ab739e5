//! Deterministic weight initialization. All draws come from one seeded
//! stream in construction order, so a (config, seed) pair fully determines
//! the initial parameters.

use autodiff::Elem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Standard normal via Box-Muller.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// He-normal draw for convolution kernels: std = sqrt(2 / fan_in).
pub fn he_normal<T: Elem>(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..n).map(|_| T::from_f64(standard_normal(rng) * std)).collect()
}

/// Xavier-normal draw for linear maps: std = sqrt(2 / (fan_in + fan_out)).
pub fn xavier_normal<T: Elem>(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| T::from_f64(standard_normal(rng) * std)).collect()
}
