use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::splitmix;

/// Static shape and walking dynamics of one synthetic identity. Geometry
/// is in pixels on a reference 64x44 canvas; the rasterizer rescales to
/// the configured frame size.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityProfile {
    pub head_radius: f64,
    pub torso_width: f64,
    pub torso_height: f64,
    pub leg_length: f64,
    pub leg_width: f64,
    pub arm_length: f64,
    pub arm_width: f64,
    pub foot_length: f64,
    pub hand_radius: f64,
    /// Frames per full gait cycle (>= 4).
    pub gait_period: f64,
    /// Thigh swing amplitude, radians from vertical.
    pub stride_amplitude: f64,
    pub arm_swing_amplitude: f64,
    /// Cycle offset in [0, 1).
    pub phase_offset: f64,
    pub knee_bend: f64,
    pub dress: bool,
    pub dress_length: f64,
    /// Overall figure scale relative to the frame height.
    pub height_scale: f64,
}

/// Deterministic identity from (dataset seed, subject index). Distinct
/// indices draw from disjoint RNG streams, so profiles collide only with
/// vanishing probability.
pub fn generate_identity(seed: u64, subject_index: u32, dress_prob: f64) -> IdentityProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(subject_index as u64)));
    IdentityProfile {
        head_radius: rng.gen_range(3.0..4.4),
        torso_width: rng.gen_range(7.0..12.0),
        torso_height: rng.gen_range(15.0..19.0),
        leg_length: rng.gen_range(21.0..26.0),
        leg_width: rng.gen_range(2.2..3.6),
        arm_length: rng.gen_range(13.0..17.0),
        arm_width: rng.gen_range(1.6..2.6),
        foot_length: rng.gen_range(3.5..5.5),
        hand_radius: rng.gen_range(1.2..2.0),
        gait_period: rng.gen_range(8.0..16.0),
        stride_amplitude: rng.gen_range(0.30..0.55),
        arm_swing_amplitude: rng.gen_range(0.25..0.55),
        phase_offset: rng.gen_range(0.0..1.0),
        knee_bend: rng.gen_range(0.10..0.35),
        dress: rng.gen_bool(dress_prob.clamp(0.0, 1.0)),
        dress_length: rng.gen_range(8.0..13.0),
        height_scale: rng.gen_range(0.86..0.98),
    }
}
