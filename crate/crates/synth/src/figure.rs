//! Rasterizer for the articulated walking figure. Painter's order is
//! fixed: far limbs, then torso and dress, then near limbs, then the head,
//! so overlapping parts overwrite deterministically.

use gps_core::{labels, ParsingFrame};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::OcclusionConfig;
use crate::profile::IdentityProfile;
use crate::SynthError;

/// 2-D affine view of the walking plane: horizontal scale, height-linear
/// shear, optional left/right mirror (applied as a post-process that also
/// swaps the left/right part labels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub scale_x: f64,
    pub shear: f64,
    pub mirror: bool,
}

impl Default for Viewpoint {
    fn default() -> Self {
        Viewpoint { scale_x: 1.0, shear: 0.0, mirror: false }
    }
}

struct Canvas {
    h: usize,
    w: usize,
    labels: Vec<u8>,
}

impl Canvas {
    fn new(h: usize, w: usize) -> Self {
        Canvas { h, w, labels: vec![0; h * w] }
    }

    fn disk(&mut self, cx: f64, cy: f64, r: f64, label: u8) {
        let r = r.max(0.5);
        let y0 = ((cy - r).floor().max(0.0)) as usize;
        let y1 = ((cy + r).ceil().min(self.h as f64 - 1.0)) as usize;
        let x0 = ((cx - r).floor().max(0.0)) as usize;
        let x1 = ((cx + r).ceil().min(self.w as f64 - 1.0)) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                if dx * dx + dy * dy <= r * r {
                    self.labels[y * self.w + x] = label;
                }
            }
        }
    }

    /// Capsule: a segment stroked with round caps.
    fn capsule(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, thickness: f64, label: u8) {
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let steps = (len * 2.0).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            self.disk(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, thickness / 2.0, label);
        }
    }

    /// Vertical trapezoid centered on `cx`, linearly widening from
    /// `half_top` at `y_top` to `half_bottom` at `y_bottom`.
    fn trapezoid(&mut self, cx: f64, y_top: f64, y_bottom: f64, half_top: f64, half_bottom: f64, label: u8) {
        let y0 = y_top.floor().max(0.0) as usize;
        let y1 = (y_bottom.ceil().min(self.h as f64 - 1.0)) as usize;
        for y in y0..=y1 {
            let yc = y as f64 + 0.5;
            if yc < y_top || yc > y_bottom {
                continue;
            }
            let t = if y_bottom > y_top { (yc - y_top) / (y_bottom - y_top) } else { 0.0 };
            let half = half_top + (half_bottom - half_top) * t;
            let x0 = ((cx - half).floor().max(0.0)) as usize;
            let x1 = ((cx + half).ceil().min(self.w as f64 - 1.0)) as usize;
            for x in x0..=x1 {
                if (x as f64 + 0.5 - cx).abs() <= half {
                    self.labels[y * self.w + x] = label;
                }
            }
        }
    }
}

/// Column flip plus left/right label swap; the exact mirror of a frame.
pub fn mirror_frame(frame: &ParsingFrame) -> ParsingFrame {
    const SWAP: [u8; 12] = [0, 1, 2, 4, 3, 6, 5, 8, 7, 10, 9, 11];
    let (h, w) = (frame.height(), frame.width());
    let mut out = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + (w - 1 - x)] = SWAP[frame.get(y, x) as usize];
        }
    }
    ParsingFrame::new(h, w, out).expect("mirror preserves dimensions")
}

struct Pose {
    limbs: LimbSet,
    torso_top: f64,
    hip_y: f64,
    head_center: (f64, f64),
}

struct LimbSet {
    left_leg: [(f64, f64); 3],  // hip, knee, ankle
    right_leg: [(f64, f64); 3],
    left_arm: [(f64, f64); 3],  // shoulder, elbow, wrist
    right_arm: [(f64, f64); 3],
}

fn pose_at(profile: &IdentityProfile, frame_idx: usize, h: usize, w: usize) -> Pose {
    let s = (h as f64 / 64.0) * profile.height_scale;
    let cx = w as f64 / 2.0;
    let ground = h as f64 - 2.0;
    let leg_len = profile.leg_length * s;
    let hip_y = ground - leg_len;
    let torso_top = hip_y - profile.torso_height * s;
    let head_center = (cx, torso_top - 1.0 * s - profile.head_radius * s);

    let phase = std::f64::consts::TAU
        * (frame_idx as f64 / profile.gait_period + profile.phase_offset);

    let leg = |side_phase: f64| -> [(f64, f64); 3] {
        let theta = profile.stride_amplitude * side_phase.sin();
        // The swinging leg flexes at the knee; the support leg stays long.
        let bend = profile.knee_bend * (1.0 - side_phase.cos()) / 2.0;
        let thigh = leg_len * 0.52;
        let shank = leg_len * 0.48;
        let hip = (cx, hip_y);
        let knee = (hip.0 + thigh * theta.sin(), hip.1 + thigh * theta.cos());
        let shank_angle = theta - bend;
        let ankle = (knee.0 + shank * shank_angle.sin(), knee.1 + shank * shank_angle.cos());
        [hip, knee, ankle]
    };
    let arm = |side_phase: f64| -> [(f64, f64); 3] {
        let theta = profile.arm_swing_amplitude * side_phase.sin();
        let upper = profile.arm_length * s * 0.55;
        let fore = profile.arm_length * s * 0.45;
        let shoulder = (cx, torso_top + 1.0 * s);
        let elbow = (shoulder.0 + upper * theta.sin(), shoulder.1 + upper * theta.cos());
        // Slight constant elbow flexion keeps hands ahead of the body line.
        let fore_angle = theta + 0.25;
        let wrist = (elbow.0 + fore * fore_angle.sin(), elbow.1 + fore * fore_angle.cos());
        [shoulder, elbow, wrist]
    };

    Pose {
        limbs: LimbSet {
            left_leg: leg(phase),
            right_leg: leg(phase + std::f64::consts::PI),
            // Arms counter-swing their same-side leg.
            left_arm: arm(phase + std::f64::consts::PI),
            right_arm: arm(phase),
        },
        torso_top,
        hip_y,
        head_center,
    }
}

fn apply_view(p: (f64, f64), view: &Viewpoint, cx: f64, ground: f64) -> (f64, f64) {
    let x = cx + view.scale_x * (p.0 - cx) + view.shear * (ground - p.1);
    (x, p.1)
}

/// Renders the articulated figure for `n_frames` frames. Left and right
/// limbs swing in antiphase at the profile's gait period; occlusion
/// overwrites pixels with background. Errors if any skeleton keypoint
/// leaves the frame.
pub fn render_walk_sequence(
    profile: &IdentityProfile,
    view: &Viewpoint,
    n_frames: usize,
    occlusion: &OcclusionConfig,
    frame_size: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ParsingFrame>, SynthError> {
    let (h, w) = frame_size;
    if h < 32 || w < 22 {
        return Err(SynthError::Config(format!("frame size {h}x{w} below the 32x22 minimum")));
    }
    let s = (h as f64 / 64.0) * profile.height_scale;
    let cx = w as f64 / 2.0;
    let ground = h as f64 - 2.0;

    // Per-sequence occlusion decisions happen before any frame is drawn,
    // so frame content and occlusion draws stay aligned across configs.
    let bottom_crop_rows = if occlusion.bottom_crop_prob > 0.0 && rng.gen_bool(occlusion.bottom_crop_prob) {
        (h as f64 * rng.gen_range(0.08..occlusion.bottom_crop_frac.max(0.081))) as usize
    } else {
        0
    };

    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let pose = pose_at(profile, t, h, w);
        let mut canvas = Canvas::new(h, w);

        let tv = |p: (f64, f64)| apply_view(p, view, cx, ground);
        let check = |p: (f64, f64)| -> Result<(f64, f64), SynthError> {
            if p.0 < 0.0 || p.0 >= w as f64 || p.1 < 0.0 || p.1 >= h as f64 {
                Err(SynthError::OutOfBounds { x: p.0, y: p.1, h, w })
            } else {
                Ok(p)
            }
        };

        let limb_w = (profile.leg_width * s * view.scale_x).max(1.0);
        let arm_w = (profile.arm_width * s * view.scale_x).max(1.0);

        let draw_leg = |canvas: &mut Canvas, pts: &[(f64, f64); 3], leg: u8, foot: u8| -> Result<(), SynthError> {
            let hip = check(tv(pts[0]))?;
            let knee = check(tv(pts[1]))?;
            let ankle = check(tv(pts[2]))?;
            canvas.capsule(hip.0, hip.1, knee.0, knee.1, limb_w, leg);
            canvas.capsule(knee.0, knee.1, ankle.0, ankle.1, limb_w, leg);
            let toe = check((ankle.0 + profile.foot_length * s * view.scale_x, ankle.1 + 1.0))?;
            canvas.capsule(ankle.0, ankle.1 + 1.0, toe.0, toe.1, limb_w.max(1.5), foot);
            Ok(())
        };
        let draw_arm = |canvas: &mut Canvas, pts: &[(f64, f64); 3], arm: u8, hand: u8| -> Result<(), SynthError> {
            let shoulder = check(tv(pts[0]))?;
            let elbow = check(tv(pts[1]))?;
            let wrist = check(tv(pts[2]))?;
            canvas.capsule(shoulder.0, shoulder.1, elbow.0, elbow.1, arm_w, arm);
            canvas.capsule(elbow.0, elbow.1, wrist.0, wrist.1, arm_w, arm);
            canvas.disk(wrist.0, wrist.1, profile.hand_radius * s, hand);
            Ok(())
        };

        // Far side first (the right side by convention).
        draw_arm(&mut canvas, &pose.limbs.right_arm, labels::RIGHT_ARM, labels::RIGHT_HAND)?;
        draw_leg(&mut canvas, &pose.limbs.right_leg, labels::RIGHT_LEG, labels::RIGHT_FOOT)?;

        // Torso and dress.
        let torso_top = check(tv((cx, pose.torso_top)))?;
        let torso_bottom = check(tv((cx, pose.hip_y + 1.0)))?;
        let torso_cx = (torso_top.0 + torso_bottom.0) / 2.0;
        let half_w = profile.torso_width * s * view.scale_x / 2.0;
        canvas.trapezoid(torso_cx, torso_top.1, torso_bottom.1, half_w * 0.9, half_w, labels::TORSO);
        if profile.dress {
            let dress_bottom = check(tv((cx, pose.hip_y + profile.dress_length * s)))?;
            canvas.trapezoid(
                (torso_bottom.0 + dress_bottom.0) / 2.0,
                torso_bottom.1 - 1.0,
                dress_bottom.1,
                half_w,
                half_w + 2.5 * s * view.scale_x,
                labels::DRESS,
            );
        }

        // Near side.
        draw_leg(&mut canvas, &pose.limbs.left_leg, labels::LEFT_LEG, labels::LEFT_FOOT)?;
        draw_arm(&mut canvas, &pose.limbs.left_arm, labels::LEFT_ARM, labels::LEFT_HAND)?;

        // Head on top.
        let head = check(tv(pose.head_center))?;
        canvas.disk(head.0, head.1, profile.head_radius * s, labels::HEAD);

        let mut frame = ParsingFrame::new(h, w, canvas.labels)?;
        if view.mirror {
            frame = mirror_frame(&frame);
        }

        // Occlusion: random background rectangles, then the bottom crop.
        if occlusion.rect_prob > 0.0 && rng.gen_bool(occlusion.rect_prob) {
            let rw = rng.gen_range(occlusion.rect_min..=occlusion.rect_max.max(occlusion.rect_min));
            let rh = rng.gen_range(occlusion.rect_min..=occlusion.rect_max.max(occlusion.rect_min));
            let rx = rng.gen_range(0..w.saturating_sub(rw).max(1));
            let ry = rng.gen_range(0..h.saturating_sub(rh).max(1));
            let mut data = frame.labels().to_vec();
            for y in ry..(ry + rh).min(h) {
                for x in rx..(rx + rw).min(w) {
                    data[y * w + x] = 0;
                }
            }
            frame = ParsingFrame::new(h, w, data)?;
        }
        if bottom_crop_rows > 0 {
            let mut data = frame.labels().to_vec();
            for y in h - bottom_crop_rows.min(h)..h {
                for x in 0..w {
                    data[y * w + x] = 0;
                }
            }
            frame = ParsingFrame::new(h, w, data)?;
        }

        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gps_core::label_histogram;
    use rand::SeedableRng;

    fn test_profile(period: f64) -> IdentityProfile {
        IdentityProfile {
            head_radius: 3.8,
            torso_width: 9.0,
            torso_height: 17.0,
            leg_length: 24.0,
            leg_width: 3.0,
            arm_length: 15.0,
            arm_width: 2.0,
            foot_length: 4.5,
            hand_radius: 1.6,
            gait_period: period,
            stride_amplitude: 0.45,
            arm_swing_amplitude: 0.4,
            phase_offset: 0.0,
            knee_bend: 0.2,
            dress: false,
            dress_length: 10.0,
            height_scale: 0.92,
        }
    }

    fn no_occlusion() -> OcclusionConfig {
        OcclusionConfig {
            rect_prob: 0.0,
            rect_min: 4,
            rect_max: 10,
            bottom_crop_prob: 0.0,
            bottom_crop_frac: 0.2,
        }
    }

    #[test]
    fn head_and_torso_present_in_every_unoccluded_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames = render_walk_sequence(
            &test_profile(10.0),
            &Viewpoint::default(),
            40,
            &no_occlusion(),
            (64, 44),
            &mut rng,
        )
        .unwrap();
        for f in &frames {
            let h = label_histogram(f);
            assert!(h.counts()[labels::HEAD as usize] > 0);
            assert!(h.counts()[labels::TORSO as usize] > 0);
        }
    }

    #[test]
    fn leg_pixel_counts_are_antiphase() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let period = 10usize;
        let frames = render_walk_sequence(
            &test_profile(period as f64),
            &Viewpoint::default(),
            40,
            &no_occlusion(),
            (64, 44),
            &mut rng,
        )
        .unwrap();
        let series = |label: u8| -> Vec<f64> {
            frames
                .iter()
                .map(|f| label_histogram(f).counts()[label as usize] as f64)
                .collect()
        };
        let l = series(labels::LEFT_LEG);
        let r = series(labels::RIGHT_LEG);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ml, mr) = (mean(&l), mean(&r));
        // Circular cross-correlation over one period.
        let n = l.len();
        let mut best_lag = 0usize;
        let mut best = f64::NEG_INFINITY;
        for lag in 0..period {
            let c: f64 = (0..n).map(|t| (l[t] - ml) * (r[(t + lag) % n] - mr)).sum();
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
        let half = period / 2;
        let dist = best_lag.abs_diff(half).min(period - best_lag.abs_diff(half));
        assert!(dist <= 1, "correlation peak at lag {best_lag}, expected ~{half}");
    }

    #[test]
    fn mirrored_view_swaps_left_right_counts_exactly() {
        let profile = test_profile(12.0);
        let occl = no_occlusion();
        let mut rng_a = ChaCha8Rng::seed_from_u64(3);
        let plain = render_walk_sequence(
            &profile,
            &Viewpoint { scale_x: 0.9, shear: 0.05, mirror: false },
            8,
            &occl,
            (64, 44),
            &mut rng_a,
        )
        .unwrap();
        let mut rng_b = ChaCha8Rng::seed_from_u64(3);
        let mirrored = render_walk_sequence(
            &profile,
            &Viewpoint { scale_x: 0.9, shear: 0.05, mirror: true },
            8,
            &occl,
            (64, 44),
            &mut rng_b,
        )
        .unwrap();
        for (a, b) in plain.iter().zip(&mirrored) {
            let ha = label_histogram(a);
            let hb = label_histogram(b);
            for (left, right) in [(3u8, 4u8), (5, 6), (7, 8), (9, 10)] {
                assert_eq!(ha.counts()[left as usize], hb.counts()[right as usize]);
                assert_eq!(ha.counts()[right as usize], hb.counts()[left as usize]);
            }
            for same in [0u8, 1, 2, 11] {
                assert_eq!(ha.counts()[same as usize], hb.counts()[same as usize]);
            }
        }
    }

    #[test]
    fn mirror_frame_is_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frames = render_walk_sequence(
            &test_profile(9.0),
            &Viewpoint::default(),
            3,
            &no_occlusion(),
            (64, 44),
            &mut rng,
        )
        .unwrap();
        for f in &frames {
            assert_eq!(mirror_frame(&mirror_frame(f)), *f);
        }
    }

    #[test]
    fn dress_profile_emits_dress_pixels() {
        let mut profile = test_profile(10.0);
        profile.dress = true;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames = render_walk_sequence(
            &profile,
            &Viewpoint::default(),
            4,
            &no_occlusion(),
            (64, 44),
            &mut rng,
        )
        .unwrap();
        for f in &frames {
            assert!(label_histogram(f).counts()[labels::DRESS as usize] > 0);
        }
    }

    #[test]
    fn tiny_frame_sizes_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let err = render_walk_sequence(
            &test_profile(10.0),
            &Viewpoint::default(),
            2,
            &no_occlusion(),
            (16, 16),
            &mut rng,
        );
        assert!(err.is_err());
    }

    #[test]
    fn out_of_bounds_keypoint_is_reported() {
        let mut profile = test_profile(10.0);
        profile.arm_length = 60.0; // wrist leaves the canvas
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let err = render_walk_sequence(
            &profile,
            &Viewpoint::default(),
            2,
            &no_occlusion(),
            (64, 44),
            &mut rng,
        );
        assert!(matches!(err, Err(SynthError::OutOfBounds { .. })));
    }
}
