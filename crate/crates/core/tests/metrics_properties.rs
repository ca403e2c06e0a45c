mod common;

use motionopt::metrics::{axis_angle_poses, pose_plausibility, pose_variation, trajectory_length, PoseEncoder};
use motionopt::motion::{BodyModel, MotionSequence};
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_motion, random_rotvec, rodrigues, to_6d};

fn matrix_of(v: &[f64; 6]) -> Matrix3<f64> {
    let a1 = nalgebra::Vector3::new(v[0], v[1], v[2]).normalize();
    let a2 = nalgebra::Vector3::new(v[3], v[4], v[5]);
    let b2 = (a2 - a1 * a1.dot(&a2)).normalize();
    Matrix3::from_columns(&[a1, b2, a1.cross(&b2)])
}

fn rotated(seq: &MotionSequence, q: &Matrix3<f64>) -> MotionSequence {
    let mut out = seq.clone();
    for f in &mut out.frames {
        let r = q * nalgebra::Vector3::from(f.r);
        f.r = [r.x, r.y, r.z];
        f.gamma = to_6d(&(q * matrix_of(&f.gamma)));
    }
    out
}

fn motion(seed: u64) -> MotionSequence {
    let body = BodyModel::desk_rig();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..30);
    let r: Vec<[f64; 3]> = (0..n)
        .map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0)))
        .collect();
    random_motion(&mut rng, &r, body.pose_joints(), 2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_ignore_a_global_rotation(seed in any::<u64>(), axis in prop::array::uniform3(-3.0..3.0f64)) {
        let body = BodyModel::desk_rig();
        let seq = motion(seed);
        let moved = rotated(&seq, &rodrigues(axis));
        let encoder = PoseEncoder::identity(3 * body.pose_joints());

        let (a, b) = (trajectory_length(&seq, &body).unwrap(), trajectory_length(&moved, &body).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
        prop_assert_eq!(pose_plausibility(&seq, &encoder).unwrap(), pose_plausibility(&moved, &encoder).unwrap());
        prop_assert_eq!(pose_variation(&seq).unwrap(), pose_variation(&moved).unwrap());
    }

    #[test]
    fn metrics_are_finite(seed in any::<u64>()) {
        let body = BodyModel::desk_rig();
        let seq = motion(seed);
        let encoder = PoseEncoder::identity(3 * body.pose_joints());
        prop_assert!(pose_plausibility(&seq, &encoder).unwrap().is_finite());
        prop_assert!(pose_variation(&seq).unwrap().is_finite());
        prop_assert!(trajectory_length(&seq, &body).unwrap().is_finite());
    }
}

#[test]
fn variation_is_the_population_deviation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let n = rng.random_range(2..25);
        let joints = BodyModel::desk_rig().pose_joints();
        let mut seq = MotionSequence::from_translations(30.0, joints, &vec![[0.0; 3]; n]).unwrap();
        // only one parameter moves: the first axis-angle coordinate of one joint
        let j = rng.random_range(0..joints);
        for f in &mut seq.frames {
            f.theta[j] = to_6d(&rodrigues([rng.random_range(-2.0..2.0), 0.0, 0.0]));
        }
        let values: Vec<f64> = axis_angle_poses(&seq).unwrap().iter().map(|p| p[3 * j]).collect();
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let sample = (ss / (nf - 1.0)).sqrt();

        let population = pose_variation(&seq).unwrap() * (3 * joints) as f64;
        let ratio = sample / population;
        if sample > 1e-9 {
            assert!((ratio - (nf / (nf - 1.0)).sqrt()).abs() <= 1e-9, "n {n}: ratio {ratio}");
        }
    }
}

#[test]
fn random_rotations_give_finite_plausibility_under_a_random_encoder() {
    let body = BodyModel::desk_rig();
    let k = 3 * body.pose_joints();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let latent = 5;
    let mut fill = |len: usize, s: f64| -> Vec<f64> { (0..len).map(|_| rng.random_range(-s..s)).collect() };
    let encoder = PoseEncoder {
        latent,
        pose_dim: k,
        a: fill(latent * k, 1.0),
        b: fill(latent, 1.0),
        c: fill(latent * k, 0.1),
        d: fill(latent, 0.1),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut seq = MotionSequence::from_translations(30.0, body.pose_joints(), &[[0.0; 3]; 10]).unwrap();
    for f in &mut seq.frames {
        for t in &mut f.theta {
            *t = to_6d(&rodrigues(random_rotvec(&mut rng, std::f64::consts::PI)));
        }
    }
    let v = pose_plausibility(&seq, &encoder).unwrap();
    assert!(v.is_finite() && v >= 0.0, "{v}");
}
