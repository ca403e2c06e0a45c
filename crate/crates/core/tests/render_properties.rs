use motionopt::render::{gaussian_covariance, render_frame, Camera, Gaussian, GaussianCloud};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_quaternion(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 {
            return q.map(|v| v / n);
        }
    }
}

fn random_cloud(rng: &mut ChaCha8Rng, count: usize) -> GaussianCloud {
    GaussianCloud {
        gaussians: (0..count)
            .map(|_| Gaussian {
                center: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..3.0)],
                scale: std::array::from_fn(|_| rng.random_range(0.01..0.3)),
                rotation: unit_quaternion(rng),
                opacity: rng.random_range(0.0..=1.0),
                color: std::array::from_fn(|_| rng.random_range(0.0..1.0)),
            })
            .collect(),
    }
}

fn camera(position: [f64; 3], size: usize) -> Camera {
    Camera {
        position,
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        focal: 40.0,
        width: size,
        height: size,
        background: [0.5; 3],
    }
}

#[test]
fn covariance_is_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..1000 {
        let s = std::array::from_fn(|_| 10f64.powf(rng.random_range(-2.0..1.0)));
        let sigma = gaussian_covariance(s, unit_quaternion(&mut rng)).unwrap();
        assert!((sigma - sigma.transpose()).amax() <= 1e-12 * sigma.amax(), "input {i}");
        assert!(sigma.cholesky().is_some(), "input {i}");
    }
}

#[test]
fn rendering_is_repeatable() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cloud = random_cloud(&mut rng, 300);
    let cam = camera([0.0, 0.0, -2.0], 41);
    assert_eq!(render_frame(&cloud, &cam).unwrap(), render_frame(&cloud, &cam).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn accumulated_opacity_stays_in_range(seed in any::<u64>(), count in 0usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_cloud(&mut rng, count);
        let img = render_frame(&cloud, &camera([0.0, 0.0, -2.0], 25)).unwrap();
        prop_assert!(img.alpha.iter().all(|a| (0.0..=1.0 + 1e-6).contains(a)));
        prop_assert!(img.pixels.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn shifting_scene_and_camera_together_changes_nothing(
        seed in any::<u64>(),
        offset in prop::array::uniform3(-64i32..64),
    ) {
        // dyadic coordinates keep every shifted difference exact
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cloud = random_cloud(&mut rng, 50);
        for g in &mut cloud.gaussians {
            g.center = g.center.map(|c| (c * 64.0).round() / 64.0);
        }
        let o = offset.map(|v| v as f64 / 8.0);
        let base = render_frame(&cloud, &camera([0.0, 0.0, -2.0], 21)).unwrap();
        for g in &mut cloud.gaussians {
            g.center = std::array::from_fn(|a| g.center[a] + o[a]);
        }
        let moved = render_frame(&cloud, &camera([o[0], o[1], o[2] - 2.0], 21)).unwrap();
        prop_assert_eq!(base, moved);
    }
}
