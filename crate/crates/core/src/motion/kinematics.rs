//! Forward kinematics and linear blend skinning, with reverse-mode passes
//! that carry gradients on posed points back to a frame's parameters.

use nalgebra::Matrix3;

use crate::error::Result;
use crate::motion::body::BodyModel;
use crate::motion::rotation::{rot6d_backward, rot6d_forward, Rot6dTape};
use crate::motion::sequence::{frame_dim, Frame, GAMMA_OFFSET, THETA_OFFSET};
use crate::numeric::{vec3, Vec3};

/// `x -> linear * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub linear: Matrix3<f64>,
    pub translation: Vec3,
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            linear: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn translation(t: Vec3) -> Self {
        Affine {
            linear: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.linear * x + self.translation
    }
}

/// Per-joint state recorded by [`forward_kinematics_taped`].
#[derive(Debug, Clone)]
pub struct FkTape {
    local: Vec<(Matrix3<f64>, Rot6dTape)>,
    global: Vec<Matrix3<f64>>,
}

/// Global per-joint transforms for one frame. Each transform maps a rest-pose
/// point rigidly attached to that joint into the posed frame.
pub fn forward_kinematics(body: &BodyModel, frame: &Frame) -> Result<Vec<Affine>> {
    forward_kinematics_taped(body, frame).map(|(t, _)| t)
}

/// Posed joint positions for one frame.
pub fn joint_positions(body: &BodyModel, frame: &Frame) -> Result<Vec<Vec3>> {
    let transforms = forward_kinematics(body, frame)?;
    Ok(transforms
        .iter()
        .enumerate()
        .map(|(j, t)| t.apply(&body.rest_joint(j)))
        .collect())
}

pub fn forward_kinematics_taped(body: &BodyModel, frame: &Frame) -> Result<(Vec<Affine>, FkTape)> {
    let k = body.num_joints();
    let mut local = Vec::with_capacity(k);
    for j in 0..k {
        let block = match body.pose_slot(j) {
            None => &frame.gamma,
            Some(slot) => frame.theta.get(slot).ok_or_else(|| {
                crate::error::Error::DimensionMismatch(format!(
                    "frame has {} joint rotations, body needs {}",
                    frame.theta.len(),
                    body.pose_joints()
                ))
            })?,
        };
        local.push(rot6d_forward(block)?);
    }

    let mut global = vec![Matrix3::identity(); k];
    let mut position = vec![Vec3::zeros(); k];
    for &j in body.topological_order() {
        let rest = body.rest_joint(j);
        match body.parent(j) {
            None => {
                global[j] = local[j].0;
                position[j] = rest + vec3(frame.r);
            }
            Some(p) => {
                global[j] = global[p] * local[j].0;
                position[j] = position[p] + global[p] * (rest - body.rest_joint(p));
            }
        }
    }
    let transforms = (0..k)
        .map(|j| Affine {
            linear: global[j],
            translation: position[j] - global[j] * body.rest_joint(j),
        })
        .collect();
    Ok((transforms, FkTape { local, global }))
}

/// Blend the per-joint transforms with the skinning weights and apply them to
/// the template: `v_o = (sum_k w_k G_k) v_c`.
pub fn lbs_skin(body: &BodyModel, transforms: &[Affine]) -> Vec<Vec3> {
    body.template_points()
        .iter()
        .zip(body.weights())
        .map(|(p, row)| {
            let p = vec3(*p);
            let mut linear = Matrix3::zeros();
            let mut translation = Vec3::zeros();
            for (w, t) in row.iter().zip(transforms) {
                if *w != 0.0 {
                    linear += t.linear * *w;
                    translation += t.translation * *w;
                }
            }
            linear * p + translation
        })
        .collect()
}

/// Gradients on the blended transforms given gradients on the skinned points.
pub fn lbs_backward(body: &BodyModel, grad_points: &[Vec3]) -> Vec<(Matrix3<f64>, Vec3)> {
    let mut grads = vec![(Matrix3::zeros(), Vec3::zeros()); body.num_joints()];
    for ((p, row), g) in body.template_points().iter().zip(body.weights()).zip(grad_points) {
        if *g == Vec3::zeros() {
            continue;
        }
        let outer = g * vec3(*p).transpose();
        for (j, w) in row.iter().enumerate() {
            if *w != 0.0 {
                grads[j].0 += outer * *w;
                grads[j].1 += g * *w;
            }
        }
    }
    grads
}

/// Reverse pass through [`forward_kinematics_taped`]. Returns the gradient on
/// the flattened frame (`r`, `gamma`, `theta`).
pub fn fk_backward(body: &BodyModel, tape: &FkTape, grad_transforms: &[(Matrix3<f64>, Vec3)]) -> Vec<f64> {
    let k = body.num_joints();
    // translation_k = p_k - A_k j_k, so the translation gradient is the
    // gradient on p_k and contributes -g j_k^T to A_k
    let mut g_global: Vec<Matrix3<f64>> = (0..k)
        .map(|j| grad_transforms[j].0 - grad_transforms[j].1 * body.rest_joint(j).transpose())
        .collect();
    let mut g_position: Vec<Vec3> = grad_transforms.iter().map(|g| g.1).collect();

    let mut out = vec![0.0; frame_dim(body.pose_joints())];
    for &j in body.topological_order().iter().rev() {
        let (local, ref rot_tape) = tape.local[j];
        let g_local = match body.parent(j) {
            None => {
                out[..3].copy_from_slice(g_position[j].as_slice());
                g_global[j]
            }
            Some(p) => {
                let offset = body.rest_joint(j) - body.rest_joint(p);
                let gp = g_position[j];
                g_position[p] += gp;
                let ga = g_global[j];
                g_global[p] += ga * local.transpose() + gp * offset.transpose();
                tape.global[p].transpose() * ga
            }
        };
        let g6 = rot6d_backward(rot_tape, &g_local);
        let start = match body.pose_slot(j) {
            None => GAMMA_OFFSET,
            Some(slot) => THETA_OFFSET + slot * 6,
        };
        out[start..start + 6].copy_from_slice(&g6);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::body::BodyModelData;
    use crate::motion::rotation::{matrix_to_rot6d, IDENTITY_6D};
    use approx::assert_abs_diff_eq;
    use nalgebra::Rotation3;

    fn chain() -> BodyModel {
        BodyModel::new(BodyModelData {
            template_points: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            faces: vec![[0, 1, 2]],
            rest_joints: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            parent: vec![None, Some(0)],
            weights: vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]],
        })
        .unwrap()
    }

    #[test]
    fn rest_pose_fixes_joints() {
        let body = BodyModel::desk_rig();
        let frame = Frame::rest(body.pose_joints());
        let joints = joint_positions(&body, &frame).unwrap();
        for (j, p) in joints.iter().enumerate() {
            assert_eq!(*p, body.rest_joint(j));
        }
    }

    #[test]
    fn pure_translation_moves_every_joint() {
        let body = BodyModel::desk_rig();
        let mut frame = Frame::rest(body.pose_joints());
        frame.r = [0.0, 0.0, 5.0];
        let joints = joint_positions(&body, &frame).unwrap();
        for (j, p) in joints.iter().enumerate() {
            assert_abs_diff_eq!(*p, body.rest_joint(j) + Vec3::new(0.0, 0.0, 5.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn rotated_root_carries_child() {
        let body = chain();
        let rz = Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_2);
        let frame = Frame {
            r: [0.0; 3],
            gamma: matrix_to_rot6d(rz.matrix()),
            theta: vec![IDENTITY_6D],
        };
        let joints = joint_positions(&body, &frame).unwrap();
        assert_abs_diff_eq!(joints[1], Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn identity_transforms_leave_template_unchanged() {
        let body = BodyModel::desk_rig();
        let posed = lbs_skin(&body, &vec![Affine::identity(); body.num_joints()]);
        for (p, t) in posed.iter().zip(body.template_points()) {
            assert_eq!(*p, vec3(*t));
        }
    }

    #[test]
    fn blended_translation() {
        let body = chain();
        let posed = lbs_skin(
            &body,
            &[Affine::identity(), Affine::translation(Vec3::new(2.0, 0.0, 0.0))],
        );
        assert_eq!(posed[0], Vec3::new(0.0, 0.0, 0.0));
        assert_eq!(posed[1], Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(posed[2], Vec3::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn one_hot_vertex_follows_its_joint() {
        let body = chain();
        let posed = lbs_skin(
            &body,
            &[Affine::identity(), Affine::translation(Vec3::new(1.0, 0.0, 0.0))],
        );
        assert_eq!(posed[2], Vec3::new(3.0, 0.0, 0.0));
    }

    #[test]
    fn skinning_backward_matches_central_differences() {
        let body = BodyModel::desk_rig();
        let mut frame = Frame::rest(body.pose_joints());
        frame.r = [0.1, -0.2, 0.3];
        frame.gamma = [0.9, 0.2, -0.1, -0.3, 1.1, 0.25];
        for (i, t) in frame.theta.iter_mut().enumerate() {
            let s = i as f64 * 0.1;
            *t = [1.0, 0.1 + s, -0.2, 0.05 * s, 0.9, 0.3 - s];
        }
        // L = sum_v c_v . x_v with fixed pseudo-random c_v
        let coef: Vec<Vec3> = (0..body.num_points())
            .map(|i| {
                let f = i as f64;
                Vec3::new((f * 0.37).sin(), (f * 0.11).cos(), (f * 0.53).sin())
            })
            .collect();
        let loss = |flat: &[f64]| {
            let seq = crate::motion::sequence::MotionSequence::from_flat(30.0, 7, flat).unwrap();
            let t = forward_kinematics(&body, &seq.frames[0]).unwrap();
            lbs_skin(&body, &t)
                .iter()
                .zip(&coef)
                .map(|(x, c)| x.dot(c))
                .sum::<f64>()
        };
        let (t, tape) = forward_kinematics_taped(&body, &frame).unwrap();
        let _ = t;
        let grad_t = lbs_backward(&body, &coef);
        let analytic = fk_backward(&body, &tape, &grad_t);
        let base = crate::motion::sequence::MotionSequence {
            fps: 30.0,
            frames: vec![frame],
        }
        .to_flat();
        let h = 1e-6;
        for i in 0..base.len() {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i] += h;
            minus[i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (analytic[i] - numeric).abs() <= 1e-6 * numeric.abs().max(1.0),
                "coordinate {i}: analytic {} numeric {numeric}",
                analytic[i]
            );
        }
    }
}
