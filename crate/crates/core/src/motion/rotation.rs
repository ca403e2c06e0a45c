//! Continuous 6D rotation parameterization.
//!
//! A rotation is stored as the first two columns of its matrix. Decoding runs
//! Gram-Schmidt on the two 3-vectors and completes the frame with a cross
//! product, so any pair of non-parallel vectors maps to a proper rotation.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::numeric::Vec3;

/// Normalizations dividing by less than this are rejected.
pub const DEGENERATE_NORM: f64 = 1e-12;

pub const IDENTITY_6D: [f64; 6] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

/// Intermediate values of the Gram-Schmidt decode, kept for the backward pass.
#[derive(Debug, Clone, Copy)]
pub struct Rot6dTape {
    a2: Vec3,
    b1: Vec3,
    b2: Vec3,
    norm1: f64,
    norm_u: f64,
}

pub fn rot6d_to_matrix(v: &[f64; 6]) -> Result<Matrix3<f64>> {
    rot6d_forward(v).map(|(m, _)| m)
}

pub fn rot6d_forward(v: &[f64; 6]) -> Result<(Matrix3<f64>, Rot6dTape)> {
    let a1 = Vec3::new(v[0], v[1], v[2]);
    let a2 = Vec3::new(v[3], v[4], v[5]);
    let norm1 = a1.norm();
    if !(norm1 >= DEGENERATE_NORM) {
        return Err(Error::DegenerateRotation("first column has zero length"));
    }
    let b1 = a1 / norm1;
    let u = a2 - b1 * b1.dot(&a2);
    let norm_u = u.norm();
    if !(norm_u >= DEGENERATE_NORM) {
        return Err(Error::DegenerateRotation("second column is parallel to the first"));
    }
    let b2 = u / norm_u;
    let b3 = b1.cross(&b2);
    let m = Matrix3::from_columns(&[b1, b2, b3]);
    Ok((
        m,
        Rot6dTape {
            a2,
            b1,
            b2,
            norm1,
            norm_u,
        },
    ))
}

/// Pulls a gradient with respect to the decoded matrix back onto the six
/// input numbers.
pub fn rot6d_backward(tape: &Rot6dTape, grad_matrix: &Matrix3<f64>) -> [f64; 6] {
    let Rot6dTape {
        a2,
        b1,
        b2,
        norm1,
        norm_u,
    } = *tape;
    let gb3: Vec3 = grad_matrix.column(2).into();
    let mut gb1: Vec3 = grad_matrix.column(0).into();
    let mut gb2: Vec3 = grad_matrix.column(1).into();

    // b3 = b1 x b2
    gb1 += b2.cross(&gb3);
    gb2 += gb3.cross(&b1);

    // b2 = u / |u|
    let gu = (gb2 - b2 * b2.dot(&gb2)) / norm_u;

    // u = a2 - (b1 . a2) b1
    let proj = b1.dot(&a2);
    let ga2 = gu - b1 * b1.dot(&gu);
    gb1 += -gu * proj - a2 * b1.dot(&gu);

    // b1 = a1 / |a1|
    let ga1 = (gb1 - b1 * b1.dot(&gb1)) / norm1;

    [ga1.x, ga1.y, ga1.z, ga2.x, ga2.y, ga2.z]
}

pub fn matrix_to_rot6d(m: &Matrix3<f64>) -> [f64; 6] {
    [
        m[(0, 0)],
        m[(1, 0)],
        m[(2, 0)],
        m[(0, 1)],
        m[(1, 1)],
        m[(2, 1)],
    ]
}

/// Rotation vector (axis times angle in radians) of a rotation matrix.
pub fn matrix_to_axis_angle(m: &Matrix3<f64>) -> Vec3 {
    let rot = Rotation3::from_matrix_unchecked(*m);
    UnitQuaternion::from_rotation_matrix(&rot).scaled_axis()
}

pub fn axis_angle_to_matrix(axis_angle: &Vec3) -> Matrix3<f64> {
    Rotation3::new(*axis_angle).into_inner()
}

/// Rotation about +z by `yaw` radians, encoded as 6D.
pub fn yaw_rot6d(yaw: f64) -> [f64; 6] {
    let (s, c) = yaw.sin_cos();
    [c, s, 0.0, -s, c, 0.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn canonical_identity() {
        let m = rot6d_to_matrix(&IDENTITY_6D).unwrap();
        assert_eq!(m, Matrix3::identity());
    }

    #[test]
    fn scale_invariance() {
        let m = rot6d_to_matrix(&[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]).unwrap();
        assert_eq!(m, Matrix3::identity());
    }

    #[test]
    fn swapped_axes_decode_by_hand() {
        let m = rot6d_to_matrix(&[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let expected = Matrix3::from_columns(&[
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        ]);
        assert_eq!(m, expected);
        assert_abs_diff_eq!(m.determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(matches!(
            rot6d_to_matrix(&[0.0; 6]),
            Err(Error::DegenerateRotation(_))
        ));
        assert!(matches!(
            rot6d_to_matrix(&[1.0, 0.0, 0.0, 5.0, 0.0, 0.0]),
            Err(Error::DegenerateRotation(_))
        ));
        assert!(rot6d_to_matrix(&[f64::NAN, 0.0, 0.0, 0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn backward_matches_central_differences() {
        let v = [0.3, -1.2, 0.7, 0.9, 0.4, -0.2];
        let weights = Matrix3::new(0.1, -0.4, 0.7, 1.3, 0.2, -0.5, 0.6, -0.9, 0.35);
        let loss = |v: &[f64; 6]| rot6d_to_matrix(v).unwrap().component_mul(&weights).sum();
        let (_, tape) = rot6d_forward(&v).unwrap();
        let analytic = rot6d_backward(&tape, &weights);
        let h = 1e-6;
        for i in 0..6 {
            let mut plus = v;
            let mut minus = v;
            plus[i] += h;
            minus[i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert_abs_diff_eq!(analytic[i], numeric, epsilon = 1e-8);
        }
    }

    #[test]
    fn axis_angle_roundtrip() {
        let aa = Vec3::new(0.2, -0.5, 1.1);
        let m = axis_angle_to_matrix(&aa);
        let back = matrix_to_axis_angle(&m);
        assert_abs_diff_eq!(back, aa, epsilon = 1e-12);
        let m6 = rot6d_to_matrix(&matrix_to_rot6d(&m)).unwrap();
        assert_abs_diff_eq!(m6, m, epsilon = 1e-12);
    }
}
