//! A skinned body together with the point cloud bound to its surface.

use crate::error::Result;
use crate::motion::binding::{bind_points, deform_backward, deform_points_with_normals, BarycentricBinding};
use crate::motion::body::BodyModel;
use crate::motion::kinematics::{fk_backward, forward_kinematics_taped, lbs_backward, lbs_skin, FkTape};
use crate::motion::sequence::Frame;
use crate::numeric::{vec3, Vec3};

/// Offset of the default surface points above their faces, in meters.
const DEFAULT_SURFACE_OFFSET: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct Human {
    pub body: BodyModel,
    pub binding: BarycentricBinding,
}

/// One frame of a posed human, with the tape needed to pull gradients on the
/// bound points back to the frame parameters.
#[derive(Debug, Clone)]
pub struct PosedHuman {
    pub vertices: Vec<Vec3>,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    tape: FkTape,
}

impl Human {
    /// Bind `points` (given in the rest pose) to the body's template mesh.
    pub fn new(body: BodyModel, points: &[[f64; 3]]) -> Result<Self> {
        let binding = bind_points(points, body.template_points(), body.faces())?;
        Ok(Human { body, binding })
    }

    /// One point per face, just outside the face centroid.
    pub fn with_surface_points(body: BodyModel) -> Result<Self> {
        let points = surface_points(&body, DEFAULT_SURFACE_OFFSET);
        Self::new(body, &points)
    }

    pub fn desk_default() -> Self {
        Self::with_surface_points(BodyModel::desk_rig()).expect("built-in rig binds")
    }

    pub fn num_points(&self) -> usize {
        self.binding.len()
    }

    pub fn pose(&self, frame: &Frame) -> Result<PosedHuman> {
        let (transforms, tape) = forward_kinematics_taped(&self.body, frame)?;
        let vertices = lbs_skin(&self.body, &transforms);
        let (points, normals) = deform_points_with_normals(&self.binding, &vertices, self.body.faces())?;
        Ok(PosedHuman {
            vertices,
            points,
            normals,
            tape,
        })
    }

    /// Gradient on the flattened frame given gradients on the bound points
    /// and on their normals.
    pub fn backward(&self, posed: &PosedHuman, grad_points: &[Vec3], grad_normals: &[Vec3]) -> Result<Vec<f64>> {
        let grad_vertices = deform_backward(
            &self.binding,
            &posed.vertices,
            self.body.faces(),
            grad_points,
            grad_normals,
        )?;
        let grad_transforms = lbs_backward(&self.body, &grad_vertices);
        Ok(fk_backward(&self.body, &posed.tape, &grad_transforms))
    }
}

/// Face centroids pushed `offset` meters along the face normal.
pub fn surface_points(body: &BodyModel, offset: f64) -> Vec<[f64; 3]> {
    let v = body.template_points();
    body.faces()
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| vec3(v[i]));
            let n = (b - a).cross(&(c - a)).normalize();
            let p = (a + b + c) / 3.0 + n * offset;
            [p.x, p.y, p.z]
        })
        .collect()
}
