//! Attaching free points (Gaussian centers) to a triangle mesh.
//!
//! Every point is bound to its closest face by the barycentric coordinates of
//! the closest point on that face, plus the residual offset expressed in the
//! face's local frame (edge direction, in-plane perpendicular, normal). When
//! the mesh deforms, the point is rebuilt from the posed face, so the
//! transport is differentiable in the posed vertex positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{vec3, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub face_index: usize,
    pub barycentric: [f64; 3],
    /// Signed distance along the face normal at bind time, in meters.
    pub normal_offset: f64,
    /// In-plane residual along (edge, perpendicular). Zero whenever the point
    /// projects inside its face.
    pub tangent_offset: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycentricBinding {
    pub points: Vec<BoundPoint>,
    pub vertex_count: usize,
    pub face_count: usize,
}

impl BarycentricBinding {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_topology(&self, posed: &[Vec3], faces: &[[usize; 3]]) -> Result<()> {
        if posed.len() != self.vertex_count || faces.len() != self.face_count {
            return Err(Error::TopologyMismatch(format!(
                "bound against {} vertices / {} faces, given {} / {}",
                self.vertex_count,
                self.face_count,
                posed.len(),
                faces.len()
            )));
        }
        Ok(())
    }
}

/// Orthonormal frame of a triangle: unit edge `a -> b`, in-plane
/// perpendicular, unit normal (right-handed winding).
#[derive(Debug, Clone, Copy)]
struct FaceFrame {
    edge: Vec3,
    perp: Vec3,
    normal: Vec3,
    edge_len: f64,
    cross_len: f64,
}

impl FaceFrame {
    fn new(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Self> {
        let ab = b - a;
        let ac = c - a;
        let cross = ab.cross(&ac);
        let cross_len = cross.norm();
        let edge_len = ab.norm();
        if cross_len < 1e-15 || edge_len < 1e-15 {
            return None;
        }
        let normal = cross / cross_len;
        let edge = ab / edge_len;
        Some(FaceFrame {
            edge,
            perp: normal.cross(&edge),
            normal,
            edge_len,
            cross_len,
        })
    }
}

/// Closest point on triangle `abc` to `p`, as barycentric weights of `a, b, c`.
pub fn closest_point_barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

fn combine(bary: &[f64; 3], a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    a * bary[0] + b * bary[1] + c * bary[2]
}

/// Bind each point to its closest face. Equidistant faces resolve to the
/// lowest face index.
pub fn bind_points(points: &[[f64; 3]], vertices: &[[f64; 3]], faces: &[[usize; 3]]) -> Result<BarycentricBinding> {
    if faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let verts: Vec<Vec3> = vertices.iter().map(|v| vec3(*v)).collect();
    if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= verts.len())) {
        return Err(Error::TopologyMismatch(format!(
            "face {f:?} references a vertex beyond {}",
            verts.len()
        )));
    }
    let tris: Vec<(Vec3, Vec3, Vec3, Option<FaceFrame>)> = faces
        .iter()
        .map(|f| {
            let (a, b, c) = (verts[f[0]], verts[f[1]], verts[f[2]]);
            (a, b, c, FaceFrame::new(&a, &b, &c))
        })
        .collect();

    let bound = points
        .iter()
        .map(|p| {
            let p = vec3(*p);
            let mut best: Option<(usize, [f64; 3], f64)> = None;
            for (fi, (a, b, c, frame)) in tris.iter().enumerate() {
                if frame.is_none() {
                    continue;
                }
                let bary = closest_point_barycentric(&p, a, b, c);
                let d2 = (p - combine(&bary, a, b, c)).norm_squared();
                if best.is_none_or(|(_, _, bd)| d2 < bd) {
                    best = Some((fi, bary, d2));
                }
            }
            let (face_index, barycentric, _) =
                best.ok_or_else(|| Error::TopologyMismatch("every face is degenerate".into()))?;
            let (a, b, c, frame) = &tris[face_index];
            let frame = frame.expect("degenerate faces are skipped");
            let residual = p - combine(&barycentric, a, b, c);
            Ok(BoundPoint {
                face_index,
                barycentric,
                normal_offset: residual.dot(&frame.normal),
                tangent_offset: [residual.dot(&frame.edge), residual.dot(&frame.perp)],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BarycentricBinding {
        points: bound,
        vertex_count: vertices.len(),
        face_count: faces.len(),
    })
}

/// Positions of the bound points on a posed mesh.
pub fn deform_points(binding: &BarycentricBinding, posed: &[Vec3], faces: &[[usize; 3]]) -> Result<Vec<Vec3>> {
    deform_points_with_normals(binding, posed, faces).map(|(p, _)| p)
}

/// Positions of the bound points plus the unit normal of each point's posed
/// face (outward for counter-clockwise winding).
pub fn deform_points_with_normals(
    binding: &BarycentricBinding,
    posed: &[Vec3],
    faces: &[[usize; 3]],
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    binding.check_topology(posed, faces)?;
    let mut points = Vec::with_capacity(binding.len());
    let mut normals = Vec::with_capacity(binding.len());
    for bp in &binding.points {
        let f = faces[bp.face_index];
        let (a, b, c) = (posed[f[0]], posed[f[1]], posed[f[2]]);
        let frame = FaceFrame::new(&a, &b, &c).ok_or_else(|| {
            Error::TopologyMismatch(format!("face {} collapsed under deformation", bp.face_index))
        })?;
        points.push(
            combine(&bp.barycentric, &a, &b, &c)
                + frame.normal * bp.normal_offset
                + frame.edge * bp.tangent_offset[0]
                + frame.perp * bp.tangent_offset[1],
        );
        normals.push(frame.normal);
    }
    Ok((points, normals))
}

/// Reverse pass of [`deform_points_with_normals`]. `grad_points[i]` and
/// `grad_normals[i]` are the upstream gradients on the i-th output point and
/// normal; the result is the gradient on every posed vertex.
pub fn deform_backward(
    binding: &BarycentricBinding,
    posed: &[Vec3],
    faces: &[[usize; 3]],
    grad_points: &[Vec3],
    grad_normals: &[Vec3],
) -> Result<Vec<Vec3>> {
    binding.check_topology(posed, faces)?;
    let mut grad = vec![Vec3::zeros(); posed.len()];
    for (i, bp) in binding.points.iter().enumerate() {
        let gh = grad_points[i];
        let gn_ext = grad_normals[i];
        if gh == Vec3::zeros() && gn_ext == Vec3::zeros() {
            continue;
        }
        let f = faces[bp.face_index];
        let (a, b, c) = (posed[f[0]], posed[f[1]], posed[f[2]]);
        let frame = FaceFrame::new(&a, &b, &c).ok_or_else(|| {
            Error::TopologyMismatch(format!("face {} collapsed under deformation", bp.face_index))
        })?;
        let [o_edge, o_perp] = bp.tangent_offset;

        // perp = normal x edge
        let g_perp = gh * o_perp;
        let g_normal = gh * bp.normal_offset + gn_ext + frame.edge.cross(&g_perp);
        let g_edge = gh * o_edge + g_perp.cross(&frame.normal);

        // edge = (b - a) / |b - a|
        let g_ab_from_edge = (g_edge - frame.edge * frame.edge.dot(&g_edge)) / frame.edge_len;

        // normal = cross / |cross|, cross = (b - a) x (c - a)
        let g_cross = (g_normal - frame.normal * frame.normal.dot(&g_normal)) / frame.cross_len;
        let ab = b - a;
        let ac = c - a;
        let g_ab = ac.cross(&g_cross) + g_ab_from_edge;
        let g_ac = g_cross.cross(&ab);

        let [w0, w1, w2] = bp.barycentric;
        grad[f[0]] += gh * w0 - g_ab - g_ac;
        grad[f[1]] += gh * w1 + g_ab;
        grad[f[2]] += gh * w2 + g_ac;
    }
    Ok(grad)
}
