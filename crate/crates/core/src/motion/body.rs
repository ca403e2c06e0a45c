//! Skinned body model: template mesh, joint tree and skinning weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{vec3, Vec3};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// On-disk layout of a body model. Arrays are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyModelData {
    pub template_points: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub rest_joints: Vec<[f64; 3]>,
    /// Parent joint per joint; `null` for the root.
    pub parent: Vec<Option<usize>>,
    /// One row per template point, one column per joint.
    pub weights: Vec<Vec<f64>>,
}

/// A validated body model. Construct with [`BodyModel::new`] or
/// [`BodyModel::desk_rig`].
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    data: BodyModelData,
    root: usize,
    /// Joints ordered so that every parent precedes its children.
    order: Vec<usize>,
    /// For each joint, its slot in a frame's `theta` block (`None` for root).
    pose_slot: Vec<Option<usize>>,
}

impl BodyModel {
    pub fn new(data: BodyModelData) -> Result<Self> {
        let v = data.template_points.len();
        let k = data.rest_joints.len();
        if v == 0 {
            return Err(Error::InvalidBody("template has no points".into()));
        }
        if k == 0 {
            return Err(Error::InvalidBody("skeleton has no joints".into()));
        }
        if data.parent.len() != k {
            return Err(Error::InvalidBody(format!(
                "parent array has {} entries for {k} joints",
                data.parent.len()
            )));
        }
        let finite = data
            .template_points
            .iter()
            .chain(&data.rest_joints)
            .flatten()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidBody("non-finite coordinates".into()));
        }
        for (fi, face) in data.faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&i| i >= v) {
                return Err(Error::InvalidBody(format!(
                    "face {fi} references vertex {bad} but the template has {v} points"
                )));
            }
        }
        if data.weights.len() != v {
            return Err(Error::InvalidBody(format!(
                "weights have {} rows for {v} points",
                data.weights.len()
            )));
        }
        for (vi, row) in data.weights.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidBody(format!(
                    "weight row {vi} has {} columns for {k} joints",
                    row.len()
                )));
            }
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidBody(format!("weight row {vi} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(Error::InvalidBody(format!("weight row {vi} sums to {sum}")));
            }
        }

        let roots: Vec<usize> = (0..k).filter(|&j| data.parent[j].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidBody(format!(
                "joint tree needs exactly one root, found {}",
                roots.len()
            )));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); k];
        for (j, p) in data.parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= k || p == j {
                    return Err(Error::InvalidBody(format!("joint {j} has invalid parent {p}")));
                }
                children[p].push(j);
            }
        }
        let mut order = Vec::with_capacity(k);
        let mut stack = vec![root];
        while let Some(j) = stack.pop() {
            order.push(j);
            stack.extend(children[j].iter().rev());
        }
        if order.len() != k {
            return Err(Error::InvalidBody("joint tree has a cycle or is disconnected".into()));
        }

        let mut pose_slot = vec![None; k];
        let mut slot = 0;
        for (j, s) in pose_slot.iter_mut().enumerate() {
            if j != root {
                *s = Some(slot);
                slot += 1;
            }
        }

        Ok(BodyModel {
            data,
            root,
            order,
            pose_slot,
        })
    }

    pub fn data(&self) -> &BodyModelData {
        &self.data
    }

    pub fn into_data(self) -> BodyModelData {
        self.data
    }

    pub fn num_points(&self) -> usize {
        self.data.template_points.len()
    }

    pub fn num_joints(&self) -> usize {
        self.data.rest_joints.len()
    }

    /// Joint rotations carried per frame (every joint except the root).
    pub fn pose_joints(&self) -> usize {
        self.num_joints() - 1
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.data.faces
    }

    pub fn template_points(&self) -> &[[f64; 3]] {
        &self.data.template_points
    }

    pub fn rest_joint(&self, j: usize) -> Vec3 {
        vec3(self.data.rest_joints[j])
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.data.parent[j]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn pose_slot(&self, j: usize) -> Option<usize> {
        self.pose_slot[j]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.data.weights
    }

    /// The built-in 8-joint rig: pelvis, spine, chest, head, two arms and two
    /// legs, each body part a capsule mesh. About 500 template points, z up,
    /// feet on `z = 0`, facing +y.
    pub fn desk_rig() -> Self {
        const PELVIS: usize = 0;
        const SPINE: usize = 1;
        const CHEST: usize = 2;
        const HEAD: usize = 3;
        const L_ARM: usize = 4;
        const R_ARM: usize = 5;
        const L_LEG: usize = 6;
        const R_LEG: usize = 7;

        let rest_joints = vec![
            [0.0, 0.0, 0.95],
            [0.0, 0.0, 1.15],
            [0.0, 0.0, 1.38],
            [0.0, 0.0, 1.52],
            [0.22, 0.0, 1.42],
            [-0.22, 0.0, 1.42],
            [0.1, 0.0, 0.88],
            [-0.1, 0.0, 0.88],
        ];
        let parent = vec![
            None,
            Some(PELVIS),
            Some(SPINE),
            Some(CHEST),
            Some(CHEST),
            Some(CHEST),
            Some(PELVIS),
            Some(PELVIS),
        ];
        let k = rest_joints.len();

        let mut builder = MeshBuilder::default();
        // torso: blend pelvis -> spine -> chest by height
        builder.capsule(
            Vec3::new(0.0, 0.0, 0.88),
            Vec3::new(0.0, 0.0, 1.45),
            0.15,
            |p| {
                let mut w = vec![0.0; k];
                let z = p.z;
                if z <= 0.95 {
                    w[PELVIS] = 1.0;
                } else if z <= 1.15 {
                    let s = (z - 0.95) / 0.2;
                    w[PELVIS] = 1.0 - s;
                    w[SPINE] = s;
                } else if z <= 1.38 {
                    let s = (z - 1.15) / 0.23;
                    w[SPINE] = 1.0 - s;
                    w[CHEST] = s;
                } else {
                    w[CHEST] = 1.0;
                }
                w
            },
        );
        builder.capsule(
            Vec3::new(0.0, 0.0, 1.6),
            Vec3::new(0.0, 0.0, 1.72),
            0.1,
            |_| one_hot(k, HEAD),
        );
        for (joint, x) in [(L_ARM, 0.22), (R_ARM, -0.22)] {
            builder.capsule(
                Vec3::new(x, 0.0, 1.42),
                Vec3::new(x * 1.1, 0.0, 0.85),
                0.05,
                |p| {
                    let s = ((1.42 - p.z) / 0.1).clamp(0.0, 1.0);
                    let mut w = vec![0.0; k];
                    w[joint] = 0.5 + 0.5 * s;
                    w[CHEST] = 0.5 - 0.5 * s;
                    w
                },
            );
        }
        for (joint, x) in [(L_LEG, 0.1), (R_LEG, -0.1)] {
            builder.capsule(
                Vec3::new(x, 0.0, 0.85),
                Vec3::new(x, 0.0, 0.07),
                0.07,
                |p| {
                    let s = ((0.88 - p.z) / 0.1).clamp(0.0, 1.0);
                    let mut w = vec![0.0; k];
                    w[joint] = 0.5 + 0.5 * s;
                    w[PELVIS] = 0.5 - 0.5 * s;
                    w
                },
            );
        }

        BodyModel::new(BodyModelData {
            template_points: builder.points,
            faces: builder.faces,
            rest_joints,
            parent,
            weights: builder.weights,
        })
        .expect("built-in rig is valid")
    }
}

fn one_hot(k: usize, j: usize) -> Vec<f64> {
    let mut w = vec![0.0; k];
    w[j] = 1.0;
    w
}

#[derive(Default)]
struct MeshBuilder {
    points: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    weights: Vec<Vec<f64>>,
}

impl MeshBuilder {
    const SLICES: usize = 10;
    const CAP_RINGS: usize = 2;
    const BODY_RINGS: usize = 4;

    /// Closed capsule around segment `a -> b`, counter-clockwise faces seen
    /// from outside.
    fn capsule(&mut self, a: Vec3, b: Vec3, radius: f64, weight: impl Fn(&Vec3) -> Vec<f64>) {
        let axis = (b - a).normalize();
        let helper = if axis.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let e1 = axis.cross(&helper).normalize();
        let e2 = axis.cross(&e1);

        let mut rings: Vec<(Vec3, f64)> = Vec::new();
        let cap = |k: usize| k as f64 * (PI / 2.0) / Self::CAP_RINGS as f64;
        for k in 1..=Self::CAP_RINGS {
            rings.push((a - axis * radius * cap(k).cos(), radius * cap(k).sin()));
        }
        for k in 1..=Self::BODY_RINGS {
            let s = k as f64 / (Self::BODY_RINGS + 1) as f64;
            rings.push((a + (b - a) * s, radius));
        }
        for k in (1..=Self::CAP_RINGS).rev() {
            rings.push((b + axis * radius * cap(k).cos(), radius * cap(k).sin()));
        }

        let mut push = |p: Vec3| {
            self.weights.push(weight(&p));
            self.points.push([p.x, p.y, p.z]);
            self.points.len() - 1
        };
        let bottom = push(a - axis * radius);
        let mut ring_ids = Vec::with_capacity(rings.len());
        for (center, r) in &rings {
            let ids: Vec<usize> = (0..Self::SLICES)
                .map(|j| {
                    let ang = 2.0 * PI * j as f64 / Self::SLICES as f64;
                    push(center + (e1 * ang.cos() + e2 * ang.sin()) * *r)
                })
                .collect();
            ring_ids.push(ids);
        }
        let top = push(b + axis * radius);

        let n = Self::SLICES;
        for j in 0..n {
            let jn = (j + 1) % n;
            self.faces.push([bottom, ring_ids[0][jn], ring_ids[0][j]]);
        }
        for w in ring_ids.windows(2) {
            let (lo, hi) = (&w[0], &w[1]);
            for j in 0..n {
                let jn = (j + 1) % n;
                self.faces.push([lo[j], lo[jn], hi[j]]);
                self.faces.push([lo[jn], hi[jn], hi[j]]);
            }
        }
        let last = ring_ids.last().expect("capsule has rings");
        for j in 0..n {
            let jn = (j + 1) % n;
            self.faces.push([last[j], last[jn], top]);
        }
    }
}
