//! Two-stage human/object collision detection and the margin penalty.
//!
//! Stage one intersects the axis-aligned boxes of the human points and the
//! object. Stage two pairs every object point inside that region with its
//! nearest human point inside the region. Each pair contributes
//! `max(n . (h - o), -margin)`, where `n` is the human's outward normal at
//! `h`; the term is positive exactly when `o` lies behind the human surface.

use crate::constraints::grid::PointGrid;
use crate::constraints::scene::{Aabb, SceneObject};
use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionPair {
    pub object_index: usize,
    pub human_index: usize,
    pub human_normal: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollisionPairs {
    pub pairs: Vec<CollisionPair>,
    /// Intersection of the two boxes, `None` when they are disjoint.
    pub region: Option<Aabb>,
}

impl CollisionPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn detect_collisions(human_points: &[Vec3], human_normals: &[Vec3], object: &SceneObject) -> Result<CollisionPairs> {
    if human_points.len() != human_normals.len() {
        return Err(Error::LengthMismatch {
            expected: human_points.len(),
            got: human_normals.len(),
        });
    }
    let Some(human_box) = Aabb::from_points(human_points) else {
        return Ok(CollisionPairs::default());
    };
    let Some(region) = human_box.intersection(object.aabb()) else {
        return Ok(CollisionPairs::default());
    };

    let humans: Vec<usize> = (0..human_points.len())
        .filter(|&i| region.contains(&human_points[i]))
        .collect();
    if humans.is_empty() {
        return Ok(CollisionPairs {
            pairs: Vec::new(),
            region: Some(region),
        });
    }
    let grid = PointGrid::new(human_points, &humans, 2.0 * object.spacing());
    let pairs = object
        .points()
        .iter()
        .enumerate()
        .filter(|(_, o)| region.contains(o))
        .filter_map(|(oi, o)| {
            grid.nearest(o, None).map(|(hi, _)| CollisionPair {
                object_index: oi,
                human_index: hi,
                human_normal: human_normals[hi],
            })
        })
        .collect();
    Ok(CollisionPairs {
        pairs,
        region: Some(region),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionTerm {
    pub loss: f64,
    /// Gradient on each human point (same length as the input points).
    pub grad_points: Vec<Vec3>,
    /// Gradient on each human point's normal, `h - o` for unclamped pairs.
    pub grad_normals: Vec<Vec3>,
    /// Pairs on the unclamped branch.
    pub active: usize,
}

/// Sum of the per-pair margin penalty. With `drop_clamped`, pairs on the
/// clamped branch are left out of the loss value; the gradient is the same
/// either way.
pub fn collision_loss(
    pairs: &CollisionPairs,
    human_points: &[Vec3],
    object: &SceneObject,
    margin: f64,
    drop_clamped: bool,
) -> Result<CollisionTerm> {
    let mut loss = CompensatedSum::new();
    let mut grad_points = vec![Vec3::zeros(); human_points.len()];
    let mut grad_normals = vec![Vec3::zeros(); human_points.len()];
    let mut active = 0;
    for pair in &pairs.pairs {
        if pair.human_index >= human_points.len() {
            return Err(Error::StaleIndices {
                index: pair.human_index,
                len: human_points.len(),
            });
        }
        if pair.object_index >= object.len() {
            return Err(Error::StaleIndices {
                index: pair.object_index,
                len: object.len(),
            });
        }
        let h = human_points[pair.human_index];
        let o = object.points()[pair.object_index];
        let depth = pair.human_normal.dot(&(h - o));
        if depth > -margin {
            loss.add(depth);
            grad_points[pair.human_index] += pair.human_normal;
            grad_normals[pair.human_index] += h - o;
            active += 1;
        } else if !drop_clamped {
            loss.add(-margin);
        }
    }
    Ok(CollisionTerm {
        loss: loss.value(),
        grad_points,
        grad_normals,
        active,
    })
}
