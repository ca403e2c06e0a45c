use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::grid::PointGrid;
use crate::error::{Error, Result};
use crate::numeric::{vec3, Vec3};

const UNIT_TOLERANCE: f64 = 1e-6;

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn from_points<'a, I: IntoIterator<Item = &'a Vec3>>(points: I) -> Option<Aabb> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Aabb {
            min: [first.x, first.y, first.z],
            max: [first.x, first.y, first.z],
        };
        for p in it {
            for a in 0..3 {
                b.min[a] = b.min[a].min(p[a]);
                b.max[a] = b.max[a].max(p[a]);
            }
        }
        Some(b)
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = self.min[a].max(other.min[a]);
            out.max[a] = self.max[a].min(other.max[a]);
            if out.min[a] > out.max[a] {
                return None;
            }
        }
        Some(out)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Strict interior test.
    pub fn contains_strictly(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] > self.min[a] && p[a] < self.max[a])
    }

    pub fn inflate(&self, by: f64) -> Aabb {
        Aabb {
            min: self.min.map(|v| v - by),
            max: self.max.map(|v| v + by),
        }
    }

    pub fn center(&self) -> Vec3 {
        (vec3(self.min) + vec3(self.max)) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        vec3(self.max) - vec3(self.min)
    }
}

/// A static object: surface samples with outward unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    aabb: Aabb,
    spacing: f64,
}

impl SceneObject {
    pub fn new(name: impl Into<String>, points: Vec<[f64; 3]>, normals: Vec<[f64; 3]>) -> Result<Self> {
        let name = name.into();
        if points.is_empty() {
            return Err(Error::InvalidConfig(format!("object '{name}' has no points")));
        }
        if points.len() != normals.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: normals.len(),
            });
        }
        let points: Vec<Vec3> = points.into_iter().map(vec3).collect();
        let normals: Vec<Vec3> = normals.into_iter().map(vec3).collect();
        if points.iter().chain(&normals).any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidConfig(format!("object '{name}' has non-finite values")));
        }
        if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > UNIT_TOLERANCE) {
            return Err(Error::InvalidConfig(format!(
                "object '{name}': normal {i} has length {}",
                normals[i].norm()
            )));
        }
        let aabb = Aabb::from_points(&points).expect("non-empty");
        let spacing = PointGrid::median_spacing(&points);
        Ok(SceneObject {
            name,
            points,
            normals,
            aabb,
            spacing,
        })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn aabb(&self) -> &Aabb {
        &self.aabb
    }

    /// Median nearest-neighbor distance between the object's points.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `count` points sampled uniformly over the surface of the box
    /// `[min, max]`, with outward face normals. Deterministic in `seed`.
    pub fn box_surface(name: impl Into<String>, min: [f64; 3], max: [f64; 3], count: usize, seed: u64) -> Result<Self> {
        let e = [max[0] - min[0], max[1] - min[1], max[2] - min[2]];
        if e.iter().any(|v| !(*v > 0.0)) || count == 0 {
            return Err(Error::InvalidConfig("box needs positive extents and points".into()));
        }
        // faces: (fixed axis, side) with areas
        let faces: Vec<(usize, bool, f64)> = (0..3)
            .flat_map(|a| {
                let area = e[(a + 1) % 3] * e[(a + 2) % 3];
                [(a, false, area), (a, true, area)]
            })
            .collect();
        let total: f64 = faces.iter().map(|f| f.2).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(count);
        let mut normals = Vec::with_capacity(count);
        for _ in 0..count {
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = faces[faces.len() - 1];
            for f in &faces {
                if pick < f.2 {
                    chosen = *f;
                    break;
                }
                pick -= f.2;
            }
            let (axis, high, _) = chosen;
            let mut p = [0.0; 3];
            for a in 0..3 {
                p[a] = min[a] + rng.random::<f64>() * e[a];
            }
            p[axis] = if high { max[axis] } else { min[axis] };
            let mut n = [0.0; 3];
            n[axis] = if high { 1.0 } else { -1.0 };
            points.push(p);
            normals.push(n);
        }
        SceneObject::new(name, points, normals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aabb_intersection() {
        let a = Aabb {
            min: [0.0; 3],
            max: [1.0; 3],
        };
        let b = Aabb {
            min: [2.0; 3],
            max: [3.0; 3],
        };
        assert!(a.intersection(&b).is_none());
        let c = Aabb {
            min: [0.5; 3],
            max: [3.0; 3],
        };
        assert_eq!(
            a.intersection(&c),
            Some(Aabb {
                min: [0.5; 3],
                max: [1.0; 3]
            })
        );
    }

    #[test]
    fn rejects_non_unit_normals() {
        let err = SceneObject::new("x", vec![[0.0; 3]], vec![[0.0, 0.0, 2.0]]);
        assert!(err.is_err());
    }

    #[test]
    fn box_surface_points_lie_on_the_box() {
        let obj = SceneObject::box_surface("table", [0.0, 0.0, 0.0], [1.0, 2.0, 0.5], 500, 7).unwrap();
        assert_eq!(obj.len(), 500);
        for (p, n) in obj.points().iter().zip(obj.normals()) {
            assert!(obj.aabb().contains(p));
            let on_face = (0..3).any(|a| {
                (n[a] == 1.0 && p[a] == [1.0, 2.0, 0.5][a]) || (n[a] == -1.0 && p[a] == 0.0)
            });
            assert!(on_face);
        }
        assert!(obj.spacing() > 0.0);
    }
}
