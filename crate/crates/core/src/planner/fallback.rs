//! Obstacle-aware straight-line planner with rectangular detours in the
//! horizontal plane.
//!
//! Obstacles are treated as vertical prisms over their clearance-inflated
//! footprint. Footprints whose detour rectangles touch are merged into their
//! bounding rectangle first, so every detour corner lies outside every other
//! footprint.

use crate::constraints::SceneObject;
use crate::error::{Error, Result};

/// Spacing of the safety samples along the final path, in meters.
pub const VERIFY_SPACING: f64 = 0.05;
/// Distance of detour corners beyond the inflated footprint, in meters.
pub const DETOUR_MARGIN: f64 = 0.02;
const MAX_DETOURS: usize = 256;

/// Closed axis-aligned rectangle in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn footprint(object: &SceneObject, clearance: f64) -> Rect {
        let b = object.aabb().inflate(clearance);
        Rect {
            min: [b.min[0], b.min[1]],
            max: [b.max[0], b.max[1]],
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|a| self.min[a] <= p[a] && p[a] <= self.max[a])
    }

    fn grow(&self, by: f64) -> Rect {
        Rect {
            min: [self.min[0] - by, self.min[1] - by],
            max: [self.max[0] + by, self.max[1] + by],
        }
    }

    fn overlaps(&self, o: &Rect) -> bool {
        (0..2).all(|a| self.min[a] <= o.max[a] && o.min[a] <= self.max[a])
    }

    fn union(&self, o: &Rect) -> Rect {
        Rect {
            min: [self.min[0].min(o.min[0]), self.min[1].min(o.min[1])],
            max: [self.max[0].max(o.max[0]), self.max[1].max(o.max[1])],
        }
    }

    /// Corners in counter-clockwise order.
    fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.min[0], self.min[1]],
            [self.max[0], self.min[1]],
            [self.max[0], self.max[1]],
            [self.min[0], self.max[1]],
        ]
    }

    /// Entry parameter in `[0, 1]` of segment `a -> b`, if it meets the rect.
    fn segment_entry(&self, a: [f64; 2], b: [f64; 2]) -> Option<f64> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for axis in 0..2 {
            let d = b[axis] - a[axis];
            if d == 0.0 {
                if a[axis] < self.min[axis] || a[axis] > self.max[axis] {
                    return None;
                }
            } else {
                let t0 = (self.min[axis] - a[axis]) / d;
                let t1 = (self.max[axis] - a[axis]) / d;
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
                if lo > hi {
                    return None;
                }
            }
        }
        Some(lo)
    }
}

fn xy(p: &[f64; 3]) -> [f64; 2] {
    [p[0], p[1]]
}

fn dist2d(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Merge rectangles whose grown copies touch, until none do.
fn merge(mut rects: Vec<Rect>, grow: f64) -> Vec<Rect> {
    loop {
        let mut merged = false;
        'outer: for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                if rects[i].grow(grow).overlaps(&rects[j].grow(grow)) {
                    rects[i] = rects[i].union(&rects[j]);
                    rects.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            return rects;
        }
    }
}

/// Detour corners around `expanded` for segment `a -> b`, on the shorter
/// side; ties go left.
fn detour(a: [f64; 2], b: [f64; 2], expanded: &Rect) -> Vec<[f64; 2]> {
    let corners = expanded.corners();
    let side: Vec<f64> = corners.iter().map(|c| cross(a, b, *c)).collect();
    // on a counter-clockwise boundary the left run is met from the b end
    let run = |positive: bool| -> Vec<[f64; 2]> {
        let on = |i: usize| if positive { side[i] > 0.0 } else { side[i] < 0.0 };
        let Some(start) = (0..4).find(|&i| on(i) && !on((i + 3) % 4)) else {
            return Vec::new();
        };
        let mut chain = Vec::new();
        let mut i = start;
        while on(i) && chain.len() < 4 {
            chain.push(corners[i]);
            i = (i + 1) % 4;
        }
        chain
    };
    let mut left = run(true);
    left.reverse();
    let right = run(false);
    let length = |chain: &[[f64; 2]]| {
        let mut prev = a;
        let mut total = 0.0;
        for c in chain.iter().chain(std::iter::once(&b)) {
            total += dist2d(prev, *c);
            prev = *c;
        }
        total
    };
    if left.is_empty() {
        return right;
    }
    if right.is_empty() {
        return left;
    }
    let (ll, lr) = (length(&left), length(&right));
    if lr < ll * (1.0 - 1e-12) {
        right
    } else {
        left
    }
}

/// Height for a detour point, interpolated by its projection onto `a -> b`.
fn lift(a: &[f64; 3], b: &[f64; 3], p: [f64; 2]) -> [f64; 3] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    [p[0], p[1], a[2] + t * (b[2] - a[2])]
}

/// Points every `spacing` meters along the polyline, endpoints included.
pub fn sample_polyline(path: &[[f64; 3]], spacing: f64) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for w in path.windows(2) {
        let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt();
        let steps = (len / spacing).ceil().max(1.0) as usize;
        for k in 0..steps {
            let t = k as f64 / steps as f64;
            out.push(std::array::from_fn(|a| w[0][a] + t * (w[1][a] - w[0][a])));
        }
    }
    if let Some(last) = path.last() {
        out.push(*last);
    }
    out
}

/// Waypoints from `start` to `goal` that keep every sample at least
/// `clearance` away from each obstacle box in the horizontal plane.
pub fn plan_fallback(start: [f64; 3], goal: [f64; 3], obstacles: &[SceneObject], clearance: f64) -> Result<Vec<[f64; 3]>> {
    if !(clearance.is_finite() && clearance > 0.0) {
        return Err(Error::InvalidConfig(format!("clearance must be > 0, got {clearance}")));
    }
    if start.iter().chain(&goal).any(|v| !v.is_finite()) || start == goal {
        return Err(Error::InvalidConfig("start and goal must be finite and distinct".into()));
    }
    let footprints: Vec<Rect> = obstacles.iter().map(|o| Rect::footprint(o, clearance)).collect();
    for (name, p) in [("start", start), ("goal", goal)] {
        if let Some(i) = footprints.iter().position(|r| r.contains(xy(&p))) {
            return Err(Error::NoPathFound(format!(
                "{name} lies within clearance of obstacle '{}'",
                obstacles[i].name
            )));
        }
    }
    let blockers = merge(footprints.clone(), DETOUR_MARGIN);
    for (name, p) in [("start", start), ("goal", goal)] {
        if blockers.iter().any(|r| r.grow(DETOUR_MARGIN).contains(xy(&p))) {
            return Err(Error::NoPathFound(format!("{name} is enclosed by a cluster of obstacles")));
        }
    }

    let mut path = vec![start, goal];
    let mut detours = 0;
    loop {
        let blocked = path.windows(2).enumerate().find_map(|(s, w)| {
            blockers
                .iter()
                .filter_map(|r| r.segment_entry(xy(&w[0]), xy(&w[1])).map(|t| (t, r)))
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .map(|(_, r)| (s, *r))
        });
        let Some((s, rect)) = blocked else { break };
        detours += 1;
        if detours > MAX_DETOURS {
            return Err(Error::NoPathFound("detour limit reached".into()));
        }
        let (a, b) = (path[s], path[s + 1]);
        let corners = detour(xy(&a), xy(&b), &rect.grow(DETOUR_MARGIN));
        if corners.is_empty() {
            return Err(Error::NoPathFound("segment cannot be routed around obstacle".into()));
        }
        let lifted: Vec<[f64; 3]> = corners.iter().map(|c| lift(&a, &b, *c)).collect();
        path.splice(s + 1..s + 1, lifted);
    }

    for p in sample_polyline(&path, VERIFY_SPACING) {
        if footprints.iter().any(|r| r.contains(xy(&p))) {
            return Err(Error::NoPathFound(format!("sample {p:?} violates clearance")));
        }
    }
    Ok(path)
}
