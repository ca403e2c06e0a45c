//! Uniform spatial hash grid for exact nearest-neighbor queries.

use std::collections::HashMap;

use crate::numeric::Vec3;

type Cell = (i64, i64, i64);

/// Cells per axis never exceed this, whatever the requested cell size.
const MAX_CELLS_PER_AXIS: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct PointGrid<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    buckets: HashMap<Cell, Vec<usize>>,
    lo: Cell,
    hi: Cell,
}

impl<'a> PointGrid<'a> {
    /// Index the points whose indices are listed in `members`.
    pub fn new(points: &'a [Vec3], members: &[usize], cell: f64) -> Self {
        let mut origin = Vec3::repeat(f64::INFINITY);
        let mut upper = Vec3::repeat(f64::NEG_INFINITY);
        for &i in members {
            origin = origin.inf(&points[i]);
            upper = upper.sup(&points[i]);
        }
        if members.is_empty() {
            origin = Vec3::zeros();
            upper = Vec3::zeros();
        }
        let extent = (upper - origin).max();
        let cell = cell.max(extent / MAX_CELLS_PER_AXIS).max(1e-9);
        let mut grid = PointGrid {
            points,
            origin,
            cell,
            buckets: HashMap::new(),
            lo: (0, 0, 0),
            hi: (0, 0, 0),
        };
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for &i in members {
            let c = grid.cell_of(&points[i]);
            lo = (lo.0.min(c.0), lo.1.min(c.1), lo.2.min(c.2));
            hi = (hi.0.max(c.0), hi.1.max(c.1), hi.2.max(c.2));
            grid.buckets.entry(c).or_default().push(i);
        }
        if !members.is_empty() {
            grid.lo = lo;
            grid.hi = hi;
        }
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn cell_of(&self, p: &Vec3) -> Cell {
        let q = (p - self.origin) / self.cell;
        (q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64)
    }

    /// Nearest indexed point to `q` as `(index, squared distance)`. Ties go
    /// to the lowest index. `skip` excludes one index from the search.
    pub fn nearest(&self, q: &Vec3, skip: Option<usize>) -> Option<(usize, f64)> {
        if self.buckets.is_empty() {
            return None;
        }
        let c = self.cell_of(q);
        // shells beyond this radius contain no cells at all
        let reach = [
            (c.0 - self.lo.0).abs().max((self.hi.0 - c.0).abs()),
            (c.1 - self.lo.1).abs().max((self.hi.1 - c.1).abs()),
            (c.2 - self.lo.2).abs().max((self.hi.2 - c.2).abs()),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);

        let mut best: Option<(usize, f64)> = None;
        for shell in 0..=reach {
            for cell in shell_cells(c, shell) {
                let Some(bucket) = self.buckets.get(&cell) else {
                    continue;
                };
                for &i in bucket {
                    if Some(i) == skip {
                        continue;
                    }
                    let d2 = (self.points[i] - q).norm_squared();
                    let better = match best {
                        None => true,
                        Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
                    };
                    if better {
                        best = Some((i, d2));
                    }
                }
            }
            // everything outside the searched block is at least
            // `shell * cell` away from q, which sits inside the center cell
            if let Some((_, bd)) = best {
                let bound = shell as f64 * self.cell * (1.0 - 1e-12);
                if bd.sqrt() < bound {
                    break;
                }
            }
        }
        best
    }

    /// Median nearest-neighbor distance within a point set.
    pub fn median_spacing(points: &[Vec3]) -> f64 {
        if points.len() < 2 {
            return 0.0;
        }
        let lo = points.iter().fold(Vec3::repeat(f64::INFINITY), |a, p| a.inf(p));
        let hi = points.iter().fold(Vec3::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
        let extent = hi - lo;
        // guess a cell holding a handful of points
        let volume = extent.iter().map(|e| e.max(extent.max() * 1e-3).max(1e-9)).product::<f64>();
        let cell = (8.0 * volume / points.len() as f64).cbrt();
        let members: Vec<usize> = (0..points.len()).collect();
        let grid = PointGrid::new(points, &members, cell);
        let mut d: Vec<f64> = (0..points.len())
            .map(|i| grid.nearest(&points[i], Some(i)).map_or(0.0, |(_, d2)| d2.sqrt()))
            .collect();
        d.sort_by(f64::total_cmp);
        d[d.len() / 2]
    }
}

/// Cells at Chebyshev distance exactly `r` from `c`, in a fixed order.
fn shell_cells(c: Cell, r: i64) -> impl Iterator<Item = Cell> {
    (-r..=r).flat_map(move |dx| {
        (-r..=r).flat_map(move |dy| {
            let full = dx.abs() == r || dy.abs() == r;
            let dzs: Vec<i64> = if full { (-r..=r).collect() } else if r == 0 { vec![0] } else { vec![-r, r] };
            dzs.into_iter().map(move |dz| (c.0 + dx, c.1 + dy, c.2 + dz))
        })
    })
}
