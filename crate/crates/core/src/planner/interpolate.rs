use crate::error::{Error, Result};

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Total length of a polyline.
pub fn path_length(points: &[[f64; 3]]) -> f64 {
    points.windows(2).map(|w| dist(&w[0], &w[1])).sum()
}

/// `n` frames evenly spaced in arc length along the polyline. The first and
/// last frames are the first and last waypoints, bit for bit.
pub fn interpolate(waypoints: &[[f64; 3]], n: usize) -> Result<Vec<[f64; 3]>> {
    if waypoints.len() < 2 {
        return Err(Error::TooFewWaypoints(waypoints.len()));
    }
    if n < 2 {
        return Err(Error::TooFewFrames { need: 2, got: n });
    }
    if waypoints.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("waypoints must be finite".into()));
    }
    // cumulative[i] = arc length up to waypoint i
    let mut cumulative = Vec::with_capacity(waypoints.len());
    cumulative.push(0.0);
    for w in waypoints.windows(2) {
        cumulative.push(cumulative.last().unwrap() + dist(&w[0], &w[1]));
    }
    let total = *cumulative.last().unwrap();
    let first = waypoints[0];
    let last = *waypoints.last().unwrap();

    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        if i == 0 {
            out.push(first);
            continue;
        }
        if i + 1 == n {
            out.push(last);
            continue;
        }
        let s = total * i as f64 / (n - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 { ((s - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (waypoints[seg], waypoints[seg + 1]);
        out.push(std::array::from_fn(|k| a[k] + t * (b[k] - a[k])));
    }
    Ok(out)
}
