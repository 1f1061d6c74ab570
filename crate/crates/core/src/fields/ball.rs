use crate::error::precondition;
use crate::fields::{Grid, ScalarField};
use crate::{Error, Point, Result};

/// Closed-ball membership with a relative slack of 1e-12 on r^2.
pub fn within_ball(dist2: f64, r: f64) -> bool {
    dist2 <= r * r * (1.0 + 1e-12)
}

/// Per-axis candidate (wrapped index, signed offset in length units), sorted by index.
fn axis_candidates(grid: &Grid, a: usize, lo: i64, hi: i64, delta: impl Fn(i64) -> f64) -> Vec<(usize, f64)> {
    let n = grid.shape()[a] as i64;
    let mut out: Vec<(usize, f64)> = Vec::new();
    for t in lo..=hi {
        let idx = if grid.periodic()[a] {
            t.rem_euclid(n)
        } else if (0..n).contains(&t) {
            t
        } else {
            continue;
        };
        let d = delta(t);
        out.push((idx as usize, d));
    }
    out.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.abs().partial_cmp(&y.1.abs()).unwrap()));
    out.dedup_by_key(|x| x.0);
    out
}

fn collect(grid: &Grid, axes: &[Vec<(usize, f64)>], r: f64) -> Vec<usize> {
    let s = grid.strides();
    let mut out = Vec::new();
    match grid.ndim() {
        2 => {
            for &(i, dx) in &axes[0] {
                let d0 = dx * dx;
                for &(j, dy) in &axes[1] {
                    if within_ball(d0 + dy * dy, r) {
                        out.push(i * s[0] + j * s[1]);
                    }
                }
            }
        }
        _ => {
            for &(i, dx) in &axes[0] {
                let d0 = dx * dx;
                for &(j, dy) in &axes[1] {
                    let d1 = d0 + dy * dy;
                    if !within_ball(d1, r) {
                        continue;
                    }
                    for &(k, dz) in &axes[2] {
                        if within_ball(d1 + dz * dz, r) {
                            out.push(i * s[0] + j * s[1] + k * s[2]);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Flat indices (ascending) of nodes in the closed ball of radius `r` about a node.
pub fn node_ball(grid: &Grid, center: &[usize; 3], r: f64) -> Vec<usize> {
    let axes: Vec<_> = (0..grid.ndim())
        .map(|a| {
            let h = grid.spacing()[a];
            let m = (r / h).ceil() as i64;
            let c = center[a] as i64;
            axis_candidates(grid, a, c - m, c + m, |t| (t - c) as f64 * h)
        })
        .collect();
    collect(grid, &axes, r)
}

/// Flat indices (ascending) of nodes in the closed ball about an arbitrary point.
pub fn point_ball(grid: &Grid, center: &Point, r: f64) -> Vec<usize> {
    let axes: Vec<_> = (0..grid.ndim())
        .map(|a| {
            let h = grid.spacing()[a];
            let o = grid.origin()[a];
            let lo = ((center[a] - r - o) / h).ceil() as i64 - 1;
            let hi = ((center[a] + r - o) / h).floor() as i64 + 1;
            axis_candidates(grid, a, lo, hi, |t| o + t as f64 * h - center[a])
        })
        .collect();
    collect(grid, &axes, r)
}

/// Reference enumeration: scans every node with the same membership predicate.
pub fn brute_force_node_ball(grid: &Grid, center: &[usize; 3], r: f64) -> Vec<usize> {
    let n = grid.ndim();
    let mut out = Vec::new();
    for f in 0..grid.len() {
        let idx = grid.multi(f);
        let mut d2 = 0.0;
        for a in 0..n {
            let len = grid.shape()[a] as i64;
            let mut off = idx[a] as i64 - center[a] as i64;
            if grid.periodic()[a] {
                off = off.rem_euclid(len);
                if off > len / 2 {
                    off -= len;
                }
            }
            let d = off as f64 * grid.spacing()[a];
            d2 += d * d;
        }
        if within_ball(d2, r) {
            out.push(f);
        }
    }
    out
}

fn check_radius(grid: &Grid, r: f64) -> Result<()> {
    let min = 2.0 * grid.max_spacing();
    if r < min * (1.0 - 1e-12) {
        return Err(precondition("radius >= 2 max spacing", format!("r = {r} < {min}")));
    }
    Ok(())
}

fn mean_of(values: &[f64], idx: impl Iterator<Item = usize>) -> Option<f64> {
    let mut s = 0.0;
    let mut k = 0usize;
    for i in idx {
        s += values[i];
        k += 1;
    }
    (k > 0).then(|| s / k as f64)
}

/// Mean of the samples whose nodes lie in the closed ball (and in the mask, if given).
pub fn ball_average(u: &ScalarField, center: &Point, r: f64, mask: Option<&[bool]>) -> Result<f64> {
    check_radius(u.grid(), r)?;
    let nodes = point_ball(u.grid(), center, r);
    let it = nodes.into_iter().filter(|&i| mask.is_none_or(|m| m[i]));
    mean_of(u.values(), it).ok_or_else(|| Error::DegenerateBall(format!("no samples in B({center:?}, {r})")))
}

/// Node-centred variant of [`ball_average`].
pub fn ball_average_node(u: &ScalarField, center: &[usize; 3], r: f64, mask: Option<&[bool]>) -> Result<f64> {
    check_radius(u.grid(), r)?;
    let nodes = node_ball(u.grid(), center, r);
    let it = nodes.into_iter().filter(|&i| mask.is_none_or(|m| m[i]));
    mean_of(u.values(), it).ok_or_else(|| Error::DegenerateBall(format!("no samples about node {center:?}")))
}
