//! Bogovskii right inverse of the divergence on domains star-shaped with respect to a ball.

use rayon::prelude::*;

use crate::domains::{ray_audit, DomainSpec};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::{linalg, Error, Point, Result};

/// Where the solve lives.
#[derive(Clone, Debug)]
pub enum StarDomain<'a> {
    Ball { center: Point, radius: f64 },
    /// `Ω ∩ B_rho(z0)` for a boundary point `z0`.
    Region { spec: &'a DomainSpec, z0: Point, rho: f64 },
}

impl StarDomain<'_> {
    fn contains(&self, n: usize, x: &Point) -> bool {
        match self {
            StarDomain::Ball { center, radius } => linalg::norm(n, &linalg::sub(x, center)) < *radius,
            StarDomain::Region { spec, z0, rho } => linalg::norm(n, &linalg::sub(x, z0)) < *rho && spec.contains(x),
        }
    }

    /// Checks that the averaging ball `B_r(x0)` is admissible.
    fn check(&self, n: usize, x0: &Point, r: f64) -> Result<()> {
        match self {
            StarDomain::Ball { center, radius } => {
                if linalg::norm(n, &linalg::sub(x0, center)) + r > *radius * (1.0 + 1e-12) {
                    return Err(Error::Config("averaging ball leaves the domain ball".into()));
                }
            }
            StarDomain::Region { spec, z0, rho } => {
                let audit = ray_audit(spec, z0, *rho, 64);
                if !audit.pass {
                    return Err(Error::NotStarLike(format!("{} of {} rays cross more than once", audit.failures, audit.rays)));
                }
                let c = linalg::axpy(0.5 * rho, &spec.normal_at(z0), z0);
                if linalg::norm(n, &linalg::sub(x0, &c)) + r > 0.25 * rho * (1.0 + 1e-12) {
                    return Err(Error::Config("averaging ball must lie in B_{rho/4}(z0 + rho nu / 2)".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BogovskiiResult {
    pub u: VectorField,
    pub mask: Vec<bool>,
    /// `|div_h u - g|_2 / |g|_2` with central differences.
    pub div_residual: f64,
    /// `max |u|` on mask cells touching the complement, over `max |u|`.
    pub trace_max: f64,
    /// `|∫ g| / |g|_1`.
    pub integral_defect: f64,
    /// `|∇u|_q / |g|_q`.
    pub w1q_ratio: f64,
    pub q: f64,
}

const GAUSS_NODES: [f64; 8] = [
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438, 0.7554044083550030,
    0.8656312023878318, 0.9445750230732326, 0.9894009349916499,
];
const GAUSS_WEIGHTS: [f64; 8] = [
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767, 0.1246289712555339,
    0.0951585116824928, 0.0622535239386479, 0.0271524594117541,
];

fn bump(t2: f64) -> f64 {
    if t2 < 1.0 {
        (-1.0 / (1.0 - t2)).exp()
    } else {
        0.0
    }
}

/// `∫_{B_R} exp(-1/(1 - |z|^2/R^2)) dz`.
fn bump_mass(n: usize, r: f64) -> f64 {
    let m = 4000;
    let radial: f64 = (0..m)
        .map(|k| {
            let t = (k as f64 + 0.5) / m as f64;
            bump(t * t) * t.powi(n as i32 - 1)
        })
        .sum::<f64>()
        / m as f64;
    let sphere = match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    };
    sphere * r.powi(n as i32) * radial
}

/// Cells with a missing grid neighbour or one outside the mask.
fn edge_cells(grid: &Grid, mask: &[bool]) -> Vec<usize> {
    let n = grid.ndim();
    let strides = grid.strides();
    (0..grid.len())
        .filter(|&i| {
            mask[i] && {
                let idx = grid.multi(i);
                (0..n).any(|a| {
                    idx[a] == 0 || idx[a] + 1 == grid.shape()[a] || !mask[i - strides[a]] || !mask[i + strides[a]]
                })
            }
        })
        .collect()
}

/// Central difference of `v` along `a`, zero-extended, `None` at the grid ends.
fn central(grid: &Grid, v: &[f64], a: usize, i: usize) -> Option<f64> {
    let idx = grid.multi(i);
    let s = grid.strides()[a];
    (idx[a] > 0 && idx[a] + 1 < grid.shape()[a]).then(|| (v[i + s] - v[i - s]) / (2.0 * grid.spacing()[a]))
}

/// `u(x) = ∫ g(y) (x - y)/|x - y|^n ∫_{|x-y|}^∞ ω(y + s e) s^{n-1} ds dy` by cell quadrature,
/// with `ω` the normalised bump on `B_r(x0)` and the self cell skipped.
pub fn bogovskii(g: &ScalarField, domain: &StarDomain, x0: &Point, r: f64, q: f64) -> Result<BogovskiiResult> {
    let grid = g.grid();
    let n = grid.ndim();
    if !(r > 0.0) {
        return Err(Error::DegenerateBall(format!("averaging radius {r}")));
    }
    if !(q >= 1.0) {
        return Err(Error::Config(format!("exponent q = {q} below 1")));
    }
    domain.check(n, x0, r)?;
    let mask: Vec<bool> = (0..grid.len()).map(|i| domain.contains(n, &grid.point(i))).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::Empty("no grid cell in the domain".into()));
    }
    let vol = grid.cell_volume();
    let gv: Vec<f64> = g.values().iter().zip(&mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
    let l1: f64 = gv.iter().map(|v| v.abs()).sum::<f64>() * vol;
    let total: f64 = gv.iter().sum::<f64>() * vol;
    let integral_defect = if l1 > 0.0 { total.abs() / l1 } else { 0.0 };
    if integral_defect > 1e-10 {
        return Err(Error::NotMeanZero(format!("|∫g| / |g|_1 = {integral_defect:.3e}")));
    }
    let norm = 1.0 / bump_mass(n, r);
    let support: Vec<(Point, f64)> =
        (0..grid.len()).filter(|&i| gv[i] != 0.0).map(|i| (grid.point(i), gv[i] * vol)).collect();
    let r2 = r * r;
    let values: Vec<Point> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut out = [0.0; 3];
            if !mask[i] {
                return out;
            }
            let x = grid.point(i);
            for (y, w) in &support {
                let d = linalg::sub(&x, y);
                let dist = linalg::norm(n, &d);
                if dist == 0.0 {
                    continue;
                }
                let e = linalg::scale(1.0 / dist, &d);
                let yc = linalg::sub(y, x0);
                let b = linalg::dot(n, &e, &yc);
                let disc = b * b - (linalg::dot(n, &yc, &yc) - r2);
                if disc <= 0.0 {
                    continue;
                }
                let root = disc.sqrt();
                let lo = (-b - root).max(dist);
                let hi = -b + root;
                if hi <= lo {
                    continue;
                }
                let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
                let mut integral = 0.0;
                for (t, wt) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                    for s in [mid - half * t, mid + half * t] {
                        let z = linalg::axpy(s, &e, &yc);
                        integral += wt * bump(linalg::dot(n, &z, &z) / r2) * s.powi(n as i32 - 1);
                    }
                }
                let coef = w * norm * half * integral / dist.powi(n as i32);
                out = linalg::axpy(coef, &d, &out);
            }
            out
        })
        .collect();
    let comps: Vec<Vec<f64>> = (0..n).map(|a| values.iter().map(|v| v[a]).collect()).collect();

    let cells: Vec<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
    let mut res2 = 0.0;
    let mut g2 = 0.0;
    let mut grad_q = 0.0;
    let mut g_q = 0.0;
    for &i in &cells {
        let mut div = 0.0;
        let mut grad2 = 0.0;
        let mut ok = true;
        for a in 0..n {
            for (c, comp) in comps.iter().enumerate() {
                match central(grid, comp, a, i) {
                    Some(v) => {
                        grad2 += v * v;
                        if c == a {
                            div += v;
                        }
                    }
                    None => ok = false,
                }
            }
        }
        g2 += gv[i] * gv[i];
        g_q += gv[i].abs().powf(q);
        if ok {
            res2 += (div - gv[i]).powi(2);
            grad_q += grad2.sqrt().powf(q);
        }
    }
    let mag = |i: usize| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt();
    let umax = cells.iter().map(|&i| mag(i)).fold(0.0, f64::max);
    let tmax = edge_cells(grid, &mask).into_iter().map(mag).fold(0.0, f64::max);
    let safe = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok(BogovskiiResult {
        u: VectorField::new(grid.clone(), comps)?,
        mask,
        div_residual: safe(res2.sqrt(), g2.sqrt()),
        trace_max: safe(tmax, umax),
        integral_defect,
        w1q_ratio: safe(grad_q.powf(1.0 / q), g_q.powf(1.0 / q)),
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_case(m: usize) -> BogovskiiResult {
        let grid = Grid::cell_centered_box(2, m, -1.0, 2.0).unwrap();
        let g = ScalarField::from_fn(&grid, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 1.0 {
                x[0] * (1.0 - r2)
            } else {
                0.0
            }
        });
        bogovskii(&g, &StarDomain::Ball { center: [0.0; 3], radius: 1.0 }, &[0.0; 3], 0.5, 2.0).unwrap()
    }

    #[test]
    fn bump_mass_matches_direct_sum() {
        let grid = Grid::cell_centered_box(2, 400, -1.0, 2.0).unwrap();
        let direct: f64 =
            (0..grid.len()).map(|i| grid.point(i)).map(|p| bump((p[0] * p[0] + p[1] * p[1]) / 0.81)).sum::<f64>()
                * grid.cell_volume();
        assert!((direct - bump_mass(2, 0.9)).abs() < 1e-6 * direct);
    }

    #[test]
    fn residual_halves_on_refinement() {
        let a = disk_case(16);
        let b = disk_case(32);
        assert!(a.div_residual / b.div_residual > 1.6, "{} {}", a.div_residual, b.div_residual);
        assert!(b.div_residual < 0.2);
        assert!(b.u.component(0).iter().zip(&b.mask).all(|(v, &m)| m || *v == 0.0));
    }

    #[test]
    fn nonzero_mean_is_refused() {
        let grid = Grid::cell_centered_box(2, 8, -1.0, 2.0).unwrap();
        let g = ScalarField::constant(&grid, 1.0);
        let dom = StarDomain::Ball { center: [0.0; 3], radius: 1.0 };
        assert!(matches!(bogovskii(&g, &dom, &[0.0; 3], 0.5, 2.0), Err(Error::NotMeanZero(_))));
    }

    #[test]
    fn averaging_ball_must_fit() {
        let grid = Grid::cell_centered_box(2, 8, -1.0, 2.0).unwrap();
        let g = ScalarField::zeros(&grid);
        let dom = StarDomain::Ball { center: [0.0; 3], radius: 1.0 };
        assert!(matches!(bogovskii(&g, &dom, &[0.6, 0.0, 0.0], 0.5, 2.0), Err(Error::Config(_))));
    }
}
