//! Signed distance on grids, nearest-point projection and reach estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::spec::{Chart, DomainKind, DomainSpec};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::linalg;
use crate::{Error, Point, Result};

/// Signed distance sampled on a grid.
#[derive(Clone, Debug)]
pub struct SignedDistanceField {
    pub d: ScalarField,
    pub grad: VectorField,
    /// Node lies in the band `|d| < band` and its projection is single-valued.
    pub valid: Vec<bool>,
    pub band: f64,
}

pub fn signed_distance(spec: &DomainSpec, grid: &Grid) -> Result<SignedDistanceField> {
    if !spec.has_boundary() {
        return Err(Error::Config("signed distance needs a boundary".into()));
    }
    if grid.ndim() != spec.ndim() {
        return Err(Error::Config("grid and domain dimensions differ".into()));
    }
    let band = spec.reach();
    let located: Vec<_> = (0..grid.len()).into_par_iter().map(|i| spec.locate(&grid.point(i)).expect("boundary")).collect();
    let n = spec.ndim();
    let d = ScalarField::new(grid.clone(), located.iter().map(|l| l.d).collect())?;
    let comps = (0..n).map(|a| located.iter().map(|l| l.normal[a]).collect()).collect();
    let grad = VectorField::new(grid.clone(), comps)?;
    let valid = located.iter().map(|l| !l.ambiguous && l.d.abs() < band).collect();
    Ok(SignedDistanceField { d, grad, valid, band })
}

/// Nearest boundary point of `x`, which must lie within the reach band.
pub fn project_to_boundary(spec: &DomainSpec, x: &Point) -> Result<Point> {
    let loc = spec.locate(x).ok_or_else(|| Error::Config("domain has no boundary".into()))?;
    let reach = spec.reach();
    if loc.d.abs() >= reach {
        return Err(Error::Ambiguous(format!("|d| = {} is not below the reach {reach}", loc.d.abs())));
    }
    if loc.ambiguous {
        return Err(Error::Ambiguous(format!("two nearest points for {x:?}")));
    }
    Ok(loc.foot)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachReport {
    /// `min(reach_inside, reach_outside)`, capped at the bounding-box diagonal.
    pub reach: f64,
    pub reach_inside: f64,
    pub reach_outside: f64,
    /// Boundary points with their chart-wise lower bound.
    pub chart_bounds: Vec<(Point, f64)>,
    /// Analytic lower bound from the type parameters.
    pub analytic: f64,
    pub samples: usize,
    /// The analytic bound exceeds the estimate.
    pub flagged: bool,
}

fn consistent(spec: &DomainSpec, z: &Point, nu: &Point, t: f64) -> bool {
    let x = linalg::axpy(t, nu, z);
    match spec.locate(&x) {
        Some(l) => !l.ambiguous && l.d.abs() >= t - 1e-6 * (1.0 + t),
        None => true,
    }
}

/// Largest `t <= cap` for which the projection from `z + t nu` stays single-valued.
fn ray_reach(spec: &DomainSpec, z: &Point, nu: &Point, cap: f64) -> f64 {
    if consistent(spec, z, nu, cap) {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..44 {
        let mid = 0.5 * (lo + hi);
        if consistent(spec, z, nu, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn reach_samples(spec: &DomainSpec, density: usize) -> Vec<Point> {
    let mut zs = spec.boundary_samples(density);
    if let DomainKind::PerturbedHalfSpace { r_h, .. } = spec.kind() {
        zs.extend(spec.boundary_samples_near(&[0.0; 3], 1.5 * r_h, density));
    }
    zs
}

/// `U_{alpha,beta,h}(z0)` membership in chart coordinates.
fn in_u(chart: &Chart, beta: f64, eta: &Point) -> bool {
    let m = chart.ndim - 1;
    let r = linalg::norm(m, eta);
    r < chart.alpha && (eta[m] - chart.graph.value(m, eta)).abs() < beta
}

/// Largest `rho` with `B_{2 rho}(z0)` inside `U_{alpha,beta,h}(z0)`, by bisection over sampled spheres.
pub fn rho0(chart: &Chart, beta: f64, cap: f64) -> f64 {
    let n = chart.ndim;
    let dirs = crate::domains::spec::sphere_points(n, if n == 2 { 64 } else { 200 });
    let inside = |rho: f64| {
        (1..=8).all(|k| {
            let r = 2.0 * rho * k as f64 / 8.0;
            dirs.iter().all(|d| in_u(chart, beta, &linalg::scale(r, d)))
        })
    };
    let hi0 = cap.min(chart.alpha).min(beta);
    if inside(hi0 / 2.0) {
        return hi0 / 2.0;
    }
    let (mut lo, mut hi) = (0.0, hi0 / 2.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Numerical reach by ray bisection from boundary samples plus the analytic bound.
pub fn estimate_reach(spec: &DomainSpec, density: usize) -> Result<ReachReport> {
    if !spec.has_boundary() {
        return Err(Error::Config("reach needs a boundary".into()));
    }
    let n = spec.ndim();
    let cap = spec.cap();
    let zs = reach_samples(spec, density);
    let per: Vec<(f64, f64)> = zs
        .par_iter()
        .map(|z| {
            let nu = spec.normal_at(z);
            (ray_reach(spec, z, &nu, cap), ray_reach(spec, z, &linalg::scale(-1.0, &nu), cap))
        })
        .collect();
    let reach_inside = per.iter().map(|p| p.0).fold(cap, f64::min);
    let reach_outside = per.iter().map(|p| p.1).fold(cap, f64::min);
    let reach = reach_inside.min(reach_outside);
    let tp = spec.type_params().expect("boundary implies type");
    let nf = n as f64;
    let kinv = |c: f64| if tp.k > 0.0 { (c * nf * tp.k).recip() } else { cap };
    let sparse: Vec<Point> = zs.iter().step_by((zs.len() / 8).max(1)).copied().collect();
    let chart_bounds: Vec<(Point, f64)> = match spec.kind() {
        DomainKind::HalfSpace => sparse.iter().map(|z| (*z, cap)).collect(),
        DomainKind::PerturbedHalfSpace { .. } => sparse.iter().map(|z| (*z, kinv(2.0).min(cap))).collect(),
        _ if tp.beta < 2.0 / (nf * tp.k) => sparse.iter().map(|z| (*z, tp.beta / 4.0)).collect(),
        _ => sparse
            .iter()
            .map(|z| {
                let chart = spec.chart_at(z)?;
                Ok((*z, kinv(8.0).min(rho0(&chart, tp.beta, cap))))
            })
            .collect::<Result<_>>()?,
    };
    let analytic = chart_bounds.iter().map(|c| c.1).fold(cap, f64::min);
    Ok(ReachReport {
        reach,
        reach_inside,
        reach_outside,
        chart_bounds,
        analytic,
        samples: zs.len(),
        flagged: analytic > reach * (1.0 + 1e-9),
    })
}

impl DomainSpec {
    /// Cached reach estimate (64 boundary samples per axis pair); the bbox diagonal without a boundary.
    pub fn reach(&self) -> f64 {
        *self.reach_cell().get_or_init(|| {
            if !self.has_boundary() {
                return self.cap();
            }
            let density = if self.ndim() == 2 { 64 } else { 256 };
            estimate_reach(self, density).map(|r| r.reach).unwrap_or(0.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::graph::{Bump, Graph};

    fn bump_phs(amp: f64) -> DomainSpec {
        let g = Graph::Bumps { bumps: vec![Bump { amp, center: vec![0.0], width: 0.5 }] };
        DomainSpec::perturbed_half_space(2, g, 0.5, ([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0])).unwrap()
    }

    #[test]
    fn half_space_reach_is_cap() {
        let s = DomainSpec::half_space(2, ([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0])).unwrap();
        let r = estimate_reach(&s, 16).unwrap();
        assert_eq!(r.reach, s.cap());
        assert_eq!(project_to_boundary(&s, &[0.3, 0.2, 0.0]).unwrap(), [0.3, 0.0, 0.0]);
    }

    #[test]
    fn ball_reach_is_radius() {
        let s = DomainSpec::ball(3, [0.0; 3], 0.4).unwrap();
        let r = estimate_reach(&s, 64).unwrap();
        assert!((r.reach_inside - 0.4).abs() < 1e-6, "{r:?}");
        assert!(r.analytic <= r.reach && !r.flagged);
        let p = project_to_boundary(&s, &[0.1, 0.0, 0.0]).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn reach_antitone_in_curvature() {
        let rs: Vec<f64> = [0.05, 0.1, 0.2].iter().map(|&a| estimate_reach(&bump_phs(a), 64).unwrap().reach).collect();
        assert!(rs[0] > rs[1] && rs[1] > rs[2], "{rs:?}");
    }

    #[test]
    fn distance_field_unit_gradient() {
        let s = bump_phs(0.1);
        let g = Grid::cell_centered_box(2, 24, -0.5, 1.0).unwrap();
        let sdf = signed_distance(&s, &g).unwrap();
        for i in 0..g.len() {
            if sdf.valid[i] {
                let v = sdf.grad.at(i);
                assert!((linalg::norm(2, &v) - 1.0).abs() < 1e-6);
                assert_eq!(sdf.d.values()[i] > 0.0, s.contains(&g.point(i)));
            }
        }
    }

    #[test]
    fn projection_is_first_order_optimal() {
        let s = bump_phs(0.1);
        let mut checked = 0;
        for k in 0..20 {
            let x = [-0.4 + 0.04 * k as f64, 0.02 * ((k % 5) as f64 - 2.0), 0.0];
            let Ok(p) = project_to_boundary(&s, &x) else {
                continue;
            };
            checked += 1;
            let g = s.boundary_graph().unwrap().jet(1, &p);
            let tangent = linalg::normalize_or_zero(2, &[1.0, g.grad[0], 0.0]);
            let v = linalg::sub(&x, &p);
            let len = linalg::norm(2, &v);
            if len > 1e-9 {
                assert!(linalg::dot(2, &v, &tangent).abs() / len < 1e-6);
            }
        }
        assert!(checked >= 12, "{checked}");
    }
}
