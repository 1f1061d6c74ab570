//! Star-likeness and Lipschitz audits of boundary balls `B_rho(z0) ∩ Ω`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::spec::{sphere_points, Chart, DomainSpec};
use crate::error::precondition;
use crate::linalg::{self, Mat};
use crate::{Error, Point, Result};

/// Checks `rho < min{1/(c n K + extra), alpha, beta, R_*}`, naming the first violated bound.
pub(crate) fn check_rho(spec: &DomainSpec, rho: f64, c: f64, extra: f64, label: &str) -> Result<()> {
    let tp = spec.type_params().ok_or_else(|| Error::Config("domain has no boundary".into()))?;
    let n = spec.ndim() as f64;
    let kcap = 1.0 / (c * n * tp.k + extra);
    let bounds = [(label.to_string(), kcap), ("alpha".into(), tp.alpha), ("beta".into(), tp.beta), ("R_*".into(), spec.reach())];
    if !(rho > 0.0) {
        return Err(precondition("rho > 0", format!("rho = {rho}")));
    }
    for (name, v) in bounds {
        if !(rho < v) {
            return Err(precondition(&format!("rho < {name}"), format!("rho = {rho}, bound = {v}")));
        }
    }
    Ok(())
}

/// The star-likeness hypothesis cap `min{1/(32nK), alpha, beta, R_*}`.
pub fn star_like_cap(spec: &DomainSpec) -> f64 {
    cap(spec, 32.0, 0.0)
}

/// The Lipschitz hypothesis cap `min{1/(96nK+4), alpha, beta, R_*}`.
pub fn lipschitz_cap(spec: &DomainSpec) -> f64 {
    cap(spec, 96.0, 4.0)
}

fn cap(spec: &DomainSpec, c: f64, extra: f64) -> f64 {
    let Some(tp) = spec.type_params() else { return 0.0 };
    let n = spec.ndim() as f64;
    (1.0 / (c * n * tp.k + extra)).min(tp.alpha).min(tp.beta).min(spec.reach())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarAudit {
    pub x0: Point,
    pub centres: usize,
    pub rays: usize,
    /// Rays with a crossing count other than one.
    pub failures: usize,
    pub max_crossings: usize,
    pub pass: bool,
}

/// Counts boundary crossings of rays from centres in `B_{rho/4}(x0)` with `∂(B_rho(z0) ∩ Ω)`.
pub fn check_star_like(spec: &DomainSpec, z0: &Point, rho: f64, rays: usize) -> Result<StarAudit> {
    check_rho(spec, rho, 32.0, 0.0, "1/(32nK)")?;
    Ok(ray_audit(spec, z0, rho, rays))
}

/// The ray-crossing count alone, for radii above the hypothesis cap.
pub fn ray_audit(spec: &DomainSpec, z0: &Point, rho: f64, rays: usize) -> StarAudit {
    let n = spec.ndim();
    let nu = spec.normal_at(z0);
    let x0 = linalg::axpy(0.5 * rho, &nu, z0);
    let inside = |p: &Point| linalg::norm(n, &linalg::sub(p, z0)) < rho && spec.contains(p);
    let mut centres = vec![x0];
    for r in [0.12 * rho, 0.24 * rho] {
        centres.extend(sphere_points(n, 4 * n).iter().map(|d| linalg::axpy(r, d, &x0)));
    }
    let dirs = sphere_points(n, rays.max(1));
    let steps = 800;
    let counts: Vec<usize> = centres
        .par_iter()
        .flat_map_iter(|c| {
            let inside = &inside;
            dirs.iter().map(move |e| {
                let mut prev = inside(c);
                let mut crossings = usize::from(!prev);
                for s in 1..=steps {
                    let p = linalg::axpy(2.0 * rho * s as f64 / steps as f64, e, c);
                    let now = inside(&p);
                    if now != prev {
                        crossings += 1;
                        prev = now;
                    }
                }
                crossings
            })
        })
        .collect();
    let failures = counts.iter().filter(|&&c| c != 1).count();
    StarAudit {
        x0,
        centres: centres.len(),
        rays: counts.len(),
        failures,
        max_crossings: counts.iter().copied().max().unwrap_or(0),
        pass: failures == 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    /// Largest height/tangential ratio over all sampled pairs.
    pub constant: f64,
    /// Same over pairs on the graph part (bound 13n).
    pub gamma_ratio: f64,
    /// Same over pairs on the sphere part (bound 600 n^{3/2}).
    pub sphere_ratio: f64,
    /// Smallest normal component of the mixed frame axis (bound 2/5).
    pub min_mixed_normal: f64,
    pub w0_count: usize,
    pub pass: bool,
}

/// `w0` on `Γ ∩ ∂B_rho(z0)` in the direction `u'` (chart coordinates).
fn seam_point(chart: &Chart, u: &Point, rho: f64) -> Point {
    let m = chart.ndim - 1;
    let at = |r: f64| {
        let mut p = linalg::scale(r, u);
        p[m] = chart.graph.value(m, &p);
        p
    };
    let (mut lo, mut hi) = (0.0, rho);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if linalg::norm(chart.ndim, &at(mid)) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * rho {
            break;
        }
    }
    at(0.5 * (lo + hi))
}

fn pair_ratio(n: usize, frame: &Mat, a: &Point, b: &Point) -> Option<f64> {
    let v = linalg::mat_t_vec(n, frame, &linalg::sub(a, b));
    let tang = linalg::norm(n - 1, &v);
    (tang > 0.0).then(|| v[n - 1].abs() / tang)
}

fn max_ratio(n: usize, frame: &Mat, a: &[Point], b: &[Point]) -> f64 {
    let mut best = 0.0f64;
    for p in a {
        for q in b {
            if let Some(r) = pair_ratio(n, frame, p, q) {
                best = best.max(r);
            }
        }
    }
    best
}

/// Local patch offsets in the (n-1)-ball of radius `r`.
fn patch(m: usize, r: f64) -> Vec<Point> {
    let k: i64 = if m == 1 { 12 } else { 5 };
    let mut out = Vec::new();
    for i in -k..=k {
        for j in if m == 1 { 0..=0 } else { -k..=k } {
            let p = [r * i as f64 / k as f64, r * j as f64 / k as f64, 0.0];
            if linalg::norm(m, &p) < r {
                out.push(p);
            }
        }
    }
    out
}

/// Samples the Lipschitz character of `B_rho(z0) ∩ Ω` near its seam in mixed frames.
pub fn sample_lipschitz_constant(spec: &DomainSpec, z0: &Point, rho: f64, samples: usize) -> Result<LipschitzAudit> {
    check_rho(spec, rho, 96.0, 4.0, "1/(96nK+4)")?;
    let chart = spec.chart_at(z0)?;
    let n = chart.ndim;
    let m = n - 1;
    let dirs: Vec<Point> = if m == 1 {
        vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]
    } else {
        sphere_points(2, samples.max(1))
    };
    let r2 = rho * rho;
    let per: Vec<(f64, f64, f64, f64)> = dirs
        .par_iter()
        .map(|u| {
            let w0 = seam_point(&chart, u, rho);
            let jet = chart.graph.jet(m, &w0);
            let s = (1.0 + linalg::dot(m, &jet.grad, &jet.grad)).sqrt();
            let mut e_omega = linalg::scale(-1.0 / s, &jet.grad);
            e_omega[m] = 1.0 / s;
            let e_ball = linalg::scale(-1.0 / rho, &w0);
            let e_i = linalg::normalize_or_zero(n, &linalg::add(&e_omega, &e_ball));
            let frame = linalg::frame_with_last(n, &e_i);
            // graph part: points of Γ inside B_rho(z0) within rho^2 of w0
            let gamma: Vec<Point> = patch(m, r2)
                .iter()
                .map(|d| {
                    let mut y = linalg::add(&w0, d);
                    y[m] = chart.graph.value(m, &y);
                    y
                })
                .filter(|y| linalg::norm(n, y) < rho && linalg::norm(n, &linalg::sub(y, &w0)) < r2)
                .collect();
            // sphere part: points of ∂B_rho(z0) above Γ within rho^2 of w0
            let bframe = linalg::frame_with_last(n, &e_ball);
            let sphere: Vec<Point> = patch(m, r2)
                .iter()
                .map(|d| {
                    let t = linalg::mat_vec(n, &bframe, d);
                    linalg::scale(rho, &linalg::normalize_or_zero(n, &linalg::add(&w0, &t)))
                })
                .filter(|y| y[m] >= chart.graph.value(m, y) && linalg::norm(n, &linalg::sub(y, &w0)) < r2)
                .chain(std::iter::once(w0))
                .collect();
            let g = max_ratio(n, &frame, &gamma, &gamma);
            let b = max_ratio(n, &frame, &sphere, &sphere);
            let mixed = max_ratio(n, &frame, &gamma, &sphere);
            (g, b, mixed, e_i[m])
        })
        .collect();
    let nf = n as f64;
    let gamma_ratio = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let sphere_ratio = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let constant = per.iter().map(|p| p.0.max(p.1).max(p.2)).fold(0.0, f64::max);
    let min_mixed_normal = per.iter().map(|p| p.3).fold(f64::INFINITY, f64::min);
    Ok(LipschitzAudit {
        constant,
        gamma_ratio,
        sphere_ratio,
        min_mixed_normal,
        w0_count: per.len(),
        pass: gamma_ratio <= 13.0 * nf && sphere_ratio <= 600.0 * nf.powf(1.5) && min_mixed_normal > 0.4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::graph::{Bump, Graph};

    fn bump_domain(n: usize) -> DomainSpec {
        let center = vec![0.1; n - 1];
        let g = Graph::Bumps { bumps: vec![Bump { amp: 0.05, center, width: 0.6 }] };
        let mut lo = [-1.0; 3];
        let mut hi = [1.0; 3];
        lo[n..].fill(0.0);
        hi[n..].fill(0.0);
        DomainSpec::perturbed_half_space(n, g, 1.0, (lo, hi)).unwrap()
    }

    #[test]
    fn half_space_is_star_like() {
        let s = DomainSpec::half_space(3, ([-1.0; 3], [1.0; 3])).unwrap();
        let a = check_star_like(&s, &[0.2, 0.1, 0.0], 0.1, 40).unwrap();
        assert!(a.pass, "{a:?}");
    }

    #[test]
    fn ball_is_star_like() {
        let s = DomainSpec::ball(3, [0.0; 3], 0.4).unwrap();
        let z0 = [0.0, 0.4, 0.0];
        let a = check_star_like(&s, &z0, 0.99 * star_like_cap(&s), 40).unwrap();
        assert!(a.pass, "{a:?}");
        assert!(matches!(check_star_like(&s, &z0, 0.5, 4), Err(Error::Precondition { .. })));
    }

    #[test]
    fn bump_star_like_at_cap() {
        for n in [2, 3] {
            let s = bump_domain(n);
            let z0 = s.boundary_samples_near(&[0.1, 0.1, 0.0], 0.2, 16)[0];
            let a = check_star_like(&s, &z0, 0.999 * star_like_cap(&s), 48).unwrap();
            assert!(a.pass, "{a:?}");
        }
    }

    #[test]
    fn flat_lipschitz_constant_is_one() {
        let s = DomainSpec::half_space(3, ([-1.0; 3], [1.0; 3])).unwrap();
        let a = sample_lipschitz_constant(&s, &[0.0; 3], 1e-7, 12).unwrap();
        assert!(a.constant <= 1.0 + 1e-6, "{a:?}");
        assert!(a.pass);
    }

    #[test]
    fn bump_lipschitz_bounds() {
        for n in [2, 3] {
            let s = bump_domain(n);
            for z0 in s.boundary_samples_near(&[0.1, 0.1, 0.0], 0.4, 9).iter().take(5) {
                let a = sample_lipschitz_constant(&s, z0, 0.9 * lipschitz_cap(&s), 8).unwrap();
                assert!(a.pass, "{a:?}");
            }
        }
    }
}
