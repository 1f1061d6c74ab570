//! Smooth bump profiles and the interior and boundary-fitted cut-off families.

mod profile;

pub use profile::{bump, profile_ck_norm, radial, zeta, BumpKind, Jet3, FLUSH};

use serde::{Deserialize, Serialize};

use crate::domains::chart::{calibrate_c_eps, f0_inverse, f0_jacobian};
use crate::domains::{Chart, Constants, DomainSpec};
use crate::error::precondition;
use crate::linalg::{self, Mat};
use crate::{Error, Point, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffSpec {
    /// `phi(|y - x| / eps)`: 1 on `B_eps(x)`, 0 outside `B_{3 eps/2}(x)`.
    Interior { ndim: usize, x: Point, eps: f64 },
    /// `(psi(eta_n/eps) psi(|eta'|/eps)) ∘ F0^{-1}` in the chart at `z0`.
    Boundary { eps: f64, chart: Chart },
}

/// Value, gradient and Hessian at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffJet {
    pub v: f64,
    pub grad: Point,
    pub hess: Mat,
}

pub fn interior_cutoff(ndim: usize, x: &Point, eps: f64) -> Result<CutoffSpec> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("cut-off radius must be positive, got {eps}")));
    }
    Ok(CutoffSpec::Interior { ndim, x: *x, eps })
}

/// Default `c^Ω_{1/2}` for a chart: largest radius on which the normal map stays within 1/2 of the identity.
pub fn calibrate_c_half(chart: &Chart, rho_max: f64) -> f64 {
    calibrate_c_eps(chart, 0.5, rho_max)
}

/// Boundary-fitted cut-off at `z0`; requires `eps < min{R_*/5, c_half/5}`.
pub fn boundary_cutoff(spec: &DomainSpec, z0: &Point, eps: f64, c: &Constants) -> Result<CutoffSpec> {
    let chart = spec.chart_at(z0)?;
    let reach = spec.reach();
    let c_half = c.c_half.unwrap_or_else(|| calibrate_c_half(&chart, spec.cap().min(chart.alpha)));
    for (name, v) in [("R_*/5", reach / 5.0), ("c_half/5", c_half / 5.0)] {
        if !(eps > 0.0 && eps < v) {
            return Err(precondition(&format!("eps < {name}"), format!("eps = {eps}, bound = {v}")));
        }
    }
    Ok(CutoffSpec::Boundary { eps, chart })
}

/// Boundary cut-off in a given chart without the radius checks.
pub fn boundary_cutoff_in_chart(chart: Chart, eps: f64) -> CutoffSpec {
    CutoffSpec::Boundary { eps, chart }
}

fn psi_pair(m: usize, eta: &Point, eps: f64) -> (f64, Point, Mat) {
    let (h, hg, hh) = radial(BumpKind::Psi, m, eta, eps);
    let j = bump(BumpKind::Psi, eta[m] / eps);
    let (v0, v1, v2) = (j.v, j.d1 / eps, j.d2 / (eps * eps));
    let mut g = [0.0; 3];
    let mut hs = [[0.0; 3]; 3];
    for a in 0..m {
        g[a] = v0 * hg[a];
        for b in 0..m {
            hs[a][b] = v0 * hh[a][b];
        }
        hs[a][m] = v1 * hg[a];
        hs[m][a] = v1 * hg[a];
    }
    g[m] = v1 * h;
    hs[m][m] = v2 * h;
    (v0 * h, g, hs)
}

impl CutoffSpec {
    pub fn ndim(&self) -> usize {
        match self {
            CutoffSpec::Interior { ndim, .. } => *ndim,
            CutoffSpec::Boundary { chart, .. } => chart.ndim,
        }
    }

    pub fn eps(&self) -> f64 {
        match self {
            CutoffSpec::Interior { eps, .. } | CutoffSpec::Boundary { eps, .. } => *eps,
        }
    }

    pub fn value(&self, y: &Point) -> Result<f64> {
        Ok(self.eval(y)?.v)
    }

    pub fn eval(&self, y: &Point) -> Result<CutoffJet> {
        match self {
            CutoffSpec::Interior { ndim, x, eps } => {
                let (v, grad, hess) = radial(BumpKind::Phi, *ndim, &linalg::sub(y, x), *eps);
                Ok(CutoffJet { v, grad, hess })
            }
            CutoffSpec::Boundary { eps, chart } => boundary_eval(chart, *eps, y),
        }
    }
}

fn boundary_eval(chart: &Chart, eps: f64, y: &Point) -> Result<CutoffJet> {
    let n = chart.ndim;
    let m = n - 1;
    let xl = chart.to_local(y);
    if linalg::norm(n, &xl) > 8.0 * eps {
        return Ok(CutoffJet::default());
    }
    let eta = f0_inverse(chart, &xl)?;
    let (v, g, gh) = psi_pair(m, &eta, eps);
    if v == 0.0 && g.iter().all(|&c| c == 0.0) && gh.iter().flatten().all(|&c| c == 0.0) {
        return Ok(CutoffJet::default());
    }
    let jac = f0_jacobian(chart, &eta);
    let a = linalg::inverse(n, &jac).ok_or_else(|| Error::OutsideChart("singular normal-map Jacobian".into()))?;
    // local gradient: A^T g
    let grad_l = linalg::mat_t_vec(n, &a, &g);
    // d A / d eta_l = -A (dJ/d eta_l) A, dJ by central differences of the analytic Jacobian
    let step = 1e-5 * eps;
    let mut da = [[[0.0; 3]; 3]; 3];
    for (l, dl) in da.iter_mut().enumerate().take(n) {
        let mut p = eta;
        let mut q = eta;
        p[l] += step;
        q[l] -= step;
        let (jp, jq) = (f0_jacobian(chart, &p), f0_jacobian(chart, &q));
        let mut dj = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                dj[i][j] = (jp[i][j] - jq[i][j]) / (2.0 * step);
            }
        }
        let t = linalg::mat_mul(n, &linalg::mat_mul(n, &a, &dj), &a);
        for i in 0..n {
            for j in 0..n {
                dl[i][j] = -t[i][j];
            }
        }
    }
    let mut hess_l = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += a[k][i] * a[l][j] * gh[k][l];
                }
                // d A_ki / d x_j = sum_l dA_ki/deta_l A_lj
                let dak: f64 = (0..n).map(|l| da[l][k][i] * a[l][j]).sum();
                s += g[k] * dak;
            }
            hess_l[i][j] = s;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (hess_l[i][j] + hess_l[j][i]);
            hess_l[i][j] = s;
            hess_l[j][i] = s;
        }
    }
    let f = &chart.frame;
    let grad = linalg::mat_vec(n, f, &grad_l);
    let hess = linalg::mat_mul(n, &linalg::mat_mul(n, f, &hess_l), &linalg::transpose(f));
    Ok(CutoffJet { v, grad, hess })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{Bump, Graph};

    fn bump_spec() -> DomainSpec {
        let g = Graph::Bumps { bumps: vec![Bump { amp: 0.05, center: vec![0.1, 0.0], width: 0.6 }] };
        DomainSpec::perturbed_half_space(3, g, 1.0, ([-1.0; 3], [1.0; 3])).unwrap()
    }

    #[test]
    fn interior_plateau_and_support() {
        let c = interior_cutoff(3, &[0.1, 0.2, 0.3], 0.1).unwrap();
        assert_eq!(c.value(&[0.1 + 0.09, 0.2, 0.3]).unwrap(), 1.0);
        assert_eq!(c.value(&[0.1, 0.2 + 0.16, 0.3]).unwrap(), 0.0);
        assert!(interior_cutoff(3, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn flat_boundary_cutoff_is_product() {
        let c = boundary_cutoff_in_chart(Chart::flat(3), 0.05);
        for p in [[0.1f64, 0.12, 0.17], [0.0, 0.18, -0.02], [0.16, 0.0, 0.19]] {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let want = bump(BumpKind::Psi, p[2] / 0.05).v * bump(BumpKind::Psi, r / 0.05).v;
            assert_eq!(c.value(&p).unwrap(), want);
        }
    }

    #[test]
    fn normal_derivative_vanishes_in_band() {
        let s = bump_spec();
        let z0 = s.boundary_samples_near(&[0.2, 0.1, 0.0], 0.1, 9)[0];
        let eps = 0.01;
        let c = boundary_cutoff(&s, &z0, eps, &Constants::default()).unwrap();
        let mut worst = 0.0f64;
        let mut k = 0;
        for i in 0..10 {
            for j in 0..10 {
                for l in 0..10 {
                    let off = [(i as f64 - 4.5) * 0.9 * eps, (j as f64 - 4.5) * 0.9 * eps, (l as f64 - 4.5) * 0.6 * eps];
                    let y = linalg::add(&z0, &off);
                    let loc = s.locate(&y).unwrap();
                    if loc.d.abs() < 3.0 * eps {
                        let jet = c.eval(&y).unwrap();
                        worst = worst.max(linalg::dot(3, &loc.normal, &jet.grad).abs());
                        k += 1;
                    }
                }
            }
        }
        assert!(k > 500);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn boundary_hessian_matches_differences() {
        let s = bump_spec();
        let z0 = s.boundary_samples_near(&[0.2, 0.1, 0.0], 0.1, 9)[0];
        let eps = 0.01;
        let c = boundary_cutoff(&s, &z0, eps, &Constants::default()).unwrap();
        let y = linalg::add(&z0, &[0.033, 0.012, 0.034]);
        let jet = c.eval(&y).unwrap();
        let e = 1e-6;
        for k in 0..3 {
            let mut p = y;
            let mut q = y;
            p[k] += e;
            q[k] -= e;
            let (jp, jq) = (c.eval(&p).unwrap(), c.eval(&q).unwrap());
            assert!(((jp.v - jq.v) / (2.0 * e) - jet.grad[k]).abs() < 1e-5);
            for i in 0..3 {
                let fd = (jp.grad[i] - jq.grad[i]) / (2.0 * e);
                assert!((fd - jet.hess[i][k]).abs() < 1e-3 * (1.0 + fd.abs()), "{fd} {}", jet.hess[i][k]);
            }
        }
    }
}
