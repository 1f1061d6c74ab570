//! Normal coordinate change in a chart and its Jacobian audits.

use serde::{Deserialize, Serialize};

use crate::domains::spec::{sphere_points, Chart};
use crate::linalg::{self, Mat};
use crate::{Error, Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

fn inward(m: usize, g: &Point) -> (Point, f64) {
    let s = (1.0 + linalg::dot(m, g, g)).sqrt();
    let mut nu = [0.0; 3];
    for i in 0..m {
        nu[i] = -g[i] / s;
    }
    nu[m] = 1.0 / s;
    (nu, s)
}

/// `F0(eta) = (eta', h(eta')) + eta_n * nu(eta')` in chart coordinates.
pub fn f0(chart: &Chart, eta: &Point) -> Point {
    let m = chart.ndim - 1;
    let j = chart.graph.jet(m, eta);
    let (nu, _) = inward(m, &j.grad);
    let mut base = [0.0; 3];
    base[..m].copy_from_slice(&eta[..m]);
    base[m] = j.h;
    linalg::axpy(eta[m], &nu, &base)
}

/// Analytic Jacobian of `F0` (row i, column j = d x_i / d eta_j).
pub fn f0_jacobian(chart: &Chart, eta: &Point) -> Mat {
    let m = chart.ndim - 1;
    let jet = chart.graph.jet(m, eta);
    let g = jet.grad;
    let (nu, s) = inward(m, &g);
    let mut out = [[0.0; 3]; 3];
    for j in 0..m {
        let hg: f64 = (0..m).map(|i| g[i] * jet.hess[i][j]).sum();
        for i in 0..m {
            let dnu = -jet.hess[i][j] / s + g[i] * hg / (s * s * s);
            out[i][j] = if i == j { 1.0 } else { 0.0 } + eta[m] * dnu;
        }
        out[m][j] = g[j] - eta[m] * hg / (s * s * s);
    }
    for i in 0..=m {
        out[i][m] = nu[i];
    }
    out
}

/// Solves `F0(eta) = x` by Newton iteration from `(x', x_n - h(x'))`.
pub fn f0_inverse(chart: &Chart, x: &Point) -> Result<Point> {
    let n = chart.ndim;
    let m = n - 1;
    let mut eta = *x;
    eta[m] = x[m] - chart.graph.value(m, x);
    for _ in 0..50 {
        let r = linalg::sub(&f0(chart, &eta), x);
        let rn = linalg::norm(n, &r);
        if rn <= 1e-15 * (1.0 + linalg::norm(n, x)) {
            return Ok(eta);
        }
        let step = linalg::solve(n, &f0_jacobian(chart, &eta), &r)
            .ok_or_else(|| Error::OutsideChart("singular normal-map Jacobian".into()))?;
        eta = linalg::sub(&eta, &step);
        if linalg::norm(n, &step) <= 1e-16 * (1.0 + linalg::norm(n, &eta)) {
            return Ok(eta);
        }
    }
    let r = linalg::norm(n, &linalg::sub(&f0(chart, &eta), x));
    if r <= 1e-12 * (1.0 + linalg::norm(n, x)) {
        Ok(eta)
    } else {
        Err(Error::OutsideChart(format!("normal-map inverse did not converge at {x:?} (residual {r:e})")))
    }
}

pub fn normal_map(chart: &Chart, p: &Point, dir: Direction) -> Result<Point> {
    match dir {
        Direction::Forward => Ok(f0(chart, p)),
        Direction::Inverse => f0_inverse(chart, p),
    }
}

/// Spectral norm of a general n x n matrix.
pub fn op_norm(n: usize, a: &Mat) -> f64 {
    let ata = linalg::mat_mul(n, &linalg::transpose(a), a);
    linalg::sym_norm(n, &ata).sqrt()
}

fn minus_identity(n: usize, a: &Mat) -> Mat {
    let mut out = *a;
    for (i, row) in out.iter_mut().enumerate().take(n) {
        row[i] -= 1.0;
    }
    out
}

/// Sample points of `V_rho = B_rho(0') x (0, rho)`.
pub fn v_rho_samples(n: usize, rho: f64) -> Vec<Point> {
    let m = n - 1;
    let dirs = if m == 1 { vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]] } else { sphere_points(2, 12) };
    let mut out = Vec::new();
    for hk in 1..=8 {
        let t = rho * (hk as f64 - 0.5) / 8.0;
        let mut base = [0.0; 3];
        base[m] = t;
        out.push(base);
        for rk in 1..=8 {
            let r = rho * (rk as f64 - 0.5) / 8.0;
            for d in &dirs {
                let mut p = linalg::scale(r, d);
                p[m] = t;
                out.push(p);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartAudit {
    pub rho: f64,
    pub eps: f64,
    /// max ||grad F0 - I|| over V_rho
    pub dev_forward: f64,
    /// max ||grad F0^{-1} - I|| over U_rho(z0)
    pub dev_inverse: f64,
    pub c2_forward: f64,
    pub c2_inverse: f64,
    pub pass: bool,
}

fn jac_derivs(chart: &Chart, eta: &Point, step: f64) -> [Mat; 3] {
    let n = chart.ndim;
    let mut out = [[[0.0; 3]; 3]; 3];
    for (k, o) in out.iter_mut().enumerate().take(n) {
        let mut p = *eta;
        let mut q = *eta;
        p[k] += step;
        q[k] -= step;
        let (jp, jq) = (f0_jacobian(chart, &p), f0_jacobian(chart, &q));
        for i in 0..n {
            for j in 0..n {
                o[i][j] = (jp[i][j] - jq[i][j]) / (2.0 * step);
            }
        }
    }
    out
}

fn tensor_norm(n: usize, t: &[Mat; 3]) -> f64 {
    t.iter().take(n).map(|m| linalg::frobenius(n, m).powi(2)).sum::<f64>().sqrt()
}

/// Deviation of the normal map and its inverse from the identity, plus sampled C^2 norms.
pub fn check_chart_estimates(chart: &Chart, rho: f64, eps: f64) -> ChartAudit {
    let n = chart.ndim;
    let step = 1e-5 * rho;
    let mut a = ChartAudit { rho, eps, dev_forward: 0.0, dev_inverse: 0.0, c2_forward: 0.0, c2_inverse: 0.0, pass: false };
    let (mut s0, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
    let (mut t0, mut t1, mut t2) = (0.0f64, 0.0f64, 0.0f64);
    for eta in v_rho_samples(n, rho) {
        let j = f0_jacobian(chart, &eta);
        let x = f0(chart, &eta);
        a.dev_forward = a.dev_forward.max(op_norm(n, &minus_identity(n, &j)));
        let Some(ji) = linalg::inverse(n, &j) else {
            a.dev_inverse = f64::INFINITY;
            continue;
        };
        a.dev_inverse = a.dev_inverse.max(op_norm(n, &minus_identity(n, &ji)));
        let dj = jac_derivs(chart, &eta, step);
        s0 = s0.max(linalg::norm(n, &x));
        s1 = s1.max(op_norm(n, &j));
        s2 = s2.max(tensor_norm(n, &dj));
        // d/dx_k (J^{-1}) = sum_l (J^{-1})_{lk} d/deta_l (J^{-1}),  d(J^{-1}) = -J^{-1} dJ J^{-1}
        let mut dji = [[[0.0; 3]; 3]; 3];
        let deta: Vec<Mat> = (0..n)
            .map(|l| {
                let t = linalg::mat_mul(n, &linalg::mat_mul(n, &ji, &dj[l]), &ji);
                let mut neg = [[0.0; 3]; 3];
                for i in 0..n {
                    for jj in 0..n {
                        neg[i][jj] = -t[i][jj];
                    }
                }
                neg
            })
            .collect();
        for (k, o) in dji.iter_mut().enumerate().take(n) {
            for (l, dl) in deta.iter().enumerate() {
                for i in 0..n {
                    for jj in 0..n {
                        o[i][jj] += ji[l][k] * dl[i][jj];
                    }
                }
            }
        }
        t0 = t0.max(linalg::norm(n, &eta));
        t1 = t1.max(op_norm(n, &ji));
        t2 = t2.max(tensor_norm(n, &dji));
    }
    a.c2_forward = s0 + s1 + s2;
    a.c2_inverse = t0 + t1 + t2;
    a.pass = a.dev_forward < eps && a.dev_inverse < eps;
    a
}

/// A K-dependent cap for the sampled C^2 norms of the normal map and its inverse.
pub fn c2_cap(n: usize, k: f64) -> f64 {
    4.0 + 16.0 * n as f64 * k * (1.0 + k).powi(2)
}

/// Largest rho in (0, rho_max] for which both deviations stay below `eps` (bisection).
pub fn calibrate_c_eps(chart: &Chart, eps: f64, rho_max: f64) -> f64 {
    if check_chart_estimates(chart, rho_max, eps).pass {
        return rho_max;
    }
    let (mut lo, mut hi) = (0.0, rho_max);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if check_chart_estimates(chart, mid, eps).pass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
