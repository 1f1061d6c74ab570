//! Boundary graph functions x_n = h(x') on the reduced space R^{n-1}.

use serde::{Deserialize, Serialize};

use crate::cutoffs::{radial, BumpKind};
use crate::linalg::{self, Mat};
use crate::Point;

/// Value, gradient and Hessian of a graph function (first `n-1` slots meaningful).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GraphJet {
    pub h: f64,
    pub grad: Point,
    pub hess: Mat,
}

/// Compactly supported smooth bump `amp * S(|y - c|^2 / w^2)`, `S(q) = exp(1 - 1/(1-q))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amp: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Graph {
    Flat,
    Bumps { bumps: Vec<Bump> },
    /// Lower cap of a sphere of the given radius tangent to x_n = 0 at the origin.
    SphereCap { radius: f64 },
    /// Re-graph of `base` in the frame with origin `z0` (a point of the base graph)
    /// and orthonormal columns `frame`, the last column being the upward normal.
    Tilted { base: Box<Graph>, z0: Point, frame: Mat },
    /// `theta(|y|/rho) * inner(y)`.
    Tapered { inner: Box<Graph>, rho: f64 },
}

fn bump_profile(q: f64) -> (f64, f64, f64) {
    if q >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let a = 1.0 / (1.0 - q);
    let s = (1.0 - a).exp();
    (s, -s * a * a, s * (a.powi(4) - 2.0 * a.powi(3)))
}

impl Graph {
    /// Jet at `y` in a reduced space of dimension `m = n - 1`.
    pub fn jet(&self, m: usize, y: &Point) -> GraphJet {
        match self {
            Graph::Flat => GraphJet::default(),
            Graph::Bumps { bumps } => {
                let mut out = GraphJet::default();
                for b in bumps {
                    let mut d = [0.0; 3];
                    for i in 0..m {
                        d[i] = y[i] - b.center.get(i).copied().unwrap_or(0.0);
                    }
                    let w2 = b.width * b.width;
                    let q = linalg::dot(m, &d, &d) / w2;
                    let (s0, s1, s2) = bump_profile(q);
                    if s0 == 0.0 {
                        continue;
                    }
                    out.h += b.amp * s0;
                    for i in 0..m {
                        out.grad[i] += b.amp * s1 * 2.0 * d[i] / w2;
                        for j in 0..m {
                            let id = if i == j { 1.0 } else { 0.0 };
                            out.hess[i][j] += b.amp * (s2 * 4.0 * d[i] * d[j] / (w2 * w2) + s1 * 2.0 * id / w2);
                        }
                    }
                }
                out
            }
            Graph::SphereCap { radius } => {
                let r2 = linalg::dot(m, y, y);
                let s = (radius * radius - r2).max(1e-300).sqrt();
                let mut out = GraphJet { h: radius - s, ..Default::default() };
                for i in 0..m {
                    out.grad[i] = y[i] / s;
                    for j in 0..m {
                        let id = if i == j { 1.0 } else { 0.0 };
                        out.hess[i][j] = id / s + y[i] * y[j] / (s * s * s);
                    }
                }
                out
            }
            Graph::Tilted { base, z0, frame } => tilted_jet(base, z0, frame, m, y),
            Graph::Tapered { inner, rho } => {
                let (t, tg, th) = radial(BumpKind::Theta, m, y, *rho);
                if t == 0.0 {
                    return GraphJet::default();
                }
                let g = inner.jet(m, y);
                let mut out = GraphJet { h: t * g.h, ..Default::default() };
                for i in 0..m {
                    out.grad[i] = tg[i] * g.h + t * g.grad[i];
                    for j in 0..m {
                        out.hess[i][j] = th[i][j] * g.h + tg[i] * g.grad[j] + tg[j] * g.grad[i] + t * g.hess[i][j];
                    }
                }
                out
            }
        }
    }

    pub fn value(&self, m: usize, y: &Point) -> f64 {
        self.jet(m, y).h
    }

    /// Radius of a ball about 0' outside which h vanishes, if known.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Graph::Flat => Some(0.0),
            Graph::Bumps { bumps } => Some(
                bumps
                    .iter()
                    .map(|b| b.center.iter().map(|c| c * c).sum::<f64>().sqrt() + b.width.abs())
                    .fold(0.0, f64::max),
            ),
            Graph::SphereCap { .. } | Graph::Tilted { .. } => None,
            Graph::Tapered { rho, .. } => Some(2.0 * rho),
        }
    }

    /// Length scale of the smallest feature (used to set sampling densities).
    pub fn feature_scale(&self) -> f64 {
        match self {
            Graph::Flat => f64::INFINITY,
            Graph::Bumps { bumps } => bumps.iter().map(|b| b.width.abs()).fold(f64::INFINITY, f64::min),
            Graph::SphereCap { radius } => *radius,
            Graph::Tilted { base, .. } => base.feature_scale(),
            Graph::Tapered { inner, rho } => inner.feature_scale().min(*rho),
        }
    }

    pub fn is_flat(&self) -> bool {
        match self {
            Graph::Flat => true,
            Graph::Bumps { bumps } => bumps.iter().all(|b| b.amp == 0.0),
            Graph::Tilted { base, .. } => base.is_flat(),
            Graph::Tapered { inner, .. } => inner.is_flat(),
            Graph::SphereCap { .. } => false,
        }
    }
}

/// Implicit re-graph: points `z0 + frame (y, t)` on the base graph, solved for `t`.
fn tilted_jet(base: &Graph, z0: &Point, frame: &Mat, m: usize, y: &Point) -> GraphJet {
    let n = m + 1;
    let col = |j: usize| -> Point {
        let mut c = [0.0; 3];
        for i in 0..n {
            c[i] = frame[i][j];
        }
        c
    };
    let en = col(m);
    let mut off = [0.0; 3];
    for j in 0..m {
        off = linalg::axpy(y[j], &col(j), &off);
    }
    let at = |t: f64| linalg::add(&linalg::add(z0, &off), &linalg::scale(t, &en));
    // Phi(X) = X_n - h(X')
    let phi = |x: &Point| -> (f64, Point, Mat) {
        let j = base.jet(m, x);
        let mut g = [0.0; 3];
        let mut hmat = [[0.0; 3]; 3];
        for i in 0..m {
            g[i] = -j.grad[i];
            for k in 0..m {
                hmat[i][k] = -j.hess[i][k];
            }
        }
        g[m] = 1.0;
        (x[m] - j.h, g, hmat)
    };
    let mut t = 0.0;
    for _ in 0..60 {
        let (f, g, _) = phi(&at(t));
        let df = linalg::dot(n, &g, &en);
        let step = f / df;
        t -= step;
        if step.abs() < 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    let x = at(t);
    let (_, g, hmat) = phi(&x);
    let gn = linalg::dot(n, &g, &en);
    let mut out = GraphJet { h: t, ..Default::default() };
    let mut v: Vec<Point> = Vec::with_capacity(m);
    for i in 0..m {
        let ti = -linalg::dot(n, &g, &col(i)) / gn;
        out.grad[i] = ti;
        v.push(linalg::axpy(ti, &en, &col(i)));
    }
    for i in 0..m {
        let hv = linalg::mat_vec(n, &hmat, &v[i]);
        for j in 0..m {
            out.hess[i][j] = -linalg::dot(n, &hv, &v[j]) / gn;
        }
    }
    out
}

/// Sampled sup norms of h, |grad h| and the Hessian operator norm over the ball of radius `radius`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphBounds {
    pub sup_h: f64,
    pub sup_grad: f64,
    pub sup_hess: f64,
    pub sup_d3: f64,
}

impl GraphBounds {
    pub fn k(&self) -> f64 {
        self.sup_h.max(self.sup_grad).max(self.sup_hess)
    }
    pub fn c1(&self) -> f64 {
        self.sup_h + self.sup_grad
    }
}

/// Samples `graph` on a lattice of the (n-1)-ball of radius `radius` with spacing `step`.
pub fn graph_bounds(graph: &Graph, m: usize, radius: f64, step: f64) -> GraphBounds {
    let k = (radius / step).ceil() as i64;
    let mut b = GraphBounds::default();
    let mut visit = |y: Point| {
        if linalg::norm(m, &y) > radius {
            return;
        }
        let j = graph.jet(m, &y);
        b.sup_h = b.sup_h.max(j.h.abs());
        b.sup_grad = b.sup_grad.max(linalg::norm(m, &j.grad));
        b.sup_hess = b.sup_hess.max(linalg::sym_norm(m, &j.hess));
        // third derivatives by central differences of the Hessian
        let e = 1e-4 * step.min(1.0);
        for a in 0..m {
            let mut p = y;
            let mut q = y;
            p[a] += e;
            q[a] -= e;
            let (hp, hq) = (graph.jet(m, &p).hess, graph.jet(m, &q).hess);
            let mut d = [[0.0; 3]; 3];
            for i in 0..m {
                for jj in 0..m {
                    d[i][jj] = (hp[i][jj] - hq[i][jj]) / (2.0 * e);
                }
            }
            b.sup_d3 = b.sup_d3.max(linalg::sym_norm(m, &d));
        }
    };
    if m == 1 {
        for i in -k..=k {
            visit([i as f64 * step, 0.0, 0.0]);
        }
    } else {
        for i in -k..=k {
            for j in -k..=k {
                visit([i as f64 * step, j as f64 * step, 0.0]);
            }
        }
    }
    b
}
