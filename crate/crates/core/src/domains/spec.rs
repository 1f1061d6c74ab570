use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::domains::graph::{graph_bounds, Graph};
use crate::fields::Grid;
use crate::linalg::{self, Mat};
use crate::{Error, Point, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DomainKind {
    /// Periodic box, no boundary.
    Torus,
    /// `x_n > 0`.
    HalfSpace,
    /// `x_n > h(x')` with `h` supported in the closed ball of radius `r_h`.
    PerturbedHalfSpace { graph: Graph, r_h: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    /// `x_n > h(x')` for a global graph, with declared type `(alpha, beta, k)`.
    GraphDomain {
        graph: Graph,
        alpha: f64,
        beta: f64,
        #[serde(default)]
        k: f64,
    },
}

/// Type parameters `(alpha, beta, K)` of a uniformly regular domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeParams {
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DomainSpec {
    ndim: usize,
    kind: DomainKind,
    bbox: (Point, Point),
    #[serde(skip)]
    reach: OnceLock<f64>,
}

impl Clone for DomainSpec {
    fn clone(&self) -> Self {
        DomainSpec { ndim: self.ndim, kind: self.kind.clone(), bbox: self.bbox, reach: self.reach.clone() }
    }
}

impl PartialEq for DomainSpec {
    fn eq(&self, o: &Self) -> bool {
        self.ndim == o.ndim && self.kind == o.kind && self.bbox == o.bbox
    }
}

/// Nearest boundary point data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Located {
    /// Signed distance, positive inside.
    pub d: f64,
    pub foot: Point,
    /// Unit inward normal at the foot, equal to the gradient of `d`.
    pub normal: Point,
    /// Another local minimiser within 1e-9 of the optimum exists.
    pub ambiguous: bool,
}

/// Local graph chart at a boundary point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub ndim: usize,
    pub z0: Point,
    /// Orthonormal columns; the last is the inward normal at `z0`.
    pub frame: Mat,
    /// `h_{z0}` with `h(0') = 0`, `grad h(0') = 0`.
    pub graph: Graph,
    pub alpha: f64,
    pub k: f64,
}

impl Chart {
    pub fn to_local(&self, x: &Point) -> Point {
        linalg::mat_t_vec(self.ndim, &self.frame, &linalg::sub(x, &self.z0))
    }
    pub fn to_world(&self, eta: &Point) -> Point {
        let mut p = linalg::add(&self.z0, &linalg::mat_vec(self.ndim, &self.frame, eta));
        for v in p.iter_mut().skip(self.ndim) {
            *v = 0.0;
        }
        p
    }
    pub fn flat(ndim: usize) -> Chart {
        Chart { ndim, z0: [0.0; 3], frame: linalg::identity(), graph: Graph::Flat, alpha: f64::INFINITY, k: 0.0 }
    }
}

fn reduced(x: &Point, m: usize) -> Point {
    let mut y = [0.0; 3];
    y[..m].copy_from_slice(&x[..m]);
    y
}

fn graph_normal(m: usize, grad: &Point) -> Point {
    let s = (1.0 + linalg::dot(m, grad, grad)).sqrt();
    let mut nu = [0.0; 3];
    for i in 0..m {
        nu[i] = -grad[i] / s;
    }
    nu[m] = 1.0 / s;
    nu
}

/// Nearest point on the graph `x_n = h(x')`.
pub(crate) fn graph_locate(g: &Graph, n: usize, x: &Point) -> Located {
    let m = n - 1;
    let xp = reduced(x, m);
    let hx = g.value(m, &xp);
    let vert = x[m] - hx;
    let r0 = vert.abs();
    let foot_at = |y: &Point| {
        let j = g.jet(m, y);
        let mut f = *y;
        f[m] = j.h;
        (f, graph_normal(m, &j.grad))
    };
    if r0 == 0.0 {
        let (foot, normal) = foot_at(&xp);
        return Located { d: 0.0, foot, normal, ambiguous: false };
    }
    if let Some(rs) = g.support_radius() {
        let dsupp = (linalg::norm(m, &xp) - rs).max(0.0);
        if hx == 0.0 && r0 <= dsupp {
            let mut foot = xp;
            foot[m] = 0.0;
            let mut normal = [0.0; 3];
            normal[m] = 1.0;
            return Located { d: x[m], foot, normal, ambiguous: false };
        }
    }
    let phi = |y: &Point| -> f64 {
        let h = g.value(m, y);
        let d: f64 = (0..m).map(|i| (x[i] - y[i]).powi(2)).sum();
        d + (x[m] - h).powi(2)
    };
    // prescan seeds
    let feature = g.feature_scale();
    let per = 24.0;
    let step = (feature / 4.0).min(r0 / 2.0).max(2.0 * r0 / per);
    let k = (r0 / step).ceil() as i64;
    let mut seeds: Vec<(f64, Point)> = vec![(phi(&xp), xp)];
    let offsets: Vec<i64> = (-k..=k).collect();
    let mut visit = |y: Point| {
        if linalg::norm(m, &linalg::sub(&y, &xp)) <= r0 {
            seeds.push((phi(&y), y));
        }
    };
    if m == 1 {
        for &i in &offsets {
            visit([xp[0] + i as f64 * step, 0.0, 0.0]);
        }
    } else {
        for &i in &offsets {
            for &j in &offsets {
                visit([xp[0] + i as f64 * step, xp[1] + j as f64 * step, 0.0]);
            }
        }
    }
    seeds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut starts: Vec<Point> = Vec::new();
    for (_, y) in seeds.iter() {
        if starts.len() >= 4 {
            break;
        }
        if starts.iter().all(|s| linalg::norm(m, &linalg::sub(s, y)) > 1.5 * step) {
            starts.push(*y);
        }
    }
    let mut minima: Vec<(f64, Point)> = starts.iter().map(|s| newton_foot(g, m, x, *s)).map(|y| (phi(&y), y)).collect();
    minima.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (best_phi, best) = minima[0];
    let dist = best_phi.sqrt();
    let ambiguous = minima.iter().skip(1).any(|(p, y)| {
        (p.sqrt() - dist).abs() < 1e-9 * (1.0 + dist) && linalg::norm(m, &linalg::sub(y, &best)) > 1e-6
    });
    let (foot, normal) = foot_at(&best);
    let sign = if x[m] > hx { 1.0 } else { -1.0 };
    Located { d: sign * dist, foot, normal, ambiguous }
}

fn newton_foot(g: &Graph, m: usize, x: &Point, start: Point) -> Point {
    let phi = |y: &Point| -> f64 {
        let h = g.value(m, y);
        (0..m).map(|i| (x[i] - y[i]).powi(2)).sum::<f64>() + (x[m] - h).powi(2)
    };
    let mut y = start;
    let mut f = phi(&y);
    for _ in 0..100 {
        let j = g.jet(m, &y);
        let r = j.h - x[m];
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        for i in 0..m {
            grad[i] = y[i] - x[i] + r * j.grad[i];
            for k in 0..m {
                hess[i][k] = if i == k { 1.0 } else { 0.0 } + j.grad[i] * j.grad[k] + r * j.hess[i][k];
            }
        }
        let gn = linalg::norm(m, &grad);
        if gn < 1e-16 {
            break;
        }
        let mut dir = match linalg::solve(m, &hess, &grad) {
            Some(d) if linalg::dot(m, &d, &grad) > 0.0 => d,
            _ => grad,
        };
        dir = linalg::scale(-1.0, &dir);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = linalg::axpy(t, &dir, &y);
            let fc = phi(&cand);
            if fc <= f {
                let step = t * linalg::norm(m, &dir);
                y = cand;
                f = fc;
                moved = step > 1e-17 * (1.0 + linalg::norm(m, &y));
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    y
}

impl DomainSpec {
    fn make(ndim: usize, kind: DomainKind, bbox: (Point, Point)) -> Result<DomainSpec> {
        if !(2..=3).contains(&ndim) {
            return Err(Error::Config(format!("dimension {ndim} not in {{2,3}}")));
        }
        Ok(DomainSpec { ndim, kind, bbox, reach: OnceLock::new() })
    }

    pub fn torus(ndim: usize) -> Result<DomainSpec> {
        let mut hi = [0.0; 3];
        hi[..ndim].fill(1.0);
        DomainSpec::make(ndim, DomainKind::Torus, ([0.0; 3], hi))
    }

    pub fn half_space(ndim: usize, bbox: (Point, Point)) -> Result<DomainSpec> {
        DomainSpec::make(ndim, DomainKind::HalfSpace, bbox)
    }

    pub fn perturbed_half_space(ndim: usize, graph: Graph, r_h: f64, bbox: (Point, Point)) -> Result<DomainSpec> {
        if let Some(s) = graph.support_radius() {
            if s > r_h * (1.0 + 1e-12) {
                return Err(Error::Config(format!("graph support radius {s} exceeds R_h = {r_h}")));
            }
        }
        DomainSpec::make(ndim, DomainKind::PerturbedHalfSpace { graph, r_h }, bbox)
    }

    pub fn ball(ndim: usize, center: Point, radius: f64) -> Result<DomainSpec> {
        if !(radius > 0.0) {
            return Err(Error::Config("ball radius must be positive".into()));
        }
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..ndim {
            lo[a] = center[a] - 1.25 * radius;
            hi[a] = center[a] + 1.25 * radius;
        }
        DomainSpec::make(ndim, DomainKind::Ball { center: center[..ndim].to_vec(), radius }, (lo, hi))
    }

    /// Global graph domain; `K` is measured from the graph over the bounding box.
    pub fn graph_domain(ndim: usize, graph: Graph, alpha: f64, beta: f64, bbox: (Point, Point)) -> Result<DomainSpec> {
        let m = ndim - 1;
        let half = (0..m).map(|a| bbox.0[a].abs().max(bbox.1[a].abs())).fold(0.0, f64::max);
        let step = (graph.feature_scale() / 12.0).min(half / 16.0).max(half / 400.0);
        let k = graph_bounds(&graph, m, half * 2f64.sqrt(), step).k();
        let cap = if k > 0.0 { 2.0 / (ndim as f64 * k) } else { f64::INFINITY };
        if !(beta < alpha.min(cap)) {
            return Err(Error::Config(format!("beta = {beta} must be below min(alpha, 2/(nK)) = {}", alpha.min(cap))));
        }
        DomainSpec::make(ndim, DomainKind::GraphDomain { graph, alpha, beta, k }, bbox)
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }
    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }
    pub fn bbox(&self) -> (Point, Point) {
        self.bbox
    }
    pub fn has_boundary(&self) -> bool {
        !matches!(self.kind, DomainKind::Torus)
    }
    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, DomainKind::Ball { .. })
    }

    /// Largest length used in place of an infinite reach or type parameter.
    pub fn cap(&self) -> f64 {
        (0..self.ndim).map(|a| (self.bbox.1[a] - self.bbox.0[a]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn boundary_graph(&self) -> Option<&Graph> {
        match &self.kind {
            DomainKind::PerturbedHalfSpace { graph, .. } | DomainKind::GraphDomain { graph, .. } => Some(graph),
            _ => None,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        let n = self.ndim;
        match &self.kind {
            DomainKind::Torus => true,
            DomainKind::HalfSpace => x[n - 1] > 0.0,
            DomainKind::PerturbedHalfSpace { graph, .. } | DomainKind::GraphDomain { graph, .. } => {
                x[n - 1] > graph.value(n - 1, &reduced(x, n - 1))
            }
            DomainKind::Ball { center, radius } => {
                (0..n).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>() < radius * radius
            }
        }
    }

    pub fn mask(&self, grid: &Grid) -> Vec<bool> {
        (0..grid.len()).map(|i| self.contains(&grid.point(i))).collect()
    }

    /// Signed distance, foot point and normal; `None` without a boundary.
    pub fn locate(&self, x: &Point) -> Option<Located> {
        let n = self.ndim;
        match &self.kind {
            DomainKind::Torus => None,
            DomainKind::HalfSpace => {
                let mut foot = *x;
                foot[n - 1] = 0.0;
                let mut normal = [0.0; 3];
                normal[n - 1] = 1.0;
                Some(Located { d: x[n - 1], foot, normal, ambiguous: false })
            }
            DomainKind::PerturbedHalfSpace { graph, .. } | DomainKind::GraphDomain { graph, .. } => {
                Some(graph_locate(graph, n, x))
            }
            DomainKind::Ball { center, radius } => {
                let mut c = [0.0; 3];
                c[..n].copy_from_slice(center);
                let v = linalg::sub(x, &c);
                let r = linalg::norm(n, &v);
                let (dir, ambiguous) = if r > 0.0 {
                    (linalg::scale(1.0 / r, &v), false)
                } else {
                    let mut e = [0.0; 3];
                    e[n - 1] = 1.0;
                    (e, true)
                };
                Some(Located {
                    d: radius - r,
                    foot: linalg::axpy(*radius, &dir, &c),
                    normal: linalg::scale(-1.0, &dir),
                    ambiguous,
                })
            }
        }
    }

    pub fn distance(&self, x: &Point) -> f64 {
        self.locate(x).map_or(f64::INFINITY, |l| l.d)
    }

    /// Inward unit normal at a boundary point.
    pub fn normal_at(&self, z: &Point) -> Point {
        self.locate(z).map_or([0.0; 3], |l| l.normal)
    }

    pub fn type_params(&self) -> Option<TypeParams> {
        let n = self.ndim as f64;
        match &self.kind {
            DomainKind::Torus => None,
            DomainKind::HalfSpace => Some(TypeParams { alpha: f64::INFINITY, beta: f64::INFINITY, k: 0.0 }),
            DomainKind::PerturbedHalfSpace { graph, r_h } => {
                let step = (graph.feature_scale() / 12.0).min(r_h / 16.0).max(r_h / 400.0).max(1e-6);
                let k = graph_bounds(graph, self.ndim - 1, *r_h, step).k();
                let beta = if k > 0.0 { 1.0 / (n * k) } else { f64::INFINITY };
                Some(TypeParams { alpha: f64::INFINITY, beta, k })
            }
            DomainKind::Ball { radius, .. } => {
                let alpha = 0.5 * radius;
                let s = (radius * radius - alpha * alpha).sqrt();
                let h = radius - s;
                let k = h.max(alpha / s).max(radius * radius / (s * s * s));
                let beta = 0.9 * alpha.min(2.0 / (n * k));
                Some(TypeParams { alpha, beta, k })
            }
            DomainKind::GraphDomain { alpha, beta, k, .. } => Some(TypeParams { alpha: *alpha, beta: *beta, k: *k }),
        }
    }

    /// Local chart at the boundary point `z0`.
    pub fn chart_at(&self, z0: &Point) -> Result<Chart> {
        let n = self.ndim;
        let loc = self.locate(z0).ok_or_else(|| Error::Config("domain has no boundary".into()))?;
        if loc.d.abs() > 1e-9 {
            return Err(Error::OutsideChart(format!("{z0:?} is not on the boundary (d = {})", loc.d)));
        }
        let tp = self.type_params().expect("boundary implies type");
        let frame = linalg::frame_with_last(n, &loc.normal);
        let graph = match &self.kind {
            DomainKind::HalfSpace => Graph::Flat,
            DomainKind::Ball { radius, .. } => Graph::SphereCap { radius: *radius },
            DomainKind::PerturbedHalfSpace { graph, .. } | DomainKind::GraphDomain { graph, .. } => {
                if graph.is_flat() {
                    Graph::Flat
                } else {
                    Graph::Tilted { base: Box::new(graph.clone()), z0: loc.foot, frame }
                }
            }
            DomainKind::Torus => unreachable!(),
        };
        let mut z = loc.foot;
        for v in z.iter_mut().skip(n) {
            *v = 0.0;
        }
        Ok(Chart { ndim: n, z0: z, frame, graph, alpha: tp.alpha, k: tp.k })
    }

    /// Deterministic boundary sample of roughly `count` points inside the bounding box.
    pub fn boundary_samples(&self, count: usize) -> Vec<Point> {
        let n = self.ndim;
        let count = count.max(1);
        match &self.kind {
            DomainKind::Torus => Vec::new(),
            DomainKind::Ball { center, radius } => sphere_points(n, count)
                .into_iter()
                .map(|u| {
                    let mut p = [0.0; 3];
                    for a in 0..n {
                        p[a] = center[a] + radius * u[a];
                    }
                    p
                })
                .collect(),
            _ => {
                let m = n - 1;
                let per = if m == 1 { count } else { (count as f64).sqrt().ceil() as usize };
                let (lo, hi) = self.bbox;
                let coord = |a: usize, i: usize| lo[a] + (hi[a] - lo[a]) * (i as f64 + 0.5) / per as f64;
                let mut ys: Vec<Point> = Vec::new();
                if m == 1 {
                    for i in 0..per {
                        ys.push([coord(0, i), 0.0, 0.0]);
                    }
                } else {
                    for i in 0..per {
                        for j in 0..per {
                            ys.push([coord(0, i), coord(1, j), 0.0]);
                        }
                    }
                }
                ys.into_iter()
                    .map(|mut y| {
                        y[m] = self.boundary_graph().map_or(0.0, |g| g.value(m, &y));
                        y
                    })
                    .collect()
            }
        }
    }

    /// Boundary samples lying within distance `r` of `c`.
    pub fn boundary_samples_near(&self, c: &Point, r: f64, count: usize) -> Vec<Point> {
        let n = self.ndim;
        match &self.kind {
            DomainKind::Ball { .. } => self
                .boundary_samples(count)
                .into_iter()
                .filter(|z| linalg::norm(n, &linalg::sub(z, c)) <= r)
                .collect(),
            DomainKind::Torus => Vec::new(),
            _ => {
                let m = n - 1;
                let per = if m == 1 { count } else { (count as f64).sqrt().ceil() as usize }.max(1);
                let mut out = Vec::new();
                for i in 0..per {
                    for j in 0..if m == 1 { 1 } else { per } {
                        let mut y = [0.0; 3];
                        y[0] = c[0] - r + 2.0 * r * (i as f64 + 0.5) / per as f64;
                        if m == 2 {
                            y[1] = c[1] - r + 2.0 * r * (j as f64 + 0.5) / per as f64;
                        }
                        y[m] = self.boundary_graph().map_or(0.0, |g| g.value(m, &y));
                        if linalg::norm(n, &linalg::sub(&y, c)) <= r {
                            out.push(y);
                        }
                    }
                }
                out
            }
        }
    }

    pub(crate) fn reach_cell(&self) -> &OnceLock<f64> {
        &self.reach
    }
}

/// Quasi-uniform points on the unit sphere S^{n-1}.
pub fn sphere_points(n: usize, count: usize) -> Vec<Point> {
    if n == 2 {
        return (0..count)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / count as f64;
                [t.cos(), t.sin(), 0.0]
            })
            .collect();
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::graph::Bump;

    pub(crate) fn bump_graph() -> Graph {
        Graph::Bumps { bumps: vec![Bump { amp: 0.06, center: vec![0.0, 0.0], width: 0.3 }] }
    }

    #[test]
    fn half_space_and_ball_exact() {
        let hs = DomainSpec::half_space(3, ([-1.0; 3], [1.0; 3])).unwrap();
        let l = hs.locate(&[0.3, -0.2, 0.7]).unwrap();
        assert_eq!(l.d, 0.7);
        assert_eq!(l.foot, [0.3, -0.2, 0.0]);
        let b = DomainSpec::ball(2, [0.0; 3], 1.0).unwrap();
        let l = b.locate(&[0.3, 0.4, 0.0]).unwrap();
        assert_eq!(l.d, 0.5);
        assert!((l.foot[0] - 0.6).abs() < 1e-15 && (l.foot[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn bump_distance_matches_dense_sampling() {
        use rand::{Rng, SeedableRng};
        let g = bump_graph();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.1..0.2)];
            let l = graph_locate(&g, 3, &x);
            // dense oracle followed by local polish of the best sample
            let k = 400;
            let mut best = (f64::INFINITY, [0.0; 3]);
            for i in 0..=k {
                for j in 0..=k {
                    let y = [x[0] - 0.3 + 0.6 * i as f64 / k as f64, x[1] - 0.3 + 0.6 * j as f64 / k as f64, 0.0];
                    let h = g.value(2, &y);
                    let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - h).powi(2)).sqrt();
                    if d < best.0 {
                        best = (d, y);
                    }
                }
            }
            let dist = |y: &Point| {
                let h = g.value(2, y);
                ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - h).powi(2)).sqrt()
            };
            let mut step = 0.6 / k as f64;
            for _ in 0..40 {
                let c = best.1;
                for i in -10..=10 {
                    for j in -10..=10 {
                        let y = [c[0] + step * i as f64 / 10.0, c[1] + step * j as f64 / 10.0, 0.0];
                        let d = dist(&y);
                        if d < best.0 {
                            best = (d, y);
                        }
                    }
                }
                step /= 4.0;
            }
            assert!(l.d.abs() <= best.0 + 1e-12);
            assert!(best.0 - l.d.abs() < 1e-6, "{} vs {}", l.d, best.0);
        }
    }

    #[test]
    fn tilted_chart_contains_domain_locally() {
        let d = DomainSpec::graph_domain(3, bump_graph(), 0.3, 0.04, ([-0.5; 3], [0.5; 3])).unwrap();
        let z = d.boundary_samples(9)[4];
        let c = d.chart_at(&z).unwrap();
        for eta in [[0.02, 0.01, 0.01], [-0.03, 0.02, -0.01], [0.0, 0.04, 0.005]] {
            let h = c.graph.value(2, &eta);
            let inside = d.contains(&c.to_world(&eta));
            assert_eq!(inside, eta[2] > h);
        }
    }
}
