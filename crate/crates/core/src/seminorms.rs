//! BMO, boundary and vBMO seminorms with the interpolation, multiplication
//! and embedding audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{DomainKind, DomainSpec, SignedDistanceField};
use crate::fields::{gradient, lp_norm, point_ball, within_ball, Grid, Sampled, ScalarField, Scheme, VectorField};
use crate::{Error, Point, Result};

/// Node-centred closed ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [usize; 3],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BallPolicy {
    /// Every node centre with every distinct node distance as radius.
    Exhaustive,
    /// Radii `2h 2^{k/4}` for `k < 4 levels`, centres on a sub-lattice of spacing
    /// about `spacing * r`, each centre also with its largest admissible radius,
    /// plus `random` seeded balls.
    Lattice { levels: usize, spacing: f64, random: usize, seed: u64 },
    Random { count: usize, seed: u64 },
}

impl Default for BallPolicy {
    fn default() -> Self {
        BallPolicy::Lattice { levels: 4, spacing: 0.5, random: 256, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallSet {
    pub balls: Vec<Ball>,
    pub policy: BallPolicy,
}

/// Constraints shared by every ball of a set.
struct Admissible<'a> {
    grid: &'a Grid,
    spec: &'a DomainSpec,
    mu: f64,
    rmin: f64,
}

impl Admissible<'_> {
    /// Supremum of admissible radii at a centre (strict for `mu` and half periods, closed otherwise).
    fn cap(&self, c: &[usize; 3]) -> (f64, f64) {
        let g = self.grid;
        let p = g.point_of(c);
        let (lo, hi) = g.bounds();
        let mut strict = self.mu;
        let mut closed = f64::INFINITY;
        for a in 0..g.ndim() {
            if g.periodic()[a] {
                strict = strict.min(0.5 * g.period(a));
            } else {
                closed = closed.min(p[a] - lo[a]).min(hi[a] - p[a]);
            }
        }
        if self.spec.has_boundary() {
            closed = closed.min(self.spec.distance(&p));
        }
        (strict, closed)
    }

    fn ok(&self, c: &[usize; 3], r: f64) -> bool {
        let (strict, closed) = self.cap(c);
        r >= self.rmin * (1.0 - 1e-12) && r < strict && r <= closed
    }

    fn largest(&self, c: &[usize; 3]) -> Option<f64> {
        let (strict, closed) = self.cap(c);
        let r = if closed < strict { closed } else { strict * (1.0 - 1e-9) };
        (r >= self.rmin * (1.0 - 1e-12)).then_some(r)
    }
}

fn effective_mu(mu: f64, grid: &Grid, spec: &DomainSpec) -> f64 {
    let diam = match spec.kind() {
        DomainKind::Ball { radius, .. } => 2.0 * radius,
        _ => grid_diameter(grid),
    };
    mu.min(diam)
}

fn grid_diameter(grid: &Grid) -> f64 {
    (0..grid.ndim()).map(|a| grid.period(a).powi(2)).sum::<f64>().sqrt()
}

/// Distinct node distances up to `rmax`, ascending.
fn node_distances(grid: &Grid, rmax: f64) -> Vec<f64> {
    let n = grid.ndim();
    let h = grid.spacing();
    let k: Vec<i64> = (0..3).map(|a| if a < n { (rmax / h[a]).floor() as i64 } else { 0 }).collect();
    let mut d2s = Vec::new();
    for i in 0..=k[0] {
        for j in 0..=k[1] {
            for l in 0..=k[2] {
                let d2 = (i as f64 * h[0]).powi(2)
                    + if n > 1 { (j as f64 * h[1]).powi(2) } else { 0.0 }
                    + if n > 2 { (l as f64 * h[2]).powi(2) } else { 0.0 };
                if d2 > 0.0 && within_ball(d2, rmax) {
                    d2s.push(d2);
                }
            }
        }
    }
    d2s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d2s.dedup();
    d2s.into_iter().map(f64::sqrt).collect()
}

/// Builds the ball set of a policy for balls inside `spec` with radius below `mu`.
pub fn ball_set(grid: &Grid, spec: &DomainSpec, mu: f64, policy: &BallPolicy) -> Result<BallSet> {
    let adm = Admissible { grid, spec, mu: effective_mu(mu, grid, spec), rmin: 2.0 * grid.max_spacing() };
    let centers: Vec<[usize; 3]> = (0..grid.len()).map(|i| grid.multi(i)).collect();
    let mut balls: Vec<Ball> = Vec::new();
    match policy {
        BallPolicy::Exhaustive => {
            let radii = node_distances(grid, adm.mu.min(grid_diameter(grid)));
            let per: Vec<Vec<Ball>> = centers
                .par_iter()
                .map(|c| radii.iter().filter(|&&r| adm.ok(c, r)).map(|&r| Ball { center: *c, radius: r }).collect())
                .collect();
            balls = per.into_iter().flatten().collect();
        }
        BallPolicy::Lattice { levels, spacing, random, seed } => {
            let h = grid.max_spacing();
            for k in 0..4 * levels {
                let r = adm.rmin * 2f64.powf(k as f64 / 4.0);
                let stride = ((spacing * r / h).floor() as usize).max(1);
                for c in centers.iter().filter(|c| c.iter().all(|&i| i % stride == 0)) {
                    if adm.ok(c, r) {
                        balls.push(Ball { center: *c, radius: r });
                    }
                    if k % 4 == 0 {
                        if let Some(top) = adm.largest(c) {
                            if top > r {
                                balls.push(Ball { center: *c, radius: top });
                            }
                        }
                    }
                }
            }
            balls.extend(random_balls(&adm, *random, *seed));
        }
        BallPolicy::Random { count, seed } => balls = random_balls(&adm, *count, *seed),
    }
    balls.sort_by(|a, b| grid.flat(&a.center).cmp(&grid.flat(&b.center)).then(a.radius.partial_cmp(&b.radius).unwrap()));
    balls.dedup();
    Ok(BallSet { balls, policy: policy.clone() })
}

fn random_balls(adm: &Admissible, count: usize, seed: u64) -> Vec<Ball> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let len = adm.grid.len();
    for _ in 0..count * 8 {
        if out.len() == count {
            break;
        }
        let c = adm.grid.multi(rng.gen_range(0..len));
        if let Some(top) = adm.largest(&c) {
            let r = if top > adm.rmin { rng.gen_range(adm.rmin..top) } else { top };
            if adm.ok(&c, r) {
                out.push(Ball { center: c, radius: r });
            }
        }
    }
    out
}

/// Mean of `|u - u_B|` over the masked nodes of `idx`.
fn oscillation<S: Sampled + ?Sized>(u: &S, idx: &[usize]) -> f64 {
    let k = idx.len() as f64;
    let nc = u.ncomp();
    let mut avg = [0.0f64; 3];
    for (c, a) in avg.iter_mut().enumerate().take(nc) {
        let v = u.comp(c);
        *a = idx.iter().map(|&i| v[i]).sum::<f64>() / k;
    }
    let mut s = 0.0;
    for &i in idx {
        if nc == 1 {
            s += (u.comp(0)[i] - avg[0]).abs();
        } else {
            s += (0..nc).map(|c| (u.comp(c)[i] - avg[c]).powi(2)).sum::<f64>().sqrt();
        }
    }
    s / k
}

fn ball_nodes(grid: &Grid, b: &Ball, mask: Option<&[bool]>) -> Vec<usize> {
    let mut idx = crate::fields::node_ball(grid, &b.center, b.radius);
    if let Some(m) = mask {
        idx.retain(|&i| m[i]);
    }
    idx
}

/// Mean oscillation of `u` on one ball.
pub fn ball_oscillation<S: Sampled + ?Sized>(u: &S, b: &Ball, mask: Option<&[bool]>) -> Option<f64> {
    let idx = ball_nodes(u.grid(), b, mask);
    (!idx.is_empty()).then(|| oscillation(u, &idx))
}

/// Largest value with ties broken towards the smallest (centre, radius).
fn argmax<K: Copy>(vals: impl IntoIterator<Item = (f64, K)>) -> Option<(f64, K)> {
    let mut best: Option<(f64, K)> = None;
    for (v, k) in vals {
        if best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, k));
        }
    }
    best
}

/// `sup` over the ball set of the mean oscillation, with the attaining ball.
pub fn bmo_seminorm<S: Sampled + Sync + ?Sized>(u: &S, spec: &DomainSpec, balls: &BallSet) -> Result<(f64, Ball)> {
    if balls.balls.is_empty() {
        return Err(Error::Empty("ball set".into()));
    }
    let grid = u.grid();
    let mask = spec.has_boundary().then(|| spec.mask(grid));
    let vals: Vec<(f64, Ball)> = balls
        .balls
        .par_iter()
        .filter_map(|b| ball_oscillation(u, b, mask.as_deref()).map(|v| (v, *b)))
        .collect();
    argmax(vals).ok_or_else(|| Error::Empty("every ball misses the domain".into()))
}

/// Exhaustive oracle; refuses grids above 4096 nodes.
pub fn brute_force_bmo<S: Sampled + Sync + ?Sized>(u: &S, spec: &DomainSpec, mu: f64) -> Result<f64> {
    let grid = u.grid();
    if grid.len() > 4096 {
        return Err(Error::SizeCap(format!("{} nodes exceed the exhaustive cap of 4096", grid.len())));
    }
    let set = ball_set(grid, spec, mu, &BallPolicy::Exhaustive)?;
    Ok(bmo_seminorm(u, spec, &set)?.0)
}

/// Boundary-centred ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBall {
    pub point: Point,
    pub radius: f64,
}

/// `r^{-n} ∫_{Ω ∩ B_r(x)} |∇d · f|` by cell-volume quadrature.
pub fn b_integral(f: &VectorField, sdf: &SignedDistanceField, mask: &[bool], x: &Point, r: f64) -> Result<f64> {
    let grid = f.grid();
    let n = grid.ndim();
    let mut s = 0.0;
    for i in point_ball(grid, x, r) {
        if !mask[i] {
            continue;
        }
        if !sdf.valid[i] {
            return Err(Error::Ambiguous(format!("distance gradient unavailable at node {i}")));
        }
        let dn: f64 = (0..n).map(|a| sdf.grad.component(a)[i] * f.component(a)[i]).sum();
        s += dn.abs();
    }
    Ok(s * grid.cell_volume() / r.powi(n as i32))
}

/// Radii `2h 2^{k/4}` below `min(nu, band)`, plus the top value.
pub fn boundary_radii(grid: &Grid, nu: f64, band: f64) -> Vec<f64> {
    let top = nu.min(band).min(grid_diameter(grid));
    let rmin = 2.0 * grid.max_spacing();
    let mut out: Vec<f64> = (0..).map(|k| rmin * 2f64.powf(k as f64 / 4.0)).take_while(|&r| r < top).collect();
    if top > rmin {
        out.push(top * (1.0 - 1e-9));
    }
    out
}

/// `sup` over sampled boundary points and radii below `nu` of the normalised normal flux.
pub fn b_seminorm(
    f: &VectorField,
    nu: f64,
    spec: &DomainSpec,
    sdf: &SignedDistanceField,
    points: &[Point],
) -> Result<(f64, BoundaryBall)> {
    if !spec.has_boundary() {
        return Err(Error::Config("b seminorm needs a boundary".into()));
    }
    if !(sdf.band > 0.0) {
        return Err(Error::Ambiguous("distance band unavailable".into()));
    }
    let grid = f.grid();
    let mask = spec.mask(grid);
    let radii = boundary_radii(grid, nu, sdf.band);
    let pairs: Vec<BoundaryBall> =
        points.iter().flat_map(|p| radii.iter().map(|&r| BoundaryBall { point: *p, radius: r })).collect();
    if pairs.is_empty() {
        return Err(Error::Empty("boundary ball set".into()));
    }
    let vals: Vec<(f64, BoundaryBall)> = pairs
        .par_iter()
        .map(|b| b_integral(f, sdf, &mask, &b.point, b.radius).map(|v| (v, *b)))
        .collect::<Result<_>>()?;
    Ok(argmax(vals).expect("nonempty"))
}

/// Boundary samples of `spec` lying inside the grid box, about `count` of them.
pub fn grid_boundary_points(spec: &DomainSpec, grid: &Grid, count: usize) -> Vec<Point> {
    let (lo, hi) = grid.bounds();
    let n = grid.ndim();
    spec.boundary_samples(count)
        .into_iter()
        .filter(|p| (0..n).all(|a| grid.periodic()[a] || (p[a] >= lo[a] && p[a] <= hi[a])))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub mu: f64,
    pub nu: f64,
    pub bmo: f64,
    pub bmo_ball: Option<Ball>,
    pub b: f64,
    pub b_ball: Option<BoundaryBall>,
    pub l2: f64,
    /// `bmo + b`.
    pub vbmo: f64,
    pub balls: usize,
    /// Finite radii caps give the same space as infinite ones once intersected with L2.
    pub finite_caps: bool,
}

/// Boundary data for the `b` part: distance field and sample points.
pub struct BoundaryData<'a> {
    pub sdf: &'a SignedDistanceField,
    pub points: &'a [Point],
}

pub fn vbmo_norm(
    f: &VectorField,
    mu: f64,
    nu: f64,
    spec: &DomainSpec,
    policy: &BallPolicy,
    boundary: Option<BoundaryData>,
) -> Result<SeminormReport> {
    let grid = f.grid();
    let set = ball_set(grid, spec, mu, policy)?;
    let (bmo, ball) = bmo_seminorm(f, spec, &set)?;
    let (b, b_ball) = match (spec.has_boundary(), boundary) {
        (false, _) => (0.0, None),
        (true, Some(bd)) => {
            let (v, bb) = b_seminorm(f, nu, spec, bd.sdf, bd.points)?;
            (v, Some(bb))
        }
        (true, None) => return Err(Error::Config("boundary data required for a domain with boundary".into())),
    };
    let mask = spec.has_boundary().then(|| spec.mask(grid));
    let l2 = lp_norm(f, 2.0, mask.as_deref())?;
    Ok(SeminormReport {
        mu,
        nu,
        bmo,
        bmo_ball: Some(ball),
        b,
        b_ball,
        l2,
        vbmo: bmo + b,
        balls: set.balls.len(),
        finite_caps: mu.is_finite() || nu.is_finite(),
    })
}

/// `[u]_{BMO^mu} + |u|_{L^r}`.
pub fn bmol_norm<S: Sampled + Sync + ?Sized>(u: &S, r: f64, spec: &DomainSpec, balls: &BallSet) -> Result<f64> {
    let mask = spec.has_boundary().then(|| spec.mask(u.grid()));
    Ok(bmo_seminorm(u, spec, balls)?.0 + lp_norm(u, r, mask.as_deref())?)
}

/// Empirical constant `|u|_{L^q} / (q |u|_{BMOL^r})`.
pub fn interpolation_constant<S: Sampled + Sync + ?Sized>(
    u: &S,
    r: f64,
    q: f64,
    spec: &DomainSpec,
    balls: &BallSet,
) -> Result<f64> {
    if !(r <= q && q.is_finite()) {
        return Err(Error::Config(format!("need r <= q < inf, got r = {r}, q = {q}")));
    }
    let den = q * bmol_norm(u, r, spec, balls)?;
    if !(den > 0.0) {
        return Err(Error::UndefinedRatio("zero BMOL norm".into()));
    }
    let mask = spec.has_boundary().then(|| spec.mask(u.grid()));
    Ok(lp_norm(u, q, mask.as_deref())? / den)
}

/// Sampled `C^gamma` norm: `sup|phi|` plus the Holder quotient over node pairs within 8 cells,
/// with `osc(phi) / (8h)^gamma` covering the far pairs.
pub fn holder_norm(phi: &ScalarField, gamma: f64) -> f64 {
    let grid = phi.grid();
    let v = phi.values();
    let sup = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let reach = 8.0 * grid.max_spacing();
    let near = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.point(i);
            let mut best = 0.0f64;
            for j in point_ball(grid, &p, reach) {
                if j == i {
                    continue;
                }
                let d = crate::linalg::norm(grid.ndim(), &crate::linalg::sub(&grid.point(j), &p));
                let d = if d > 0.0 { d } else { continue };
                best = best.max((v[i] - v[j]).abs() / d.powf(gamma));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let osc = if hi >= lo { hi - lo } else { 0.0 };
    sup + near.max(osc / reach.powf(gamma))
}

/// Empirical `|phi v|_{BMOL^r} / (|phi|_{C^gamma} |v|_{BMOL^r})`.
pub fn multiplication_audit(
    phi: &ScalarField,
    gamma: f64,
    v: &ScalarField,
    r: f64,
    spec: &DomainSpec,
    balls: &BallSet,
) -> Result<f64> {
    let den = holder_norm(phi, gamma) * bmol_norm(v, r, spec, balls)?;
    if !(den > 0.0) {
        return Err(Error::UndefinedRatio("zero denominator in the multiplication audit".into()));
    }
    let prod = phi.zip(v, |a, b| a * b);
    Ok(bmol_norm(&prod, r, spec, balls)? / den)
}

/// Empirical `[g]_{BMO} / |grad g|_{L^n}`.
pub fn w1n_embedding_audit(g: &ScalarField, spec: &DomainSpec, balls: &BallSet, scheme: Scheme) -> Result<f64> {
    let n = g.grid().ndim() as f64;
    let mask = spec.has_boundary().then(|| spec.mask(g.grid()));
    let den = lp_norm(&gradient(g, scheme)?, n, mask.as_deref())?;
    if !(den > 1e-300) {
        return Err(Error::UndefinedRatio("constant function has no gradient".into()));
    }
    Ok(bmo_seminorm(g, spec, balls)?.0 / den)
}
