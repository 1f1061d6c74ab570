//! End-to-end check of `|f0| + |∇p| <= C |f|` in vBMO ∩ L2 with the empirical constant.

use serde::{Deserialize, Serialize};

use crate::domains::{signed_distance, DomainSpec};
use crate::fields::{lp_norm, VectorField};
use crate::helmholtz::{decompose, default_method, Diagnostics, Method, NeumannSolveReport, SolverOptions};
use crate::seminorms::{b_seminorm, ball_set, bmo_seminorm, grid_boundary_points, BallPolicy, BallSet};
use crate::{Point, Result};

/// vBMO ∩ L2 pieces of one field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub bmo: f64,
    pub b: f64,
    pub l2: f64,
}

impl FieldNorms {
    pub fn total(&self) -> f64 {
        self.bmo + self.b + self.l2
    }
}

/// Interior and boundary parts of the BMO supremum at scale `eps`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitNorms {
    /// Balls of radius below `eps` centred at distance at least `2 eps` from the boundary.
    pub interior: f64,
    /// Balls centred within `3 eps` of the boundary.
    pub boundary: f64,
    /// `b`-seminorm with radii below `eps`.
    pub b_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub ndim: usize,
    /// `false` in two dimensions, which the estimate does not cover.
    pub in_hypothesis: bool,
    pub method: Method,
    pub eps: f64,
    pub balls: usize,
    pub f: FieldNorms,
    pub f0: FieldNorms,
    pub grad_p: FieldNorms,
    /// `(|f0| + |∇p|) / |f|`.
    pub c_emp: f64,
    pub split_f0: SplitNorms,
    pub split_grad_p: SplitNorms,
    pub diagnostics: Diagnostics,
    pub solve: Option<NeumannSolveReport>,
}

struct Measure<'a> {
    spec: &'a DomainSpec,
    set: BallSet,
    interior: BallSet,
    near: BallSet,
    boundary: Option<(crate::domains::SignedDistanceField, Vec<Point>)>,
    mask: Option<Vec<bool>>,
    eps: f64,
}

impl Measure<'_> {
    fn bmo(&self, u: &VectorField, set: &BallSet) -> Result<f64> {
        if set.balls.is_empty() {
            return Ok(0.0);
        }
        Ok(bmo_seminorm(u, self.spec, set)?.0)
    }

    fn b(&self, u: &VectorField, nu: f64) -> Result<f64> {
        match &self.boundary {
            Some((sdf, pts)) if !pts.is_empty() => Ok(b_seminorm(u, nu, self.spec, sdf, pts)?.0),
            _ => Ok(0.0),
        }
    }

    fn norms(&self, u: &VectorField) -> Result<FieldNorms> {
        Ok(FieldNorms {
            bmo: self.bmo(u, &self.set)?,
            b: self.b(u, f64::INFINITY)?,
            l2: lp_norm(u, 2.0, self.mask.as_deref())?,
        })
    }

    fn split(&self, u: &VectorField) -> Result<SplitNorms> {
        Ok(SplitNorms {
            interior: self.bmo(u, &self.interior)?,
            boundary: self.bmo(u, &self.near)?,
            b_eps: self.b(u, self.eps)?,
        })
    }
}

/// Decomposes `f` with the default method of `spec` and measures every piece.
pub fn verify_main_theorem(
    f: &VectorField,
    spec: &DomainSpec,
    eps: f64,
    policy: &BallPolicy,
    opts: &SolverOptions,
) -> Result<TheoremReport> {
    let grid = f.grid();
    let method = default_method(spec);
    let dec = decompose(f, spec, method, opts)?;
    let set = ball_set(grid, spec, f64::INFINITY, policy)?;
    let dist = |b: &crate::seminorms::Ball| {
        if spec.has_boundary() {
            spec.distance(&grid.point_of(&b.center))
        } else {
            f64::INFINITY
        }
    };
    let filtered = |keep: &dyn Fn(&crate::seminorms::Ball) -> bool| BallSet {
        balls: set.balls.iter().copied().filter(|b| keep(b)).collect(),
        policy: set.policy.clone(),
    };
    let interior = filtered(&|b| b.radius < eps && dist(b) >= 2.0 * eps);
    let near = filtered(&|b| dist(b) < 3.0 * eps);
    let boundary = if spec.has_boundary() {
        Some((signed_distance(spec, grid)?, grid_boundary_points(spec, grid, 256)))
    } else {
        None
    };
    let mask = spec.has_boundary().then(|| spec.mask(grid));
    let m = Measure { spec, set, interior, near, boundary, mask, eps };
    let fm = match &m.mask {
        Some(mask) => f.masked(mask),
        None => f.clone(),
    };
    let nf = m.norms(&fm)?;
    let n0 = m.norms(&dec.f0)?;
    let ng = m.norms(&dec.grad_p)?;
    let c_emp = if nf.total() > 0.0 { (n0.total() + ng.total()) / nf.total() } else { 0.0 };
    Ok(TheoremReport {
        ndim: grid.ndim(),
        in_hypothesis: grid.ndim() >= 3,
        method,
        eps,
        balls: m.set.balls.len(),
        f: nf,
        f0: n0,
        grad_p: ng,
        c_emp,
        split_f0: m.split(&dec.f0)?,
        split_grad_p: m.split(&dec.grad_p)?,
        diagnostics: dec.diagnostics,
        solve: dec.solve,
    })
}
