//! Localised decomposition `φf = (φf0 - ω) + ∇(φ(p - M)) - (p - M)∇φ + ω`
//! around interior and boundary points, with `div ω = ∇φ·f0` from the Bogovskii solve.

use serde::{Deserialize, Serialize};

use crate::cutoffs::{boundary_cutoff, boundary_cutoff_in_chart, calibrate_c_half, interior_cutoff, CutoffSpec};
use crate::domains::{localize::c0, localize_chart, signed_distance, Constants, DomainKind, DomainSpec};
use crate::error::precondition;
use crate::fields::{ball_average, gradient, lp_norm, point_ball, Grid, ScalarField, Scheme, VectorField};
use crate::helmholtz::{bogovskii, DecompositionResult, MaskedGradient, Method, StarDomain};
use crate::seminorms::b_seminorm;
use crate::{linalg, Error, Point, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub center: Point,
    pub eps: f64,
    /// Largest admissible `eps` for boundary localisation; infinite without a boundary.
    pub cap: f64,
    pub cap_violated: bool,
    /// Average subtracted from `p`.
    pub m: f64,
    /// `|∫ ∇φ·f0| / (|∇φ|_2 |f0|_2)` before the mean was removed.
    pub mean_defect: f64,
    /// Identity residual with `∇(φ(p - M))` from the product rule, over `|f|_2`.
    pub algebraic_residual: f64,
    /// Same with `∇(φ(p - M))` from the decomposition's discrete gradient.
    pub fd_residual: f64,
    pub bogovskii_residual: f64,
    pub norm_f: f64,
    pub norm_solenoidal: f64,
    pub norm_gradient: f64,
    pub norm_lower: f64,
    pub norm_omega: f64,
    /// `b`-seminorm of `(p - M)∇φ` at scale `eps` near `z0`.
    pub b_lower: Option<f64>,
    /// Why the chart taper or cut-off preconditions failed, if they did.
    pub precondition: Option<String>,
}

/// `min{β/96, c_half/7, M0/(12nK), 1/(1152nK + 48), c0(n,K)/12}` at `z0`.
pub fn epsilon_cap(spec: &DomainSpec, z0: &Point, c: &Constants) -> Result<f64> {
    let Some(tp) = spec.type_params() else { return Ok(f64::INFINITY) };
    let n = spec.ndim() as f64;
    let chart = spec.chart_at(z0)?;
    let c_half = c.c_half.unwrap_or_else(|| calibrate_c_half(&chart, spec.cap().min(chart.alpha)));
    let k = tp.k;
    let m0_term = if k > 0.0 { c.m0 / (12.0 * n * k) } else { f64::INFINITY };
    Ok((tp.beta / 96.0)
        .min(c_half / 7.0)
        .min(m0_term)
        .min(1.0 / (1152.0 * n * k + 48.0))
        .min(c0(c, spec.ndim(), k) / 12.0))
}

struct Pieces {
    phi: ScalarField,
    dphi: VectorField,
}

fn sample_cutoff(cut: &CutoffSpec, f: &VectorField) -> Result<Pieces> {
    let grid = f.grid();
    let n = grid.ndim();
    let mut v = vec![0.0; grid.len()];
    let mut g = vec![vec![0.0; grid.len()]; n];
    for i in 0..grid.len() {
        let jet = cut.eval(&grid.point(i))?;
        v[i] = jet.v;
        for a in 0..n {
            g[a][i] = jet.grad[a];
        }
    }
    Ok(Pieces { phi: ScalarField::new(grid.clone(), v)?, dphi: VectorField::new(grid.clone(), g)? })
}

/// Discrete gradient matching the decomposition.
fn discrete_gradient(u: &ScalarField, dec: &DecompositionResult, mask: &[bool]) -> Result<VectorField> {
    match dec.method {
        Method::Spectral | Method::Reflect => gradient(u, Scheme::Central),
        Method::Neumann => Ok(MaskedGradient::new(u.grid(), mask)?.gradient(u.values())),
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    f: &VectorField,
    dec: &DecompositionResult,
    mask: &[bool],
    pieces: &Pieces,
    m: f64,
    solve_mask: &[bool],
    star: &StarDomain,
    x0: &Point,
    r: f64,
) -> Result<(LocalizationReport, VectorField)> {
    let grid = f.grid();
    let vol = grid.cell_volume();
    let f = f.masked(mask);
    let f0 = dec.f0.masked(mask);
    let gdot = pieces.dphi.dot(&f0);
    let total: f64 = (0..grid.len()).filter(|&i| solve_mask[i]).map(|i| gdot.values()[i]).sum::<f64>() * vol;
    let scale = lp_norm(&pieces.dphi, 2.0, Some(solve_mask))? * lp_norm(&f0, 2.0, Some(solve_mask))?;
    let mean_defect = if scale > 0.0 { total.abs() / scale } else { 0.0 };
    let cells = solve_mask.iter().filter(|&&b| b).count() as f64;
    let mean = total / (cells * vol);
    let rhs = ScalarField::new(
        grid.clone(),
        (0..grid.len()).map(|i| if solve_mask[i] { gdot.values()[i] - mean } else { 0.0 }).collect(),
    )?;
    let bog = bogovskii(&rhs, star, x0, r, 2.0)?;
    let omega = bog.u.masked(mask);

    let q = ScalarField::new(
        grid.clone(),
        (0..grid.len()).map(|i| if mask[i] { dec.p.values()[i] - m } else { 0.0 }).collect(),
    )?;
    let lower = pieces.dphi.times(&q);
    let solenoidal = f0.times(&pieces.phi).sub(&omega);
    let grad_alg = dec.grad_p.masked(mask).times(&pieces.phi).add(&lower);
    let phiq = q.zip(&pieces.phi, |a, b| a * b);
    let grad_fd = discrete_gradient(&phiq, dec, mask)?.masked(mask);
    let lhs = f.times(&pieces.phi);
    let resid = |g: &VectorField| -> Result<f64> {
        let rhs = solenoidal.add(g).sub(&lower).add(&omega);
        lp_norm(&lhs.sub(&rhs), 2.0, None)
    };
    let nf = lp_norm(&f, 2.0, None)?;
    let rel = |v: f64| if nf > 0.0 { v / nf } else { v };
    let report = LocalizationReport {
        center: [0.0; 3],
        eps: 0.0,
        cap: f64::INFINITY,
        cap_violated: false,
        m,
        mean_defect,
        algebraic_residual: rel(resid(&grad_alg)?),
        fd_residual: rel(resid(&grad_fd)?),
        bogovskii_residual: bog.div_residual,
        norm_f: nf,
        norm_solenoidal: lp_norm(&solenoidal, 2.0, None)?,
        norm_gradient: lp_norm(&grad_fd, 2.0, None)?,
        norm_lower: lp_norm(&lower, 2.0, None)?,
        norm_omega: lp_norm(&omega, 2.0, None)?,
        b_lower: None,
        precondition: None,
    };
    Ok((report, lower))
}

fn domain_mask(spec: &DomainSpec, f: &VectorField) -> Vec<bool> {
    if spec.has_boundary() {
        spec.mask(f.grid())
    } else {
        vec![true; f.grid().len()]
    }
}

/// Whole-cell shifts along periodic axes moving `x` to the middle of the grid, when `spec`
/// is invariant under them.
fn centring_shift(grid: &Grid, spec: &DomainSpec, x: &Point) -> Option<[i64; 3]> {
    if !matches!(spec.kind(), DomainKind::Torus | DomainKind::HalfSpace) || !grid.periodic().iter().any(|&p| p) {
        return None;
    }
    let mut s = [0i64; 3];
    for a in (0..grid.ndim()).filter(|&a| grid.periodic()[a]) {
        let h = grid.spacing()[a];
        let mid = grid.origin()[a] + 0.5 * grid.period(a);
        s[a] = ((mid - x[a]) / h).round() as i64;
    }
    Some(s)
}

fn roll(grid: &Grid, v: &[f64], s: &[i64; 3]) -> Vec<f64> {
    let shape = grid.shape();
    let mut out = vec![0.0; v.len()];
    for (i, &val) in v.iter().enumerate() {
        let mut idx = grid.multi(i);
        for a in 0..grid.ndim() {
            idx[a] = (idx[a] as i64 + s[a]).rem_euclid(shape[a] as i64) as usize;
        }
        out[grid.flat(&idx)] = val;
    }
    out
}

/// `f`, `dec` and `x` translated by `s` cells.
fn recentre(f: &VectorField, dec: &DecompositionResult, x: &Point, s: &[i64; 3]) -> Result<(VectorField, DecompositionResult, Point)> {
    let grid = f.grid();
    let rv = |u: &VectorField| VectorField::new(grid.clone(), u.components().iter().map(|c| roll(grid, c, s)).collect());
    let dec = DecompositionResult {
        method: dec.method,
        f0: rv(&dec.f0)?,
        grad_p: rv(&dec.grad_p)?,
        p: ScalarField::new(grid.clone(), roll(grid, dec.p.values(), s))?,
        diagnostics: dec.diagnostics,
        solve: dec.solve.clone(),
    };
    let mut y = *x;
    for a in 0..grid.ndim() {
        y[a] += s[a] as f64 * grid.spacing()[a];
    }
    Ok((rv(f)?, dec, y))
}

/// Interior identity with `φ = φ_{x,eps}`, `M` the mean of `p` on `B_{2 eps}(x)`.
///
/// On periodic axes of a torus or half space the data are first translated so that `x` sits mid-grid.
pub fn localized_interior_identity(
    f: &VectorField,
    dec: &DecompositionResult,
    spec: &DomainSpec,
    x: &Point,
    eps: f64,
) -> Result<LocalizationReport> {
    if let Some(s) = centring_shift(f.grid(), spec, x) {
        let (f, dec, y) = recentre(f, dec, x, &s)?;
        let mut rep = interior_identity(&f, &dec, spec, &y, eps)?;
        rep.center = *x;
        return Ok(rep);
    }
    interior_identity(f, dec, spec, x, eps)
}

fn interior_identity(
    f: &VectorField,
    dec: &DecompositionResult,
    spec: &DomainSpec,
    x: &Point,
    eps: f64,
) -> Result<LocalizationReport> {
    let grid = f.grid();
    let n = grid.ndim();
    let mask = domain_mask(spec, f);
    if spec.has_boundary() && spec.distance(x) < 2.0 * eps {
        return Err(precondition("B_{2 eps}(x) inside the domain", format!("dist = {}", spec.distance(x))));
    }
    let cut = interior_cutoff(n, x, eps)?;
    let pieces = sample_cutoff(&cut, f)?;
    let m = ball_average(&dec.p, x, 2.0 * eps, Some(&mask))?;
    let solve_mask: Vec<bool> =
        (0..grid.len()).map(|i| mask[i] && linalg::norm(n, &linalg::sub(&grid.point(i), x)) < 2.0 * eps).collect();
    let star = StarDomain::Ball { center: *x, radius: 2.0 * eps };
    let (mut rep, _) = assemble(f, dec, &mask, &pieces, m, &solve_mask, &star, x, eps)?;
    rep.center = *x;
    rep.eps = eps;
    Ok(rep)
}

/// Boundary identity at `z0` with the boundary-fitted cut-off, `rho = 12 eps`,
/// Bogovskii ball `B_{3 eps}(z0 + 6 eps nu)` and `M` the mean of `p` on `Ω ∩ B_rho(z0)`.
///
/// With `enforce` unset, a violated `eps` cap or cut-off precondition is reported instead of refused.
pub fn localized_boundary_identity(
    f: &VectorField,
    dec: &DecompositionResult,
    spec: &DomainSpec,
    z0: &Point,
    eps: f64,
    c: &Constants,
    enforce: bool,
) -> Result<LocalizationReport> {
    if let Some(s) = centring_shift(f.grid(), spec, z0) {
        let (f, dec, y) = recentre(f, dec, z0, &s)?;
        let mut rep = boundary_identity(&f, &dec, spec, &y, eps, c, enforce)?;
        rep.center = *z0;
        return Ok(rep);
    }
    boundary_identity(f, dec, spec, z0, eps, c, enforce)
}

fn boundary_identity(
    f: &VectorField,
    dec: &DecompositionResult,
    spec: &DomainSpec,
    z0: &Point,
    eps: f64,
    c: &Constants,
    enforce: bool,
) -> Result<LocalizationReport> {
    if !spec.has_boundary() {
        return Err(Error::Config("boundary identity needs a boundary".into()));
    }
    let grid = f.grid();
    let n = grid.ndim();
    let mask = spec.mask(grid);
    let cap = epsilon_cap(spec, z0, c)?;
    let violated = !(eps < cap);
    if violated && enforce {
        return Err(precondition("eps below the localisation cap", format!("eps = {eps}, cap = {cap}")));
    }
    let mut notes = Vec::new();
    let cut = match boundary_cutoff(spec, z0, eps, c) {
        Ok(cut) => cut,
        Err(e) if !enforce => {
            notes.push(e.to_string());
            boundary_cutoff_in_chart(spec.chart_at(z0)?, eps)
        }
        Err(e) => return Err(e),
    };
    let rho = 12.0 * eps;
    if let Err(e) = localize_chart(spec, z0, rho, c) {
        if enforce {
            return Err(e);
        }
        notes.push(e.to_string());
    }
    let pieces = sample_cutoff(&cut, f)?;
    let region: Vec<bool> =
        (0..grid.len()).map(|i| mask[i] && linalg::norm(n, &linalg::sub(&grid.point(i), z0)) < rho).collect();
    let inside: Vec<usize> = point_ball(grid, z0, rho).into_iter().filter(|&i| mask[i]).collect();
    if inside.is_empty() {
        return Err(Error::DegenerateBall("no cells in Ω ∩ B_rho(z0)".into()));
    }
    let m = inside.iter().map(|&i| dec.p.values()[i]).sum::<f64>() / inside.len() as f64;
    let nu = spec.normal_at(z0);
    let x0 = linalg::axpy(6.0 * eps, &nu, z0);
    let star = StarDomain::Region { spec, z0: *z0, rho };
    let (mut rep, lower) = assemble(f, dec, &mask, &pieces, m, &region, &star, &x0, 3.0 * eps)?;
    let sdf = signed_distance(spec, grid)?;
    let mut count = 64;
    let mut points: Vec<Point> = spec.boundary_samples_near(z0, 2.0 * eps, count);
    while points.len() < 8 && count < 1 << 16 {
        count *= 4;
        points = spec.boundary_samples_near(z0, 2.0 * eps, count);
    }
    if !points.is_empty() {
        match b_seminorm(&lower, eps, spec, &sdf, &points) {
            Ok((v, _)) => rep.b_lower = Some(v),
            Err(e) => notes.push(e.to_string()),
        }
    }
    rep.center = *z0;
    rep.eps = eps;
    rep.cap = cap;
    rep.cap_violated = violated;
    rep.precondition = (!notes.is_empty()).then(|| notes.join("; "));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{synth_vector_field, Grid};
    use crate::helmholtz::{project_domain, project_whole_space, SolverOptions};

    #[test]
    fn interior_identity_on_the_torus() {
        // the second centre straddles the periodic seam
        for x in [[0.5, 0.5, 0.0], [0.02, 0.97, 0.0]] {
            let res: Vec<f64> = [32, 64]
                .iter()
                .map(|&m| {
                    let g = Grid::unit_torus(2, m).unwrap();
                    let f = synth_vector_field(&g, 1.0, 9);
                    let dec = project_whole_space(&f).unwrap();
                    let spec = DomainSpec::torus(2).unwrap();
                    let rep = localized_interior_identity(&f, &dec, &spec, &x, 0.12).unwrap();
                    assert!(rep.algebraic_residual < 1e-8, "{}", rep.algebraic_residual);
                    assert!(rep.mean_defect < 0.05, "{}", rep.mean_defect);
                    assert_eq!(rep.center, x);
                    rep.fd_residual
                })
                .collect();
            assert!(res[0] / res[1] > 1.8, "{x:?}: {res:?}");
        }
    }

    #[test]
    fn boundary_identity_on_a_disk() {
        let spec = DomainSpec::ball(2, [0.0; 3], 1.0).unwrap();
        let g = Grid::cell_centered_box(2, 64, -1.1, 2.2).unwrap();
        let f = synth_vector_field(&g, 1.0, 4);
        let dec = project_domain(&f, &spec, &SolverOptions::default()).unwrap();
        let z0 = [1.0, 0.0, 0.0];
        let rep = localized_boundary_identity(&f, &dec, &spec, &z0, 0.08, &Constants::default(), false).unwrap();
        assert!(rep.algebraic_residual < 1e-8);
        assert!(rep.cap_violated);
        assert!(rep.b_lower.is_some(), "{:?}", rep.precondition);
        assert!(localized_boundary_identity(&f, &dec, &spec, &z0, 0.08, &Constants::default(), true).is_err());
    }
}
