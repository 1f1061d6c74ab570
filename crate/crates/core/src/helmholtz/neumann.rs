//! Masked finite-volume gradient, the Neumann solve and the projection on general domains.
//!
//! Unknowns live on cells; a face exists between two mask cells that are grid
//! neighbours (wrapping on periodic axes). The projection is done on faces, where
//! it is exactly discrete-divergence free, and averaged back to cells.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::domains::DomainSpec;
use crate::fields::{lp_norm, Grid, ScalarField, VectorField};
use crate::helmholtz::spectral::diagnostics;
use crate::helmholtz::{DecompositionResult, Method};
use crate::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative residual target of the conjugate-gradient solve.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannSolveReport {
    pub iterations: usize,
    /// Final `|r| / |b|`.
    pub residual: f64,
    pub converged: bool,
    /// `|sum rhs| / sum |rhs|` before the mean was removed.
    pub compatibility_defect: f64,
}

/// Face gradient `G`, its adjoint and the face-to-cell average on a cell mask.
#[derive(Clone, Debug)]
pub struct MaskedGradient {
    grid: Grid,
    mask: Vec<bool>,
    /// Upper grid neighbour along each axis, `NONE` off the grid.
    next: Vec<Vec<usize>>,
    prev: Vec<Vec<usize>>,
    /// Connected component of each mask cell, `NONE` outside.
    component: Vec<usize>,
    ncomponents: usize,
}

impl MaskedGradient {
    pub fn new(grid: &Grid, mask: &[bool]) -> Result<MaskedGradient> {
        if mask.len() != grid.len() {
            return Err(Error::Config("mask length differs from the grid".into()));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Empty("mask has no cells".into()));
        }
        let n = grid.ndim();
        let shape = grid.shape();
        let strides = grid.strides();
        let mut next = vec![vec![NONE; grid.len()]; n];
        let mut prev = vec![vec![NONE; grid.len()]; n];
        for i in 0..grid.len() {
            let idx = grid.multi(i);
            for a in 0..n {
                let m = shape[a];
                if idx[a] + 1 < m {
                    next[a][i] = i + strides[a];
                } else if grid.periodic()[a] && m > 1 {
                    next[a][i] = i + strides[a] - m * strides[a];
                }
                if idx[a] > 0 {
                    prev[a][i] = i - strides[a];
                } else if grid.periodic()[a] && m > 1 {
                    prev[a][i] = i + (m - 1) * strides[a];
                }
            }
        }
        let mut g = MaskedGradient {
            grid: grid.clone(),
            mask: mask.to_vec(),
            next,
            prev,
            component: vec![NONE; grid.len()],
            ncomponents: 0,
        };
        g.label_components();
        Ok(g)
    }

    fn label_components(&mut self) {
        let mut queue = VecDeque::new();
        for s in 0..self.grid.len() {
            if !self.mask[s] || self.component[s] != NONE {
                continue;
            }
            let id = self.ncomponents;
            self.ncomponents += 1;
            self.component[s] = id;
            queue.push_back(s);
            while let Some(i) = queue.pop_front() {
                for a in 0..self.grid.ndim() {
                    for j in [self.next[a][i], self.prev[a][i]] {
                        if j != NONE && self.mask[j] && self.component[j] == NONE {
                            self.component[j] = id;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn components(&self) -> usize {
        self.ncomponents
    }

    /// Upper face of cell `i` along `a` exists.
    pub fn has_face(&self, a: usize, i: usize) -> bool {
        let j = self.next[a][i];
        self.mask[i] && j != NONE && self.mask[j]
    }

    fn has_lower_face(&self, a: usize, i: usize) -> bool {
        let j = self.prev[a][i];
        j != NONE && self.has_face(a, j)
    }

    /// Mask cells missing at least one face.
    pub fn boundary_cells(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&i| self.mask[i] && (0..self.grid.ndim()).any(|a| !self.has_face(a, i) || !self.has_lower_face(a, i)))
            .collect()
    }

    /// `G p`: per axis, indexed by the lower cell, zero where no face exists.
    pub fn face_gradient(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let h = self.grid.spacing();
        (0..self.grid.ndim())
            .map(|a| {
                (0..self.grid.len())
                    .map(|i| if self.has_face(a, i) { (p[self.next[a][i]] - p[i]) / h[a] } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// `G^T q`, which is minus the discrete divergence.
    pub fn face_gradient_t(&self, q: &[Vec<f64>]) -> Vec<f64> {
        let h = self.grid.spacing();
        let mut out = vec![0.0; self.grid.len()];
        for (a, qa) in q.iter().enumerate() {
            for i in 0..self.grid.len() {
                if self.has_face(a, i) {
                    let v = qa[i] / h[a];
                    out[i] -= v;
                    out[self.next[a][i]] += v;
                }
            }
        }
        out
    }

    /// `G^T G p`.
    pub fn laplacian(&self, p: &[f64]) -> Vec<f64> {
        self.face_gradient_t(&self.face_gradient(p))
    }

    fn diagonal(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        (0..self.grid.len())
            .map(|i| {
                (0..self.grid.ndim())
                    .map(|a| (self.has_face(a, i) as u8 + self.has_lower_face(a, i) as u8) as f64 / (h[a] * h[a]))
                    .sum()
            })
            .collect()
    }

    /// Face values of a cell field: mean of the two cells.
    pub fn to_faces(&self, f: &VectorField) -> Vec<Vec<f64>> {
        (0..self.grid.ndim())
            .map(|a| {
                let c = f.component(a);
                (0..self.grid.len())
                    .map(|i| if self.has_face(a, i) { 0.5 * (c[i] + c[self.next[a][i]]) } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// `W q`: each cell takes the mean of its existing faces per axis, zero if it has none.
    pub fn to_cells(&self, q: &[Vec<f64>]) -> VectorField {
        let comps = (0..self.grid.ndim())
            .map(|a| {
                (0..self.grid.len())
                    .map(|i| {
                        let mut s = 0.0;
                        let mut k = 0.0;
                        if self.has_face(a, i) {
                            s += q[a][i];
                            k += 1.0;
                        }
                        if self.has_lower_face(a, i) {
                            s += q[a][self.prev[a][i]];
                            k += 1.0;
                        }
                        if k > 0.0 {
                            s / k
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        VectorField::new(self.grid.clone(), comps).expect("grid-shaped components")
    }

    /// Cell gradient `W G p`.
    pub fn gradient(&self, p: &[f64]) -> VectorField {
        self.to_cells(&self.face_gradient(p))
    }

    /// Removes the mean on every connected component; zero outside the mask.
    pub fn remove_means(&self, v: &mut [f64]) {
        let mut sum = vec![0.0; self.ncomponents];
        let mut count = vec![0.0; self.ncomponents];
        for i in 0..v.len() {
            let c = self.component[i];
            if c != NONE {
                sum[c] += v[i];
                count[c] += 1.0;
            }
        }
        for i in 0..v.len() {
            let c = self.component[i];
            v[i] = if c == NONE { 0.0 } else { v[i] - sum[c] / count[c] };
        }
    }

    /// Jacobi-preconditioned CG for `G^T G p = b` with `b` already compatible.
    fn solve(&self, b: &[f64], opts: &SolverOptions) -> (Vec<f64>, usize, f64, bool) {
        let len = b.len();
        let diag = self.diagonal();
        let inv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let bnorm = dot(b, b).sqrt();
        let mut x = vec![0.0; len];
        if bnorm == 0.0 {
            return (x, 0, 0.0, true);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut rel = 1.0;
        for it in 0..opts.max_iter {
            let ap = self.laplacian(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return (x, it, rel, rel <= opts.tol);
            }
            let alpha = rz / pap;
            for i in 0..len {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rel = dot(&r, &r).sqrt() / bnorm;
            if rel <= opts.tol {
                self.remove_means(&mut x);
                return (x, it + 1, rel, true);
            }
            for i in 0..len {
                z[i] = r[i] * inv[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
        }
        self.remove_means(&mut x);
        (x, opts.max_iter, rel, false)
    }
}

/// Solves `Δp = g` in the mask with `∂p/∂n = F·n` on its boundary faces.
///
/// `flux` defaults to zero. Boundary faces take `F` averaged over the two cells,
/// or the cell value at the grid ends.
pub fn solve_neumann(
    grid: &Grid,
    mask: &[bool],
    rhs: &ScalarField,
    flux: Option<&VectorField>,
    opts: &SolverOptions,
) -> Result<(ScalarField, NeumannSolveReport)> {
    let op = MaskedGradient::new(grid, mask)?;
    let h = grid.spacing();
    let mut b: Vec<f64> = (0..grid.len()).map(|i| if mask[i] { -rhs.values()[i] } else { 0.0 }).collect();
    if let Some(fl) = flux {
        for a in 0..grid.ndim() {
            let c = fl.component(a);
            for i in (0..grid.len()).filter(|&i| mask[i]) {
                if !op.has_face(a, i) {
                    let j = op.next[a][i];
                    let v = if j == NONE { c[i] } else { 0.5 * (c[i] + c[j]) };
                    b[i] += v / h[a];
                }
                if !op.has_lower_face(a, i) {
                    let j = op.prev[a][i];
                    let v = if j == NONE { c[i] } else { 0.5 * (c[i] + c[j]) };
                    b[i] -= v / h[a];
                }
            }
        }
    }
    let total: f64 = b.iter().map(|v| v.abs()).sum();
    let mut sums = vec![0.0; op.ncomponents];
    for i in 0..b.len() {
        if op.component[i] != NONE {
            sums[op.component[i]] += b[i];
        }
    }
    let defect = if total > 0.0 { sums.iter().map(|s| s.abs()).sum::<f64>() / total } else { 0.0 };
    op.remove_means(&mut b);
    let (p, iterations, residual, converged) = op.solve(&b, opts);
    let report = NeumannSolveReport { iterations, residual, converged, compatibility_defect: defect };
    Ok((ScalarField::new(grid.clone(), p)?, report))
}

/// Projection onto discretely divergence-free fields with zero normal flux through the boundary faces.
pub fn project_domain(f: &VectorField, spec: &DomainSpec, opts: &SolverOptions) -> Result<DecompositionResult> {
    let grid = f.grid();
    if spec.ndim() != grid.ndim() {
        return Err(Error::Config("domain and grid dimensions differ".into()));
    }
    let mask = spec.mask(grid);
    let op = MaskedGradient::new(grid, &mask)?;
    let faces = op.to_faces(f);
    let mut b = op.face_gradient_t(&faces);
    op.remove_means(&mut b);
    let (p, iterations, residual, converged) = op.solve(&b, opts);
    let gp_faces = op.face_gradient(&p);
    let q: Vec<Vec<f64>> = faces.iter().zip(&gp_faces).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u - v).collect()).collect();
    let fm = f.masked(&mask);
    let grad_p = op.to_cells(&gp_faces);
    let f0 = fm.sub(&grad_p);

    let div = op.face_gradient_t(&q);
    let div_l2 = (div.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt();
    let n = grid.ndim();
    let boundary = op.boundary_cells();
    let mut acc = 0.0;
    let mut count = 0usize;
    for &i in &boundary {
        if let Some(loc) = spec.locate(&grid.point(i)) {
            let v: f64 = (0..n).map(|a| f0.component(a)[i] * loc.normal[a]).sum();
            acc += v * v;
            count += 1;
        }
    }
    let cells = mask.iter().filter(|&&m| m).count() as f64;
    let f_rms = lp_norm(&fm, 2.0, None)? / (cells * grid.cell_volume()).sqrt();
    let trace = (count > 0).then(|| (acc / count as f64).sqrt() / if f_rms > 0.0 { f_rms } else { 1.0 });
    let diag = diagnostics(&fm, &f0, &grad_p, Some(&mask), div_l2, trace);
    let solve = NeumannSolveReport { iterations, residual, converged, compatibility_defect: 0.0 };
    Ok(DecompositionResult {
        method: Method::Neumann,
        f0,
        grad_p,
        p: ScalarField::new(grid.clone(), p)?,
        diagnostics: diag,
        solve: Some(solve),
    })
}
