//! Sorting a field into the solenoidal or gradient subspace from its discrete derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domains::DomainSpec;
use crate::fields::{partial, ScalarField, Scheme, VectorField};
use crate::helmholtz::{decompose, default_method, SolverOptions};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceKind {
    Solenoidal,
    Gradient,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: SubspaceKind,
    /// `|div f|_2 / |∇f|_2` over interior cells.
    pub div_residual: f64,
    /// RMS of `f·nu` on boundary cells over the RMS of `|f|`; zero without a boundary.
    pub normal_trace: f64,
    /// `|∂_a f_b - ∂_b f_a|_2 / |∇f|_2` over interior cells.
    pub curl_residual: f64,
    /// `|p - mean|_{L^r}` of the potential on seeded sub-boxes of a quarter of the extent.
    pub potential_lr: Vec<f64>,
}

/// Cells whose two neighbours along every non-periodic axis are in the mask.
fn interior(grid: &crate::fields::Grid, mask: &[bool]) -> Vec<bool> {
    let strides = grid.strides();
    (0..grid.len())
        .map(|i| {
            mask[i] && {
                let idx = grid.multi(i);
                (0..grid.ndim()).all(|a| {
                    grid.periodic()[a]
                        || (idx[a] > 0
                            && idx[a] + 1 < grid.shape()[a]
                            && mask[i - strides[a]]
                            && mask[i + strides[a]])
                })
            }
        })
        .collect()
}

pub fn characterize_subspaces(
    f: &VectorField,
    spec: &DomainSpec,
    tol: f64,
    r: f64,
    boxes: usize,
    seed: u64,
) -> Result<Classification> {
    let grid = f.grid();
    let n = grid.ndim();
    if spec.ndim() != n {
        return Err(Error::Config("domain and grid dimensions differ".into()));
    }
    let mask = if spec.has_boundary() { spec.mask(grid) } else { vec![true; grid.len()] };
    let inner = interior(grid, &mask);
    let scheme = if grid.fully_periodic() { Scheme::Spectral } else { Scheme::Central };
    let fm = f.masked(&mask);
    let mut d = vec![vec![Vec::new(); n]; n];
    for (b, row) in d.iter_mut().enumerate() {
        let comp = fm.component_field(b);
        for (a, slot) in row.iter_mut().enumerate() {
            *slot = partial(&comp, a, scheme)?.into_values();
        }
    }
    let (mut grad2, mut div2, mut curl2) = (0.0, 0.0, 0.0);
    for i in (0..grid.len()).filter(|&i| inner[i]) {
        let mut div = 0.0;
        for b in 0..n {
            div += d[b][b][i];
            for a in 0..n {
                grad2 += d[b][a][i].powi(2);
                if a < b {
                    curl2 += (d[b][a][i] - d[a][b][i]).powi(2);
                }
            }
        }
        div2 += div * div;
    }
    let rel = |v: f64| if grad2 > 0.0 { (v / grad2).sqrt() } else { 0.0 };
    let (div_residual, curl_residual) = (rel(div2), rel(curl2));

    let mut normal_trace = 0.0;
    if spec.has_boundary() {
        let (mut acc, mut count) = (0.0, 0usize);
        for i in (0..grid.len()).filter(|&i| mask[i] && !inner[i]) {
            if let Some(loc) = spec.locate(&grid.point(i)) {
                let v: f64 = (0..n).map(|a| fm.component(a)[i] * loc.normal[a]).sum();
                acc += v * v;
                count += 1;
            }
        }
        let cells = mask.iter().filter(|&&m| m).count().max(1) as f64;
        let f_ms: f64 = (0..grid.len()).filter(|&i| mask[i]).map(|i| fm.at(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / cells;
        if count > 0 && f_ms > 0.0 {
            normal_trace = (acc / count as f64 / f_ms).sqrt();
        }
    }

    let kind = if div_residual <= tol && normal_trace <= tol {
        SubspaceKind::Solenoidal
    } else if curl_residual <= tol {
        SubspaceKind::Gradient
    } else {
        SubspaceKind::Mixed
    };
    let potential_lr = if boxes > 0 {
        let dec = decompose(f, spec, default_method(spec), &SolverOptions::default())?;
        potential_norms(&dec.p, &mask, r, boxes, seed)
    } else {
        Vec::new()
    };
    Ok(Classification { kind, div_residual, normal_trace, curl_residual, potential_lr })
}

fn potential_norms(p: &ScalarField, mask: &[bool], r: f64, boxes: usize, seed: u64) -> Vec<f64> {
    let grid = p.grid();
    let n = grid.ndim();
    let shape = grid.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..boxes)
        .map(|_| {
            let mut lo = [0usize; 3];
            let mut len = [1usize; 3];
            for a in 0..n {
                len[a] = (shape[a] / 4).max(1);
                lo[a] = rng.gen_range(0..=shape[a] - len[a]);
            }
            let cells: Vec<usize> = (0..grid.len())
                .filter(|&i| mask[i] && (0..n).all(|a| (lo[a]..lo[a] + len[a]).contains(&grid.multi(i)[a])))
                .collect();
            if cells.is_empty() {
                return 0.0;
            }
            let mean = cells.iter().map(|&i| p.values()[i]).sum::<f64>() / cells.len() as f64;
            let s: f64 = cells.iter().map(|&i| (p.values()[i] - mean).abs().powf(r)).sum();
            (s * grid.cell_volume()).powf(1.0 / r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fields::Grid;

    #[test]
    fn torus_fields_are_sorted() {
        let g = Grid::unit_torus(2, 32).unwrap();
        let spec = DomainSpec::torus(2).unwrap();
        let sol = VectorField::from_fn(&g, |x| [(2.0 * PI * x[1]).sin(), (2.0 * PI * x[0]).cos(), 0.0]);
        let grad = VectorField::from_fn(&g, |x| {
            let (a, b) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
            [a.cos() * b.cos(), -a.sin() * b.sin(), 0.0]
        });
        let mixed = sol.add(&grad);
        let c = |f: &VectorField| characterize_subspaces(f, &spec, 1e-8, 2.0, 3, 1).unwrap();
        assert_eq!(c(&sol).kind, SubspaceKind::Solenoidal);
        let cg = c(&grad);
        assert_eq!(cg.kind, SubspaceKind::Gradient);
        assert_eq!(cg.potential_lr.len(), 3);
        assert!(cg.potential_lr.iter().all(|v| v.is_finite()));
        assert_eq!(c(&mixed).kind, SubspaceKind::Mixed);
    }

    #[test]
    fn boundary_flux_rules_out_solenoidal() {
        let g = Grid::cell_centered_box(2, 32, -1.1, 2.2).unwrap();
        let spec = DomainSpec::ball(2, [0.0; 3], 1.0).unwrap();
        let f = VectorField::from_fn(&g, |_| [1.0, 0.0, 0.0]);
        let c = characterize_subspaces(&f, &spec, 1e-8, 2.0, 0, 1).unwrap();
        assert!(c.div_residual == 0.0);
        assert!(c.normal_trace > 0.1);
        assert_eq!(c.kind, SubspaceKind::Gradient);
    }
}
