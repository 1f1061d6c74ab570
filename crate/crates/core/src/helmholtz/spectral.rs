//! Riesz-multiplier projection on the torus and its reflected half-space variant.

use num_complex::Complex64;

use crate::fields::fft::{is_nyquist, wavenumber, RealNdFft};
use crate::fields::{inner, lp_norm, Grid, ScalarField, VectorField};
use crate::helmholtz::{DecompositionResult, Diagnostics, Method};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Per-axis wavenumbers of the half spectrum, Nyquist entries zeroed to match the spectral derivative.
fn wavenumber_tables(grid: &Grid, half: &[usize]) -> Vec<Vec<f64>> {
    let shape = grid.shape();
    (0..grid.ndim())
        .map(|a| {
            (0..half[a])
                .map(|m| if is_nyquist(m, shape[a]) { 0.0 } else { wavenumber(m, shape[a], grid.period(a)) })
                .collect()
        })
        .collect()
}

/// `grad p^ = xi (xi . f^) / |xi|^2`, `f0 = f - grad p`; the mean stays in `f0`.
pub fn project_whole_space(f: &VectorField) -> Result<DecompositionResult> {
    let grid = f.grid();
    if !grid.fully_periodic() {
        return Err(Error::Config("the whole-space projection needs a fully periodic grid".into()));
    }
    let n = grid.ndim();
    let shape = grid.shape();
    let fft = RealNdFft::new(shape);
    let half = fft.half_shape().to_vec();
    let tables = wavenumber_tables(grid, &half);
    let mut spec: Vec<Vec<Complex64>> = (0..n).map(|c| fft.forward(f.component(c))).collect();
    let len: usize = half.iter().product();
    let mut ph = vec![ZERO; len];
    // divergence of the projected spectrum via Parseval; interior half-axis bins stand for two
    let (last, m) = (half[n - 1], shape[n - 1]);
    let kmax = tables.iter().map(|t| t.iter().map(|v| v * v).fold(0.0, f64::max)).sum::<f64>().sqrt();
    let mut div2 = 0.0;
    let mut idx = [0usize; 3];
    for k in 0..len {
        let mut xi = [0.0; 3];
        for a in 0..n {
            xi[a] = tables[a][idx[a]];
        }
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < half[a] {
                break;
            }
            idx[a] = 0;
        }
        let k2: f64 = xi[..n].iter().map(|v| v * v).sum();
        if k2 == 0.0 {
            continue;
        }
        let dot: Complex64 = (0..n).map(|c| spec[c][k] * xi[c]).sum::<Complex64>() / k2;
        let mut d = ZERO;
        for c in 0..n {
            spec[c][k] -= dot * xi[c];
            d += spec[c][k] * xi[c];
        }
        ph[k] = dot * Complex64::new(0.0, -1.0);
        let col = k % last;
        let weight = if col == 0 || (m % 2 == 0 && col == last - 1) { 1.0 } else { 2.0 };
        div2 += weight * d.norm_sqr();
    }
    let p = ScalarField::new(grid.clone(), fft.inverse(&mut ph))?;
    let f0 = VectorField::new(grid.clone(), spec.iter_mut().map(|s| fft.inverse(s)).collect())?;
    let grad_p = f.sub(&f0);
    let div_l2 = (div2 / grid.len() as f64 * grid.cell_volume()).sqrt();
    let diagnostics = diagnostics(f, &f0, &grad_p, None, div_l2 / kmax.max(1.0), None);
    Ok(DecompositionResult { method: Method::Spectral, f0, grad_p, p, diagnostics, solve: None })
}

pub(crate) fn diagnostics(
    f: &VectorField,
    f0: &VectorField,
    grad_p: &VectorField,
    mask: Option<&[bool]>,
    div_l2: f64,
    normal_trace: Option<f64>,
) -> Diagnostics {
    let fn2 = inner(f, f, mask);
    let fnorm = fn2.sqrt();
    let mut recon2 = 0.0;
    for c in 0..f.ndim() {
        let (a, b, u) = (f0.component(c), grad_p.component(c), f.component(c));
        for i in (0..u.len()).filter(|&i| mask.is_none_or(|m| m[i])) {
            recon2 += (a[i] + b[i] - u[i]).powi(2);
        }
    }
    let recon = (recon2 * f.grid().cell_volume()).sqrt();
    let safe = |v: f64, d: f64| if d > 0.0 { v / d } else { v };
    Diagnostics {
        div_residual: safe(div_l2, fnorm),
        normal_trace,
        orthogonality: safe(inner(f0, grad_p, mask).abs(), fn2),
        reconstruction_error: safe(recon, fnorm),
    }
}

/// Checks the slab layout: periodic tangential axes, cell-centred normal axis from `x_n = 0`.
fn check_slab(grid: &Grid) -> Result<()> {
    let n = grid.ndim();
    let last = n - 1;
    let h = grid.spacing()[last];
    let tangential_ok = (0..last).all(|a| grid.periodic()[a]);
    let face_ok = !grid.periodic()[last] && (grid.origin()[last] - 0.5 * h).abs() <= 1e-12 * h.max(1.0);
    if !tangential_ok || !face_ok {
        return Err(Error::Config(
            "half space needs periodic tangential axes and a cell-centred normal axis starting at x_n = 0".into(),
        ));
    }
    Ok(())
}

/// Doubles the normal axis: tangential components even, the normal one odd.
fn reflect(f: &VectorField) -> Result<VectorField> {
    let grid = f.grid();
    let n = grid.ndim();
    let last = n - 1;
    let m = grid.shape()[last];
    let h = grid.spacing()[last];
    let mut shape = grid.shape().to_vec();
    shape[last] = 2 * m;
    let mut origin = grid.origin().to_vec();
    origin[last] = -(m as f64) * h + 0.5 * h;
    let big = Grid::new(&shape, grid.spacing(), &origin, &vec![true; n])?;
    let comps = (0..n)
        .map(|c| {
            let sign = if c == last { -1.0 } else { 1.0 };
            (0..big.len())
                .map(|i| {
                    let mut idx = big.multi(i);
                    let j = idx[last];
                    if j >= m {
                        idx[last] = j - m;
                        f.component(c)[grid.flat(&idx)]
                    } else {
                        idx[last] = m - 1 - j;
                        sign * f.component(c)[grid.flat(&idx)]
                    }
                })
                .collect()
        })
        .collect();
    VectorField::new(big, comps)
}

fn restrict(u: &[f64], big: &Grid, grid: &Grid) -> Vec<f64> {
    let last = grid.ndim() - 1;
    let m = grid.shape()[last];
    (0..grid.len())
        .map(|i| {
            let mut idx = grid.multi(i);
            idx[last] += m;
            u[big.flat(&idx)]
        })
        .collect()
}

/// Projection on the slab `0 < x_n < L` by reflection across both walls.
pub fn project_half_space(f: &VectorField) -> Result<DecompositionResult> {
    let grid = f.grid();
    check_slab(grid)?;
    let n = grid.ndim();
    let last = n - 1;
    let big = reflect(f)?;
    let whole = project_whole_space(&big)?;
    let bg = big.grid();
    let f0 = VectorField::new(grid.clone(), (0..n).map(|c| restrict(whole.f0.component(c), bg, grid)).collect())?;
    let grad_p = f.sub(&f0);
    let p = ScalarField::new(grid.clone(), restrict(whole.p.values(), bg, grid))?;
    // first cell layer, a half cell above the face
    let layer: Vec<usize> = (0..grid.len()).filter(|&i| grid.multi(i)[last] == 0).collect();
    let rms = |v: &[f64], idx: &[usize]| (idx.iter().map(|&i| v[i] * v[i]).sum::<f64>() / idx.len() as f64).sqrt();
    let f_rms = (lp_norm(f, 2.0, None)?.powi(2) / (grid.len() as f64 * grid.cell_volume())).sqrt();
    let trace = rms(f0.component(last), &layer) / if f_rms > 0.0 { f_rms } else { 1.0 };
    let div_l2 = whole.diagnostics.div_residual * lp_norm(&big, 2.0, None)? / std::f64::consts::SQRT_2;
    let diagnostics = diagnostics(f, &f0, &grad_p, None, div_l2, Some(trace));
    Ok(DecompositionResult { method: Method::Reflect, f0, grad_p, p, diagnostics, solve: None })
}
