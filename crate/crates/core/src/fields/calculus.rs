use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fields::fft::{is_nyquist, wavenumber, NdFft};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Second-order central differences, one-sided second order at non-periodic ends.
    Central,
    /// Fourier differentiation with the Nyquist mode dropped.
    Spectral,
}

fn require_periodic(grid: &Grid, scheme: Scheme) -> Result<()> {
    if scheme == Scheme::Spectral && !grid.fully_periodic() {
        return Err(Error::Config("spectral scheme needs every axis periodic".into()));
    }
    Ok(())
}

fn central(grid: &Grid, v: &[f64], a: usize) -> Vec<f64> {
    let n = grid.shape()[a];
    let s = grid.strides()[a];
    let h = grid.spacing()[a];
    let per = grid.periodic()[a];
    let mut out = vec![0.0; v.len()];
    for (f, o) in out.iter_mut().enumerate() {
        let i = (f / s) % n;
        let base = f - i * s;
        let at = |k: usize| v[base + k * s];
        *o = if i > 0 && i + 1 < n {
            (at(i + 1) - at(i - 1)) / (2.0 * h)
        } else if per {
            let (m, p) = if i == 0 { (n - 1, 1) } else { (n - 2, 0) };
            (at(p) - at(m)) / (2.0 * h)
        } else if i == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        };
    }
    out
}

fn spectral(grid: &Grid, fft: &NdFft, v: &[f64], a: usize) -> Vec<f64> {
    let n = grid.shape()[a];
    let s = grid.strides()[a];
    let period = grid.period(a);
    let mut z: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft.forward_axis(&mut z, a);
    for (f, c) in z.iter_mut().enumerate() {
        let m = (f / s) % n;
        *c = if is_nyquist(m, n) { Complex64::new(0.0, 0.0) } else { *c * Complex64::new(0.0, wavenumber(m, n, period)) };
    }
    fft.inverse_axis(&mut z, a);
    z.iter().map(|c| c.re).collect()
}

fn partial_raw(grid: &Grid, fft: Option<&NdFft>, v: &[f64], a: usize, scheme: Scheme) -> Vec<f64> {
    match (scheme, fft) {
        (Scheme::Spectral, Some(f)) => spectral(grid, f, v, a),
        _ => central(grid, v, a),
    }
}

/// Derivative along axis `a`.
pub fn partial(u: &ScalarField, a: usize, scheme: Scheme) -> Result<ScalarField> {
    let grid = u.grid();
    require_periodic(grid, scheme)?;
    let fft = (scheme == Scheme::Spectral).then(|| NdFft::new(grid.shape()));
    ScalarField::new(grid.clone(), partial_raw(grid, fft.as_ref(), u.values(), a, scheme))
}

pub fn gradient(u: &ScalarField, scheme: Scheme) -> Result<VectorField> {
    let grid = u.grid();
    require_periodic(grid, scheme)?;
    let fft = (scheme == Scheme::Spectral).then(|| NdFft::new(grid.shape()));
    let comps = (0..grid.ndim()).map(|a| partial_raw(grid, fft.as_ref(), u.values(), a, scheme)).collect();
    VectorField::new(grid.clone(), comps)
}

pub fn divergence(f: &VectorField, scheme: Scheme) -> Result<ScalarField> {
    let grid = f.grid();
    require_periodic(grid, scheme)?;
    let fft = (scheme == Scheme::Spectral).then(|| NdFft::new(grid.shape()));
    let mut out = vec![0.0; grid.len()];
    for a in 0..grid.ndim() {
        for (o, d) in out.iter_mut().zip(partial_raw(grid, fft.as_ref(), f.component(a), a, scheme)) {
            *o += d;
        }
    }
    ScalarField::new(grid.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::inner;
    use std::f64::consts::PI;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn linear_is_exact_central() {
        let g = Grid::cell_centered_box(2, 16, 0.0, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, |p| 3.0 * p[0] + 2.0 * p[1]);
        let du = gradient(&u, Scheme::Central).unwrap();
        assert!(du.component(0).iter().all(|v| (v - 3.0).abs() < 1e-12));
        assert!(du.component(1).iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn spectral_sine_derivative() {
        let g = Grid::unit_torus(2, 64).unwrap();
        let u = ScalarField::from_fn(&g, |p| (2.0 * PI * p[0]).sin());
        let du = gradient(&u, Scheme::Spectral).unwrap();
        let exact = ScalarField::from_fn(&g, |p| 2.0 * PI * (2.0 * PI * p[0]).cos());
        assert!(max_err(du.component(0), exact.values()) < 1e-10);
        assert!(du.component(1).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn spectral_laplacian_of_product() {
        let g = Grid::unit_torus(2, 64).unwrap();
        let u = ScalarField::from_fn(&g, |p| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin());
        let lap = divergence(&gradient(&u, Scheme::Spectral).unwrap(), Scheme::Spectral).unwrap();
        let exact = u.scaled(-8.0 * PI * PI);
        assert!(max_err(lap.values(), exact.values()) < 1e-8);
    }

    #[test]
    fn curl_of_potential_is_divergence_free() {
        let g = Grid::unit_torus(2, 32).unwrap();
        let u = ScalarField::from_fn(&g, |p| (2.0 * PI * p[0]).cos() * (4.0 * PI * p[1]).sin());
        let du = gradient(&u, Scheme::Spectral).unwrap();
        let rot = VectorField::new(g.clone(), vec![du.component(1).iter().map(|v| -v).collect(), du.component(0).to_vec()]).unwrap();
        let d = divergence(&rot, Scheme::Spectral).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn spectral_refused_on_box() {
        let g = Grid::cell_centered_box(2, 16, 0.0, 1.0).unwrap();
        assert!(gradient(&ScalarField::zeros(&g), Scheme::Spectral).is_err());
    }

    #[test]
    fn central_adjointness() {
        let g = Grid::unit_torus(3, 8).unwrap();
        let u = ScalarField::from_fn(&g, |p| (p[0] * 7.0).sin() + p[1] * p[2]);
        let f = VectorField::from_fn(&g, |p| [p[1].cos(), p[0] * p[0], (p[2] * 3.0).sin()]);
        let a = inner(&gradient(&u, Scheme::Central).unwrap(), &f, None);
        let b = inner(&u, &divergence(&f, Scheme::Central).unwrap(), None);
        assert!((a + b).abs() < 1e-12 * (a.abs() + 1.0));
    }
}
