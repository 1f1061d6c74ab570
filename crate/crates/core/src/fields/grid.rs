use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// Uniform rectangular grid. Node `i` along axis `a` sits at `origin[a] + i * spacing[a]`;
/// a periodic axis has period `shape[a] * spacing[a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    periodic: Vec<bool>,
}

impl Grid {
    pub fn new(shape: &[usize], spacing: &[f64], origin: &[f64], periodic: &[bool]) -> Result<Grid> {
        let n = shape.len();
        if !(2..=3).contains(&n) {
            return Err(Error::Config(format!("grid dimension {n} not in {{2,3}}")));
        }
        if spacing.len() != n || origin.len() != n || periodic.len() != n {
            return Err(Error::Config("grid arrays disagree in length".into()));
        }
        if shape.iter().any(|&s| s < 4) {
            return Err(Error::Config(format!("grid shape {shape:?} has an axis below 4 samples")));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::Config(format!("grid spacing {spacing:?} must be positive")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(Grid {
            shape: shape.to_vec(),
            spacing: spacing.to_vec(),
            origin: origin.to_vec(),
            periodic: periodic.to_vec(),
        })
    }

    /// Unit torus `[0,1)^ndim` with `n` nodes per axis.
    pub fn unit_torus(ndim: usize, n: usize) -> Result<Grid> {
        Grid::new(&vec![n; ndim], &vec![1.0 / n as f64; ndim], &vec![0.0; ndim], &vec![true; ndim])
    }

    /// Cell-centred non-periodic grid covering `[lo, lo + n h]` on every axis.
    pub fn cell_centered_box(ndim: usize, n: usize, lo: f64, side: f64) -> Result<Grid> {
        let h = side / n as f64;
        Grid::new(&vec![n; ndim], &vec![h; ndim], &vec![lo + 0.5 * h; ndim], &vec![false; ndim])
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn fully_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }
    /// Period of axis `a` (also used as the nominal box length of non-periodic axes).
    pub fn period(&self, a: usize) -> f64 {
        self.shape[a] as f64 * self.spacing[a]
    }

    pub fn strides(&self) -> [usize; 3] {
        let n = self.ndim();
        let mut s = [0usize; 3];
        let mut acc = 1;
        for a in (0..n).rev() {
            s[a] = acc;
            acc *= self.shape[a];
        }
        s
    }

    pub fn flat(&self, idx: &[usize; 3]) -> usize {
        let s = self.strides();
        (0..self.ndim()).map(|a| idx[a] * s[a]).sum()
    }

    pub fn multi(&self, flat: usize) -> [usize; 3] {
        let s = self.strides();
        let mut out = [0usize; 3];
        let mut rem = flat;
        for a in 0..self.ndim() {
            out[a] = rem / s[a];
            rem %= s[a];
        }
        out
    }

    pub fn coord(&self, a: usize, i: usize) -> f64 {
        self.origin[a] + i as f64 * self.spacing[a]
    }

    pub fn point_of(&self, idx: &[usize; 3]) -> Point {
        let mut p = [0.0; 3];
        for a in 0..self.ndim() {
            p[a] = self.coord(a, idx[a]);
        }
        p
    }

    pub fn point(&self, flat: usize) -> Point {
        self.point_of(&self.multi(flat))
    }

    /// Lower and upper node coordinates per axis.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..self.ndim() {
            lo[a] = self.origin[a];
            hi[a] = self.coord(a, self.shape[a] - 1);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        (0..self.ndim()).map(|a| self.period(a).powi(2)).sum::<f64>().sqrt()
    }

    /// Nearest node to a point (clamped on non-periodic axes, wrapped on periodic ones).
    pub fn nearest_node(&self, p: &Point) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in 0..self.ndim() {
            let t = ((p[a] - self.origin[a]) / self.spacing[a]).round() as i64;
            let n = self.shape[a] as i64;
            idx[a] = if self.periodic[a] { t.rem_euclid(n) as usize } else { t.clamp(0, n - 1) as usize };
        }
        idx
    }

    /// Same grid with the node count doubled on every axis over the same box.
    pub fn refined(&self) -> Grid {
        let n = self.ndim();
        let mut shape = vec![0; n];
        let mut spacing = vec![0.0; n];
        let mut origin = vec![0.0; n];
        for a in 0..n {
            shape[a] = self.shape[a] * 2;
            spacing[a] = self.spacing[a] / 2.0;
            let lo_face = self.origin[a] - 0.5 * self.spacing[a];
            origin[a] = if self.periodic[a] { self.origin[a] } else { lo_face + 0.5 * spacing[a] };
        }
        Grid { shape, spacing, origin, periodic: self.periodic.clone() }
    }
}
