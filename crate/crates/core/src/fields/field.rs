use crate::fields::Grid;
use crate::{Error, Point, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

/// Anything with a pointwise magnitude on a grid.
pub trait Sampled {
    fn grid(&self) -> &Grid;
    fn ncomp(&self) -> usize;
    fn comp(&self, c: usize) -> &[f64];
    fn magnitude(&self, i: usize) -> f64 {
        if self.ncomp() == 1 {
            self.comp(0)[i].abs()
        } else {
            (0..self.ncomp()).map(|c| self.comp(c)[i].powi(2)).sum::<f64>().sqrt()
        }
    }
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("field contains non-finite values".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Grid) -> ScalarField {
        ScalarField { values: vec![0.0; grid.len()], grid: grid.clone() }
    }

    pub fn constant(grid: &Grid, c: f64) -> ScalarField {
        ScalarField { values: vec![c; grid.len()], grid: grid.clone() }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Point) -> f64) -> ScalarField {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        ScalarField { values, grid: grid.clone() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    /// Same samples on a different grid of identical shape.
    pub fn regrid(&self, grid: &Grid) -> Result<ScalarField> {
        ScalarField::new(grid.clone(), self.values.clone())
    }
}

impl VectorField {
    pub fn new(grid: Grid, comps: Vec<Vec<f64>>) -> Result<VectorField> {
        if comps.len() != grid.ndim() {
            return Err(Error::Config(format!("{} components on a {}-d grid", comps.len(), grid.ndim())));
        }
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::Config("component length disagrees with grid".into()));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("field contains non-finite values".into()));
            }
        }
        Ok(VectorField { grid, comps })
    }

    pub fn zeros(grid: &Grid) -> VectorField {
        VectorField { comps: vec![vec![0.0; grid.len()]; grid.ndim()], grid: grid.clone() }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Point) -> Point) -> VectorField {
        let n = grid.ndim();
        let mut comps = vec![vec![0.0; grid.len()]; n];
        for i in 0..grid.len() {
            let v = f(&grid.point(i));
            for c in 0..n {
                comps[c][i] = v[c];
            }
        }
        VectorField { comps, grid: grid.clone() }
    }

    pub fn from_components(fields: Vec<ScalarField>) -> Result<VectorField> {
        let grid = fields.first().ok_or_else(|| Error::Empty("no components".into()))?.grid().clone();
        if fields.iter().any(|f| f.grid() != &grid) {
            return Err(Error::Config("components live on different grids".into()));
        }
        VectorField::new(grid, fields.into_iter().map(|f| f.into_values()).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn ndim(&self) -> usize {
        self.grid.ndim()
    }
    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }
    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }
    pub fn component_field(&self, c: usize) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.comps[c].clone() }
    }

    pub fn at(&self, i: usize) -> Point {
        let mut p = [0.0; 3];
        for c in 0..self.ndim() {
            p[c] = self.comps[c][i];
        }
        p
    }

    pub fn map_nodes(&self, f: impl Fn(usize, Point) -> Point) -> VectorField {
        let n = self.ndim();
        let mut comps = vec![vec![0.0; self.grid.len()]; n];
        for i in 0..self.grid.len() {
            let v = f(i, self.at(i));
            for c in 0..n {
                comps[c][i] = v[c];
            }
        }
        VectorField { comps, grid: self.grid.clone() }
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        VectorField {
            grid: self.grid.clone(),
            comps: self.comps.iter().map(|c| c.iter().map(|v| s * v).collect()).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &VectorField, f: impl Fn(f64, f64) -> f64) -> VectorField {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        VectorField { grid: self.grid.clone(), comps }
    }

    /// Pointwise dot product with another field.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| (0..self.ndim()).map(|c| self.comps[c][i] * other.comps[c][i]).sum())
            .collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    /// Pointwise scalar multiple `s(x) f(x)`.
    pub fn times(&self, s: &ScalarField) -> VectorField {
        let comps = self.comps.iter().map(|c| c.iter().zip(s.values()).map(|(a, b)| a * b).collect()).collect();
        VectorField { grid: self.grid.clone(), comps }
    }

    /// Zero the field outside the given node mask.
    pub fn masked(&self, mask: &[bool]) -> VectorField {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect())
            .collect();
        VectorField { grid: self.grid.clone(), comps }
    }
}

impl Sampled for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn ncomp(&self) -> usize {
        1
    }
    fn comp(&self, _c: usize) -> &[f64] {
        &self.values
    }
}

impl Sampled for VectorField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn ncomp(&self) -> usize {
        self.comps.len()
    }
    fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }
}
