//! VBMO1 binary field files.
//!
//! Layout: magic `VBMO1`, u8 ndim, u8 ncomp, per-axis u64 shape, f64 spacing,
//! f64 origin, u8 periodic flag, then little-endian f64 samples in row-major node
//! order with the components of each node stored consecutively.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::fields::{Grid, Sampled, ScalarField, VectorField};
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"VBMO1";

#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl FieldData {
    pub fn grid(&self) -> &Grid {
        match self {
            FieldData::Scalar(s) => s.grid(),
            FieldData::Vector(v) => v.grid(),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            FieldData::Scalar(s) => Ok(s),
            FieldData::Vector(_) => Err(Error::Format("expected a scalar field".into())),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            FieldData::Vector(v) => Ok(v),
            FieldData::Scalar(_) => Err(Error::Format("expected a vector field".into())),
        }
    }
}

pub fn write<W: Write, S: Sampled + ?Sized>(w: &mut W, field: &S) -> Result<()> {
    let g = field.grid();
    let n = g.ndim();
    w.write_all(MAGIC)?;
    w.write_all(&[n as u8, field.ncomp() as u8])?;
    for a in 0..n {
        w.write_all(&(g.shape()[a] as u64).to_le_bytes())?;
    }
    for a in 0..n {
        w.write_all(&g.spacing()[a].to_le_bytes())?;
    }
    for a in 0..n {
        w.write_all(&g.origin()[a].to_le_bytes())?;
    }
    for a in 0..n {
        w.write_all(&[g.periodic()[a] as u8])?;
    }
    for i in 0..g.len() {
        for c in 0..field.ncomp() {
            w.write_all(&field.comp(c)[i].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated VBMO1 stream: {e}")))?;
    Ok(buf)
}

pub fn read<R: Read>(r: &mut R) -> Result<FieldData> {
    let magic: [u8; 5] = read_exact(r)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let [n, ncomp]: [u8; 2] = read_exact(r)?;
    let n = n as usize;
    let ncomp = ncomp as usize;
    if !(2..=3).contains(&n) {
        return Err(Error::Format(format!("ndim {n}")));
    }
    if ncomp != 1 && ncomp != n {
        return Err(Error::Format(format!("{ncomp} components on a {n}-d grid")));
    }
    let mut shape = vec![0usize; n];
    for s in shape.iter_mut() {
        *s = u64::from_le_bytes(read_exact(r)?) as usize;
    }
    let mut spacing = vec![0.0; n];
    for s in spacing.iter_mut() {
        *s = f64::from_le_bytes(read_exact(r)?);
    }
    let mut origin = vec![0.0; n];
    for s in origin.iter_mut() {
        *s = f64::from_le_bytes(read_exact(r)?);
    }
    let mut periodic = vec![false; n];
    for p in periodic.iter_mut() {
        let [b]: [u8; 1] = read_exact(r)?;
        *p = b != 0;
    }
    let grid = Grid::new(&shape, &spacing, &origin, &periodic).map_err(|e| Error::Format(e.to_string()))?;
    let mut comps = vec![vec![0.0; grid.len()]; ncomp];
    for i in 0..grid.len() {
        for comp in comps.iter_mut() {
            comp[i] = f64::from_le_bytes(read_exact(r)?);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    if ncomp == 1 {
        Ok(FieldData::Scalar(ScalarField::new(grid, comps.pop().unwrap())?))
    } else {
        Ok(FieldData::Vector(VectorField::new(grid, comps)?))
    }
}

pub fn save<S: Sampled + ?Sized>(path: impl AsRef<Path>, field: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<FieldData> {
    read(&mut BufReader::new(File::open(path)?))
}
