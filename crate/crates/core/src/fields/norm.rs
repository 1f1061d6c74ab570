use crate::fields::Sampled;
use crate::{Error, Result};

/// Cell-volume Riemann sum of |u|^p over the mask support; `f64::INFINITY` gives the max.
pub fn lp_norm<S: Sampled + ?Sized>(u: &S, p: f64, mask: Option<&[bool]>) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Config(format!("exponent {p} outside [1, inf]")));
    }
    let len = u.grid().len();
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    if p.is_infinite() {
        return Ok((0..len).filter(|&i| keep(i)).map(|i| u.magnitude(i)).fold(0.0, f64::max));
    }
    let mut s = 0.0;
    for i in (0..len).filter(|&i| keep(i)) {
        let m = u.magnitude(i);
        s += if p == 1.0 {
            m
        } else if p == 2.0 {
            m * m
        } else {
            m.powf(p)
        };
    }
    let s = s * u.grid().cell_volume();
    Ok(if p == 1.0 {
        s
    } else if p == 2.0 {
        s.sqrt()
    } else {
        s.powf(1.0 / p)
    })
}

/// Discrete L2 inner product (component-wise dot, cell-volume weights).
pub fn inner<S: Sampled + ?Sized>(a: &S, b: &S, mask: Option<&[bool]>) -> f64 {
    let len = a.grid().len();
    let mut s = 0.0;
    for i in (0..len).filter(|&i| mask.is_none_or(|m| m[i])) {
        for c in 0..a.ncomp() {
            s += a.comp(c)[i] * b.comp(c)[i];
        }
    }
    s * a.grid().cell_volume()
}
