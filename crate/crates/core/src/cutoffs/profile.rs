use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Values below this are flushed to zero inside zeta.
pub const FLUSH: f64 = 9.357_622_968_840_175e-14; // exp(-30)

/// Value and first three derivatives of a function of one variable.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet3 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet3 {
    pub const fn constant(v: f64) -> Jet3 {
        Jet3 { v, d1: 0.0, d2: 0.0, d3: 0.0 }
    }

    pub const fn variable(t: f64) -> Jet3 {
        Jet3 { v: t, d1: 1.0, d2: 0.0, d3: 0.0 }
    }

    /// `f` evaluated on this jet, given the jet of `f` at `self.v`.
    pub fn compose(self, f: Jet3) -> Jet3 {
        let (g1, g2, g3) = (self.d1, self.d2, self.d3);
        Jet3 {
            v: f.v,
            d1: f.d1 * g1,
            d2: f.d2 * g1 * g1 + f.d1 * g2,
            d3: f.d3 * g1 * g1 * g1 + 3.0 * f.d2 * g1 * g2 + f.d1 * g3,
        }
    }

    pub fn scale(self, s: f64) -> Jet3 {
        Jet3 { v: s * self.v, d1: s * self.d1, d2: s * self.d2, d3: s * self.d3 }
    }

    pub fn recip(self) -> Jet3 {
        let v = self.v;
        let f = Jet3 { v: 1.0 / v, d1: -1.0 / (v * v), d2: 2.0 / (v * v * v), d3: -6.0 / (v * v * v * v) };
        self.compose(f)
    }

    pub fn exp(self) -> Jet3 {
        let e = self.v.exp();
        self.compose(Jet3 { v: e, d1: e, d2: e, d3: e })
    }

    pub fn zeta(self) -> Jet3 {
        self.compose(zeta(self.v))
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        Jet3 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2, d3: self.d3 + o.d3 }
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        Jet3 { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2, d3: self.d3 - o.d3 }
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        Jet3 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
            d3: self.d3 * o.v + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.v * o.d3,
        }
    }
}

impl Div for Jet3 {
    type Output = Jet3;
    fn div(self, o: Jet3) -> Jet3 {
        self * o.recip()
    }
}

/// zeta(t) = exp(-1/t) for t > 0, else 0; with derivatives.
pub fn zeta(t: f64) -> Jet3 {
    if t <= 0.0 {
        return Jet3::default();
    }
    let z = (-1.0 / t).exp();
    if z < FLUSH {
        return Jet3::default();
    }
    let (u1, u2, u3) = (1.0 / (t * t), -2.0 / (t * t * t), 6.0 / (t * t * t * t));
    Jet3 { v: z, d1: z * u1, d2: z * (u2 + u1 * u1), d3: z * (u3 + 3.0 * u1 * u2 + u1 * u1 * u1) }
}

/// Smooth step `zeta(b(t)) / (zeta(a(t)) + zeta(b(t)))` where `a` and `b` are jets of t.
fn ratio(a: Jet3, b: Jet3) -> Jet3 {
    let zb = b.zeta();
    if zb.v == 0.0 {
        return Jet3::default();
    }
    let za = a.zeta();
    if za.v == 0.0 {
        return Jet3::constant(1.0);
    }
    zb / (za + zb)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BumpKind {
    Zeta,
    /// 1 on |t| <= 1, 0 on |t| >= 3/2.
    Phi,
    /// 1 on |t| <= 3, 0 on |t| >= 4.
    Psi,
    /// 1 on |t| <= 1, 0 on |t| >= 2.
    Theta,
}

/// Profile value and derivatives at `t`.
pub fn bump(kind: BumpKind, t: f64) -> Jet3 {
    let x = Jet3::variable(t);
    match kind {
        BumpKind::Zeta => zeta(t),
        BumpKind::Phi => {
            let t2 = x * x;
            ratio(t2 - Jet3::constant(1.0), Jet3::constant(2.25) - t2)
        }
        BumpKind::Psi => {
            let s = if t < 0.0 { -1.0 } else { 1.0 };
            let j = ratio(x.scale(s) - Jet3::constant(3.0), Jet3::constant(4.0) - x.scale(s));
            Jet3 { v: j.v, d1: s * j.d1, d2: j.d2, d3: s * j.d3 }
        }
        BumpKind::Theta => {
            let s = if t < 0.0 { -1.0 } else { 1.0 };
            let j = ratio(x.scale(s) - Jet3::constant(1.0), Jet3::constant(2.0) - x.scale(s));
            Jet3 { v: j.v, d1: s * j.d1, d2: j.d2, d3: s * j.d3 }
        }
    }
}

/// Sum over orders 0..=k of the sampled sup of |profile^(s)| on [0, t_max].
pub fn profile_ck_norm(kind: BumpKind, k: usize, t_max: f64, samples: usize) -> f64 {
    let mut sup = [0.0f64; 4];
    for i in 0..=samples {
        let j = bump(kind, t_max * i as f64 / samples as f64);
        for (s, v) in sup.iter_mut().zip([j.v, j.d1, j.d2, j.d3]) {
            *s = s.max(v.abs());
        }
    }
    sup[..=k.min(3)].iter().sum()
}

/// Radial extension `f(y) = profile(|y|/scale)` in `dim` dimensions: value, gradient, Hessian.
pub fn radial(kind: BumpKind, dim: usize, y: &[f64; 3], scale: f64) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let r = (0..dim).map(|i| y[i] * y[i]).sum::<f64>().sqrt();
    let j = bump(kind, r / scale);
    let (d1, d2) = (j.d1 / scale, j.d2 / (scale * scale));
    let mut g = [0.0; 3];
    let mut h = [[0.0; 3]; 3];
    if r > 0.0 {
        for a in 0..dim {
            g[a] = d1 * y[a] / r;
            for b in 0..dim {
                let uu = y[a] * y[b] / (r * r);
                let id = if a == b { 1.0 } else { 0.0 };
                h[a][b] = d2 * uu + d1 / r * (id - uu);
            }
        }
    } else {
        for (a, row) in h.iter_mut().enumerate().take(dim) {
            row[a] = d2;
        }
    }
    (j.v, g, h)
}
