//! Smallness condition for perturbed half spaces.

use serde::{Deserialize, Serialize};

use crate::domains::graph::{graph_bounds, Graph, GraphBounds};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessAudit {
    pub r_h: f64,
    pub c_s: f64,
    pub c_1: f64,
    pub c_star1: f64,
    pub c_star2: f64,
    /// `R_h^{(2n-1)/(2n)}`, must stay below 1/2.
    pub lhs1: f64,
    /// `C_s^{3n/2+8} C_1 (C_{*,1} + C_{*,2} + R_h^{n/2})`.
    pub lhs2: f64,
    /// `1 / (2 C*(n))`.
    pub rhs2: f64,
    pub pass1: bool,
    pub pass2: bool,
    pub pass: bool,
}

/// Sampled sup norms of `h` on the support ball of radius `r_h`.
pub fn support_bounds(h: &Graph, m: usize, r_h: f64) -> GraphBounds {
    if r_h <= 0.0 || h.is_flat() {
        return GraphBounds::default();
    }
    let step = (h.feature_scale() / 24.0).min(r_h / 32.0).max(r_h / 400.0);
    graph_bounds(h, m, r_h, step)
}

pub fn check_smallness(h: &Graph, n: usize, r_h: f64, c_star_n: f64) -> SmallnessAudit {
    let b = support_bounds(h, n - 1, r_h);
    smallness_from_bounds(&b, n, r_h, c_star_n)
}

pub fn smallness_from_bounds(b: &GraphBounds, n: usize, r_h: f64, c_star_n: f64) -> SmallnessAudit {
    let nf = n as f64;
    let c1_norm = b.c1();
    let d2 = b.sup_hess;
    let c_s = 1.0 + c1_norm;
    let c_1 = 1.0 + r_h * d2;
    let c_star1 = c_1.powi(3) * (1.0 + r_h.powf(0.25)) * (r_h.sqrt() * d2 + r_h.powf(2.5) * d2.powi(3));
    let c_star2 = (r_h + r_h.powf(1.0 / (2.0 * nf))) * d2 + (r_h.powf(nf - 1.0) + 1.0) * c1_norm;
    let lhs1 = r_h.powf((2.0 * nf - 1.0) / (2.0 * nf));
    let lhs2 = c_s.powf(1.5 * nf + 8.0) * c_1 * (c_star1 + c_star2 + r_h.powf(0.5 * nf));
    let rhs2 = 1.0 / (2.0 * c_star_n);
    let (pass1, pass2) = (lhs1 < 0.5, lhs2 < rhs2);
    SmallnessAudit { r_h, c_s, c_1, c_star1, c_star2, lhs1, lhs2, rhs2, pass1, pass2, pass: pass1 && pass2 }
}
