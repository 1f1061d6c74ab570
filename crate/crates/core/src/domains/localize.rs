//! Localisation of a boundary chart into a perturbed half space.

use serde::{Deserialize, Serialize};

use crate::cutoffs::{profile_ck_norm, BumpKind};
use crate::domains::config::Constants;
use crate::domains::graph::Graph;
use crate::domains::smallness::support_bounds;
use crate::domains::spec::{Chart, DomainSpec};
use crate::error::precondition;
use crate::{Point, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localized {
    /// Perturbed half space in the chart frame at `z0`, graph `theta(|x'|/rho) h_{z0}`.
    pub domain: DomainSpec,
    pub chart: Chart,
    pub rho: f64,
    pub lambda: f64,
    /// `1 / (2 n lambda)`.
    pub reach_lower: f64,
    pub sup_grad: f64,
    /// `C(n) (1 + |theta|_{C^1}) rho K`.
    pub grad_bound: f64,
    pub sup_hess: f64,
    /// `C(n) (1 + |theta|_{C^2}) K`.
    pub hess_bound: f64,
}

/// `c0(n, K)` from its configured coefficient.
pub fn c0(c: &Constants, n: usize, k: f64) -> f64 {
    c.c0 / (n as f64 * (k + 1.0))
}

/// Tapers the chart at `z0` with the `theta` profile at scale `rho`.
pub fn localize_chart(spec: &DomainSpec, z0: &Point, rho: f64, c: &Constants) -> Result<Localized> {
    let tp = spec.type_params().ok_or_else(|| precondition("boundary", "domain has no boundary"))?;
    let n = spec.ndim();
    let bounds = [("beta/4", tp.beta / 4.0), ("R_*/2", spec.reach() / 2.0), ("c0(n,K)", c0(c, n, tp.k))];
    for (name, v) in bounds {
        if !(rho > 0.0 && rho < v) {
            return Err(precondition(&format!("rho < {name}"), format!("rho = {rho}, bound = {v}")));
        }
    }
    let chart = spec.chart_at(z0)?;
    let graph = if chart.graph.is_flat() {
        Graph::Flat
    } else {
        Graph::Tapered { inner: Box::new(chart.graph.clone()), rho }
    };
    let th = |k| profile_ck_norm(BumpKind::Theta, k, 2.0, 4000);
    let nf = n as f64;
    let lambda = c.lambda_cn * nf * (th(3) + 1.0) * tp.k / rho;
    let reach_lower = if lambda > 0.0 { 1.0 / (2.0 * nf * lambda) } else { f64::INFINITY };
    let b = support_bounds(&graph, n - 1, 2.0 * rho);
    let cn = c.grad_cn * nf;
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    lo[..n].fill(-4.0 * rho);
    hi[..n].fill(4.0 * rho);
    let domain = DomainSpec::perturbed_half_space(n, graph, 2.0 * rho, (lo, hi))?;
    Ok(Localized {
        domain,
        chart,
        rho,
        lambda,
        reach_lower,
        sup_grad: b.sup_grad,
        grad_bound: cn * (1.0 + th(1)) * rho * tp.k,
        sup_hess: b.sup_hess,
        hess_bound: cn * (1.0 + th(2)) * tp.k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::graph::Bump;
    use crate::linalg;

    #[test]
    fn flat_chart_gives_half_space() {
        let s = DomainSpec::half_space(3, ([-1.0; 3], [1.0; 3])).unwrap();
        let l = localize_chart(&s, &[0.1, 0.2, 0.0], 0.05, &Constants::default()).unwrap();
        assert_eq!(l.domain.boundary_graph(), Some(&Graph::Flat));
    }

    #[test]
    fn taper_support_and_bounds() {
        let g = Graph::Bumps { bumps: vec![Bump { amp: 0.05, center: vec![0.1, 0.0], width: 0.6 }] };
        let s = DomainSpec::perturbed_half_space(3, g, 1.0, ([-1.0; 3], [1.0; 3])).unwrap();
        let z0 = s.boundary_samples_near(&[0.2, 0.1, 0.0], 0.1, 9)[0];
        let rho = 0.9 * c0(&Constants::default(), 3, s.type_params().unwrap().k).min(0.02);
        let l = localize_chart(&s, &z0, rho, &Constants::default()).unwrap();
        let h = l.domain.boundary_graph().unwrap();
        for p in crate::domains::spec::sphere_points(2, 24) {
            let inner = linalg::scale(0.9 * rho, &p);
            assert_eq!(h.value(2, &inner), l.chart.graph.value(2, &inner));
            assert_eq!(h.value(2, &linalg::scale(2.01 * rho, &p)), 0.0);
        }
        assert!(l.sup_grad <= l.grad_bound && l.sup_hess <= l.hess_bound, "{l:?}");
        assert!(l.reach_lower > 0.0);
    }
}
