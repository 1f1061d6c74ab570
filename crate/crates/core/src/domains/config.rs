//! Domain configuration files and tunable constants.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domains::spec::{DomainKind, DomainSpec};
use crate::{Error, Point, Result};

/// Constants that are only known to exist; all configurable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    /// `C*(n)` in the smallness condition.
    pub c_star: f64,
    /// Coefficient `c` in `c0(n, K) = c / (n (K + 1))`.
    pub c0: f64,
    /// `c^Ω_{1/2}`; `None` calibrates it by bisection.
    pub c_half: Option<f64>,
    /// Ball-radius cap `M0` for BMO seminorms.
    pub m0: f64,
    /// `C(n) / n` in `lambda(K, rho)`.
    pub lambda_cn: f64,
    /// `C(n) / n` in the taper derivative bounds.
    pub grad_cn: f64,
    /// Cap on the Whitney bound `K*` used for the extension count audit.
    pub kstar_cap: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c_star: 1.0, c0: 0.25, c_half: None, m0: 0.25, lambda_cn: 4.0, grad_cn: 4.0, kstar_cap: 64.0 }
    }
}

/// `[domain]` table of a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub ndim: usize,
    #[serde(flatten)]
    pub kind: DomainKind,
    #[serde(default)]
    pub bbox: Option<(Point, Point)>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<DomainSpec> {
        let n = self.ndim;
        let bbox = self.bbox.unwrap_or_else(|| {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            lo[..n].fill(-1.0);
            hi[..n].fill(1.0);
            (lo, hi)
        });
        match &self.kind {
            DomainKind::Torus => DomainSpec::torus(n),
            DomainKind::HalfSpace => DomainSpec::half_space(n, bbox),
            DomainKind::PerturbedHalfSpace { graph, r_h } => DomainSpec::perturbed_half_space(n, graph.clone(), *r_h, bbox),
            DomainKind::Ball { center, radius } => {
                let mut c = [0.0; 3];
                for (a, v) in center.iter().take(3).enumerate() {
                    c[a] = *v;
                }
                DomainSpec::ball(n, c, *radius)
            }
            DomainKind::GraphDomain { graph, alpha, beta, .. } => DomainSpec::graph_domain(n, graph.clone(), *alpha, *beta, bbox),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    pub domain: DomainConfig,
    #[serde(default)]
    pub constants: Constants,
}

impl DomainFile {
    pub fn parse(text: &str) -> Result<DomainFile> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
    pub fn load(path: &Path) -> Result<DomainFile> {
        DomainFile::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ball_and_bump() {
        let f = DomainFile::parse(
            "[domain]\nndim = 3\nvariant = \"ball\"\ncenter = [0.0, 0.0, 0.0]\nradius = 0.4\n[constants]\nc_star = 2.0\n",
        )
        .unwrap();
        assert_eq!(f.constants.c_star, 2.0);
        assert!(f.domain.build().unwrap().is_bounded());
        let g = DomainFile::parse(
            "[domain]\nndim = 2\nvariant = \"perturbed_half_space\"\nr_h = 0.5\n\
             [domain.graph]\ntype = \"bumps\"\nbumps = [{ amp = 0.1, center = [0.0], width = 0.5 }]\n",
        )
        .unwrap();
        assert!(g.domain.build().unwrap().has_boundary());
        assert!(DomainFile::parse("[domain]\nndim = 2\nvariant = \"moebius\"\n").is_err());
    }
}
