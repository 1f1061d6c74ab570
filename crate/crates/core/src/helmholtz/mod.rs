//! Helmholtz projections, the Bogovskii solver, localisation identities and
//! the end-to-end stability check.

mod bogovskii;
mod classify;
mod localize;
mod neumann;
mod spectral;
mod theorem;

use serde::{Deserialize, Serialize};

use crate::domains::{DomainKind, DomainSpec};
use crate::fields::{ScalarField, VectorField};
use crate::{Error, Result};

pub use bogovskii::{bogovskii, BogovskiiResult, StarDomain};
pub use classify::{characterize_subspaces, Classification, SubspaceKind};
pub use localize::{epsilon_cap, localized_boundary_identity, localized_interior_identity, LocalizationReport};
pub use neumann::{project_domain, solve_neumann, MaskedGradient, NeumannSolveReport, SolverOptions};
pub use spectral::{project_half_space, project_whole_space};
pub use theorem::{verify_main_theorem, FieldNorms, SplitNorms, TheoremReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Riesz multipliers on a periodic grid.
    Spectral,
    /// Even/odd reflection across the face `x_n = 0`, then spectral.
    Reflect,
    /// Masked least-squares gradient projection.
    Neumann,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Discrete divergence of `f0` relative to `|f|_2` (spectral: per unit wavenumber).
    pub div_residual: f64,
    /// RMS normal component of `f0` next to the boundary, relative to the RMS of `|f|`.
    pub normal_trace: Option<f64>,
    /// `|<f0, grad p>| / |f|^2`.
    pub orthogonality: f64,
    /// `|f0 + grad p - f| / |f|`.
    pub reconstruction_error: f64,
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub method: Method,
    pub f0: VectorField,
    pub grad_p: VectorField,
    /// Potential, up to a constant.
    pub p: ScalarField,
    pub diagnostics: Diagnostics,
    pub solve: Option<NeumannSolveReport>,
}

/// Picks the projection for a domain class.
pub fn default_method(spec: &DomainSpec) -> Method {
    match spec.kind() {
        DomainKind::Torus => Method::Spectral,
        DomainKind::HalfSpace => Method::Reflect,
        _ => Method::Neumann,
    }
}

pub fn decompose(f: &VectorField, spec: &DomainSpec, method: Method, opts: &SolverOptions) -> Result<DecompositionResult> {
    match (method, spec.kind()) {
        (Method::Spectral, DomainKind::Torus) => project_whole_space(f),
        (Method::Reflect, DomainKind::HalfSpace) => project_half_space(f),
        (Method::Neumann, k) if !matches!(k, DomainKind::Torus) => project_domain(f, spec, opts),
        (m, _) => Err(Error::Config(format!("method {m:?} does not apply to this domain"))),
    }
}
