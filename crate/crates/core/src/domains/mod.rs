//! Domain descriptions, distance geometry and boundary audits.

pub mod audits;
pub mod chart;
pub mod config;
pub mod graph;
pub mod localize;
pub mod reach;
pub mod smallness;
pub mod spec;

pub use audits::{check_star_like, lipschitz_cap, ray_audit, sample_lipschitz_constant, star_like_cap, LipschitzAudit, StarAudit};
pub use chart::{check_chart_estimates, normal_map, ChartAudit, Direction};
pub use config::{Constants, DomainConfig, DomainFile};
pub use graph::{Bump, Graph, GraphBounds};
pub use localize::{localize_chart, Localized};
pub use reach::{estimate_reach, project_to_boundary, signed_distance, ReachReport, SignedDistanceField};
pub use smallness::{check_smallness, SmallnessAudit};
pub use spec::{Chart, DomainKind, DomainSpec, Located, TypeParams};
