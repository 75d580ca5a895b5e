//! Zoned dam cross-sections, scenario transforms and boundary assignment.

pub mod benchmark;
pub mod boundary;
pub mod graph;
pub mod polygon;
pub mod sahand;
pub mod scenario;
pub mod section;

pub use boundary::{boundary_conditions_for, Levels};
pub use graph::SectionGraph;
pub use polygon::{Point, Polygon};
pub use sahand::{build_sahand_section, SahandParams};
pub use scenario::apply_scenario;
pub use section::{BoundaryCondition, BoundarySegment, DamSection, Intervention, Scenario, Zone};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("zones overlap: {0}")]
    Overlap(String),
    #[error("boundary error: {0}")]
    Boundary(String),
    #[error("zone '{zone}' references unknown material '{material}'")]
    UnknownMaterial { zone: String, material: String },
    #[error("intervention outside the domain: {0}")]
    OutsideDomain(String),
    #[error("conflicting interventions: {0}")]
    Conflict(String),
}
