//! Mechanism-level survival modelling: hazard shapes, mixtures over
//! mechanisms, observable versus mechanism-average hazards, non-identifiability
//! constructions, links to classical models, and simulation.

pub mod aggregation;
pub mod classical_bridge;
pub mod cli;
pub mod distribution;
pub mod error;
pub mod hazard;
pub mod nonidentifiability;
pub mod quadrature;
pub mod simulate;

pub use aggregation::{
    aggregate_survival, mechanism_average_hazard, observable_hazard, observable_hazard_logderiv,
    selection_gap, Curve, CurveKind, TimeGrid,
};
pub use distribution::{
    discretize_positive_law, Atom, CovariateValue, MechanismDistribution, PositiveLaw,
    Provenance, QuadratureSpec,
};
pub use error::{HazardError, Result};
pub use hazard::{HazardShape, Mechanism};
