//! Upper-tail large deviations for subgraph counts in random graphs.
//!
//! The crate covers homomorphism densities, the variational rate problems
//! and their closed-form constants, explicit block constructions, a
//! projected-gradient solver and Monte Carlo estimators for the tail
//! probabilities themselves.

pub mod constructions;
pub mod ensembles;
pub mod error;
pub mod graph;
pub mod hom;
pub mod matrix;
pub mod rate;
pub mod solver;

pub use error::{Error, Result};
pub use graph::{parse_graph, Graph};
pub use hom::{
    cycle_hom_spectral, hom_count, hom_density_t, hom_gradient, hom_normalized, Engine,
};
pub use matrix::SymMatrix;
