//! Flat norms of group-valued 0-chains and singular sets of sphere-valued maps.

pub mod chain;
pub mod cli;
pub mod error;
pub mod field;
pub mod flat;
pub mod grid;
pub mod group;
pub mod stats;
pub mod synth;

pub use chain::{Atom, BoxDomain, Chain, DipolarDecomposition, Dipole, Monopole};
pub use error::{Error, Result};
pub use flat::{flat_norm, Mode, NormResult};
pub use group::{Coeff, GroupSpec, NormedGroup};
