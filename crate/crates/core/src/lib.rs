//! Quantal response equilibria and population-consistent rationalization
//! bounds for static games between heterogeneous populations.

pub mod error;
pub mod fixtures;
pub mod game;
pub mod gamefile;
pub mod model;
pub mod numfmt;
pub mod perturbation;
pub mod population;
pub mod qre;
pub mod rationalization;
pub mod structure;

pub use error::{Error, Result};
pub use game::{MixedProfile, PayoffGap, StaticGame};
pub use model::PopulationGame;
pub use perturbation::{Integration, TypeDistribution};
