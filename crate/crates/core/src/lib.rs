//! Branching Markov chains on finite state spaces: samplers for plain,
//! biased and spine-decorated trees, exact potential theory of the intensity
//! operator, and branching interlacements.

pub mod bmc;
pub mod decorability;
pub mod error;
pub mod forest;
pub mod interlacement;
pub mod io;
pub mod linalg;
pub mod model;
pub mod potential;
pub mod replicas;
pub mod verify;

pub use error::{Error, Result};
pub use forest::{Colour, Forest, Individual, Label};
pub use model::{HTransform, Kernel, Measure, Model, OffspringLaw, StateSet};
