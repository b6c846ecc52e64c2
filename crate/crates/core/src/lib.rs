//! Isolating neighborhoods and orbit tracking in the restricted three-body
//! problem.

pub mod error;
pub mod frames;
pub mod integrate;
pub mod io;
pub mod kepler;
pub mod models;
pub mod neighborhood;
pub mod search;
pub mod state;
pub mod toy;

pub use error::{Body, Error, Result};
pub use state::{Frame, PhaseState};

/// Library version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
