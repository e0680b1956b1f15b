pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod evolution;
pub mod gram;
pub mod io;
pub mod profiles;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
pub use evolution::{ModelSpec, StepperConfig, Trajectory};
pub use spectral::{Field, GridSpec};
