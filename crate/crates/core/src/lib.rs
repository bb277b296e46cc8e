pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod models;
pub mod propagator;
pub mod runner;
pub mod scenario;
pub mod spectral;
