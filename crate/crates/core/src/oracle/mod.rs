//! Brute-force references for the analytic core: dense master-equation
//! integration, exact lossless evolution and the pure-death process.

pub mod decay;
pub mod integrate;
pub mod lindblad;
pub mod moments;
pub mod unitary;

pub use decay::decay_generating_oracle;
pub use lindblad::{lindblad_evolve, DenseState, LindbladSystem};
pub use unitary::unitary_evolve;
