//! Pseudo-spectral solver for the coupled Navier-Stokes / Q-tensor system
//! with the Ball-Majumdar singular bulk potential.

pub mod comparison;
pub mod diagnostics;
pub mod dynamics;
pub mod io;
pub mod potential;
pub mod quadrature;
pub mod spectral;
pub mod tensor;
pub mod verify;

pub use potential::{
    BallMajumdar, BulkPotential, IsotropicTable, Mollified, Multipliers, PotentialError,
    PotentialEval, YosidaEval,
};
pub use tensor::{physicality_margin, spectrum, trace_free, Spectrum, Sym0Matrix};
