//! Numerical laboratory for the small-dispersion limit of Hamiltonian
//! perturbations of the scalar transport equation `u_t + a(u) u_x = 0`.
//!
//! The crate bundles
//! - pseudospectral solvers for generalized KdV, Kawahara, nonlinear-dispersion
//!   and KdV-II-type equations ([`spectral`], [`models`], [`time_stepping`]),
//! - the dispersionless solution by characteristics and its gradient
//!   catastrophe ([`hopf`]),
//! - the Painlevé-I2 special solution and the multiscale / quasitriviality
//!   approximations built on it ([`pi2`], [`asymptotics`]),
//! - numerical checks of the Hamiltonian structure ([`hamiltonian`]),
//! - fitting and monitoring tools ([`diagnostics`]) and the experiment
//!   catalog with its file formats ([`io`]).

pub mod asymptotics;
pub mod catalog;
pub mod diagnostics;
pub mod error;
pub mod hamiltonian;
pub mod hopf;
pub mod io;
pub mod jet;
pub mod models;
pub mod pi2;
pub mod spectral;
pub mod time_stepping;

pub use error::{Error, Result};
pub use jet::{Jet, SmoothFn};
pub use spectral::{PeriodicGrid, RealField, SpectralCoeffs};
