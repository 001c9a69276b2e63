//! Numerical routines for spectral methods, quantum dynamics, and classical
//! flows: matrix exponentials and ODE integrators, fixed-point stability,
//! Hamiltonian mechanics, Fourier analysis on the torus, heat/wave/Schrödinger
//! and Maxwell evolution, tight-binding band structure, spectral bounds and
//! bound-state estimates, Green's functions, and variational calculus.

pub mod fourier;
pub mod greens;
pub mod hamiltonian;
pub mod lattice;
pub mod linear_flow;
mod numdiff;
mod quad;
pub mod quantum_spectra;
pub mod report;
pub mod spectral_pde;
pub mod stability;
pub mod variational;

pub use report::BoundReport;
