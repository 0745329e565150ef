//! Numerical model of a double-transmon coupler between two fixed-frequency
//! transmon qubits.
//!
//! The crate covers the whole pipeline from circuit design values to gate
//! metrics:
//!
//! * [`circuit`] derives charging, Josephson and coupling parameters from
//!   capacitances and target transmon frequencies.
//! * [`charge`] builds the four-transmon Hamiltonian in the truncated charge
//!   basis as a sum of Kronecker-product terms and applies it matrix-free.
//! * [`eigensolver`] and [`spectrum`] compute labeled low-lying spectra, ZZ
//!   coupling maps and flux-noise dephasing estimates.
//! * [`pulse`] designs the adiabatic flux pulse for the controlled-phase gate.
//! * [`propagate`] and [`gate`] integrate the Schrödinger equation and reduce
//!   the result to a projected 4x4 gate, fidelity and leakage.
//! * [`stc`] is the single-transmon-coupler reference model.
//! * [`config`], [`output`] and [`runner`] back the `dtc` command line tool.
//!
//! Internally all frequencies are angular (rad/s), times are seconds and
//! capacitances are farads. Conversions live in [`units`].

pub mod charge;
pub mod circuit;
pub mod config;
pub mod eigensolver;
pub mod error;
pub mod gate;
pub mod interp;
pub mod linalg;
pub mod output;
pub mod product_basis;
pub mod propagate;
pub mod pulse;
pub mod runner;
pub mod spectrum;
pub mod stc;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
