//! Physical constants and unit conversions.

use std::f64::consts::PI;

/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602176634e-19;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054571817e-34;
/// Reduced flux quantum ħ/2e (Wb).
pub const PHI0_REDUCED: f64 = HBAR / (2.0 * E_CHARGE);

pub const FEMTO: f64 = 1e-15;

pub fn ghz(f: f64) -> f64 {
    2.0 * PI * f * 1e9
}

pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

pub fn khz(f: f64) -> f64 {
    2.0 * PI * f * 1e3
}

pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

pub fn ns(t: f64) -> f64 {
    t * 1e-9
}

pub fn to_ns(t: f64) -> f64 {
    t * 1e9
}

/// Flux phase given in units of π.
pub fn pi_units(x: f64) -> f64 {
    x * PI
}

pub fn to_pi_units(theta: f64) -> f64 {
    theta / PI
}
