//! Gap profile of the |01>|00> / |00>|10> anticrossing and the CZ flux
//! pulse built on it, with the nonadiabatic error estimate for a few
//! shape coefficients.
//!
//! cargo run --release --example design_pulse -- [cutoff] [T_g in ns]

use std::f64::consts::PI;

use dtc_core::circuit::CircuitParams;
use dtc_core::pulse::{
    compute_gap_profile, design_pulse, estimate_nonadiabatic_error, modified_gap, ProfileGrid,
    PulseLength, DEFAULT_GAP_SCALE, DEFAULT_SHAPE_A,
};
use dtc_core::spectrum::{SolverSettings, SpectrumSolver};
use dtc_core::units::{ns, to_mhz, to_ns};

fn main() -> dtc_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let cutoff = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let gate_ns: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(24.0);

    let settings = SolverSettings {
        cutoff,
        levels: 10,
        ..SolverSettings::default()
    };
    let solver = SpectrumSolver::for_circuit(&CircuitParams::reference_design(), &settings)?;
    let grid = ProfileGrid {
        solve_step: 0.02 * PI,
        ..ProfileGrid::default()
    };
    let profile = compute_gap_profile(&solver, &grid)?;
    println!(
        "g/2π = {:.2} MHz, minimum gap at Θ_ex = {:.4}π",
        to_mhz(profile.g),
        profile.theta_ex_g / PI
    );

    let timing = modified_gap(&profile, DEFAULT_GAP_SCALE);
    let pulse = design_pulse(
        &timing,
        PulseLength::GateTime(ns(gate_ns)),
        DEFAULT_SHAPE_A,
        201,
    )?;
    println!(
        "T_g = {} ns, s_f = {:.3}",
        to_ns(pulse.gate_time),
        pulse.s_f
    );
    for s in pulse.samples.iter().step_by(20) {
        println!(
            "  t = {:6.2} ns  Θ_ex = {:.4}π  dΘ/dt = {:+.4} rad/ns",
            to_ns(s.t),
            s.theta_ex / PI,
            s.theta_dot_ex * 1e-9
        );
    }

    for a in [0.0, -0.1, DEFAULT_SHAPE_A, -0.25] {
        let p = design_pulse(&timing, PulseLength::Phase(pulse.s_f), a, 201)?;
        println!("A = {a:+.2}: P_e = {:.3e}", estimate_nonadiabatic_error(&p));
    }
    Ok(())
}
