//! ZZ coupling along the coupler flux with label continuation, and the
//! refined zero crossings near the idle point.
//!
//! cargo run --release --example zz_sweep -- [cutoff]

use std::f64::consts::PI;

use dtc_core::circuit::CircuitParams;
use dtc_core::spectrum::{find_zz_zeros, sweep_zz, SolverSettings, SweepOptions, ZeroReport};
use dtc_core::stc::linspace;
use dtc_core::units::{ghz, to_mhz};

fn main() -> dtc_core::Result<()> {
    let cutoff = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let settings = SolverSettings {
        cutoff,
        levels: 8,
        ..SolverSettings::default()
    };
    let circuit = CircuitParams::reference_design();
    let thetas = linspace(0.5 * PI, PI, 26);
    let sweep = sweep_zz(
        &circuit,
        &settings,
        &thetas,
        &[ghz(8.5)],
        &SweepOptions::default(),
    )?;

    println!("Θ_ex/π    ζ_ZZ/2π (MHz)");
    for (t, z) in sweep.thetas.iter().zip(&sweep.zeta[0]) {
        println!("{:6.3}  {:12.6}", t / PI, to_mhz(*z));
    }

    let solver = dtc_core::spectrum::SpectrumSolver::for_circuit(&circuit, &settings)?;
    match find_zz_zeros(&solver, &sweep, 0)? {
        ZeroReport::Roots(r) => {
            for x in r {
                println!("zero at Θ_ex = {:.5}π", x / PI);
            }
        }
        ZeroReport::Degenerate => println!("ζ_ZZ vanishes identically"),
    }
    Ok(())
}
