//! Labeled low-lying levels of the four-transmon circuit versus flux.
//!
//! cargo run --release --example energy_levels -- [cutoff]

use std::f64::consts::PI;

use dtc_core::circuit::CircuitParams;
use dtc_core::spectrum::{format_label, SolverSettings, SpectrumSolver};
use dtc_core::stc::linspace;
use dtc_core::units::to_ghz;

fn main() -> dtc_core::Result<()> {
    let cutoff = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    let settings = SolverSettings {
        cutoff,
        levels: 10,
        ..SolverSettings::default()
    };
    let solver = SpectrumSolver::for_circuit(&CircuitParams::reference_design(), &settings)?;
    let thetas = linspace(0.61 * PI, PI, 8);
    let spectra = solver.sweep(&thetas, thetas[0], |_, _| Ok(()))?;

    for s in &spectra {
        println!(
            "Θ_ex = {:.3}π  (max residual {:.1e} rad/s)",
            s.theta_ex / PI,
            s.max_residual
        );
        for l in s.levels.iter().skip(1) {
            println!(
                "  {}  {:8.4} GHz  overlap² {:.3}",
                format_label(&l.label),
                to_ghz(l.energy),
                l.overlap
            );
        }
    }
    Ok(())
}
