//! Flux-noise dephasing times of both qubits at the idle point and their
//! minimum over the gate excursion.
//!
//! cargo run --release --example flux_noise_t2 -- [cutoff]

use std::f64::consts::PI;

use dtc_core::circuit::CircuitParams;
use dtc_core::spectrum::{estimate_t2, minimum_t2, SolverSettings, SpectrumSolver};
use dtc_core::stc::linspace;

const A_PHI: f64 = 1e-5;

fn main() -> dtc_core::Result<()> {
    let cutoff = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let solver = SpectrumSolver::for_circuit(
        &CircuitParams::reference_design(),
        &SolverSettings {
            cutoff,
            levels: 8,
            ..SolverSettings::default()
        },
    )?;

    let idle = 0.61 * PI;
    let e = estimate_t2(&solver, &solver.seeded(idle)?, idle, A_PHI)?;
    println!(
        "idle point: T2 = {:.1} μs (Q1), {:.1} μs (Q2)",
        e.t2[0] * 1e6,
        e.t2[1] * 1e6
    );

    let mins = minimum_t2(&solver, &linspace(idle, PI, 40), A_PHI)?;
    for (q, m) in mins.iter().enumerate() {
        println!(
            "Q{} minimum: T2 = {:.2} μs at Θ_ex = {:.3}π",
            q + 1,
            m.t2[q] * 1e6,
            m.theta_ex / PI
        );
    }
    Ok(())
}
