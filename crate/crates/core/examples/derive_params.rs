//! Derived charging, Josephson and coupling parameters of the reference
//! circuit, plus the classical decoupling flux of the coupler loop.
//!
//! cargo run --release --example derive_params

use std::f64::consts::PI;

use dtc_core::circuit::{classical_coupler_analysis, CircuitParams, DerivedParams};
use dtc_core::units::{to_ghz, to_mhz};

fn main() -> dtc_core::Result<()> {
    let d = DerivedParams::from_circuit(&CircuitParams::reference_design())?;

    println!("Kerr and cross-charging terms W_ij/2π (MHz)");
    for i in 0..4 {
        let row: Vec<String> = (0..4)
            .map(|j| format!("{:9.4}", to_mhz(d.w[(i, j)])))
            .collect();
        println!("  {}", row.join(" "));
    }
    println!("ω_C34/2π = {:.4} GHz", to_ghz(d.omega_c34));

    println!("\njunction  ω_J/2π (GHz)  I_c (nA)");
    for k in 0..5 {
        println!(
            "  {}        {:8.4}    {:6.2}",
            k + 1,
            to_ghz(d.omega_j[k]),
            d.critical_current[k] * 1e9
        );
    }

    println!("\nexchange couplings g_ij/2π (MHz)");
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        println!("  g{}{} = {:8.3}", i + 1, j + 1, to_mhz(d.g[(i, j)]));
    }

    let r = classical_coupler_analysis(d.omega_j[2], d.omega_j[3], d.omega_j[4], PI)?;
    println!(
        "\nclassical cross term vanishes at Θ_ex = {:.4}π",
        r.theta_ex_0 / PI
    );
    Ok(())
}
