//! ZZ map of a conventional single-transmon coupler: zeros only appear
//! when the qubits straddle each other within one anharmonicity.
//!
//! cargo run --release --example stc_map

use dtc_core::stc::{default_grids, stc_zz_sweep, StcParams};
use dtc_core::units::{to_ghz, to_mhz};

fn main() -> dtc_core::Result<()> {
    let p = StcParams::reference();
    let (w2, w3) = default_grids(&p, 40);
    let map = stc_zz_sweep(&p, &w2, &w3)?;

    print!("ω2\\ω3 GHz ");
    for j in (0..w3.len()).step_by(8) {
        print!("{:>9.2}", to_ghz(w3[j]));
    }
    println!();
    for i in (0..w2.len()).step_by(3) {
        let band = if map.in_straddling_band(i) { '*' } else { ' ' };
        print!("{:7.3} {band} ", to_ghz(w2[i]));
        for j in (0..w3.len()).step_by(8) {
            print!("{:9.3}", to_mhz(map.zeta(i, j)));
        }
        println!();
    }
    println!("(ζ_ZZ/2π in MHz, * marks the straddling band)");
    println!(
        "sign changes inside the band: {}, outside: {}",
        map.sign_changes_inside_band().len(),
        map.sign_changes_outside_band().len()
    );
    Ok(())
}
