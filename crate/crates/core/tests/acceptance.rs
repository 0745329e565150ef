//! End-to-end acceptance run against the reference device. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.
//!
//! `DTC_ACCEPTANCE=2,3` restricts the run to the listed criteria.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use dtc_core::charge::{HamiltonianFamily, LinearOperator};
use dtc_core::circuit::{CircuitParams, DerivedParams};
use dtc_core::gate::{
    average_fidelity, compute_gate_matrix, cphase_angle, leakage_budget, wrap_angle, GateResult,
    GateSetup,
};
use dtc_core::linalg::{self, hermitian_eigh};
use dtc_core::propagate::{propagate, propagate_fixed, FluxDrive, PropagationSettings};
use dtc_core::pulse::{
    compute_gap_profile, design_pulse, modified_gap, GapProfile, ProfileGrid, PulseLength,
    DEFAULT_GAP_SCALE, DEFAULT_SHAPE_A,
};
use dtc_core::spectrum::{
    estimate_t2, find_zz_zeros, minimum_t2, quadratic_fit_slope, qubit_frequencies, sweep_zz,
    SolverSettings, SpectrumSolver, SweepOptions, ZeroReport, DEFAULT_FD_STEP,
};
use dtc_core::stc::{default_grids, linspace, stc_zz_sweep, StcParams};
use dtc_core::units::{ghz, ns, to_ghz, to_mhz, to_ns};
use dtc_core::C64;
use nalgebra::{Matrix4, Vector4};

const IDLE: f64 = 0.61 * PI;
const A_PHI: f64 = 1e-5;
/// Cutoff for the spectral criteria.
const SPECTRUM_CUTOFF: usize = 7;
/// Cutoffs for the gate criterion: calibration, then the convergence trend.
const GATE_CUTOFF: usize = 6;
const GATE_TREND: [usize; 3] = [5, 6, 7];

type Outcome = (bool, String);

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("DTC_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, fn() -> dtc_core::Result<Outcome>); 8] = [
        (1, parameters),
        (2, zz_zeros),
        (3, peak_coupling),
        (4, regime_structure),
        (5, cz_calibration),
        (6, flux_noise),
        (7, stc_contrast),
        (8, property_suites),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {n}: {} ({secs:.0} s) {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn solver(
    circuit: &CircuitParams,
    cutoff: usize,
    levels: usize,
) -> dtc_core::Result<SpectrumSolver> {
    let settings = SolverSettings {
        cutoff,
        levels,
        ..SolverSettings::default()
    };
    SpectrumSolver::for_circuit(circuit, &settings)
}

fn parameters() -> dtc_core::Result<Outcome> {
    let d = DerivedParams::from_circuit(&CircuitParams::reference_design())?;
    let mut ok = within(to_mhz(d.w[(0, 0)]), 296.0, 2.0)
        && within(to_mhz(d.w[(2, 3)]), 4.42, 0.1)
        && within(to_ghz(d.omega_j[0]), 11.9, 0.05)
        && within(to_ghz(d.omega_j[4]), 7.2, 0.1);
    let mut detail = format!(
        "W11 {:.2} MHz, W34 {:.3} MHz, ωJ1 {:.4} GHz, ωJ5 {:.4} GHz;",
        to_mhz(d.w[(0, 0)]),
        to_mhz(d.w[(2, 3)]),
        to_ghz(d.omega_j[0]),
        to_ghz(d.omega_j[4])
    );
    let table = [
        ((0, 1), 1.7),
        ((0, 2), 239.0),
        ((0, 3), 5.7),
        ((1, 2), 6.5),
        ((1, 3), 270.0),
        ((2, 3), 57.0),
    ];
    for ((i, j), expect) in table {
        let g = to_mhz(d.g[(i, j)]);
        let (wi, wj, wii, wjj) = (
            d.omega_design[i],
            d.omega_design[j],
            d.w[(i, i)],
            d.w[(j, j)],
        );
        let formula = 0.5 * d.w[(i, j)] * ((wi + wii) / wii).sqrt() * ((wj + wjj) / wjj).sqrt();
        let formula_ok = (d.g[(i, j)] - formula).abs() <= 1e-12 * formula.abs();
        let table_ok = (g - expect).abs() <= 0.2 * expect;
        ok &= formula_ok && table_ok;
        detail += &format!(
            " g{}{} {:.2} MHz (table {expect}{}{})",
            i + 1,
            j + 1,
            g,
            if table_ok { "" } else { ", outside ±20%" },
            if formula_ok { "" } else { ", formula mismatch" }
        );
    }
    Ok((ok, detail))
}

fn zz_zeros() -> dtc_core::Result<Outcome> {
    let circuit = CircuitParams::reference_design().with_omega(3, ghz(8.5));
    let settings = SolverSettings {
        cutoff: SPECTRUM_CUTOFF,
        levels: 10,
        ..SolverSettings::default()
    };
    let thetas = linspace(0.55 * PI, 0.70 * PI, 31);
    let sweep = sweep_zz(&circuit, &settings, &thetas, &[], &SweepOptions::default())?;
    let solver = SpectrumSolver::for_circuit(&circuit, &settings)?;
    let roots = match find_zz_zeros(&solver, &sweep, 0)? {
        ZeroReport::Roots(r) => r,
        ZeroReport::Degenerate => return Ok((false, "ζ_ZZ identically zero".into())),
    };
    let found: Vec<String> = roots.iter().map(|r| format!("{:.4}π", r / PI)).collect();
    let hit = |x: f64| roots.iter().any(|r| (r / PI - x).abs() <= 0.01);
    Ok((
        roots.len() == 2 && hit(0.61) && hit(0.63),
        format!("N = {SPECTRUM_CUTOFF}, zeros at {}", found.join(", ")),
    ))
}

fn peak_coupling() -> dtc_core::Result<Outcome> {
    let s = solver(&CircuitParams::reference_design(), SPECTRUM_CUTOFF, 10)?;
    let zeta = to_mhz(s.walk(IDLE, PI, 0.01 * PI)?.zeta_zz()?);
    Ok((
        within(zeta.abs(), 40.0, 4.0),
        format!("ζ_ZZ(π)/2π = {zeta:.3} MHz"),
    ))
}

/// Rows of a ζ map whose Θ cut changes sign.
fn rows_with_zeros(w2_ghz: f64, omega4: &[f64]) -> dtc_core::Result<Vec<bool>> {
    let circuit = CircuitParams::reference_design().with_omega(1, ghz(w2_ghz));
    let settings = SolverSettings {
        cutoff: 5,
        levels: 8,
        ..SolverSettings::default()
    };
    let thetas = linspace(0.4 * PI, 0.8 * PI, 20);
    let sweep = sweep_zz(
        &circuit,
        &settings,
        &thetas,
        omega4,
        &SweepOptions::default(),
    )?;
    Ok(sweep
        .zeta
        .iter()
        .map(|row| row.windows(2).any(|w| w[0] * w[1] < 0.0))
        .collect())
}

/// True when the flagged rows form one run touching the top (`upper`) or
/// bottom end of the grid, without covering all of it.
fn one_sided(rows: &[bool], upper: bool) -> bool {
    let ordered: Vec<bool> = if upper {
        rows.iter().rev().copied().collect()
    } else {
        rows.to_vec()
    };
    let run = ordered.iter().take_while(|z| **z).count();
    run > 0 && run < ordered.len() && ordered[run..].iter().all(|z| !z)
}

fn regime_structure() -> dtc_core::Result<Outcome> {
    let omega4: Vec<f64> = linspace(7.0, 10.0, 20).into_iter().map(ghz).collect();
    let out = rows_with_zeros(5.7, &omega4)?;
    let inside = rows_with_zeros(5.1, &omega4)?;
    let describe = |rows: &[bool]| -> String {
        let z: Vec<String> = rows
            .iter()
            .zip(&omega4)
            .filter(|(z, _)| **z)
            .map(|(_, w)| format!("{:.2}", to_ghz(*w)))
            .collect();
        format!("[{}]", z.join(" "))
    };
    let pass = one_sided(&out, true) && one_sided(&inside, false);
    Ok((
        pass,
        format!(
            "zero rows ω4/2π GHz: ω2 = 5.7 {} ; ω2 = 5.1 {}",
            describe(&out),
            describe(&inside)
        ),
    ))
}

fn gate_setup(cutoff: usize) -> dtc_core::Result<(GateSetup, GapProfile)> {
    let circuit = CircuitParams::reference_design();
    let profile = compute_gap_profile(&solver(&circuit, cutoff, 10)?, &ProfileGrid::default())?;
    let idle_solver = solver(&circuit, cutoff, 16)?;
    let setup = GateSetup::new(idle_solver.family().clone(), idle_solver.seeded(IDLE)?)?;
    Ok((setup, modified_gap(&profile, DEFAULT_GAP_SCALE)))
}

fn run_gate(
    setup: &GateSetup,
    profile: &GapProfile,
    gate_time: f64,
    certify: bool,
) -> dtc_core::Result<GateResult> {
    let schedule = design_pulse(
        profile,
        PulseLength::GateTime(gate_time),
        DEFAULT_SHAPE_A,
        2001,
    )?;
    let settings = PropagationSettings {
        certify,
        ..PropagationSettings::default()
    };
    setup.simulate(&schedule, &settings)
}

fn cz_calibration() -> dtc_core::Result<Outcome> {
    let (setup, profile) = gate_setup(GATE_CUTOFF)?;
    let cal = dtc_core::gate::calibrate_gate_time(
        |t| run_gate(&setup, &profile, t, false),
        PI,
        ns(24.0),
        ns(28.0),
        1e-3,
    )?;
    let tg = cal.gate_time;
    let r = run_gate(&setup, &profile, tg, true)?;
    let frac = r.leakage_fractions();
    let mut trend = Vec::new();
    for n in GATE_TREND {
        let f = if n == GATE_CUTOFF {
            r.avg_fidelity
        } else {
            let (s, p) = gate_setup(n)?;
            run_gate(&s, &p, tg, false)?.avg_fidelity
        };
        trend.push((n, f));
    }
    let best = trend.last().map(|t| t.1).unwrap_or(0.0);
    let checks = [
        ("T_g in 24 ± 2 ns", within(to_ns(tg), 24.0, 2.0)),
        ("F(N=6) ≥ 0.999", r.avg_fidelity >= 0.999),
        ("F(largest N) ≥ 0.9999", best >= 0.9999),
        ("|11> fraction > 50%", frac[3] > 0.5),
        (
            "|01> fraction in [10, 35]%",
            (0.10..=0.35).contains(&frac[1]),
        ),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let trend_s: Vec<String> = trend
        .iter()
        .map(|(n, f)| format!("N={n}: {f:.6}"))
        .collect();
    Ok((
        failed.is_empty(),
        format!(
            "T_g = {:.3} ns, θ = {:.4}, F = {:.6} (dt {:.4} ns, certificate {:.1e}), leakage fractions 01 {:.1}% 11 {:.1}%, trend {}{}",
            to_ns(tg),
            r.theta_cphase,
            r.avg_fidelity,
            to_ns(r.dt),
            r.certificate.unwrap_or(f64::NAN),
            100.0 * frac[1],
            100.0 * frac[3],
            trend_s.join(", "),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join("; ")) }
        ),
    ))
}

fn flux_noise() -> dtc_core::Result<Outcome> {
    let s = solver(&CircuitParams::reference_design(), SPECTRUM_CUTOFF, 10)?;
    let idle = estimate_t2(&s, &s.seeded(IDLE)?, IDLE, A_PHI)?;
    let mins = minimum_t2(&s, &linspace(IDLE, PI, 40), A_PHI)?;
    let us = |x: f64| x * 1e6;
    let factor2 = |x: f64, target: f64| x >= 0.5 * target && x <= 2.0 * target;
    let (q1, q2) = (us(idle.t2[0]), us(idle.t2[1]));
    let (m1, m2) = (us(mins[0].t2[0]), us(mins[1].t2[1]));
    Ok((
        factor2(q1, 260.0) && factor2(q2, 430.0) && factor2(m1, 30.0) && factor2(m2, 5.0),
        format!("idle T2 {q1:.0} μs / {q2:.0} μs, minima {m1:.1} μs / {m2:.2} μs"),
    ))
}

fn stc_contrast() -> dtc_core::Result<Outcome> {
    let p = StcParams::reference();
    let (w2, w3) = default_grids(&p, 40);
    let map = stc_zz_sweep(&p, &w2, &w3)?;
    let (inside, outside) = (
        map.sign_changes_inside_band().len(),
        map.sign_changes_outside_band().len(),
    );
    Ok((
        inside > 0 && outside == 0,
        format!(
            "sign changes inside the band {inside}, outside {outside}, ambiguous labels {}",
            map.ambiguous_count()
        ),
    ))
}

fn property_suites() -> dtc_core::Result<Outcome> {
    let checks: [(&str, fn() -> dtc_core::Result<bool>); 9] = [
        ("hermiticity and flux parity", hermitian_and_periodic),
        ("dense equivalence", dense_equivalence),
        ("eigenpair residuals", residuals),
        ("bookkeeping identity", bookkeeping),
        ("fidelity hand cases", fidelity_cases),
        ("cphase phase invariance", cphase_invariance),
        ("pulse symmetry and flatness", pulse_shape),
        ("dt-halving certificate", dt_certificate),
        ("finite difference vs quadratic fit", slope_agreement),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        if !check()? {
            failed.push(name);
        }
    }
    let detail = if failed.is_empty() {
        format!("{} suites", checks.len())
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Ok((failed.is_empty(), detail))
}

fn reference() -> DerivedParams {
    DerivedParams::from_circuit(&CircuitParams::reference_design())
        .expect("reference design is valid")
}

fn test_vector(dim: usize, k: usize) -> Vec<C64> {
    (0..dim)
        .map(|i| {
            C64::new(
                ((i * (k + 2)) as f64 * 0.731).sin(),
                ((i + 3 * k) as f64 * 0.173).cos(),
            )
        })
        .collect()
}

fn hermitian_and_periodic() -> dtc_core::Result<bool> {
    let family = HamiltonianFamily::new(&reference(), 2)?;
    let mut ok = true;
    for (theta, rate) in [(0.3, 0.0), (1.9, 4e9), (-2.5, -1e10)] {
        let h = family.at(theta, rate);
        let (x, y) = (test_vector(h.dim(), 0), test_vector(h.dim(), 1));
        let (mut hx, mut hy) = (vec![C64::default(); h.dim()], vec![C64::default(); h.dim()]);
        h.apply_into(&x, &mut hx);
        h.apply_into(&y, &mut hy);
        let scale = h.norm_estimate() * linalg::norm(&x) * linalg::norm(&y);
        ok &= (linalg::dot(&y, &hx) - linalg::dot(&x, &hy).conj()).norm() <= 1e-12 * scale;
    }
    let eig = |t: f64| -> dtc_core::Result<Vec<f64>> {
        Ok(hermitian_eigh(&family.at(t, 0.0).densify()?).0)
    };
    let base = eig(0.7 * PI)?;
    let scale = base.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for other in [eig(-0.7 * PI)?, eig(2.7 * PI)?] {
        ok &= base
            .iter()
            .zip(&other)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * scale);
    }
    Ok(ok)
}

fn dense_equivalence() -> dtc_core::Result<bool> {
    let p = reference();
    let mut ok = true;
    for cutoff in [1, 2] {
        let h = HamiltonianFamily::new(&p, cutoff)?.at(0.8 * PI, 2e9);
        let dense = h.densify()?;
        let norm = h.norm_estimate();
        let x = test_vector(h.dim(), 2);
        let mut y = vec![C64::default(); h.dim()];
        h.apply_into(&x, &mut y);
        let expect = &dense * nalgebra::DVector::from_column_slice(&x);
        let err: f64 = y
            .iter()
            .zip(expect.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        ok &= err <= 1e-10 * norm * linalg::norm(&x);
        ok &= (&dense - dense.adjoint())
            .iter()
            .all(|z| z.norm() <= 1e-12 * norm);
    }
    Ok(ok)
}

fn residuals() -> dtc_core::Result<bool> {
    let s = solver(&CircuitParams::reference_design(), 3, 12)?;
    let mut ok = true;
    for theta in [IDLE, 0.8 * PI, PI] {
        let spec = s.walk(IDLE, theta, 0.02 * PI)?;
        let h = s.family().at(theta, 0.0);
        let mut hv = vec![C64::default(); h.dim()];
        for (level, v) in spec.levels.iter().zip(&spec.vectors) {
            h.apply_into(v, &mut hv);
            linalg::axpy(
                C64::new(-(level.energy + spec.ground_energy), 0.0),
                v,
                &mut hv,
            );
            ok &= linalg::norm(&hv) / linalg::norm(v) <= 1e-8 * s.norm();
        }
    }
    Ok(ok)
}

fn bookkeeping() -> dtc_core::Result<bool> {
    let dim = 30;
    let basis = |k: usize| -> Vec<C64> {
        (0..dim)
            .map(|i| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0))
            .collect()
    };
    let qubits = [basis(0), basis(1), basis(2), basis(3)];
    let finals: Vec<Vec<C64>> = (0..4)
        .map(|k| {
            let mut v = test_vector(dim, k + 5);
            linalg::normalize(&mut v);
            v
        })
        .collect();
    let u = compute_gate_matrix(&qubits, &finals);
    let budget = leakage_budget(&u, &finals, &[[0, 0, 1, 0]], &[basis(4)]);
    let total = (u.adjoint() * u).trace().re + budget.total.iter().sum::<f64>();
    Ok((total - 4.0).abs() < 1e-9)
}

fn fidelity_cases() -> dtc_core::Result<bool> {
    let id = Matrix4::<C64>::identity();
    let mut cz = id;
    cz[(3, 3)] = C64::new(-1.0, 0.0);
    Ok((average_fidelity(&id, &id) - 1.0).abs() < 1e-15
        && average_fidelity(&Matrix4::zeros(), &id) == 0.0
        && (average_fidelity(&id, &cz) - 0.4).abs() < 1e-15)
}

fn cphase_invariance() -> dtc_core::Result<bool> {
    let mut u =
        Matrix4::<C64>::from_fn(|i, j| C64::new(0.01 * (i + 2 * j) as f64, -0.003 * i as f64));
    for (k, ph) in [0.2, -1.1, 2.4, 0.9].iter().enumerate() {
        u[(k, k)] = C64::from_polar(0.97, *ph);
    }
    let base = cphase_angle(&u)?;
    let mut ok = true;
    for (a, b) in [(0.4, -2.0), (3.0, 1.2)] {
        let d = Matrix4::from_diagonal(&Vector4::new(
            C64::new(1.0, 0.0),
            C64::from_polar(1.0, a),
            C64::from_polar(1.0, b),
            C64::from_polar(1.0, a + b),
        ));
        ok &= wrap_angle(cphase_angle(&(d * u))? - base).abs() < 1e-12;
    }
    Ok(ok)
}

fn pulse_shape() -> dtc_core::Result<bool> {
    let theta: Vec<f64> = (0..=800)
        .map(|i| (0.61 + 0.39 * i as f64 / 800.0) * PI)
        .collect();
    let g = dtc_core::units::mhz(100.0);
    let gap = theta
        .iter()
        .map(|t| {
            let delta = dtc_core::units::mhz(9000.0) * (t - 0.93 * PI);
            (delta * delta + 4.0 * g * g).sqrt()
        })
        .collect();
    let profile = modified_gap(&GapProfile::from_gap(theta, gap)?, DEFAULT_GAP_SCALE);
    let mut ok = true;
    for gate_ns in [12.0, 24.0, 37.0] {
        let p = design_pulse(
            &profile,
            PulseLength::GateTime(ns(gate_ns)),
            DEFAULT_SHAPE_A,
            401,
        )?;
        let tg = p.gate_time;
        let peak = p
            .samples
            .iter()
            .fold(0.0f64, |m, s| m.max(s.theta_dot_ex.abs()));
        ok &= (0..=200).all(|k| {
            let t = tg * k as f64 / 400.0;
            (p.theta_ex(t) - p.theta_ex(tg - t)).abs() < 1e-9
        });
        ok &= p.eval(0.0).1.abs() < 1e-6 * peak && p.eval(tg).1.abs() < 1e-6 * peak;
    }
    Ok(ok)
}

fn dt_certificate() -> dtc_core::Result<bool> {
    let family = HamiltonianFamily::new(&reference(), 2)?;
    let duration = ns(3.0);
    let drive = FluxDrive::new(&family, |t: f64| {
        let s = (PI * t / duration).sin();
        (
            IDLE + 0.3 * PI * s * s,
            0.3 * PI * PI / duration * (2.0 * PI * t / duration).sin(),
        )
    });
    let mut psi = test_vector(family.dim(), 7);
    linalg::normalize(&mut psi);
    let settings = PropagationSettings::default();
    let run = propagate(&drive, std::slice::from_ref(&psi), duration, &settings)?;
    let steps = (duration / run.dt).round() as usize;
    let (fine, _, _) = propagate_fixed(&drive, &psi, duration, 2 * steps, &settings)?;
    let diff: f64 = fine
        .iter()
        .zip(&run.states[0])
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(run
        .certificate
        .is_some_and(|c| c < settings.certificate_tol)
        && diff < settings.certificate_tol)
}

fn slope_agreement() -> dtc_core::Result<bool> {
    let s = solver(&CircuitParams::reference_design(), 4, 10)?;
    let mut ok = true;
    for theta in [IDLE, 0.8 * PI] {
        let anchor = s.walk(IDLE, theta, 0.01 * PI)?;
        let fd = estimate_t2(&s, &anchor, theta, A_PHI)?.slope;
        let fit: [f64; 2] = quadratic_fit_slope(
            |t| qubit_frequencies(&s, &anchor, t),
            theta,
            DEFAULT_FD_STEP,
        )?;
        ok &= (0..2).all(|q| (fd[q] - fit[q]).abs() <= 0.01 * fd[q].abs());
    }
    Ok(ok)
}
