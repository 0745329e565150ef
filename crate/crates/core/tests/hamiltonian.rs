use std::f64::consts::PI;

use dtc_core::charge::{HamiltonianFamily, LinearOperator};
use dtc_core::circuit::{CircuitParams, DerivedParams};
use dtc_core::linalg::{self, hermitian_eigh};
use dtc_core::spectrum::{lowest_eigenpairs, SolverSettings, SpectrumSolver};
use dtc_core::units::khz;
use dtc_core::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn reference() -> DerivedParams {
    DerivedParams::from_circuit(&CircuitParams::reference_design()).unwrap()
}

fn complex_vec(parts: &[(f64, f64)]) -> Vec<C64> {
    parts.iter().map(|&(re, im)| C64::new(re, im)).collect()
}

fn random_state(dim: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim).prop_map(|v| complex_vec(&v))
}

/// e^{iφ} in the charge basis: |n⟩ → |n+1⟩.
fn raise(d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| {
        if i == j + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::default()
        }
    })
}

fn embed(factors: [&DMatrix<C64>; 4]) -> DMatrix<C64> {
    factors[0].kronecker(&factors[1].kronecker(&factors[2].kronecker(factors[3])))
}

/// The charge-basis Hamiltonian written out with explicit Kronecker
/// products.
fn kronecker_hamiltonian(
    p: &DerivedParams,
    cutoff: usize,
    theta: f64,
    theta_dot: f64,
) -> DMatrix<C64> {
    let d = 2 * cutoff + 1;
    let id = DMatrix::<C64>::identity(d, d);
    let n = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(i as f64 - cutoff as f64, 0.0)
        } else {
            C64::default()
        }
    });
    let e = raise(d);
    let cos = (&e + e.adjoint()) * C64::new(0.5, 0.0);
    let at = |mode: usize, op: &DMatrix<C64>| {
        let mut f = [&id, &id, &id, &id];
        f[mode] = op;
        embed(f)
    };
    let ns: Vec<_> = (0..4).map(|m| at(m, &n)).collect();
    let dim = d.pow(4);
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..4 {
        for j in 0..4 {
            h += &ns[i] * &ns[j] * C64::new(4.0 * p.w[(i, j)], 0.0);
        }
    }
    let rate = theta_dot / p.omega_c34;
    for j in 0..4 {
        h += &ns[j] * C64::new(rate * (p.w[(3, j)] - p.w[(2, j)]), 0.0);
    }
    for i in 0..4 {
        h -= at(i, &cos) * C64::new(p.omega_j[i], 0.0);
    }
    let e3_dag = e.adjoint();
    let hop = embed([&id, &id, &e3_dag, &e]) * C64::from_polar(0.5 * p.omega_j[4], -theta);
    h -= &hop + hop.adjoint();
    h
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn apply_is_hermitian(
        theta in -2.0 * PI..2.0 * PI,
        rate in -5e10..5e10f64,
        x in random_state(625),
        y in random_state(625),
    ) {
        let h = HamiltonianFamily::new(&reference(), 2).unwrap().at(theta, rate);
        let (mut hx, mut hy) = (vec![C64::default(); 625], vec![C64::default(); 625]);
        h.apply_into(&x, &mut hx);
        h.apply_into(&y, &mut hy);
        let lhs = linalg::dot(&y, &hx);
        let rhs = linalg::dot(&x, &hy).conj();
        let scale = h.norm_estimate() * linalg::norm(&x) * linalg::norm(&y);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn apply_matches_kronecker_oracle(
        cutoff in 1usize..=2,
        theta in -PI..PI,
        rate in -5e10..5e10f64,
        seed in random_state(625),
    ) {
        let p = reference();
        let h = HamiltonianFamily::new(&p, cutoff).unwrap().at(theta, rate);
        let dim = h.dim();
        let x = &seed[..dim];
        let mut y = vec![C64::default(); dim];
        h.apply_into(x, &mut y);
        let dense = kronecker_hamiltonian(&p, cutoff, theta, rate);
        let expect = &dense * nalgebra::DVector::from_column_slice(x);
        let err: f64 = y.iter().zip(expect.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-10 * max_abs(&dense) * linalg::norm(x), "error {err:e}");
        let explicit = h.densify().unwrap();
        prop_assert!(max_abs(&(explicit - dense)) <= 1e-10 * h.norm_estimate());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn static_spectrum_is_even_and_periodic_in_flux(theta in 0.0..PI) {
        let family = HamiltonianFamily::new(&reference(), 2).unwrap();
        let eig = |t: f64| hermitian_eigh(&family.at(t, 0.0).densify().unwrap()).0;
        let base = eig(theta);
        let scale = base.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for other in [eig(-theta), eig(theta + 2.0 * PI)] {
            for (a, b) in base.iter().zip(&other) {
                prop_assert!((a - b).abs() <= 1e-9 * scale);
            }
        }
    }
}

#[test]
fn densified_matrix_is_hermitian() {
    let h = HamiltonianFamily::new(&reference(), 2)
        .unwrap()
        .at(0.7 * PI, 3e9);
    let m = h.densify().unwrap();
    assert_eq!(m.nrows(), 625);
    assert!(max_abs(&(&m - m.adjoint())) < 1e-12 * max_abs(&m));
}

#[test]
fn apply_cost_is_linear_in_dimension_per_term() {
    let p = reference();
    let per_term = |cutoff: usize| {
        let h = HamiltonianFamily::new(&p, cutoff)
            .unwrap()
            .at(0.7 * PI, 1e9);
        let x = vec![C64::new(1.0, 0.0); h.dim()];
        let (_, count) = h.apply_by_terms(&x).unwrap();
        count as f64 / (h.terms().len() * h.dim() * (2 * cutoff + 1)) as f64
    };
    let (small, large) = (per_term(2), per_term(5));
    assert!(large <= small, "{small} -> {large}");
    assert!(large <= 1.0);
}

#[test]
fn eigenpairs_have_small_residuals_and_bijective_labels() {
    let settings = SolverSettings {
        cutoff: 3,
        levels: 12,
        ..SolverSettings::default()
    };
    let solver =
        SpectrumSolver::for_circuit(&CircuitParams::reference_design(), &settings).unwrap();
    let thetas: Vec<f64> = (0..=10).map(|k| (0.61 + 0.039 * k as f64) * PI).collect();
    let spectra = solver.sweep(&thetas, thetas[0], |_, _| Ok(())).unwrap();
    for s in &spectra {
        let h = solver.family().at(s.theta_ex, 0.0);
        let mut hv = vec![C64::default(); h.dim()];
        for (level, v) in s.levels.iter().zip(&s.vectors) {
            h.apply_into(v, &mut hv);
            let e = level.energy + s.ground_energy;
            linalg::axpy(C64::new(-e, 0.0), v, &mut hv);
            let r = linalg::norm(&hv) / linalg::norm(v);
            assert!(
                r <= 1e-8 * solver.norm(),
                "residual {r:e} at {}π",
                s.theta_ex / PI
            );
        }
        let overlap: f64 = s.levels.iter().map(|l| l.overlap).sum();
        assert!(overlap > 0.5 * s.levels.len() as f64);
        let mut labels = s.labels();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), s.levels.len());
    }
}

#[test]
fn zz_is_symmetric_about_pi() {
    let settings = SolverSettings {
        cutoff: 3,
        levels: 10,
        ..SolverSettings::default()
    };
    let solver =
        SpectrumSolver::for_circuit(&CircuitParams::reference_design(), &settings).unwrap();
    let idle = 0.61 * PI;
    for theta in [0.7 * PI, 0.85 * PI] {
        let a = solver
            .walk(idle, theta, 0.01 * PI)
            .unwrap()
            .zeta_zz()
            .unwrap();
        let b = solver
            .walk(2.0 * PI - idle, 2.0 * PI - theta, 0.01 * PI)
            .unwrap()
            .zeta_zz()
            .unwrap();
        assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn lowest_levels_converge_in_cutoff() {
    let p = reference();
    let levels = |cutoff| {
        let h = HamiltonianFamily::new(&p, cutoff)
            .unwrap()
            .at(0.61 * PI, 0.0);
        lowest_eigenpairs(&h, 12).unwrap().values
    };
    let (coarse, fine) = (levels(8), levels(10));
    for (a, b) in coarse.iter().zip(&fine) {
        assert!(
            (a - b).abs() < khz(1.0),
            "{a} vs {b}: {:.3e} rad/s",
            (a - b).abs()
        );
    }
}
