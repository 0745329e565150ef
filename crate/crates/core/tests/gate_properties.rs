use std::f64::consts::PI;

use dtc_core::charge::HamiltonianFamily;
use dtc_core::circuit::{CircuitParams, DerivedParams};
use dtc_core::gate::{
    average_fidelity, compute_gate_matrix, cphase_angle, ideal_gate, leakage_budget, wrap_angle,
};
use dtc_core::linalg;
use dtc_core::propagate::{propagate, propagate_fixed, FluxDrive, PropagationSettings};
use dtc_core::units::ns;
use dtc_core::C64;
use nalgebra::{DMatrix, Matrix4};
use proptest::prelude::*;

fn matrix4() -> impl Strategy<Value = Matrix4<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)
        .prop_map(|v| Matrix4::from_iterator(v.into_iter().map(|(re, im)| C64::new(re, im))))
}

/// diag(1, e^{ia}, e^{ib}, e^{i(a+b)}): independent phases on each qubit.
fn local_phases(a: f64, b: f64) -> Matrix4<C64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new(
        C64::new(1.0, 0.0),
        C64::from_polar(1.0, a),
        C64::from_polar(1.0, b),
        C64::from_polar(1.0, a + b),
    ))
}

/// Orthonormal columns from a QR factorization of random entries.
fn orthonormal(dim: usize, cols: usize, raw: &[(f64, f64)]) -> Vec<Vec<C64>> {
    let m = DMatrix::from_iterator(dim, cols, raw.iter().map(|&(re, im)| C64::new(re, im)));
    let q = m.qr().q();
    (0..cols)
        .map(|j| q.column(j).iter().copied().collect())
        .collect()
}

proptest! {
    #[test]
    fn bookkeeping_identity_holds_for_normalized_outputs(
        raw_q in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 24 * 4),
        raw_f in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 24 * 4),
        raw_c in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 24 * 3),
    ) {
        let q = orthonormal(24, 4, &raw_q);
        let qubits = [q[0].clone(), q[1].clone(), q[2].clone(), q[3].clone()];
        let finals: Vec<Vec<C64>> = raw_f
            .chunks(24)
            .map(|c| {
                let mut v: Vec<C64> = c.iter().map(|&(re, im)| C64::new(re, im)).collect();
                linalg::normalize(&mut v);
                v
            })
            .collect();
        let channels = orthonormal(24, 3, &raw_c);
        let u = compute_gate_matrix(&qubits, &finals);
        let budget = leakage_budget(&u, &finals, &[[0, 0, 1, 0], [0, 0, 0, 1], [2, 0, 0, 0]], &channels);
        let retained = (u.adjoint() * u).trace().re;
        let total = retained + budget.total.iter().sum::<f64>();
        prop_assert!((total - 4.0).abs() < 1e-9);
        for k in 0..4 {
            prop_assert!(budget.total[k] >= -1e-12);
            let named: f64 = budget.channels[k].iter().sum();
            prop_assert!((named + budget.remainder[k] - budget.total[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_ignores_global_and_local_phases(
        u in matrix4(),
        alpha in -PI..PI,
        a in -PI..PI,
        b in -PI..PI,
        ph in prop::array::uniform4(-PI..PI),
    ) {
        let u_id = Matrix4::from_diagonal(&nalgebra::Vector4::from_iterator(ph.iter().map(|p| C64::from_polar(1.0, *p))));
        let f = average_fidelity(&u, &u_id);
        let global = average_fidelity(&(u * C64::from_polar(1.0, alpha)), &u_id);
        prop_assert!((f - global).abs() < 1e-12);
        let d = local_phases(a, b);
        let local = average_fidelity(&(d * u), &(d * u_id));
        prop_assert!((f - local).abs() < 1e-12);
    }

    #[test]
    fn cphase_ignores_single_qubit_phases(
        diag in prop::array::uniform4((0.2..1.0f64, -PI..PI)),
        offdiag in matrix4(),
        a in -PI..PI,
        b in -PI..PI,
    ) {
        let mut u = offdiag * C64::new(0.01, 0.0);
        for k in 0..4 {
            u[(k, k)] = C64::from_polar(diag[k].0, diag[k].1);
        }
        let d = local_phases(a, b);
        let base = cphase_angle(&u).unwrap();
        let moved = cphase_angle(&(d * u)).unwrap();
        prop_assert!(wrap_angle(base - moved).abs() < 1e-12);
        let u_id = ideal_gate(&u).unwrap();
        let moved_id = ideal_gate(&(d * u)).unwrap();
        prop_assert!((d * u_id - moved_id).norm() < 1e-12);
    }
}

#[test]
fn fidelity_hand_cases() {
    let one = C64::new(1.0, 0.0);
    let id = Matrix4::<C64>::identity();
    assert!((average_fidelity(&id, &id) - 1.0).abs() < 1e-15);
    assert_eq!(average_fidelity(&Matrix4::zeros(), &id), 0.0);
    let mut cz = id;
    cz[(3, 3)] = -one;
    assert!((average_fidelity(&id, &cz) - 0.4).abs() < 1e-15);
}

#[test]
fn halving_the_step_stays_within_the_certificate() {
    let p = DerivedParams::from_circuit(&CircuitParams::reference_design()).unwrap();
    let family = HamiltonianFamily::new(&p, 2).unwrap();
    let duration = ns(3.0);
    let flux = |t: f64| {
        let s = (PI * t / duration).sin();
        let theta = 0.61 * PI + 0.3 * PI * s * s;
        let rate = 0.3 * PI * (2.0 * PI * t / duration).sin() * PI / duration;
        (theta, rate)
    };
    let drive = FluxDrive::new(&family, flux);
    let dim = family.dim();
    let inputs: Vec<Vec<C64>> = (0..2)
        .map(|k| {
            let mut v: Vec<C64> = (0..dim)
                .map(|i| {
                    C64::new(
                        ((i * (k + 3)) as f64 * 0.37).sin(),
                        ((i + k) as f64 * 0.11).cos(),
                    )
                })
                .collect();
            linalg::normalize(&mut v);
            v
        })
        .collect();
    let settings = PropagationSettings::default();
    let run = propagate(&drive, &inputs, duration, &settings).unwrap();
    let cert = run.certificate.unwrap();
    assert!(cert < settings.certificate_tol, "certificate {cert:e}");
    assert!(run.max_norm_drift < settings.norm_tol);
    let steps = (duration / run.dt).round() as usize;
    for (psi0, psi) in inputs.iter().zip(&run.states) {
        let (fine, drift, _) =
            propagate_fixed(&drive, psi0, duration, 2 * steps, &settings).unwrap();
        assert!(drift < settings.norm_tol);
        let diff: f64 = fine
            .iter()
            .zip(psi)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < settings.certificate_tol, "{diff:e}");
    }
}
