//! Projected two-qubit gate, controlled-phase angle, average fidelity and
//! leakage.
//!
//! The computational basis is the labeled idle-point eigenbasis ψ_ij, index
//! 2i + j. Raw Schrödinger phases are kept; single-qubit phases only drop
//! out through U_id and the controlled-phase combination.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::charge::HamiltonianFamily;
use crate::error::{Error, Result};
use crate::linalg;
use crate::propagate::{propagate, FluxDrive, PropagationSettings};
use crate::pulse::{design_pulse, GapProfile, PulseLength, PulseSchedule};
use crate::spectrum::{format_label, Label, LabeledSpectrum, QUBIT_LABELS};
use crate::C64;

/// Number of named leakage channels per input.
pub const LEAKAGE_CHANNELS: usize = 10;

/// |U′_kk| below which the diagonal phase is undefined.
pub const MIN_DIAGONAL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeakageBudget {
    /// 1 − Σ_qubit |⟨ψ_ij|ψ′⟩|² per input, in index order 00, 01, 10, 11.
    pub total: [f64; 4],
    pub channel_labels: Vec<Label>,
    /// channels[input][c] = |⟨χ_c|ψ′_input⟩|².
    pub channels: Vec<Vec<f64>>,
    /// Leakage not captured by the named channels.
    pub remainder: [f64; 4],
}

impl LeakageBudget {
    /// Label of the largest named channel for `input`.
    pub fn dominant_channel(&self, input: usize) -> Option<Label> {
        let row = &self.channels[input];
        (0..row.len())
            .max_by(|&a, &b| row[a].total_cmp(&row[b]))
            .map(|c| self.channel_labels[c])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateResult {
    pub gate_time: f64,
    /// U′_{ab} = ⟨ψ_a|ψ′_b⟩.
    pub u_prime: Matrix4<C64>,
    pub u_id: Matrix4<C64>,
    pub theta_cphase: f64,
    pub avg_fidelity: f64,
    pub leakage: LeakageBudget,
    /// Certified state change under Δt halving, when certified.
    pub certificate: Option<f64>,
    pub dt: f64,
}

impl GateResult {
    /// Share of 1 − F̄ carried by leakage out of each input, L_k / (4(1 − F̄)).
    pub fn leakage_fractions(&self) -> [f64; 4] {
        let inf = 1.0 - self.avg_fidelity;
        self.leakage
            .total
            .map(|l| if inf > 0.0 { l / (4.0 * inf) } else { 0.0 })
    }

    /// tr(U′†U′).
    pub fn retained_norm(&self) -> f64 {
        (self.u_prime.adjoint() * self.u_prime).trace().re
    }
}

/// Idle-point qubit states and leakage channels for one circuit and cutoff.
pub struct GateSetup {
    pub family: HamiltonianFamily,
    pub idle: LabeledSpectrum,
    qubits: [Vec<C64>; 4],
    channel_labels: Vec<Label>,
    channels: Vec<Vec<C64>>,
}

impl GateSetup {
    /// `idle` must carry eigenvectors and contain the four qubit labels;
    /// the lowest other labeled states become leakage channels.
    pub fn new(family: HamiltonianFamily, idle: LabeledSpectrum) -> Result<Self> {
        let get = |l: &Label| -> Result<Vec<C64>> {
            idle.vector(l).map(<[C64]>::to_vec).ok_or_else(|| {
                Error::MissingLabel(format!("{} in the idle spectrum", format_label(l)))
            })
        };
        let qubits = [
            get(&QUBIT_LABELS[0])?,
            get(&QUBIT_LABELS[1])?,
            get(&QUBIT_LABELS[2])?,
            get(&QUBIT_LABELS[3])?,
        ];
        let mut channel_labels = Vec::new();
        let mut channels = Vec::new();
        for l in &idle.levels {
            if QUBIT_LABELS.contains(&l.label) || channel_labels.len() == LEAKAGE_CHANNELS {
                continue;
            }
            channel_labels.push(l.label);
            channels.push(get(&l.label)?);
        }
        Ok(Self {
            family,
            idle,
            qubits,
            channel_labels,
            channels,
        })
    }

    pub fn qubit_states(&self) -> &[Vec<C64>; 4] {
        &self.qubits
    }

    pub fn channel_labels(&self) -> &[Label] {
        &self.channel_labels
    }

    /// Propagates the four qubit states under `schedule` and projects.
    pub fn simulate(
        &self,
        schedule: &PulseSchedule,
        settings: &PropagationSettings,
    ) -> Result<GateResult> {
        let drive = FluxDrive::new(&self.family, |t| schedule.eval(t));
        let run = propagate(&drive, &self.qubits, schedule.gate_time, settings)?;
        let mut result = self.evaluate(&run.states, schedule.gate_time)?;
        result.certificate = run.certificate;
        result.dt = run.dt;
        Ok(result)
    }

    /// Gate quantities from final states of the four inputs.
    pub fn evaluate(&self, finals: &[Vec<C64>], gate_time: f64) -> Result<GateResult> {
        let u_prime = compute_gate_matrix(&self.qubits, finals);
        let theta_cphase = cphase_angle(&u_prime)?;
        let u_id = ideal_gate(&u_prime)?;
        let avg_fidelity = average_fidelity(&u_prime, &u_id);
        let leakage = leakage_budget(&u_prime, finals, &self.channel_labels, &self.channels);
        Ok(GateResult {
            gate_time,
            u_prime,
            u_id,
            theta_cphase,
            avg_fidelity,
            leakage,
            certificate: None,
            dt: 0.0,
        })
    }
}

/// U′_{ab} = ⟨ψ_a|ψ′_b⟩.
pub fn compute_gate_matrix(qubits: &[Vec<C64>; 4], finals: &[Vec<C64>]) -> Matrix4<C64> {
    Matrix4::from_fn(|a, b| linalg::dot(&qubits[a], &finals[b]))
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// θ3 − θ1 − θ2 + θ0 with θ_k = arg U′_kk, wrapped to (−π, π].
pub fn cphase_angle(u: &Matrix4<C64>) -> Result<f64> {
    for k in 0..4 {
        if u[(k, k)].norm() < MIN_DIAGONAL {
            return Err(Error::Gate(format!(
                "undefined phase: |U'[{k}][{k}]| = {:.3e}",
                u[(k, k)].norm()
            )));
        }
    }
    let th: Vec<f64> = (0..4).map(|k| u[(k, k)].arg()).collect();
    Ok(wrap_angle(th[3] - th[1] - th[2] + th[0]))
}

/// Continuous branch of a sequence of wrapped angles.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (k, &a) in angles.iter().enumerate() {
        if k > 0 {
            let prev = angles[k - 1];
            offset += -2.0 * PI * ((a - prev) / (2.0 * PI)).round();
        }
        out.push(a + offset);
    }
    out
}

/// diag(U′_kk/|U′_kk|).
pub fn ideal_gate(u: &Matrix4<C64>) -> Result<Matrix4<C64>> {
    let mut out = Matrix4::zeros();
    for k in 0..4 {
        let d = u[(k, k)];
        if d.norm() < MIN_DIAGONAL {
            return Err(Error::Gate(format!(
                "undefined phase: |U'[{k}][{k}]| = {:.3e}",
                d.norm()
            )));
        }
        out[(k, k)] = d / d.norm();
    }
    Ok(out)
}

/// F̄ = (|tr(U_id†U′)|² + tr(U′†U′))/20.
pub fn average_fidelity(u_prime: &Matrix4<C64>, u_id: &Matrix4<C64>) -> f64 {
    let t = (u_id.adjoint() * u_prime).trace();
    let n = (u_prime.adjoint() * u_prime).trace().re;
    (t.norm_sqr() + n) / 20.0
}

/// Leakage per input and its split over named channels.
pub fn leakage_budget(
    u_prime: &Matrix4<C64>,
    finals: &[Vec<C64>],
    channel_labels: &[Label],
    channels: &[Vec<C64>],
) -> LeakageBudget {
    let mut total = [0.0; 4];
    let mut remainder = [0.0; 4];
    let mut per_input = Vec::with_capacity(4);
    for b in 0..4 {
        let kept: f64 = (0..4).map(|a| u_prime[(a, b)].norm_sqr()).sum();
        let norm = linalg::norm_sqr(&finals[b]);
        total[b] = norm - kept;
        let row: Vec<f64> = channels
            .iter()
            .map(|c| linalg::dot(c, &finals[b]).norm_sqr())
            .collect();
        remainder[b] = total[b] - row.iter().sum::<f64>();
        per_input.push(row);
    }
    LeakageBudget {
        total,
        channel_labels: channel_labels.to_vec(),
        channels: per_input,
        remainder,
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub gate_time: f64,
    pub result: GateResult,
    /// θ_CPHASE does not depend on T_g across the bracket.
    pub degenerate: bool,
    /// (T_g, θ_CPHASE) at every evaluation.
    pub history: Vec<(f64, f64)>,
}

/// Gate time where θ_CPHASE reaches `target` (within `angle_tol`), by
/// secant steps safeguarded with bisection on [lo, hi].
pub fn calibrate_gate_time<F>(
    mut simulate: F,
    target: f64,
    lo: f64,
    hi: f64,
    angle_tol: f64,
) -> Result<Calibration>
where
    F: FnMut(f64) -> Result<GateResult>,
{
    if !(hi > lo && lo >= 0.0) {
        return Err(Error::InvalidParams(
            "gate-time bracket must satisfy 0 ≤ lo < hi".into(),
        ));
    }
    let mut history = Vec::new();
    let mut eval = |t: f64, history: &mut Vec<(f64, f64)>| -> Result<(f64, GateResult)> {
        let r = simulate(t)?;
        history.push((t, r.theta_cphase));
        Ok((wrap_angle(r.theta_cphase - target), r))
    };
    let (mut fa, ra) = eval(lo, &mut history)?;
    let (mut fb, rb) = eval(hi, &mut history)?;
    let (mut a, mut b) = (lo, hi);
    if fa.abs() < angle_tol && (fa - fb).abs() < 1e-12 {
        return Ok(Calibration {
            gate_time: lo,
            result: ra,
            degenerate: true,
            history,
        });
    }
    if fa.abs() < angle_tol {
        return Ok(Calibration {
            gate_time: lo,
            result: ra,
            degenerate: false,
            history,
        });
    }
    if fb.abs() < angle_tol {
        return Ok(Calibration {
            gate_time: hi,
            result: rb,
            degenerate: false,
            history,
        });
    }
    if fa * fb > 0.0 {
        return Err(Error::Gate(format!(
            "bracket [{:.3}, {:.3}] ns does not enclose the target angle (offsets {fa:.4}, {fb:.4} rad)",
            lo * 1e9,
            hi * 1e9
        )));
    }
    for _ in 0..40 {
        let mut t = b - fb * (b - a) / (fb - fa);
        let (l, r) = (a.min(b), a.max(b));
        if !(t > l && t < r) || (t - l).min(r - t) < 1e-3 * (r - l) {
            t = 0.5 * (a + b);
        }
        let (ft, res) = eval(t, &mut history)?;
        if ft.abs() < angle_tol {
            return Ok(Calibration {
                gate_time: t,
                result: res,
                degenerate: false,
                history,
            });
        }
        // Keep the bracket: replace the endpoint with the same sign.
        if ft * fa < 0.0 {
            b = t;
            fb = ft;
        } else {
            a = t;
            fa = ft;
        }
    }
    Err(Error::Gate("gate-time calibration did not converge".into()))
}

/// Calibrates the designed pulse to a CZ. The first evaluation certifies
/// the step size, intermediate ones reuse it, and the accepted gate time is
/// simulated again with certification.
pub fn calibrate_designed_gate(
    setup: &GateSetup,
    time_profile: &GapProfile,
    shape_a: f64,
    samples: usize,
    settings: &PropagationSettings,
    bracket: [f64; 2],
    angle_tol: f64,
) -> Result<Calibration> {
    let mut step = settings.clone();
    let mut certified = !settings.certify;
    let mut cal = calibrate_gate_time(
        |t| {
            let schedule = design_pulse(time_profile, PulseLength::GateTime(t), shape_a, samples)?;
            let r = setup.simulate(&schedule, &step)?;
            if !certified {
                step.dt = r.dt;
                step.certify = false;
                certified = true;
            }
            Ok(r)
        },
        PI,
        bracket[0],
        bracket[1],
        angle_tol,
    )?;
    if settings.certify {
        let schedule = design_pulse(
            time_profile,
            PulseLength::GateTime(cal.gate_time),
            shape_a,
            samples,
        )?;
        let final_settings = PropagationSettings {
            dt: step.dt,
            ..settings.clone()
        };
        cal.result = setup.simulate(&schedule, &final_settings)?;
    }
    Ok(cal)
}
