//! Adiabatic flux pulse for the controlled-phase gate.
//!
//! The |01⟩|00⟩ ↔ |00⟩|10⟩ avoided crossing is treated as a two-level
//! system with fixed coupling g and flux-dependent detuning Δ. The mixing
//! angle θ follows a two-harmonic profile in the dimensionless time
//! s = ∫ω_gap dt, and the resulting θ(s) is mapped back to Θ_ex(t).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::spectrum::{level_slopes, Label, LabeledSpectrum, SpectrumSolver};

/// Labels spanning the avoided crossing that defines ω_gap.
pub const GAP_LOWER: Label = [0, 1, 0, 0];
pub const GAP_UPPER: Label = [0, 0, 1, 0];

/// Pulse shape coefficient used for the reference gate.
pub const DEFAULT_SHAPE_A: f64 = -0.17;

/// Scale applied to the excess gap below Θ_ex^(g) in [`modified_gap`].
pub const DEFAULT_GAP_SCALE: f64 = 0.2;

/// Default tabulation of the gap profile.
pub const PROFILE_POINTS: usize = 2001;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapProfile {
    /// Flux grid (rad), strictly increasing.
    pub theta: Vec<f64>,
    /// Raw gap (E_{00,10} − E_{01,00})/ħ (rad/s).
    pub omega_gap: Vec<f64>,
    /// Gap used for the s → t map; equal to `omega_gap` until modified.
    pub time_gap: Vec<f64>,
    /// Half the minimum gap (rad/s).
    pub g: f64,
    /// Signed detuning, negative below the minimizer (rad/s).
    pub delta: Vec<f64>,
    /// atan2(2g, Δ) ∈ (0, π).
    pub theta_mix: Vec<f64>,
    /// Flux of the gap minimum, where the raw gap equals 2g.
    pub theta_ex_g: f64,
    /// Grid index of `theta_ex_g`.
    pub argmin: usize,
}

impl GapProfile {
    /// Profile from a tabulated gap on a strictly increasing grid.
    pub fn from_gap(theta: Vec<f64>, omega_gap: Vec<f64>) -> Result<Self> {
        if theta.len() < 3 || theta.len() != omega_gap.len() {
            return Err(Error::Pulse(
                "gap profile needs at least three matching samples".into(),
            ));
        }
        if let Some(k) = theta.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Pulse(format!(
                "gap grid not increasing at index {}",
                k + 1
            )));
        }
        if let Some(k) = omega_gap.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Pulse(format!("non-positive gap at index {k}")));
        }
        let argmin = (0..omega_gap.len())
            .min_by(|&a, &b| omega_gap[a].total_cmp(&omega_gap[b]))
            .expect("non-empty");
        let min = omega_gap[argmin];
        check_unique_minimum(&theta, &omega_gap, argmin)?;
        let g = 0.5 * min;
        let delta: Vec<f64> = omega_gap
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let d = (w * w - min * min).max(0.0).sqrt();
                match k.cmp(&argmin) {
                    std::cmp::Ordering::Less => -d,
                    std::cmp::Ordering::Equal => 0.0,
                    std::cmp::Ordering::Greater => d,
                }
            })
            .collect();
        let theta_mix = delta.iter().map(|d| (2.0 * g).atan2(*d)).collect();
        Ok(Self {
            theta_ex_g: theta[argmin],
            time_gap: omega_gap.clone(),
            theta,
            omega_gap,
            g,
            delta,
            theta_mix,
            argmin,
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Mixing angle at the start (θ0) and end (θ1) of the grid.
    pub fn end_angles(&self) -> (f64, f64) {
        (self.theta_mix[0], self.theta_mix[self.len() - 1])
    }
}

fn check_unique_minimum(theta: &[f64], gap: &[f64], argmin: usize) -> Result<()> {
    let min = gap[argmin];
    let tol = 1e-9 * min;
    let n = gap.len();
    for k in 0..n {
        if k.abs_diff(argmin) <= 1 || gap[k] - min > tol {
            continue;
        }
        let (lo, hi) = (k.min(argmin), k.max(argmin));
        // A separate basin: the gap rises between the two candidates.
        if gap[lo..=hi].iter().any(|&v| v - min > tol) {
            return Err(Error::Pulse(format!(
                "gap minimum not unique: {:.6}π and {:.6}π",
                theta[argmin] / PI,
                theta[k] / PI
            )));
        }
    }
    Ok(())
}

/// Gap profile from labeled spectra sampled on the profile grid itself.
pub fn extract_gap_profile(spectra: &[LabeledSpectrum]) -> Result<GapProfile> {
    let theta = spectra.iter().map(|s| s.theta_ex).collect();
    let gap = spectra
        .iter()
        .map(|s| Ok(s.require_energy(&GAP_UPPER)? - s.require_energy(&GAP_LOWER)?))
        .collect::<Result<Vec<_>>>()?;
    GapProfile::from_gap(theta, gap)
}

/// Flux window and resolution for [`compute_gap_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub start: f64,
    pub end: f64,
    /// Points of the tabulated profile.
    pub points: usize,
    /// Spacing of the eigen-solved samples (rad).
    pub solve_step: f64,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self {
            start: 0.61 * PI,
            end: PI,
            points: PROFILE_POINTS,
            solve_step: 0.01 * PI,
        }
    }
}

/// Solves the spectrum on a coarse grid, interpolates the gap with cubic
/// Hermite segments using Hellmann–Feynman slopes, and tabulates it on
/// `grid.points` equally spaced fluxes.
pub fn compute_gap_profile(solver: &SpectrumSolver, grid: &ProfileGrid) -> Result<GapProfile> {
    if !(grid.end > grid.start) || grid.points < 3 || !(grid.solve_step > 0.0) {
        return Err(Error::InvalidParams("invalid gap profile grid".into()));
    }
    let n = ((grid.end - grid.start) / grid.solve_step).ceil().max(2.0) as usize;
    let coarse: Vec<f64> = (0..=n)
        .map(|i| grid.start + (grid.end - grid.start) * i as f64 / n as f64)
        .collect();
    let mut gap = Vec::with_capacity(coarse.len());
    let mut slope = Vec::with_capacity(coarse.len());
    let spectra = solver.sweep(&coarse, grid.start, |s, _| {
        let d = level_slopes(solver, s, &[GAP_UPPER, GAP_LOWER])?;
        slope.push((s.theta_ex, d[0] - d[1]));
        Ok(())
    })?;
    for s in &spectra {
        gap.push(s.require_energy(&GAP_UPPER)? - s.require_energy(&GAP_LOWER)?);
    }
    slope.sort_by(|a, b| a.0.total_cmp(&b.0));
    let curve = CubicHermite::new(coarse, gap, slope.into_iter().map(|p| p.1).collect())?;
    let theta: Vec<f64> = (0..grid.points)
        .map(|i| grid.start + (grid.end - grid.start) * i as f64 / (grid.points - 1) as f64)
        .collect();
    let omega_gap = theta.iter().map(|&t| curve.eval(t)).collect();
    GapProfile::from_gap(theta, omega_gap)
}

/// Gap for the time map: `scale`·(ω_gap − 2g) + 2g up to Θ_ex^(g) and 2g
/// beyond.
pub fn modified_gap(profile: &GapProfile, scale: f64) -> GapProfile {
    let two_g = 2.0 * profile.g;
    let mut out = profile.clone();
    for (k, w) in out.time_gap.iter_mut().enumerate() {
        *w = if profile.theta[k] <= profile.theta_ex_g {
            scale * (profile.omega_gap[k] - two_g) + two_g
        } else {
            two_g
        };
    }
    out
}

/// Shape factor in θ(s) = θ0 + (θ1 − θ0)·shape(s/s_f); 0 at the ends, 1 at
/// the midpoint.
pub fn shape(u: f64, a: f64) -> f64 {
    (((2.0 * PI * u).cos() - 1.0) + 0.5 * a * ((4.0 * PI * u).cos() - 1.0)) / -2.0
}

/// d shape / du.
pub fn shape_derivative(u: f64, a: f64) -> f64 {
    PI * (2.0 * PI * u).sin() + a * PI * (4.0 * PI * u).sin()
}

/// Mixing angle θ(s).
pub fn mixing_angle(s: f64, s_f: f64, theta0: f64, theta1: f64, a: f64) -> f64 {
    theta0 + (theta1 - theta0) * shape(s / s_f, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PulseLength {
    GateTime(f64),
    Phase(f64),
    /// Both given; they must agree to 1e-6 relative.
    Both {
        gate_time: f64,
        s_f: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSample {
    pub t: f64,
    pub theta_ex: f64,
    pub theta_dot_ex: f64,
}

/// Flux pulse Θ_ex(t) on [0, T_g], symmetric about T_g/2.
#[derive(Debug, Clone)]
pub struct PulseSchedule {
    pub gate_time: f64,
    pub shape_a: f64,
    pub s_f: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub samples: Vec<PulseSample>,
    /// g of the profile the pulse was built from (rad/s).
    pub g: f64,
    pub theta_ex_g: f64,
    map: Option<std::sync::Arc<HalfPulse>>,
    start_flux: f64,
}

/// First half of the pulse as u(τ) and Θ(r).
#[derive(Debug)]
struct HalfPulse {
    /// u as a function of τ = t/s_f on [0, τ_half].
    u_of_tau: CubicHermite,
    /// Θ_ex as a function of r = √(θ − θ1).
    flux_of_r: CubicHermite,
    /// Time-map gap as a function of Θ_ex.
    time_gap: CubicHermite,
    tau_half: f64,
    r0: f64,
    a: f64,
}

impl HalfPulse {
    fn r(&self, u: f64) -> (f64, f64) {
        let (s, c) = (PI * u).sin_cos();
        let q = 1.0 - 2.0 * self.a * s * s;
        let sq = q.sqrt();
        let r = self.r0 * c * sq;
        let dr = self.r0 * PI * (-s * sq - c * (2.0 * self.a * s * c) / sq);
        (r, dr)
    }

    /// Θ and dΘ/du at u ∈ [0, 1/2].
    fn flux(&self, u: f64) -> (f64, f64) {
        let (r, dr) = self.r(u);
        let (f, df) = self.flux_of_r.eval_with_derivative(r.max(0.0));
        (f, df * dr)
    }
}

impl PulseSchedule {
    /// Flux and flux rate at time `t` (clamped to [0, T_g]).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let Some(map) = &self.map else {
            return (self.start_flux, 0.0);
        };
        let half = 0.5 * self.gate_time;
        let (tt, sign) = if t <= half {
            (t.max(0.0), 1.0)
        } else {
            ((self.gate_time - t).max(0.0), -1.0)
        };
        let tau = (tt / self.s_f).min(map.tau_half);
        let u = map.u_of_tau.eval(tau).clamp(0.0, 0.5);
        let (flux, dflux_du) = map.flux(u);
        let du_dt = map.time_gap.eval(flux) / self.s_f;
        (flux, sign * dflux_du * du_dt)
    }

    pub fn theta_ex(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// Idle hold at `theta_ex` for `duration`.
    pub fn constant(theta_ex: f64, duration: f64, samples: usize) -> Self {
        let n = samples.max(2);
        Self {
            gate_time: duration,
            shape_a: 0.0,
            s_f: 0.0,
            theta0: 0.0,
            theta1: 0.0,
            samples: (0..n)
                .map(|k| PulseSample {
                    t: duration * k as f64 / (n - 1) as f64,
                    theta_ex,
                    theta_dot_ex: 0.0,
                })
                .collect(),
            g: 0.0,
            theta_ex_g: theta_ex,
            map: None,
            start_flux: theta_ex,
        }
    }

    fn resample(&mut self, count: usize) {
        let n = count.max(2);
        self.samples = (0..n)
            .map(|k| {
                let t = self.gate_time * k as f64 / (n - 1) as f64;
                let (theta_ex, theta_dot_ex) = self.eval(t);
                PulseSample {
                    t,
                    theta_ex,
                    theta_dot_ex,
                }
            })
            .collect();
    }
}

/// Panels per half pulse in the time-map quadrature.
const TIME_MAP_PANELS: usize = 4000;

/// Builds the CPHASE pulse from a gap profile. `samples` is the number of
/// uniform-time samples emitted (the schedule itself is continuous).
pub fn design_pulse(
    profile: &GapProfile,
    length: PulseLength,
    a: f64,
    samples: usize,
) -> Result<PulseSchedule> {
    if !a.is_finite() || 1.0 - 2.0 * a <= 0.0 {
        return Err(Error::Pulse(format!(
            "shape coefficient A = {a} makes θ(s) non-monotone"
        )));
    }
    let (theta0, theta1) = profile.end_angles();
    let n = profile.len();
    // r = √(θ_mix − θ1) decreases along the grid.
    let mut r: Vec<f64> = profile
        .theta_mix
        .iter()
        .map(|t| (t - theta1).max(0.0).sqrt())
        .collect();
    r.reverse();
    let mut flux: Vec<f64> = profile.theta.clone();
    flux.reverse();
    if let Some(k) = r.windows(2).position(|w| !(w[1] > w[0])) {
        let j = n - 2 - k;
        return Err(Error::Pulse(format!(
            "mixing angle not monotone on [{:.6}π, {:.6}π]",
            profile.theta[j] / PI,
            profile.theta[j + 1] / PI
        )));
    }
    let flux_of_r = CubicHermite::pchip(r.clone(), flux)?;
    let time_gap = CubicHermite::pchip(profile.theta.clone(), profile.time_gap.clone())?;
    let half = HalfPulse {
        u_of_tau: CubicHermite::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0])?,
        flux_of_r,
        time_gap,
        tau_half: 0.0,
        r0: theta0 - theta1,
        a,
    };
    let half = HalfPulse {
        r0: half.r0.max(0.0).sqrt(),
        ..half
    };

    // τ(u) = ∫ du / ω_time(Θ(u)) by composite Simpson.
    let m = TIME_MAP_PANELS;
    let h = 0.5 / m as f64;
    let inv = |u: f64| -> (f64, f64) {
        let f = half.flux(u).0;
        let w = half.time_gap.eval(f);
        (1.0 / w, w)
    };
    let mut taus = Vec::with_capacity(m + 1);
    let mut us = Vec::with_capacity(m + 1);
    let mut rates = Vec::with_capacity(m + 1);
    let (mut acc, (mut prev, w0)) = (0.0, inv(0.0));
    taus.push(0.0);
    us.push(0.0);
    rates.push(w0);
    for k in 0..m {
        let u0 = k as f64 * h;
        let (mid, _) = inv(u0 + 0.5 * h);
        let (end, w) = inv(u0 + h);
        acc += h / 6.0 * (prev + 4.0 * mid + end);
        prev = end;
        taus.push(acc);
        us.push(u0 + h);
        rates.push(w);
    }
    if !(acc.is_finite() && acc > 0.0) {
        return Err(Error::Pulse("time map is degenerate".into()));
    }
    let half = HalfPulse {
        u_of_tau: CubicHermite::new(taus, us, rates)?,
        tau_half: acc,
        ..half
    };
    let full_tau = 2.0 * acc;
    let (gate_time, s_f) = match length {
        PulseLength::GateTime(t) => (t, t / full_tau),
        PulseLength::Phase(s) => (s * full_tau, s),
        PulseLength::Both { gate_time, s_f } => {
            let implied = gate_time / full_tau;
            if (implied - s_f).abs() > 1e-6 * s_f.abs() {
                return Err(Error::Pulse(format!(
                    "T_g and s_f inconsistent: T_g implies s_f = {implied}, got {s_f}"
                )));
            }
            (gate_time, s_f)
        }
    };
    if !(gate_time.is_finite() && gate_time > 0.0) {
        return Err(Error::Pulse(format!(
            "gate time must be positive, got {gate_time}"
        )));
    }
    let mut schedule = PulseSchedule {
        gate_time,
        shape_a: a,
        s_f,
        theta0,
        theta1,
        samples: Vec::new(),
        g: profile.g,
        theta_ex_g: profile.theta_ex_g,
        map: Some(std::sync::Arc::new(half)),
        start_flux: profile.theta[0],
    };
    schedule.resample(samples);
    Ok(schedule)
}

/// P_e = ¼|∫₀^{s_f} (dθ/ds) e^{−is} ds|² by composite Simpson quadrature.
pub fn nonadiabatic_error<F: Fn(f64) -> f64>(dtheta_ds: F, s_f: f64) -> f64 {
    if s_f <= 0.0 {
        return 0.0;
    }
    let m = ((40.0 * s_f).ceil() as usize).max(2000);
    let h = s_f / m as f64;
    let f = |s: f64| Complex64::from_polar(dtheta_ds(s), -s);
    let mut acc = f(0.0) + f(s_f);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(k as f64 * h) * w;
    }
    let integral = acc * (h / 3.0);
    0.25 * integral.norm_sqr()
}

/// Nonadiabatic error of a designed schedule.
pub fn estimate_nonadiabatic_error(schedule: &PulseSchedule) -> f64 {
    let (s_f, a) = (schedule.s_f, schedule.shape_a);
    let d = schedule.theta1 - schedule.theta0;
    nonadiabatic_error(|s| d * shape_derivative(s / s_f, a) / s_f, s_f)
}
