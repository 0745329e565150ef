//! Circuit parameters of the four-transmon network.
//!
//! Transmons 1 and 2 are the qubits, 3 and 4 form the coupler. Junction 5
//! closes the coupler loop, so its phase is tied to the others by
//! φ5 = φ4 − φ3 − Φ_ex and its shunt capacitance C34 enters the kinetic
//! term through that constraint.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{ghz, E_CHARGE, FEMTO, HBAR};

/// Design values: capacitances and target transmon frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Capacitances in farads, upper triangle (`c[i][j]` for i ≤ j).
    /// Diagonal entries are shunts, off-diagonal ones couplings or parasitics.
    pub capacitance: [[f64; 4]; 4],
    /// Target transmon angular frequencies (rad/s).
    pub omega_design: [f64; 4],
    /// ω_J5 = j5_ratio · (ω_J3 + ω_J4) / 2.
    pub j5_ratio: f64,
}

impl CircuitParams {
    /// Two detuned qubits (5 and 5.7 GHz) with coupler transmons at 7.2 and
    /// 8.5 GHz, 60 fF shunts, 6 fF qubit-coupler capacitors, 1 fF across the
    /// loop junction and small parasitics between non-adjacent transmons.
    pub fn reference_design() -> Self {
        Self::from_ff_ghz(
            [
                [60.0, 0.025, 6.0, 0.05],
                [0.0, 60.0, 0.05, 6.0],
                [0.0, 0.0, 60.0, 1.0],
                [0.0, 0.0, 0.0, 60.0],
            ],
            [5.0, 5.7, 7.2, 8.5],
            0.25,
        )
    }

    /// Builds parameters from capacitances in fF and frequencies in GHz.
    /// Only the upper triangle of `c_ff` is read.
    pub fn from_ff_ghz(c_ff: [[f64; 4]; 4], f_ghz: [f64; 4], j5_ratio: f64) -> Self {
        let mut capacitance = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                capacitance[i][j] = c_ff[i][j] * FEMTO;
            }
        }
        Self {
            capacitance,
            omega_design: f_ghz.map(ghz),
            j5_ratio,
        }
    }

    pub fn c(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.capacitance[a][b]
    }

    pub fn with_omega(mut self, mode: usize, omega: f64) -> Self {
        self.omega_design[mode] = omega;
        self
    }

    /// Same circuit with every coupling and parasitic capacitance removed.
    pub fn decoupled(&self) -> Self {
        let mut out = self.clone();
        for i in 0..4 {
            for j in (i + 1)..4 {
                out.capacitance[i][j] = 0.0;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            let cii = self.capacitance[i][i];
            if !(cii.is_finite() && cii > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "shunt capacitance C{}{} must be positive, got {cii}",
                    i + 1,
                    i + 1
                )));
            }
            for j in (i + 1)..4 {
                let cij = self.capacitance[i][j];
                if !(cij.is_finite() && cij >= 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "capacitance C{}{} must be non-negative, got {cij}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        for (i, w) in self.omega_design.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "design frequency omega{} must be positive, got {w}",
                    i + 1
                )));
            }
        }
        let detuning = (self.omega_design[0] - self.omega_design[1]).abs();
        if detuning == 0.0 {
            return Err(Error::InvalidParams(
                "qubit frequencies must be detuned".into(),
            ));
        }
        if !(self.j5_ratio.is_finite() && self.j5_ratio >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "j5_ratio must be non-negative, got {}",
                self.j5_ratio
            )));
        }
        Ok(())
    }
}

/// Parameters derived from the design values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Capacitance matrix (F).
    pub m: Matrix4<f64>,
    /// q = q_coeff · dΦ_ex/dt (F).
    pub q_coeff: Vector4<f64>,
    /// Charging-frequency matrix, ħW = (e²/2) M⁻¹ (rad/s).
    pub w: Matrix4<f64>,
    /// ħω_C34 = e²/(2 C34) (rad/s); infinite when C34 = 0.
    pub omega_c34: f64,
    /// Josephson frequencies of junctions 1..5 (rad/s).
    pub omega_j: [f64; 5],
    /// Critical currents of junctions 1..5 (A).
    pub critical_current: [f64; 5],
    /// Bosonic coupling rates g_ij (rad/s), zero diagonal.
    pub g: Matrix4<f64>,
    /// Kerr coefficients W_ii (rad/s).
    pub anharmonicity: [f64; 4],
    /// Design frequencies the parameters were derived from (rad/s).
    pub omega_design: [f64; 4],
}

impl DerivedParams {
    pub fn from_circuit(params: &CircuitParams) -> Result<Self> {
        params.validate()?;
        let (m, q_coeff) = assemble_capacitance_matrix(params)?;
        let (w, omega_c34) = derive_charging_matrix(&m, params.c(2, 3))?;
        let (omega_j, critical_current) =
            derive_josephson_parameters(&params.omega_design, &w, params.j5_ratio)?;
        if omega_j[4] >= omega_j[2].min(omega_j[3]) {
            return Err(Error::InvalidParams(format!(
                "loop junction must be weaker than the coupler transmons (omega_J5 = {:.4e}, omega_J3 = {:.4e}, omega_J4 = {:.4e})",
                omega_j[4], omega_j[2], omega_j[3]
            )));
        }
        let g = bosonic_coupling_rates(&params.omega_design, &w);
        let anharmonicity = [w[(0, 0)], w[(1, 1)], w[(2, 2)], w[(3, 3)]];
        Ok(Self {
            m,
            q_coeff,
            w,
            omega_c34,
            omega_j,
            critical_current,
            g,
            anharmonicity,
            omega_design: params.omega_design,
        })
    }

    /// Row vector (0 0 −1 1)·W multiplying n in the flux-rate drive term.
    pub fn drive_weights(&self) -> [f64; 4] {
        std::array::from_fn(|j| self.w[(3, j)] - self.w[(2, j)])
    }

    /// Copy with ω_J5 and all off-diagonal W set to zero: four independent
    /// transmons.
    pub fn uncoupled(&self) -> Self {
        let mut out = self.clone();
        out.omega_j[4] = 0.0;
        out.critical_current[4] = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    out.w[(i, j)] = 0.0;
                    out.g[(i, j)] = 0.0;
                }
            }
        }
        out
    }
}

/// Capacitance matrix from the kinetic energy with φ5 = φ4 − φ3 − Φ_ex.
///
/// Returns `(M, q_coeff)` in farads; the kinetic term is
/// ½ φ̇ᵀMφ̇ − qᵀφ̇ with q = q_coeff · Φ̇_ex.
pub fn assemble_capacitance_matrix(params: &CircuitParams) -> Result<(Matrix4<f64>, Vector4<f64>)> {
    let mut m = Matrix4::zeros();
    for i in 0..4 {
        m[(i, i)] = params.c(i, i);
    }
    // Direct pairs (i, j) with i ∈ {1, 2}; the 3-4 pair enters only via φ5.
    let mut add_pair = |i: usize, j: usize, c: f64| {
        m[(i, i)] += c;
        m[(j, j)] += c;
        m[(i, j)] -= c;
        m[(j, i)] -= c;
    };
    for i in 0..2 {
        for j in (i + 1)..4 {
            add_pair(i, j, params.c(i, j));
        }
    }
    let c34 = params.c(2, 3);
    add_pair(2, 3, c34);
    let q_coeff = Vector4::new(0.0, 0.0, -c34, c34);
    if m.cholesky().is_none() {
        return Err(Error::IllPosedCircuit(
            "capacitance matrix is not positive definite".into(),
        ));
    }
    Ok((m, q_coeff))
}

/// ħW = (e²/2)M⁻¹ and ħω_C34 = e²/(2C34).
pub fn derive_charging_matrix(m: &Matrix4<f64>, c34: f64) -> Result<(Matrix4<f64>, f64)> {
    let chol = m.cholesky().ok_or_else(|| {
        Error::IllPosedCircuit("capacitance matrix is singular or indefinite".into())
    })?;
    let inv = chol.inverse();
    let scale = E_CHARGE * E_CHARGE / (2.0 * HBAR);
    let mut w = inv * scale;
    // Symmetrize away rounding from the triangular solves.
    w = (w + w.transpose()) * 0.5;
    let omega_c34 = if c34 > 0.0 {
        scale / c34
    } else {
        f64::INFINITY
    };
    Ok((w, omega_c34))
}

/// Inverts ω_i = √(8 W_ii ω_Ji) − W_ii for ω_J1..ω_J4 and applies the
/// ω_J5 rule. Critical currents follow from ħω_J = φ0 I_c.
pub fn derive_josephson_parameters(
    omega_design: &[f64; 4],
    w: &Matrix4<f64>,
    j5_ratio: f64,
) -> Result<([f64; 5], [f64; 5])> {
    let mut omega_j = [0.0; 5];
    for i in 0..4 {
        let wii = w[(i, i)];
        let s = omega_design[i] + wii;
        if !(s > 0.0 && wii > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega{} + W{}{} must be positive",
                i + 1,
                i + 1,
                i + 1
            )));
        }
        omega_j[i] = s * s / (8.0 * wii);
    }
    omega_j[4] = j5_ratio * 0.5 * (omega_j[2] + omega_j[3]);
    // I_c = ħω_J/φ0 = 2e·ω_J
    let critical_current = omega_j.map(|oj| 2.0 * E_CHARGE * oj);
    Ok((omega_j, critical_current))
}

/// g_ij = (W_ij/2)·√[(ω_i + W_ii)(ω_j + W_jj)/(W_ii W_jj)].
pub fn bosonic_coupling_rates(omega_design: &[f64; 4], w: &Matrix4<f64>) -> Matrix4<f64> {
    let mut g = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            let (wii, wjj) = (w[(i, i)], w[(j, j)]);
            g[(i, j)] = 0.5
                * w[(i, j)]
                * ((omega_design[i] + wii) * (omega_design[j] + wjj) / (wii * wjj)).sqrt();
        }
    }
    g
}

/// Second-order expansion of the coupler potential around its minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalCouplerReport {
    pub theta_ex: f64,
    /// Minimizing phases (φ3⁰, φ4⁰) (rad).
    pub phi_min: [f64; 2],
    /// Hessian of V_c/ħ at the minimum (rad/s); V_c ≈ (ħ/2) δᵀ·quad_form·δ
    /// with δ_i = φ_i − φ_i⁰.
    pub quad_form: [[f64; 2]; 2],
    /// Flux at which the off-diagonal element vanishes (rad).
    pub theta_ex_0: f64,
}

fn coupler_potential(j: [f64; 3], theta: f64, p: Vector2<f64>) -> f64 {
    -j[0] * p[0].cos() - j[1] * p[1].cos() - j[2] * (p[1] - p[0] - theta).cos()
}

fn coupler_gradient(j: [f64; 3], theta: f64, p: Vector2<f64>) -> Vector2<f64> {
    let s = (p[1] - p[0] - theta).sin();
    Vector2::new(j[0] * p[0].sin() - j[2] * s, j[1] * p[1].sin() + j[2] * s)
}

fn coupler_hessian(j: [f64; 3], theta: f64, p: Vector2<f64>) -> Matrix2<f64> {
    let c = (p[1] - p[0] - theta).cos();
    Matrix2::new(
        j[0] * p[0].cos() + j[2] * c,
        -j[2] * c,
        -j[2] * c,
        j[1] * p[1].cos() + j[2] * c,
    )
}

/// Minimizes V_c(φ3, φ4)/ħ by damped Newton iteration from (0, 0).
pub fn minimize_coupler_potential(
    omega_j3: f64,
    omega_j4: f64,
    omega_j5: f64,
    theta_ex: f64,
) -> Result<[f64; 2]> {
    let j = [omega_j3, omega_j4, omega_j5];
    let scale = if omega_j5 > 0.0 {
        omega_j5
    } else {
        omega_j3.max(omega_j4)
    };
    let tol = 1e-12 * scale;
    let mut p = Vector2::zeros();
    const MAX_ITER: usize = 200;
    for _ in 0..MAX_ITER {
        let grad = coupler_gradient(j, theta_ex, p);
        if grad.norm() < tol {
            return Ok([p[0], p[1]]);
        }
        let hess = coupler_hessian(j, theta_ex, p);
        let dir = match hess.cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -grad / scale,
        };
        let v0 = coupler_potential(j, theta_ex, p);
        let mut step = 1.0;
        let mut next = p + dir;
        while coupler_potential(j, theta_ex, next) > v0 + 1e-15 * scale && step > 1e-8 {
            step *= 0.5;
            next = p + dir * step;
        }
        p = next;
    }
    let grad = coupler_gradient(j, theta_ex, p);
    if grad.norm() < 1e3 * tol {
        return Ok([p[0], p[1]]);
    }
    Err(Error::NonConvergence {
        what: "coupler potential minimization",
        iterations: MAX_ITER,
        residuals: vec![grad.norm(), p[0], p[1]],
    })
}

fn off_diagonal_at(j: [f64; 3], theta: f64) -> Result<f64> {
    let p = minimize_coupler_potential(j[0], j[1], j[2], theta)?;
    Ok(-j[2] * (p[1] - p[0] - theta).cos())
}

/// Classical second-order analysis of the coupler potential at `theta_ex`,
/// including the decoupling flux where the cross term vanishes.
pub fn classical_coupler_analysis(
    omega_j3: f64,
    omega_j4: f64,
    omega_j5: f64,
    theta_ex: f64,
) -> Result<ClassicalCouplerReport> {
    if !(omega_j3 > 0.0 && omega_j4 > 0.0 && omega_j5 > 0.0) {
        return Err(Error::InvalidParams(
            "Josephson frequencies must be positive".into(),
        ));
    }
    let j = [omega_j3, omega_j4, omega_j5];
    let phi = minimize_coupler_potential(omega_j3, omega_j4, omega_j5, theta_ex)?;
    let h = coupler_hessian(j, theta_ex, Vector2::new(phi[0], phi[1]));
    let theta_ex_0 = decoupling_flux(j)?;
    Ok(ClassicalCouplerReport {
        theta_ex,
        phi_min: phi,
        quad_form: [[h[(0, 0)], h[(0, 1)]], [h[(1, 0)], h[(1, 1)]]],
        theta_ex_0,
    })
}

/// Bisection on the sign of the off-diagonal element over Θ_ex ∈ [0, π].
fn decoupling_flux(j: [f64; 3]) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = std::f64::consts::PI;
    let f_lo = off_diagonal_at(j, lo)?;
    let f_hi = off_diagonal_at(j, hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NonConvergence {
            what: "decoupling flux bracket",
            iterations: 0,
            residuals: vec![f_lo, f_hi],
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = off_diagonal_at(j, mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
