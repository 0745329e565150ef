//! Time evolution under a flux-driven Hamiltonian.
//!
//! Each step applies one or two exponentials of fixed Hermitian operators,
//! evaluated matrix-free with a Lanczos approximation of exp(−iτA)v. The
//! global accuracy is certified by repeating the run with half the step and
//! comparing final states.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charge::{HamiltonianFamily, HamiltonianMix, LinearOperator};
use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;

/// A Hamiltonian H(t) that can form weighted sums Σ w_k H(t_k).
pub trait Drive: Sync {
    type Op: LinearOperator;
    fn dim(&self) -> usize;
    fn combined(&self, parts: &[(f64, f64)]) -> Self::Op;
}

/// H(t) = H(Θ_ex(t), Θ̇_ex(t)) for a flux trajectory.
pub struct FluxDrive<'a, F> {
    pub family: &'a HamiltonianFamily,
    pub flux: F,
}

impl<'a, F> FluxDrive<'a, F>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    pub fn new(family: &'a HamiltonianFamily, flux: F) -> Self {
        Self { family, flux }
    }
}

impl<F> Drive for FluxDrive<'_, F>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    type Op = HamiltonianMix;

    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn combined(&self, parts: &[(f64, f64)]) -> HamiltonianMix {
        let p: Vec<(f64, f64, f64)> = parts
            .iter()
            .map(|&(w, t)| {
                let (theta, rate) = (self.flux)(t);
                (w, theta, rate)
            })
            .collect();
        self.family.mix(&p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// exp(−iΔt H(t + Δt/2)), second order.
    Midpoint,
    /// Two-exponential commutator-free Magnus integrator, fourth order.
    Magnus4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    /// Initial step (s); the run halves it until certified.
    pub dt: f64,
    pub scheme: Scheme,
    /// Bound on ‖ψ_Δt − ψ_Δt/2‖ at the final time.
    pub certificate_tol: f64,
    /// Bound on |‖ψ(t)‖ − 1| along the run.
    pub norm_tol: f64,
    /// Per-exponential Lanczos error target.
    pub krylov_tol: f64,
    pub max_krylov: usize,
    pub max_halvings: usize,
    /// Run the Δt/2 comparison; without it the first Δt is accepted as is.
    pub certify: bool,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self {
            dt: 0.02e-9,
            scheme: Scheme::Magnus4,
            certificate_tol: 1e-7,
            norm_tol: 1e-6,
            krylov_tol: 1e-11,
            max_krylov: 60,
            max_halvings: 5,
            certify: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub states: Vec<Vec<C64>>,
    /// Step of the returned states (s).
    pub dt: f64,
    pub steps: usize,
    /// max over inputs of ‖ψ_Δt − ψ_Δt/2‖, when certified.
    pub certificate: Option<f64>,
    pub max_norm_drift: f64,
    pub matvecs: usize,
}

/// exp(−iτA)·v by Lanczos. Returns the result and the Krylov dimension
/// used, or `None` if `max_dim` steps do not reach `tol`.
pub fn expm_krylov<A: LinearOperator + ?Sized>(
    op: &A,
    v: &[C64],
    tau: f64,
    max_dim: usize,
    tol: f64,
) -> Option<(Vec<C64>, usize)> {
    let dim = v.len();
    let beta0 = linalg::norm(v);
    if beta0 == 0.0 || tau == 0.0 {
        return Some((v.to_vec(), 0));
    }
    let max_dim = max_dim.min(dim).max(1);
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(max_dim + 1);
    let mut first = v.to_vec();
    linalg::scale(C64::new(1.0 / beta0, 0.0), &mut first);
    q.push(first);
    let mut alpha = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
    let mut w = vec![C64::default(); dim];
    for j in 0..max_dim {
        op.apply_into(&q[j], &mut w);
        let a = linalg::dot(&q[j], &w).re;
        linalg::axpy(C64::new(-a, 0.0), &q[j], &mut w);
        if j > 0 {
            linalg::axpy(C64::new(-beta[j - 1], 0.0), &q[j - 1], &mut w);
        }
        // Second pass against the last two vectors.
        let c = linalg::dot(&q[j], &w);
        linalg::axpy(-c, &q[j], &mut w);
        if j > 0 {
            let c = linalg::dot(&q[j - 1], &w);
            linalg::axpy(-c, &q[j - 1], &mut w);
        }
        alpha.push(a);
        let b = linalg::norm(&w);
        let m = j + 1;
        let breakdown = b <= 1e-14 * a.abs().max(1.0);
        if breakdown || m == max_dim || (m >= 6 && m % 3 == 0) {
            let c = tridiagonal_exp_e1(&alpha, &beta, tau);
            let err = beta0 * (tau * b).abs() * c[m - 1].norm();
            if breakdown || err <= tol {
                let mut out = vec![C64::default(); dim];
                for (k, qk) in q.iter().enumerate().take(m) {
                    linalg::axpy(c[k] * beta0, qk, &mut out);
                }
                return Some((out, m));
            }
            if m == max_dim {
                return None;
            }
        }
        beta.push(b);
        let mut next = w.clone();
        linalg::scale(C64::new(1.0 / b, 0.0), &mut next);
        q.push(next);
    }
    None
}

/// exp(−iτT)·e₁ for the symmetric tridiagonal T(α, β).
fn tridiagonal_exp_e1(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let (vals, vecs) = linalg::symmetric_eigh(&t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| C64::from_polar(vecs[(i, k)] * vecs[(0, k)], -tau * vals[k]))
                .sum()
        })
        .collect()
}

/// exp(−iτA)v, splitting τ until each piece converges.
fn expm_split<A: LinearOperator + ?Sized>(
    op: &A,
    v: &[C64],
    tau: f64,
    settings: &PropagationSettings,
    depth: usize,
    matvecs: &mut usize,
) -> Result<Vec<C64>> {
    if let Some((out, m)) = expm_krylov(op, v, tau, settings.max_krylov, settings.krylov_tol) {
        *matvecs += m;
        return Ok(out);
    }
    *matvecs += settings.max_krylov;
    if depth >= 12 {
        return Err(Error::Propagation(
            "Krylov exponential failed to converge".into(),
        ));
    }
    let half = expm_split(op, v, 0.5 * tau, settings, depth + 1, matvecs)?;
    expm_split(op, &half, 0.5 * tau, settings, depth + 1, matvecs)
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// One step ψ(t) → ψ(t + Δt).
fn step<D: Drive>(
    drive: &D,
    psi: &[C64],
    t: f64,
    dt: f64,
    settings: &PropagationSettings,
    matvecs: &mut usize,
) -> Result<Vec<C64>> {
    match settings.scheme {
        Scheme::Midpoint => {
            let op = drive.combined(&[(1.0, t + 0.5 * dt)]);
            expm_split(&op, psi, dt, settings, 0, matvecs)
        }
        Scheme::Magnus4 => {
            let (c1, c2) = (0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0);
            let (a1, a2) = ((3.0 - 2.0 * SQRT3) / 12.0, (3.0 + 2.0 * SQRT3) / 12.0);
            let (t1, t2) = (t + c1 * dt, t + c2 * dt);
            let first = drive.combined(&[(a2, t1), (a1, t2)]);
            let mid = expm_split(&first, psi, dt, settings, 0, matvecs)?;
            let second = drive.combined(&[(a1, t1), (a2, t2)]);
            expm_split(&second, &mid, dt, settings, 0, matvecs)
        }
    }
}

/// Propagates on a uniform grid of `steps` steps over [0, duration].
pub fn propagate_fixed<D: Drive>(
    drive: &D,
    psi0: &[C64],
    duration: f64,
    steps: usize,
    settings: &PropagationSettings,
) -> Result<(Vec<C64>, f64, usize)> {
    if psi0.len() != drive.dim() {
        return Err(Error::DimensionMismatch {
            expected: drive.dim(),
            found: psi0.len(),
        });
    }
    let n0 = linalg::norm(psi0);
    let mut psi = psi0.to_vec();
    let mut drift: f64 = 0.0;
    let mut matvecs = 0;
    if steps == 0 || duration == 0.0 {
        return Ok((psi, 0.0, 0));
    }
    let dt = duration / steps as f64;
    for k in 0..steps {
        psi = step(drive, &psi, k as f64 * dt, dt, settings, &mut matvecs)?;
        let d = (linalg::norm(&psi) - n0).abs() / n0;
        drift = drift.max(d);
        if d > settings.norm_tol {
            return Err(Error::Propagation(format!(
                "norm drift {d:.3e} at t = {:.6} ns",
                (k + 1) as f64 * dt * 1e9
            )));
        }
    }
    Ok((psi, drift, matvecs))
}

fn steps_for(duration: f64, dt: f64) -> usize {
    if duration <= 0.0 {
        0
    } else {
        (duration / dt).ceil().max(1.0) as usize
    }
}

/// Propagates every input over [0, duration]. With certification the step
/// is halved until all final states move by less than the certificate
/// tolerance; the finer run is returned.
pub fn propagate<D: Drive>(
    drive: &D,
    inputs: &[Vec<C64>],
    duration: f64,
    settings: &PropagationSettings,
) -> Result<Propagation> {
    if !(settings.dt > 0.0) {
        return Err(Error::InvalidParams("time step must be positive".into()));
    }
    let run = |steps: usize| -> Result<(Vec<Vec<C64>>, f64, usize)> {
        let out: Vec<_> = inputs
            .par_iter()
            .map(|psi| propagate_fixed(drive, psi, duration, steps, settings))
            .collect::<Result<_>>()?;
        let drift = out.iter().fold(0.0f64, |a, o| a.max(o.1));
        let mv = out.iter().map(|o| o.2).sum();
        Ok((out.into_iter().map(|o| o.0).collect(), drift, mv))
    };
    let mut steps = steps_for(duration, settings.dt);
    let (mut states, mut drift, mut matvecs) = run(steps)?;
    if !settings.certify || steps == 0 {
        return Ok(Propagation {
            states,
            dt: if steps == 0 {
                0.0
            } else {
                duration / steps as f64
            },
            steps,
            certificate: if steps == 0 { Some(0.0) } else { None },
            max_norm_drift: drift,
            matvecs,
        });
    }
    let mut last = f64::INFINITY;
    for _ in 0..=settings.max_halvings {
        let (fine, d, mv) = run(2 * steps)?;
        matvecs += mv;
        last = states
            .iter()
            .zip(&fine)
            .map(|(a, b)| {
                let mut diff = a.clone();
                linalg::axpy(C64::new(-1.0, 0.0), b, &mut diff);
                linalg::norm(&diff)
            })
            .fold(0.0, f64::max);
        steps *= 2;
        states = fine;
        drift = d;
        if last < settings.certificate_tol {
            return Ok(Propagation {
                states,
                dt: duration / steps as f64,
                steps,
                certificate: Some(last),
                max_norm_drift: drift,
                matvecs,
            });
        }
    }
    Err(Error::Propagation(format!(
        "step halving did not certify: last change {last:.3e} at dt = {:.3e} ns",
        duration / steps as f64 * 1e9
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitParams, DerivedParams};
    use std::f64::consts::PI;

    struct DenseOp(DMatrix<C64>);

    impl LinearOperator for DenseOp {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply_into(&self, x: &[C64], y: &mut [C64]) {
            let v = &self.0 * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        }
    }

    struct DenseDrive<F: Fn(f64) -> DMatrix<C64> + Sync>(usize, F);

    impl<F: Fn(f64) -> DMatrix<C64> + Sync> Drive for DenseDrive<F> {
        type Op = DenseOp;
        fn dim(&self) -> usize {
            self.0
        }
        fn combined(&self, parts: &[(f64, f64)]) -> DenseOp {
            let mut m = DMatrix::zeros(self.0, self.0);
            for &(w, t) in parts {
                m += (self.1)(t) * C64::new(w, 0.0);
            }
            DenseOp(m)
        }
    }

    fn unit(dim: usize, k: usize) -> Vec<C64> {
        let mut v = vec![C64::default(); dim];
        v[k] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn krylov_matches_eigendecomposition() {
        let n = 40;
        let h = DMatrix::<C64>::from_fn(n, n, |i, j| {
            let x = ((i * 7 + j * 3) % 11) as f64 - 5.0;
            let y = ((i * 5 + j * 2) % 7) as f64 - 3.0;
            if i == j {
                C64::new(x, 0.0)
            } else if i < j {
                C64::new(x, y) * 0.3
            } else {
                C64::default()
            }
        });
        let h = &h + h.adjoint() - DMatrix::from_diagonal(&h.diagonal());
        let (vals, vecs) = linalg::hermitian_eigh(&h);
        let v: Vec<C64> = (0..n).map(|i| C64::new((i as f64).cos(), 0.2)).collect();
        let tau = 0.7;
        let (got, _) = expm_krylov(&DenseOp(h.clone()), &v, tau, 40, 1e-13).unwrap();
        let vv = nalgebra::DVector::from_column_slice(&v);
        let coeff = vecs.adjoint() * vv;
        let phased = nalgebra::DVector::from_iterator(
            n,
            coeff
                .iter()
                .zip(&vals)
                .map(|(c, e)| c * C64::from_polar(1.0, -tau * e)),
        );
        let want = vecs * phased;
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let drive = DenseDrive(5, |_| DMatrix::zeros(5, 5));
        let psi0 = vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
            C64::default(),
            C64::default(),
            C64::default(),
        ];
        let p = propagate(
            &drive,
            &[psi0.clone()],
            3e-9,
            &PropagationSettings::default(),
        )
        .unwrap();
        for (a, b) in p.states[0].iter().zip(&psi0) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn stationary_state_only_acquires_phase() {
        let d = DerivedParams::from_circuit(&CircuitParams::reference_design()).unwrap();
        let fam = HamiltonianFamily::new(&d, 2).unwrap();
        let theta = 0.61 * PI;
        let h = fam.at(theta, 0.0).densify().unwrap();
        let (vals, vecs) = linalg::hermitian_eigh(&h);
        let psi0: Vec<C64> = vecs.column(1).iter().copied().collect();
        let drive = FluxDrive::new(&fam, |_| (theta, 0.0));
        let t = 1.3e-9;
        let p = propagate(&drive, &[psi0.clone()], t, &PropagationSettings::default()).unwrap();
        let phase = C64::from_polar(1.0, -vals[1] * t);
        for (a, b) in p.states[0].iter().zip(&psi0) {
            assert!((a - b * phase).norm() < 1e-8);
        }
    }

    #[test]
    fn flux_ramp_matches_dense_time_ordered_product() {
        let d = DerivedParams::from_circuit(&CircuitParams::reference_design()).unwrap();
        let fam = HamiltonianFamily::new(&d, 2).unwrap();
        let duration = 0.25e-9;
        let (amp, w) = (0.08 * PI, 2.0 * PI / duration);
        let flux = move |t: f64| {
            (
                0.61 * PI + amp * (1.0 - (w * t).cos()),
                amp * w * (w * t).sin(),
            )
        };
        let dim = fam.dim();
        let psi0 = unit(dim, fam.layout().index([2, 2, 2, 2]));
        let drive = FluxDrive::new(&fam, flux);
        let p = propagate(
            &drive,
            &[psi0.clone()],
            duration,
            &PropagationSettings::default(),
        )
        .unwrap();

        // Oracle: dense midpoint product at Δt = 1e-4 ns, each factor by
        // a Taylor series of the dense matrix. H is affine in
        // (cos Θ, sin Θ, Θ̇), so four dense samples span it.
        let a = fam.at(0.0, 0.0).densify().unwrap();
        let b = fam.at(PI, 0.0).densify().unwrap();
        let e = fam.at(0.5 * PI, 0.0).densify().unwrap();
        let f = fam.at(0.0, 1e9).densify().unwrap();
        let half = C64::new(0.5, 0.0);
        let h0 = (&a + &b) * half;
        let hc = (&a - &b) * half;
        let hs = &e - &h0;
        let hd = (&f - &a) * C64::new(1e-9, 0.0);
        let steps = 2500;
        let dt = duration / steps as f64;
        // Row-major copies for a plain dense mat-vec.
        let rows = |m: &DMatrix<C64>| m.transpose().as_slice().to_vec();
        let (h0, hc, hs, hd) = (rows(&h0), rows(&hc), rows(&hs), rows(&hd));
        let mut h = vec![C64::default(); dim * dim];
        let mut psi = psi0.clone();
        let mut term = vec![C64::default(); dim];
        let mut next = vec![C64::default(); dim];
        for k in 0..steps {
            let (theta, rate) = flux((k as f64 + 0.5) * dt);
            let (st, ct) = theta.sin_cos();
            for (i, hi) in h.iter_mut().enumerate() {
                *hi = (h0[i] + hc[i] * ct + hs[i] * st + hd[i] * rate) * C64::new(0.0, -dt);
            }
            term.copy_from_slice(&psi);
            for n in 1..30 {
                for (r, out) in next.iter_mut().enumerate() {
                    let row = &h[r * dim..(r + 1) * dim];
                    *out = row.iter().zip(&term).map(|(a, b)| a * b).sum::<C64>() / n as f64;
                }
                std::mem::swap(&mut term, &mut next);
                linalg::axpy(C64::new(1.0, 0.0), &term, &mut psi);
                if linalg::norm(&term) < 1e-18 {
                    break;
                }
            }
        }
        let diff: f64 = p.states[0]
            .iter()
            .zip(&psi)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-7, "{diff}");
    }

    #[test]
    fn midpoint_and_magnus_agree() {
        let d = DerivedParams::from_circuit(&CircuitParams::reference_design()).unwrap();
        let fam = HamiltonianFamily::new(&d, 1).unwrap();
        let flux = |t: f64| (0.61 * PI + 2e8 * t * PI, 2e8 * PI);
        let drive = FluxDrive::new(&fam, flux);
        let psi0 = unit(fam.dim(), 40);
        let mut s = PropagationSettings {
            scheme: Scheme::Midpoint,
            dt: 0.002e-9,
            ..Default::default()
        };
        let a = propagate(&drive, &[psi0.clone()], 1e-9, &s).unwrap();
        s.scheme = Scheme::Magnus4;
        s.dt = 0.02e-9;
        let b = propagate(&drive, &[psi0], 1e-9, &s).unwrap();
        let diff: f64 = a.states[0]
            .iter()
            .zip(&b.states[0])
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 3e-7, "{diff}");
        assert!(b.certificate.unwrap() < 1e-7);
    }
}
