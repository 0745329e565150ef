//! Four-transmon Hamiltonian in the truncated Cooper-pair-number basis.
//!
//! Each transmon keeps charge states n = −N..N, so a single mode has
//! dimension d = 2N + 1 and the full space d⁴. Basis index ordering is
//! `((a1·d + a2)·d + a3)·d + a4` with a_m = n_m + N: mode 4 varies fastest.
//! Every Kronecker embedding in the crate goes through [`ModeLayout`].
//!
//! H/ħ = 4 nᵀWn + (Θ̇/ω_C34)(0 0 −1 1)W n − Σ_{i≤4} ω_Ji cos φ_i
//!       − ω_J5 cos(φ4 − φ3 − Θ)
//!
//! with the loop term expanded by the addition theorem into products of
//! single-mode cos φ and sin φ matrices.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::circuit::DerivedParams;
use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;

/// Largest dimension [`HamiltonianAction::densify`] will materialize.
pub const DENSE_GUARD: usize = 10_000;

/// Matrix-free linear operator on complex vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// y = A·x (overwrites `y`).
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
}

/// Complex amplitudes over the (2N+1)⁴ charge basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<C64>);

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![C64::default(); dim])
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_vec(v: Vec<C64>) -> Self {
        Self(v)
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> C64 {
        linalg::dot(&self.0, &other.0)
    }
}

impl Deref for StateVector {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

/// Index arithmetic for the four-mode tensor product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLayout {
    pub cutoff: usize,
    pub d: usize,
}

impl ModeLayout {
    pub fn new(cutoff: usize) -> Self {
        Self {
            cutoff,
            d: 2 * cutoff + 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.d.pow(4)
    }

    /// Distance in the flat index between neighbouring states of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.d.pow(3 - mode as u32)
    }

    pub fn index(&self, a: [usize; 4]) -> usize {
        ((a[0] * self.d + a[1]) * self.d + a[2]) * self.d + a[3]
    }

    pub fn digits(&self, mut index: usize) -> [usize; 4] {
        let mut a = [0; 4];
        for m in (0..4).rev() {
            a[m] = index % self.d;
            index /= self.d;
        }
        a
    }

    /// Charge numbers (−N..N) of a flat index.
    pub fn charges(&self, index: usize) -> [i64; 4] {
        self.digits(index).map(|a| a as i64 - self.cutoff as i64)
    }

    /// Kronecker product of four single-mode column vectors.
    pub fn product_state(&self, factors: [&[C64]; 4]) -> Vec<C64> {
        let d = self.d;
        let mut out = Vec::with_capacity(self.dim());
        for a0 in 0..d {
            for a1 in 0..d {
                let c01 = factors[0][a0] * factors[1][a1];
                for a2 in 0..d {
                    let c012 = c01 * factors[2][a2];
                    out.extend(factors[3].iter().map(|f| c012 * f));
                }
            }
        }
        out
    }

    /// y = op_mode · x for a single-mode tridiagonal `op`.
    pub fn apply_tridiagonal(
        &self,
        op: &Tridiagonal,
        mode: usize,
        x: &[C64],
        y: &mut [C64],
    ) -> usize {
        let d = self.d;
        let s = self.stride(mode);
        let block = s * d;
        let mut ops = 0;
        for (xb, yb) in x.chunks_exact(block).zip(y.chunks_exact_mut(block)) {
            for a in 0..d {
                let yrow = &mut yb[a * s..(a + 1) * s];
                let dg = op.diag[a];
                let xrow = &xb[a * s..(a + 1) * s];
                for (yi, xi) in yrow.iter_mut().zip(xrow) {
                    *yi = dg * xi;
                }
                ops += s;
                if a > 0 {
                    let c = op.lower[a - 1];
                    if c != C64::default() {
                        linalg::axpy(c, &xb[(a - 1) * s..a * s], yrow);
                        ops += s;
                    }
                }
                if a + 1 < d {
                    let c = op.upper[a];
                    if c != C64::default() {
                        linalg::axpy(c, &xb[(a + 1) * s..(a + 2) * s], yrow);
                        ops += s;
                    }
                }
            }
        }
        ops
    }
}

/// Tridiagonal single-mode matrix: `lower[i]` is entry (i+1, i), `upper[i]`
/// is entry (i, i+1).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<C64>,
    pub lower: Vec<C64>,
    pub upper: Vec<C64>,
}

impl Tridiagonal {
    pub fn identity(d: usize) -> Self {
        Self {
            diag: vec![C64::new(1.0, 0.0); d],
            lower: vec![C64::default(); d - 1],
            upper: vec![C64::default(); d - 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = self.diag[i];
        }
        for i in 0..d - 1 {
            m[(i + 1, i)] = self.lower[i];
            m[(i, i + 1)] = self.upper[i];
        }
        m
    }
}

/// Charge, cosine and sine operators of one transmon truncated at ±N
/// Cooper pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeOperators {
    pub cutoff: usize,
    pub n: Tridiagonal,
    pub n2: Tridiagonal,
    pub cos: Tridiagonal,
    pub sin: Tridiagonal,
}

impl SingleModeOperators {
    pub fn dim(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn factor(&self, f: Factor) -> Option<&Tridiagonal> {
        match f {
            Factor::Identity => None,
            Factor::Charge => Some(&self.n),
            Factor::ChargeSq => Some(&self.n2),
            Factor::Cos => Some(&self.cos),
            Factor::Sin => Some(&self.sin),
        }
    }
}

/// n̂ = diag(−N..N); cos φ̂ has ½ on both first off-diagonals; sin φ̂ has
/// −1/(2i) above and +1/(2i) below the diagonal.
pub fn build_single_mode_operators(cutoff: usize) -> Result<SingleModeOperators> {
    if cutoff < 1 {
        return Err(Error::InvalidParams(
            "charge cutoff must be at least 1".into(),
        ));
    }
    let d = 2 * cutoff + 1;
    let zero = vec![C64::default(); d - 1];
    let charges: Vec<C64> = (0..d)
        .map(|a| C64::new(a as f64 - cutoff as f64, 0.0))
        .collect();
    let n = Tridiagonal {
        diag: charges.clone(),
        lower: zero.clone(),
        upper: zero.clone(),
    };
    let n2 = Tridiagonal {
        diag: charges.iter().map(|c| c * c).collect(),
        lower: zero.clone(),
        upper: zero.clone(),
    };
    let cos = Tridiagonal {
        diag: vec![C64::default(); d],
        lower: vec![C64::new(0.5, 0.0); d - 1],
        upper: vec![C64::new(0.5, 0.0); d - 1],
    };
    // 1/(2i) = −i/2
    let half_over_i = C64::new(0.0, -0.5);
    let sin = Tridiagonal {
        diag: vec![C64::default(); d],
        lower: vec![half_over_i; d - 1],
        upper: vec![-half_over_i; d - 1],
    };
    Ok(SingleModeOperators {
        cutoff,
        n,
        n2,
        cos,
        sin,
    })
}

/// Single-mode factor of a Kronecker term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Identity,
    Charge,
    ChargeSq,
    Cos,
    Sin,
}

/// coeff · (F1 ⊗ F2 ⊗ F3 ⊗ F4) with coeff in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct KronTerm {
    pub coeff: f64,
    pub factors: [Factor; 4],
}

impl KronTerm {
    fn single(coeff: f64, mode: usize, f: Factor) -> Self {
        let mut factors = [Factor::Identity; 4];
        factors[mode] = f;
        Self { coeff, factors }
    }

    fn pair(coeff: f64, m1: usize, f1: Factor, m2: usize, f2: Factor) -> Self {
        let mut factors = [Factor::Identity; 4];
        factors[m1] = f1;
        factors[m2] = f2;
        Self { coeff, factors }
    }

    /// y += coeff·term·x, applying factors mode by mode. Returns the number
    /// of scalar multiply-adds performed.
    pub fn apply_add(
        &self,
        ops: &SingleModeOperators,
        layout: &ModeLayout,
        x: &[C64],
        y: &mut [C64],
    ) -> usize {
        let mut count = 0;
        let mut current: Option<Vec<C64>> = None;
        for (mode, f) in self.factors.iter().enumerate().rev() {
            let Some(op) = ops.factor(*f) else { continue };
            let src = current.as_deref().unwrap_or(x);
            let mut out = vec![C64::default(); x.len()];
            count += layout.apply_tridiagonal(op, mode, src, &mut out);
            current = Some(out);
        }
        let coeff = C64::new(self.coeff, 0.0);
        match current {
            Some(v) => linalg::axpy(coeff, &v, y),
            None => linalg::axpy(coeff, x, y),
        }
        count + x.len()
    }
}

#[derive(Debug)]
struct Precomputed {
    layout: ModeLayout,
    ops: SingleModeOperators,
    /// 4 nᵀWn on each basis state.
    diag_charging: Vec<f64>,
    /// (0 0 −1 1)W n on each basis state.
    diag_drive: Vec<f64>,
}

/// Flux-parameterized Hamiltonian for one circuit and cutoff. Cheap to
/// evaluate at any (Θ, Θ̇) via [`HamiltonianFamily::at`].
#[derive(Debug, Clone)]
pub struct HamiltonianFamily {
    derived: Arc<DerivedParams>,
    shared: Arc<Precomputed>,
    include_drive: bool,
}

impl HamiltonianFamily {
    pub fn new(derived: &DerivedParams, cutoff: usize) -> Result<Self> {
        let ops = build_single_mode_operators(cutoff)?;
        let layout = ModeLayout::new(cutoff);
        let dim = layout.dim();
        let w = &derived.w;
        let drive = derived.drive_weights();
        let mut diag_charging = Vec::with_capacity(dim);
        let mut diag_drive = Vec::with_capacity(dim);
        for idx in 0..dim {
            let n = layout.charges(idx).map(|c| c as f64);
            let mut e = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    e += w[(i, j)] * n[i] * n[j];
                }
            }
            diag_charging.push(4.0 * e);
            diag_drive.push((0..4).map(|j| drive[j] * n[j]).sum());
        }
        Ok(Self {
            derived: Arc::new(derived.clone()),
            shared: Arc::new(Precomputed {
                layout,
                ops,
                diag_charging,
                diag_drive,
            }),
            include_drive: true,
        })
    }

    /// Keep or drop the Θ̇ drive term in every Hamiltonian of the family.
    pub fn with_drive_term(mut self, include: bool) -> Self {
        self.include_drive = include;
        self
    }

    pub fn includes_drive_term(&self) -> bool {
        self.include_drive
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn layout(&self) -> ModeLayout {
        self.shared.layout
    }

    pub fn cutoff(&self) -> usize {
        self.shared.layout.cutoff
    }

    pub fn dim(&self) -> usize {
        self.shared.layout.dim()
    }

    pub fn operators(&self) -> &SingleModeOperators {
        &self.shared.ops
    }

    pub fn at(&self, theta_ex: f64, theta_dot_ex: f64) -> HamiltonianAction {
        let drive_coefficient = if self.include_drive && theta_dot_ex != 0.0 {
            theta_dot_ex / self.derived.omega_c34
        } else {
            0.0
        };
        HamiltonianAction {
            derived: Arc::clone(&self.derived),
            shared: Arc::clone(&self.shared),
            theta_ex,
            theta_dot_ex,
            drive_coefficient,
        }
    }
}

/// The Hamiltonian at fixed (Θ_ex, Θ̇_ex), held as Kronecker terms and
/// applied without materializing a matrix.
#[derive(Debug, Clone)]
pub struct HamiltonianAction {
    derived: Arc<DerivedParams>,
    shared: Arc<Precomputed>,
    pub theta_ex: f64,
    pub theta_dot_ex: f64,
    drive_coefficient: f64,
}

/// Convenience wrapper around [`HamiltonianFamily::new`] + [`HamiltonianFamily::at`].
pub fn assemble_hamiltonian(
    derived: &DerivedParams,
    theta_ex: f64,
    theta_dot_ex: f64,
    cutoff: usize,
) -> Result<HamiltonianAction> {
    Ok(HamiltonianFamily::new(derived, cutoff)?.at(theta_ex, theta_dot_ex))
}

impl HamiltonianAction {
    pub fn layout(&self) -> ModeLayout {
        self.shared.layout
    }

    pub fn cutoff(&self) -> usize {
        self.shared.layout.cutoff
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn operators(&self) -> &SingleModeOperators {
        &self.shared.ops
    }

    /// Θ̇/ω_C34, exactly zero for static flux or with the drive disabled.
    pub fn drive_coefficient(&self) -> f64 {
        self.drive_coefficient
    }

    /// The Kronecker-term expansion of this Hamiltonian (rad/s).
    pub fn terms(&self) -> Vec<KronTerm> {
        use Factor::*;
        let d = &*self.derived;
        let mut terms = Vec::new();
        for i in 0..4 {
            terms.push(KronTerm::single(4.0 * d.w[(i, i)], i, ChargeSq));
            for j in (i + 1)..4 {
                if d.w[(i, j)] != 0.0 {
                    terms.push(KronTerm::pair(8.0 * d.w[(i, j)], i, Charge, j, Charge));
                }
            }
        }
        if self.drive_coefficient != 0.0 {
            for (j, wj) in d.drive_weights().iter().enumerate() {
                if *wj != 0.0 {
                    terms.push(KronTerm::single(self.drive_coefficient * wj, j, Charge));
                }
            }
        }
        for i in 0..4 {
            terms.push(KronTerm::single(-d.omega_j[i], i, Cos));
        }
        let j5 = d.omega_j[4];
        if j5 != 0.0 {
            let (s, c) = self.theta_ex.sin_cos();
            terms.push(KronTerm::pair(-j5 * c, 2, Cos, 3, Cos));
            terms.push(KronTerm::pair(-j5 * c, 2, Sin, 3, Sin));
            terms.push(KronTerm::pair(-j5 * s, 2, Cos, 3, Sin));
            terms.push(KronTerm::pair(j5 * s, 2, Sin, 3, Cos));
        }
        terms
    }

    /// Reference evaluation of H·x by summing [`Self::terms`] one at a time.
    /// Returns the result and the count of scalar multiply-adds.
    pub fn apply_by_terms(&self, x: &[C64]) -> Result<(Vec<C64>, usize)> {
        self.check_dim(x.len())?;
        let mut y = vec![C64::default(); x.len()];
        let mut count = 0;
        for t in self.terms() {
            count += t.apply_add(&self.shared.ops, &self.shared.layout, x, &mut y);
        }
        Ok((y, count))
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        let expected = self.dim();
        if found != expected {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.shared.layout.dim()
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_dim(psi.len())?;
        let mut y = StateVector::zeros(psi.len());
        self.apply_into(psi, &mut y);
        Ok(y)
    }

    /// y = (∂H/∂Θ_ex)·x, the flux derivative of the loop-junction term.
    pub fn apply_flux_derivative_into(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::default());
        let j5 = self.derived.omega_j[4];
        // ∂/∂Θ of −(ω_J5/2)e^{−iΘ} is i(ω_J5/2)e^{−iΘ}
        let c_plus = C64::new(0.0, 0.5 * j5) * C64::from_polar(1.0, -self.theta_ex);
        coupler_pass(&self.shared.layout, x, y, c_plus, c_plus.conj());
    }

    /// Upper-end spectral norm estimate from a short Lanczos run; within a
    /// few percent of ‖H‖₂ and never above it.
    pub fn norm_estimate(&self) -> f64 {
        let dim = self.dim();
        let steps = 40.min(dim);
        let mut v: Vec<C64> = (0..dim)
            .map(|i| C64::new(1.0 + (i as f64 * 0.618).sin(), (i as f64 * 0.377).cos()))
            .collect();
        linalg::normalize(&mut v);
        let mut basis = linalg::Block::from_columns(dim, &[v]);
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![C64::default(); dim];
        for k in 0..steps {
            self.apply_into(basis.col(k), &mut w);
            let a = linalg::dot(basis.col(k), &w).re;
            alphas.push(a);
            let mut next = linalg::Block::from_columns(dim, &[w.clone()]);
            basis.project_out(&mut next);
            let b = linalg::norm(next.col(0));
            if b < 1e-12 * a.abs().max(1.0) || k + 1 == steps {
                break;
            }
            linalg::scale(C64::new(1.0 / b, 0.0), next.col_mut(0));
            betas.push(b);
            basis.append(&next);
        }
        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let (vals, _) = linalg::symmetric_eigh(&t);
        vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Explicit matrix, built column by column from [`Self::apply_into`].
    pub fn densify(&self) -> Result<DMatrix<C64>> {
        let dim = self.dim();
        if dim > DENSE_GUARD {
            return Err(Error::DenseGuard(dim));
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![C64::default(); dim];
        let mut col = vec![C64::default(); dim];
        for j in 0..dim {
            e[j] = C64::new(1.0, 0.0);
            self.apply_into(&e, &mut col);
            e[j] = C64::default();
            for i in 0..dim {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }
}

impl LinearOperator for HamiltonianAction {
    fn dim(&self) -> usize {
        self.shared.layout.dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let c_plus = C64::from_polar(0.5 * self.derived.omega_j[4], PI - self.theta_ex);
        apply_general(
            &self.derived,
            &self.shared,
            x,
            y,
            1.0,
            self.drive_coefficient,
            c_plus,
        );
    }
}

/// y = s·H_static·x + dc·D·x + loop term with coefficient `c_plus` on the
/// e^{i(φ3−φ4)} shift and its conjugate on the reverse shift.
fn apply_general(
    derived: &DerivedParams,
    sh: &Precomputed,
    x: &[C64],
    y: &mut [C64],
    scale: f64,
    dc: f64,
    c_plus: C64,
) {
    let d = sh.layout.d;
    if dc == 0.0 {
        for ((yi, xi), e) in y.iter_mut().zip(x).zip(&sh.diag_charging) {
            *yi = xi * (scale * e);
        }
    } else {
        for (((yi, xi), e), v) in y
            .iter_mut()
            .zip(x)
            .zip(&sh.diag_charging)
            .zip(&sh.diag_drive)
        {
            *yi = xi * (scale * e + dc * v);
        }
    }
    for mode in 0..4 {
        let c = C64::new(-0.5 * scale * derived.omega_j[mode], 0.0);
        if c == C64::default() {
            continue;
        }
        let s = sh.layout.stride(mode);
        let block = s * d;
        for (xb, yb) in x.chunks_exact(block).zip(y.chunks_exact_mut(block)) {
            linalg::axpy(c, &xb[..block - s], &mut yb[s..]);
            linalg::axpy(c, &xb[s..], &mut yb[..block - s]);
        }
    }
    if c_plus != C64::default() {
        coupler_pass(&sh.layout, x, y, c_plus, c_plus.conj());
    }
}

/// y[.., a3, a4] += c_plus·x[.., a3+1, a4−1] + c_minus·x[.., a3−1, a4+1]
fn coupler_pass(layout: &ModeLayout, x: &[C64], y: &mut [C64], c_plus: C64, c_minus: C64) {
    let d = layout.d;
    let block = d * d;
    for (xb, yb) in x.chunks_exact(block).zip(y.chunks_exact_mut(block)) {
        for a3 in 0..d {
            let row = a3 * d;
            if a3 + 1 < d {
                let src = &xb[row + d..row + 2 * d - 1];
                linalg::axpy(c_plus, src, &mut yb[row + 1..row + d]);
            }
            if a3 > 0 {
                let src = &xb[row - d + 1..row];
                linalg::axpy(c_minus, src, &mut yb[row..row + d - 1]);
            }
        }
    }
}

/// Σ_k w_k·H(Θ_k, Θ̇_k) for one family, applied as a single operator.
#[derive(Debug, Clone)]
pub struct HamiltonianMix {
    derived: Arc<DerivedParams>,
    shared: Arc<Precomputed>,
    scale: f64,
    drive_coefficient: f64,
    c_plus: C64,
}

impl HamiltonianFamily {
    /// Weighted sum of Hamiltonians; `parts` holds (w_k, Θ_k, Θ̇_k).
    pub fn mix(&self, parts: &[(f64, f64, f64)]) -> HamiltonianMix {
        let mut scale = 0.0;
        let mut dc = 0.0;
        let mut c_plus = C64::default();
        for &(w, theta, theta_dot) in parts {
            let h = self.at(theta, theta_dot);
            scale += w;
            dc += w * h.drive_coefficient;
            c_plus += C64::from_polar(0.5 * w * self.derived.omega_j[4], PI - theta);
        }
        HamiltonianMix {
            derived: Arc::clone(&self.derived),
            shared: Arc::clone(&self.shared),
            scale,
            drive_coefficient: dc,
            c_plus,
        }
    }
}

impl LinearOperator for HamiltonianMix {
    fn dim(&self) -> usize {
        self.shared.layout.dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        apply_general(
            &self.derived,
            &self.shared,
            x,
            y,
            self.scale,
            self.drive_coefficient,
            self.c_plus,
        );
    }
}
