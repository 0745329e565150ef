//! Labeled low-lying spectra, ZZ coupling maps and flux-noise dephasing.
//!
//! States are labeled |ij⟩|kl⟩ by the excitation numbers of transmons 1–4.
//! Labels are seeded by overlap with products of uncoupled single-transmon
//! eigenstates and then carried along flux sweeps by maximum overlap with
//! the previous point, subdividing the step when overlaps drop.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charge::{HamiltonianAction, HamiltonianFamily};
use crate::circuit::{CircuitParams, DerivedParams};
use crate::eigensolver::{davidson, EigenOptions, Eigenpairs, ProductPreconditioner};
use crate::error::{Error, Result};
use crate::linalg::{self, Block};
use crate::product_basis::ProductBasis;
use crate::units;
use crate::C64;

/// Excitation numbers (i, j, k, l) of transmons 1, 2, 3, 4.
pub type Label = [usize; 4];

/// Computational states ordered as ψ_00, ψ_01, ψ_10, ψ_11.
pub const QUBIT_LABELS: [Label; 4] = [[0, 0, 0, 0], [0, 1, 0, 0], [1, 0, 0, 0], [1, 1, 0, 0]];

pub const GROUND: Label = [0, 0, 0, 0];

/// Overlap² ties closer than this make an assignment ambiguous.
pub const TIE_TOLERANCE: f64 = 1e-6;

/// Number of states at the top of a window allowed to lose their
/// continuation label.
const WINDOW_EDGE: usize = 2;

pub fn format_label(l: &Label) -> String {
    format!("|{}{}>|{}{}>", l[0], l[1], l[2], l[3])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledLevel {
    pub label: Label,
    /// Energy above E_{00,00} (rad/s).
    pub energy: f64,
    /// Overlap² with the reference state the label came from.
    pub overlap: f64,
}

#[derive(Debug, Clone)]
pub struct LabeledSpectrum {
    pub theta_ex: f64,
    /// Ascending in energy.
    pub levels: Vec<LabeledLevel>,
    /// Eigenvectors parallel to `levels`; empty once stripped.
    pub vectors: Vec<Vec<C64>>,
    /// Absolute E_{00,00} (rad/s).
    pub ground_energy: f64,
    /// Largest ‖Hv − Ev‖ over the returned pairs.
    pub max_residual: f64,
}

impl LabeledSpectrum {
    pub fn position(&self, label: &Label) -> Option<usize> {
        self.levels.iter().position(|l| &l.label == label)
    }

    pub fn energy(&self, label: &Label) -> Option<f64> {
        self.position(label).map(|i| self.levels[i].energy)
    }

    pub fn require_energy(&self, label: &Label) -> Result<f64> {
        self.energy(label).ok_or_else(|| {
            Error::MissingLabel(format!(
                "{} at theta_ex = {:.6}π",
                format_label(label),
                self.theta_ex / PI
            ))
        })
    }

    pub fn vector(&self, label: &Label) -> Option<&[C64]> {
        let i = self.position(label)?;
        self.vectors.get(i).map(Vec::as_slice)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.levels.iter().map(|l| l.label).collect()
    }

    /// ζ_ZZ = ω_11 − ω_10 − ω_01 with ω_00 = 0.
    pub fn zeta_zz(&self) -> Result<f64> {
        zz_strength(self)
    }

    /// Copy without eigenvectors.
    pub fn stripped(&self) -> Self {
        Self {
            vectors: Vec::new(),
            ..self.clone()
        }
    }
}

pub fn zz_strength(spec: &LabeledSpectrum) -> Result<f64> {
    let e11 = spec.require_energy(&[1, 1, 0, 0])?;
    let e10 = spec.require_energy(&[1, 0, 0, 0])?;
    let e01 = spec.require_energy(&[0, 1, 0, 0])?;
    Ok(e11 - e10 - e01)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Charge cutoff N.
    pub cutoff: usize,
    /// Number of eigenpairs per point.
    pub levels: usize,
    /// Residual target relative to ‖H‖.
    pub tol_rel: f64,
    pub max_iter: usize,
    /// Continuation overlap² below which the flux step is subdivided.
    pub min_overlap: f64,
    pub max_subdivisions: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            cutoff: 10,
            levels: 12,
            tol_rel: 5e-9,
            max_iter: 400,
            min_overlap: 0.5,
            max_subdivisions: 8,
        }
    }
}

/// Lowest `k` eigenpairs of a static Hamiltonian (k ≤ 40).
pub fn lowest_eigenpairs(h: &HamiltonianAction, k: usize) -> Result<Eigenpairs> {
    if k == 0 || k > 40 {
        return Err(Error::InvalidParams(format!(
            "eigenpair count {k} outside 1..=40"
        )));
    }
    if h.theta_dot_ex != 0.0 {
        return Err(Error::InvalidParams(
            "eigenpairs are defined for static flux (theta_dot_ex = 0)".into(),
        ));
    }
    let pb = ProductBasis::coupler_pair(h.derived(), h.cutoff(), h.theta_ex)?;
    let opts = EigenOptions {
        nev: k,
        ..EigenOptions::default()
    };
    solve_with_basis(h, &pb, None, h.norm_estimate(), &opts)
}

fn solve_with_basis(
    h: &HamiltonianAction,
    pb: &ProductBasis,
    warm: Option<&[Vec<C64>]>,
    norm: f64,
    opts: &EigenOptions,
) -> Result<Eigenpairs> {
    let want = (opts.nev + opts.guard).min(h.dim());
    let mut initial: Vec<Vec<C64>> = warm.map(<[_]>::to_vec).unwrap_or_default();
    if initial.len() < want {
        for idx in pb.lowest_indices(want) {
            if initial.len() >= want {
                break;
            }
            initial.push(pb.product_vector(&pb.levels(idx)));
        }
    }
    let floor = units::mhz(50.0);
    let pc = ProductPreconditioner { basis: pb, floor };
    davidson(h, Some(&pc), &initial, norm, opts)
}

/// What labels are matched against.
pub enum Reference<'a> {
    /// Products of uncoupled single-transmon eigenstates.
    Product(&'a ProductBasis),
    /// Labeled eigenvectors of a nearby flux point.
    Previous(&'a LabeledSpectrum),
}

/// Assigns labels to eigenpairs and offsets energies so E_{00,00} = 0.
///
/// With a [`Reference::Previous`] reference, pairs whose best overlap² is
/// below `min_overlap` produce a labeling error.
pub fn label_states(
    pairs: &Eigenpairs,
    theta_ex: f64,
    reference: Reference<'_>,
    min_overlap: f64,
) -> Result<LabeledSpectrum> {
    let k = pairs.values.len();
    let (candidates, overlaps) = match reference {
        Reference::Product(pb) => {
            let cand: Vec<usize> = pb.lowest_indices((4 * k).max(k + 8));
            let ov: Vec<Vec<f64>> = pairs
                .vectors
                .iter()
                .map(|v| {
                    let c = pb.to_coefficients(v);
                    cand.iter().map(|&i| c[i].norm_sqr()).collect()
                })
                .collect();
            let labels: Vec<Label> = cand
                .iter()
                .map(|&i| {
                    let l = pb.levels(i);
                    [l[0], l[1], l[2], l[3]]
                })
                .collect();
            (labels, ov)
        }
        Reference::Previous(prev) => {
            if prev.vectors.len() != prev.levels.len() {
                return Err(Error::Labeling(
                    "continuation reference has no eigenvectors".into(),
                ));
            }
            let dim = pairs.vectors[0].len();
            let a = Block::from_columns(dim, &pairs.vectors);
            let b = Block::from_columns(dim, &prev.vectors);
            let g = a.gram(&b);
            let ov = (0..k)
                .map(|s| {
                    (0..prev.levels.len())
                        .map(|p| g[(s, p)].norm_sqr())
                        .collect()
                })
                .collect();
            (prev.labels(), ov)
        }
    };
    let assignment = assign(&overlaps, theta_ex)?;
    let mut levels = Vec::with_capacity(k);
    for (s, &(c, ov)) in assignment.iter().enumerate() {
        if matches!(reference, Reference::Previous(_)) && ov < min_overlap {
            return Err(Error::Labeling(format!(
                "state {s} at theta_ex = {:.6}π keeps only overlap² {ov:.3} with {}",
                theta_ex / PI,
                format_label(&candidates[c])
            )));
        }
        levels.push(LabeledLevel {
            label: candidates[c],
            energy: pairs.values[s],
            overlap: ov,
        });
    }
    let ground = levels
        .iter()
        .find(|l| l.label == GROUND)
        .map(|l| l.energy)
        .ok_or_else(|| {
            Error::MissingLabel(format!(
                "{} at theta_ex = {:.6}π",
                format_label(&GROUND),
                theta_ex / PI
            ))
        })?;
    for l in &mut levels {
        l.energy -= ground;
    }
    Ok(LabeledSpectrum {
        theta_ex,
        levels,
        vectors: pairs.vectors.clone(),
        ground_energy: ground,
        max_residual: pairs.residuals.iter().fold(0.0, |a: f64, r| a.max(*r)),
    })
}

/// Greedy bijective assignment by descending overlap². Returns, per state,
/// (candidate index, overlap²).
fn assign(overlaps: &[Vec<f64>], theta_ex: f64) -> Result<Vec<(usize, f64)>> {
    let k = overlaps.len();
    let m = overlaps.first().map_or(0, Vec::len);
    if m < k {
        return Err(Error::Labeling(format!(
            "{k} states but only {m} candidate labels"
        )));
    }
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(k * m);
    for (s, row) in overlaps.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            entries.push((v, s, c));
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut state_done = vec![false; k];
    let mut cand_used = vec![false; m];
    let mut out = vec![(usize::MAX, 0.0); k];
    let mut left = k;
    for &(v, s, c) in &entries {
        if left == 0 {
            break;
        }
        if state_done[s] || cand_used[c] {
            continue;
        }
        if v > 1e-3 {
            // Another free candidate equally claimed by this state, or
            // another free state equally claiming this candidate.
            let row_tie = overlaps[s]
                .iter()
                .enumerate()
                .any(|(c2, &v2)| c2 != c && !cand_used[c2] && (v2 - v).abs() < TIE_TOLERANCE);
            let col_tie = (0..k).any(|s2| {
                s2 != s && !state_done[s2] && (overlaps[s2][c] - v).abs() < TIE_TOLERANCE
            });
            if row_tie || col_tie {
                return Err(Error::Labeling(format!(
                    "ambiguous assignment for state {s} at theta_ex = {:.6}π (overlap² {v:.6})",
                    theta_ex / PI
                )));
            }
        }
        state_done[s] = true;
        cand_used[c] = true;
        out[s] = (c, v);
        left -= 1;
    }
    Ok(out)
}

/// Eigen-solves and labels spectra of one circuit at one cutoff.
pub struct SpectrumSolver {
    family: HamiltonianFamily,
    reference: ProductBasis,
    settings: SolverSettings,
    norm: f64,
}

impl SpectrumSolver {
    pub fn new(derived: &DerivedParams, settings: &SolverSettings) -> Result<Self> {
        if settings.levels < 4 || settings.levels > 40 {
            return Err(Error::InvalidParams(format!(
                "levels per point must be in 4..=40, got {}",
                settings.levels
            )));
        }
        let family = HamiltonianFamily::new(derived, settings.cutoff)?;
        let reference = ProductBasis::uncoupled(derived, settings.cutoff)?;
        let norm = family.at(0.0, 0.0).norm_estimate();
        Ok(Self {
            family,
            reference,
            settings: settings.clone(),
            norm,
        })
    }

    pub fn for_circuit(circuit: &CircuitParams, settings: &SolverSettings) -> Result<Self> {
        Self::new(&DerivedParams::from_circuit(circuit)?, settings)
    }

    pub fn family(&self) -> &HamiltonianFamily {
        &self.family
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn reference_basis(&self) -> &ProductBasis {
        &self.reference
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn eigenpairs(&self, theta_ex: f64, warm: Option<&[Vec<C64>]>) -> Result<Eigenpairs> {
        let h = self.family.at(theta_ex, 0.0);
        let pb = ProductBasis::coupler_pair(self.family.derived(), self.settings.cutoff, theta_ex)?;
        let opts = EigenOptions {
            nev: self.settings.levels,
            tol_rel: self.settings.tol_rel,
            max_iter: self.settings.max_iter,
            ..EigenOptions::default()
        };
        solve_with_basis(&h, &pb, warm, self.norm, &opts)
    }

    /// Spectrum labeled against uncoupled product states.
    pub fn seeded(&self, theta_ex: f64) -> Result<LabeledSpectrum> {
        let pairs = self.eigenpairs(theta_ex, None)?;
        label_states(&pairs, theta_ex, Reference::Product(&self.reference), 0.0)
    }

    /// Spectrum at `theta_ex` labeled by continuation from `prev`,
    /// subdividing the flux step while overlaps are too small.
    pub fn continued(&self, theta_ex: f64, prev: &LabeledSpectrum) -> Result<LabeledSpectrum> {
        self.continue_from(theta_ex, prev, 0)
    }

    fn continue_from(
        &self,
        theta_ex: f64,
        prev: &LabeledSpectrum,
        depth: usize,
    ) -> Result<LabeledSpectrum> {
        let pairs = self.eigenpairs(theta_ex, Some(&prev.vectors))?;
        let attempt = label_states(&pairs, theta_ex, Reference::Previous(prev), 0.0)
            .and_then(|s| self.repair_window_edge(s));
        match attempt {
            Ok(s) => Ok(s),
            Err(Error::Labeling(_)) if depth < self.settings.max_subdivisions => {
                let mid = 0.5 * (prev.theta_ex + theta_ex);
                let m = self.continue_from(mid, prev, depth + 1)?;
                self.continue_from(theta_ex, &m, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    /// States at the top of the window may swap with states just above it.
    /// Weakly matched states there are relabeled against the product
    /// reference; anywhere lower they are a labeling error.
    fn repair_window_edge(&self, mut spec: LabeledSpectrum) -> Result<LabeledSpectrum> {
        let k = spec.levels.len();
        let min = self.settings.min_overlap;
        let weak: Vec<usize> = (0..k).filter(|&s| spec.levels[s].overlap < min).collect();
        if weak.is_empty() {
            return Ok(spec);
        }
        if let Some(&s) = weak.iter().find(|&&s| s + WINDOW_EDGE < k) {
            return Err(Error::Labeling(format!(
                "state {s} at theta_ex = {:.6}π keeps only overlap² {:.3} with {}",
                spec.theta_ex / PI,
                spec.levels[s].overlap,
                format_label(&spec.levels[s].label)
            )));
        }
        let used: Vec<Label> = (0..k)
            .filter(|s| !weak.contains(s))
            .map(|s| spec.levels[s].label)
            .collect();
        let pb = &self.reference;
        let candidates: Vec<(Label, usize)> = pb
            .lowest_indices(4 * k)
            .into_iter()
            .map(|i| {
                let l = pb.levels(i);
                ([l[0], l[1], l[2], l[3]], i)
            })
            .filter(|(l, _)| !used.contains(l))
            .collect();
        let overlaps: Vec<Vec<f64>> = weak
            .iter()
            .map(|&s| {
                let c = pb.to_coefficients(&spec.vectors[s]);
                candidates.iter().map(|&(_, i)| c[i].norm_sqr()).collect()
            })
            .collect();
        for (w, (c, ov)) in weak.iter().zip(assign(&overlaps, spec.theta_ex)?) {
            spec.levels[*w].label = candidates[c].0;
            spec.levels[*w].overlap = ov;
        }
        Ok(spec)
    }

    /// Labeled spectra on a monotone grid, seeded at the grid point nearest
    /// `seed_theta` and continued outward. `visit` sees every point in grid
    /// order of completion together with its neighbour toward the seed.
    pub fn sweep<F>(
        &self,
        thetas: &[f64],
        seed_theta: f64,
        mut visit: F,
    ) -> Result<Vec<LabeledSpectrum>>
    where
        F: FnMut(&LabeledSpectrum, Option<&LabeledSpectrum>) -> Result<()>,
    {
        check_monotone(thetas)?;
        let n = thetas.len();
        let mut out: Vec<Option<LabeledSpectrum>> = vec![None; n];
        let seed = thetas
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - seed_theta)
                    .abs()
                    .total_cmp(&(b.1 - seed_theta).abs())
            })
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidParams("empty flux grid".into()))?;
        let s0 = self.seeded(thetas[seed])?;
        visit(&s0, None)?;
        let mut prev = s0.clone();
        out[seed] = Some(s0.stripped());
        for i in seed + 1..n {
            let s = self.continued(thetas[i], &prev)?;
            visit(&s, Some(&prev))?;
            out[i] = Some(s.stripped());
            prev = s;
        }
        prev = s0;
        for i in (0..seed).rev() {
            let s = self.continued(thetas[i], &prev)?;
            visit(&s, Some(&prev))?;
            out[i] = Some(s.stripped());
            prev = s;
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }

    /// Labeled spectrum (with vectors) at `theta_ex`, seeded at `seed_theta`
    /// and continued in steps no larger than `max_step`.
    pub fn walk(&self, seed_theta: f64, theta_ex: f64, max_step: f64) -> Result<LabeledSpectrum> {
        if !(max_step > 0.0) {
            return Err(Error::InvalidParams(
                "continuation step must be positive".into(),
            ));
        }
        let n = ((theta_ex - seed_theta).abs() / max_step).ceil() as usize;
        let mut s = self.seeded(seed_theta)?;
        for k in 1..=n {
            let t = seed_theta + (theta_ex - seed_theta) * k as f64 / n as f64;
            s = self.continued(t, &s)?;
        }
        Ok(s)
    }
}

fn check_monotone(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// ζ_ZZ over a Θ_ex grid for each ω4 (rows).
#[derive(Debug, Clone)]
pub struct ZZSweep {
    pub thetas: Vec<f64>,
    /// ω4 design values (rad/s), one per row.
    pub omega4: Vec<f64>,
    /// zeta[row][i] in rad/s.
    pub zeta: Vec<Vec<f64>>,
    /// Stripped spectra per row when retained.
    pub spectra: Option<Vec<Vec<LabeledSpectrum>>>,
    /// Per row, the labeled spectra (with vectors) bracketing each sign
    /// change of ζ_ZZ, ascending in flux.
    pub brackets: Vec<Vec<(LabeledSpectrum, LabeledSpectrum)>>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub seed_theta: f64,
    pub keep_spectra: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            seed_theta: 0.61 * PI,
            keep_spectra: false,
        }
    }
}

/// One ζ_ZZ row with label continuation along Θ_ex.
pub fn sweep_zz_row(
    solver: &SpectrumSolver,
    thetas: &[f64],
    opts: &SweepOptions,
) -> Result<(
    Vec<f64>,
    Vec<LabeledSpectrum>,
    Vec<(LabeledSpectrum, LabeledSpectrum)>,
)> {
    let mut brackets = Vec::new();
    let spectra = solver.sweep(thetas, opts.seed_theta, |cur, prev| {
        if let Some(p) = prev {
            let (zc, zp) = (cur.zeta_zz()?, p.zeta_zz()?);
            if zc * zp < 0.0 {
                let pair = if cur.theta_ex < p.theta_ex {
                    (cur.clone(), p.clone())
                } else {
                    (p.clone(), cur.clone())
                };
                brackets.push(pair);
            }
        }
        Ok(())
    })?;
    brackets.sort_by(|a, b| a.0.theta_ex.total_cmp(&b.0.theta_ex));
    let zeta = spectra
        .iter()
        .map(|s| s.zeta_zz())
        .collect::<Result<Vec<_>>>()?;
    Ok((zeta, spectra, brackets))
}

/// ζ_ZZ map over Θ_ex × ω4; rows run in parallel. An empty `omega4`
/// means the design value.
pub fn sweep_zz(
    circuit: &CircuitParams,
    settings: &SolverSettings,
    thetas: &[f64],
    omega4: &[f64],
    opts: &SweepOptions,
) -> Result<ZZSweep> {
    check_monotone(thetas)?;
    let rows: Vec<f64> = if omega4.is_empty() {
        vec![circuit.omega_design[3]]
    } else {
        check_monotone(omega4)?;
        omega4.to_vec()
    };
    let results: Vec<_> = rows
        .par_iter()
        .map(|&w4| {
            let c = circuit.clone().with_omega(3, w4);
            let solver = SpectrumSolver::for_circuit(&c, settings)?;
            sweep_zz_row(&solver, thetas, opts).map_err(|e| at_grid(e, None, Some(w4)))
        })
        .collect();
    let mut zeta = Vec::with_capacity(rows.len());
    let mut spectra = Vec::with_capacity(rows.len());
    let mut brackets = Vec::with_capacity(rows.len());
    for r in results {
        let (z, s, b) = r?;
        zeta.push(z);
        spectra.push(s);
        brackets.push(b);
    }
    Ok(ZZSweep {
        thetas: thetas.to_vec(),
        omega4: rows,
        zeta,
        spectra: opts.keep_spectra.then_some(spectra),
        brackets,
    })
}

/// Attaches grid coordinates to labeling and convergence errors.
pub fn at_grid(e: Error, theta: Option<f64>, omega4: Option<f64>) -> Error {
    let mut loc = String::new();
    if let Some(t) = theta {
        loc.push_str(&format!("theta_ex = {:.6}π ", t / PI));
    }
    if let Some(w) = omega4 {
        loc.push_str(&format!("omega4 = {:.6} GHz ", units::to_ghz(w)));
    }
    match e {
        Error::Labeling(m) => Error::Labeling(format!("{loc}: {m}")),
        Error::MissingLabel(m) => Error::MissingLabel(format!("{loc}: {m}")),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ZeroReport {
    Roots(Vec<f64>),
    /// The row vanishes identically; zeros are not isolated.
    Degenerate,
}

/// Bisection on a bracketing interval until |f| < `ftol` and the interval
/// is shorter than `xtol`.
pub fn bisect_root<F>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    fb: f64,
    ftol: f64,
    xtol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::InvalidParams(
            "bisection interval does not bracket a root".into(),
        ));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        let width = (b - a).abs();
        if (fm.abs() < ftol && width < xtol) || fm == 0.0 || width <= 4.0 * f64::EPSILON * m.abs() {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Roots of a sampled function refined by bisection at each sign change.
pub fn find_sign_change_roots<F>(
    grid: &[f64],
    values: &[f64],
    mut f: F,
    ftol: f64,
    xtol: f64,
) -> Result<ZeroReport>
where
    F: FnMut(f64) -> Result<f64>,
{
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if values
        .iter()
        .all(|v| v.abs() <= ftol.min(1e-300_f64.max(scale)))
    {
        return Ok(ZeroReport::Degenerate);
    }
    let mut roots = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(grid[i]);
        } else if fa * fb < 0.0 {
            roots.push(bisect_root(
                &mut f,
                grid[i],
                grid[i + 1],
                fa,
                fb,
                ftol,
                xtol,
            )?);
        }
    }
    if let (Some(&last), Some(&v)) = (grid.last(), values.last()) {
        if v == 0.0 {
            roots.push(last);
        }
    }
    Ok(ZeroReport::Roots(roots))
}

/// Flux bracket width at which a ζ_ZZ zero counts as located.
pub const ZERO_XTOL: f64 = 1e-4 * PI;

/// ζ_ZZ zeros of one sweep row, re-solving by bisection to |ζ|/2π < 1 kHz.
pub fn find_zz_zeros(solver: &SpectrumSolver, sweep: &ZZSweep, row: usize) -> Result<ZeroReport> {
    let zeta = &sweep.zeta[row];
    let degenerate_floor = 1e-10 * solver.family().derived().omega_design[0];
    if zeta.iter().all(|z| z.abs() <= degenerate_floor) {
        return Ok(ZeroReport::Degenerate);
    }
    let ftol = units::khz(1.0);
    let mut roots = Vec::new();
    for (lo, hi) in &sweep.brackets[row] {
        let mut anchors: Vec<LabeledSpectrum> = vec![lo.clone(), hi.clone()];
        let f = |theta: f64| -> Result<f64> {
            let near = anchors
                .iter()
                .min_by(|a, b| {
                    (a.theta_ex - theta)
                        .abs()
                        .total_cmp(&(b.theta_ex - theta).abs())
                })
                .expect("anchors");
            let s = solver.continued(theta, near)?;
            let z = s.zeta_zz()?;
            anchors.push(s);
            if anchors.len() > 4 {
                anchors.remove(0);
            }
            Ok(z)
        };
        roots.push(bisect_root(
            f,
            lo.theta_ex,
            hi.theta_ex,
            lo.zeta_zz()?,
            hi.zeta_zz()?,
            ftol,
            ZERO_XTOL,
        )?);
    }
    roots.sort_by(f64::total_cmp);
    Ok(ZeroReport::Roots(roots))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T2Estimate {
    pub theta_ex: f64,
    /// ∂ω_10/∂Θ_ex and ∂ω_01/∂Θ_ex (rad/s per rad).
    pub slope: [f64; 2],
    /// Seconds; +∞ when the slope is below the numerical noise floor.
    pub t2: [f64; 2],
}

pub const DEFAULT_FD_STEP: f64 = 1e-3 * PI;

/// Central-difference derivative of a vector-valued function with one
/// Richardson extrapolation step: (4·D(h/2) − D(h))/3.
pub fn richardson_slope<F, const K: usize>(mut f: F, x: f64, h: f64) -> Result<[f64; K]>
where
    F: FnMut(f64) -> Result<[f64; K]>,
{
    let (p1, m1) = (f(x + h)?, f(x - h)?);
    let (p2, m2) = (f(x + 0.5 * h)?, f(x - 0.5 * h)?);
    let mut out = [0.0; K];
    for k in 0..K {
        let d1 = (p1[k] - m1[k]) / (2.0 * h);
        let d2 = (p2[k] - m2[k]) / h;
        out[k] = (4.0 * d2 - d1) / 3.0;
    }
    Ok(out)
}

/// Slope at `x` of the least-squares parabola through f(x + k·h),
/// k = −2..=2.
pub fn quadratic_fit_slope<F, const K: usize>(mut f: F, x: f64, h: f64) -> Result<[f64; K]>
where
    F: FnMut(f64) -> Result<[f64; K]>,
{
    let mut out = [0.0; K];
    for k in [-2i32, -1, 1, 2] {
        let y = f(x + k as f64 * h)?;
        for (o, v) in out.iter_mut().zip(y) {
            *o += k as f64 * v;
        }
    }
    Ok(out.map(|v| v / (10.0 * h)))
}

/// ω_10 and ω_01 at `theta_ex`, continued from `anchor`.
pub fn qubit_frequencies(
    solver: &SpectrumSolver,
    anchor: &LabeledSpectrum,
    theta_ex: f64,
) -> Result<[f64; 2]> {
    let s = solver.continued(theta_ex, anchor)?;
    Ok([
        s.require_energy(&[1, 0, 0, 0])?,
        s.require_energy(&[0, 1, 0, 0])?,
    ])
}

/// T2 = |2π·(A_Φ/Φ0)·∂ω/∂Θ|⁻¹, or +∞ when |∂ω/∂Θ| ≤ `floor`.
pub fn t2_from_slope(slope: f64, a_phi: f64, floor: f64) -> f64 {
    if slope.abs() <= floor {
        f64::INFINITY
    } else {
        1.0 / (2.0 * PI * a_phi * slope).abs()
    }
}

/// Dephasing-time estimate for both qubits at `theta_ex`, with `anchor` a
/// labeled spectrum at (or very near) that flux. `a_phi` is in units of Φ0.
pub fn estimate_t2(
    solver: &SpectrumSolver,
    anchor: &LabeledSpectrum,
    theta_ex: f64,
    a_phi: f64,
) -> Result<T2Estimate> {
    if !(a_phi > 0.0) {
        return Err(Error::InvalidParams(
            "flux-noise amplitude must be positive".into(),
        ));
    }
    let h = DEFAULT_FD_STEP;
    let slope = richardson_slope(|t| qubit_frequencies(solver, anchor, t), theta_ex, h)?;
    let floor = slope_noise_floor(solver, h);
    Ok(T2Estimate {
        theta_ex,
        slope,
        t2: [
            t2_from_slope(slope[0], a_phi, floor),
            t2_from_slope(slope[1], a_phi, floor),
        ],
    })
}

/// Slope magnitude indistinguishable from eigenvalue noise for step `h`.
pub fn slope_noise_floor(solver: &SpectrumSolver, h: f64) -> f64 {
    solver.settings().tol_rel * solver.norm() / h
}

/// Hellmann–Feynman slopes ∂E/∂Θ_ex (rad/s per rad) of labeled levels,
/// absolute (not relative to the ground state).
pub fn level_slopes(
    solver: &SpectrumSolver,
    spec: &LabeledSpectrum,
    labels: &[Label],
) -> Result<Vec<f64>> {
    let h = solver.family().at(spec.theta_ex, 0.0);
    let mut y = vec![C64::default(); h.dim()];
    labels
        .iter()
        .map(|label| {
            let v = spec.vector(label).ok_or_else(|| {
                Error::MissingLabel(format!("{} has no eigenvector", format_label(label)))
            })?;
            h.apply_flux_derivative_into(v, &mut y);
            Ok(linalg::dot(v, &y).re / linalg::norm_sqr(v))
        })
        .collect()
}

/// Hellmann–Feynman slopes ∂ω_10/∂Θ and ∂ω_01/∂Θ from one labeled
/// spectrum with vectors.
pub fn hellmann_feynman_slopes(
    solver: &SpectrumSolver,
    spec: &LabeledSpectrum,
) -> Result<[f64; 2]> {
    let d = level_slopes(solver, spec, &[GROUND, [1, 0, 0, 0], [0, 1, 0, 0]])?;
    Ok([d[1] - d[0], d[2] - d[0]])
}

/// Minimum T2 per qubit over a flux window: the spectrum is swept on
/// `thetas` (from the first point, seeded there), Hellmann–Feynman slopes
/// locate the steepest point and the reported value there comes from
/// [`estimate_t2`].
pub fn minimum_t2(solver: &SpectrumSolver, thetas: &[f64], a_phi: f64) -> Result<[T2Estimate; 2]> {
    let mut best: [(f64, Option<LabeledSpectrum>); 2] = [(-1.0, None), (-1.0, None)];
    solver.sweep(thetas, thetas[0], |s, _| {
        let hf = hellmann_feynman_slopes(solver, s)?;
        for q in 0..2 {
            if hf[q].abs() > best[q].0 {
                best[q] = (hf[q].abs(), Some(s.clone()));
            }
        }
        Ok(())
    })?;
    let mut out = Vec::with_capacity(2);
    for (q, (_, spec)) in best.into_iter().enumerate() {
        let spec = spec.expect("non-empty grid");
        // Refine the steepest point on a finer local grid.
        let step = if thetas.len() > 1 {
            thetas[1] - thetas[0]
        } else {
            0.0
        };
        let mut top = (hellmann_feynman_slopes(solver, &spec)?[q].abs(), spec);
        for frac in [-0.5, -0.25, 0.25, 0.5] {
            let t = top.1.theta_ex + frac * step;
            if t < thetas[0] || t > thetas[thetas.len() - 1] || step == 0.0 {
                continue;
            }
            let s = solver.continued(t, &top.1)?;
            let v = hellmann_feynman_slopes(solver, &s)?[q].abs();
            if v > top.0 {
                top = (v, s);
            }
        }
        out.push(estimate_t2(solver, &top.1, top.1.theta_ex, a_phi)?);
    }
    Ok([out[0], out[1]])
}
