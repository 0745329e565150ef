//! Single-transmon coupler reference: two qubits and one coupler as Kerr
//! oscillators with exchange couplings, diagonalized densely.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigh;
use crate::units::{ghz, mhz};

/// Squared overlap below which a Fock label is flagged as ambiguous.
pub const STC_MIN_OVERLAP: f64 = 0.5;

/// Three-mode bosonic network; mode index 2 is the coupler. Rates in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StcParams {
    pub omega: [f64; 3],
    pub anharmonicity: [f64; 3],
    pub g13: f64,
    pub g23: f64,
    pub g12: f64,
    pub levels: usize,
}

impl StcParams {
    /// ω1/2π = 5 GHz, W/2π = 250 MHz on all modes, g13 = g23 = 250 MHz,
    /// g12 = 25 MHz. ω2 and ω3 are placeholders to be swept.
    pub fn reference() -> Self {
        Self {
            omega: [ghz(5.0), ghz(5.1), ghz(6.5)],
            anharmonicity: [mhz(250.0); 3],
            g13: mhz(250.0),
            g23: mhz(250.0),
            g12: mhz(25.0),
            levels: 6,
        }
    }

    pub fn with_frequencies(mut self, omega2: f64, omega3: f64) -> Self {
        self.omega[1] = omega2;
        self.omega[2] = omega3;
        self
    }

    /// Modes 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        let mut p = self.clone();
        p.omega.swap(0, 1);
        p.anharmonicity.swap(0, 1);
        std::mem::swap(&mut p.g13, &mut p.g23);
        p
    }

    pub fn dim(&self) -> usize {
        self.levels.pow(3)
    }

    pub fn index(&self, n: [usize; 3]) -> usize {
        (n[0] * self.levels + n[1]) * self.levels + n[2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidParams(
                "levels per mode must be at least 2".into(),
            ));
        }
        if self.dim() > crate::charge::DENSE_GUARD {
            return Err(Error::DenseGuard(self.dim()));
        }
        let rates = self
            .omega
            .iter()
            .chain(&self.anharmonicity)
            .chain([&self.g13, &self.g23, &self.g12]);
        if rates.clone().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite rate".into()));
        }
        if self.omega.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParams(
                "mode frequencies must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Energy of a Fock product without couplings.
    pub fn bare_energy(&self, n: [usize; 3]) -> f64 {
        (0..3)
            .map(|i| {
                let k = n[i] as f64;
                self.omega[i] * k - 0.5 * self.anharmonicity[i] * k * (k - 1.0)
            })
            .sum()
    }
}

/// Dense H/ħ in the Fock basis, index (n1·L + n2)·L + n3.
pub fn build_stc_hamiltonian(p: &StcParams) -> Result<DMatrix<f64>> {
    p.validate()?;
    let l = p.levels;
    let mut h = DMatrix::zeros(p.dim(), p.dim());
    let pairs = [(0, 2, p.g13), (1, 2, p.g23), (0, 1, p.g12)];
    for n1 in 0..l {
        for n2 in 0..l {
            for n3 in 0..l {
                let n = [n1, n2, n3];
                let a = p.index(n);
                h[(a, a)] = p.bare_energy(n);
                // g (a_i† a_j + h.c.): raise i, lower j.
                for &(i, j, g) in &pairs {
                    if n[j] == 0 || n[i] + 1 == l {
                        continue;
                    }
                    let mut m = n;
                    m[i] += 1;
                    m[j] -= 1;
                    let b = p.index(m);
                    let v = g * ((n[i] + 1) as f64 * n[j] as f64).sqrt();
                    h[(b, a)] = v;
                    h[(a, b)] = v;
                }
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StcPoint {
    /// ζ_ZZ in rad/s.
    pub zeta: f64,
    /// Smallest squared overlap among the four labeled states.
    pub min_overlap: f64,
    /// Two labels claimed the same eigenvector or an overlap fell below
    /// [`STC_MIN_OVERLAP`].
    pub ambiguous: bool,
}

/// Hamiltonian restricted to Fock states with `k` total excitations, which
/// the number-conserving couplings leave invariant. Returns the block and
/// its Fock labels.
pub fn excitation_block(
    p: &StcParams,
    h: &DMatrix<f64>,
    k: usize,
) -> (DMatrix<f64>, Vec<[usize; 3]>) {
    let l = p.levels;
    let mut labels = Vec::new();
    for n1 in 0..l.min(k + 1) {
        for n2 in 0..l.min(k + 1 - n1) {
            let n3 = k - n1 - n2;
            if n3 < l {
                labels.push([n1, n2, n3]);
            }
        }
    }
    let idx: Vec<usize> = labels.iter().map(|&n| p.index(n)).collect();
    let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
    (block, labels)
}

/// ζ_ZZ = E_110 − E_100 − E_010 + E_000, each state taken as the eigenvector
/// of largest overlap with its Fock product.
pub fn stc_zz(p: &StcParams) -> Result<StcPoint> {
    let h = build_stc_hamiltonian(p)?;
    let targets = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]];
    let mut energies = [0.0; 4];
    let mut chosen = [(0usize, 0usize); 4];
    let mut min_overlap = f64::INFINITY;
    for (t, n) in targets.iter().enumerate() {
        let k = n.iter().sum();
        let (block, labels) = excitation_block(p, &h, k);
        let (vals, vecs) = symmetric_eigh(&block);
        let row = labels
            .iter()
            .position(|m| m == n)
            .expect("target in its block");
        let (best, ov) = (0..vals.len())
            .map(|c| (c, vecs[(row, c)].powi(2)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty block");
        energies[t] = vals[best];
        chosen[t] = (k, best);
        min_overlap = min_overlap.min(ov);
    }
    let distinct = (0..4).all(|i| (i + 1..4).all(|j| chosen[i] != chosen[j]));
    Ok(StcPoint {
        zeta: energies[3] - energies[1] - energies[2] + energies[0],
        min_overlap,
        ambiguous: !distinct || min_overlap < STC_MIN_OVERLAP,
    })
}

/// ζ_ZZ over an (ω2, ω3) grid, `zeta[i][j]` at (omega2[i], omega3[j]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StcMap {
    pub omega1: f64,
    pub anharmonicity: f64,
    pub omega2: Vec<f64>,
    pub omega3: Vec<f64>,
    pub points: Vec<Vec<StcPoint>>,
}

impl StcMap {
    /// |ω2 − ω1| < W, with W the qubit-1 anharmonicity.
    pub fn in_straddling_band(&self, i: usize) -> bool {
        (self.omega2[i] - self.omega1).abs() < self.anharmonicity
    }

    pub fn zeta(&self, i: usize, j: usize) -> f64 {
        self.points[i][j].zeta
    }

    /// Neighbouring grid pairs ((i, j), (i′, j′)) across which ζ changes sign.
    pub fn sign_changes(&self) -> Vec<((usize, usize), (usize, usize))> {
        let (n2, n3) = (self.omega2.len(), self.omega3.len());
        let mut out = Vec::new();
        for i in 0..n2 {
            for j in 0..n3 {
                let z = self.zeta(i, j);
                if i + 1 < n2 && z * self.zeta(i + 1, j) < 0.0 {
                    out.push(((i, j), (i + 1, j)));
                }
                if j + 1 < n3 && z * self.zeta(i, j + 1) < 0.0 {
                    out.push(((i, j), (i, j + 1)));
                }
            }
        }
        out
    }

    /// Sign changes with both ends outside the straddling band.
    pub fn sign_changes_outside_band(&self) -> Vec<((usize, usize), (usize, usize))> {
        self.sign_changes()
            .into_iter()
            .filter(|(a, b)| !self.in_straddling_band(a.0) && !self.in_straddling_band(b.0))
            .collect()
    }

    /// Sign changes with both ends inside the band.
    pub fn sign_changes_inside_band(&self) -> Vec<((usize, usize), (usize, usize))> {
        self.sign_changes()
            .into_iter()
            .filter(|(a, b)| self.in_straddling_band(a.0) && self.in_straddling_band(b.0))
            .collect()
    }

    pub fn ambiguous_count(&self) -> usize {
        self.points.iter().flatten().filter(|p| p.ambiguous).count()
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Default sweep: ω2 within ±4 W of ω1, and the coupler from 0.5 GHz above
/// the highest qubit frequency up to ω1 + 3 GHz.
pub fn default_grids(template: &StcParams, points: usize) -> (Vec<f64>, Vec<f64>) {
    let (w1, an) = (template.omega[0], template.anharmonicity[0]);
    (
        linspace(w1 - 4.0 * an, w1 + 4.0 * an, points),
        linspace(w1 + 4.0 * an + ghz(0.5), w1 + ghz(3.0), points),
    )
}

pub fn stc_zz_sweep(template: &StcParams, omega2: &[f64], omega3: &[f64]) -> Result<StcMap> {
    for g in [omega2, omega3] {
        if g.is_empty() || g.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams(
                "sweep grids must be non-empty and increasing".into(),
            ));
        }
    }
    template.validate()?;
    let points = omega2
        .par_iter()
        .map(|&w2| {
            omega3
                .iter()
                .map(|&w3| stc_zz(&template.clone().with_frequencies(w2, w3)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StcMap {
        omega1: template.omega[0],
        anharmonicity: template.anharmonicity[0],
        omega2: omega2.to_vec(),
        omega3: omega3.to_vec(),
        points,
    })
}
