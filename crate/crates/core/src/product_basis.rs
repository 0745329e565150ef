//! Product eigenbases of the four-transmon Hilbert space.
//!
//! The modes are split into consecutive groups, each group Hamiltonian is
//! diagonalized exactly in the charge basis and the full space is spanned by
//! products of group eigenstates. Two splittings are provided:
//!
//! * [`ProductBasis::uncoupled`]: four single transmons with ω_J5 and all
//!   off-diagonal charging terms dropped. Reference for state labels.
//! * [`ProductBasis::coupler_pair`]: transmons 1 and 2 alone, coupler
//!   transmons 3 and 4 together with their loop junction and mutual
//!   charging term at a given flux. Used for preconditioning and initial
//!   guesses in the eigensolver.
//!
//! Flat coefficient indices follow the charge-basis ordering, the last group
//! fastest, so the uncoupled basis index of levels (l1, l2, l3, l4) equals
//! the charge index of charges with the same digits.

use nalgebra::DMatrix;

use crate::charge::{build_single_mode_operators, ModeLayout};
use crate::circuit::DerivedParams;
use crate::error::Result;
use crate::linalg;
use crate::C64;

#[derive(Debug, Clone)]
struct ModeGroup {
    dim: usize,
    stride: usize,
    energies: Vec<f64>,
    u: DMatrix<C64>,
    uh: DMatrix<C64>,
}

impl ModeGroup {
    fn new(h: &DMatrix<C64>, stride: usize) -> Self {
        let (energies, u) = linalg::hermitian_eigh(h);
        let uh = u.adjoint();
        Self {
            dim: h.nrows(),
            stride,
            energies,
            u,
            uh,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProductBasis {
    layout: ModeLayout,
    groups: Vec<ModeGroup>,
    energy_sum: Vec<f64>,
}

impl ProductBasis {
    /// Eigenbasis of the uncoupled Hamiltonian: ω_J5 and all off-diagonal
    /// charging terms set to zero.
    pub fn uncoupled(derived: &DerivedParams, cutoff: usize) -> Result<Self> {
        let ops = build_single_mode_operators(cutoff)?;
        let layout = ModeLayout::new(cutoff);
        let n2 = ops.n2.to_dense();
        let cos = ops.cos.to_dense();
        let groups = (0..4)
            .map(|m| {
                let h = &n2 * C64::new(4.0 * derived.w[(m, m)], 0.0)
                    - &cos * C64::new(derived.omega_j[m], 0.0);
                ModeGroup::new(&h, layout.stride(m))
            })
            .collect();
        Ok(Self::from_groups(layout, groups))
    }

    /// Transmons 1 and 2 uncoupled, coupler pair (3, 4) exact at `theta_ex`
    /// including the loop junction and the 3–4 charging term.
    pub fn coupler_pair(derived: &DerivedParams, cutoff: usize, theta_ex: f64) -> Result<Self> {
        let ops = build_single_mode_operators(cutoff)?;
        let layout = ModeLayout::new(cutoff);
        let d = layout.d;
        let n = ops.n.to_dense();
        let n2 = ops.n2.to_dense();
        let cos = ops.cos.to_dense();
        let sin = ops.sin.to_dense();
        let id = DMatrix::<C64>::identity(d, d);
        let r = |x: f64| C64::new(x, 0.0);
        let single = |m: usize| &n2 * r(4.0 * derived.w[(m, m)]) - &cos * r(derived.omega_j[m]);
        let mut groups = vec![
            ModeGroup::new(&single(0), layout.stride(0)),
            ModeGroup::new(&single(1), layout.stride(1)),
        ];
        let (st, ct) = theta_ex.sin_cos();
        let j5 = derived.omega_j[4];
        let pair = single(2).kronecker(&id)
            + id.kronecker(&single(3))
            + n.kronecker(&n) * r(8.0 * derived.w[(2, 3)])
            - (cos.kronecker(&cos) + sin.kronecker(&sin)) * r(j5 * ct)
            - (cos.kronecker(&sin) - sin.kronecker(&cos)) * r(j5 * st);
        groups.push(ModeGroup::new(&pair, 1));
        Ok(Self::from_groups(layout, groups))
    }

    fn from_groups(layout: ModeLayout, groups: Vec<ModeGroup>) -> Self {
        let mut energy_sum = vec![0.0];
        for g in &groups {
            energy_sum = energy_sum
                .iter()
                .flat_map(|e| g.energies.iter().map(move |x| e + x))
                .collect();
        }
        debug_assert_eq!(energy_sum.len(), layout.dim());
        Self {
            layout,
            groups,
            energy_sum,
        }
    }

    pub fn layout(&self) -> ModeLayout {
        self.layout
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn group_energies(&self, group: usize) -> &[f64] {
        &self.groups[group].energies
    }

    /// Σ_g ε_g over the flat product index.
    pub fn energy_sum(&self) -> &[f64] {
        &self.energy_sum
    }

    pub fn ground_energy(&self) -> f64 {
        self.groups.iter().map(|g| g.energies[0]).sum()
    }

    /// Per-group level indices of a flat index.
    pub fn levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.groups.len()];
        for (k, g) in self.groups.iter().enumerate().rev() {
            out[k] = index % g.dim;
            index /= g.dim;
        }
        out
    }

    pub fn index(&self, levels: &[usize]) -> usize {
        assert_eq!(levels.len(), self.groups.len());
        self.groups
            .iter()
            .zip(levels)
            .fold(0, |acc, (g, &l)| acc * g.dim + l)
    }

    /// Product of group eigenstates in the charge basis.
    pub fn product_vector(&self, levels: &[usize]) -> Vec<C64> {
        assert_eq!(levels.len(), self.groups.len());
        let mut out = vec![C64::new(1.0, 0.0)];
        for (g, &l) in self.groups.iter().zip(levels) {
            let col = g.u.column(l);
            out = out
                .iter()
                .flat_map(|a| col.iter().map(move |b| a * b))
                .collect();
        }
        out
    }

    /// Flat indices of the `count` lowest product energies, ascending.
    pub fn lowest_indices(&self, count: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.energy_sum.len()).collect();
        order.sort_by(|&a, &b| {
            self.energy_sum[a]
                .total_cmp(&self.energy_sum[b])
                .then(a.cmp(&b))
        });
        order.truncate(count);
        order
    }

    /// Coefficients of `v` in the product eigenbasis.
    pub fn to_coefficients(&self, v: &[C64]) -> Vec<C64> {
        self.transform(v, true)
    }

    pub fn from_coefficients(&self, c: &[C64]) -> Vec<C64> {
        self.transform(c, false)
    }

    fn transform(&self, x: &[C64], adjoint: bool) -> Vec<C64> {
        assert_eq!(x.len(), self.layout.dim());
        let mut a = x.to_vec();
        let mut b = vec![C64::default(); x.len()];
        for g in &self.groups {
            let u = if adjoint { &g.uh } else { &g.u };
            apply_group(u, g.dim, g.stride, &a, &mut b);
            std::mem::swap(&mut a, &mut b);
        }
        a
    }
}

/// y = U_group · x along a group of dimension `dim` with index stride `s`.
fn apply_group(u: &DMatrix<C64>, dim: usize, s: usize, x: &[C64], y: &mut [C64]) {
    let one = C64::new(1.0, 0.0);
    let zero = C64::default();
    if s == 1 {
        let nb = x.len() / dim;
        linalg::zgemm(
            dim,
            dim,
            nb,
            one,
            u.as_slice(),
            (1, dim),
            x,
            (1, dim),
            zero,
            y,
            (1, dim),
        );
        return;
    }
    let block = dim * s;
    for (xb, yb) in x.chunks_exact(block).zip(y.chunks_exact_mut(block)) {
        linalg::zgemm(
            dim,
            dim,
            s,
            one,
            u.as_slice(),
            (1, dim),
            xb,
            (s, 1),
            zero,
            yb,
            (s, 1),
        );
    }
}
