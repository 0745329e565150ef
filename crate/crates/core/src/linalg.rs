//! Dense vector kernels on complex slices and a GEMM-backed column block.

use nalgebra::DMatrix;

use crate::C64;

/// ⟨a, b⟩, conjugate-linear in `a`.
#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            re[l] += x[l].re * y[l].re + x[l].im * y[l].im;
            im[l] += x[l].re * y[l].im - x[l].im * y[l].re;
        }
    }
    for (x, y) in ta.iter().zip(tb) {
        re[0] += x.re * y.re + x.im * y.im;
        im[0] += x.re * y.im - x.im * y.re;
    }
    C64::new(re[0] + re[1] + re[2] + re[3], im[0] + im[1] + im[2] + im[3])
}

#[inline]
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// y += alpha·x
#[inline]
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn normalize(x: &mut [C64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(C64::new(1.0 / n, 0.0), x);
    }
    n
}

fn as_real(x: &[C64]) -> &[f64] {
    // SAFETY: Complex<f64> is repr(C) with fields (re, im).
    unsafe { std::slice::from_raw_parts(x.as_ptr() as *const f64, 2 * x.len()) }
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        assert!(
            (rows - 1) * rs + (cols - 1) * cs < len,
            "strided view out of bounds"
        );
    }
}

/// C ← α·A·B + β·C for strided complex matrices (A: m×k, B: k×n, C: m×n).
/// Strides are given as (row stride, column stride).
#[allow(clippy::too_many_arguments)]
pub fn zgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: C64,
    a: &[C64],
    (rsa, csa): (usize, usize),
    b: &[C64],
    (rsb, csb): (usize, usize),
    beta: C64,
    c: &mut [C64],
    (rsc, csc): (usize, usize),
) {
    check_extent(a.len(), m, k, rsa, csa);
    check_extent(b.len(), k, n, rsb, csb);
    check_extent(c.len(), m, n, rsc, csc);
    if m == 0 || n == 0 {
        return;
    }
    use matrixmultiply::CGemmOption::Standard;
    // SAFETY: extents checked above; C64 and [f64; 2] share layout.
    unsafe {
        matrixmultiply::zgemm(
            Standard,
            Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            rsa as isize,
            csa as isize,
            b.as_ptr() as *const [f64; 2],
            rsb as isize,
            csb as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            rsc as isize,
            csc as isize,
        );
    }
}

/// Real C ← Aᵀ·B for column-major A (k×m), B (k×n); C is m×n column-major.
fn dgemm_tn(k: usize, m: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    check_extent(a.len(), k, m, 1, k);
    check_extent(b.len(), k, n, 1, k);
    check_extent(c.len(), m, n, 1, m);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: extents checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
}

/// Column-major block of equal-length complex vectors.
#[derive(Debug, Clone, Default)]
pub struct Block {
    dim: usize,
    ncols: usize,
    data: Vec<C64>,
}

impl Block {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ncols: 0,
            data: Vec::new(),
        }
    }

    pub fn zeros(dim: usize, ncols: usize) -> Self {
        Self {
            dim,
            ncols,
            data: vec![C64::default(); dim * ncols],
        }
    }

    pub fn from_columns(dim: usize, cols: &[Vec<C64>]) -> Self {
        let mut b = Self::new(dim);
        for c in cols {
            b.push(c);
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.ncols == 0
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data[..self.dim * self.ncols]
    }

    pub fn push(&mut self, v: &[C64]) {
        assert_eq!(v.len(), self.dim);
        self.data.truncate(self.dim * self.ncols);
        self.data.extend_from_slice(v);
        self.ncols += 1;
    }

    pub fn append(&mut self, other: &Block) {
        assert_eq!(other.dim, self.dim);
        self.data.truncate(self.dim * self.ncols);
        self.data.extend_from_slice(other.as_slice());
        self.ncols += other.ncols;
    }

    pub fn truncate(&mut self, ncols: usize) {
        self.ncols = self.ncols.min(ncols);
        self.data.truncate(self.dim * self.ncols);
    }

    pub fn columns(&self) -> Vec<Vec<C64>> {
        (0..self.ncols).map(|j| self.col(j).to_vec()).collect()
    }

    /// Columns `from..` as a new block.
    pub fn tail(&self, from: usize) -> Block {
        Block {
            dim: self.dim,
            ncols: self.ncols - from,
            data: self.data[from * self.dim..self.ncols * self.dim].to_vec(),
        }
    }

    /// `selfᴴ·other`.
    pub fn gram(&self, other: &Block) -> DMatrix<C64> {
        assert_eq!(self.dim, other.dim);
        let (m, n, k) = (self.ncols, other.ncols, 2 * self.dim);
        let mut re = vec![0.0; m * n];
        let mut im = vec![0.0; m * n];
        dgemm_tn(
            k,
            m,
            n,
            as_real(self.as_slice()),
            as_real(other.as_slice()),
            &mut re,
        );
        // Im⟨v, w⟩ = Re⟨v, −i·w⟩
        let rot: Vec<C64> = other
            .as_slice()
            .iter()
            .map(|z| C64::new(z.im, -z.re))
            .collect();
        dgemm_tn(k, m, n, as_real(self.as_slice()), as_real(&rot), &mut im);
        DMatrix::from_fn(m, n, |i, j| C64::new(re[i + j * m], im[i + j * m]))
    }

    /// `self·coeffs` as a new block.
    pub fn combine(&self, coeffs: &DMatrix<C64>) -> Block {
        let mut out = Block::zeros(self.dim, coeffs.ncols());
        self.gemm_into(coeffs, C64::new(1.0, 0.0), C64::default(), &mut out);
        out
    }

    /// `target −= self·coeffs`.
    pub fn subtract_combination(&self, coeffs: &DMatrix<C64>, target: &mut Block) {
        self.gemm_into(coeffs, C64::new(-1.0, 0.0), C64::new(1.0, 0.0), target);
    }

    fn gemm_into(&self, coeffs: &DMatrix<C64>, alpha: C64, beta: C64, target: &mut Block) {
        assert_eq!(coeffs.nrows(), self.ncols);
        assert_eq!(coeffs.ncols(), target.ncols);
        assert_eq!(self.dim, target.dim);
        let (dim, m, p) = (self.dim, self.ncols, target.ncols);
        if m == 0 {
            if beta == C64::default() {
                target.data.iter_mut().for_each(|z| *z = C64::default());
            }
            return;
        }
        zgemm(
            dim,
            m,
            p,
            alpha,
            self.as_slice(),
            (1, dim),
            coeffs.as_slice(),
            (1, m),
            beta,
            &mut target.data[..dim * p],
            (1, dim),
        );
    }

    /// Two passes of block classical Gram-Schmidt of `vs` against the
    /// orthonormal columns of `self`.
    pub fn project_out(&self, vs: &mut Block) {
        if self.is_empty() || vs.is_empty() {
            return;
        }
        for _ in 0..2 {
            let c = self.gram(vs);
            self.subtract_combination(&c, vs);
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending
/// order; eigenvectors are the columns of the returned matrix.
pub fn hermitian_eigh(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    let sym = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Real symmetric counterpart of [`hermitian_eigh`].
pub fn symmetric_eigh(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(n: usize, count: usize) -> Vec<Vec<C64>> {
        (0..count)
            .map(|k| {
                (0..n)
                    .map(|i| C64::new(((i * (k + 2)) as f64).sin(), ((i + k) as f64 * 0.3).cos()))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn gram_and_combine_agree_with_naive() {
        let cols = vecs(1103, 5);
        let b = Block::from_columns(1103, &cols);
        let other = Block::from_columns(1103, &cols[1..4]);
        let g = b.gram(&other);
        for i in 0..5 {
            for j in 0..3 {
                let naive = dot(&cols[i], &cols[j + 1]);
                assert!((g[(i, j)] - naive).norm() < 1e-9 * naive.norm().max(1.0));
            }
        }
        let mut c = DMatrix::zeros(5, 1);
        c[(1, 0)] = C64::new(2.0, -1.0);
        c[(4, 0)] = C64::new(0.0, 0.5);
        let out = b.combine(&c);
        for i in 0..1103 {
            let expect = C64::new(2.0, -1.0) * cols[1][i] + C64::new(0.0, 0.5) * cols[4][i];
            assert!((out.col(0)[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_orthogonalizes() {
        let mut basis = Block::new(700);
        for v in vecs(700, 4) {
            let mut vs = Block::from_columns(700, &[v]);
            basis.project_out(&mut vs);
            normalize(vs.col_mut(0));
            basis.append(&vs);
        }
        let g = basis.gram(&basis);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn strided_zgemm_matches_loop() {
        let a: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let b: Vec<C64> = (0..6).map(|i| C64::new(0.5 * i as f64, 2.0)).collect();
        // A is 2×3 row-major, B is 3×2 column-major
        let mut c = vec![C64::default(); 4];
        zgemm(
            2,
            3,
            2,
            C64::new(1.0, 0.0),
            &a,
            (3, 1),
            &b,
            (1, 3),
            C64::default(),
            &mut c,
            (1, 2),
        );
        for i in 0..2 {
            for j in 0..2 {
                let naive: C64 = (0..3).map(|l| a[i * 3 + l] * b[l + 3 * j]).sum();
                assert!((c[i + 2 * j] - naive).norm() < 1e-12);
            }
        }
    }
}
