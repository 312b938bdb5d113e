//! Small dense complex matrices and a cyclic Jacobi eigensolver for
//! Hermitian matrices.
//!
//! Everything here works on row-major `Vec<Complex64>` storage. The sizes
//! involved (level blocks, Gram matrices, density matrices on a few hundred
//! grid points) are small enough that an O(n^3) method per sweep is fine.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

pub type C64 = Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let other_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self * self^dagger`, exploiting Hermitian symmetry of the result.
    pub fn gram_rows(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            let ri = self.row(i);
            for j in i..n {
                let rj = self.row(j);
                let s: C64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
                out[(i, j)] = s;
                out[(j, i)] = s.conj();
            }
        }
        out
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn add_scaled_in_place(&mut self, other: &Self, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry of `|A - A^dagger|`; zero for an exactly Hermitian matrix.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues sorted in descending order, with eigenvectors as the columns
/// of `vectors` in the same order (when requested).
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Option<CMatrix>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi diagonalisation of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq` with a diagonal
/// unitary and then applies the ordinary real Jacobi rotation, so the work
/// per rotation is O(n). Sweeps continue until the off-diagonal Frobenius
/// norm drops below `eps * ||A||_F`.
///
/// Only the upper triangle's Hermitian partner is assumed; the input is not
/// checked here.
pub fn eigh(a: &CMatrix, want_vectors: bool) -> HermitianEigen {
    assert!(a.is_square(), "eigh needs a square matrix");
    let n = a.rows();
    let mut m = a.clone();
    // Symmetrise so small input asymmetries cannot stall convergence.
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = want_vectors.then(|| CMatrix::identity(n));

    let scale = m.frobenius_norm();
    if n > 1 && scale > 0.0 {
        let target = f64::EPSILON * scale;
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| 2.0 * m[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, v.as_mut(), p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = v.map(|v| CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]));
    HermitianEigen { values, vectors }
}

fn rotate(m: &mut CMatrix, v: Option<&mut CMatrix>, p: usize, q: usize) {
    let apq = m[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    // Skip rotations that would not change the diagonal in floating point.
    if mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        m[(p, q)] = C64::new(0.0, 0.0);
        m[(q, p)] = C64::new(0.0, 0.0);
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U restricted to (p, q): columns p = (c, -s e^{-i phi}), q = (s, c e^{-i phi}).
    let e = phase.conj();
    let u_pp = C64::new(c, 0.0);
    let u_qp = -e * s;
    let u_pq = C64::new(s, 0.0);
    let u_qq = e * c;

    let n = m.rows();
    // A <- A U (columns)
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * u_pp + akq * u_qp;
        m[(k, q)] = akp * u_pq + akq * u_qq;
    }
    // A <- U^dagger A (rows)
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        m[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);

    if let Some(v) = v {
        for k in 0..n {
            let vkp = v[(k, p)];
            let vkq = v[(k, q)];
            v[(k, p)] = vkp * u_pp + vkq * u_qp;
            v[(k, q)] = vkp * u_pq + vkq * u_qq;
        }
    }
}

/// `exp(factor * H)` for Hermitian `H`, through its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, factor: C64) -> CMatrix {
    let n = h.rows();
    let eig = eigh(h, true);
    let vecs = eig.vectors.expect("vectors requested");
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        let w = (factor * lambda).exp();
        for i in 0..n {
            let vik = vecs[(i, k)] * w;
            for j in 0..n {
                out[(i, j)] += vik * vecs[(j, k)].conj();
            }
        }
    }
    out
}

/// Operator norm of a Hermitian matrix (largest |eigenvalue|).
pub fn hermitian_operator_norm(h: &CMatrix) -> f64 {
    eigh(h, false).values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
