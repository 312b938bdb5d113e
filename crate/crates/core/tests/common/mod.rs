//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use qframes::dynamics::Profile;
use qframes::{Grid, Space, StateVector, C64};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub struct Uniform(ChaCha8Rng);

impl Uniform {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on [-1, 1).
    pub fn next(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

/// Normalised state with independent uniform real and imaginary parts.
pub fn random_state(space: Space, seed: u64) -> StateVector {
    let mut u = Uniform::new(seed);
    let amps = (0..space.total_dim()).map(|_| C64::new(u.next(), u.next())).collect();
    StateVector::normalized(space, amps).unwrap()
}

/// Orthonormal-basis coefficients as a nalgebra vector.
pub fn coefficients(psi: &StateVector) -> DVector<C64> {
    DVector::from_vec(psi.orthonormal_coefficients())
}

pub fn from_coefficients(space: Space, c: &DVector<C64>) -> StateVector {
    let w = space.volume_element().sqrt();
    StateVector::from_amplitudes(space, c.iter().map(|z| z / w).collect()).unwrap()
}

/// Dense `-hbar^2/(2m) d^2/dx^2` on a periodic grid, built from the unitary
/// discrete Fourier matrix entry by entry.
pub fn dense_kinetic(grid: &Grid, mass: f64, hbar: f64) -> DMatrix<C64> {
    let n = grid.n_points();
    let dk = 2.0 * PI / grid.length();
    let ks: Vec<f64> = (0..n).map(|j| if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * dk).collect();
    DMatrix::from_fn(n, n, |a, b| {
        let dx = grid.point(a) - grid.point(b);
        ks.iter()
            .map(|k| C64::from_polar(hbar * hbar * k * k / (2.0 * mass), k * dx))
            .sum::<C64>()
            / n as f64
    })
}

/// `exp(-i H t / hbar) c` through nalgebra's Hermitian eigendecomposition.
pub fn dense_evolve(h: &DMatrix<C64>, c: &DVector<C64>, t: f64, hbar: f64) -> DVector<C64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| C64::from_polar(1.0, -l * t / hbar)),
    ));
    v * phases * v.adjoint() * c
}

pub fn profile_value(p: &Profile, r: f64) -> f64 {
    match *p {
        Profile::Gaussian { strength, width } => strength * (-r * r / (2.0 * width * width)).exp(),
        Profile::SmoothBox { strength, half_width, edge } => {
            0.5 * strength * (((r + half_width) / edge).tanh() - ((r - half_width) / edge).tanh())
        }
    }
}

/// `rho_keep[i, j] = sum_e c[i, e] conj(c[j, e])` by explicit multi-index
/// loops over every factor, kept factors in the order listed.
pub fn brute_partial_trace(psi: &StateVector, keep: &[&str]) -> DMatrix<C64> {
    let space = psi.space();
    let dims = space.dims();
    let keep_axes: Vec<usize> = keep.iter().map(|l| space.index_of(l).unwrap()).collect();
    let env_axes: Vec<usize> = (0..dims.len()).filter(|a| !keep_axes.contains(a)).collect();
    let c = psi.orthonormal_coefficients();
    let flat = |idx: &[usize]| idx.iter().zip(&dims).fold(0, |acc, (i, d)| acc * d + i);
    let unflatten = |mut n: usize, axes: &[usize]| -> Vec<usize> {
        let mut out = vec![0; axes.len()];
        for (slot, &a) in out.iter_mut().zip(axes).rev() {
            *slot = n % dims[a];
            n /= dims[a];
        }
        out
    };
    let nk: usize = keep_axes.iter().map(|&a| dims[a]).product();
    let ne: usize = env_axes.iter().map(|&a| dims[a]).product();
    let mut rho = DMatrix::zeros(nk, nk);
    for i in 0..nk {
        for j in 0..nk {
            let (ki, kj) = (unflatten(i, &keep_axes), unflatten(j, &keep_axes));
            let mut acc = C64::new(0.0, 0.0);
            for e in 0..ne {
                let ev = unflatten(e, &env_axes);
                let mut full_i = vec![0; dims.len()];
                let mut full_j = vec![0; dims.len()];
                for (k, &a) in keep_axes.iter().enumerate() {
                    full_i[a] = ki[k];
                    full_j[a] = kj[k];
                }
                for (k, &a) in env_axes.iter().enumerate() {
                    full_i[a] = ev[k];
                    full_j[a] = ev[k];
                }
                acc += c[flat(&full_i)] * c[flat(&full_j)].conj();
            }
            rho[(i, j)] = acc;
        }
    }
    rho
}

pub fn to_dense(m: &qframes::CMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Eigenvalues of a Hermitian matrix in descending order.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Half the sum of absolute eigenvalues of `a - b`.
pub fn dense_trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
