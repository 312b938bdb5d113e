//! Bipartite Schmidt decomposition, Born-weighted branch sampling and
//! entanglement entropy.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::StateVector;
use crate::linalg::{eigh, vdot, vec_norm, CMatrix, C64};

pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;

/// Relative gap below which two coefficients count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// A split of a space's factors into two non-empty, disjoint, covering sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub left: Vec<String>,
    pub right: Vec<String>,
}

impl Bipartition {
    pub fn new<L, R>(left: L, right: R) -> Self
    where
        L: IntoIterator,
        L::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        Self {
            left: left.into_iter().map(Into::into).collect(),
            right: right.into_iter().map(Into::into).collect(),
        }
    }

    /// `left` against every other factor of `psi`'s space.
    pub fn complement_of<I>(psi: &StateVector, left: I) -> Self
    where
        I: IntoIterator,
        I::Item: Into<String>,
    {
        let left: Vec<String> = left.into_iter().map(Into::into).collect();
        let right = psi
            .space()
            .labels()
            .into_iter()
            .filter(|l| !left.iter().any(|x| x == l))
            .map(String::from)
            .collect();
        Self { left, right }
    }

    pub fn swapped(&self) -> Self {
        Self { left: self.right.clone(), right: self.left.clone() }
    }

    /// Factor indices of each side, in space order.
    pub fn resolve(&self, psi: &StateVector) -> Result<(Vec<usize>, Vec<usize>)> {
        let space = psi.space();
        if self.left.is_empty() || self.right.is_empty() {
            return Err(Error::InvalidBipartition("both sides must be non-empty".into()));
        }
        let mut seen = Vec::new();
        for l in self.left.iter().chain(&self.right) {
            if seen.contains(&l) {
                return Err(Error::InvalidBipartition(format!("`{l}` appears twice")));
            }
            if !space.contains(l) {
                return Err(Error::InvalidBipartition(format!("`{l}` is not a factor of {space}")));
            }
            seen.push(l);
        }
        if seen.len() != space.factors().len() {
            return Err(Error::InvalidBipartition(format!("cut does not cover {space}")));
        }
        let pick = |side: &[String]| {
            let mut idx: Vec<usize> = side.iter().map(|l| space.index_of(l).expect("checked")).collect();
            idx.sort_unstable();
            idx
        };
        Ok((pick(&self.left), pick(&self.right)))
    }
}

#[derive(Clone, Debug)]
pub struct SchmidtResult {
    /// Non-negative, descending.
    pub coefficients: Vec<f64>,
    pub left_states: Vec<StateVector>,
    pub right_states: Vec<StateVector>,
    /// Sum of squared coefficients dropped by truncation.
    pub truncation_residual: f64,
    /// Index groups (two or more members) of numerically equal coefficients.
    pub degenerate_groups: Vec<Vec<usize>>,
    pub cut: Bipartition,
}

impl SchmidtResult {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.coefficients.iter().map(|c| c * c).sum();
        self.coefficients.iter().map(|c| c * c / total).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_groups.is_empty()
    }

    /// `sum_j C_j u_j (x) v_j`, in the factor order of the original state
    /// given by `order`.
    pub fn reconstruct(&self, order: &[&str]) -> Result<StateVector> {
        let mut acc: Option<StateVector> = None;
        for ((c, u), v) in self.coefficients.iter().zip(&self.left_states).zip(&self.right_states) {
            let mut term = crate::hilbert::tensor_product(&[u, v])?.permuted(order)?;
            term.scale(C64::new(*c, 0.0));
            acc = Some(match acc {
                None => term,
                Some(mut a) => {
                    for (x, y) in a.amplitudes_mut().iter_mut().zip(term.amplitudes()) {
                        *x += y;
                    }
                    a
                }
            });
        }
        acc.ok_or(Error::EmptyDecomposition)
    }
}

/// Schmidt decomposition of a normalised `psi` across `cut`.
///
/// The coefficient matrix (left multi-index by right multi-index, in the
/// orthonormal discrete basis) is reduced through the Gram matrix of its
/// smaller side: that Hermitian matrix is diagonalised by cyclic Jacobi, the
/// other side's vectors are recovered by applying the coefficient matrix, and
/// the coefficients are taken as the norms of those images. Each left vector
/// is rotated so that its largest-magnitude amplitude is real and positive.
pub fn schmidt_decompose(psi: &StateVector, cut: &Bipartition, trunc_tol: f64) -> Result<SchmidtResult> {
    let (left_idx, right_idx) = cut.resolve(psi)?;
    psi.require_normalized()?;
    let (m, rows, cols, _) = psi.matricize(&left_idx);
    let m = CMatrix::from_row_major(rows, cols, m);

    // Work on the side with the smaller dimension; `a` is (small x big).
    let left_small = rows <= cols;
    let a = if left_small { m } else { m.adjoint() };
    let small = a.rows();
    let big = a.cols();
    let gram = a.gram_rows();
    let eig = eigh(&gram, true);
    let vecs = eig.vectors.expect("vectors requested");

    // small-side vectors s_j, big-side images b_j = a^dagger s_j.
    let mut pairs: Vec<(f64, Vec<C64>, Vec<C64>)> = Vec::with_capacity(small);
    for j in 0..small {
        let s = vecs.column(j);
        let mut b = vec![C64::new(0.0, 0.0); big];
        for (i, si) in s.iter().enumerate() {
            for (bk, aik) in b.iter_mut().zip(a.row(i)) {
                *bk += aik.conj() * si;
            }
        }
        let c = vec_norm(&b);
        pairs.push((c, s, b));
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut coefficients = Vec::new();
    let mut small_vecs: Vec<Vec<C64>> = Vec::new();
    let mut big_vecs: Vec<Vec<C64>> = Vec::new();
    let mut truncation_residual = 0.0;
    for (c, s, mut b) in pairs {
        if c <= trunc_tol || c == 0.0 {
            truncation_residual += c * c;
            continue;
        }
        // Re-orthogonalise against earlier big-side vectors (modified
        // Gram-Schmidt) before normalising.
        for prev in &big_vecs {
            let ov = vdot(prev, &b);
            for (x, p) in b.iter_mut().zip(prev) {
                *x -= ov * p;
            }
        }
        let nb = vec_norm(&b);
        if nb == 0.0 {
            truncation_residual += c * c;
            continue;
        }
        for x in &mut b {
            *x /= nb;
        }
        coefficients.push(c);
        small_vecs.push(s);
        big_vecs.push(b);
    }
    if coefficients.is_empty() {
        return Err(Error::EmptyDecomposition);
    }

    // M = sum_j C_j u_j v_j^T. Left small: s_j = u_j and b_j = C_j conj(v_j).
    // Right small: s_j = conj(v_j) and b_j = C_j u_j.
    let (mut left_vecs, mut right_vecs) = if left_small { (small_vecs, big_vecs) } else { (big_vecs, small_vecs) };
    for v in &mut right_vecs {
        for x in v.iter_mut() {
            *x = x.conj();
        }
    }

    // Phase convention on the left vectors.
    for (u, v) in left_vecs.iter_mut().zip(right_vecs.iter_mut()) {
        let (imax, _) = u
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, x)| if x.norm() > acc.1 + 1e-14 { (i, x.norm()) } else { acc });
        let ph = u[imax] / u[imax].norm();
        for x in u.iter_mut() {
            *x *= ph.conj();
        }
        for x in v.iter_mut() {
            *x *= ph;
        }
    }

    let space = psi.space();
    let to_states = |idx: &[usize], vecs: Vec<Vec<C64>>| -> Result<Vec<StateVector>> {
        let sub = space.select(idx)?;
        let w = sub.volume_element().sqrt();
        vecs.into_iter()
            .map(|v| {
                let amps = v.into_iter().map(|x| x / w).collect();
                StateVector::from_amplitudes(sub.clone(), amps)
            })
            .collect()
    };
    let left_states = to_states(&left_idx, left_vecs)?;
    let right_states = to_states(&right_idx, right_vecs)?;

    let degenerate_groups = degenerate_groups(&coefficients);
    let cut = Bipartition {
        left: left_idx.iter().map(|&i| space.factors()[i].label.clone()).collect(),
        right: right_idx.iter().map(|&i| space.factors()[i].label.clone()).collect(),
    };
    Ok(SchmidtResult { coefficients, left_states, right_states, truncation_residual, degenerate_groups, cut })
}

fn degenerate_groups(coefficients: &[f64]) -> Vec<Vec<usize>> {
    let max = coefficients.first().copied().unwrap_or(0.0);
    let tol = DEGENERACY_TOL * max;
    let mut groups = Vec::new();
    let mut current = vec![0usize];
    for j in 1..coefficients.len() {
        if (coefficients[j - 1] - coefficients[j]).abs() < tol {
            current.push(j);
        } else {
            if current.len() > 1 {
                groups.push(current.clone());
            }
            current = vec![j];
        }
    }
    if current.len() > 1 {
        groups.push(current);
    }
    groups
}

/// Draws branch indices with probability `C_j^2 / sum_k C_k^2`.
///
/// Generator: ChaCha8 seeded with `SeedableRng::seed_from_u64(seed)`. Each
/// draw takes one `next_u64()`, forms `u = (x >> 11) * 2^-53` in `[0, 1)`,
/// and returns the first index whose cumulative probability exceeds `u`.
pub struct BranchSampler {
    cumulative: Vec<f64>,
    rng: ChaCha8Rng,
}

impl BranchSampler {
    pub fn new(result: &SchmidtResult, seed: u64) -> Result<Self> {
        Self::from_weights(&result.coefficients.iter().map(|c| c * c).collect::<Vec<_>>(), seed)
    }

    pub fn from_weights(weights: &[f64], seed: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDecomposition);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidParameter("branch weights must be non-negative with positive sum".into()));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Self { cumulative, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn draw(&mut self) -> usize {
        let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }

    /// Counts of each index over `n` draws.
    pub fn histogram(&mut self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; self.cumulative.len()];
        for _ in 0..n {
            counts[self.draw()] += 1;
        }
        counts
    }
}

/// One Born-weighted draw from `result`.
pub fn sample_branch(result: &SchmidtResult, rng_seed: u64) -> Result<usize> {
    Ok(BranchSampler::new(result, rng_seed)?.draw())
}

/// `-sum_j C_j^2 ln C_j^2`.
pub fn entanglement_entropy(result: &SchmidtResult) -> f64 {
    -result
        .coefficients
        .iter()
        .map(|c| c * c)
        .filter(|p| *p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}
