//! Moving between the auxiliary description (centre of mass as a quantum
//! coordinate) and the intrinsic one (branches of the relative state), plus
//! density matrices for comparing the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{make_gaussian, tensor_product, GaussianParams, Grid, Space, StateVector};
use crate::linalg::{eigh, CMatrix, C64};
use crate::schmidt::{schmidt_decompose, Bipartition, BranchSampler, SchmidtResult, DEFAULT_TRUNC_TOL};

/// Below this squared overlap the product form is considered broken.
pub const MIN_OVERLAP_WEIGHT: f64 = 1e-6;

/// `Phi(R) (x) phi_internal (x) psi_s`, with `Phi` a Gaussian on `grid_r`
/// under the label `cm`.
pub fn lift_to_auxiliary(
    cm: &str,
    phi_internal: &StateVector,
    psi_s: &StateVector,
    cm_params: &GaussianParams,
    grid_r: &Grid,
) -> Result<StateVector> {
    phi_internal.require_normalized()?;
    psi_s.require_normalized()?;
    let phi = make_gaussian(cm, grid_r, cm_params)?;
    let mut out = tensor_product(&[&phi, phi_internal, psi_s])?;
    out.normalize();
    Ok(out)
}

/// A relative state together with the weight of the projection that
/// produced it.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub state: StateVector,
    /// `|| <Phi|psi>_R ||^2` before renormalisation.
    pub overlap_weight: f64,
}

/// Partial inner product of `psi` with the single-factor state `phi_cm` over
/// that factor, renormalised. The remaining factors keep their order.
pub fn extract_relative_state(psi: &StateVector, phi_cm: &StateVector) -> Result<Extraction> {
    let pf = phi_cm.space().factors();
    if pf.len() != 1 {
        return Err(Error::InvalidParameter("centre-of-mass state must have exactly one factor".into()));
    }
    let cm = &pf[0];
    let space = psi.space();
    let axis = space
        .index_of(&cm.label)
        .ok_or_else(|| Error::MissingCenterOfMassFactor(cm.label.clone()))?;
    if space.factors()[axis] != *cm {
        return Err(Error::SpaceMismatch(format!("`{}` differs between {} and {}", cm.label, space, phi_cm.space())));
    }
    if space.factors().len() < 2 {
        return Err(Error::InvalidParameter("nothing left after removing the centre of mass".into()));
    }
    let rest: Vec<usize> = (0..space.factors().len()).filter(|&i| i != axis).collect();
    let rest_space = space.select(&rest)?;
    let dims = space.dims();
    let n = dims[axis];
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let w = cm.weight();
    let amps = psi.amplitudes();
    let phi = phi_cm.amplitudes();
    let mut out = vec![C64::new(0.0, 0.0); outer * inner];
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        for (k, p) in phi.iter().enumerate() {
            let pc = p.conj() * w;
            let src = &amps[(o * n + k) * inner..(o * n + k + 1) * inner];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += pc * s;
            }
        }
    }
    let mut state = StateVector::from_amplitudes(rest_space, out)?;
    let norm = state.norm();
    let overlap_weight = norm * norm;
    if overlap_weight < MIN_OVERLAP_WEIGHT {
        return Err(Error::VanishingOverlap(overlap_weight));
    }
    state.scale(C64::new(1.0 / norm, 0.0));
    Ok(Extraction { state, overlap_weight })
}

/// One branch of the intrinsic description.
#[derive(Clone, Debug)]
pub struct Branch {
    pub probability: f64,
    /// `u (x) v` in the factor order of the decomposed state.
    pub state: StateVector,
    pub left: StateVector,
    pub right: StateVector,
}

#[derive(Clone, Debug)]
pub struct BranchEnsemble {
    pub branches: Vec<Branch>,
    pub provenance: SchmidtResult,
}

impl BranchEnsemble {
    pub fn probabilities(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.probability).collect()
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformMode {
    FullEnsemble,
    Sampled(u64),
}

#[derive(Clone, Debug)]
pub enum IntrinsicState {
    Ensemble(BranchEnsemble),
    Sampled { index: usize, branch: Branch },
}

/// Builds the branch ensemble of `psi1` across `cut`.
pub fn branch_ensemble(psi1: &StateVector, cut: &Bipartition) -> Result<BranchEnsemble> {
    let result = schmidt_decompose(psi1, cut, DEFAULT_TRUNC_TOL)?;
    let probs = result.probabilities();
    let order = psi1.space().labels();
    let mut branches = Vec::with_capacity(result.rank());
    for ((p, u), v) in probs.iter().zip(&result.left_states).zip(&result.right_states) {
        let state = tensor_product(&[u, v])?.permuted(&order)?;
        branches.push(Branch { probability: *p, state, left: u.clone(), right: v.clone() });
    }
    Ok(BranchEnsemble { branches, provenance: result })
}

/// Replaces the entangled relative state by its branches: all of them with
/// their weights, or a single one drawn with the Born weights.
pub fn transform_to_intrinsic(psi1: &StateVector, cut: &Bipartition, mode: TransformMode) -> Result<IntrinsicState> {
    let ensemble = branch_ensemble(psi1, cut)?;
    match mode {
        TransformMode::FullEnsemble => Ok(IntrinsicState::Ensemble(ensemble)),
        TransformMode::Sampled(seed) => {
            let index = BranchSampler::new(&ensemble.provenance, seed)?.draw();
            let branch = ensemble.branches.into_iter().nth(index).expect("index in range");
            Ok(IntrinsicState::Sampled { index, branch })
        }
    }
}

/// A density matrix on a set of factors, in the orthonormal discrete basis
/// (grid amplitudes times `sqrt(dx)`), row-major over the kept factors in
/// the order given by `space`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(space: Space, matrix: CMatrix) -> Result<Self> {
        let n = space.total_dim();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for space of dimension {n}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { space, matrix })
    }

    /// `|psi><psi|` over all of `psi`'s factors.
    pub fn pure(psi: &StateVector) -> Self {
        let c = psi.orthonormal_coefficients();
        let n = c.len();
        let matrix = CMatrix::from_fn(n, n, |i, j| c[i] * c[j].conj());
        Self { space: psi.space().clone(), matrix }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn labels(&self) -> Vec<&str> {
        self.space.labels()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr rho^2 = sum |rho_ij|^2 for Hermitian rho.
        let f = self.matrix.frobenius_norm();
        f * f
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.matrix.hermiticity_error()
    }

    /// Descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.matrix, false).values
    }

    /// Position-basis kernel `rho(x, y)`: the stored matrix divided by the
    /// quadrature weight.
    pub fn kernel(&self) -> CMatrix {
        self.matrix.scaled(C64::new(1.0 / self.space.volume_element(), 0.0))
    }
}

fn keep_indices(space: &Space, keep: &[&str], allow_all: bool) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::InvalidKeepSet("keep set is empty".into()));
    }
    let mut idx = Vec::with_capacity(keep.len());
    for l in keep {
        let i = space.index_of(l).ok_or_else(|| Error::InvalidKeepSet(format!("`{l}` is not a factor of {space}")))?;
        if idx.contains(&i) {
            return Err(Error::InvalidKeepSet(format!("`{l}` listed twice")));
        }
        idx.push(i);
    }
    if !allow_all && idx.len() == space.factors().len() {
        return Err(Error::InvalidKeepSet("keep set must be a proper subset".into()));
    }
    idx.sort_unstable();
    Ok(idx)
}

fn partial_trace(psi: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    let (m, rows, cols, _) = psi.matricize(keep);
    let m = CMatrix::from_row_major(rows, cols, m);
    DensityMatrix::new(psi.space().select(keep)?, m.gram_rows())
}

/// Partial trace of `|psi><psi|` over every factor not in `keep`.
pub fn reduced_density_matrix(psi: &StateVector, keep: &[&str]) -> Result<DensityMatrix> {
    psi.require_normalized()?;
    let idx = keep_indices(psi.space(), keep, false)?;
    partial_trace(psi, &idx)
}

/// `sum_j p_j rho_j`, where `rho_j` is branch `j` reduced to `keep`.
pub fn mixed_density_matrix(ensemble: &BranchEnsemble, keep: &[&str]) -> Result<DensityMatrix> {
    let Some(first) = ensemble.branches.first() else {
        return Err(Error::EmptyDecomposition);
    };
    for b in &ensemble.branches {
        for l in keep {
            if !b.state.space().contains(l) {
                return Err(Error::FactorNotInBranch(l.to_string()));
            }
        }
    }
    let idx = keep_indices(first.state.space(), keep, true)?;
    let space = first.state.space().select(&idx)?;
    let n = space.total_dim();
    let mut acc = CMatrix::zeros(n, n);
    for b in &ensemble.branches {
        // When the kept factors are exactly one side of the cut the branch
        // reduces to that side's pure state.
        let side = [&b.left, &b.right].into_iter().find(|s| *s.space() == space);
        let rho = match side {
            Some(s) => DensityMatrix::pure(s),
            None => partial_trace(&b.state, &idx)?,
        };
        acc.add_scaled_in_place(&rho.matrix, C64::new(b.probability, 0.0));
    }
    DensityMatrix::new(space, acc)
}

/// `(1/2) sum |eig(a - b)|`, clamped to `[0, 1]`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.space.dims() != b.space.dims() || a.space.labels() != b.space.labels() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.space, b.space)));
    }
    let diff = a.matrix.sub(&b.matrix);
    let s: f64 = eigh(&diff, false).values.iter().map(|v| v.abs()).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}
