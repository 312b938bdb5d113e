//! Discretised coordinates, finite-level factors and labelled tensor-product
//! state vectors.
//!
//! A [`Space`] is an ordered list of [`Factor`]s. Amplitudes of a
//! [`StateVector`] are stored row-major over that order, so the last factor
//! varies fastest. Coordinate factors carry a uniform periodic [`Grid`] and
//! contribute their spacing `dx` as a quadrature weight to norms and inner
//! products; level factors have unit weight.

use std::f64::consts::PI;
use std::fmt;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vdot, C64};
use crate::spectral::AxisFft;

/// Default tolerance for the unit-norm invariant.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Boundary mass above which a Gaussian is considered clipped by the grid.
pub const CLIP_THRESHOLD: f64 = 1e-12;

/// Uniform periodic grid `x_k = x_min + k dx`, `dx = (x_max - x_min) / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_points: usize,
    x_min: f64,
    x_max: f64,
}

impl Grid {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        Ok(Self { n_points, x_min, x_max })
    }

    /// Grid of `n_points` centred on `center` extending `half_width` either side.
    pub fn centered(n_points: usize, center: f64, half_width: f64) -> Result<Self> {
        Self::new(n_points, center - half_width, center + half_width)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn point(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.point(k)).collect()
    }

    /// Angular wavenumbers in FFT order (non-negative first, then negative).
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / self.length();
        (0..n)
            .map(|j| if j < n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk })
            .collect()
    }

    /// Largest representable |k|, i.e. the Nyquist wavenumber `pi / dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Coordinate(Grid),
    Level(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub label: String,
    pub kind: FactorKind,
}

impl Factor {
    pub fn coordinate(label: impl Into<String>, grid: Grid) -> Self {
        Self { label: label.into(), kind: FactorKind::Coordinate(grid) }
    }

    pub fn level(label: impl Into<String>, d: usize) -> Self {
        Self { label: label.into(), kind: FactorKind::Level(d) }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            FactorKind::Coordinate(g) => g.n_points(),
            FactorKind::Level(d) => *d,
        }
    }

    /// Quadrature weight of one basis element (`dx` or 1).
    pub fn weight(&self) -> f64 {
        match &self.kind {
            FactorKind::Coordinate(g) => g.dx(),
            FactorKind::Level(_) => 1.0,
        }
    }

    pub fn grid(&self) -> Option<&Grid> {
        match &self.kind {
            FactorKind::Coordinate(g) => Some(g),
            FactorKind::Level(_) => None,
        }
    }
}

/// Ordered list of uniquely labelled factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Space {
    factors: Vec<Factor>,
}

impl Space {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(Error::DuplicateFactorLabel(f.label.clone()));
            }
            if f.dim() == 0 {
                return Err(Error::InvalidParameter(format!("factor `{}` has dimension 0", f.label)));
            }
        }
        if factors.is_empty() {
            return Err(Error::InvalidParameter("a space needs at least one factor".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.label.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).product()
    }

    /// Product of the quadrature weights of all factors.
    pub fn volume_element(&self) -> f64 {
        self.factors.iter().map(Factor::weight).product()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn factor(&self, label: &str) -> Result<&Factor> {
        self.index_of(label)
            .map(|i| &self.factors[i])
            .ok_or_else(|| Error::UnknownFactor(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.dims())
    }

    /// Subspace made of the factors at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Space> {
        Space::new(indices.iter().map(|&i| self.factors[i].clone()).collect())
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.factors.iter().map(|x| format!("{}[{}]", x.label, x.dim())).collect();
        write!(f, "{}", parts.join(" x "))
    }
}

pub(crate) fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

/// Reorders a row-major tensor so that new axis `i` is old axis `perm[i]`.
pub(crate) fn permute_axes(data: &[C64], dims: &[usize], perm: &[usize]) -> Vec<C64> {
    let old_strides = strides_of(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
    let total = data.len();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; new_dims.len()];
    let mut src = 0usize;
    for _ in 0..total {
        out.push(data[src]);
        for ax in (0..new_dims.len()).rev() {
            idx[ax] += 1;
            src += src_strides[ax];
            if idx[ax] < new_dims[ax] {
                break;
            }
            src -= src_strides[ax] * new_dims[ax];
            idx[ax] = 0;
        }
    }
    out
}

/// Complex amplitudes over a labelled tensor-product space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: Space,
    amplitudes: Vec<C64>,
    norm_tolerance: f64,
}

impl StateVector {
    /// Wraps raw amplitudes; the length must equal the product of factor
    /// dimensions. No normalisation is applied.
    pub fn from_amplitudes(space: Space, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for space {} of dimension {}",
                amplitudes.len(),
                space,
                space.total_dim()
            )));
        }
        Ok(Self { space, amplitudes, norm_tolerance: NORM_TOLERANCE })
    }

    /// Like [`from_amplitudes`](Self::from_amplitudes) but rescales to unit norm.
    pub fn normalized(space: Space, amplitudes: Vec<C64>) -> Result<Self> {
        let mut s = Self::from_amplitudes(space, amplitudes)?;
        let n = s.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalise a zero state".into()));
        }
        s.scale(C64::new(1.0 / n, 0.0));
        Ok(s)
    }

    /// Normalised state on a single level factor.
    pub fn level(label: impl Into<String>, amplitudes: Vec<C64>) -> Result<Self> {
        let d = amplitudes.len();
        Self::normalized(Space::new(vec![Factor::level(label, d)])?, amplitudes)
    }

    /// Level basis state `|k>` on a `d`-level factor.
    pub fn basis_level(label: impl Into<String>, d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidParameter(format!("basis index {k} >= dimension {d}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); d];
        amps[k] = C64::new(1.0, 0.0);
        Self::level(label, amps)
    }

    /// Normalised state on a single coordinate factor sampled from `f`.
    pub fn from_fn(label: impl Into<String>, grid: Grid, f: impl Fn(f64) -> C64) -> Result<Self> {
        let amps = grid.points().into_iter().map(f).collect();
        Self::normalized(Space::new(vec![Factor::coordinate(label, grid)])?, amps)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_tolerance(&self) -> f64 {
        self.norm_tolerance
    }

    pub fn with_norm_tolerance(mut self, tol: f64) -> Self {
        self.norm_tolerance = tol;
        self
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// `sqrt(sum |a|^2 * prod dx)`.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        (s * self.space.volume_element()).sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= self.norm_tolerance
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > self.norm_tolerance {
            return Err(Error::UnnormalizedInput(n));
        }
        Ok(())
    }

    pub fn scale(&mut self, s: C64) {
        for a in &mut self.amplitudes {
            *a *= s;
        }
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(C64::new(1.0 / n, 0.0));
        }
        n
    }

    /// Amplitudes rescaled by `sqrt(prod dx)`: coordinates in the orthonormal
    /// discrete basis, whose plain Euclidean norm equals [`norm`](Self::norm).
    pub fn orthonormal_coefficients(&self) -> Vec<C64> {
        let w = self.space.volume_element().sqrt();
        self.amplitudes.iter().map(|a| a * w).collect()
    }

    /// Same state with factors reordered to `order`, which must be a
    /// permutation of the current labels.
    pub fn permuted(&self, order: &[&str]) -> Result<StateVector> {
        if order.len() != self.space.factors().len() {
            return Err(Error::SpaceMismatch(format!(
                "permutation {:?} does not cover {}",
                order, self.space
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for label in order {
            let i = self.space.index_of(label).ok_or_else(|| Error::UnknownFactor(label.to_string()))?;
            if perm.contains(&i) {
                return Err(Error::DuplicateFactorLabel(label.to_string()));
            }
            perm.push(i);
        }
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let amps = permute_axes(&self.amplitudes, &self.space.dims(), &perm);
        Ok(StateVector {
            space: self.space.select(&perm)?,
            amplitudes: amps,
            norm_tolerance: self.norm_tolerance,
        })
    }

    /// Reshapes to a `(prod left dims) x (prod right dims)` row-major matrix in
    /// the orthonormal discrete basis. `left` lists factor indices; the right
    /// block is every other factor in space order.
    pub(crate) fn matricize(&self, left: &[usize]) -> (Vec<C64>, usize, usize, Vec<usize>) {
        let nf = self.space.factors().len();
        let right: Vec<usize> = (0..nf).filter(|i| !left.contains(i)).collect();
        let perm: Vec<usize> = left.iter().chain(&right).copied().collect();
        let dims = self.space.dims();
        let rows: usize = left.iter().map(|&i| dims[i]).product();
        let cols: usize = right.iter().map(|&i| dims[i]).product();
        let w = self.space.volume_element().sqrt();
        let data = if perm.iter().enumerate().all(|(i, &p)| i == p) {
            self.amplitudes.iter().map(|a| a * w).collect()
        } else {
            let mut d = permute_axes(&self.amplitudes, &dims, &perm);
            for a in &mut d {
                *a *= w;
            }
            d
        };
        (data, rows, cols, right)
    }

    /// Marginal mean and variance of a coordinate factor's position.
    pub fn position_moments(&self, label: &str) -> Result<(f64, f64)> {
        let axis = self.space.index_of(label).ok_or_else(|| Error::UnknownFactor(label.into()))?;
        let grid = self.space.factors()[axis]
            .grid()
            .ok_or_else(|| Error::InvalidParameter(format!("`{label}` is not a coordinate factor")))?
            .clone();
        let dims = self.space.dims();
        let strides = self.space.strides();
        let mut marginal = vec![0.0; dims[axis]];
        for (i, a) in self.amplitudes.iter().enumerate() {
            marginal[(i / strides[axis]) % dims[axis]] += a.norm_sqr();
        }
        let total: f64 = marginal.iter().sum();
        let mean = marginal.iter().enumerate().map(|(k, p)| p * grid.point(k)).sum::<f64>() / total;
        let var = marginal
            .iter()
            .enumerate()
            .map(|(k, p)| p * (grid.point(k) - mean).powi(2))
            .sum::<f64>()
            / total;
        Ok((mean, var))
    }

    /// Marginal mean and variance of momentum `hbar k` along a coordinate
    /// factor, from the discrete Fourier transform.
    pub fn momentum_moments(&self, label: &str, hbar: f64) -> Result<(f64, f64)> {
        let axis = self.space.index_of(label).ok_or_else(|| Error::UnknownFactor(label.into()))?;
        let grid = self.space.factors()[axis]
            .grid()
            .ok_or_else(|| Error::InvalidParameter(format!("`{label}` is not a coordinate factor")))?
            .clone();
        let ks = grid.wavenumbers();
        let mut planner = FftPlanner::new();
        let mut fft = AxisFft::new(&mut planner, &self.space.dims(), axis);
        let mut weights = vec![0.0; ks.len()];
        fft.inspect(&self.amplitudes, |k, x| weights[k] += x.norm_sqr());
        let total: f64 = weights.iter().sum();
        let mean = weights.iter().zip(&ks).map(|(w, k)| w * hbar * k).sum::<f64>() / total;
        let var = weights.iter().zip(&ks).map(|(w, k)| w * (hbar * k - mean).powi(2)).sum::<f64>() / total;
        Ok((mean, var))
    }

    /// Probability of the set of basis indices for which `inside(axis, k)`
    /// holds on every axis.
    pub fn region_probability(&self, mut inside: impl FnMut(usize, usize) -> bool) -> f64 {
        let dims = self.space.dims();
        let strides = self.space.strides();
        let w = self.space.volume_element();
        let mut idx = vec![0usize; dims.len()];
        let mut total = 0.0;
        for (flat, a) in self.amplitudes.iter().enumerate() {
            for ax in 0..dims.len() {
                idx[ax] = (flat / strides[ax]) % dims[ax];
            }
            if (0..dims.len()).all(|ax| inside(ax, idx[ax])) {
                total += a.norm_sqr();
            }
        }
        total * w
    }
}

/// Parameters of the Gaussian wavepacket
/// `g(R) = (pi sigma^2)^{-1/4} exp(i R P0 / hbar) exp(-(R - R0)^2 / (2 sigma^2))`.
///
/// `sigma` is the amplitude dispersion, so `|g|^2` has standard deviation
/// `sigma / sqrt(2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub center: f64,
    pub momentum: f64,
    pub sigma: f64,
    pub mass: f64,
    pub hbar: f64,
    /// Mass unit `[m]`; `W = mass / unit_mass`.
    #[serde(default = "one")]
    pub unit_mass: f64,
}

fn one() -> f64 {
    1.0
}

impl GaussianParams {
    pub fn new(center: f64, momentum: f64, sigma: f64, mass: f64, hbar: f64) -> Result<Self> {
        let p = Self { center, momentum, sigma, mass, hbar, unit_mass: 1.0 };
        p.validate()?;
        Ok(p)
    }

    /// Packet at rest at the origin whose width follows
    /// `sigma = sigma_ref / sqrt(W)`.
    pub fn scaled_at_rest(sigma_ref: f64, mass: f64, hbar: f64, unit_mass: f64) -> Result<Self> {
        let w = mass / unit_mass;
        let p = Self { center: 0.0, momentum: 0.0, sigma: sigma_ref / w.sqrt(), mass, hbar, unit_mass };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("mass", self.mass), ("hbar", self.hbar), ("unit_mass", self.unit_mass)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.center.is_finite() && self.momentum.is_finite()) {
            return Err(Error::InvalidParameter("packet centre and momentum must be finite".into()));
        }
        Ok(())
    }

    /// Dimensionless mass `W = M / [m]`.
    pub fn w(&self) -> f64 {
        self.mass / self.unit_mass
    }

    /// Velocity dispersion `xi = hbar / (sigma M)`.
    pub fn velocity_dispersion(&self) -> f64 {
        self.hbar / (self.sigma * self.mass)
    }

    /// Standard deviation of `|g|^2`.
    pub fn position_std(&self) -> f64 {
        self.sigma / 2f64.sqrt()
    }

    /// Standard deviation of the momentum distribution.
    pub fn momentum_std(&self) -> f64 {
        self.hbar / (self.sigma * 2f64.sqrt())
    }

    /// Amplitude dispersion after free flight for time `t`:
    /// `sigma(t)^2 = sigma^2 (1 + (hbar t / (M sigma^2))^2)`.
    pub fn free_sigma_at(&self, t: f64) -> f64 {
        let r = self.hbar * t / (self.mass * self.sigma * self.sigma);
        self.sigma * (1.0 + r * r).sqrt()
    }
}

/// Samples the Gaussian of `p` on `grid` as a single-factor state.
pub fn make_gaussian(label: impl Into<String>, grid: &Grid, p: &GaussianParams) -> Result<StateVector> {
    p.validate()?;
    let dx = grid.dx();
    if p.sigma < 3.0 * dx {
        return Err(Error::GridTooCoarse { sigma: p.sigma, dx });
    }
    if (p.momentum / p.hbar).abs() >= grid.k_max() {
        return Err(Error::GridTooCoarse { sigma: p.sigma, dx });
    }
    let pref = (PI * p.sigma * p.sigma).powf(-0.25);
    let amps: Vec<C64> = grid
        .points()
        .into_iter()
        .map(|x| {
            let env = (-(x - p.center).powi(2) / (2.0 * p.sigma * p.sigma)).exp();
            C64::from_polar(pref * env, x * p.momentum / p.hbar)
        })
        .collect();
    let inside: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx;
    let outside = 1.0 - inside;
    if outside > CLIP_THRESHOLD {
        return Err(Error::SupportClipped { mass: outside });
    }
    StateVector::normalized(Space::new(vec![Factor::coordinate(label, grid.clone())])?, amps)
}

/// Outer product of states on disjoint factor sets, factors in input order.
pub fn tensor_product(states: &[&StateVector]) -> Result<StateVector> {
    let Some((first, rest)) = states.split_first() else {
        return Err(Error::InvalidParameter("tensor product of no states".into()));
    };
    let mut factors: Vec<Factor> = first.space.factors().to_vec();
    let mut amps = first.amplitudes.clone();
    for s in rest {
        for f in s.space.factors() {
            if factors.iter().any(|g| g.label == f.label) {
                return Err(Error::DuplicateFactorLabel(f.label.clone()));
            }
            factors.push(f.clone());
        }
        let mut next = Vec::with_capacity(amps.len() * s.amplitudes.len());
        for a in &amps {
            next.extend(s.amplitudes.iter().map(|b| a * b));
        }
        amps = next;
    }
    let tol = states.iter().map(|s| s.norm_tolerance).fold(0.0, f64::max);
    Ok(StateVector::from_amplitudes(Space::new(factors)?, amps)?.with_norm_tolerance(tol))
}

/// `<a|b>` with quadrature weights; conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    if a.space != b.space {
        return Err(Error::SpaceMismatch(format!("{} vs {}", a.space, b.space)));
    }
    Ok(vdot(&a.amplitudes, &b.amplitudes) * a.space.volume_element())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(sigma: f64, r0: f64, p0: f64) -> StateVector {
        let grid = Grid::new(256, -16.0, 16.0).unwrap();
        make_gaussian("x", &grid, &GaussianParams::new(r0, p0, sigma, 1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(matches!(Grid::new(6, 0.0, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(12, 0.0, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(16, 1.0, 1.0), Err(Error::InvalidGrid(_))));
        let g = Grid::new(8, -4.0, 4.0).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.point(3), -1.0);
    }

    #[test]
    fn wavenumbers_fft_order() {
        let g = Grid::new(8, 0.0, 8.0).unwrap();
        let k = g.wavenumbers();
        let dk = 2.0 * PI / 8.0;
        assert_eq!(k[1], dk);
        assert_eq!(k[4], -4.0 * dk);
        assert_eq!(k[7], -dk);
    }

    #[test]
    fn gaussian_is_normalized() {
        let g = gauss(1.0, 0.0, 0.0);
        assert!((g.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let g = gauss(1.0, 2.5, 1.0);
        let (x, vx) = g.position_moments("x").unwrap();
        let (p, vp) = g.momentum_moments("x", 1.0).unwrap();
        assert!((x - 2.5).abs() < 1e-8, "{x}");
        assert!((p - 1.0).abs() < 1e-8, "{p}");
        assert!((vx.sqrt() - 1.0 / 2f64.sqrt()).abs() < 1e-8);
        assert!((vp.sqrt() - 1.0 / 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn velocity_dispersion_follows_hbar_over_sigma_m() {
        let p = GaussianParams::new(0.0, 0.0, 0.5, 10.0, 1.0).unwrap();
        assert!((p.velocity_dispersion() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn scaled_widths_shrink_with_w() {
        let a = GaussianParams::scaled_at_rest(2.0, 1e2, 1.0, 1.0).unwrap();
        let b = GaussianParams::scaled_at_rest(2.0, 1e4, 1.0, 1.0).unwrap();
        assert!((a.sigma / b.sigma - 10.0).abs() < 1e-12);
        assert!((a.velocity_dispersion() / b.velocity_dispersion() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_errors() {
        let grid = Grid::new(64, -8.0, 8.0).unwrap();
        let coarse = GaussianParams::new(0.0, 0.0, 0.5, 1.0, 1.0).unwrap();
        assert!(matches!(make_gaussian("x", &grid, &coarse), Err(Error::GridTooCoarse { .. })));
        let clipped = GaussianParams::new(6.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(make_gaussian("x", &grid, &clipped), Err(Error::SupportClipped { .. })));
    }

    #[test]
    fn far_gaussians_are_orthogonal() {
        let grid = Grid::new(512, -16.0, 48.0).unwrap();
        let p0 = GaussianParams::new(0.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let p1 = GaussianParams::new(20.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let a = make_gaussian("x", &grid, &p0).unwrap();
        let b = make_gaussian("x", &grid, &p1).unwrap();
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-10);
        assert!((inner_product(&a, &a).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_dimensions_and_norm() {
        let g8 = Grid::new(8, -4.0, 4.0).unwrap();
        let a = StateVector::from_fn("a", g8.clone(), |x| C64::new((-x * x).exp(), 0.0)).unwrap();
        let b = StateVector::from_fn("b", g8, |x| C64::new(1.0 + x * x, 0.3)).unwrap();
        let c = StateVector::basis_level("c", 2, 1).unwrap();
        let t = tensor_product(&[&a, &b, &c]).unwrap();
        assert_eq!(t.len(), 128);
        assert!((t.norm() - 1.0).abs() < 1e-12);
        let dup = tensor_product(&[&a, &a]);
        assert!(matches!(dup, Err(Error::DuplicateFactorLabel(_))));
    }

    #[test]
    fn inner_product_space_mismatch() {
        let a = StateVector::basis_level("a", 2, 0).unwrap();
        let b = StateVector::basis_level("b", 2, 0).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn permute_round_trip() {
        let a = StateVector::level("a", vec![C64::new(1.0, 0.0), C64::new(2.0, 1.0)]).unwrap();
        let b = StateVector::level("b", vec![C64::new(0.5, 0.0), C64::new(0.0, 1.0), C64::new(1.0, 1.0)]).unwrap();
        let ab = tensor_product(&[&a, &b]).unwrap();
        let ba = tensor_product(&[&b, &a]).unwrap();
        let p = ab.permuted(&["b", "a"]).unwrap();
        for (x, y) in p.amplitudes().iter().zip(ba.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
    }
}
