//! Hamiltonians of the composite system, Strang-split spectral propagation,
//! the factorised (product-form) evolution and the diagnostics that measure
//! how well the product form holds.
//!
//! The total Hamiltonian is
//!
//! ```text
//! H = sum_axes P^2 / 2m  +  sum_axes V(x)  +  H_in  +  sum_int f(x_p - c) K
//! ```
//!
//! where `H_in` and every coupling operator `K` act on the single level
//! factor, and each interaction profile `f` depends on the separation of a
//! particle coordinate from a centre (another coordinate factor, or a fixed
//! position once the centre has been frozen). Everything except the kinetic
//! part is block diagonal in position, one `d x d` block per grid point.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{inner_product, tensor_product, FactorKind, Grid, Space, StateVector};
use crate::linalg::{expm_hermitian, hermitian_operator_norm, CMatrix, C64};
use crate::spectral::AxisFft;

/// Tolerance for Hermiticity of level operators.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Where an interaction profile is centred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    /// Another coordinate factor (e.g. the centre of mass `R_A`).
    Factor(String),
    /// A fixed position.
    Fixed(f64),
}

/// Radial shape of an interaction, as a function of the separation `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Profile {
    /// `strength * exp(-r^2 / (2 width^2))`
    Gaussian { strength: f64, width: f64 },
    /// `strength * (tanh((r + h) / edge) - tanh((r - h) / edge)) / 2`: a
    /// flat-bottomed box of half-width `h` with soft walls. Negative strength
    /// gives a well.
    SmoothBox { strength: f64, half_width: f64, edge: f64 },
}

impl Profile {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Profile::Gaussian { strength, width } => strength * (-r * r / (2.0 * width * width)).exp(),
            Profile::SmoothBox { strength, half_width, edge } => {
                0.5 * strength * (((r + half_width) / edge).tanh() - ((r - half_width) / edge).tanh())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Profile::Gaussian { strength, width } => strength.is_finite() && width > 0.0,
            Profile::SmoothBox { strength, half_width, edge } => {
                strength.is_finite() && half_width > 0.0 && edge > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad interaction profile {self:?}")))
        }
    }
}

/// `f(x_particle - center) (x) K`, with `K = identity` when `operator` is
/// `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub particle: String,
    pub center: Center,
    pub profile: Profile,
    pub operator: Option<CMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub hbar: f64,
    /// `(coordinate label, mass)`.
    pub kinetic: Vec<(String, f64)>,
    /// External potentials sampled on a coordinate factor's grid.
    pub potentials: Vec<(String, Vec<f64>)>,
    /// The level factor that `internal` and coupling operators act on.
    pub level_factor: Option<String>,
    pub internal: Option<CMatrix>,
    pub interactions: Vec<Interaction>,
}

impl HamiltonianSpec {
    pub fn new(hbar: f64) -> Self {
        Self {
            hbar,
            kinetic: Vec::new(),
            potentials: Vec::new(),
            level_factor: None,
            internal: None,
            interactions: Vec::new(),
        }
    }

    pub fn with_kinetic(mut self, label: impl Into<String>, mass: f64) -> Self {
        self.kinetic.push((label.into(), mass));
        self
    }

    pub fn with_potential(mut self, label: impl Into<String>, values: Vec<f64>) -> Self {
        self.potentials.push((label.into(), values));
        self
    }

    pub fn with_level_factor(mut self, label: impl Into<String>) -> Self {
        self.level_factor = Some(label.into());
        self
    }

    pub fn with_internal(mut self, label: impl Into<String>, h: CMatrix) -> Self {
        self.level_factor = Some(label.into());
        self.internal = Some(h);
        self
    }

    pub fn with_interaction(mut self, interaction: Interaction) -> Self {
        self.interactions.push(interaction);
        self
    }

    pub fn mass_of(&self, label: &str) -> Option<f64> {
        self.kinetic.iter().find(|(l, _)| l == label).map(|(_, m)| *m)
    }

    /// Checks every label and operator against `space`.
    pub fn validate(&self, space: &Space) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {}", self.hbar)));
        }
        let coordinate = |label: &str| -> Result<&Grid> {
            space
                .factor(label)?
                .grid()
                .ok_or_else(|| Error::InvalidParameter(format!("`{label}` is not a coordinate factor")))
        };
        for (label, mass) in &self.kinetic {
            coordinate(label)?;
            if !(*mass > 0.0 && mass.is_finite()) {
                return Err(Error::InvalidParameter(format!("mass of `{label}` must be positive")));
            }
        }
        for (label, values) in &self.potentials {
            let g = coordinate(label)?;
            if values.len() != g.n_points() {
                return Err(Error::DimensionMismatch(format!(
                    "potential on `{label}` has {} samples, grid has {}",
                    values.len(),
                    g.n_points()
                )));
            }
        }
        let d = match &self.level_factor {
            Some(label) => match space.factor(label)?.kind {
                FactorKind::Level(d) => Some(d),
                FactorKind::Coordinate(_) => {
                    return Err(Error::InvalidParameter(format!("`{label}` is not a level factor")))
                }
            },
            None => None,
        };
        let check_op = |name: &str, m: &CMatrix| -> Result<()> {
            let Some(d) = d else {
                return Err(Error::InvalidParameter(format!("{name} given but no level factor set")));
            };
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch(format!("{name} is {}x{}, level factor has d = {d}", m.rows(), m.cols())));
            }
            if !m.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::NonHermitian(name.to_string()));
            }
            Ok(())
        };
        if let Some(h) = &self.internal {
            check_op("internal Hamiltonian", h)?;
        }
        for int in &self.interactions {
            coordinate(&int.particle)?;
            if let Center::Factor(c) = &int.center {
                coordinate(c)?;
                if *c == int.particle {
                    return Err(Error::InvalidParameter(format!("interaction of `{c}` with itself")));
                }
            }
            int.profile.validate()?;
            if let Some(k) = &int.operator {
                check_op(&format!("coupling operator on `{}`", int.particle), k)?;
            }
        }
        Ok(())
    }

    /// The Hamiltonian seen by the relative degrees of freedom when the
    /// centre of mass `cm` is pinned at `r0`: kinetic and external terms on
    /// `cm` are dropped, and every interaction centred on `cm` is centred on
    /// the fixed position instead.
    pub fn frozen_at(&self, cm: &str, r0: f64) -> Result<Self> {
        if self.interactions.iter().any(|i| i.particle == cm) {
            return Err(Error::InvalidParameter(format!(
                "cannot freeze `{cm}`: it is the moving particle of an interaction"
            )));
        }
        let mut out = self.clone();
        out.kinetic.retain(|(l, _)| l != cm);
        out.potentials.retain(|(l, _)| l != cm);
        for int in &mut out.interactions {
            if int.center == Center::Factor(cm.to_string()) {
                int.center = Center::Fixed(r0);
            }
        }
        Ok(out)
    }

    /// Same Hamiltonian without the kinetic term of `label`, which then acts
    /// as a parameter rather than a dynamical coordinate.
    pub fn without_kinetic(&self, label: &str) -> Self {
        let mut out = self.clone();
        out.kinetic.retain(|(l, _)| l != label);
        out
    }

    /// Only the kinetic term of `label`.
    pub fn free_part(&self, label: &str) -> Result<Self> {
        let mass = self
            .mass_of(label)
            .ok_or_else(|| Error::InvalidParameter(format!("no kinetic term for `{label}`")))?;
        Ok(HamiltonianSpec::new(self.hbar).with_kinetic(label, mass))
    }
}

/// Position-diagonal part of a Hamiltonian laid out per level fibre.
struct PotentialLayout {
    d: usize,
    inner: usize,
    n_fibers: usize,
    fiber_block: Vec<u32>,
    fiber_scalar: Option<Vec<f64>>,
    blocks: Vec<CMatrix>,
    block_coupling: Vec<f64>,
}

impl PotentialLayout {
    fn new(space: &Space, h: &HamiltonianSpec) -> Result<Self> {
        let dims = space.dims();
        let strides = space.strides();
        let factors = space.factors();
        let level_axis = h.level_factor.as_deref().map(|l| space.index_of(l).expect("validated"));
        let (d, inner) = match level_axis {
            Some(a) => (dims[a], strides[a]),
            None => (1, 1),
        };
        let total = space.total_dim();
        let n_fibers = total / d;

        // Coordinate axes that enter any interaction, in space order.
        let mut coupled: Vec<usize> = Vec::new();
        for int in &h.interactions {
            let mut add = |l: &str| {
                let a = space.index_of(l).expect("validated");
                if !coupled.contains(&a) {
                    coupled.push(a);
                }
            };
            add(&int.particle);
            if let Center::Factor(c) = &int.center {
                add(c);
            }
        }
        coupled.sort_unstable();
        let block_dims: Vec<usize> = coupled.iter().map(|&a| dims[a]).collect();
        let n_blocks: usize = block_dims.iter().product();

        let grid_points: Vec<Option<Vec<f64>>> = factors.iter().map(|f| f.grid().map(Grid::points)).collect();
        let ops: Vec<Option<f64>> = h
            .interactions
            .iter()
            .map(|i| i.operator.as_ref().map(hermitian_operator_norm))
            .collect();

        let mut blocks = Vec::with_capacity(n_blocks);
        let mut block_coupling = Vec::with_capacity(n_blocks);
        let mut bidx = vec![0usize; coupled.len()];
        for b in 0..n_blocks {
            let mut rem = b;
            for k in (0..coupled.len()).rev() {
                bidx[k] = rem % block_dims[k];
                rem /= block_dims[k];
            }
            let coord = |label: &str| -> f64 {
                let a = space.index_of(label).expect("validated");
                let k = coupled.iter().position(|&c| c == a).expect("coupled axis");
                grid_points[a].as_ref().expect("coordinate")[bidx[k]]
            };
            let mut m = h.internal.clone().unwrap_or_else(|| CMatrix::zeros(d, d));
            let mut mag = 0.0;
            for (int, op_norm) in h.interactions.iter().zip(&ops) {
                let c = match &int.center {
                    Center::Factor(l) => coord(l),
                    Center::Fixed(x) => *x,
                };
                let f = int.profile.value(coord(&int.particle) - c);
                match &int.operator {
                    Some(k) => m.add_scaled_in_place(k, C64::new(f, 0.0)),
                    None => {
                        for i in 0..d {
                            m[(i, i)] += f;
                        }
                    }
                }
                mag += f.abs() * op_norm.unwrap_or(1.0);
            }
            blocks.push(m);
            block_coupling.push(mag);
        }

        let mut fiber_block = Vec::with_capacity(n_fibers);
        let mut fiber_scalar = (!h.potentials.is_empty()).then(|| Vec::with_capacity(n_fibers));
        let pot_axes: Vec<(usize, &Vec<f64>)> = h
            .potentials
            .iter()
            .map(|(l, v)| (space.index_of(l).expect("validated"), v))
            .collect();
        for f in 0..n_fibers {
            let base = (f / inner) * d * inner + f % inner;
            let mut b = 0usize;
            for (k, &a) in coupled.iter().enumerate() {
                b = b * block_dims[k] + (base / strides[a]) % dims[a];
            }
            fiber_block.push(b as u32);
            if let Some(s) = fiber_scalar.as_mut() {
                s.push(pot_axes.iter().map(|&(a, v)| v[(base / strides[a]) % dims[a]]).sum());
            }
        }
        Ok(Self { d, inner, n_fibers, fiber_block, fiber_scalar, blocks, block_coupling })
    }

    fn base(&self, f: usize) -> usize {
        (f / self.inner) * self.d * self.inner + f % self.inner
    }

    fn is_trivial(&self) -> bool {
        self.fiber_scalar.is_none() && self.blocks.iter().all(|m| m.frobenius_norm() == 0.0)
    }
}

/// Exponentiated potential for one time increment.
struct PotentialStep {
    blocks: Vec<C64>,
    phases: Option<Vec<C64>>,
}

impl PotentialStep {
    fn new(layout: &PotentialLayout, tau: f64, hbar: f64) -> Self {
        let d = layout.d;
        let factor = C64::new(0.0, -tau / hbar);
        let mut blocks = Vec::with_capacity(layout.blocks.len() * d * d);
        for m in &layout.blocks {
            if d == 1 {
                blocks.push((factor * m[(0, 0)].re).exp());
            } else {
                blocks.extend_from_slice(expm_hermitian(m, factor).as_slice());
            }
        }
        let phases = layout
            .fiber_scalar
            .as_ref()
            .map(|s| s.iter().map(|&v| (factor * v).exp()).collect());
        Self { blocks, phases }
    }
}

/// Strang-split spectral propagator for a fixed Hamiltonian and step.
///
/// One step is `exp(-i V dt/2) exp(-i T dt) exp(-i V dt/2)` with `T`
/// applied axis by axis in Fourier space. Consecutive half potential steps
/// are merged inside [`advance`](Self::advance).
pub struct Propagator {
    space: Space,
    dt: f64,
    layout: PotentialLayout,
    half: Option<PotentialStep>,
    full: Option<PotentialStep>,
    kinetic: Vec<(AxisFft, Vec<C64>)>,
    fiber: Vec<C64>,
}

impl Propagator {
    pub fn new(space: &Space, h: &HamiltonianSpec, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be finite and non-zero, got {dt}")));
        }
        h.validate(space)?;
        let ratio = cfl_ratio(space, h, dt);
        if ratio > PI {
            return Err(Error::CflViolation { dt, ratio });
        }
        let layout = PotentialLayout::new(space, h)?;
        let (half, full) = if layout.is_trivial() {
            (None, None)
        } else {
            (Some(PotentialStep::new(&layout, 0.5 * dt, h.hbar)), Some(PotentialStep::new(&layout, dt, h.hbar)))
        };
        let mut planner = FftPlanner::new();
        let dims = space.dims();
        let mut kinetic = Vec::new();
        for (label, mass) in &h.kinetic {
            let axis = space.index_of(label).expect("validated");
            let grid = space.factors()[axis].grid().expect("validated");
            let n = grid.n_points() as f64;
            let phases = grid
                .wavenumbers()
                .into_iter()
                .map(|k| C64::from_polar(1.0 / n, -h.hbar * k * k * dt / (2.0 * mass)))
                .collect();
            kinetic.push((AxisFft::new(&mut planner, &dims, axis), phases));
        }
        let d = layout.d;
        Ok(Self { space: space.clone(), dt, layout, half, full, kinetic, fiber: vec![C64::new(0.0, 0.0); d] })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn apply_potential(&mut self, psi: &mut [C64], full: bool) {
        let step = if full { self.full.as_ref() } else { self.half.as_ref() };
        let Some(step) = step else { return };
        let d = self.layout.d;
        let inner = self.layout.inner;
        if d == 1 {
            for (f, a) in psi.iter_mut().enumerate() {
                let mut u = step.blocks[self.layout.fiber_block[f] as usize];
                if let Some(p) = &step.phases {
                    u *= p[f];
                }
                *a *= u;
            }
            return;
        }
        let fiber = &mut self.fiber;
        for f in 0..self.layout.n_fibers {
            let base = self.layout.base(f);
            for (l, v) in fiber.iter_mut().enumerate() {
                *v = psi[base + l * inner];
            }
            let b = self.layout.fiber_block[f] as usize;
            let u = &step.blocks[b * d * d..(b + 1) * d * d];
            let phase = step.phases.as_ref().map(|p| p[f]);
            for i in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..d {
                    acc += u[i * d + j] * fiber[j];
                }
                psi[base + i * inner] = match phase {
                    Some(p) => acc * p,
                    None => acc,
                };
            }
        }
    }

    fn apply_kinetic(&mut self, psi: &mut [C64]) {
        for (fft, phases) in &mut self.kinetic {
            fft.filter(psi, |k, x| *x *= phases[k]);
        }
    }

    /// Advances `psi` by `steps` full steps in place.
    pub fn advance(&mut self, psi: &mut StateVector, steps: usize) -> Result<()> {
        if psi.space() != &self.space {
            return Err(Error::SpaceMismatch(format!("{} vs {}", psi.space(), self.space)));
        }
        if steps == 0 {
            return Ok(());
        }
        let amps = psi.amplitudes_mut();
        self.apply_potential(amps, false);
        for s in 0..steps {
            self.apply_kinetic(amps);
            self.apply_potential(amps, s + 1 < steps);
        }
        Ok(())
    }

    /// Runs `steps` steps, calling `observe(step, &state)` at step 0, every
    /// `every` steps and at the end.
    pub fn run(
        &mut self,
        mut psi: StateVector,
        steps: usize,
        every: usize,
        mut observe: impl FnMut(usize, &StateVector),
    ) -> Result<StateVector> {
        let every = if every == 0 { steps.max(1) } else { every };
        observe(0, &psi);
        let mut done = 0;
        while done < steps {
            let chunk = every.min(steps - done);
            self.advance(&mut psi, chunk)?;
            done += chunk;
            observe(done, &psi);
        }
        Ok(psi)
    }
}

fn cfl_ratio(space: &Space, h: &HamiltonianSpec, dt: f64) -> f64 {
    h.kinetic
        .iter()
        .filter_map(|(l, m)| {
            let g = space.factor(l).ok()?.grid()?;
            Some(dt.abs() * h.hbar * g.k_max().powi(2) / (2.0 * m))
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub trajectory: Vec<(f64, StateVector)>,
    pub final_state: StateVector,
    /// Largest `| ||psi(t)|| - 1 |` over the checkpoints.
    pub norm_drift: f64,
    pub dt: f64,
    pub steps: usize,
}

/// Exact (up to splitting error) unitary evolution of `psi0` under `h`.
pub fn evolve_exact(
    psi0: &StateVector,
    h: &HamiltonianSpec,
    dt: f64,
    steps: usize,
    checkpoint_every: usize,
) -> Result<PropagationResult> {
    let mut prop = Propagator::new(psi0.space(), h, dt)?;
    let mut trajectory = Vec::new();
    let mut drift: f64 = 0.0;
    let final_state = prop.run(psi0.clone(), steps, checkpoint_every, |s, psi| {
        drift = drift.max((psi.norm() - 1.0).abs());
        trajectory.push((s as f64 * dt, psi.clone()));
    })?;
    Ok(PropagationResult { trajectory, final_state, norm_drift: drift, dt, steps })
}

/// Separate trajectories of the freely moving centre of mass and of the
/// relative state evolved with the centre frozen.
#[derive(Clone, Debug)]
pub struct FactorizedParts {
    pub center_of_mass: PropagationResult,
    pub relative: PropagationResult,
    /// Position the interaction centre was frozen at.
    pub frozen_center: f64,
}

impl FactorizedParts {
    /// `Phi(t) (x) Psi_1(t)` at the final time.
    pub fn final_product(&self) -> Result<StateVector> {
        tensor_product(&[&self.center_of_mass.final_state, &self.relative.final_state])
    }
}

/// Evolves the centre of mass under its kinetic term alone and the relative
/// state under everything else with the centre of mass pinned at its initial
/// mean position.
pub fn factorized_parts(
    phi_cm: &StateVector,
    psi1_0: &StateVector,
    h: &HamiltonianSpec,
    dt: f64,
    steps: usize,
    checkpoint_every: usize,
) -> Result<FactorizedParts> {
    let cm_factors = phi_cm.space().factors();
    if cm_factors.len() != 1 || cm_factors[0].grid().is_none() {
        return Err(Error::InvalidParameter("centre-of-mass state must live on one coordinate factor".into()));
    }
    let cm = cm_factors[0].label.clone();
    if psi1_0.space().contains(&cm) {
        return Err(Error::DuplicateFactorLabel(cm));
    }
    let (r0, _) = phi_cm.position_moments(&cm)?;
    let h_cm = h.free_part(&cm)?;
    let h_rel = h.frozen_at(&cm, r0)?;
    let center_of_mass = evolve_exact(phi_cm, &h_cm, dt, steps, checkpoint_every)?;
    let relative = evolve_exact(psi1_0, &h_rel, dt, steps, checkpoint_every)?;
    Ok(FactorizedParts { center_of_mass, relative, frozen_center: r0 })
}

/// The factorised evolution `Phi(t) (x) Psi_1(t)`, returned on the space
/// `[cm factors, relative factors]`.
pub fn evolve_factorized(
    phi_cm: &StateVector,
    psi1_0: &StateVector,
    h: &HamiltonianSpec,
    dt: f64,
    steps: usize,
    checkpoint_every: usize,
) -> Result<PropagationResult> {
    let parts = factorized_parts(phi_cm, psi1_0, h, dt, steps, checkpoint_every)?;
    let mut trajectory = Vec::with_capacity(parts.relative.trajectory.len());
    let mut drift: f64 = 0.0;
    for ((t, phi), (_, rel)) in parts.center_of_mass.trajectory.iter().zip(&parts.relative.trajectory) {
        let prod = tensor_product(&[phi, rel])?;
        drift = drift.max((prod.norm() - 1.0).abs());
        trajectory.push((*t, prod));
    }
    let final_state = parts.final_product()?;
    Ok(PropagationResult { trajectory, final_state, norm_drift: drift, dt, steps })
}

/// Relative state conditioned on every centre-of-mass position of `grid`:
/// starts from the uniform superposition over the grid times `psi1_0` and
/// evolves without the centre-of-mass kinetic term, so each slice evolves
/// with the interaction centred at that slice's position.
pub fn evolve_conditional(
    cm: &str,
    grid: &Grid,
    psi1_0: &StateVector,
    h: &HamiltonianSpec,
    dt: f64,
    steps: usize,
    checkpoint_every: usize,
) -> Result<PropagationResult> {
    let uniform = StateVector::from_fn(cm, grid.clone(), |_| C64::new(1.0, 0.0))?;
    let start = tensor_product(&[&uniform, psi1_0])?;
    evolve_exact(&start, &h.without_kinetic(cm), dt, steps, checkpoint_every)
}

/// Norm of the term `(P_cm^2 / 2M) Psi_1` neglected by the product form.
///
/// `psi1` is a conditional state over the centre-of-mass factor `cm` (as
/// produced by [`evolve_conditional`]): every slice is the relative state for
/// that centre position, with equal weight across slices. The second
/// derivative along `cm` uses fourth-order central differences
/// (second-order one-sided at the two edge points on each side).
///
/// With `envelope = Some(Phi)` the slices are weighted by `|Phi(R)|^2`,
/// giving `|| Phi(R) (P^2/2M) Psi_1 ||`; without it the plain norm of
/// `(P^2/2M) psi1` is returned.
pub fn factorization_residual(
    psi1: &StateVector,
    cm: &str,
    envelope: Option<&StateVector>,
    mass: f64,
    hbar: f64,
) -> Result<f64> {
    let space = psi1.space();
    let axis = space.index_of(cm).ok_or_else(|| Error::MissingCenterOfMassFactor(cm.to_string()))?;
    let grid = space.factors()[axis]
        .grid()
        .ok_or_else(|| Error::MissingCenterOfMassFactor(cm.to_string()))?
        .clone();
    if !(mass > 0.0 && hbar > 0.0) {
        return Err(Error::InvalidParameter("mass and hbar must be positive".into()));
    }
    let n = grid.n_points();
    let h2 = grid.dx() * grid.dx();
    let dims = space.dims();
    let strides = space.strides();
    let stride = strides[axis];
    let outer: usize = dims[..axis].iter().product();
    let amps = psi1.amplitudes();
    let coef = hbar * hbar / (2.0 * mass);

    // Squared norm of the derivative, per slice along the cm axis.
    let mut slice_norm2 = vec![0.0; n];
    for o in 0..outer {
        for i in 0..stride {
            let at = |k: usize| amps[o * n * stride + k * stride + i];
            for k in 0..n {
                let d2 = if k >= 2 && k + 2 < n {
                    (-at(k - 2) + at(k - 1) * 16.0 - at(k) * 30.0 + at(k + 1) * 16.0 - at(k + 2)) / 12.0
                } else if k == 0 {
                    at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)
                } else if k == n - 1 {
                    at(n - 1) * 2.0 - at(n - 2) * 5.0 + at(n - 3) * 4.0 - at(n - 4)
                } else {
                    at(k - 1) - at(k) * 2.0 + at(k + 1)
                };
                slice_norm2[k] += (d2 * (coef / h2)).norm_sqr();
            }
        }
    }
    let rest_volume = space.volume_element() / grid.dx();
    let total = match envelope {
        None => slice_norm2.iter().sum::<f64>() * rest_volume * grid.dx(),
        Some(phi) => {
            let pf = phi.space().factors();
            if pf.len() != 1 || pf[0].label != cm || pf[0].grid() != Some(&grid) {
                return Err(Error::SpaceMismatch(format!("envelope {} is not on `{cm}`", phi.space())));
            }
            let w: f64 = phi
                .amplitudes()
                .iter()
                .zip(&slice_norm2)
                .map(|(a, s)| a.norm_sqr() * s)
                .sum();
            w * grid.dx() * rest_volume * grid.length()
        }
    };
    Ok(total.sqrt())
}

/// `1 - |<a|b>|`, clamped to `[0, 1]`.
pub fn fidelity_deficit(a: &StateVector, b: &StateVector) -> Result<f64> {
    let ov = inner_product(a, b)?.norm();
    Ok((1.0 - ov).clamp(0.0, 1.0))
}

/// `<psi|H|psi>` with the kinetic part evaluated spectrally.
pub fn energy(psi: &StateVector, h: &HamiltonianSpec) -> Result<f64> {
    let space = psi.space();
    h.validate(space)?;
    let norm2 = psi.norm().powi(2);
    let mut planner = FftPlanner::new();
    let dims = space.dims();
    let mut kinetic = 0.0;
    for (label, mass) in &h.kinetic {
        let axis = space.index_of(label).expect("validated");
        let ks = space.factors()[axis].grid().expect("validated").wavenumbers();
        let mut fft = AxisFft::new(&mut planner, &dims, axis);
        let mut num = 0.0;
        let mut den = 0.0;
        fft.inspect(psi.amplitudes(), |k, x| {
            let w = x.norm_sqr();
            num += w * h.hbar * h.hbar * ks[k] * ks[k] / (2.0 * mass);
            den += w;
        });
        if den > 0.0 {
            kinetic += num / den * norm2;
        }
    }
    let layout = PotentialLayout::new(space, h)?;
    let amps = psi.amplitudes();
    let d = layout.d;
    let mut pot = 0.0;
    let mut fiber = vec![C64::new(0.0, 0.0); d];
    for f in 0..layout.n_fibers {
        let base = layout.base(f);
        for (l, v) in fiber.iter_mut().enumerate() {
            *v = amps[base + l * layout.inner];
        }
        let m = &layout.blocks[layout.fiber_block[f] as usize];
        let mut e = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                e += fiber[i].conj() * m[(i, j)] * fiber[j];
            }
        }
        if let Some(s) = &layout.fiber_scalar {
            e += fiber.iter().map(|x| x.norm_sqr()).sum::<f64>() * s[f];
        }
        pot += e.re;
    }
    Ok(kinetic + pot * space.volume_element())
}

/// Upper bound on `|<H_I>|`: the probability-weighted sum of
/// `|f(r)| ||K||` over all interactions.
pub fn interaction_magnitude(psi: &StateVector, h: &HamiltonianSpec) -> Result<f64> {
    let space = psi.space();
    h.validate(space)?;
    if h.interactions.is_empty() {
        return Ok(0.0);
    }
    let layout = PotentialLayout::new(space, h)?;
    let amps = psi.amplitudes();
    let mut total = 0.0;
    for f in 0..layout.n_fibers {
        let base = layout.base(f);
        let p: f64 = (0..layout.d).map(|l| amps[base + l * layout.inner].norm_sqr()).sum();
        total += p * layout.block_coupling[layout.fiber_block[f] as usize];
    }
    Ok(total * space.volume_element())
}
