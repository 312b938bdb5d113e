use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Center, HamiltonianSpec, Interaction, Profile};
use crate::error::{Error, Result};
use crate::hilbert::{make_gaussian, GaussianParams, Grid, StateVector};
use crate::linalg::{CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Collision,
    Measurement,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Collision => "collision",
            ScenarioKind::Measurement => "measurement",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default)]
    pub seed: u64,
    pub time: TimeConfig,
    pub center_of_mass: CenterOfMassConfig,
    pub internal: InternalConfig,
    pub particle: ParticleConfig,
    pub coupling: CouplingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementConfig>,
}

/// Period boundaries: the coupling must be negligible up to `t_initial` and
/// again from `t_interaction` on; the run stops at `t_final`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_initial: f64,
    pub t_interaction: f64,
    pub t_final: f64,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterOfMassConfig {
    #[serde(default = "default_cm_label")]
    pub label: String,
    pub points: usize,
    /// Grid half-width in units of the packet width.
    pub half_width_sigmas: f64,
    /// Packet width at `W = 1`; the width used is `sigma_ref / sqrt(W)`.
    pub sigma_ref: f64,
    #[serde(default = "one")]
    pub unit_mass: f64,
    pub masses: Vec<f64>,
    /// Fixed width for every mass, disabling the `1/sqrt(W)` scaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalConfig {
    #[serde(default = "default_internal_label")]
    pub label: String,
    /// Diagonal of the internal Hamiltonian; its length is the level count.
    pub energies: Vec<f64>,
    /// Initial internal amplitudes as `[re, im]` pairs; must be normalised.
    pub initial: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub min: f64,
    pub max: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.points, self.min, self.max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub label: String,
    #[serde(default = "one")]
    pub mass: f64,
    pub grid: GridConfig,
    pub center: f64,
    #[serde(default)]
    pub momentum: f64,
    pub sigma: f64,
}

impl ParticleConfig {
    pub fn params(&self, hbar: f64) -> Result<GaussianParams> {
        GaussianParams::new(self.center, self.momentum, self.sigma, self.mass, hbar)
    }

    pub fn packet(&self, hbar: f64) -> Result<StateVector> {
        make_gaussian(&self.label, &self.grid.build()?, &self.params(hbar)?)
    }
}

/// A named level operator or an explicit matrix of `[re, im]` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl OperatorSpec {
    pub fn build(&self, d: usize) -> Result<CMatrix> {
        let m = match self {
            OperatorSpec::Named(name) => {
                let z = C64::new(0.0, 0.0);
                let o = C64::new(1.0, 0.0);
                let i = C64::new(0.0, 1.0);
                let entries = match name.as_str() {
                    "identity" => return Ok(CMatrix::identity(d)),
                    "sigma_x" => [z, o, o, z],
                    "sigma_y" => [z, -i, i, z],
                    "sigma_z" => [o, z, z, -o],
                    other => return Err(Error::InvalidConfig(format!("unknown operator `{other}`"))),
                };
                if d != 2 {
                    return Err(Error::InvalidConfig(format!("`{name}` needs 2 levels, have {d}")));
                }
                CMatrix::from_row_major(2, 2, entries.to_vec())
            }
            OperatorSpec::Matrix(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidConfig(format!("coupling operator must be {d}x{d}")));
                }
                CMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1]))
            }
        };
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub profile: Profile,
    pub operator: OperatorSpec,
    /// Optional level-independent potential, also centred on the centre of
    /// mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub well: Option<Profile>,
}

impl CouplingConfig {
    /// Copy with the coupling strength replaced.
    pub fn with_strength(&self, g: f64) -> Self {
        let mut out = self.clone();
        match &mut out.profile {
            Profile::Gaussian { strength, .. } | Profile::SmoothBox { strength, .. } => *strength = g,
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Real amplitudes `c_l` of the initial entangled pair.
    pub weights: Vec<f64>,
    /// Centres and momenta of the components of the absorbed particle; the
    /// width is that of `particle`.
    pub components: Vec<ComponentConfig>,
    pub partner: PartnerConfig,
    /// Radius of the region around the centre of mass counted as inside.
    pub region_radius: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_separation")]
    pub separation_threshold: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub center: f64,
    #[serde(default)]
    pub momentum: f64,
}

/// The distant partner particle: its components are the orthonormalised
/// Gaussian and first-moment Gaussian about `center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartnerConfig {
    pub label: String,
    #[serde(default = "one")]
    pub mass: f64,
    pub grid: GridConfig,
    pub center: f64,
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}
fn default_checkpoint() -> usize {
    100
}
fn default_cm_label() -> String {
    "R_A".into()
}
fn default_internal_label() -> String {
    "r_A".into()
}
fn default_eps() -> f64 {
    1e-4
}
fn default_separation() -> f64 {
    1e-6
}
fn default_samples() -> usize {
    10_000
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

/// Wraps a lower-level error as a configuration error.
fn config_err(context: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidConfig(_) => e,
        other => Error::InvalidConfig(format!("{context}: {other}")),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Number of time steps from zero to `t`, rounded to the nearest.
    pub fn steps_to(&self, t: f64) -> usize {
        (t / self.time.dt).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        self.steps_to(self.time.t_final)
    }

    pub fn levels(&self) -> usize {
        self.internal.energies.len()
    }

    /// `W = M / unit_mass`.
    pub fn w(&self, mass: f64) -> f64 {
        mass / self.center_of_mass.unit_mass
    }

    pub fn cm_sigma(&self, mass: f64) -> f64 {
        self.center_of_mass
            .sigma
            .unwrap_or(self.center_of_mass.sigma_ref / self.w(mass).sqrt())
    }

    pub fn cm_params(&self, mass: f64) -> Result<GaussianParams> {
        GaussianParams::new(0.0, 0.0, self.cm_sigma(mass), mass, self.hbar)
    }

    pub fn cm_grid(&self, mass: f64) -> Result<Grid> {
        let c = &self.center_of_mass;
        Grid::centered(c.points, 0.0, c.half_width_sigmas * self.cm_sigma(mass))
    }

    pub fn internal_state(&self) -> Result<StateVector> {
        let amps = self.internal.initial.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        StateVector::level(&self.internal.label, amps)
    }

    /// Full Hamiltonian for centre-of-mass mass `mass`.
    pub fn hamiltonian(&self, mass: f64) -> Result<HamiltonianSpec> {
        let cm = &self.center_of_mass.label;
        let d = self.levels();
        let mut h = HamiltonianSpec::new(self.hbar)
            .with_kinetic(cm, mass)
            .with_kinetic(&self.particle.label, self.particle.mass)
            .with_internal(&self.internal.label, CMatrix::from_real_diagonal(&self.internal.energies))
            .with_interaction(Interaction {
                particle: self.particle.label.clone(),
                center: Center::Factor(cm.clone()),
                profile: self.coupling.profile.clone(),
                operator: Some(self.coupling.operator.build(d)?),
            });
        if let Some(well) = &self.coupling.well {
            h = h.with_interaction(Interaction {
                particle: self.particle.label.clone(),
                center: Center::Factor(cm.clone()),
                profile: well.clone(),
                operator: None,
            });
        }
        if let Some(m) = &self.measurement {
            h = h.with_kinetic(&m.partner.label, m.partner.mass);
        }
        Ok(h)
    }

    /// Checks the invariants and dry-builds every grid and packet, so that
    /// anything wrong with the inputs surfaces as [`Error::InvalidConfig`].
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(invalid("hbar must be positive"));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(invalid("time.dt must be positive"));
        }
        if !(0.0 < t.t_initial && t.t_initial < t.t_interaction && t.t_interaction < t.t_final) {
            return Err(invalid(
                "time schedule must satisfy 0 < t_initial < t_interaction < t_final",
            ));
        }
        let steps = t.t_final / t.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(invalid("t_final must be a whole number of steps"));
        }
        let c = &self.center_of_mass;
        if c.masses.is_empty() {
            return Err(invalid("center_of_mass.masses is empty"));
        }
        if c.masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(invalid("all masses must be positive"));
        }
        if !(c.unit_mass > 0.0 && c.sigma_ref > 0.0 && c.half_width_sigmas > 0.0) {
            return Err(invalid("center_of_mass unit_mass, sigma_ref and half_width_sigmas must be positive"));
        }
        if let Some(s) = c.sigma {
            if !(s > 0.0) {
                return Err(invalid("center_of_mass.sigma must be positive"));
            }
        }
        if self.internal.energies.len() < 2 {
            return Err(invalid("internal.energies needs at least two levels"));
        }
        if self.internal.initial.len() != self.levels() {
            return Err(invalid("internal.initial must have one amplitude per level"));
        }
        let norm2: f64 = self.internal.initial.iter().map(|[re, im]| re * re + im * im).sum();
        if (norm2 - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("internal.initial must be normalised within 1e-10, got {norm2}")));
        }
        self.internal_state().map_err(config_err("internal.initial"))?;
        let labels = [&c.label, &self.internal.label, &self.particle.label];
        let partner = self.measurement.as_ref().map(|m| &m.partner.label);
        let mut seen: Vec<&String> = Vec::new();
        for l in labels.into_iter().chain(partner) {
            if seen.contains(&l) {
                return Err(invalid(format!("factor label `{l}` used twice")));
            }
            seen.push(l);
        }

        match (self.scenario, &self.measurement) {
            (ScenarioKind::Collision, Some(_)) => {
                return Err(invalid("a collision config must not have a [measurement] section"))
            }
            (ScenarioKind::Measurement, None) => {
                return Err(invalid("a measurement config needs a [measurement] section"))
            }
            _ => {}
        }
        if self.scenario == ScenarioKind::Collision {
            self.particle.packet(self.hbar).map_err(config_err("particle"))?;
        }
        if let Some(m) = &self.measurement {
            if m.weights.len() < 2 || m.weights.len() != m.components.len() {
                return Err(invalid("measurement.weights and measurement.components need equal length >= 2"));
            }
            if m.weights.len() > 2 {
                return Err(invalid("only two components are supported"));
            }
            let total: f64 = m.weights.iter().map(|w| w * w).sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(invalid(format!(
                    "sum of |c_l|^2 must be 1 within 1e-10, got {total}"
                )));
            }
            if !(m.eps > 0.0 && m.eps < 1.0) {
                return Err(invalid("measurement.eps must lie in (0, 1)"));
            }
            if !(m.region_radius > 0.0) {
                return Err(invalid("measurement.region_radius must be positive"));
            }
            if m.samples == 0 {
                return Err(invalid("measurement.samples must be positive"));
            }
            for (i, _) in m.components.iter().enumerate() {
                self.component_packet(i).map_err(config_err("measurement.components"))?;
            }
            self.partner_components().map_err(config_err("measurement.partner"))?;
        }
        for &mass in &c.masses {
            let ctx = format!("center_of_mass at mass {mass}");
            let grid = self.cm_grid(mass).map_err(config_err(&ctx))?;
            make_gaussian(&c.label, &grid, &self.cm_params(mass).map_err(config_err(&ctx))?)
                .map_err(config_err(&ctx))?;
            let h = self.hamiltonian(mass).map_err(config_err("coupling"))?;
            h.validate(&self.space(mass).map_err(config_err(&ctx))?).map_err(config_err("coupling"))?;
        }
        Ok(())
    }

    /// Composite space `[cm, internal, particle(, partner)]` for a mass.
    pub fn space(&self, mass: f64) -> Result<crate::hilbert::Space> {
        use crate::hilbert::{Factor, Space};
        let mut f = vec![
            Factor::coordinate(&self.center_of_mass.label, self.cm_grid(mass)?),
            Factor::level(&self.internal.label, self.levels()),
            Factor::coordinate(&self.particle.label, self.particle.grid.build()?),
        ];
        if let Some(m) = &self.measurement {
            f.push(Factor::coordinate(&m.partner.label, m.partner.grid.build()?));
        }
        Space::new(f)
    }

    /// Component `i` of the absorbed particle.
    pub fn component_packet(&self, i: usize) -> Result<StateVector> {
        let m = self.measurement.as_ref().ok_or_else(|| invalid("no [measurement] section"))?;
        let c = m.components.get(i).ok_or_else(|| invalid(format!("no component {i}")))?;
        let p = &self.particle;
        let params = GaussianParams::new(c.center, c.momentum, p.sigma, p.mass, self.hbar)?;
        make_gaussian(&p.label, &p.grid.build()?, &params)
    }

    /// The orthonormal partner states: a Gaussian and its first moment
    /// `(x - center) * Gaussian`, Gram-Schmidt orthonormalised.
    pub fn partner_components(&self) -> Result<Vec<StateVector>> {
        let m = self.measurement.as_ref().ok_or_else(|| invalid("no [measurement] section"))?;
        let b = &m.partner;
        let grid = b.grid.build()?;
        let params = GaussianParams::new(b.center, 0.0, b.sigma, b.mass, self.hbar)?;
        let g0 = make_gaussian(&b.label, &grid, &params)?;
        let x = grid.points();
        let raw: Vec<C64> = g0.amplitudes().iter().zip(&x).map(|(a, xi)| a * (xi - b.center)).collect();
        let mut g1 = StateVector::normalized(g0.space().clone(), raw)?;
        let ov = crate::hilbert::inner_product(&g0, &g1)?;
        for (y, a) in g1.amplitudes_mut().iter_mut().zip(g0.amplitudes()) {
            *y -= ov * a;
        }
        g1.normalize();
        Ok(vec![g0, g1])
    }

    /// Canonical digest: the config re-serialised as JSON with sorted keys.
    pub fn canonical_hash(text: &str) -> std::result::Result<String, toml::de::Error> {
        let value: toml::Value = toml::from_str(text)?;
        let json = serde_json::to_value(value).expect("toml values map to json");
        let canonical = serde_json::to_string(&json).expect("json serialises");
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    /// Applies a `key=value` override with a dotted key path.
    pub fn apply_override(text: &str, key: &str, value: &str) -> Result<String> {
        let mut doc: toml::Table =
            toml::from_str(text).map_err(|e| invalid(format!("cannot parse config: {e}")))?;
        let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().ok_or_else(|| invalid("empty override key"))?;
        let mut table = &mut doc;
        for p in path {
            table = table
                .get_mut(*p)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| invalid(format!("unknown key `{key}`")))?;
        }
        table.insert(last.to_string(), parsed);
        let out = toml::to_string(&doc).map_err(|e| invalid(e.to_string()))?;
        Ok(out)
    }
}
