//! An entangled pair `a`, `b` where `a` is captured by the heavy body and
//! `b` flies free far away.
//!
//! Capture is modelled over a finite time: a shallow smooth-box well around
//! the centre of mass, together with a coupling of the same shape to the
//! internal levels, holds `a` inside the region by the end of the run. This
//! is a model construction rather than a binding mechanism.

use rayon::prelude::*;

use super::collision::check_periods;
use super::config::{ScenarioConfig, ScenarioKind};
use super::partition::{detect_partition, PartitionGeometry};
use super::report::{matrix_pairs, MeasurementBranch, MeasurementPoint, MeasurementSummary, PartitionRecord, TimePoint};
use crate::dynamics::{evolve_exact, factorized_parts, fidelity_deficit, interaction_magnitude, HamiltonianSpec, Propagator};
use crate::error::{Error, Result};
use crate::frames::{
    branch_ensemble, extract_relative_state, lift_to_auxiliary, mixed_density_matrix, reduced_density_matrix,
    trace_distance,
};
use crate::hilbert::{inner_product, make_gaussian, tensor_product, StateVector};
use crate::linalg::C64;
use crate::schmidt::{schmidt_decompose, Bipartition, BranchSampler, DEFAULT_TRUNC_TOL};

pub const MODEL_NOTE: &str = "capture of the absorbed particle is a finite-time model: a smooth-box well \
around the centre of mass plus a same-shaped coupling to the internal levels";

#[derive(Clone, Debug)]
pub struct MeasurementRun {
    pub points: Vec<MeasurementPoint>,
    pub summary: MeasurementSummary,
}

pub fn run_position_measurement(cfg: &ScenarioConfig) -> Result<MeasurementRun> {
    cfg.validate()?;
    if cfg.scenario != ScenarioKind::Measurement {
        return Err(Error::InvalidConfig("not a measurement config".into()));
    }
    let points = cfg
        .center_of_mass
        .masses
        .par_iter()
        .enumerate()
        .map(|(i, &m)| measurement_point(cfg, i, m))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&points);
    Ok(MeasurementRun { points, summary })
}

pub(crate) fn summarize(points: &[MeasurementPoint]) -> MeasurementSummary {
    MeasurementSummary {
        record: "summary".into(),
        masses: points.iter().map(|p| p.mass).collect(),
        frequencies: points.iter().map(|p| p.frequencies.clone()).collect(),
        max_b_fidelity_deficit: points
            .iter()
            .flat_map(|p| p.branches.iter().map(|b| b.b_fidelity_deficit))
            .fold(0.0, f64::max),
        max_component_overlap: points.iter().map(|p| p.component_overlap).fold(0.0, f64::max),
        max_structure_error: points.iter().map(|p| p.structure_error).fold(0.0, f64::max),
        all_absorbed: points.iter().all(|p| p.absorbed),
    }
}

pub fn measurement_point(cfg: &ScenarioConfig, index: usize, mass: f64) -> Result<MeasurementPoint> {
    let m = cfg.measurement.as_ref().ok_or_else(|| Error::InvalidConfig("no [measurement] section".into()))?;
    let hbar = cfg.hbar;
    let cm = cfg.center_of_mass.label.as_str();
    let a_label = cfg.particle.label.as_str();
    let b_label = m.partner.label.as_str();
    let r_label = cfg.internal.label.as_str();
    let dt = cfg.time.dt;
    let steps = cfg.total_steps();
    let every = cfg.time.checkpoint_every;

    let a_parts: Vec<StateVector> = (0..m.components.len()).map(|i| cfg.component_packet(i)).collect::<Result<_>>()?;
    let initial_component_overlap = inner_product(&a_parts[0], &a_parts[1])?.norm();
    if initial_component_overlap >= m.separation_threshold {
        return Err(Error::ComponentsNotSeparated(initial_component_overlap));
    }
    let b_parts = cfg.partner_components()?;
    let mut pair: Option<StateVector> = None;
    for ((c, a), b) in m.weights.iter().zip(&a_parts).zip(&b_parts) {
        let mut term = tensor_product(&[a, b])?;
        term.scale(C64::new(*c, 0.0));
        pair = Some(match pair {
            None => term,
            Some(mut acc) => {
                for (x, y) in acc.amplitudes_mut().iter_mut().zip(term.amplitudes()) {
                    *x += y;
                }
                acc
            }
        });
    }
    let mut pair = pair.expect("two components");
    pair.normalize();

    let grid_r = cfg.cm_grid(mass)?;
    let params = cfg.cm_params(mass)?;
    let phi = make_gaussian(cm, &grid_r, &params)?;
    let internal = cfg.internal_state()?;
    let psi0 = lift_to_auxiliary(cm, &internal, &pair, &params, &grid_r)?;
    let h = cfg.hamiltonian(mass)?;

    // Full composite. Only the final state is kept; checkpoints feed the
    // period checks.
    let mut prop = Propagator::new(psi0.space(), &h, dt)?;
    let mut series = Vec::new();
    let mut failure = None;
    let exact = prop.run(psi0, steps, every, |step, psi| match interaction_magnitude(psi, &h) {
        Ok(interaction) => series.push(TimePoint {
            t: step as f64 * dt,
            norm: psi.norm(),
            interaction,
            fidelity_deficit: None,
            residual: None,
        }),
        Err(e) => {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    // The absorbed particle stays coupled by construction; only the initial
    // period is checked on the full coupling.
    let (interaction_initial, _) = check_periods(cfg, &series, false)?;
    let absorbed_interaction = series.last().expect("final checkpoint").interaction;
    let norm_drift = series.iter().map(|p| (p.norm - 1.0).abs()).fold(0.0, f64::max);
    drop(prop);

    // Factorised relative state and its structure across (A + a | b).
    let rel0 = tensor_product(&[&internal, &pair])?;
    let parts = factorized_parts(&phi, &rel0, &h, dt, steps, steps.max(1))?;
    let rel_t = &parts.relative.final_state;
    let structure = schmidt_decompose(rel_t, &Bipartition::new([b_label], [r_label, a_label]), DEFAULT_TRUNC_TOL)?;
    let mut expected: Vec<f64> = m.weights.iter().map(|c| c.abs()).collect();
    expected.sort_by(|x, y| y.total_cmp(x));
    let structure_error = expected
        .iter()
        .enumerate()
        .map(|(i, c)| (c - structure.coefficients.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max);

    // Partner states evolved on their own.
    let h_b = HamiltonianSpec::new(hbar).with_kinetic(b_label, m.partner.mass);
    let b_t: Vec<StateVector> = b_parts
        .iter()
        .map(|b| evolve_exact(b, &h_b, dt, steps, steps.max(1)).map(|r| r.final_state))
        .collect::<Result<_>>()?;

    // (A + a) states conditioned on each partner component.
    let mut conditioned = Vec::with_capacity(b_t.len());
    let mut component_weights = Vec::with_capacity(b_t.len());
    for b in &b_t {
        let ex = extract_relative_state(&exact, b)?;
        component_weights.push(ex.overlap_weight);
        conditioned.push(ex.state);
    }
    let component_overlap = inner_product(&conditioned[0], &conditioned[1])?.norm();

    let extraction = extract_relative_state(&exact, &parts.center_of_mass.final_state)?;
    let psi1 = &extraction.state;
    let geometry = PartitionGeometry {
        a_side: vec![r_label.to_string()],
        center: parts.frozen_center,
        radius: m.region_radius,
        eps: m.eps,
    };
    let absorbed_mass = psi1.region_probability(|axis, k| {
        let f = &psi1.space().factors()[axis];
        f.label != a_label || geometry.inside(f.grid().expect("coordinate").point(k))
    });
    let partition = detect_partition(psi1, &geometry)?;

    let ensemble = branch_ensemble(psi1, &Bipartition::new([b_label], [r_label, a_label]))?;
    let probabilities = ensemble.probabilities();
    let mut branches = Vec::with_capacity(ensemble.len());
    for br in &ensemble.branches {
        let overlaps: Vec<f64> =
            b_t.iter().map(|b| inner_product(b, &br.left).map(|z| z.norm())).collect::<Result<_>>()?;
        let outcome = overlaps
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, _)| i)
            .expect("components");
        branches.push(MeasurementBranch {
            probability: br.probability,
            outcome,
            b_fidelity_deficit: fidelity_deficit(&b_t[outcome], &br.left)?,
        });
    }
    let mut sampler = BranchSampler::new(&ensemble.provenance, cfg.seed.wrapping_add(index as u64))?;
    let per_branch = sampler.histogram(m.samples);
    let mut counts = vec![0usize; m.weights.len()];
    for (br, n) in branches.iter().zip(&per_branch) {
        counts[br.outcome] += n;
    }
    let frequencies = counts.iter().map(|&n| n as f64 / m.samples as f64).collect();

    let rho_b = mixed_density_matrix(&ensemble, &[b_label])?;
    let rho_b_re = reduced_density_matrix(&exact, &[b_label])?;
    let rho_internal = reduced_density_matrix(psi1, &[r_label])?;

    let partition = match &partition.partition {
        Some(p) => PartitionRecord {
            found: true,
            absorbed: p.absorbed.clone(),
            free: p.free.clone(),
            leakage: p.leakage,
            d_coefficients: p.absorbed_sector.coefficients.clone(),
            c_coefficients: p.free_sector.coefficients.clone(),
            candidates: partition.candidates.iter().map(|c| (c.absorbed.clone(), c.leakage)).collect(),
        },
        None => PartitionRecord {
            found: false,
            absorbed: Vec::new(),
            free: Vec::new(),
            leakage: partition.leakage,
            d_coefficients: Vec::new(),
            c_coefficients: Vec::new(),
            candidates: partition.candidates.iter().map(|c| (c.absorbed.clone(), c.leakage)).collect(),
        },
    };

    Ok(MeasurementPoint {
        record: "point".into(),
        index,
        mass,
        w: cfg.w(mass),
        sigma: params.sigma,
        steps,
        weights: m.weights.clone(),
        norm_drift,
        interaction_initial,
        interaction_final: 0.0,
        absorbed_interaction,
        initial_component_overlap,
        overlap_weight: extraction.overlap_weight,
        absorbed_mass,
        absorbed: absorbed_mass > 1.0 - m.eps,
        structure_coefficients: structure.coefficients.clone(),
        structure_error,
        component_overlap,
        component_weights,
        probabilities,
        branches,
        samples: m.samples,
        counts,
        frequencies,
        partner_trace_distance: trace_distance(&rho_b, &rho_b_re)?,
        partition,
        rho_internal: matrix_pairs(&rho_internal),
    })
}
