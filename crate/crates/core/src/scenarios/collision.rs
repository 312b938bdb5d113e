//! A light particle passing a heavy body with internal levels.

use rayon::prelude::*;

use super::config::{ScenarioConfig, ScenarioKind};
use super::report::{
    log_log_slope, matrix_pairs, non_increasing, strictly_decreasing, CollisionPoint, CollisionSummary, TimePoint,
};
use super::NEGLIGIBLE_INTERACTION;
use crate::dynamics::{
    energy, evolve_conditional, factorization_residual, factorized_parts, fidelity_deficit, interaction_magnitude,
    Propagator,
};
use crate::error::{Error, Result};
use crate::frames::{branch_ensemble, extract_relative_state, lift_to_auxiliary, mixed_density_matrix, reduced_density_matrix, trace_distance};
use crate::hilbert::{make_gaussian, tensor_product};
use crate::schmidt::{entanglement_entropy, Bipartition, BranchSampler};

#[derive(Clone, Debug)]
pub struct CollisionRun {
    pub points: Vec<CollisionPoint>,
    pub summary: CollisionSummary,
}

/// Runs every mass of the sweep; points are computed in parallel on the
/// current rayon pool and returned in sweep order.
pub fn run_collision(cfg: &ScenarioConfig) -> Result<CollisionRun> {
    cfg.validate()?;
    if cfg.scenario != ScenarioKind::Collision {
        return Err(Error::InvalidConfig("not a collision config".into()));
    }
    let points = cfg
        .center_of_mass
        .masses
        .par_iter()
        .enumerate()
        .map(|(i, &m)| collision_point(cfg, i, m))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&points);
    Ok(CollisionRun { points, summary })
}

pub(crate) fn summarize(points: &[CollisionPoint]) -> CollisionSummary {
    let masses: Vec<f64> = points.iter().map(|p| p.mass).collect();
    let fidelity_deficit: Vec<f64> = points.iter().map(|p| p.fidelity_deficit).collect();
    let residual: Vec<f64> = points.iter().map(|p| p.residual).collect();
    let trace_distance: Vec<f64> = points.iter().map(|p| p.trace_distance).collect();
    CollisionSummary {
        record: "summary".into(),
        residual_exponent: log_log_slope(&masses, &residual),
        fidelity_deficit_strictly_decreasing: strictly_decreasing(&fidelity_deficit),
        residual_strictly_decreasing: strictly_decreasing(&residual),
        trace_distance_non_increasing: non_increasing(&trace_distance),
        masses,
        fidelity_deficit,
        residual,
        trace_distance,
    }
}

/// Largest value over the checkpoints inside `[from, to]`.
pub(crate) fn max_in(series: &[TimePoint], from: f64, to: f64) -> f64 {
    series
        .iter()
        .filter(|p| p.t >= from - 1e-12 && p.t <= to + 1e-12)
        .map(|p| p.interaction)
        .fold(0.0, f64::max)
}

pub(crate) fn check_periods(cfg: &ScenarioConfig, series: &[TimePoint], check_final: bool) -> Result<(f64, f64)> {
    let t = &cfg.time;
    let initial = max_in(series, 0.0, t.t_initial);
    if initial >= NEGLIGIBLE_INTERACTION {
        let at = series.iter().filter(|p| p.t <= t.t_initial + 1e-12).max_by(|a, b| a.interaction.total_cmp(&b.interaction));
        return Err(Error::InteractionNotNegligible { period: "initial", value: initial, time: at.map_or(0.0, |p| p.t) });
    }
    let last = max_in(series, t.t_interaction, f64::INFINITY);
    if check_final && last >= NEGLIGIBLE_INTERACTION {
        let at = series
            .iter()
            .filter(|p| p.t >= t.t_interaction - 1e-12)
            .max_by(|a, b| a.interaction.total_cmp(&b.interaction));
        return Err(Error::InteractionNotNegligible { period: "final", value: last, time: at.map_or(0.0, |p| p.t) });
    }
    Ok((initial, last))
}

/// One mass of the sweep.
pub fn collision_point(cfg: &ScenarioConfig, index: usize, mass: f64) -> Result<CollisionPoint> {
    let hbar = cfg.hbar;
    let cm = cfg.center_of_mass.label.as_str();
    let s_label = cfg.particle.label.as_str();
    let r_label = cfg.internal.label.as_str();
    let grid_r = cfg.cm_grid(mass)?;
    let params = cfg.cm_params(mass)?;
    let phi = make_gaussian(cm, &grid_r, &params)?;
    let internal = cfg.internal_state()?;
    let s = cfg.particle.packet(hbar)?;
    let psi0 = lift_to_auxiliary(cm, &internal, &s, &params, &grid_r)?;
    let h = cfg.hamiltonian(mass)?;
    let dt = cfg.time.dt;
    let steps = cfg.total_steps();
    let every = cfg.time.checkpoint_every;

    let rel0 = tensor_product(&[&internal, &s])?;
    let parts = factorized_parts(&phi, &rel0, &h, dt, steps, every)?;
    let conditional = evolve_conditional(cm, &grid_r, &rel0, &h, dt, steps, every)?;
    let mut residuals = Vec::with_capacity(conditional.trajectory.len());
    for ((_, c), (_, phi_t)) in conditional.trajectory.iter().zip(&parts.center_of_mass.trajectory) {
        residuals.push(factorization_residual(c, cm, Some(phi_t), mass, hbar)?);
    }
    drop(conditional);

    let e0 = energy(&psi0, &h)?;
    let mut prop = Propagator::new(psi0.space(), &h, dt)?;
    let mut series = Vec::new();
    let mut energy_drift: f64 = 0.0;
    let mut failure = None;
    let mut k = 0;
    let exact = prop.run(psi0, steps, every, |step, psi| {
        let step_result = (|| -> Result<TimePoint> {
            let (_, phi_t) = &parts.center_of_mass.trajectory[k];
            let (_, rel_t) = &parts.relative.trajectory[k];
            let product = tensor_product(&[phi_t, rel_t])?;
            let e = energy(psi, &h)?;
            energy_drift = energy_drift.max(((e - e0) / e0).abs());
            Ok(TimePoint {
                t: step as f64 * dt,
                norm: psi.norm(),
                interaction: interaction_magnitude(psi, &h)?,
                fidelity_deficit: Some(fidelity_deficit(psi, &product)?),
                residual: Some(residuals[k]),
            })
        })();
        match step_result {
            Ok(p) => series.push(p),
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
        k += 1;
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let (interaction_initial, interaction_final) = check_periods(cfg, &series, true)?;
    let norm_drift = series.iter().map(|p| (p.norm - 1.0).abs()).fold(0.0, f64::max);
    let last = series.last().expect("final checkpoint");

    // Only now, in the final period, pass to the intrinsic description.
    let extraction = extract_relative_state(&exact, &parts.center_of_mass.final_state)?;
    let psi1 = &extraction.state;
    let ensemble = branch_ensemble(psi1, &Bipartition::new([s_label], [r_label]))?;
    let rho_s = mixed_density_matrix(&ensemble, &[s_label])?;
    let rho_re = reduced_density_matrix(&exact, &[s_label])?;
    let rho_internal = reduced_density_matrix(psi1, &[r_label])?;
    let reduced_eigenvalues = rho_internal.eigenvalues();
    let probabilities = ensemble.probabilities();
    let branch_eigenvalue_error = reduced_eigenvalues
        .iter()
        .enumerate()
        .map(|(i, e)| (e - probabilities.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max);
    let sampled_branch = BranchSampler::new(&ensemble.provenance, cfg.seed.wrapping_add(index as u64))?.draw();

    Ok(CollisionPoint {
        record: "point".into(),
        index,
        mass,
        w: cfg.w(mass),
        sigma: params.sigma,
        steps,
        fidelity_deficit: last.fidelity_deficit.expect("set"),
        residual: residuals.iter().copied().fold(0.0, f64::max),
        residual_final: *residuals.last().expect("final checkpoint"),
        overlap_weight: extraction.overlap_weight,
        trace_distance: trace_distance(&rho_s, &rho_re)?,
        norm_drift,
        energy_drift,
        interaction_initial,
        interaction_final,
        entropy: entanglement_entropy(&ensemble.provenance),
        degenerate: ensemble.provenance.is_degenerate(),
        probabilities,
        reduced_eigenvalues,
        branch_eigenvalue_error,
        sampled_branch,
        rho_internal: matrix_pairs(&rho_internal),
        timeseries: series,
    })
}
