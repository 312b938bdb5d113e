//! One pass/fail line per acceptance criterion. Runs as a plain binary so the
//! lines always reach the test log; exits non-zero if any criterion fails.

mod common;

use std::fs;
use std::time::Instant;

use common::*;
use qframes::dynamics::{energy, evolve_exact, fidelity_deficit, HamiltonianSpec, Propagator};
use qframes::frames::{branch_ensemble, lift_to_auxiliary, mixed_density_matrix, reduced_density_matrix, trace_distance};
use qframes::scenarios::report::{non_increasing, strictly_decreasing};
use qframes::scenarios::{render, run_scenario, CollisionRun, MeasurementRun, ScenarioConfig, ScenarioRun};
use qframes::schmidt::Bipartition;
use qframes::{make_gaussian, tensor_product, CMatrix, Factor, GaussianParams, Grid, Space, StateVector, C64};

// Criterion 1
const ORACLE_DEFICIT: f64 = 1e-6;
const ORACLE_SECONDS: f64 = 1.0;
// Criterion 2
const NORM_DRIFT: f64 = 1e-9;
const ENERGY_DRIFT: f64 = 1e-6;
const UNITARITY_SECONDS: f64 = 60.0;
// Criterion 3
const MOMENT_TOL: f64 = 1e-8;
const DISPERSION_REL_TOL: f64 = 1e-6;
const SPREADING_REL_TOL: f64 = 1e-6;
// Criterion 4
const RESIDUAL_EXPONENT: f64 = -0.8;
const SWEEP_SECONDS: f64 = 300.0;
// Criterion 5
const SCHMIDT_IDENTITY: f64 = 1e-10;
// Criterion 6
const DENSITY_EQUIVALENCE: f64 = 1e-3;
const HEAVIEST_MASS: f64 = 1e4;
// Criterion 7
const OUTCOME_PROBABILITY: f64 = 0.3;
const FREQUENCY_WINDOW: f64 = 0.014;
const PARTNER_DEFICIT: f64 = 1e-6;
const COMPONENT_OVERLAP: f64 = 1e-3;
const MEASUREMENT_SECONDS: f64 = 300.0;

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: String) -> Line {
    Line { pass, detail }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn sigma_x() -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0))
}

fn propagator_oracle() -> Line {
    use nalgebra::DMatrix;
    use qframes::dynamics::{Center, Interaction, Profile};
    let hbar = 1.0;
    let grid = Grid::new(8, -4.0, 4.0).unwrap();
    let profile = Profile::Gaussian { strength: 1.0, width: 1.0 };
    let space = Space::new(vec![Factor::coordinate("x", grid.clone()), Factor::level("q", 2)]).unwrap();
    let h = HamiltonianSpec::new(hbar)
        .with_kinetic("x", 1.0)
        .with_internal("q", CMatrix::from_real_diagonal(&[0.0, 1.0]))
        .with_interaction(Interaction {
            particle: "x".into(),
            center: Center::Fixed(0.0),
            profile: profile.clone(),
            operator: Some(sigma_x()),
        });
    let diag = |v: &[f64]| DMatrix::from_fn(v.len(), v.len(), |i, j| C64::new(if i == j { v[i] } else { 0.0 }, 0.0));
    let f: Vec<f64> = grid.points().iter().map(|x| profile_value(&profile, *x)).collect();
    let dense = dense_kinetic(&grid, 1.0, hbar).kronecker(&DMatrix::identity(2, 2))
        + DMatrix::<C64>::identity(8, 8).kronecker(&diag(&[0.0, 1.0]))
        + diag(&f).kronecker(&to_dense(&sigma_x()));
    let psi0 = random_state(space.clone(), 2024);
    let start = Instant::now();
    let got = evolve_exact(&psi0, &h, 1e-3, 1000, 0).unwrap().final_state;
    let seconds = start.elapsed().as_secs_f64();
    let want = from_coefficients(space, &dense_evolve(&dense, &coefficients(&psi0), 1.0, hbar));
    let deficit = fidelity_deficit(&got, &want).unwrap();
    line(
        deficit <= ORACLE_DEFICIT && seconds < ORACLE_SECONDS,
        format!("fidelity deficit {deficit:.3e} (<= {ORACLE_DEFICIT:e}), {seconds:.3} s (< {ORACLE_SECONDS} s)"),
    )
}

fn unitarity_and_energy() -> Line {
    let text = fs::read_to_string(config_path("collision.toml")).unwrap();
    let text = ScenarioConfig::apply_override(&text, "particle.center", "-2.0").unwrap();
    let cfg = ScenarioConfig::from_toml(&text).unwrap();
    let mass = cfg.center_of_mass.masses[0];
    let h = cfg.hamiltonian(mass).unwrap();
    let psi0 = lift_to_auxiliary(
        &cfg.center_of_mass.label,
        &cfg.internal_state().unwrap(),
        &cfg.particle.packet(cfg.hbar).unwrap(),
        &cfg.cm_params(mass).unwrap(),
        &cfg.cm_grid(mass).unwrap(),
    )
    .unwrap();
    let dims = psi0.space().dims();
    let e0 = energy(&psi0, &h).unwrap();
    let start = Instant::now();
    let mut prop = Propagator::new(psi0.space(), &h, cfg.time.dt).unwrap();
    let mut norm_drift: f64 = 0.0;
    let mut energy_drift: f64 = 0.0;
    prop.run(psi0, 1000, 50, |_, psi| {
        norm_drift = norm_drift.max((psi.norm() - 1.0).abs());
        energy_drift = energy_drift.max(((energy(psi, &h).unwrap() - e0) / e0).abs());
    })
    .unwrap();
    let seconds = start.elapsed().as_secs_f64();
    line(
        norm_drift <= NORM_DRIFT && energy_drift <= ENERGY_DRIFT && seconds < UNITARITY_SECONDS,
        format!(
            "space {dims:?}, 1000 steps: norm drift {norm_drift:.3e} (<= {NORM_DRIFT:e}), relative energy drift \
             {energy_drift:.3e} (<= {ENERGY_DRIFT:e}), {seconds:.2} s (< {UNITARITY_SECONDS} s)"
        ),
    )
}

fn gaussian_contract() -> Line {
    let hbar = 1.0;
    let (r0, p0, sigma, mass) = (1.5, 2.0, 1.0, 1.0);
    let grid = Grid::new(512, -30.0, 30.0).unwrap();
    let params = GaussianParams::new(r0, p0, sigma, mass, hbar).unwrap();
    let g = make_gaussian("x", &grid, &params).unwrap();
    let (mx, _) = g.position_moments("x").unwrap();
    let (mp, vp) = g.momentum_moments("x", hbar).unwrap();
    // The amplitude dispersion of the velocity is sqrt(2) times its standard deviation.
    let xi = 2f64.sqrt() * vp.sqrt() / mass;
    let xi_want = hbar / (sigma * mass);
    let xi_err = (xi - xi_want).abs() / xi_want;

    let h = HamiltonianSpec::new(hbar).with_kinetic("x", mass);
    let evolved = evolve_exact(&g, &h, 1e-3, 1000, 0).unwrap().final_state;
    let (_, vx) = evolved.position_moments("x").unwrap();
    let width_want = params.free_sigma_at(1.0) / 2f64.sqrt();
    let spread_err = (vx.sqrt() - width_want).abs() / width_want;

    let dx = (mx - r0).abs();
    let dp = (mp - p0).abs();
    line(
        dx <= MOMENT_TOL && dp <= MOMENT_TOL && xi_err <= DISPERSION_REL_TOL && spread_err <= SPREADING_REL_TOL,
        format!(
            "|<x>-R0| {dx:.2e}, |<p>-P0| {dp:.2e} (<= {MOMENT_TOL:e}); velocity dispersion rel err {xi_err:.2e} \
             (<= {DISPERSION_REL_TOL:e}); spreading at t=1 rel err {spread_err:.2e} (<= {SPREADING_REL_TOL:e})"
        ),
    )
}

fn factorization_limit(run: &CollisionRun, seconds: f64) -> Line {
    let s = &run.summary;
    let fd_ok = strictly_decreasing(&s.fidelity_deficit);
    let res_ok = strictly_decreasing(&s.residual);
    let exponent = s.residual_exponent.unwrap_or(f64::NAN);
    line(
        fd_ok && res_ok && exponent <= RESIDUAL_EXPONENT && seconds < SWEEP_SECONDS,
        format!(
            "masses {:?}: fidelity deficit {} strictly decreasing {fd_ok}; residual {} strictly \
             decreasing {res_ok}; exponent {exponent:.4} (<= {RESIDUAL_EXPONENT}); {seconds:.1} s (< {SWEEP_SECONDS} s)",
            s.masses, sci(&s.fidelity_deficit), sci(&s.residual)
        ),
    )
}

fn schmidt_identity() -> Line {
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    let shapes: Vec<Space> = vec![
        Space::new(vec![Factor::level("u", 2), Factor::level("v", 2)]).unwrap(),
        Space::new(vec![Factor::level("u", 4), Factor::level("v", 3)]).unwrap(),
        Space::new(vec![
            Factor::coordinate("x", Grid::new(16, -4.0, 4.0).unwrap()),
            Factor::level("u", 3),
            Factor::coordinate("y", Grid::new(8, 0.0, 2.0).unwrap()),
        ])
        .unwrap(),
    ];
    for space in &shapes {
        for seed in 0..10 {
            let psi = random_state(space.clone(), seed);
            let labels = psi.space().labels();
            let left = vec![labels[0]];
            let ens = branch_ensemble(&psi, &Bipartition::complement_of(&psi, left.clone())).unwrap();
            let right: Vec<&str> = labels[1..].to_vec();
            for keep in [left.clone(), right] {
                let d = trace_distance(
                    &mixed_density_matrix(&ens, &keep).unwrap(),
                    &reduced_density_matrix(&psi, &keep).unwrap(),
                )
                .unwrap();
                worst = worst.max(d);
                tested += 1;
            }
        }
    }
    // An entangled wavepacket state as well.
    let grid = Grid::new(128, -20.0, 20.0).unwrap();
    let pk = |x0: f64, p0: f64| make_gaussian("x", &grid, &GaussianParams::new(x0, p0, 1.5, 1.0, 1.0).unwrap()).unwrap();
    let a = tensor_product(&[&StateVector::basis_level("q", 2, 0).unwrap(), &pk(-5.0, 1.0)]).unwrap();
    let b = tensor_product(&[&StateVector::basis_level("q", 2, 1).unwrap(), &pk(4.0, -2.0)]).unwrap();
    let amps = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x * 0.6 + y * 0.8).collect();
    let psi = StateVector::normalized(a.space().clone(), amps).unwrap();
    let ens = branch_ensemble(&psi, &Bipartition::new(["x"], ["q"])).unwrap();
    for keep in [["x"], ["q"]] {
        let d = trace_distance(&mixed_density_matrix(&ens, &keep).unwrap(), &reduced_density_matrix(&psi, &keep).unwrap())
            .unwrap();
        worst = worst.max(d);
        tested += 1;
    }
    line(worst <= SCHMIDT_IDENTITY, format!("{tested} states: max trace distance {worst:.3e} (<= {SCHMIDT_IDENTITY:e})"))
}

fn density_equivalence(run: &CollisionRun) -> Line {
    let s = &run.summary;
    let at_heaviest = s.masses.iter().position(|m| *m == HEAVIEST_MASS).map(|i| s.trace_distance[i]);
    let monotone = non_increasing(&s.trace_distance);
    let d = at_heaviest.unwrap_or(f64::NAN);
    line(
        d <= DENSITY_EQUIVALENCE && monotone,
        format!(
            "trace distances {}; at M={HEAVIEST_MASS:e}: {d:.3e} (<= {DENSITY_EQUIVALENCE:e}); non-increasing {monotone}",
            sci(&s.trace_distance)
        ),
    )
}

fn measurement_statistics(cfg: &ScenarioConfig, run: &MeasurementRun, seconds: f64) -> Line {
    let m = cfg.measurement.as_ref().unwrap();
    let p1 = m.weights[0] * m.weights[0];
    let mut pass = (p1 - OUTCOME_PROBABILITY).abs() < 1e-12 && seconds < MEASUREMENT_SECONDS;
    let mut detail = format!("|c_1|^2 = {p1:.6}");
    for p in &run.points {
        let f = p.frequencies[0];
        let deficit = p.branches.iter().map(|b| b.b_fidelity_deficit).fold(0.0, f64::max);
        pass &= (f - OUTCOME_PROBABILITY).abs() <= FREQUENCY_WINDOW
            && deficit <= PARTNER_DEFICIT
            && p.component_overlap <= COMPONENT_OVERLAP
            && p.samples == 10_000;
        detail += &format!(
            "; frequency {f:.4} over {} samples (0.3 +- {FREQUENCY_WINDOW}); b fidelity deficit {deficit:.2e} \
             (<= {PARTNER_DEFICIT:e}); component overlap {:.2e} (<= {COMPONENT_OVERLAP:e})",
            p.samples, p.component_overlap
        );
    }
    detail += &format!("; {seconds:.1} s (< {MEASUREMENT_SECONDS} s)");
    line(pass, detail)
}

fn timed_run(cfg: &ScenarioConfig) -> (ScenarioRun, f64) {
    let start = Instant::now();
    let run = run_scenario(cfg).unwrap();
    (run, start.elapsed().as_secs_f64())
}

fn main() {
    let mut lines: Vec<(usize, &str, Line)> = Vec::new();
    let mut report = |n: usize, name: &'static str, l: Line| {
        println!("criterion {n} [{name}]: {} | {}", if l.pass { "PASS" } else { "FAIL" }, l.detail);
        lines.push((n, name, l));
    };

    report(1, "propagator oracle", propagator_oracle());
    report(2, "unitarity and energy", unitarity_and_energy());
    report(3, "gaussian contract", gaussian_contract());

    let load = |name: &str| {
        let text = fs::read_to_string(config_path(name)).unwrap();
        (ScenarioConfig::canonical_hash(&text).unwrap(), ScenarioConfig::from_toml(&text).unwrap())
    };
    let (col_hash, col_cfg) = load("collision.toml");
    let (col_run, col_seconds) = timed_run(&col_cfg);
    let ScenarioRun::Collision(collision) = &col_run else { unreachable!() };
    report(4, "factorization limit", factorization_limit(collision, col_seconds));
    report(5, "schmidt identity", schmidt_identity());
    report(6, "density-matrix equivalence", density_equivalence(collision));

    let (meas_hash, meas_cfg) = load("measurement.toml");
    let (meas_run, meas_seconds) = timed_run(&meas_cfg);
    let ScenarioRun::Measurement(measurement) = &meas_run else { unreachable!() };
    report(7, "measurement statistics", measurement_statistics(&meas_cfg, measurement, meas_seconds));

    let mut same = true;
    let mut detail = Vec::new();
    for (cfg, hash, first) in [(&col_cfg, &col_hash, &col_run), (&meas_cfg, &meas_hash, &meas_run)] {
        let a = render(cfg, first, hash);
        let b = render(cfg, &timed_run(cfg).0, hash);
        let identical = a == b;
        same &= identical;
        detail.push(format!("{}: {} report bytes, identical {identical}", cfg.scenario.name(), a.report.len()));
    }
    report(8, "determinism", line(same, detail.join("; ")));

    let failed: Vec<usize> = lines.iter().filter(|(_, _, l)| !l.pass).map(|(n, _, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", lines.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
