//! End-to-end runs: the collision sweep and the position measurement with an
//! entangled pair.

pub mod collision;
pub mod config;
pub mod measurement;
pub mod partition;
pub mod report;

pub use collision::{collision_point, run_collision, CollisionRun};
pub use config::{ScenarioConfig, ScenarioKind};
pub use measurement::{measurement_point, run_position_measurement, MeasurementRun};
pub use partition::{detect_partition, PartitionGeometry, PartitionReport};

/// Interaction magnitude below which the coupling counts as switched off.
pub const NEGLIGIBLE_INTERACTION: f64 = 1e-8;

use report::{csv, jsonl, Header};

use crate::error::Result;

/// Results of either scenario.
#[derive(Clone, Debug)]
pub enum ScenarioRun {
    Collision(CollisionRun),
    Measurement(MeasurementRun),
}

/// Runs the scenario named by the config.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    match cfg.scenario {
        ScenarioKind::Collision => run_collision(cfg).map(ScenarioRun::Collision),
        ScenarioKind::Measurement => run_position_measurement(cfg).map(ScenarioRun::Measurement),
    }
}

/// Report text and plot tables of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    /// JSON lines: a header, one record per mass and a summary.
    pub report: String,
    /// `(file suffix, csv text)`.
    pub tables: Vec<(String, String)>,
}

pub fn render(cfg: &ScenarioConfig, run: &ScenarioRun, config_hash: &str) -> Rendered {
    let n = match run {
        ScenarioRun::Collision(r) => r.points.len(),
        ScenarioRun::Measurement(r) => r.points.len(),
    };
    let header = Header {
        record: "header".into(),
        scenario: cfg.scenario.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash.into(),
        seed: cfg.seed,
        points: n,
        model: match cfg.scenario {
            ScenarioKind::Collision => "coupling profile centred on the centre of mass".into(),
            ScenarioKind::Measurement => measurement::MODEL_NOTE.into(),
        },
    };
    let mut report = String::new();
    jsonl(&mut report, &header);
    let mut tables = Vec::new();
    match run {
        ScenarioRun::Collision(r) => {
            for p in &r.points {
                jsonl(&mut report, p);
                let rows: Vec<Vec<f64>> = p
                    .timeseries
                    .iter()
                    .map(|t| {
                        vec![
                            t.t,
                            t.fidelity_deficit.unwrap_or(f64::NAN),
                            t.residual.unwrap_or(f64::NAN),
                            t.interaction,
                            t.norm,
                        ]
                    })
                    .collect();
                tables.push((
                    format!("point{}.timeseries.csv", p.index),
                    csv(&["t", "fidelity_deficit", "residual", "interaction", "norm"], &rows),
                ));
            }
            jsonl(&mut report, &r.summary);
            let rows: Vec<Vec<f64>> =
                r.points.iter().map(|p| vec![p.mass, p.fidelity_deficit, p.residual, p.trace_distance]).collect();
            tables.push(("summary.csv".into(), csv(&["mass", "fidelity_deficit", "residual", "trace_distance"], &rows)));
        }
        ScenarioRun::Measurement(r) => {
            for p in &r.points {
                jsonl(&mut report, p);
            }
            jsonl(&mut report, &r.summary);
            let rows: Vec<Vec<f64>> = r
                .points
                .iter()
                .map(|p| {
                    let max_b = p.branches.iter().map(|b| b.b_fidelity_deficit).fold(0.0, f64::max);
                    let mut row = vec![p.mass];
                    row.extend(&p.frequencies);
                    row.extend([max_b, p.component_overlap, p.partition.leakage]);
                    row
                })
                .collect();
            let mut head = vec!["mass".to_string()];
            let k = r.points.first().map_or(0, |p| p.frequencies.len());
            head.extend((0..k).map(|i| format!("frequency_{i}")));
            head.extend(["b_fidelity_deficit".into(), "component_overlap".into(), "leakage".into()]);
            let head: Vec<&str> = head.iter().map(String::as_str).collect();
            tables.push(("summary.csv".into(), csv(&head, &rows)));
        }
    }
    Rendered { report, tables }
}
