//! Serialisable report records and plot tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::frames::DensityMatrix;

/// A complex number as `[re, im]`.
pub type Pair = [f64; 2];

/// Row-major matrix of `[re, im]` pairs.
pub fn matrix_pairs(rho: &DensityMatrix) -> Vec<Vec<Pair>> {
    let m = rho.matrix();
    (0..m.rows()).map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub record: String,
    pub scenario: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub points: usize,
    /// Free-text description of any modelling choice not fixed by the inputs.
    pub model: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub t: f64,
    pub norm: f64,
    pub interaction: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity_deficit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionPoint {
    pub record: String,
    pub index: usize,
    pub mass: f64,
    pub w: f64,
    pub sigma: f64,
    pub steps: usize,
    pub fidelity_deficit: f64,
    pub residual: f64,
    pub residual_final: f64,
    pub overlap_weight: f64,
    pub trace_distance: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub interaction_initial: f64,
    pub interaction_final: f64,
    pub entropy: f64,
    pub degenerate: bool,
    pub probabilities: Vec<f64>,
    pub reduced_eigenvalues: Vec<f64>,
    pub branch_eigenvalue_error: f64,
    pub sampled_branch: usize,
    pub rho_internal: Vec<Vec<Pair>>,
    pub timeseries: Vec<TimePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionSummary {
    pub record: String,
    pub masses: Vec<f64>,
    pub fidelity_deficit: Vec<f64>,
    pub residual: Vec<f64>,
    pub trace_distance: Vec<f64>,
    /// Least-squares slope of `ln residual` against `ln mass`.
    pub residual_exponent: Option<f64>,
    pub fidelity_deficit_strictly_decreasing: bool,
    pub residual_strictly_decreasing: bool,
    pub trace_distance_non_increasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementBranch {
    pub probability: f64,
    pub outcome: usize,
    pub b_fidelity_deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub found: bool,
    pub absorbed: Vec<String>,
    pub free: Vec<String>,
    pub leakage: f64,
    pub d_coefficients: Vec<f64>,
    pub c_coefficients: Vec<f64>,
    pub candidates: Vec<(Vec<String>, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPoint {
    pub record: String,
    pub index: usize,
    pub mass: f64,
    pub w: f64,
    pub sigma: f64,
    pub steps: usize,
    pub weights: Vec<f64>,
    pub norm_drift: f64,
    pub interaction_initial: f64,
    /// Coupling of the free partner to the heavy body at the end (it has
    /// none, so this is identically zero).
    pub interaction_final: f64,
    /// Coupling of the absorbed particle at the end, for information.
    pub absorbed_interaction: f64,
    pub initial_component_overlap: f64,
    pub overlap_weight: f64,
    pub absorbed_mass: f64,
    pub absorbed: bool,
    pub structure_coefficients: Vec<f64>,
    pub structure_error: f64,
    pub component_overlap: f64,
    pub component_weights: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub branches: Vec<MeasurementBranch>,
    pub samples: usize,
    pub counts: Vec<usize>,
    pub frequencies: Vec<f64>,
    pub partner_trace_distance: f64,
    pub partition: PartitionRecord,
    pub rho_internal: Vec<Vec<Pair>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSummary {
    pub record: String,
    pub masses: Vec<f64>,
    pub frequencies: Vec<Vec<f64>>,
    pub max_b_fidelity_deficit: f64,
    pub max_component_overlap: f64,
    pub max_structure_error: f64,
    pub all_absorbed: bool,
}

/// One JSON object per line.
pub fn jsonl<T: Serialize>(out: &mut String, record: &T) {
    out.push_str(&serde_json::to_string(record).expect("records serialise"));
    out.push('\n');
}

/// CSV with a one-line header; numbers with 17 significant digits.
pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{v:.16e}").expect("write to string");
        }
        s.push('\n');
    }
    s
}

/// Least-squares slope of `ln y` against `ln x`; `None` if any value is
/// non-positive or fewer than two points are given.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

pub fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x: [f64; 3] = [1e2, 1e3, 1e4];
        let y: Vec<f64> = x.iter().map(|m| 3.0 * m.powf(-1.0)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert!(log_log_slope(&x, &[1.0, 0.0, 1.0]).is_none());
    }

    #[test]
    fn csv_round_trips() {
        let s = csv(&["a", "b"], &[vec![0.1, 1.0 / 3.0]]);
        let line = s.lines().nth(1).unwrap();
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, vec![0.1, 1.0 / 3.0]);
    }

    #[test]
    fn monotonic_flags() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
        assert!(non_increasing(&[3.0, 3.0, 1.0]));
        assert!(!non_increasing(&[1.0, 2.0]));
    }
}
