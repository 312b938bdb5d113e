//! Splitting a relative state into an absorbed part and a free part by where
//! its probability lies.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{FactorKind, StateVector};
use crate::schmidt::{schmidt_decompose, Bipartition, SchmidtResult, DEFAULT_TRUNC_TOL};

/// Sectors lighter than this are treated as empty.
const EMPTY_SECTOR: f64 = 1e-28;

/// The region around the heavy body and the tolerance for the support test.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionGeometry {
    /// Factors belonging to the heavy body; every other factor is S-side.
    pub a_side: Vec<String>,
    pub center: f64,
    pub radius: f64,
    pub eps: f64,
}

impl PartitionGeometry {
    pub fn inside(&self, x: f64) -> bool {
        (x - self.center).abs() <= self.radius
    }
}

/// Leakage of one candidate split.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candidate {
    pub absorbed: Vec<String>,
    pub leakage: f64,
}

/// One sector of the two-sum decomposition, with its Schmidt split.
#[derive(Clone, Debug)]
pub struct Sector {
    /// Coefficients scaled so that the squares of both sectors sum to one.
    pub coefficients: Vec<f64>,
    pub schmidt: Option<SchmidtResult>,
}

#[derive(Clone, Debug)]
pub struct Partition {
    pub absorbed: Vec<String>,
    pub free: Vec<String>,
    pub leakage: f64,
    /// `D_k`: S_1 inside and S_2 outside, split as `(S_2 | A + S_1)`.
    pub absorbed_sector: Sector,
    /// `C_j`: every S-side coordinate outside, split as `(S | A)`.
    pub free_sector: Sector,
}

#[derive(Clone, Debug)]
pub struct PartitionReport {
    pub partition: Option<Partition>,
    /// Leakage of the chosen split, or the smallest leakage seen when none
    /// passed.
    pub leakage: f64,
    pub candidates: Vec<Candidate>,
}

/// Tests every split of the S-side coordinate factors into absorbed (`S_1`,
/// all inside the region) and free (`S_2`, all outside), smallest `S_1`
/// first. The leakage of a split is the probability that some factor of
/// `S_1` is outside or some factor of `S_2` is inside; the first split with
/// leakage below `eps` is returned together with the two-sector
/// decomposition.
pub fn detect_partition(psi1: &StateVector, geometry: &PartitionGeometry) -> Result<PartitionReport> {
    psi1.require_normalized()?;
    let space = psi1.space();
    for l in &geometry.a_side {
        if !space.contains(l) {
            return Err(Error::UnknownFactor(l.clone()));
        }
    }
    let s_side: Vec<usize> = (0..space.factors().len())
        .filter(|&i| !geometry.a_side.contains(&space.factors()[i].label))
        .collect();
    let coords: Vec<usize> = s_side
        .iter()
        .copied()
        .filter(|&i| matches!(space.factors()[i].kind, FactorKind::Coordinate(_)))
        .collect();
    if coords.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "partition needs at least two S-side coordinate factors, {space} has {}",
            coords.len()
        )));
    }
    let masks = inside_masks(psi1, &coords, geometry);
    let probs: Vec<f64> = psi1.amplitudes().iter().map(|a| a.norm_sqr() * space.volume_element()).collect();

    // Subsets of `coords` as bit masks, ordered by size then by factor order.
    let n = coords.len();
    let mut subsets: Vec<u32> = (1..(1u32 << n)).collect();
    subsets.sort_by_key(|s| (s.count_ones(), subset_key(*s, n)));

    let mut candidates = Vec::new();
    let mut chosen = None;
    for s in subsets {
        let leakage: f64 = probs
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                (0..n).any(|k| {
                    let absorbed = s & (1 << k) != 0;
                    masks[k][*idx] != absorbed
                })
            })
            .map(|(_, p)| p)
            .sum::<f64>()
            .clamp(0.0, 1.0);
        let absorbed: Vec<String> =
            (0..n).filter(|k| s & (1 << k) != 0).map(|k| space.factors()[coords[k]].label.clone()).collect();
        candidates.push(Candidate { absorbed, leakage });
        if chosen.is_none() && leakage < geometry.eps {
            chosen = Some(s);
        }
    }

    let Some(s) = chosen else {
        let leakage = candidates.iter().map(|c| c.leakage).fold(1.0, f64::min);
        return Ok(PartitionReport { partition: None, leakage, candidates });
    };
    let pick = |want: bool| -> Vec<String> {
        (0..n)
            .filter(|k| (s & (1 << k) != 0) == want)
            .map(|k| space.factors()[coords[k]].label.clone())
            .collect()
    };
    let absorbed = pick(true);
    let free = pick(false);
    let leakage = candidates.iter().find(|c| c.absorbed == absorbed).expect("candidate recorded").leakage;

    let sector_ii = project(psi1, |idx| (0..n).all(|k| masks[k][idx] == (s & (1 << k) != 0)));
    let sector_out = project(psi1, |idx| (0..n).all(|k| !masks[k][idx]));
    let w_ii = sector_ii.norm().powi(2);
    let w_out = sector_out.norm().powi(2);
    let total = w_ii + w_out;
    if total <= EMPTY_SECTOR {
        return Err(Error::EmptyDecomposition);
    }

    let s_labels: Vec<String> = s_side.iter().map(|&i| space.factors()[i].label.clone()).collect();
    let absorbed_sector = if w_ii <= EMPTY_SECTOR {
        Sector { coefficients: Vec::new(), schmidt: None }
    } else if free.is_empty() {
        Sector { coefficients: vec![(w_ii / total).sqrt()], schmidt: None }
    } else {
        let cut = Bipartition::complement_of(&sector_ii, free.clone());
        sector(sector_ii, &cut, w_ii, total)?
    };
    let free_sector = if w_out <= EMPTY_SECTOR {
        Sector { coefficients: Vec::new(), schmidt: None }
    } else {
        let cut = Bipartition::complement_of(&sector_out, s_labels);
        sector(sector_out, &cut, w_out, total)?
    };
    Ok(PartitionReport {
        partition: Some(Partition { absorbed, free, leakage, absorbed_sector, free_sector }),
        leakage,
        candidates,
    })
}

fn subset_key(s: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|k| s & (1 << k) != 0).collect()
}

/// For each listed coordinate factor, whether each amplitude index lies in
/// the region along that factor.
fn inside_masks(psi: &StateVector, coords: &[usize], geometry: &PartitionGeometry) -> Vec<Vec<bool>> {
    let space = psi.space();
    let dims = space.dims();
    let strides = space.strides();
    coords
        .iter()
        .map(|&a| {
            let pts = space.factors()[a].grid().expect("coordinate factor").points();
            let inside: Vec<bool> = pts.iter().map(|&x| geometry.inside(x)).collect();
            (0..psi.len()).map(|idx| inside[(idx / strides[a]) % dims[a]]).collect()
        })
        .collect()
}

fn project(psi: &StateVector, keep: impl Fn(usize) -> bool) -> StateVector {
    let mut out = psi.clone();
    for (idx, a) in out.amplitudes_mut().iter_mut().enumerate() {
        if !keep(idx) {
            *a = crate::linalg::C64::new(0.0, 0.0);
        }
    }
    out
}

fn sector(mut part: StateVector, cut: &Bipartition, weight: f64, total: f64) -> Result<Sector> {
    part.normalize();
    let r = schmidt_decompose(&part, cut, DEFAULT_TRUNC_TOL)?;
    let scale = (weight / total).sqrt();
    let coefficients = r.coefficients.iter().map(|c| c * scale).collect();
    Ok(Sector { coefficients, schmidt: Some(r) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{make_gaussian, tensor_product, GaussianParams, Grid};

    fn packet(label: &str, x0: f64) -> StateVector {
        let grid = Grid::new(128, -32.0, 32.0).unwrap();
        make_gaussian(label, &grid, &GaussianParams::new(x0, 0.0, 1.5, 1.0, 1.0).unwrap()).unwrap()
    }

    fn geometry() -> PartitionGeometry {
        PartitionGeometry { a_side: vec!["q".into()], center: 0.0, radius: 10.0, eps: 1e-4 }
    }

    #[test]
    fn constructed_support_is_found() {
        let q = StateVector::basis_level("q", 2, 1).unwrap();
        let psi = tensor_product(&[&q, &packet("a", 0.0), &packet("b", 24.0)]).unwrap();
        let rep = detect_partition(&psi, &geometry()).unwrap();
        let p = rep.partition.expect("partition");
        assert_eq!(p.absorbed, vec!["a".to_string()]);
        assert_eq!(p.free, vec!["b".to_string()]);
        assert!(p.leakage < 1e-4);
        let total: f64 = p
            .absorbed_sector
            .coefficients
            .iter()
            .chain(&p.free_sector.coefficients)
            .map(|c| c * c)
            .sum();
        assert!((total - 1.0).abs() < 1e-8);
        assert_eq!(rep.candidates.len(), 3);
    }

    #[test]
    fn delocalized_state_has_no_partition() {
        let grid = Grid::new(64, -32.0, 32.0).unwrap();
        let flat = |l: &str| StateVector::from_fn(l, grid.clone(), |_| crate::linalg::C64::new(1.0, 0.0)).unwrap();
        let q = StateVector::basis_level("q", 2, 0).unwrap();
        let psi = tensor_product(&[&q, &flat("a"), &flat("b")]).unwrap();
        let rep = detect_partition(&psi, &geometry()).unwrap();
        assert!(rep.partition.is_none());
        assert!(rep.leakage > 0.1);
    }

    #[test]
    fn needs_two_coordinates() {
        let q = StateVector::basis_level("q", 2, 0).unwrap();
        let psi = tensor_product(&[&q, &packet("a", 0.0)]).unwrap();
        assert!(matches!(detect_partition(&psi, &geometry()), Err(Error::InvalidParameter(_))));
    }
}
