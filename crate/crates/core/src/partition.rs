//! Finite partitions of the unit interval and their common refinements.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Tolerance on the total measure of a partition.
pub const MEASURE_TOL: f64 = 1e-12;

/// Relative distance under which two breakpoints are identified when merging
/// partitions.
const EDGE_MERGE_TOL: f64 = 1e-12;

/// Ordered breakpoints `0 = x_0 < x_1 < ... < x_M = 1` with cell measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    edges: Vec<f64>,
    weights: Vec<f64>,
    grading: Option<f64>,
}

impl Partition {
    /// Builds a partition from its breakpoints.
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidPartition(format!(
                "need at least two breakpoints, got {}",
                edges.len()
            )));
        }
        if edges.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPartition("non-finite breakpoint".into()));
        }
        if edges[0] != 0.0 || (edges[edges.len() - 1] - 1.0).abs() > MEASURE_TOL {
            return Err(Error::InvalidPartition(format!(
                "breakpoints must run from 0 to 1, got [{}, {}]",
                edges[0],
                edges[edges.len() - 1]
            )));
        }
        let weights: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(i) = weights.iter().position(|&w| w <= 0.0) {
            return Err(Error::InvalidPartition(format!(
                "cell {i} has non-positive measure {}",
                weights[i]
            )));
        }
        Ok(Self {
            edges,
            weights,
            grading: None,
        })
    }

    /// Builds a partition with the given cell measures, laid out left to right.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPartition("no cells".into()));
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidPartition(format!(
                "cell {i} has non-positive measure {}",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(Error::InvalidPartition(format!(
                "cell measures sum to {total}, not 1"
            )));
        }
        let mut edges = Vec::with_capacity(weights.len() + 1);
        let mut acc = 0.0;
        edges.push(0.0);
        for w in &weights[..weights.len() - 1] {
            acc += w;
            edges.push(acc);
        }
        edges.push(1.0);
        Ok(Self {
            edges,
            weights: weights.to_vec(),
            grading: None,
        })
    }

    /// `n` cells of equal measure.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::graded(n, 1.0)
    }

    /// Graded mesh `x_j = (j/n)^kappa`, which concentrates cells near 0.
    pub fn graded(n: usize, kappa: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("no cells".into()));
        }
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::InvalidPartition(format!(
                "grading exponent must be >= 1, got {kappa}"
            )));
        }
        let mut edges: Vec<f64> = (0..=n)
            .map(|j| math::powf(j as f64 / n as f64, kappa))
            .collect();
        edges[n] = 1.0;
        let mut p = Self::from_edges(edges)?;
        p.grading = Some(kappa);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Cell measures `|I_i|`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Grading exponent when built by [`Partition::graded`].
    pub fn grading(&self) -> Option<f64> {
        self.grading
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Smallest cell measure.
    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the cell containing `x` (cells are closed on the right, the
    /// first one also on the left).
    pub fn locate(&self, x: f64) -> usize {
        let n = self.len();
        if x <= self.edges[1] {
            return 0;
        }
        // first edge >= x, among edges[1..=n]
        let idx = self.edges[1..].partition_point(|&e| e < x);
        idx.min(n - 1)
    }

    /// Breakpoint-wise equality up to the merge tolerance.
    pub fn same_as(&self, other: &Partition) -> bool {
        self.len() == other.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(a, b)| edges_coincide(*a, *b))
    }

    /// Common refinement of two partitions together with the parent cell of
    /// every refined cell in `self` and in `other`.
    pub fn refine_with(&self, other: &Partition) -> Result<Refinement> {
        let mut edges = Vec::with_capacity(self.edges.len() + other.edges.len());
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.edges.len() || j < other.edges.len() {
            let next = match (self.edges.get(i), other.edges.get(j)) {
                (Some(&a), Some(&b)) if edges_coincide(a, b) => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(&a), Some(&b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(_), Some(&b)) => {
                    j += 1;
                    b
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            };
            match edges.last() {
                Some(&last) if edges_coincide(last, next) => {}
                _ => edges.push(next),
            }
        }
        let last = edges.len() - 1;
        edges[last] = 1.0;
        let partition = Partition::from_edges(edges)
            .map_err(|e| Error::Refinement(format!("merged breakpoints invalid: {e}")))?;
        let mids = partition.midpoints();
        let left = mids.iter().map(|&x| self.locate(x)).collect();
        let right = mids.iter().map(|&x| other.locate(x)).collect();
        Ok(Refinement {
            partition,
            left,
            right,
        })
    }
}

fn edges_coincide(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= EDGE_MERGE_TOL * a.abs().max(b.abs())
}

/// Result of [`Partition::refine_with`].
#[derive(Debug, Clone)]
pub struct Refinement {
    pub partition: Partition,
    /// Parent cell in the first partition of each refined cell.
    pub left: Vec<usize>,
    /// Parent cell in the second partition of each refined cell.
    pub right: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_sum_to_one() {
        let p = Partition::uniform(7).unwrap();
        let s: f64 = p.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn graded_mesh_is_strictly_increasing() {
        let p = Partition::graded(2000, 10.0).unwrap();
        assert_eq!(p.len(), 2000);
        assert!(p.weights().iter().all(|&w| w > 0.0));
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p.grading(), Some(10.0));
    }

    #[test]
    fn rejects_degenerate_cells() {
        assert!(Partition::from_edges(alloc::vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Partition::from_weights(&[0.5, 0.6]).is_err());
        assert!(Partition::from_weights(&[1.0, 0.0]).is_err());
        assert!(Partition::graded(0, 2.0).is_err());
    }

    #[test]
    fn locate_finds_cells() {
        let p = Partition::uniform(4).unwrap();
        assert_eq!(p.locate(0.0), 0);
        assert_eq!(p.locate(0.25), 0);
        assert_eq!(p.locate(0.26), 1);
        assert_eq!(p.locate(0.99), 3);
        assert_eq!(p.locate(1.0), 3);
    }

    #[test]
    fn nested_graded_meshes_refine_to_the_finer_one() {
        let coarse = Partition::graded(200, 10.0).unwrap();
        let fine = Partition::graded(2000, 10.0).unwrap();
        let r = coarse.refine_with(&fine).unwrap();
        assert_eq!(r.partition.len(), 2000);
        assert_eq!(r.left[0], 0);
        assert_eq!(r.left[9], 0);
        assert_eq!(r.left[10], 1);
        assert_eq!(r.right[1234], 1234);
    }

    #[test]
    fn refinement_of_offset_grids() {
        let a = Partition::uniform(2).unwrap();
        let b = Partition::uniform(3).unwrap();
        let r = a.refine_with(&b).unwrap();
        assert_eq!(r.partition.len(), 4);
        assert_eq!(r.left, alloc::vec![0, 0, 1, 1]);
        assert_eq!(r.right, alloc::vec![0, 1, 1, 2]);
    }
}
