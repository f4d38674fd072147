//! Piecewise-constant functions on a [`Partition`].

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::partition::Partition;

/// A function on `[0, 1]` that is constant on each cell of a partition.
///
/// Inner products and norms use the cell measures as quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    partition: Arc<Partition>,
}

impl Field {
    pub fn new(partition: Arc<Partition>, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::Dimension {
                expected: partition.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("field values must be finite".into()));
        }
        Ok(Self { values, partition })
    }

    pub(crate) fn from_parts_unchecked(partition: Arc<Partition>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), partition.len());
        Self { values, partition }
    }

    pub fn constant(partition: Arc<Partition>, c: f64) -> Self {
        let values = alloc::vec![c; partition.len()];
        Self { values, partition }
    }

    pub fn zeros(partition: Arc<Partition>) -> Self {
        Self::constant(partition, 0.0)
    }

    /// Samples `f` at the cell midpoints.
    pub fn from_fn(partition: Arc<Partition>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = partition.midpoints().into_iter().map(f).collect();
        Self::new(partition, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_same_partition(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.partition, &other.partition)
            || self.partition.same_as(&other.partition)
        {
            Ok(())
        } else if self.len() != other.len() {
            Err(Error::Dimension {
                expected: self.len(),
                found: other.len(),
            })
        } else {
            Err(Error::PartitionMismatch)
        }
    }

    /// `<f, g> = sum_i |I_i| f_i g_i`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.check_same_partition(other)?;
        Ok(weighted_dot(
            self.partition.weights(),
            &self.values,
            &other.values,
        ))
    }

    /// `int f dx`.
    pub fn integral(&self) -> f64 {
        self.partition
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(weighted_dot(
            self.partition.weights(),
            &self.values,
            &self.values,
        ))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            values: self.values.iter().map(|&v| f(v)).collect(),
            partition: self.partition.clone(),
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_same_partition(other)?;
        Ok(Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            partition: self.partition.clone(),
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, -1.0)
    }

    /// L2 distance; fields on different partitions are compared on the
    /// common refinement.
    pub fn distance(&self, other: &Field) -> Result<f64> {
        if self.check_same_partition(other).is_ok() {
            let w = self.partition.weights();
            let s: f64 = (0..self.len())
                .map(|i| {
                    let d = self.values[i] - other.values[i];
                    w[i] * d * d
                })
                .sum();
            return Ok(math::sqrt(s));
        }
        let r = self.partition.refine_with(&other.partition)?;
        let s: f64 = r
            .partition
            .weights()
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let d = self.values[r.left[k]] - other.values[r.right[k]];
                w * d * d
            })
            .sum();
        Ok(math::sqrt(s))
    }

    /// Re-expresses the field on a finer partition whose breakpoints include
    /// all of ours.
    pub fn prolong(&self, fine: &Arc<Partition>) -> Result<Field> {
        let r = self.partition.refine_with(fine)?;
        if r.partition.len() != fine.len() {
            return Err(Error::Refinement(
                "target partition does not refine the field's partition".into(),
            ));
        }
        let values = r.left.iter().map(|&i| self.values[i]).collect();
        Ok(Field {
            values,
            partition: fine.clone(),
        })
    }

    /// Whether every cell lies in `[-tol, 1 + tol]`.
    pub fn in_unit_range(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= -tol && v <= 1.0 + tol)
    }

    /// Whether the field is constant on the cells of `coarse`, a coarsening
    /// of this field's partition.
    pub fn is_cellwise_constant_on(&self, coarse: &Partition) -> bool {
        let mids = self.partition.midpoints();
        let mut reference: Vec<Option<f64>> = alloc::vec![None; coarse.len()];
        for (x, &v) in mids.iter().zip(&self.values) {
            let c = coarse.locate(*x);
            match reference[c] {
                None => reference[c] = Some(v),
                Some(r) if r != v => return false,
                _ => {}
            }
        }
        true
    }
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(n: usize) -> Arc<Partition> {
        Arc::new(Partition::uniform(n).unwrap())
    }

    #[test]
    fn constant_has_expected_norms() {
        let f = Field::constant(part(5), 0.5);
        assert!((f.integral() - 0.5).abs() < 1e-15);
        assert!((f.norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let p = part(3);
        assert!(matches!(
            Field::new(p.clone(), alloc::vec![1.0; 2]),
            Err(Error::Dimension { .. })
        ));
        assert!(Field::new(p, alloc::vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn distance_across_partitions() {
        let a = Field::constant(part(2), 1.0);
        let b = Field::new(part(3), alloc::vec![1.0, 0.0, 1.0]).unwrap();
        // differ by one on the middle third
        let d = a.distance(&b).unwrap();
        assert!((d - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn prolong_preserves_integral() {
        let coarse = Arc::new(Partition::graded(20, 3.0).unwrap());
        let fine = Arc::new(Partition::graded(60, 3.0).unwrap());
        let f = Field::from_fn(coarse, |x| x * x + 1.0).unwrap();
        let g = f.prolong(&fine).unwrap();
        assert!((f.integral() - g.integral()).abs() < 1e-14);
        assert!(f.distance(&g).unwrap() < 1e-14);
    }

    #[test]
    fn cellwise_constant_detection() {
        let coarse = Partition::uniform(2).unwrap();
        let fine = part(4);
        let f = Field::new(fine.clone(), alloc::vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let g = Field::new(fine, alloc::vec![1.0, 3.0, 2.0, 2.0]).unwrap();
        assert!(f.is_cellwise_constant_on(&coarse));
        assert!(!g.is_cellwise_constant_on(&coarse));
    }
}
