//! Graphon kernels and their integral operators.
//!
//! Every kernel is stored on a finite partition of `[0, 1]` and acts on
//! [`Field`]s living on that partition. Dense kernels (discrete blocks and
//! grid samples) keep the matrix `W_ij`; rank-1 kernels only keep `(λ₁, φ₁)`
//! and apply the operator as `λ₁ φ₁ ⟨φ₁, f⟩`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{weighted_dot, Field};
use crate::math;
use crate::partition::Partition;

/// Relative tolerance used when checking the symmetry implied by annealed
/// degree correlations.
pub const ANNEALED_SYMMETRY_TOL: f64 = 1e-10;

/// A symmetric non-negative kernel `W` on `[0, 1]²`.
#[derive(Debug, Clone)]
pub enum Kernel {
    /// Piecewise constant on a finite partition (finite weighted graphs,
    /// annealed networks).
    DiscreteBlock(DenseKernel),
    /// `W(x, y) = λ₁ φ₁(x) φ₁(y)`.
    RankOne(RankOneKernel),
    /// `W(x, y) = λ₁ (1 - 2p) x^{-p} y^{-p}` on a graded mesh.
    PowerLaw(PowerLawKernel),
    /// Point samples `W(x_i, y_j)` of a kernel on a grid.
    GridSampled(DenseKernel),
}

/// Dense storage shared by discrete-block and grid-sampled kernels.
#[derive(Debug, Clone)]
pub struct DenseKernel {
    partition: Arc<Partition>,
    /// Row-major `W_ij`.
    values: Vec<f64>,
    /// Row-major `W_ij |I_j|`.
    weighted: Vec<f64>,
    annealed: Option<AnnealedData>,
}

/// Degree data of a kernel produced by [`build_annealed`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedData {
    pub degrees: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Row-stochastic `p(k_j | k_i)`, row-major.
    pub conditional: Vec<f64>,
    pub uncorrelated: bool,
}

impl AnnealedData {
    pub fn mean_degree(&self) -> f64 {
        self.degrees
            .iter()
            .zip(&self.probabilities)
            .map(|(k, p)| k * p)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.degrees
            .iter()
            .zip(&self.probabilities)
            .map(|(k, p)| k * k * p)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct RankOneKernel {
    lambda1: f64,
    phi1: Field,
}

#[derive(Debug, Clone)]
pub struct PowerLawKernel {
    lambda1: f64,
    exponent: f64,
    grid_size: usize,
    kappa: f64,
    /// Discrete L2 norm of the sampled `√(1-2p) x^{-p}` before normalisation.
    sampled_norm: f64,
    rank_one: RankOneKernel,
}

impl DenseKernel {
    fn build(partition: Arc<Partition>, values: Vec<f64>) -> Result<Self> {
        let n = partition.len();
        if values.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidKernel(format!(
                "entry ({}, {}) = {} is negative or not finite",
                k / n,
                k % n,
                values[k]
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::InvalidKernel(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let w = partition.weights();
        let weighted = values
            .iter()
            .enumerate()
            .map(|(k, v)| v * w[k % n])
            .collect();
        Ok(Self {
            partition,
            values,
            weighted,
            annealed: None,
        })
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition.is_empty()
    }

    /// Row-major `W_ij`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row-major weight matrix `w_ij = W_ij |I_j|`.
    pub fn weight_matrix(&self) -> &[f64] {
        &self.weighted
    }

    pub fn annealed(&self) -> Option<&AnnealedData> {
        self.annealed.as_ref()
    }

    /// Reachability on the support of `W_ij` from the first cell.
    pub fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && self.values[i * n + j] > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn apply_raw(&self, f: &[f64], out: &mut [f64]) {
        let n = self.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.weighted[i * n..(i + 1) * n];
            *o = row.iter().zip(f).map(|(a, b)| a * b).sum();
        }
    }
}

impl RankOneKernel {
    /// `λ₁ φ₁(x) φ₁(y)`; `phi1` is rescaled to unit L2 norm and must not
    /// change sign.
    pub fn new(lambda1: f64, phi1: Field) -> Result<Self> {
        if !(lambda1 > 0.0) || !lambda1.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "rank-1 eigenvalue must be positive, got {lambda1}"
            )));
        }
        let has_pos = phi1.values().iter().any(|&v| v > 0.0);
        let has_neg = phi1.values().iter().any(|&v| v < 0.0);
        if has_pos && has_neg {
            return Err(Error::InvalidKernel(
                "rank-1 eigenfunction changes sign, kernel would be negative".into(),
            ));
        }
        let norm = phi1.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidKernel("rank-1 eigenfunction vanishes".into()));
        }
        let scale = if has_neg { -1.0 / norm } else { 1.0 / norm };
        Ok(Self {
            lambda1,
            phi1: phi1.scaled(scale),
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// Unit-norm, non-negative eigenfunction.
    pub fn phi1(&self) -> &Field {
        &self.phi1
    }

    fn apply_raw(&self, f: &[f64], out: &mut [f64]) {
        let phi = self.phi1.values();
        let c = weighted_dot(self.phi1.partition().weights(), phi, f);
        let s = self.lambda1 * c;
        for (o, p) in out.iter_mut().zip(phi) {
            *o = s * p;
        }
    }
}

impl PowerLawKernel {
    /// Power-law kernel on a graded mesh with the default grading
    /// `κ = 2 / (1 - 2p)`.
    pub fn new(lambda1: f64, exponent: f64, grid_size: usize) -> Result<Self> {
        Self::check_exponent(exponent)?;
        Self::with_grading(lambda1, exponent, grid_size, default_grading(exponent))
    }

    pub fn with_grading(lambda1: f64, exponent: f64, grid_size: usize, kappa: f64) -> Result<Self> {
        Self::check_exponent(exponent)?;
        if !(lambda1 > 0.0) || !lambda1.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "power-law eigenvalue must be positive, got {lambda1}"
            )));
        }
        let partition = Arc::new(Partition::graded(grid_size, kappa)?);
        let phi = Field::from_fn(partition, |x| power_law_eigenfunction(exponent, x))?;
        let sampled_norm = phi.norm();
        let rank_one = RankOneKernel::new(lambda1, phi)?;
        Ok(Self {
            lambda1,
            exponent,
            grid_size,
            kappa,
            sampled_norm,
            rank_one,
        })
    }

    fn check_exponent(p: f64) -> Result<()> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::InvalidKernel(format!(
                "power-law exponent must satisfy 0 <= p < 1/2, got {p}"
            )));
        }
        Ok(())
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Discrete norm of the sampled eigenfunction before it was rescaled to
    /// one; its distance from 1 measures the quadrature error.
    pub fn sampled_norm(&self) -> f64 {
        self.sampled_norm
    }

    pub fn rank_one(&self) -> &RankOneKernel {
        &self.rank_one
    }

    /// Exact `W(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.lambda1
            * power_law_eigenfunction(self.exponent, x)
            * power_law_eigenfunction(self.exponent, y)
    }

    /// Exact degree function `∫ W(x, y) dy = λ₁ (1-2p)/(1-p) x^{-p}`.
    pub fn degree(&self, x: f64) -> f64 {
        let p = self.exponent;
        self.lambda1 * (1.0 - 2.0 * p) / (1.0 - p) * math::powf(x, -p)
    }

    /// Midpoint samples of the exact kernel on a graded mesh with
    /// `cells` cells and the same grading exponent.
    pub fn grid_sampled(&self, cells: usize) -> Result<Kernel> {
        let partition = Arc::new(Partition::graded(cells, self.kappa)?);
        Kernel::grid_sampled_from_fn(partition, |x, y| self.eval(x, y))
    }
}

/// `√(1 - 2p) x^{-p}`.
pub fn power_law_eigenfunction(p: f64, x: f64) -> f64 {
    math::sqrt(1.0 - 2.0 * p) * math::powf(x, -p)
}

/// Grading exponent that resolves `∫ φ₁²` for the power-law kernel.
pub fn default_grading(p: f64) -> f64 {
    2.0 / (1.0 - 2.0 * p)
}

impl Kernel {
    /// Piecewise-constant kernel with block values `W_ij` (row-major).
    ///
    /// The support of `W_ij` must connect all blocks.
    pub fn discrete_block(partition: Arc<Partition>, values: Vec<f64>) -> Result<Self> {
        let k = DenseKernel::build(partition, values)?;
        if !k.is_connected() {
            return Err(Error::InvalidKernel(
                "block kernel is not connected (reducible)".into(),
            ));
        }
        Ok(Kernel::DiscreteBlock(k))
    }

    /// `W ≡ c` as a single block.
    pub fn constant(c: f64) -> Result<Self> {
        let p = Arc::new(Partition::uniform(1)?);
        Self::discrete_block(p, vec![c])
    }

    pub fn rank_one(lambda1: f64, phi1: Field) -> Result<Self> {
        Ok(Kernel::RankOne(RankOneKernel::new(lambda1, phi1)?))
    }

    pub fn power_law(lambda1: f64, exponent: f64, grid_size: usize) -> Result<Self> {
        Ok(Kernel::PowerLaw(PowerLawKernel::new(
            lambda1, exponent, grid_size,
        )?))
    }

    /// Symmetric non-negative samples `W(x_i, x_j)`, row-major.
    pub fn grid_sampled(partition: Arc<Partition>, values: Vec<f64>) -> Result<Self> {
        Ok(Kernel::GridSampled(DenseKernel::build(partition, values)?))
    }

    /// Samples `w` at pairs of cell midpoints, symmetrising exactly.
    pub fn grid_sampled_from_fn(
        partition: Arc<Partition>,
        w: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mids = partition.midpoints();
        let n = mids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (w(mids[i], mids[j]) + w(mids[j], mids[i]));
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::grid_sampled(partition, values)
    }

    pub fn partition(&self) -> &Arc<Partition> {
        match self {
            Kernel::DiscreteBlock(k) | Kernel::GridSampled(k) => &k.partition,
            Kernel::RankOne(k) => k.phi1.partition(),
            Kernel::PowerLaw(k) => k.rank_one.phi1.partition(),
        }
    }

    pub fn cells(&self) -> usize {
        self.partition().len()
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Kernel::DiscreteBlock(_) => "discrete_block",
            Kernel::RankOne(_) => "rank_one",
            Kernel::PowerLaw(_) => "power_law",
            Kernel::GridSampled(_) => "grid_sampled",
        }
    }

    /// The rank-1 factorisation, when the kernel is stored as one.
    pub fn as_rank_one(&self) -> Option<&RankOneKernel> {
        match self {
            Kernel::RankOne(k) => Some(k),
            Kernel::PowerLaw(k) => Some(&k.rank_one),
            _ => None,
        }
    }

    pub fn as_dense(&self) -> Option<&DenseKernel> {
        match self {
            Kernel::DiscreteBlock(k) | Kernel::GridSampled(k) => Some(k),
            _ => None,
        }
    }

    /// `𝕎f`.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        let p = self.partition();
        if !(Arc::ptr_eq(p, f.partition()) || p.same_as(f.partition())) {
            return Err(if p.len() != f.len() {
                Error::Dimension {
                    expected: p.len(),
                    found: f.len(),
                }
            } else {
                Error::PartitionMismatch
            });
        }
        let mut out = vec![0.0; f.len()];
        self.apply_raw(f.values(), &mut out);
        Ok(Field::from_parts_unchecked(p.clone(), out))
    }

    /// `𝕎f` on raw cell values; `f` and `out` must have one entry per cell.
    pub fn apply_raw(&self, f: &[f64], out: &mut [f64]) {
        match self {
            Kernel::DiscreteBlock(k) | Kernel::GridSampled(k) => k.apply_raw(f, out),
            Kernel::RankOne(k) => k.apply_raw(f, out),
            Kernel::PowerLaw(k) => k.rank_one.apply_raw(f, out),
        }
    }

    /// Degree function `𝕎1`.
    pub fn degree(&self) -> Field {
        let one = Field::constant(self.partition().clone(), 1.0);
        self.apply(&one).expect("same partition")
    }

    /// Self-interaction weights `W_ii |I_i|`, the diagonal of the operator
    /// matrix.
    pub fn self_weights(&self) -> Vec<f64> {
        match self {
            Kernel::DiscreteBlock(k) | Kernel::GridSampled(k) => {
                let n = k.len();
                (0..n).map(|i| k.weighted[i * n + i]).collect()
            }
            Kernel::RankOne(_) | Kernel::PowerLaw(_) => {
                let r = self.as_rank_one().unwrap();
                let w = r.phi1.partition().weights();
                r.phi1
                    .values()
                    .iter()
                    .zip(w)
                    .map(|(p, w)| r.lambda1 * p * p * w)
                    .collect()
            }
        }
    }

    /// `W` on the cell pair `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            Kernel::DiscreteBlock(k) | Kernel::GridSampled(k) => k.values[i * k.len() + j],
            Kernel::RankOne(_) | Kernel::PowerLaw(_) => {
                let r = self.as_rank_one().unwrap();
                let phi = r.phi1.values();
                r.lambda1 * phi[i] * phi[j]
            }
        }
    }

    /// Hilbert–Schmidt norm `‖W‖₂`.
    pub fn hs_norm(&self) -> f64 {
        match self {
            Kernel::RankOne(_) | Kernel::PowerLaw(_) => self.as_rank_one().unwrap().lambda1,
            Kernel::DiscreteBlock(k) | Kernel::GridSampled(k) => {
                let w = k.partition.weights();
                let n = k.len();
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let v = k.values[i * n + j];
                        s += v * v * w[i] * w[j];
                    }
                }
                math::sqrt(s)
            }
        }
    }
}

/// Degree correlations for [`build_annealed`].
#[derive(Debug, Clone, PartialEq)]
pub enum Correlation {
    /// `p(k_j | k_i) = k_j p(k_j) / ⟨k⟩`.
    Uncorrelated,
    /// Row-stochastic `p(k_j | k_i)`, row-major.
    Conditional(Vec<f64>),
}

/// Block kernel of an annealed network: cells `|I_i| = p(k_i)` and
/// `W_ij = k_i p(k_j | k_i) / p(k_j)`.
pub fn build_annealed(
    degrees: &[f64],
    probabilities: &[f64],
    correlation: Correlation,
) -> Result<Kernel> {
    let n = degrees.len();
    if n == 0 || probabilities.len() != n {
        return Err(Error::Validation(format!(
            "need one probability per degree class ({} degrees, {} probabilities)",
            n,
            probabilities.len()
        )));
    }
    if let Some(i) = degrees.iter().position(|&k| !(k > 0.0) || !k.is_finite()) {
        return Err(Error::Validation(format!(
            "degree class {i} has non-positive degree {}",
            degrees[i]
        )));
    }
    if let Some(i) = probabilities
        .iter()
        .position(|&p| !(p > 0.0) || !p.is_finite())
    {
        return Err(Error::Validation(format!(
            "degree class {i} has non-positive probability {}",
            probabilities[i]
        )));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "degree probabilities sum to {total}, not 1"
        )));
    }
    let probs: Vec<f64> = probabilities.iter().map(|p| p / total).collect();
    let mean: f64 = degrees.iter().zip(&probs).map(|(k, p)| k * p).sum();

    let (conditional, uncorrelated) = match correlation {
        Correlation::Uncorrelated => {
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    c[i * n + j] = degrees[j] * probs[j] / mean;
                }
            }
            (c, true)
        }
        Correlation::Conditional(c) => {
            if c.len() != n * n {
                return Err(Error::Validation(format!(
                    "conditional matrix must be {n}x{n}"
                )));
            }
            for i in 0..n {
                let row = &c[i * n..(i + 1) * n];
                if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "row {i} of p(k_j|k_i) has negative or non-finite entries"
                    )));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-10 {
                    return Err(Error::Validation(format!(
                        "row {i} of p(k_j|k_i) sums to {s}, not 1"
                    )));
                }
            }
            (c, false)
        }
    };

    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = degrees[i] * conditional[i * n + j] / probs[j];
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (values[i * n + j], values[j * n + i]);
            let scale = a.abs().max(b.abs()).max(1.0);
            if (a - b).abs() > ANNEALED_SYMMETRY_TOL * scale {
                return Err(Error::InvalidCorrelation(format!(
                    "implied W is asymmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
            let m = 0.5 * (a + b);
            values[i * n + j] = m;
            values[j * n + i] = m;
        }
    }
    let partition = Arc::new(Partition::from_weights(&probs)?);
    let mut dense = DenseKernel::build(partition, values)?;
    if !dense.is_connected() {
        return Err(Error::InvalidKernel(
            "annealed kernel is not connected (reducible)".into(),
        ));
    }
    dense.annealed = Some(AnnealedData {
        degrees: degrees.to_vec(),
        probabilities: probs,
        conditional,
        uncorrelated,
    });
    Ok(Kernel::DiscreteBlock(dense))
}

/// `‖W₁ - W₂‖₂` with both kernels read as piecewise constant on their
/// partitions, evaluated on the common refinement.
pub fn kernel_distance(k1: &Kernel, k2: &Kernel) -> Result<f64> {
    let r = k1.partition().refine_with(k2.partition())?;
    let w = r.partition.weights();
    let n = w.len();
    let mut s = 0.0;
    for a in 0..n {
        let mut row = 0.0;
        for b in 0..n {
            let d = k1.entry(r.left[a], r.left[b]) - k2.entry(r.right[a], r.right[b]);
            row += d * d * w[b];
        }
        s += row * w[a];
    }
    Ok(math::sqrt(s))
}

/// Short human-readable description used in reports.
pub fn describe(k: &Kernel) -> String {
    match k {
        Kernel::DiscreteBlock(d) => format!("discrete_block(n={})", d.len()),
        Kernel::GridSampled(d) => format!("grid_sampled(n={})", d.len()),
        Kernel::RankOne(r) => format!("rank_one(lambda1={}, cells={})", r.lambda1, r.phi1.len()),
        Kernel::PowerLaw(p) => format!(
            "power_law(lambda1={}, p={}, M={}, kappa={})",
            p.lambda1, p.exponent, p.grid_size, p.kappa
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kernel_fixes_constants() {
        let k = Kernel::constant(1.0).unwrap();
        let f = Field::constant(k.partition().clone(), 0.3);
        let g = k.apply(&f).unwrap();
        assert!((g.values()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn power_law_eigenfunction_identity() {
        let k = Kernel::power_law(1.0, 0.0, 50).unwrap();
        let phi = k.as_rank_one().unwrap().phi1().clone();
        let g = k.apply(&phi).unwrap();
        assert!(g.distance(&phi).unwrap() < 1e-14);
    }

    #[test]
    fn power_law_degree_function() {
        let p = 0.4;
        let k = PowerLawKernel::new(1.0, p, 2000).unwrap();
        let kernel = Kernel::PowerLaw(k.clone());
        let d = kernel.degree();
        let mids = kernel.partition().midpoints();
        for (i, x) in mids.iter().enumerate() {
            let exact = (1.0 - 2.0 * p) / (1.0 - p) * x.powf(-p);
            let rel = (d.values()[i] - exact).abs() / exact;
            // midpoint quadrature of the normalisation on the graded mesh
            assert!(rel < 1e-4, "cell {i}: {} vs {exact}", d.values()[i]);
        }
        assert!((k.degree(0.3) - 0.2 / 0.6 * 0.3f64.powf(-0.4)).abs() < 1e-14);
    }

    #[test]
    fn power_law_rejects_large_exponent() {
        assert!(matches!(
            Kernel::power_law(1.0, 0.6, 10),
            Err(Error::InvalidKernel(_))
        ));
        assert!(Kernel::power_law(1.0, 0.5, 10).is_err());
        assert!(Kernel::power_law(-1.0, 0.2, 10).is_err());
    }

    #[test]
    fn dense_kernel_validation() {
        let p = Arc::new(Partition::uniform(2).unwrap());
        assert!(Kernel::discrete_block(p.clone(), vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(Kernel::discrete_block(p.clone(), vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(Kernel::discrete_block(p.clone(), vec![1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(Kernel::grid_sampled(p.clone(), vec![1.0, 0.0, 0.0, 1.0]).is_ok());
        assert!(Kernel::discrete_block(p, vec![1.0; 3]).is_err());
    }

    #[test]
    fn partition_mismatch_is_reported() {
        let k = Kernel::constant(1.0).unwrap();
        let f = Field::constant(Arc::new(Partition::uniform(3).unwrap()), 1.0);
        assert!(matches!(k.apply(&f), Err(Error::Dimension { .. })));
    }

    #[test]
    fn annealed_uncorrelated_is_rank_one() {
        let k = build_annealed(&[1.0, 3.0], &[0.5, 0.5], Correlation::Uncorrelated).unwrap();
        let d = k.as_dense().unwrap();
        // W_ij = k_i k_j / <k>
        let expected = [0.5, 1.5, 1.5, 4.5];
        for (a, b) in d.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        let a = d.annealed().unwrap();
        assert!((a.mean_degree() - 2.0).abs() < 1e-15);
        assert!((a.second_moment() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn annealed_rejects_asymmetric_correlations() {
        let cond = vec![0.5, 0.5, 0.9, 0.1];
        let r = build_annealed(&[1.0, 2.0], &[0.5, 0.5], Correlation::Conditional(cond));
        assert!(matches!(r, Err(Error::InvalidCorrelation(_))));
        let bad_row = vec![0.5, 0.6, 0.5, 0.5];
        let r = build_annealed(&[1.0, 2.0], &[0.5, 0.5], Correlation::Conditional(bad_row));
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn distance_of_constants() {
        let one = Kernel::constant(1.0).unwrap();
        let zero = Kernel::grid_sampled(one.partition().clone(), vec![0.0]).unwrap();
        assert!((kernel_distance(&one, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kernel_distance(&one, &one).unwrap(), 0.0);
    }
}
