//! Leading eigenpairs by power iteration and full eigendecompositions of
//! dense kernels.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{weighted_dot, Field};
use crate::kernel::Kernel;
use crate::math;

/// Default stopping tolerance of the power iterations.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration cap of the power iterations.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Leading spectral data of a kernel operator.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub lambda1: f64,
    /// Unit-norm, non-negative leading eigenfunction.
    pub phi1: Field,
    pub lambda2: Option<f64>,
    /// `λ₁ - λ₂` when `λ₂` is known.
    pub gap: Option<f64>,
    /// Final residual `‖𝕎φ₁ - λ₁φ₁‖₂`.
    pub residual: f64,
    pub iterations: usize,
}

impl Spectrum {
    pub fn with_lambda2(mut self, lambda2: f64) -> Self {
        self.lambda2 = Some(lambda2);
        self.gap = Some(self.lambda1 - lambda2);
        self
    }

    /// `min φ₁`, the uniform positivity constant on the discretisation.
    pub fn min_phi(&self) -> f64 {
        self.phi1.min()
    }
}

/// Leading eigenpair of `𝕎`.
///
/// Rank-1 kernels return their stored pair with `λ₂ = 0`. Dense kernels run
/// power iteration from the constant function until the residual drops to
/// `tol`.
pub fn leading_eigenpair(kernel: &Kernel, tol: f64, max_iter: usize) -> Result<Spectrum> {
    if let Some(r) = kernel.as_rank_one() {
        let phi1 = r.phi1().clone();
        let mut image = vec![0.0; phi1.len()];
        kernel.apply_raw(phi1.values(), &mut image);
        let residual = residual_norm(&phi1, &image, r.lambda1());
        return Ok(Spectrum {
            lambda1: r.lambda1(),
            phi1,
            lambda2: Some(0.0),
            gap: Some(r.lambda1()),
            residual,
            iterations: 0,
        });
    }

    let partition = kernel.partition().clone();
    let w = partition.weights();
    let n = partition.len();
    let mut f = vec![1.0; n];
    normalize(w, &mut f);
    let mut image = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        kernel.apply_raw(&f, &mut image);
        let lambda = weighted_dot(w, &f, &image);
        residual = math::sqrt(
            (0..n)
                .map(|i| {
                    let d = image[i] - lambda * f[i];
                    w[i] * d * d
                })
                .sum(),
        );
        if residual <= tol {
            let mut phi = f;
            if weighted_dot(w, &phi, &vec![1.0; n]) < 0.0 {
                phi.iter_mut().for_each(|v| *v = -*v);
            }
            // Perron direction; clear rounding-level negatives
            phi.iter_mut().for_each(|v| {
                if *v < 0.0 && *v > -1e-14 {
                    *v = 0.0
                }
            });
            let phi1 = Field::new(partition, phi)?;
            return Ok(Spectrum {
                lambda1: lambda,
                phi1,
                lambda2: None,
                gap: None,
                residual,
                iterations: it,
            });
        }
        let norm = math::sqrt(weighted_dot(w, &image, &image));
        if !(norm > 0.0) {
            return Err(Error::NoConvergence {
                what: "power iteration (operator annihilates the iterate)",
                iterations: it,
                residual,
            });
        }
        for (fi, gi) in f.iter_mut().zip(&image) {
            *fi = gi / norm;
        }
    }
    Err(Error::NoConvergence {
        what: "power iteration",
        iterations: max_iter,
        residual,
    })
}

/// Magnitude-dominant eigenvalue of the deflated operator
/// `f ↦ 𝕎f - λ₁⟨φ₁, f⟩φ₁`, returned with its sign.
pub fn second_eigenvalue(
    kernel: &Kernel,
    spectrum: &Spectrum,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if kernel.as_rank_one().is_some() {
        return Ok(0.0);
    }
    let w = kernel.partition().weights();
    let n = w.len();
    let phi = spectrum.phi1.values();
    let deflate = |g: &mut [f64]| {
        let c = weighted_dot(w, phi, g);
        for (gi, pi) in g.iter_mut().zip(phi) {
            *gi -= c * pi;
        }
    };
    // deterministic start with components along every non-constant mode
    let mut f: Vec<f64> = kernel
        .partition()
        .midpoints()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let alt = if i % 2 == 0 { 0.1 } else { -0.1 };
            x - 0.5 + alt + 1e-3 * libm::sin(i as f64)
        })
        .collect();
    deflate(&mut f);
    if !normalize(w, &mut f) {
        return Ok(0.0);
    }
    let scale = spectrum.lambda1.abs().max(1.0);
    let mut image = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        kernel.apply_raw(&f, &mut image);
        deflate(&mut image);
        let mu = weighted_dot(w, &f, &image);
        let norm = math::sqrt(weighted_dot(w, &image, &image));
        if norm <= 1e-14 * scale {
            return Ok(0.0);
        }
        residual = math::sqrt(
            (0..n)
                .map(|i| {
                    let d = image[i] - mu * f[i];
                    w[i] * d * d
                })
                .sum(),
        );
        if residual <= tol * scale {
            return Ok(mu);
        }
        for (fi, gi) in f.iter_mut().zip(&image) {
            *fi = gi / norm;
        }
        // keep the iterate orthogonal to φ₁ against rounding drift
        deflate(&mut f);
        normalize(w, &mut f);
    }
    Err(Error::NoConvergence {
        what: "deflated power iteration",
        iterations: max_iter,
        residual,
    })
}

/// Complete orthonormal eigensystem of a dense kernel, eigenvalues sorted
/// in decreasing order.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// Eigenfunctions, orthonormal in the weighted inner product.
    pub vectors: Vec<Field>,
}

impl Eigensystem {
    /// Second largest eigenvalue (signed); 0 for a one-cell kernel.
    pub fn second_largest(&self) -> f64 {
        self.values.get(1).copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition of a dense kernel through the symmetric matrix
/// `D^{1/2} W D^{1/2}`, `D = diag(|I_i|)`, using cyclic Jacobi rotations.
pub fn eigensystem(kernel: &Kernel) -> Result<Eigensystem> {
    let dense = kernel
        .as_dense()
        .ok_or_else(|| Error::Unsupported("full eigendecomposition needs a dense kernel".into()))?;
    let partition = dense.partition().clone();
    let w = partition.weights();
    let n = w.len();
    let sq: Vec<f64> = w.iter().map(|&x| math::sqrt(x)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = sq[i] * dense.values()[i * n + j] * sq[j];
        }
    }
    let (vals, vecs) = jacobi_eigen(&mut a, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        vals[y]
            .partial_cmp(&vals[x])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &k in &order {
        values.push(vals[k]);
        let mut phi: Vec<f64> = (0..n).map(|i| vecs[i * n + k] / sq[i]).collect();
        if weighted_dot(w, &phi, &vec![1.0; n]) < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        vectors.push(Field::new(partition.clone(), phi)?);
    }
    Ok(Eigensystem { values, vectors })
}

/// Cyclic Jacobi for a symmetric row-major matrix; returns eigenvalues and
/// the column-wise eigenvector matrix.
fn jacobi_eigen(a: &mut [f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>();
    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= 1e-30 * frob.max(f64::MIN_POSITIVE) {
            let vals = (0..n).map(|i| a[i * n + i]).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NoConvergence {
        what: "Jacobi eigenvalue sweeps",
        iterations: max_sweeps,
        residual: f64::NAN,
    })
}

fn normalize(w: &[f64], f: &mut [f64]) -> bool {
    let norm = math::sqrt(weighted_dot(w, f, f));
    if !(norm > 0.0) {
        return false;
    }
    f.iter_mut().for_each(|v| *v /= norm);
    true
}

fn residual_norm(phi: &Field, image: &[f64], lambda: f64) -> f64 {
    let w = phi.partition().weights();
    math::sqrt(
        phi.values()
            .iter()
            .zip(image)
            .zip(w)
            .map(|((p, g), w)| {
                let d = g - lambda * p;
                w * d * d
            })
            .sum(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;
    use alloc::sync::Arc;

    #[test]
    fn complete_graph_spectrum() {
        let k = Kernel::constant(1.0).unwrap();
        let s = leading_eigenpair(&k, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((s.lambda1 - 1.0).abs() < 1e-14);
        assert!((s.phi1.values()[0] - 1.0).abs() < 1e-14);
        assert_eq!(
            second_eigenvalue(&k, &s, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap(),
            0.0
        );
    }

    #[test]
    fn constant_kernel_on_many_cells_has_zero_second_eigenvalue() {
        let p = Arc::new(Partition::graded(7, 2.0).unwrap());
        let k = Kernel::discrete_block(p, vec![1.0; 49]).unwrap();
        let s = leading_eigenpair(&k, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let l2 = second_eigenvalue(&k, &s, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(l2.abs() < 1e-12);
    }

    #[test]
    fn bipartite_two_block() {
        let p = Arc::new(Partition::uniform(2).unwrap());
        let k = Kernel::discrete_block(p, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let s = leading_eigenpair(&k, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((s.lambda1 - 0.5).abs() < 1e-14);
        for v in s.phi1.values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let l2 = second_eigenvalue(&k, &s, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((l2 + 0.5).abs() < 1e-12);
    }

    #[test]
    fn power_law_returns_stored_pair() {
        let k = Kernel::power_law(2.0, 0.4, 2000).unwrap();
        let s = leading_eigenpair(&k, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(s.lambda1, 2.0);
        assert_eq!(s.lambda2, Some(0.0));
        assert!(s.residual < 1e-10);
        let norm = match &k {
            Kernel::PowerLaw(p) => p.sampled_norm(),
            _ => unreachable!(),
        };
        assert!((norm - 1.0).abs() < 1e-4);
        let mids = k.partition().midpoints();
        for (v, x) in s.phi1.values().iter().zip(&mids) {
            let exact = (0.2f64).sqrt() * x.powf(-0.4) / norm;
            assert!((v - exact).abs() / exact < 1e-12);
        }
    }

    #[test]
    fn jacobi_matches_power_iteration() {
        let p = Arc::new(Partition::from_weights(&[0.2, 0.3, 0.5]).unwrap());
        let k =
            Kernel::discrete_block(p, vec![1.0, 2.0, 0.5, 2.0, 0.0, 1.0, 0.5, 1.0, 3.0]).unwrap();
        let s = leading_eigenpair(&k, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let e = eigensystem(&k).unwrap();
        assert!((e.values[0] - s.lambda1).abs() < 1e-11);
        assert!(e.vectors[0].distance(&s.phi1).unwrap() < 1e-10);
        let l2 = second_eigenvalue(&k, &s, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let dominant = if e.values[1].abs() >= e.values[2].abs() {
            e.values[1]
        } else {
            e.values[2]
        };
        assert!((l2 - dominant).abs() < 1e-9);
        // orthonormality in the weighted product
        for a in 0..3 {
            for b in 0..3 {
                let d = e.vectors[a].dot(&e.vectors[b]).unwrap();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }
}
