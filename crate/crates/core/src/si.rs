//! Closed-form SI dynamics on rank-1 kernels.
//!
//! With `γ = 0` and `W = λ₁ φ₁ ⊗ φ₁` the eternal solution separates as
//! `u(t, x) = 1 - exp(-Ω(t) φ₁(x))` where `Ω' = βλ₁ F(Ω)` and
//! `F(ω) = ∫ φ₁ (1 - e^{-ω φ₁})`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{SisModel, Trajectory};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::Kernel;
use crate::math;
use crate::ode::{self, IntegratorConfig, Method, OdeSystem};
use crate::params::EpidemicParams;
use crate::spectrum::Spectrum;

/// Lower end of the log-spaced `ω` grid of [`SiClosedForm::chi_curve`].
pub const OMEGA_MIN: f64 = 1e-6;
/// The `ω` grid extends until `Ū(ω) > 1 - SATURATION_GAP`.
pub const SATURATION_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SiClosedForm {
    phi1: Field,
    lambda1: f64,
    /// `βλ₁`.
    rate: f64,
    phi_bar: f64,
    /// `(t_a, Ω(t_a))`.
    anchor: (f64, f64),
    cfg: IntegratorConfig,
}

struct OmegaSystem<'a> {
    form: &'a SiClosedForm,
    sign: f64,
}

impl OdeSystem for OmegaSystem<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = self.sign * self.form.rate * self.form.f_raw(y[0].max(0.0));
    }

    fn violation(&self, y: &[f64]) -> Option<(usize, f64)> {
        (!(y[0] > 0.0)).then_some((0, y[0]))
    }
}

impl SiClosedForm {
    /// Closed form for the rank-1 kernel of `model`, anchored so that the
    /// prevalence is 1/2 at `t = 0`.
    pub fn new(model: &SisModel) -> Result<Self> {
        if model.kernel().as_rank_one().is_none() && !is_numerically_rank_one(model) {
            return Err(Error::Unsupported(alloc::format!(
                "closed-form SI needs a rank-1 kernel, got {}",
                model.kernel().variant_name()
            )));
        }
        Self::from_spectrum(model.spectrum(), model.params())
    }

    /// Uses `φ₁` and `λ₁` of `spectrum` as a rank-1 factorisation.
    pub fn from_spectrum(spectrum: &Spectrum, params: &EpidemicParams) -> Result<Self> {
        if params.gamma != 0.0 {
            return Err(Error::Unsupported(alloc::format!(
                "closed form holds for SI only, got gamma = {}",
                params.gamma
            )));
        }
        let phi1 = spectrum.phi1.clone();
        if phi1.min() < 0.0 {
            return Err(Error::Validation("phi1 must be non-negative".into()));
        }
        let phi_bar = phi1.integral();
        let mut form = Self {
            phi1,
            lambda1: spectrum.lambda1,
            rate: params.beta * spectrum.lambda1,
            phi_bar,
            anchor: (0.0, 1.0),
            cfg: IntegratorConfig::default()
                .with_tolerances(1e-12, 1e-300)
                .with_method(Method::DormandPrince),
        };
        let omega0 = form.omega_for_prevalence(0.5)?;
        form.anchor = (0.0, omega0);
        Ok(form)
    }

    /// Re-anchors the curve so that `Ω(t) = omega`.
    pub fn with_anchor(mut self, t: f64, omega: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::Validation(alloc::format!(
                "anchor omega must be positive, got {omega}"
            )));
        }
        self.anchor = (t, omega);
        Ok(self)
    }

    pub fn with_integrator(mut self, cfg: IntegratorConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn phi1(&self) -> &Field {
        &self.phi1
    }

    /// `φ̄₁ = ∫ φ₁`.
    pub fn phi_bar(&self) -> f64 {
        self.phi_bar
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `Ω` at the anchor time.
    pub fn omega0(&self) -> f64 {
        self.anchor.1
    }

    pub fn anchor(&self) -> (f64, f64) {
        self.anchor
    }

    fn f_raw(&self, omega: f64) -> f64 {
        let w = self.phi1.partition().weights();
        self.phi1
            .values()
            .iter()
            .zip(w)
            .map(|(&p, &w)| w * p * math::one_minus_exp_neg(omega * p))
            .sum()
    }

    fn u_bar_raw(&self, omega: f64) -> f64 {
        let w = self.phi1.partition().weights();
        self.phi1
            .values()
            .iter()
            .zip(w)
            .map(|(&p, &w)| w * math::one_minus_exp_neg(omega * p))
            .sum()
    }

    fn check_omega(omega: f64) -> Result<()> {
        if !(omega >= 0.0) {
            return Err(Error::Validation(alloc::format!(
                "omega must be non-negative, got {omega}"
            )));
        }
        Ok(())
    }

    /// `F(ω) = ∫ φ₁ (1 - e^{-ω φ₁})`.
    pub fn f(&self, omega: f64) -> Result<f64> {
        Self::check_omega(omega)?;
        Ok(self.f_raw(omega))
    }

    /// `Ū(ω) = ∫ (1 - e^{-ω φ₁})`, the prevalence at `Ω = ω`.
    pub fn u_bar(&self, omega: f64) -> Result<f64> {
        Self::check_omega(omega)?;
        Ok(self.u_bar_raw(omega))
    }

    /// Supremum of `Ū`, the measure of `{φ₁ > 0}`.
    pub fn u_bar_sup(&self) -> f64 {
        let w = self.phi1.partition().weights();
        self.phi1
            .values()
            .iter()
            .zip(w)
            .filter(|(p, _)| **p > 0.0)
            .map(|(_, w)| *w)
            .sum()
    }

    /// Inverts `Ū` by bisection.
    pub fn omega_for_prevalence(&self, prevalence: f64) -> Result<f64> {
        if prevalence <= 0.0 {
            return Ok(0.0);
        }
        if prevalence >= self.u_bar_sup() {
            return Err(Error::Saturation(prevalence));
        }
        let mut hi = 1.0;
        let mut grow = 0;
        while self.u_bar_raw(hi) < prevalence {
            hi *= 2.0;
            grow += 1;
            if grow > 2000 {
                return Err(Error::Bracket("prevalence bracket did not close".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.u_bar_raw(mid) < prevalence {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `Ω(t)` on a sorted grid, integrating forward and backward from the
    /// anchor.
    pub fn omega_solve(&self, t_grid: &[f64]) -> Result<Vec<f64>> {
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(
                "time grid must be strictly increasing".into(),
            ));
        }
        let (ta, wa) = self.anchor;
        let mut out = vec![0.0; t_grid.len()];
        let split = t_grid.partition_point(|&t| t < ta);

        // forward: t >= ta
        let fwd = &t_grid[split..];
        if let Some(&last) = fwd.last() {
            if last > ta {
                let sys = OmegaSystem {
                    form: self,
                    sign: 1.0,
                };
                let s = ode::solve(&sys, ta, &[wa], last, fwd, &self.cfg)
                    .map_err(|e| self.underflow(e))?;
                for (o, y) in out[split..].iter_mut().zip(&s.states) {
                    *o = y[0];
                }
            } else {
                out[split] = wa;
            }
        }
        // backward: t < ta, in reversed time s = ta - t
        let back = &t_grid[..split];
        if !back.is_empty() {
            let s_times: Vec<f64> = back.iter().rev().map(|&t| ta - t).collect();
            let sys = OmegaSystem {
                form: self,
                sign: -1.0,
            };
            let s_end = s_times[s_times.len() - 1];
            let s = ode::solve(&sys, 0.0, &[wa], s_end, &s_times, &self.cfg)
                .map_err(|e| self.underflow(e))?;
            for (k, y) in s.states.iter().enumerate() {
                out[split - 1 - k] = y[0];
            }
        }
        if let Some((k, &w)) = out.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
            return Err(Error::OmegaUnderflow {
                t: t_grid[k],
                omega: w,
            });
        }
        Ok(out)
    }

    fn underflow(&self, e: Error) -> Error {
        match e {
            Error::DomainViolation { t, value, .. } => Error::OmegaUnderflow {
                t: self.anchor.0 - t,
                omega: value,
            },
            other => other,
        }
    }

    pub fn omega_at(&self, t: f64) -> Result<f64> {
        Ok(self.omega_solve(&[t])?[0])
    }

    /// `1 - exp(-ω φ₁)` per cell.
    pub fn state_for_omega(&self, omega: f64) -> Field {
        self.phi1.map(|p| math::one_minus_exp_neg(omega * p))
    }

    /// `u(t) = 1 - exp(-Ω(t) φ₁)`.
    pub fn si_state(&self, t: f64) -> Result<Field> {
        Ok(self.state_for_omega(self.omega_at(t)?))
    }

    /// States on `t_grid` with exact time derivatives
    /// `u_t = βλ₁ F(Ω) φ₁ e^{-Ω φ₁}`.
    pub fn trajectory(&self, t_grid: &[f64]) -> Result<Trajectory> {
        let omegas = self.omega_solve(t_grid)?;
        let mut states = Vec::with_capacity(omegas.len());
        let mut derivatives = Vec::with_capacity(omegas.len());
        for &w in &omegas {
            states.push(self.state_for_omega(w));
            let dw = self.rate * self.f_raw(w);
            derivatives.push(
                self.phi1
                    .values()
                    .iter()
                    .map(|&p| dw * p * math::exp(-w * p))
                    .collect(),
            );
        }
        Trajectory::new(t_grid.to_vec(), states, derivatives, &self.phi1)
    }

    /// `λ₁ F(ω) (φ̄₁ - F(ω)) = ∫ (1 - U) 𝕎U`.
    pub fn chi_for_omega(&self, omega: f64) -> Result<f64> {
        let f = self.f(omega)?;
        Ok(self.lambda1 * f * (self.phi_bar - f))
    }

    /// SI-link count at prevalence `prevalence`, inverting `Ū` by bisection.
    pub fn chi_at(&self, prevalence: f64) -> Result<f64> {
        let omega = self.omega_for_prevalence(prevalence)?;
        self.chi_for_omega(omega)
    }

    /// Parametric samples `(Ū(ω), χ)` on a log-spaced `ω` grid from
    /// [`OMEGA_MIN`] to the first `ω` with `Ū(ω) > 1 - SATURATION_GAP`.
    pub fn chi_curve(&self, n_samples: usize) -> Result<ChiCurve> {
        if n_samples < 2 {
            return Err(Error::Validation(
                "chi curve needs at least two samples".into(),
            ));
        }
        let target = self.u_bar_sup() - SATURATION_GAP;
        let mut omega_max = 1.0;
        let mut grow = 0;
        while self.u_bar_raw(omega_max) <= target {
            omega_max *= 2.0;
            grow += 1;
            if grow > 2000 {
                return Err(Error::Bracket("chi curve range did not close".into()));
            }
        }
        let (a, b) = (math::ln(OMEGA_MIN), math::ln(omega_max));
        let omegas: Vec<f64> = (0..n_samples)
            .map(|k| math::exp(a + (b - a) * k as f64 / (n_samples - 1) as f64))
            .collect();
        let mut prevalence = Vec::with_capacity(n_samples);
        let mut si_links = Vec::with_capacity(n_samples);
        for &w in &omegas {
            prevalence.push(self.u_bar_raw(w));
            si_links.push(self.chi_for_omega(w)?);
        }
        Ok(ChiCurve {
            omegas,
            prevalence,
            si_links,
            phi1_bar: self.phi_bar,
        })
    }
}

/// Dense kernel with `W_ij = λ₁ φ₁(x_i) φ₁(x_j)` up to rounding.
fn is_numerically_rank_one(model: &SisModel) -> bool {
    let k = model.kernel();
    let Some(d) = k.as_dense() else { return false };
    let (l, phi) = (model.spectrum().lambda1, model.phi1().values());
    let n = d.len();
    let scale = d.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (0..n).all(|i| (0..n).all(|j| (k.entry(i, j) - l * phi[i] * phi[j]).abs() <= 1e-10 * scale))
}

/// Parametric samples of the prevalence to SI-link map.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiCurve {
    pub omegas: Vec<f64>,
    pub prevalence: Vec<f64>,
    pub si_links: Vec<f64>,
    pub phi1_bar: f64,
}

impl ChiCurve {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

/// `(∫u, ∫(1-u)𝕎u)` of a state, the trajectory side of the χ map.
pub fn si_links(kernel: &Kernel, u: &Field) -> Result<(f64, f64)> {
    let wu = kernel.apply(u)?;
    let w = u.partition().weights();
    let links = u
        .values()
        .iter()
        .zip(wu.values())
        .zip(w)
        .map(|((&a, &b), &w)| w * (1.0 - a) * b)
        .sum();
    Ok((u.integral(), links))
}

/// Moment generating function `G(ω) = Σ p_i e^{ω k_i}` and its derivative.
pub fn generating_function(degrees: &[f64], probabilities: &[f64], omega: f64) -> (f64, f64) {
    degrees
        .iter()
        .zip(probabilities)
        .fold((0.0, 0.0), |(g, dg), (&k, &p)| {
            let e = p * math::exp(omega * k);
            (g + e, dg + k * e)
        })
}

/// `(Ū(ω), F(ω))` of an uncorrelated annealed kernel through its degree
/// generating function.
pub fn annealed_generating(kernel: &Kernel, omega: f64) -> Result<(f64, f64)> {
    let data = kernel
        .as_dense()
        .and_then(|d| d.annealed())
        .filter(|a| a.uncorrelated)
        .ok_or_else(|| Error::Unsupported("needs an uncorrelated annealed kernel".into()))?;
    SiClosedForm::check_omega(omega)?;
    let s = math::sqrt(data.second_moment());
    let (g, dg) = generating_function(&data.degrees, &data.probabilities, -omega / s);
    let u_bar = 1.0 - g;
    // F = Σ p_i (k_i/√⟨k²⟩)(1 - e^{-ω k_i/√⟨k²⟩}) = (⟨k⟩ - G'(-ω/√⟨k²⟩)) / √⟨k²⟩
    let f = (data.mean_degree() - dg) / s;
    Ok((u_bar, f))
}

/// Logistic `c(t)` with `c' = α c (1 - c)`, `α = βλ₁ - γ`.
pub fn near_critical_coefficient(alpha: f64, c0: f64, t: f64) -> f64 {
    1.0 / (1.0 + (1.0 - c0) / c0 * math::exp(-alpha * t))
}

/// `u(t) ≈ α c(t) φ₁` for parameters slightly above threshold.
pub fn near_critical_curve(
    spectrum: &Spectrum,
    params: &EpidemicParams,
    c0: f64,
    t_grid: &[f64],
) -> Result<Trajectory> {
    let alpha = params.require_supercritical(spectrum.lambda1)?;
    if !(c0 > 0.0 && c0 < 1.0) {
        return Err(Error::Validation(alloc::format!(
            "c(0) must lie in (0, 1), got {c0}"
        )));
    }
    let mut states = Vec::with_capacity(t_grid.len());
    let mut derivatives = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let c = near_critical_coefficient(alpha, c0, t);
        let dc = alpha * c * (1.0 - c);
        states.push(spectrum.phi1.scaled(alpha * c));
        derivatives.push(
            spectrum
                .phi1
                .values()
                .iter()
                .map(|p| alpha * dc * p)
                .collect(),
        );
    }
    Trajectory::new(t_grid.to_vec(), states, derivatives, &spectrum.phi1)
}

/// `‖α φ₁ - ψ‖₂ / ‖ψ‖₂`, the gap between the linearised endemic state and
/// the exact one.
pub fn near_critical_endemic_gap(model: &SisModel, tol: f64) -> Result<f64> {
    let psi = model.endemic(tol)?.psi;
    let approx = model.phi1().scaled(model.alpha1());
    Ok(approx.distance(&psi)? / psi.norm())
}
