//! The SIS flow `du/dt = β(1-u)𝕎u - γu`, its linearisation at 0 and the
//! endemic equilibrium.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{weighted_dot, Field};
use crate::kernel::Kernel;
use crate::math;
use crate::ode::{self, IntegrationStats, IntegratorConfig, Method, OdeSystem};
use crate::params::EpidemicParams;
use crate::partition::Partition;
use crate::spectrum::{self, Spectrum};

/// Admissible overshoot of the state outside `[0, 1]`.
pub const STATE_TOL: f64 = 1e-8;

/// Ratio `max(β d(x) + γ) / (βλ₁ + γ)` above which [`Method::Auto`] picks the
/// linearly implicit scheme.
pub const STIFFNESS_THRESHOLD: f64 = 50.0;

/// Iteration cap of the endemic fixed-point iteration.
pub const ENDEMIC_MAX_ITER: usize = 1_000_000;

/// `β(1-u)𝕎u - γu`.
pub fn rhs(kernel: &Kernel, params: &EpidemicParams, u: &Field) -> Result<Field> {
    let wu = kernel.apply(u)?;
    let values = u
        .values()
        .iter()
        .zip(wu.values())
        .map(|(&ui, &wi)| params.beta * (1.0 - ui) * wi - params.gamma * ui)
        .collect();
    Ok(Field::from_parts_unchecked(u.partition().clone(), values))
}

/// Clipped summaries `(∫u, ⟨φ₁, u⟩, ‖u‖₂)` of a state.
pub fn summarize(u: &[f64], phi1: &[f64], weights: &[f64]) -> (f64, f64, f64) {
    let mut prevalence = 0.0;
    let mut c1 = 0.0;
    let mut l2 = 0.0;
    for ((&v, &p), &w) in u.iter().zip(phi1).zip(weights) {
        let v = v.clamp(0.0, 1.0);
        prevalence += w * v;
        c1 += w * p * v;
        l2 += w * v * v;
    }
    (prevalence, c1, math::sqrt(l2))
}

/// `n + 1` equally spaced times from `t0` to `t1` with spacing at most
/// `max_spacing`; both ends are included exactly.
pub fn sample_grid(t0: f64, t1: f64, max_spacing: f64) -> Vec<f64> {
    let span = t1 - t0;
    let n = if span > 0.0 && max_spacing > 0.0 {
        libm::ceil(span / max_spacing - 1e-9).max(1.0) as usize
    } else {
        1
    };
    let mut out: Vec<f64> = (0..=n).map(|k| t0 + span * (k as f64 / n as f64)).collect();
    out[n] = t1;
    out
}

/// Time-stamped states with their clipped summaries.
///
/// States are stored as integrated (never clipped). Derivatives, when
/// present, enable cubic Hermite resampling between samples.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Field>,
    derivatives: Vec<Vec<f64>>,
    prevalence: Vec<f64>,
    c1: Vec<f64>,
    l2: Vec<f64>,
    phi1: Field,
    stats: IntegrationStats,
    method: Method,
}

impl Trajectory {
    /// Assembles a trajectory; `derivatives` may be empty (linear
    /// resampling) or hold one vector per state.
    pub fn new(
        times: Vec<f64>,
        states: Vec<Field>,
        derivatives: Vec<Vec<f64>>,
        phi1: &Field,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::Validation(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if !derivatives.is_empty() && derivatives.len() != states.len() {
            return Err(Error::Validation(
                "one derivative per state required".into(),
            ));
        }
        for s in &states {
            phi1.check_same_partition(s)?;
        }
        let w = phi1.partition().weights();
        let mut prevalence = Vec::with_capacity(states.len());
        let mut c1 = Vec::with_capacity(states.len());
        let mut l2 = Vec::with_capacity(states.len());
        for s in &states {
            let (a, b, c) = summarize(s.values(), phi1.values(), w);
            prevalence.push(a);
            c1.push(b);
            l2.push(c);
        }
        Ok(Self {
            times,
            states,
            derivatives,
            prevalence,
            c1,
            l2,
            phi1: phi1.clone(),
            stats: IntegrationStats::default(),
            method: Method::Auto,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn prevalence(&self) -> &[f64] {
        &self.prevalence
    }

    pub fn c1(&self) -> &[f64] {
        &self.c1
    }

    pub fn l2(&self) -> &[f64] {
        &self.l2
    }

    pub fn stats(&self) -> &IntegrationStats {
        &self.stats
    }

    /// Scheme that produced the trajectory ([`Method::Auto`] if assembled
    /// by hand).
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn partition(&self) -> &Arc<Partition> {
        self.states[0].partition()
    }

    /// Leading eigenfunction used for the `c1` summaries.
    pub fn phi1(&self) -> &Field {
        &self.phi1
    }

    /// Clipped `(∫u, ⟨φ₁, u⟩, ‖u‖₂)` of the resampled state at `t`.
    pub fn summary_at(&self, t: f64) -> Result<(f64, f64, f64)> {
        let u = self.state_at(t)?;
        Ok(summarize(
            u.values(),
            self.phi1.values(),
            u.partition().weights(),
        ))
    }

    pub fn has_derivatives(&self) -> bool {
        !self.derivatives.is_empty()
    }

    /// Same states with every time moved by `dt`.
    pub fn shifted(mut self, dt: f64) -> Self {
        self.times.iter_mut().for_each(|t| *t += dt);
        self
    }

    /// State at `t` by cubic Hermite interpolation (linear without
    /// derivatives).
    pub fn state_at(&self, t: f64) -> Result<Field> {
        let (k, s) = self.locate(t)?;
        let a = &self.states[k];
        if s == 0.0 {
            return Ok(a.clone());
        }
        let b = &self.states[k + 1];
        let h = self.times[k + 1] - self.times[k];
        let values = if self.derivatives.is_empty() {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (1.0 - s) * x + s * y)
                .collect()
        } else {
            let da = &self.derivatives[k];
            let db = &self.derivatives[k + 1];
            let s2 = s * s;
            let s3 = s2 * s;
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            (0..a.len())
                .map(|i| {
                    h00 * a.values()[i] + h10 * h * da[i] + h01 * b.values()[i] + h11 * h * db[i]
                })
                .collect()
        };
        Ok(Field::from_parts_unchecked(a.partition().clone(), values))
    }

    /// Segment index and local coordinate of `t`.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let n = self.times.len();
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        let slack = 1e-12 * t0.abs().max(t1.abs()).max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::InsufficientHorizon {
                level: t,
                t_end: t1,
            });
        }
        if n == 1 {
            return Ok((0, 0.0));
        }
        let t = t.clamp(t0, t1);
        let k = self
            .times
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(n - 2);
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        if s <= 0.0 {
            Ok((k, 0.0))
        } else if s >= 1.0 {
            Ok((k + 1, 0.0))
        } else {
            Ok((k, s))
        }
    }

    /// Largest excursion of the stored states outside `[0, 1]`.
    pub fn max_domain_excess(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.values().iter())
            .map(|&v| (-v).max(v - 1.0).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// The SIS system on one kernel with its leading spectral data.
#[derive(Debug, Clone)]
pub struct SisModel {
    kernel: Arc<Kernel>,
    params: EpidemicParams,
    spectrum: Spectrum,
}

impl SisModel {
    /// Computes the leading eigenpair with the default tolerances.
    pub fn new(kernel: Kernel, params: EpidemicParams) -> Result<Self> {
        let spectrum = spectrum::leading_eigenpair(
            &kernel,
            spectrum::DEFAULT_TOL,
            spectrum::DEFAULT_MAX_ITER,
        )?;
        Ok(Self::from_parts(Arc::new(kernel), params, spectrum))
    }

    pub fn from_parts(kernel: Arc<Kernel>, params: EpidemicParams, spectrum: Spectrum) -> Self {
        Self {
            kernel,
            params,
            spectrum,
        }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn kernel_arc(&self) -> &Arc<Kernel> {
        &self.kernel
    }

    pub fn params(&self) -> &EpidemicParams {
        &self.params
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn with_params(&self, params: EpidemicParams) -> Self {
        Self {
            kernel: self.kernel.clone(),
            params,
            spectrum: self.spectrum.clone(),
        }
    }

    pub fn partition(&self) -> &Arc<Partition> {
        self.kernel.partition()
    }

    pub fn phi1(&self) -> &Field {
        &self.spectrum.phi1
    }

    /// `α₁ = βλ₁ - γ`.
    pub fn alpha1(&self) -> f64 {
        self.params.alpha(self.spectrum.lambda1)
    }

    pub fn is_supercritical(&self) -> bool {
        self.params.is_supercritical(self.spectrum.lambda1)
    }

    /// Largest sample spacing for trajectories, `0.01 / α₁` (or 0.01 when
    /// not supercritical).
    pub fn sample_spacing(&self) -> f64 {
        let a = self.alpha1();
        if a > 0.0 {
            0.01 / a
        } else {
            0.01
        }
    }

    pub fn rhs(&self, u: &Field) -> Result<Field> {
        rhs(&self.kernel, &self.params, u)
    }

    /// `max(β d(x) + γ) / (βλ₁ + γ)` with `d = 𝕎1`.
    pub fn stiffness_ratio(&self) -> f64 {
        let d = self.kernel.degree();
        let fastest = self.params.beta * d.max() + self.params.gamma;
        fastest / (self.params.beta * self.spectrum.lambda1 + self.params.gamma)
    }

    pub fn resolve_method(&self, method: Method) -> Method {
        match method {
            Method::Auto if self.stiffness_ratio() > STIFFNESS_THRESHOLD => Method::Extrapolation,
            Method::Auto => Method::DormandPrince,
            m => m,
        }
    }

    /// Integrates from `u0` at `t0` to `t1`, recording the states at
    /// `sample_times` (all of `[t0, t1]` on the default grid when empty).
    pub fn integrate(
        &self,
        u0: &Field,
        t0: f64,
        t1: f64,
        sample_times: &[f64],
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory> {
        self.spectrum.phi1.check_same_partition(u0)?;
        if let Some(i) = u0
            .values()
            .iter()
            .position(|&v| !(-STATE_TOL..=1.0 + STATE_TOL).contains(&v))
        {
            return Err(Error::DomainViolation {
                t: t0,
                cell: i,
                value: u0.values()[i],
            });
        }
        let grid;
        let times = if sample_times.is_empty() {
            grid = sample_grid(t0, t1, self.sample_spacing());
            &grid[..]
        } else {
            sample_times
        };
        let method = self.resolve_method(cfg.method);
        let cfg = cfg.clone().with_method(method);
        let system = SisSystem::new(&self.kernel, &self.params);
        let samples = ode::solve(&system, t0, u0.values(), t1, times, &cfg)?;
        let partition = u0.partition().clone();
        let states = samples
            .states
            .into_iter()
            .map(|v| Field::from_parts_unchecked(partition.clone(), v))
            .collect();
        let mut traj = Trajectory::new(
            samples.times,
            states,
            samples.derivatives,
            &self.spectrum.phi1,
        )?;
        traj.stats = samples.stats;
        traj.method = method;
        Ok(traj)
    }

    /// Solution of the linearised flow `v' = (β𝕎 - γ)v` from `u0`.
    pub fn linear_flow(&self, u0: &Field, modes: Modes) -> Result<LinearFlow> {
        LinearFlow::new(self, u0, modes)
    }

    /// Endemic equilibrium; see [`endemic_solve`].
    pub fn endemic(&self, tol: f64) -> Result<EndemicState> {
        endemic_solve(&self.kernel, &self.spectrum, &self.params, tol)
    }

    /// `min(ε φ₁, 1)` per cell.
    pub fn capped_leading_mode(&self, eps: f64) -> Field {
        self.phi1().map(|p| (eps * p).min(1.0))
    }

    /// `α₂ = βλ₂ - γ` with `λ₂` the second largest eigenvalue (0 for
    /// rank-1 kernels).
    pub fn alpha2(&self) -> Result<f64> {
        let lambda2 = match self.kernel.as_dense() {
            None => 0.0,
            Some(_) => spectrum::eigensystem(&self.kernel)?.second_largest(),
        };
        Ok(self.params.alpha(lambda2))
    }
}

struct SisSystem<'a> {
    kernel: &'a Kernel,
    beta: f64,
    gamma: f64,
    self_weights: Vec<f64>,
}

impl<'a> SisSystem<'a> {
    fn new(kernel: &'a Kernel, params: &EpidemicParams) -> Self {
        Self {
            kernel,
            beta: params.beta,
            gamma: params.gamma,
            self_weights: kernel.self_weights(),
        }
    }
}

impl OdeSystem for SisSystem<'_> {
    fn dim(&self) -> usize {
        self.self_weights.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.kernel.apply_raw(y, dy);
        for (d, &u) in dy.iter_mut().zip(y) {
            *d = self.beta * (1.0 - u) * *d - self.gamma * u;
        }
    }

    fn jacobian_diagonal(&self, _t: f64, y: &[f64], d: &mut [f64]) {
        self.kernel.apply_raw(y, d);
        for i in 0..y.len() {
            d[i] = -self.beta * d[i] - self.gamma + self.beta * (1.0 - y[i]) * self.self_weights[i];
        }
    }

    fn violation(&self, y: &[f64]) -> Option<(usize, f64)> {
        y.iter()
            .position(|&v| !(-STATE_TOL..=1.0 + STATE_TOL).contains(&v))
            .map(|i| (i, y[i]))
    }
}

/// Eigenmodes kept by [`LinearFlow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modes {
    /// All modes, including the null space of rank-1 kernels.
    Complete,
    /// The first `k` eigenpairs in decreasing order of eigenvalue.
    Leading(usize),
}

/// `v(t) = Σ_k c_k(0) e^{α_k t} φ_k`.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    partition: Arc<Partition>,
    rates: Vec<f64>,
    coefficients: Vec<f64>,
    modes: Vec<Vec<f64>>,
}

impl LinearFlow {
    fn new(model: &SisModel, u0: &Field, modes: Modes) -> Result<Self> {
        model.phi1().check_same_partition(u0)?;
        let params = model.params();
        let partition = u0.partition().clone();
        let w = partition.weights();
        let mut rates = Vec::new();
        let mut coefficients = Vec::new();
        let mut vectors = Vec::new();
        match model.kernel().as_dense() {
            None => {
                if let Modes::Leading(k) = modes {
                    if k > 1 {
                        return Err(Error::Truncation {
                            requested: k,
                            available: 1,
                        });
                    }
                }
                let phi = model.phi1().values();
                let c1 = weighted_dot(w, phi, u0.values());
                rates.push(params.alpha(model.spectrum().lambda1));
                coefficients.push(c1);
                vectors.push(phi.to_vec());
                if modes == Modes::Complete {
                    // u0 - c1 φ₁ lies in the null space and decays at rate γ
                    let rem: Vec<f64> = u0
                        .values()
                        .iter()
                        .zip(phi)
                        .map(|(u, p)| u - c1 * p)
                        .collect();
                    rates.push(-params.gamma);
                    coefficients.push(1.0);
                    vectors.push(rem);
                }
            }
            Some(_) => {
                let sys = spectrum::eigensystem(model.kernel())?;
                let n = sys.values.len();
                let k = match modes {
                    Modes::Complete => n,
                    Modes::Leading(k) if k <= n => k,
                    Modes::Leading(k) => {
                        return Err(Error::Truncation {
                            requested: k,
                            available: n,
                        })
                    }
                };
                for (lambda, phi) in sys.values.iter().zip(&sys.vectors).take(k) {
                    rates.push(params.alpha(*lambda));
                    coefficients.push(weighted_dot(w, phi.values(), u0.values()));
                    vectors.push(phi.values().to_vec());
                }
            }
        }
        Ok(Self {
            partition,
            rates,
            coefficients,
            modes: vectors,
        })
    }

    /// `α_k` of the retained modes.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `c_k(0)` of the retained modes.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn at(&self, t: f64) -> Field {
        let mut out = vec![0.0; self.partition.len()];
        for ((rate, c), phi) in self.rates.iter().zip(&self.coefficients).zip(&self.modes) {
            let a = c * math::exp(rate * t);
            for (o, p) in out.iter_mut().zip(phi) {
                *o += a * p;
            }
        }
        Field::from_parts_unchecked(self.partition.clone(), out)
    }
}

/// How an [`EndemicState`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndemicMethod {
    /// `γ = 0`, `ψ ≡ 1`.
    Saturated,
    /// Scalar bisection for rank-1 kernels.
    Bisection,
    FixedPoint,
}

#[derive(Debug, Clone)]
pub struct EndemicState {
    pub psi: Field,
    /// `‖β(1-ψ)𝕎ψ - γψ‖₂`.
    pub residual: f64,
    /// `⟨φ₁, ψ⟩` (rank-1 kernels).
    pub c_star: Option<f64>,
    pub iterations: usize,
    pub method: EndemicMethod,
}

/// Nonzero stationary state `β(1-ψ)𝕎ψ = γψ`.
///
/// Rank-1 kernels solve a scalar equation for `c = ⟨φ₁, ψ⟩` by bisection;
/// other kernels iterate `ψ ← β𝕎ψ / (γ + β𝕎ψ)` from `ψ ≡ 1`.
pub fn endemic_solve(
    kernel: &Kernel,
    spectrum: &Spectrum,
    params: &EpidemicParams,
    tol: f64,
) -> Result<EndemicState> {
    params.require_supercritical(spectrum.lambda1)?;
    if params.gamma == 0.0 {
        let psi = Field::constant(kernel.partition().clone(), 1.0);
        let residual = endemic_residual(kernel, params, &psi)?;
        return Ok(EndemicState {
            psi,
            residual,
            c_star: kernel.as_rank_one().map(|r| r.phi1().integral()),
            iterations: 0,
            method: EndemicMethod::Saturated,
        });
    }
    if kernel.as_rank_one().is_some() {
        endemic_bisection(kernel, params, tol)
    } else {
        endemic_fixed_point(kernel, params, tol, ENDEMIC_MAX_ITER)
    }
}

/// `‖β(1-ψ)𝕎ψ - γψ‖₂`.
pub fn endemic_residual(kernel: &Kernel, params: &EpidemicParams, psi: &Field) -> Result<f64> {
    Ok(rhs(kernel, params, psi)?.norm())
}

/// Bisection on `1 = ∫ φ₁² / (γ/(βλ₁) + c φ₁)` for rank-1 kernels.
pub fn endemic_bisection(
    kernel: &Kernel,
    params: &EpidemicParams,
    tol: f64,
) -> Result<EndemicState> {
    let r = kernel.as_rank_one().ok_or_else(|| {
        Error::Unsupported(format!(
            "bisection needs a rank-1 kernel, got {}",
            kernel.variant_name()
        ))
    })?;
    params.require_supercritical(r.lambda1())?;
    if params.gamma == 0.0 {
        return endemic_solve(kernel, &rank_one_spectrum(kernel)?, params, tol);
    }
    let phi = r.phi1().values();
    let w = r.phi1().partition().weights();
    let a = params.gamma / (params.beta * r.lambda1());
    let g = |c: f64| -> f64 {
        phi.iter()
            .zip(w)
            .map(|(&p, &w)| w * p * p / (a + c * p))
            .sum::<f64>()
            - 1.0
    };
    let mut hi = 1.0;
    let mut grow = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Bracket(
                "endemic coefficient bracket did not close".into(),
            ));
        }
    }
    let mut lo = 0.0;
    let mut iterations = 0;
    while iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let c = 0.5 * (lo + hi);
    let rate = params.beta * r.lambda1() * c;
    let values = phi
        .iter()
        .map(|&p| rate * p / (params.gamma + rate * p))
        .collect();
    let psi = Field::new(r.phi1().partition().clone(), values)?;
    let residual = endemic_residual(kernel, params, &psi)?;
    if !(residual <= tol) {
        return Err(Error::NoConvergence {
            what: "endemic bisection",
            iterations,
            residual,
        });
    }
    Ok(EndemicState {
        psi,
        residual,
        c_star: Some(c),
        iterations,
        method: EndemicMethod::Bisection,
    })
}

fn rank_one_spectrum(kernel: &Kernel) -> Result<Spectrum> {
    spectrum::leading_eigenpair(kernel, spectrum::DEFAULT_TOL, 1)
}

/// Fixed-point iteration `ψ ← β𝕎ψ / (γ + β𝕎ψ)` from `ψ ≡ 1`.
pub fn endemic_fixed_point(
    kernel: &Kernel,
    params: &EpidemicParams,
    tol: f64,
    max_iter: usize,
) -> Result<EndemicState> {
    let partition = kernel.partition().clone();
    let n = partition.len();
    let mut psi = vec![1.0; n];
    let mut wpsi = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let weights = partition.weights();
    while iterations < max_iter {
        kernel.apply_raw(&psi, &mut wpsi);
        // residual of the current iterate, reusing 𝕎ψ
        let mut r2 = 0.0;
        for i in 0..n {
            let v = params.beta * (1.0 - psi[i]) * wpsi[i] - params.gamma * psi[i];
            r2 += weights[i] * v * v;
        }
        residual = math::sqrt(r2);
        if !residual.is_finite() {
            return Err(Error::NoConvergence {
                what: "endemic fixed point (diverged)",
                iterations,
                residual,
            });
        }
        if residual <= tol {
            break;
        }
        for i in 0..n {
            let a = params.beta * wpsi[i];
            psi[i] = a / (params.gamma + a);
        }
        iterations += 1;
    }
    if !(residual <= tol) {
        return Err(Error::NoConvergence {
            what: "endemic fixed point",
            iterations,
            residual,
        });
    }
    let psi = Field::new(partition, psi)?;
    let c_star = kernel
        .as_rank_one()
        .map(|r| psi.dot(r.phi1()))
        .transpose()?;
    Ok(EndemicState {
        psi,
        residual,
        c_star,
        iterations,
        method: EndemicMethod::FixedPoint,
    })
}

/// Measured quantities of the linearisation bounds on `[0, t̄]`.
#[derive(Debug, Clone)]
pub struct LinearizationReport {
    pub eps_prime: f64,
    pub c1_initial: f64,
    pub u0_norm: f64,
    /// `t̄ = log(ε'/c₁(0)) / α₁`.
    pub t_bar: f64,
    /// `sup ‖u - v‖₂` over the samples.
    pub linear_error: f64,
    /// `(βλ₁/α₁)(‖u0‖₂/c₁(0))² ε'²`.
    pub linear_error_bound: f64,
    /// `‖v(t̄)/ε' - φ₁‖₂`.
    pub leading_term_error: f64,
    /// `(‖u0‖₂/c₁(0)) e^{-(α₁-α₂)t̄}`.
    pub leading_term_bound: f64,
    /// `max (u - v)` over cells and samples.
    pub cooperative_excess: f64,
    /// `max (‖u‖₂ - √(c₁/m))` over samples, when `m = min φ₁ > 0`.
    pub c1_bound_excess: Option<f64>,
    /// `((‖u0‖₂/c₁(0))², 1/(m² J))` for discrete kernels.
    pub discrete_initial: Option<(f64, f64)>,
    pub samples: usize,
}

impl LinearizationReport {
    pub fn linear_error_holds(&self) -> bool {
        self.linear_error <= self.linear_error_bound
    }

    pub fn leading_term_holds(&self) -> bool {
        self.leading_term_error <= self.leading_term_bound * (1.0 + 1e-9) + 1e-12
    }

    pub fn cooperative_holds(&self) -> bool {
        self.cooperative_excess <= STATE_TOL
    }

    pub fn c1_bound_holds(&self) -> bool {
        self.c1_bound_excess.is_none_or(|e| e <= STATE_TOL)
    }

    pub fn discrete_initial_holds(&self) -> bool {
        self.discrete_initial
            .is_none_or(|(l, r)| l <= r * (1.0 + 1e-12))
    }

    pub fn all_hold(&self) -> bool {
        self.linear_error_holds()
            && self.leading_term_holds()
            && self.cooperative_holds()
            && self.c1_bound_holds()
            && self.discrete_initial_holds()
    }
}

/// Integrates `u` and evaluates `v` up to the time `t̄` where the leading
/// linear coefficient reaches `eps_prime`, measuring each bound.
pub fn verify_linearization_bounds(
    model: &SisModel,
    u0: &Field,
    eps_prime: f64,
    cfg: &IntegratorConfig,
) -> Result<LinearizationReport> {
    let alpha1 = model
        .params()
        .require_supercritical(model.spectrum().lambda1)?;
    let phi = model.phi1();
    let c1_initial = phi.dot(u0)?;
    if !(c1_initial > 0.0) {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let t_bar = math::ln(eps_prime / c1_initial) / alpha1;
    if !(t_bar > 0.0) {
        return Err(Error::Validation(format!(
            "eps_prime = {eps_prime} does not exceed c1(0) = {c1_initial}"
        )));
    }
    let u0_norm = u0.norm();
    let ratio = u0_norm / c1_initial;
    let beta_lambda = model.params().beta * model.spectrum().lambda1;
    let linear_error_bound = beta_lambda / alpha1 * ratio * ratio * eps_prime * eps_prime;
    let alpha2 = model.alpha2()?;
    let leading_term_bound = ratio * math::exp(-(alpha1 - alpha2) * t_bar);

    let times = sample_grid(0.0, t_bar, model.sample_spacing());
    let traj = model.integrate(u0, 0.0, t_bar, &times, cfg)?;
    let flow = model.linear_flow(u0, Modes::Complete)?;
    let m = model.spectrum().min_phi();

    let mut linear_error: f64 = 0.0;
    let mut cooperative_excess = f64::NEG_INFINITY;
    let mut c1_excess = f64::NEG_INFINITY;
    for (k, &t) in traj.times().iter().enumerate() {
        let u = &traj.states()[k];
        let v = flow.at(t);
        linear_error = linear_error.max(u.distance(&v)?);
        for (a, b) in u.values().iter().zip(v.values()) {
            cooperative_excess = cooperative_excess.max(a - b);
        }
        if m > 0.0 {
            c1_excess = c1_excess.max(traj.l2()[k] - math::sqrt(traj.c1()[k] / m));
        }
    }
    let v_end = flow.at(t_bar);
    let leading_term_error = v_end.scaled(1.0 / eps_prime).distance(phi)?;
    let discrete_initial = match model.kernel() {
        Kernel::DiscreteBlock(_) if m > 0.0 => {
            let j = model.partition().min_weight();
            Some((ratio * ratio, 1.0 / (m * m * j)))
        }
        _ => None,
    };
    Ok(LinearizationReport {
        eps_prime,
        c1_initial,
        u0_norm,
        t_bar,
        linear_error,
        linear_error_bound,
        leading_term_error,
        leading_term_bound,
        cooperative_excess,
        c1_bound_excess: (m > 0.0).then_some(c1_excess),
        discrete_initial,
        samples: traj.len(),
    })
}

/// Default `θ₀ = 0.5 (1 - γ/(βλ₁)) / ‖φ₁‖_∞` for [`monotone_envelope`].
pub fn default_theta(model: &SisModel) -> f64 {
    let s = model.spectrum();
    0.5 * (1.0 - model.params().gamma / (model.params().beta * s.lambda1)) / s.phi1.sup_norm()
}

#[derive(Debug, Clone)]
pub struct MonotoneEnvelope {
    pub theta: f64,
    pub trajectory: Trajectory,
    /// Largest per-cell decrease between consecutive samples.
    pub max_decrease: f64,
}

impl MonotoneEnvelope {
    pub fn is_monotone(&self) -> bool {
        self.max_decrease <= STATE_TOL
    }
}

/// Trajectory from `θφ₁` with a per-cell monotonicity measurement.
pub fn monotone_envelope(
    model: &SisModel,
    theta: Option<f64>,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<MonotoneEnvelope> {
    let theta = theta.unwrap_or_else(|| default_theta(model));
    let u0 = model.phi1().scaled(theta);
    if !u0.in_unit_range(0.0) {
        return Err(Error::Validation(format!(
            "theta * phi1 leaves [0, 1] for theta = {theta}"
        )));
    }
    let trajectory = model.integrate(&u0, 0.0, t_end, &[], cfg)?;
    let max_decrease = trajectory
        .states()
        .windows(2)
        .flat_map(|w| {
            w[0].values()
                .iter()
                .zip(w[1].values())
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    Ok(MonotoneEnvelope {
        theta,
        trajectory,
        max_decrease,
    })
}

/// Lyapunov decrease of `‖u(t) - ψ‖₂` and uniform infection pressure.
#[derive(Debug, Clone)]
pub struct LyapunovReport {
    /// Largest increase of `‖u - ψ‖₂` between consecutive samples.
    pub max_increase: f64,
    /// `min 𝕎u(0)`.
    pub initial_pressure: f64,
    /// Half the initial pressure.
    pub epsilon0_tilde: f64,
    /// `min` over samples and cells of `𝕎u(t)`.
    pub min_pressure: f64,
}

impl LyapunovReport {
    pub fn decreasing(&self) -> bool {
        self.max_increase <= STATE_TOL
    }

    pub fn pressure_holds(&self) -> bool {
        self.min_pressure >= self.epsilon0_tilde
    }
}

pub fn lyapunov_check(kernel: &Kernel, traj: &Trajectory, psi: &Field) -> Result<LyapunovReport> {
    let mut dist = Vec::with_capacity(traj.len());
    let mut min_pressure = f64::INFINITY;
    let mut initial_pressure = f64::NAN;
    for (k, u) in traj.states().iter().enumerate() {
        dist.push(u.distance(psi)?);
        let p = kernel.apply(u)?.min();
        if k == 0 {
            initial_pressure = p;
        }
        min_pressure = min_pressure.min(p);
    }
    let max_increase = dist.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(LyapunovReport {
        max_increase,
        initial_pressure,
        epsilon0_tilde: 0.5 * initial_pressure,
        min_pressure,
    })
}

/// `max` over common sample times of the L2 distance between two
/// trajectories (possibly on different partitions).
pub fn sup_distance_on_common_times(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let mut sup: f64 = 0.0;
    let mut j = 0;
    let mut matched = 0;
    for (i, &t) in a.times().iter().enumerate() {
        while j < b.len() && b.times()[j] < t {
            j += 1;
        }
        if j < b.len() && b.times()[j] == t {
            sup = sup.max(a.states()[i].distance(&b.states()[j])?);
            matched += 1;
        }
    }
    if matched == 0 {
        return Err(Error::Validation(
            "trajectories share no sample time".into(),
        ));
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_annealed, Correlation};

    fn hmfa(gamma: f64) -> SisModel {
        SisModel::new(
            Kernel::constant(1.0).unwrap(),
            EpidemicParams::new(1.0, gamma).unwrap(),
        )
        .unwrap()
    }

    fn logistic(u0: f64, t: f64) -> f64 {
        u0 / (u0 + (1.0 - u0) * libm::exp(-t))
    }

    #[test]
    fn rhs_examples() {
        let m = hmfa(0.0);
        let half = Field::constant(m.partition().clone(), 0.5);
        assert!((m.rhs(&half).unwrap().values()[0] - 0.25).abs() < 1e-15);
        let zero = Field::zeros(m.partition().clone());
        assert_eq!(m.rhs(&zero).unwrap().values()[0], 0.0);
    }

    #[test]
    fn logistic_closed_form() {
        let m = hmfa(0.0);
        let u0 = Field::constant(m.partition().clone(), 1e-3);
        let traj = m
            .integrate(&u0, 0.0, 20.0, &[], &IntegratorConfig::default())
            .unwrap();
        assert_eq!(traj.method(), Method::DormandPrince);
        for (t, p) in traj.times().iter().zip(traj.prevalence()) {
            assert!((p - logistic(1e-3, *t)).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let m = hmfa(0.0);
        let u0 = Field::zeros(m.partition().clone());
        let traj = m
            .integrate(&u0, 0.0, 5.0, &[], &IntegratorConfig::default())
            .unwrap();
        assert!(traj.states().iter().all(|s| s.values()[0] == 0.0));
    }

    #[test]
    fn rejects_initial_state_outside_domain() {
        let m = hmfa(0.0);
        let u0 = Field::constant(m.partition().clone(), 1.5);
        assert!(matches!(
            m.integrate(&u0, 0.0, 1.0, &[], &IntegratorConfig::default()),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn hermite_resampling_is_accurate() {
        let m = hmfa(0.0);
        let u0 = Field::constant(m.partition().clone(), 1e-2);
        let traj = m
            .integrate(
                &u0,
                0.0,
                10.0,
                &sample_grid(0.0, 10.0, 0.1),
                &IntegratorConfig::default(),
            )
            .unwrap();
        for k in 0..200 {
            let t = 0.0123 + k as f64 * 0.0497;
            let v = traj.state_at(t).unwrap().values()[0];
            assert!((v - logistic(1e-2, t)).abs() < 1e-7, "t = {t}");
        }
        assert!(traj.state_at(10.5).is_err());
    }

    #[test]
    fn sample_grid_endpoints_and_spacing() {
        let g = sample_grid(-3.0, 7.0, 0.3);
        assert_eq!(g[0], -3.0);
        assert_eq!(*g.last().unwrap(), 7.0);
        assert!(g.windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-12));
    }

    #[test]
    fn endemic_constant_kernel() {
        let m = SisModel::new(
            Kernel::constant(1.0).unwrap(),
            EpidemicParams::new(2.0, 1.0).unwrap(),
        )
        .unwrap();
        let e = m.endemic(1e-12).unwrap();
        assert!((e.psi.values()[0] - 0.5).abs() < 1e-12);
        assert_eq!(e.method, EndemicMethod::FixedPoint);
        let si = hmfa(0.0).endemic(1e-12).unwrap();
        assert_eq!(si.method, EndemicMethod::Saturated);
        assert_eq!(si.psi.values()[0], 1.0);
        assert!(matches!(
            hmfa(1.5).endemic(1e-12),
            Err(Error::Subcritical { .. })
        ));
    }

    #[test]
    fn endemic_paths_agree_on_power_law() {
        let k = Kernel::power_law(4.0, 0.4, 400).unwrap();
        let p = EpidemicParams::new(1.0, 1.0).unwrap();
        let m = SisModel::new(k, p).unwrap();
        let b = m.endemic(1e-10).unwrap();
        assert_eq!(b.method, EndemicMethod::Bisection);
        let f = endemic_fixed_point(m.kernel(), &p, 1e-11, ENDEMIC_MAX_ITER).unwrap();
        assert!(b.psi.distance(&f.psi).unwrap() < 1e-8);
        // c = ⟨φ₁, ψ⟩ self-consistency
        let c = b.psi.dot(m.phi1()).unwrap();
        assert!((c - b.c_star.unwrap()).abs() < 1e-12 * c.max(1.0));
    }

    #[test]
    fn linear_flow_rank_one_pure_mode() {
        let m = SisModel::new(
            Kernel::power_law(2.0, 0.3, 200).unwrap(),
            EpidemicParams::new(1.0, 0.5).unwrap(),
        )
        .unwrap();
        let u0 = m.phi1().scaled(1e-3);
        let flow = m.linear_flow(&u0, Modes::Complete).unwrap();
        let v = flow.at(2.0);
        let expect = m.phi1().scaled(1e-3 * libm::exp(1.5 * 2.0));
        assert!(v.distance(&expect).unwrap() < 1e-15);
        assert!(matches!(
            m.linear_flow(&u0, Modes::Leading(3)),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn linear_flow_complete_reproduces_initial_data() {
        let k = build_annealed(
            &[1.0, 2.0, 5.0],
            &[0.5, 0.3, 0.2],
            Correlation::Uncorrelated,
        )
        .unwrap();
        let m = SisModel::new(k, EpidemicParams::new(1.0, 0.2).unwrap()).unwrap();
        let u0 = Field::new(m.partition().clone(), vec![0.1, 0.3, 0.2]).unwrap();
        let v = m.linear_flow(&u0, Modes::Complete).unwrap().at(0.0);
        assert!(v.distance(&u0).unwrap() < 1e-13);
    }

    #[test]
    fn linearization_bounds_on_hmfa() {
        let m = hmfa(0.0);
        let u0 = Field::constant(m.partition().clone(), 1e-4);
        let r = verify_linearization_bounds(&m, &u0, 1e-2, &IntegratorConfig::default()).unwrap();
        assert!((r.linear_error_bound - 1e-4).abs() < 1e-15);
        assert!(r.all_hold(), "{r:?}");
    }

    #[test]
    fn monotone_envelope_relaxes_upward() {
        let m = hmfa(0.5);
        let env = monotone_envelope(&m, Some(0.1), 20.0, &IntegratorConfig::default()).unwrap();
        assert!(env.is_monotone());
        let last = *env.trajectory.prevalence().last().unwrap();
        assert!((last - 0.5).abs() < 1e-3);
        let zero = monotone_envelope(&m, Some(0.0), 5.0, &IntegratorConfig::default()).unwrap();
        assert!(zero.trajectory.prevalence().iter().all(|&p| p == 0.0));
    }
}
