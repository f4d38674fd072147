//! Time-shift alignment of epidemic curves started from small initial data
//! and the eternal solution emerging from the disease-free state.

use alloc::vec::Vec;

use crate::dynamics::{summarize, SisModel, Trajectory};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::math;
use crate::ode::{IntegrationStats, IntegratorConfig};

/// Scalar statistic whose first crossing defines the time shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Crossing {
    /// `c₁(t) = ⟨φ₁, u(t)⟩`.
    #[default]
    C1,
    /// `∫ u(t, x) dx`.
    Prevalence,
}

impl Crossing {
    pub fn name(self) -> &'static str {
        match self {
            Crossing::C1 => "c1",
            Crossing::Prevalence => "prevalence",
        }
    }

    fn series(self, traj: &Trajectory) -> &[f64] {
        match self {
            Crossing::C1 => traj.c1(),
            Crossing::Prevalence => traj.prevalence(),
        }
    }

    fn pick(self, summary: (f64, f64, f64)) -> f64 {
        match self {
            Crossing::C1 => summary.1,
            Crossing::Prevalence => summary.0,
        }
    }

    /// Equilibrium value of the statistic, above which no crossing occurs.
    pub fn ceiling(self, model: &SisModel, tol: f64) -> Result<f64> {
        let psi = model.endemic(tol)?.psi;
        Ok(match self {
            Crossing::C1 => psi.dot(model.phi1())?,
            Crossing::Prevalence => psi.integral(),
        })
    }
}

impl core::str::FromStr for Crossing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c1" => Ok(Crossing::C1),
            "prevalence" => Ok(Crossing::Prevalence),
            other => Err(Error::Validation(alloc::format!(
                "unknown crossing statistic '{other}'"
            ))),
        }
    }
}

/// Range of shifted times `s` over which `u₁(t₁ + s)` and `u₂(t₂ + s)`
/// are compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// `s ∈ [0, horizon]`.
    Forward { horizon: f64 },
    /// Every `s` covered by both trajectories, before and after the
    /// crossing.
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    pub crossing: Crossing,
    pub window: Window,
    /// Equilibrium value of the statistic; levels at or above it are
    /// rejected.
    pub ceiling: Option<f64>,
}

impl AlignOptions {
    pub fn forward(horizon: f64) -> Self {
        Self {
            crossing: Crossing::C1,
            window: Window::Forward { horizon },
            ceiling: None,
        }
    }

    pub fn overlap() -> Self {
        Self {
            crossing: Crossing::C1,
            window: Window::Overlap,
            ceiling: None,
        }
    }

    pub fn with_crossing(mut self, crossing: Crossing) -> Self {
        self.crossing = crossing;
        self
    }

    pub fn with_ceiling(mut self, ceiling: f64) -> Self {
        self.ceiling = Some(ceiling);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    /// Shift of the first trajectory, measured from its first sample.
    pub t1: f64,
    /// Shift of the second trajectory, measured from its first sample.
    pub t2: f64,
    /// `sup_s ‖u₁(t₁ + s) - u₂(t₂ + s)‖₂` over the window.
    pub sup_distance: f64,
    /// `max_i sup_{t ≤ t_i} ‖u_i(t)‖₂`.
    pub pre_shift_max: f64,
    pub level: f64,
    /// Window actually compared, in shifted time.
    pub window: (f64, f64),
    pub grid_points: usize,
}

/// First time `statistic ≥ level`, linearly interpolated between samples.
pub fn crossing_time(times: &[f64], statistic: &[f64], level: f64) -> Result<f64> {
    let k = statistic
        .iter()
        .position(|&v| v >= level)
        .ok_or(Error::InsufficientHorizon {
            level,
            t_end: times.last().copied().unwrap_or(f64::NAN),
        })?;
    if k == 0 {
        return Ok(times[0]);
    }
    let (a, b) = (statistic[k - 1], statistic[k]);
    let (ta, tb) = (times[k - 1], times[k]);
    Ok(ta + (level - a) / (b - a) * (tb - ta))
}

/// First crossing of `level` on the resampled trajectory: the sample
/// interval comes from [`crossing_time`], the root is then refined by
/// bisection on the Hermite interpolant.
pub fn trajectory_crossing(traj: &Trajectory, crossing: Crossing, level: f64) -> Result<f64> {
    let series = crossing.series(traj);
    let t_lin = crossing_time(traj.times(), series, level)?;
    let k = series.iter().position(|&v| v >= level).unwrap_or(0);
    if k == 0 || !traj.has_derivatives() {
        return Ok(t_lin);
    }
    let (mut lo, mut hi) = (traj.times()[k - 1], traj.times()[k]);
    // the interpolant may not be monotone on the interval; fall back to the
    // linear estimate if it does not bracket the level
    let f = |t: f64| -> Result<f64> { Ok(crossing.pick(traj.summary_at(t)?) - level) };
    if f(lo)? >= 0.0 || f(hi)? < 0.0 {
        return Ok(t_lin);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn typical_spacing(traj: &Trajectory) -> f64 {
    if traj.len() < 2 {
        return f64::INFINITY;
    }
    (traj.t_end() - traj.t_start()) / (traj.len() - 1) as f64
}

/// Aligns two trajectories at the first crossing of `level` and measures
/// their distance after the shift.
pub fn align(
    a: &Trajectory,
    b: &Trajectory,
    level: f64,
    opts: &AlignOptions,
) -> Result<AlignmentReport> {
    if let Some(ceiling) = opts.ceiling {
        if level >= ceiling {
            return Err(Error::UnreachableLevel { level, ceiling });
        }
    }
    let ca = trajectory_crossing(a, opts.crossing, level)?;
    let cb = trajectory_crossing(b, opts.crossing, level)?;
    let (s0, s1) = match opts.window {
        Window::Forward { horizon } => {
            if !(horizon >= 0.0) {
                return Err(Error::Validation(alloc::format!(
                    "horizon must be non-negative, got {horizon}"
                )));
            }
            for (c, traj) in [(ca, a), (cb, b)] {
                if c + horizon > traj.t_end() * (1.0 + 1e-12) + 1e-12 {
                    return Err(Error::InsufficientHorizon {
                        level,
                        t_end: traj.t_end(),
                    });
                }
            }
            (0.0, horizon)
        }
        Window::Overlap => {
            let lo = (a.t_start() - ca).max(b.t_start() - cb);
            let hi = (a.t_end() - ca).min(b.t_end() - cb);
            (lo, hi)
        }
    };
    let spacing = typical_spacing(a).min(typical_spacing(b));
    let grid = if s1 > s0 && spacing.is_finite() {
        crate::dynamics::sample_grid(s0, s1, spacing)
    } else {
        alloc::vec![s0]
    };
    let mut sup_distance: f64 = 0.0;
    for &s in &grid {
        let ua = a.state_at((ca + s).min(a.t_end()))?;
        let ub = b.state_at((cb + s).min(b.t_end()))?;
        sup_distance = sup_distance.max(ua.distance(&ub)?);
    }
    let pre_shift_max = pre_shift_norm(a, ca)?.max(pre_shift_norm(b, cb)?);
    Ok(AlignmentReport {
        t1: ca - a.t_start(),
        t2: cb - b.t_start(),
        sup_distance,
        pre_shift_max,
        level,
        window: (s0, s1),
        grid_points: grid.len(),
    })
}

/// `sup_{t ≤ c} ‖u(t)‖₂` including the interpolated state at `c`.
fn pre_shift_norm(traj: &Trajectory, c: f64) -> Result<f64> {
    let mut m = traj
        .times()
        .iter()
        .zip(traj.l2())
        .filter(|(t, _)| **t <= c)
        .map(|(_, l)| *l)
        .fold(0.0, f64::max);
    let u = traj.state_at(c)?;
    let w = u.partition().weights();
    let (_, _, l2) = summarize(u.values(), &alloc::vec![0.0; u.len()], w);
    m = m.max(l2);
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub i: usize,
    pub j: usize,
    pub report: AlignmentReport,
}

/// Pairwise alignment of a family of runs.
#[derive(Debug, Clone)]
pub struct SweepReport {
    /// `‖u_i(0)‖₂` of each member.
    pub initial_norms: Vec<f64>,
    /// Every pair `i < j`.
    pub pairs: Vec<PairReport>,
    pub max_sup_distance: f64,
    pub max_pre_shift: f64,
    /// `(δ, max sup_distance over pairs with both ‖u0‖₂ ≤ δ)` for each
    /// distinct initial norm, in increasing `δ`.
    pub restricted_max: Vec<(f64, f64)>,
    /// `(‖u0‖₂ of the larger member, sup_distance)` for consecutive members
    /// ordered by decreasing initial norm.
    pub consecutive: Vec<(f64, f64)>,
    /// Whether `βλ₁ < γ + 2β(λ₁ - λ₂)` holds.
    pub gap_condition: Option<bool>,
    pub stats: IntegrationStats,
}

impl SweepReport {
    pub fn pair(&self, i: usize, j: usize) -> Option<&AlignmentReport> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pairs
            .iter()
            .find(|p| p.i == i && p.j == j)
            .map(|p| &p.report)
    }

    /// Max sup distance over pairs drawn from `members`.
    pub fn max_over(&self, members: &[usize]) -> f64 {
        self.pairs
            .iter()
            .filter(|p| members.contains(&p.i) && members.contains(&p.j))
            .map(|p| p.report.sup_distance)
            .fold(0.0, f64::max)
    }

    /// Distance between consecutive members shrinks (within `slack`) as
    /// the initial data shrink.
    pub fn consecutive_trend_holds(&self, slack: f64) -> bool {
        self.consecutive
            .windows(2)
            .all(|w| w[1].1 <= (1.0 + slack) * w[0].1 + 1e-12)
    }

    /// Restricted maximum is monotone in `δ` within `slack`.
    pub fn restricted_trend_holds(&self, slack: f64) -> bool {
        self.restricted_max
            .windows(2)
            .all(|w| w[0].1 <= (1.0 + slack) * w[1].1 + 1e-12)
    }
}

/// Pairwise alignment of already integrated runs; `initial_norms[i]` is
/// `‖u_i(0)‖₂`.
pub fn sweep_trajectories(
    trajectories: &[Trajectory],
    level: f64,
    opts: &AlignOptions,
) -> Result<SweepReport> {
    let initial_norms: Vec<f64> = trajectories.iter().map(|t| t.states()[0].norm()).collect();
    let n = trajectories.len();
    let mut pairs = Vec::new();
    let mut stats = IntegrationStats::default();
    for t in trajectories {
        stats.merge(t.stats());
    }
    if n == 1 {
        let report = align(&trajectories[0], &trajectories[0], level, opts)?;
        pairs.push(PairReport { i: 0, j: 0, report });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let report = align(&trajectories[i], &trajectories[j], level, opts)?;
            pairs.push(PairReport { i, j, report });
        }
    }
    let max_sup_distance = pairs
        .iter()
        .map(|p| p.report.sup_distance)
        .fold(0.0, f64::max);
    let max_pre_shift = pairs
        .iter()
        .map(|p| p.report.pre_shift_max)
        .fold(0.0, f64::max);

    let mut deltas = initial_norms.clone();
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    deltas.dedup();
    let restricted_max = deltas
        .iter()
        .map(|&d| {
            let m = pairs
                .iter()
                .filter(|p| p.i != p.j && initial_norms[p.i] <= d && initial_norms[p.j] <= d)
                .map(|p| p.report.sup_distance)
                .fold(0.0, f64::max);
            (d, m)
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        initial_norms[b]
            .partial_cmp(&initial_norms[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let consecutive = order
        .windows(2)
        .map(|w| {
            let (i, j) = (w[0].min(w[1]), w[0].max(w[1]));
            let d = pairs
                .iter()
                .find(|p| p.i == i && p.j == j)
                .map_or(f64::NAN, |p| p.report.sup_distance);
            (initial_norms[w[0]], d)
        })
        .collect();
    Ok(SweepReport {
        initial_norms,
        pairs,
        max_sup_distance,
        max_pre_shift,
        restricted_max,
        consecutive,
        gap_condition: None,
        stats,
    })
}

/// Integrates every member of `family` on `[0, t_end]` and aligns all
/// pairs.
pub fn usic_sweep(
    model: &SisModel,
    family: &[Field],
    level: f64,
    t_end: f64,
    opts: &AlignOptions,
    cfg: &IntegratorConfig,
) -> Result<SweepReport> {
    if family.is_empty() {
        return Err(Error::Validation("empty initial family".into()));
    }
    let mut trajectories = Vec::with_capacity(family.len());
    for u0 in family {
        if !(model.phi1().dot(u0)? > 0.0) {
            return Err(Error::ZeroLeadingCoefficient);
        }
        trajectories.push(model.integrate(u0, 0.0, t_end, &[], cfg)?);
    }
    let mut report = sweep_trajectories(&trajectories, level, opts)?;
    report.gap_condition = gap_condition(model).ok();
    Ok(report)
}

/// `βλ₁ < γ + 2β(λ₁ - λ₂)`.
pub fn gap_condition(model: &SisModel) -> Result<bool> {
    let p = model.params();
    let l1 = model.spectrum().lambda1;
    let l2 = (model.alpha2()? + p.gamma) / p.beta;
    Ok(p.beta * l1 < p.gamma + 2.0 * p.beta * (l1 - l2))
}

/// Default anchor `ε₀ = 0.01 α₁ / (βλ₁)`.
pub fn default_epsilon0(model: &SisModel) -> f64 {
    0.01 * model.alpha1() / (model.params().beta * model.spectrum().lambda1)
}

/// Approximation of the eternal solution by runs started ever earlier.
#[derive(Debug, Clone)]
pub struct EternalSolution {
    /// Final stage, on `[-n_stages, t_fwd]`.
    pub trajectory: Trajectory,
    pub epsilon0: f64,
    pub n_stages: usize,
    /// `ε_{n_stages} = ε₀ e^{-α₁ n_stages}`.
    pub epsilon_last: f64,
    /// `cauchy_gaps[k]` compares stage `k + 2` with stage `k + 1` on
    /// `[-(k + 1), t_fwd]`.
    pub cauchy_gaps: Vec<f64>,
    /// `c₁(t) / ‖u(t)‖₂` per sample of the final stage.
    pub alignment_ratio: Vec<f64>,
    pub stats: IntegrationStats,
}

impl EternalSolution {
    /// Ratios `gap[n+1] / gap[n]`.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.cauchy_gaps.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Largest of the last `k` gap ratios.
    pub fn tail_ratio(&self, k: usize) -> Option<f64> {
        let r = self.gap_ratios();
        if r.is_empty() {
            return None;
        }
        let from = r.len().saturating_sub(k);
        Some(r[from..].iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Minimum alignment ratio over the earliest quarter of the time span.
    pub fn early_alignment(&self) -> f64 {
        let t = self.trajectory.times();
        let cut = t[0] + 0.25 * (t[t.len() - 1] - t[0]);
        t.iter()
            .zip(&self.alignment_ratio)
            .filter(|(s, _)| **s <= cut)
            .map(|(_, r)| *r)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn earliest_prevalence(&self) -> f64 {
        self.trajectory.prevalence()[0]
    }

    /// Whether prevalence increases strictly from sample to sample.
    pub fn prevalence_increasing(&self) -> bool {
        self.trajectory.prevalence().windows(2).all(|w| w[1] > w[0])
    }
}

/// Samples per unit time for the stage lattice; every stage samples the
/// times `j / K`, so stages share their sample times.
fn lattice_density(model: &SisModel) -> usize {
    libm::ceil(1.0 / model.sample_spacing()).max(1.0) as usize
}

/// One stage: starts from `min(ε_n φ₁, 1)` at `t = -n` and runs to the
/// lattice point at or after `t_fwd`.
pub fn eternal_stage(
    model: &SisModel,
    epsilon0: f64,
    n: usize,
    t_fwd: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let alpha1 = model
        .params()
        .require_supercritical(model.spectrum().lambda1)?;
    let k = lattice_density(model) as i64;
    let j_end = libm::ceil(t_fwd * k as f64 - 1e-9) as i64;
    let j_start = -(n as i64) * k;
    if j_end <= j_start {
        return Err(Error::Validation(alloc::format!(
            "t_fwd = {t_fwd} must exceed the stage start -{n}"
        )));
    }
    let times: Vec<f64> = (j_start..=j_end).map(|j| j as f64 / k as f64).collect();
    let eps = epsilon0 * math::exp(-alpha1 * n as f64);
    let u0 = model.capped_leading_mode(eps);
    model.integrate(&u0, times[0], times[times.len() - 1], &times, cfg)
}

/// `sup ‖a(t) - b(t)‖₂` over common sample times `t ≥ from`.
pub fn stage_gap(a: &Trajectory, b: &Trajectory, from: f64) -> Result<f64> {
    let mut sup: f64 = 0.0;
    let mut j = 0;
    for (i, &t) in a.times().iter().enumerate() {
        if t < from {
            continue;
        }
        while j < b.len() && b.times()[j] < t {
            j += 1;
        }
        if j < b.len() && b.times()[j] == t {
            sup = sup.max(a.states()[i].distance(&b.states()[j])?);
        }
    }
    Ok(sup)
}

/// Assembles the eternal approximation from stages `1..=n` (in order).
pub fn assemble_eternal(
    stages: Vec<Trajectory>,
    epsilon0: f64,
    model: &SisModel,
) -> Result<EternalSolution> {
    let n_stages = stages.len();
    if n_stages == 0 {
        return Err(Error::Validation("at least one stage is required".into()));
    }
    let mut cauchy_gaps = Vec::with_capacity(n_stages.saturating_sub(1));
    let mut stats = IntegrationStats::default();
    for s in &stages {
        stats.merge(s.stats());
    }
    for n in 1..n_stages {
        cauchy_gaps.push(stage_gap(&stages[n], &stages[n - 1], -(n as f64))?);
    }
    let trajectory = stages.into_iter().last().unwrap();
    Ok(finish_eternal(
        trajectory,
        epsilon0,
        n_stages,
        cauchy_gaps,
        stats,
        model,
    ))
}

fn finish_eternal(
    trajectory: Trajectory,
    epsilon0: f64,
    n_stages: usize,
    cauchy_gaps: Vec<f64>,
    stats: IntegrationStats,
    model: &SisModel,
) -> EternalSolution {
    let alignment_ratio = trajectory
        .c1()
        .iter()
        .zip(trajectory.l2())
        .map(|(c, l)| if *l > 0.0 { c / l } else { 0.0 })
        .collect();
    EternalSolution {
        trajectory,
        epsilon0,
        n_stages,
        epsilon_last: epsilon0 * math::exp(-model.alpha1() * n_stages as f64),
        cauchy_gaps,
        alignment_ratio,
        stats,
    }
}

/// Runs stages `n = 1..=n_stages` from `u_n(-n) = min(ε_n φ₁, 1)`,
/// `ε_n = ε₀ e^{-α₁ n}`, keeping only the previous stage in memory.
pub fn construct_eternal(
    model: &SisModel,
    epsilon0: Option<f64>,
    n_stages: usize,
    t_fwd: f64,
    cfg: &IntegratorConfig,
) -> Result<EternalSolution> {
    if n_stages == 0 {
        return Err(Error::Validation("n_stages must be at least 1".into()));
    }
    let epsilon0 = epsilon0.unwrap_or_else(|| default_epsilon0(model));
    if !(epsilon0 > 0.0) {
        return Err(Error::Validation(alloc::format!(
            "epsilon0 must be positive, got {epsilon0}"
        )));
    }
    let mut stats = IntegrationStats::default();
    let mut cauchy_gaps = Vec::new();
    let mut previous: Option<Trajectory> = None;
    for n in 1..=n_stages {
        let stage = eternal_stage(model, epsilon0, n, t_fwd, cfg)?;
        stats.merge(stage.stats());
        if let Some(prev) = &previous {
            cauchy_gaps.push(stage_gap(&stage, prev, -((n - 1) as f64))?);
        }
        previous = Some(stage);
    }
    Ok(finish_eternal(
        previous.unwrap(),
        epsilon0,
        n_stages,
        cauchy_gaps,
        stats,
        model,
    ))
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub eps_a: f64,
    pub eps_b: f64,
    pub alignment: AlignmentReport,
    pub tol: f64,
}

impl UniquenessReport {
    pub fn passed(&self) -> bool {
        self.alignment.sup_distance <= self.tol
    }
}

/// Builds eternal approximations from two anchors and aligns them at
/// `level` of `crossing` (half the equilibrium value when `None`) over
/// their common time range.
pub fn uniqueness_check(
    model: &SisModel,
    eps_a: f64,
    eps_b: f64,
    n_stages: usize,
    t_fwd: f64,
    crossing: Crossing,
    level: Option<f64>,
    tol: f64,
    cfg: &IntegratorConfig,
) -> Result<UniquenessReport> {
    let a = construct_eternal(model, Some(eps_a), n_stages, t_fwd, cfg)?;
    let b = construct_eternal(model, Some(eps_b), n_stages, t_fwd, cfg)?;
    let ceiling = crossing.ceiling(model, 1e-10)?;
    let level = level.unwrap_or(0.5 * ceiling);
    let opts = AlignOptions::overlap()
        .with_crossing(crossing)
        .with_ceiling(ceiling);
    let alignment = align(&a.trajectory, &b.trajectory, level, &opts)?;
    Ok(UniquenessReport {
        eps_a,
        eps_b,
        alignment,
        tol,
    })
}
