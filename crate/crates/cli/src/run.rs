//! Experiment orchestration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use sisgraphon::dynamics::{
    lyapunov_check, monotone_envelope, summarize, verify_linearization_bounds, SisModel, Trajectory,
};
use sisgraphon::kernel::describe;
use sisgraphon::ode::IntegrationStats;
use sisgraphon::si::SiClosedForm;
use sisgraphon::spectrum::{self, DEFAULT_MAX_ITER};
use sisgraphon::usic::{self, AlignOptions, EternalSolution};
use sisgraphon::{EpidemicParams, Field, Kernel};

use crate::config::{Experiment, ExperimentConfig, InitialSpec};
use crate::kernel_file::build_kernel;
use crate::output::{Csv, RunDir};

/// Dense kernels up to this size get their second eigenvalue from the full
/// eigensystem; larger ones use deflated power iteration.
const FULL_EIGEN_CELLS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
}

impl Check {
    fn le(name: &str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured <= bound,
            measured,
            bound,
        }
    }

    fn ge(name: &str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured >= bound,
            measured,
            bound,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Context_ {
    model: SisModel,
    constants: Map<String, Value>,
    results: Map<String, Value>,
    checks: Vec<Check>,
    stats: IntegrationStats,
    method: Option<&'static str>,
}

impl Context_ {
    fn absorb(&mut self, traj: &Trajectory) {
        self.stats.merge(traj.stats());
        self.method = Some(traj.method().name());
    }
}

fn build_model(cfg: &ExperimentConfig) -> Result<SisModel> {
    let kernel = build_kernel(&cfg.kernel).context("kernel: building kernel")?;
    let params = EpidemicParams::new(cfg.beta, cfg.gamma).context("params")?;
    let spec = spectrum::leading_eigenpair(&kernel, cfg.tolerances.eigen_tol, DEFAULT_MAX_ITER)
        .context("kernel::leading_eigenpair")?;
    Ok(SisModel::from_parts(
        std::sync::Arc::new(kernel),
        params,
        spec,
    ))
}

fn lambda2(model: &SisModel, tol: f64) -> Result<(f64, &'static str)> {
    let k = model.kernel();
    Ok(match k.as_dense() {
        None => (0.0, "rank_one"),
        Some(d) if d.len() <= FULL_EIGEN_CELLS => {
            (spectrum::eigensystem(k)?.second_largest(), "eigensystem")
        }
        Some(_) => (
            spectrum::second_eigenvalue(k, model.spectrum(), tol, DEFAULT_MAX_ITER)?,
            "deflated_power_iteration",
        ),
    })
}

fn initial_field(model: &SisModel, spec: &InitialSpec) -> Result<Field> {
    let p = model.partition().clone();
    Ok(match spec {
        InitialSpec::Uniform(v) => Field::constant(p, *v),
        InitialSpec::Leading(eps) => model.capped_leading_mode(*eps),
        InitialSpec::Values(v) => Field::new(p, v.clone()).context("initial condition")?,
    })
}

fn grid_csv(model: &SisModel) -> Csv {
    let p = model.partition();
    let mut c = Csv::new(&["cell", "x_left", "x_right", "weight", "phi1"]);
    let e = p.edges();
    for (i, (w, phi)) in p.weights().iter().zip(model.phi1().values()).enumerate() {
        c.row(&[i as f64, e[i], e[i + 1], *w, *phi]);
    }
    c
}

fn summary_csv(traj: &Trajectory) -> Csv {
    let mut c = Csv::new(&["t", "prevalence", "c1", "l2"]);
    for k in 0..traj.len() {
        c.row(&[
            traj.times()[k],
            traj.prevalence()[k],
            traj.c1()[k],
            traj.l2()[k],
        ]);
    }
    c
}

fn states_csv(traj: &Trajectory) -> Csv {
    let n = traj.partition().len();
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("u{i}")));
    let mut c = Csv::new(&header);
    let mut row = Vec::with_capacity(n + 1);
    for (t, u) in traj.times().iter().zip(traj.states()) {
        row.clear();
        row.push(*t);
        row.extend_from_slice(u.values());
        c.row(&row);
    }
    c
}

/// Runs `experiment` and writes its outputs under `output_root`.
pub fn run(
    cfg: &ExperimentConfig,
    experiment: Experiment,
    output_root: &Path,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let model = build_model(cfg)?;
    let mut dir = RunDir::create(output_root.join(&cfg.output_dir))?;
    let mut cx = Context_ {
        constants: Map::new(),
        results: Map::new(),
        checks: Vec::new(),
        stats: IntegrationStats::default(),
        method: None,
        model,
    };
    let s = cx.model.spectrum();
    cx.constants.insert("lambda1".into(), json!(s.lambda1));
    cx.constants.insert("m_min_phi1".into(), json!(s.min_phi()));
    cx.constants
        .insert("eigen_residual".into(), json!(s.residual));
    cx.constants
        .insert("alpha1".into(), json!(cx.model.alpha1()));
    if let Kernel::PowerLaw(pl) = cx.model.kernel() {
        cx.constants
            .insert("grid_cells".into(), json!(pl.grid_size()));
        cx.constants
            .insert("grading_kappa".into(), json!(pl.kappa()));
        cx.constants
            .insert("sampled_norm".into(), json!(pl.sampled_norm()));
    }

    match experiment {
        Experiment::Spectrum => spectrum_run(cfg, &mut cx, &mut dir)?,
        Experiment::Endemic => endemic_run(cfg, &mut cx, &mut dir)?,
        Experiment::Simulate => simulate_run(cfg, &mut cx, &mut dir)?,
        Experiment::UsicAlign => usic_run(cfg, &mut cx, &mut dir)?,
        Experiment::Eternal => eternal_run(cfg, &mut cx, &mut dir)?,
        Experiment::SiExact => si_run(cfg, &mut cx, &mut dir)?,
        Experiment::ChiCurve => chi_run(cfg, &mut cx, &mut dir)?,
        Experiment::VerifyBounds => bounds_run(cfg, &mut cx, &mut dir)?,
    }

    let t = &cfg.tolerances;
    let checks: Vec<Value> = cx
        .checks
        .iter()
        .map(|c| json!({"name": c.name, "passed": c.passed, "measured": c.measured, "bound": c.bound}))
        .collect();
    let passed = cx.checks.iter().all(|c| c.passed);
    let manifest = json!({
        "experiment": experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(&cfg.raw)?,
        "kernel": describe(cx.model.kernel()),
        "params": {"beta": cfg.beta, "gamma": cfg.gamma},
        "tolerances": {
            "rel_tol": t.rel_tol,
            "abs_tol": t.abs_tol,
            "max_step": if t.max_step.is_finite() { json!(t.max_step) } else { json!("inf") },
            "method": t.method.name(),
            "eigen_tol": t.eigen_tol,
            "endemic_tol": t.endemic_tol,
        },
        "integrator": {
            "method": cx.method,
            "accepted_steps": cx.stats.accepted,
            "rejected_steps": cx.stats.rejected,
            "rhs_evaluations": cx.stats.rhs_evaluations,
        },
        "constants": Value::Object(cx.constants),
        "results": Value::Object(cx.results),
        "checks": checks,
        "status": if passed { "ok" } else { "property_failure" },
        "files": dir.files,
    });
    dir.write_json(
        "timing.json",
        &json!({"wall_clock_seconds": start.elapsed().as_secs_f64()}),
    )?;
    dir.write_json("manifest.json", &manifest)?;
    Ok(RunOutcome {
        dir: dir.path.clone(),
        checks: cx.checks,
        files: dir.files.clone(),
    })
}

fn add_lambda2(cfg: &ExperimentConfig, cx: &mut Context_) -> Result<f64> {
    let (l2, how) =
        lambda2(&cx.model, cfg.tolerances.eigen_tol).context("kernel::second_eigenvalue")?;
    cx.constants.insert("lambda2".into(), json!(l2));
    cx.constants.insert("lambda2_method".into(), json!(how));
    cx.constants.insert(
        "spectral_gap".into(),
        json!(cx.model.spectrum().lambda1 - l2),
    );
    Ok(l2)
}

fn spectrum_run(cfg: &ExperimentConfig, cx: &mut Context_, dir: &mut RunDir) -> Result<()> {
    add_lambda2(cfg, cx)?;
    let s = cx.model.spectrum();
    let wphi = cx.model.kernel().apply(&s.phi1)?;
    let rayleigh = wphi.dot(&s.phi1)? / s.phi1.dot(&s.phi1)?;
    cx.results
        .insert("rayleigh_quotient".into(), json!(rayleigh));
    cx.results.insert("iterations".into(), json!(s.iterations));
    cx.results
        .insert("supercritical".into(), json!(cx.model.is_supercritical()));
    cx.checks.push(Check::le(
        "eigen_residual",
        s.residual,
        cfg.tolerances.eigen_tol.max(1e-12),
    ));
    dir.write_csv("eigenfunction.csv", &grid_csv(&cx.model))?;
    Ok(())
}

fn endemic_run(cfg: &ExperimentConfig, cx: &mut Context_, dir: &mut RunDir) -> Result<()> {
    let e = cx
        .model
        .endemic(cfg.tolerances.endemic_tol)
        .context("dynamics::endemic_solve")?;
    cx.results.insert(
        "method".into(),
        json!(format!("{:?}", e.method).to_lowercase()),
    );
    cx.results.insert("residual".into(), json!(e.residual));
    cx.results.insert("iterations".into(), json!(e.iterations));
    cx.results.insert("c_star".into(), json!(e.c_star));
    cx.results
        .insert("prevalence".into(), json!(e.psi.integral()));
    let mut c = Csv::new(&["cell", "x_mid", "weight", "psi"]);
    let p = cx.model.partition();
    for (i, ((x, w), v)) in p
        .midpoints()
        .iter()
        .zip(p.weights())
        .zip(e.psi.values())
        .enumerate()
    {
        c.row(&[i as f64, *x, *w, *v]);
    }
    dir.write_csv("endemic.csv", &c)?;
    Ok(())
}

fn simulate_run(cfg: &ExperimentConfig, cx: &mut Context_, dir: &mut RunDir) -> Result<()> {
    let o = &cfg.simulate;
    let u0 = initial_field(&cx.model, &o.initial)?;
    let times = match o.sample_spacing {
        Some(h) => sisgraphon::dynamics::sample_grid(0.0, o.t_end, h),
        None => Vec::new(),
    };
    let traj = cx
        .model
        .integrate(&u0, 0.0, o.t_end, &times, &cfg.tolerances.integrator())
        .context("dynamics::integrate")?;
    cx.absorb(&traj);
    cx.results.insert("samples".into(), json!(traj.len()));
    cx.results.insert(
        "final_prevalence".into(),
        json!(traj.prevalence()[traj.len() - 1]),
    );
    cx.results
        .insert("max_domain_excess".into(), json!(traj.max_domain_excess()));
    dir.write_csv("grid.csv", &grid_csv(&cx.model))?;
    dir.write_csv("summary.csv", &summary_csv(&traj))?;
    if o.write_states {
        dir.write_csv("states.csv", &states_csv(&traj))?;
    }
    Ok(())
}

fn usic_run(cfg: &ExperimentConfig, cx: &mut Context_, dir: &mut RunDir) -> Result<()> {
    let o = &cfg.usic;
    let icfg = cfg.tolerances.integrator();
    let model = &cx.model;
    let trajectories = o
        .initial_levels
        .par_iter()
        .map(|&c| {
            let u0 = Field::constant(model.partition().clone(), c);
            model.integrate(&u0, 0.0, o.t_end, &[], &icfg)
        })
        .collect::<Result<Vec<_>, _>>()
        .context("dynamics::integrate (usic family)")?;
    for t in &trajectories {
        cx.absorb(t);
    }
    let opts = AlignOptions::forward(o.horizon).with_crossing(o.crossing);
    let r = usic::sweep_trajectories(&trajectories, o.level, &opts).context("usic::usic_sweep")?;
    let gap = usic::gap_condition(&cx.model).ok();

    let mut pairs = Csv::new(&[
        "i",
        "j",
        "u0_i",
        "u0_j",
        "t1",
        "t2",
        "sup_distance",
        "pre_shift_max",
    ]);
    for p in &r.pairs {
        pairs.row(&[
            p.i as f64,
            p.j as f64,
            o.initial_levels[p.i],
            o.initial_levels[p.j],
            p.report.t1,
            p.report.t2,
            p.report.sup_distance,
            p.report.pre_shift_max,
        ]);
    }
    let mut restricted = Csv::new(&["delta", "max_sup_distance"]);
    for (d, m) in &r.restricted_max {
        restricted.row(&[*d, *m]);
    }
    let mut consecutive = Csv::new(&["u0_norm", "sup_distance"]);
    for (d, m) in &r.consecutive {
        consecutive.row(&[*d, *m]);
    }
    // prevalence of every member against shifted time on the common window
    let spacing = cx.model.sample_spacing();
    let grid = sisgraphon::dynamics::sample_grid(0.0, o.horizon, spacing);
    let crossings: Vec<f64> = r
        .pairs
        .iter()
        .filter(|p| p.i == 0)
        .map(|p| p.report.t2 + trajectories[p.j].t_start())
        .collect();
    let first = r
        .pairs
        .first()
        .map(|p| p.report.t1 + trajectories[0].t_start());
    let mut header = vec!["s".to_string()];
    header.extend((0..trajectories.len()).map(|i| format!("prevalence{i}")));
    let mut curves = Csv::new(&header);
    if let Some(c0) = first {
        let shifts: Vec<f64> = std::iter::once(c0).chain(crossings).collect();
        for &s in &grid {
            let mut row = vec![s];
            for (traj, c) in trajectories.iter().zip(&shifts) {
                row.push(traj.summary_at((c + s).min(traj.t_end()))?.0);
            }
            curves.row(&row);
        }
    }

    cx.results
        .insert("max_sup_distance".into(), json!(r.max_sup_distance));
    cx.results
        .insert("max_pre_shift".into(), json!(r.max_pre_shift));
    cx.results.insert("gap_condition".into(), json!(gap));
    cx.results.insert(
        "restricted_trend_holds".into(),
        json!(r.restricted_trend_holds(0.1)),
    );
    cx.results.insert(
        "consecutive_trend_holds".into(),
        json!(r.consecutive_trend_holds(0.1)),
    );
    // largest ratio between the restricted maxima at consecutive δ
    let trend = r
        .restricted_max
        .windows(2)
        .map(|w| if w[1].1 > 0.0 { w[0].1 / w[1].1 } else { 0.0 })
        .fold(0.0, f64::max);
    cx.checks.push(Check {
        name: "restricted_trend".into(),
        passed: r.restricted_trend_holds(0.1),
        measured: trend,
        bound: 1.1,
    });
    dir.write_csv("pairs.csv", &pairs)?;
    dir.write_csv("restricted.csv", &restricted)?;
    dir.write_csv("consecutive.csv", &consecutive)?;
    dir.write_csv("aligned_prevalence.csv", &curves)?;
    Ok(())
}

fn eternal_report(
    e: &EternalSolution,
    is_rank_one: bool,
    checks: &mut Vec<Check>,
    results: &mut Map<String, Value>,
) {
    let tail = e.tail_ratio(3).unwrap_or(f64::NAN);
    results.insert("epsilon0".into(), json!(e.epsilon0));
    results.insert("epsilon_last".into(), json!(e.epsilon_last));
    results.insert("cauchy_gaps".into(), json!(e.cauchy_gaps));
    results.insert("gap_ratio_tail".into(), json!(tail));
    results.insert("early_alignment".into(), json!(e.early_alignment()));
    results.insert("earliest_prevalence".into(), json!(e.earliest_prevalence()));
    results.insert(
        "prevalence_increasing".into(),
        json!(e.prevalence_increasing()),
    );
    checks.push(Check::le(
        "earliest_prevalence",
        e.earliest_prevalence(),
        2.0 * e.epsilon_last,
    ));
    if e.cauchy_gaps.len() >= 2 {
        checks.push(Check::le("cauchy_gap_ratio", tail, 1.0));
    }
    if is_rank_one && e.n_stages >= 8 {
        checks.push(Check::ge(
            "early_alignment",
            e.early_alignment(),
            1.0 - 1e-3,
        ));
    }
}

fn eternal_run(cfg: &ExperimentConfig, cx: &mut Context_, dir: &mut RunDir) -> Result<()> {
    let o = &cfg.eternal;
    let icfg = cfg.tolerances.integrator();
    let model = &cx.model;
    let (e, uniq) = rayon::join(
        || usic::construct_eternal(model, o.epsilon0, o.n_stages, o.t_fwd, &icfg),
        || {
            o.uniqueness_anchors.map(|(a, b)| {
                usic::uniqueness_check(
                    model,
                    a,
                    b,
                    o.n_stages,
                    o.t_fwd,
                    o.crossing,
                    None,
                    o.uniqueness_tol,
                    &icfg,
                )
            })
        },
    );
    let e = e.context("usic::construct_eternal")?;
    cx.stats.merge(&e.stats);
    cx.method = Some(e.trajectory.method().name());
    let rank_one = cx.model.kernel().as_rank_one().is_some();
    eternal_report(&e, rank_one, &mut cx.checks, &mut cx.results);
    if let Some(u) = uniq {
        let u = u.context("usic::uniqueness_check")?;
        cx.results.insert(
            "uniqueness".into(),
            json!({
                "anchors": [u.eps_a, u.eps_b],
                "level": u.alignment.level,
                "t1": u.alignment.t1,
                "t2": u.alignment.t2,
                "sup_distance": u.alignment.sup_distance,
            }),
        );
        cx.checks
            .push(Check::le("uniqueness", u.alignment.sup_distance, u.tol));
    }
    let mut c = Csv::new(&["t", "prevalence", "c1", "l2", "alignment_ratio"]);
    let tr = &e.trajectory;
    for k in 0..tr.len() {
        c.row(&[
            tr.times()[k],
            tr.prevalence()[k],
            tr.c1()[k],
            tr.l2()[k],
            e.alignment_ratio[k],
        ]);
    }
    let mut g = Csv::new(&["stage", "gap", "ratio"]);
    for (k, gap) in e.cauchy_gaps.iter().enumerate() {
        let ratio = if k == 0 {
            f64::NAN
        } else {
            gap / e.cauchy_gaps[k - 1]
        };
        g.row(&[(k + 2) as f64, *gap, ratio]);
    }
    dir.write_csv("eternal.csv", &c)?;
    dir.write_csv("gaps.csv", &g)?;
    Ok(())
}

fn si_run(cfg: &ExperimentConfig, cx: &mut Context_, dir: &mut RunDir) -> Result<()> {
    let o = &cfg.si;
    let cf = SiClosedForm::new(&cx.model).context("si_closed_form")?;
    let n = ((o.t_end - o.t_start) / o.spacing).ceil() as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|k| (o.t_start + k as f64 * o.spacing).min(o.t_end))
        .collect();
    let omega = cf
        .omega_solve(&grid)
        .context("si_closed_form::omega_solve")?;
    let mut c = Csv::new(&["t", "omega", "prevalence"]);
    for (t, w) in grid.iter().zip(&omega) {
        c.row(&[*t, *w, cf.u_bar(*w)?]);
    }
    cx.results.insert("omega0".into(), json!(cf.omega0()));
    cx.results.insert("phi1_bar".into(), json!(cf.phi_bar()));
    cx.results.insert("rate".into(), json!(cf.rate()));
    dir.write_csv("omega.csv", &c)?;
    if o.write_states {
        let traj = cf.trajectory(&grid)?;
        dir.write_csv("grid.csv", &grid_csv(&cx.model))?;
        dir.write_csv("summary.csv", &summary_csv(&traj))?;
        dir.write_csv("states.csv", &states_csv(&traj))?;
    }
    Ok(())
}

fn chi_run(cfg: &ExperimentConfig, cx: &mut Context_, dir: &mut RunDir) -> Result<()> {
    let cf = SiClosedForm::new(&cx.model).context("si_closed_form")?;
    let curve = cf
        .chi_curve(cfg.chi.samples)
        .context("si_closed_form::chi_curve")?;
    let mut c = Csv::new(&["prevalence", "si_links"]);
    for (u, x) in curve.prevalence.iter().zip(&curve.si_links) {
        c.row(&[*u, *x]);
    }
    cx.results.insert("phi1_bar".into(), json!(curve.phi1_bar));
    cx.results.insert("samples".into(), json!(curve.len()));
    let max = curve.si_links.iter().copied().fold(0.0, f64::max);
    cx.checks.push(Check::le(
        "chi_quadratic_max",
        max,
        curve.phi1_bar * curve.phi1_bar / 4.0 * (1.0 + 1e-12),
    ));
    dir.write_csv("chi.csv", &c)?;
    Ok(())
}

fn bounds_run(cfg: &ExperimentConfig, cx: &mut Context_, dir: &mut RunDir) -> Result<()> {
    let o = &cfg.bounds;
    let icfg = cfg.tolerances.integrator();
    add_lambda2(cfg, cx)?;
    let u0 = initial_field(&cx.model, &o.initial)?;
    let model = &cx.model;
    let eps0 = usic::default_epsilon0(model);
    let ((lin, env), lyap) = rayon::join(
        || {
            rayon::join(
                || verify_linearization_bounds(model, &u0, o.eps_prime, &icfg),
                || monotone_envelope(model, o.theta, o.t_end, &icfg),
            )
        },
        || -> sisgraphon::Result<_> {
            let psi = model.endemic(cfg.tolerances.endemic_tol)?.psi;
            let start = model.capped_leading_mode(eps0);
            let traj = model.integrate(&start, 0.0, o.t_end, &[], &icfg)?;
            let report = lyapunov_check(model.kernel(), &traj, &psi)?;
            Ok((traj, report))
        },
    );
    let lin = lin.context("dynamics::verify_linearization_bounds")?;
    let env = env.context("dynamics::monotone_envelope")?;
    let (traj, lyap) = lyap.context("dynamics::lyapunov_check")?;
    cx.absorb(&env.trajectory);
    cx.absorb(&traj);
    cx.constants
        .insert("epsilon0_tilde".into(), json!(lyap.epsilon0_tilde));

    let mut checks = vec![
        Check::le("linear_error", lin.linear_error, lin.linear_error_bound),
        Check {
            name: "leading_term".into(),
            passed: lin.leading_term_holds(),
            measured: lin.leading_term_error,
            bound: lin.leading_term_bound,
        },
        Check::le(
            "cooperative_domination",
            lin.cooperative_excess,
            sisgraphon::dynamics::STATE_TOL,
        ),
    ];
    if let Some(e) = lin.c1_bound_excess {
        checks.push(Check::le("c1_bound", e, sisgraphon::dynamics::STATE_TOL));
    }
    if let Some((l, r)) = lin.discrete_initial {
        checks.push(Check {
            name: "discrete_initial_bound".into(),
            passed: lin.discrete_initial_holds(),
            measured: l,
            bound: r,
        });
    }
    checks.push(Check::le(
        "monotone_envelope",
        env.max_decrease,
        sisgraphon::dynamics::STATE_TOL,
    ));
    checks.push(Check::le(
        "lyapunov_decrease",
        lyap.max_increase,
        sisgraphon::dynamics::STATE_TOL,
    ));
    checks.push(Check::ge(
        "infection_pressure",
        lyap.min_pressure,
        lyap.epsilon0_tilde,
    ));

    cx.results.insert("t_bar".into(), json!(lin.t_bar));
    cx.results
        .insert("c1_initial".into(), json!(lin.c1_initial));
    cx.results.insert("theta".into(), json!(env.theta));
    cx.results.insert("epsilon0".into(), json!(eps0));

    let mut c = Csv::new(&["check", "passed", "measured", "bound"]);
    for ch in &checks {
        c.mixed_row(
            &[&ch.name, if ch.passed { "1" } else { "0" }],
            &[ch.measured, ch.bound],
        );
    }
    cx.checks.extend(checks);
    dir.write_csv("bounds.csv", &c)?;
    Ok(())
}

/// Recomputes `(prevalence, c1, l2)` per row of a states CSV written by
/// `simulate`, using the weights and `φ₁` of its grid CSV.
pub fn summaries_from_csv(
    grid: &crate::output::Table,
    states: &crate::output::Table,
) -> Result<Vec<(f64, f64, f64)>> {
    let weights = grid.column("weight").context("grid CSV lacks 'weight'")?;
    let phi = grid.column("phi1").context("grid CSV lacks 'phi1'")?;
    Ok(states
        .rows
        .iter()
        .map(|r| summarize(&r[1..], &phi, &weights))
        .collect())
}
