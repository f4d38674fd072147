//! Experiment configuration: TOML text with dotted `--set` overrides,
//! validated in one pass so every problem is reported together.

use std::fmt;
use std::path::{Path, PathBuf};

use sisgraphon::usic::Crossing;
use sisgraphon::{IntegratorConfig, Method};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Spectrum,
    Endemic,
    UsicAlign,
    Eternal,
    SiExact,
    ChiCurve,
    VerifyBounds,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Simulate,
        Experiment::Spectrum,
        Experiment::Endemic,
        Experiment::UsicAlign,
        Experiment::Eternal,
        Experiment::SiExact,
        Experiment::ChiCurve,
        Experiment::VerifyBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Spectrum => "spectrum",
            Experiment::Endemic => "endemic",
            Experiment::UsicAlign => "usic-align",
            Experiment::Eternal => "eternal",
            Experiment::SiExact => "si-exact",
            Experiment::ChiCurve => "chi-curve",
            Experiment::VerifyBounds => "verify-bounds",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Constant {
        value: f64,
    },
    PowerLaw {
        lambda1: f64,
        exponent: f64,
        cells: usize,
        grading: Option<f64>,
    },
    /// Midpoint samples of a power law on its own graded mesh.
    GridSampled {
        lambda1: f64,
        exponent: f64,
        cells: usize,
    },
    Block {
        weights: Vec<f64>,
        values: Vec<f64>,
    },
    Annealed {
        degrees: Vec<f64>,
        probabilities: Vec<f64>,
        conditional: Option<Vec<f64>>,
    },
    File {
        path: PathBuf,
        sampled: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Uniform(f64),
    /// `min(ε φ₁, 1)`.
    Leading(f64),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub method: Method,
    pub eigen_tol: f64,
    pub endemic_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        Self {
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            max_step: c.max_step,
            method: c.method,
            eigen_tol: sisgraphon::spectrum::DEFAULT_TOL,
            endemic_tol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::default()
            .with_tolerances(self.rel_tol, self.abs_tol)
            .with_max_step(self.max_step)
            .with_method(self.method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub initial: InitialSpec,
    pub t_end: f64,
    pub sample_spacing: Option<f64>,
    pub write_states: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsicOptions {
    pub initial_levels: Vec<f64>,
    pub level: f64,
    pub crossing: Crossing,
    pub horizon: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EternalOptions {
    pub n_stages: usize,
    pub t_fwd: f64,
    pub epsilon0: Option<f64>,
    pub uniqueness_anchors: Option<(f64, f64)>,
    pub uniqueness_tol: f64,
    pub crossing: Crossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiOptions {
    pub t_start: f64,
    pub t_end: f64,
    pub spacing: f64,
    pub write_states: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiOptions {
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsOptions {
    pub initial: InitialSpec,
    pub eps_prime: f64,
    pub t_end: f64,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub kernel: KernelSpec,
    pub beta: f64,
    pub gamma: f64,
    pub output_dir: PathBuf,
    pub tolerances: Tolerances,
    pub simulate: SimulateOptions,
    pub usic: UsicOptions,
    pub eternal: EternalOptions,
    pub si: SiOptions,
    pub chi: ChiOptions,
    pub bounds: BoundsOptions,
    /// Table after overrides, echoed into the manifest.
    pub raw: Table,
}

/// Every problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Applies `key.path=value` overrides; the value is read as a TOML value
/// and falls back to a bare string.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<(), ConfigErrors> {
    let mut errors = Vec::new();
    for o in overrides {
        let Some((key, raw)) = o.split_once('=') else {
            errors.push(format!("override '{o}' is not of the form key=value"));
            continue;
        };
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => Value::String(raw.to_string()),
        };
        let parts: Vec<&str> = key.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            errors.push(format!("override key '{key}' is malformed"));
            continue;
        }
        if let Err(p) = set_path(table, &parts, value) {
            errors.push(format!("override '{key}': '{p}' is not a table"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ConfigErrors(errors))
    }
}

fn set_path(table: &mut Table, parts: &[&str], value: Value) -> Result<(), String> {
    match parts {
        [last] => {
            table.insert(last.to_string(), value);
            Ok(())
        }
        [head, rest @ ..] => match table
            .entry(head.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
        {
            Value::Table(t) => set_path(t, rest, value),
            _ => Err(head.to_string()),
        },
        [] => Ok(()),
    }
}

/// Parses and validates configuration text. Relative file paths resolve
/// against `base_dir`.
pub fn parse_config(
    text: &str,
    overrides: &[String],
    base_dir: &Path,
) -> Result<ExperimentConfig, ConfigErrors> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![format!("malformed TOML: {}", e.message())])
    })?;
    apply_overrides(&mut table, overrides)?;
    let mut r = Reader { errors: Vec::new() };
    let cfg = r.config(&table, base_dir);
    if r.errors.is_empty() {
        Ok(cfg.expect("no errors implies a config"))
    } else {
        Err(ConfigErrors(r.errors))
    }
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, overrides, base)
}

struct Reader {
    errors: Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Reader {
    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn check_keys(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(format!("unknown key '{}'", join(path, k)));
            }
        }
    }

    fn section<'a>(&mut self, t: &'a Table, key: &str) -> Option<&'a Table> {
        match t.get(key) {
            None => None,
            Some(Value::Table(s)) => Some(s),
            Some(v) => {
                self.err(format!("'{key}' must be a table, got {}", v.type_str()));
                None
            }
        }
    }

    fn opt_f64(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            v => {
                self.err(format!(
                    "'{}' must be a number, got {}",
                    join(path, key),
                    v.type_str()
                ));
                None
            }
        }
    }

    fn f64_or(&mut self, t: &Table, path: &str, key: &str, default: f64) -> f64 {
        self.opt_f64(t, path, key).unwrap_or(default)
    }

    fn req_f64(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.err(format!("missing required key '{}'", join(path, key)));
            return None;
        }
        self.opt_f64(t, path, key)
    }

    fn opt_usize(&mut self, t: &Table, path: &str, key: &str) -> Option<usize> {
        match t.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            v => {
                self.err(format!(
                    "'{}' must be a non-negative integer, got {}",
                    join(path, key),
                    v
                ));
                None
            }
        }
    }

    fn req_usize(&mut self, t: &Table, path: &str, key: &str) -> Option<usize> {
        if !t.contains_key(key) {
            self.err(format!("missing required key '{}'", join(path, key)));
            return None;
        }
        self.opt_usize(t, path, key)
    }

    fn opt_bool(&mut self, t: &Table, path: &str, key: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            v => {
                self.err(format!(
                    "'{}' must be a boolean, got {}",
                    join(path, key),
                    v.type_str()
                ));
                None
            }
        }
    }

    fn opt_str<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a str> {
        match t.get(key)? {
            Value::String(s) => Some(s),
            v => {
                self.err(format!(
                    "'{}' must be a string, got {}",
                    join(path, key),
                    v.type_str()
                ));
                None
            }
        }
    }

    fn f64_list(&mut self, t: &Table, path: &str, key: &str, required: bool) -> Option<Vec<f64>> {
        let full = join(path, key);
        let v = match t.get(key) {
            None => {
                if required {
                    self.err(format!("missing required key '{full}'"));
                }
                return None;
            }
            Some(v) => v,
        };
        let Value::Array(a) = v else {
            self.err(format!(
                "'{full}' must be an array of numbers, got {}",
                v.type_str()
            ));
            return None;
        };
        let mut out = Vec::with_capacity(a.len());
        for (i, x) in a.iter().enumerate() {
            match x {
                Value::Float(f) => out.push(*f),
                Value::Integer(n) => out.push(*n as f64),
                // nested rows are flattened row-major
                Value::Array(row) => {
                    for y in row {
                        match y {
                            Value::Float(f) => out.push(*f),
                            Value::Integer(n) => out.push(*n as f64),
                            other => {
                                self.err(format!(
                                    "'{full}[{i}]' contains non-number {}",
                                    other.type_str()
                                ));
                                return None;
                            }
                        }
                    }
                }
                other => {
                    self.err(format!(
                        "'{full}[{i}]' must be a number, got {}",
                        other.type_str()
                    ));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn positive(&mut self, path: &str, key: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if x > 0.0 && x.is_finite() => Some(x),
            Some(x) => {
                self.err(format!(
                    "'{}' must be positive and finite, got {x}",
                    join(path, key)
                ));
                None
            }
            None => None,
        }
    }

    fn crossing(&mut self, t: &Table, path: &str, default: Crossing) -> Crossing {
        match self.opt_str(t, path, "crossing") {
            None => default,
            Some(s) => s.parse().unwrap_or_else(|_| {
                self.err(format!(
                    "'{}' must be \"c1\" or \"prevalence\", got \"{s}\"",
                    join(path, "crossing")
                ));
                default
            }),
        }
    }

    fn config(&mut self, t: &Table, base_dir: &Path) -> Option<ExperimentConfig> {
        self.check_keys(
            t,
            "",
            &[
                "experiment",
                "output_dir",
                "kernel",
                "params",
                "tolerances",
                "simulate",
                "usic_align",
                "eternal",
                "si_exact",
                "chi_curve",
                "verify_bounds",
            ],
        );
        let experiment = self.opt_str(t, "", "experiment").and_then(|s| {
            let e = Experiment::parse(s);
            if e.is_none() {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                self.err(format!(
                    "unknown experiment '{s}' (expected one of {})",
                    names.join(", ")
                ));
            }
            e
        });
        let output_dir = PathBuf::from(self.opt_str(t, "", "output_dir").unwrap_or("out"));

        let kernel = match self.section(t, "kernel") {
            Some(k) => self.kernel(k, base_dir),
            None => {
                if !t.contains_key("kernel") {
                    self.err("missing required table 'kernel'".into());
                }
                None
            }
        };
        let (beta, gamma) = match self.section(t, "params") {
            Some(p) => self.params(p),
            None => {
                if !t.contains_key("params") {
                    self.err("missing required table 'params'".into());
                }
                (None, None)
            }
        };
        let empty = Table::new();
        let tol = self.section(t, "tolerances").unwrap_or(&empty);
        let tolerances = self.tolerances(tol);
        let simulate = {
            let s = self.section(t, "simulate").unwrap_or(&empty);
            self.simulate(s)
        };
        let usic = {
            let s = self.section(t, "usic_align").unwrap_or(&empty);
            self.usic(s)
        };
        let eternal = {
            let s = self.section(t, "eternal").unwrap_or(&empty);
            self.eternal(s)
        };
        let si = {
            let s = self.section(t, "si_exact").unwrap_or(&empty);
            self.si(s)
        };
        let chi = {
            let s = self.section(t, "chi_curve").unwrap_or(&empty);
            self.check_keys(s, "chi_curve", &["samples"]);
            let samples = self.opt_usize(s, "chi_curve", "samples").unwrap_or(100);
            if samples < 2 {
                self.err(format!(
                    "'chi_curve.samples' must be at least 2, got {samples}"
                ));
            }
            ChiOptions { samples }
        };
        let bounds = {
            let s = self.section(t, "verify_bounds").unwrap_or(&empty);
            self.bounds(s)
        };
        Some(ExperimentConfig {
            experiment,
            kernel: kernel?,
            beta: beta?,
            gamma: gamma?,
            output_dir,
            tolerances,
            simulate,
            usic,
            eternal,
            si,
            chi,
            bounds,
            raw: t.clone(),
        })
    }

    fn params(&mut self, p: &Table) -> (Option<f64>, Option<f64>) {
        self.check_keys(p, "params", &["beta", "gamma"]);
        let beta = self.req_f64(p, "params", "beta");
        let beta = self.positive("params", "beta", beta);
        let gamma = self.opt_f64(p, "params", "gamma").unwrap_or(0.0);
        let gamma = if gamma >= 0.0 && gamma.is_finite() {
            Some(gamma)
        } else {
            self.err(format!("'params.gamma' must be non-negative, got {gamma}"));
            None
        };
        (beta, gamma)
    }

    fn exponent(&mut self, k: &Table) -> Option<f64> {
        let p = self.req_f64(k, "kernel", "exponent")?;
        if !(0.0..0.5).contains(&p) {
            self.err(format!(
                "'kernel.exponent' must satisfy 0 <= p < 1/2, got {p}"
            ));
            return None;
        }
        Some(p)
    }

    fn kernel(&mut self, k: &Table, base_dir: &Path) -> Option<KernelSpec> {
        let Some(kind) = self.opt_str(k, "kernel", "type") else {
            if !k.contains_key("type") {
                self.err("missing required key 'kernel.type'".into());
            }
            return None;
        };
        match kind {
            "constant" => {
                self.check_keys(k, "kernel", &["type", "value"]);
                let v = self.opt_f64(k, "kernel", "value").or(Some(1.0));
                let value = self.positive("kernel", "value", v)?;
                Some(KernelSpec::Constant { value })
            }
            "power_law" | "grid_sampled" => {
                let mut allowed = vec!["type", "lambda1", "exponent", "cells"];
                if kind == "power_law" {
                    allowed.push("grading");
                }
                self.check_keys(k, "kernel", &allowed);
                let l = self.opt_f64(k, "kernel", "lambda1").or(Some(1.0));
                let lambda1 = self.positive("kernel", "lambda1", l);
                let exponent = self.exponent(k);
                let cells = self.req_usize(k, "kernel", "cells").and_then(|c| {
                    if c == 0 {
                        self.err("'kernel.cells' must be at least 1".into());
                        None
                    } else {
                        Some(c)
                    }
                });
                let grading = self.opt_f64(k, "kernel", "grading");
                let grading = if grading.is_some() {
                    Some(self.positive("kernel", "grading", grading)?)
                } else {
                    None
                };
                let (lambda1, exponent, cells) = (lambda1?, exponent?, cells?);
                Some(if kind == "power_law" {
                    KernelSpec::PowerLaw {
                        lambda1,
                        exponent,
                        cells,
                        grading,
                    }
                } else {
                    KernelSpec::GridSampled {
                        lambda1,
                        exponent,
                        cells,
                    }
                })
            }
            "block" => {
                self.check_keys(k, "kernel", &["type", "weights", "values"]);
                let weights = self.f64_list(k, "kernel", "weights", true);
                let values = self.f64_list(k, "kernel", "values", true);
                let (weights, values) = (weights?, values?);
                if values.len() != weights.len() * weights.len() {
                    self.err(format!(
                        "'kernel.values' must hold {}x{} entries, got {}",
                        weights.len(),
                        weights.len(),
                        values.len()
                    ));
                    return None;
                }
                Some(KernelSpec::Block { weights, values })
            }
            "annealed" => {
                self.check_keys(
                    k,
                    "kernel",
                    &["type", "degrees", "probabilities", "conditional"],
                );
                let degrees = self.f64_list(k, "kernel", "degrees", true);
                let probabilities = self.f64_list(k, "kernel", "probabilities", true);
                let conditional = self.f64_list(k, "kernel", "conditional", false);
                let (degrees, probabilities) = (degrees?, probabilities?);
                if degrees.len() != probabilities.len() {
                    self.err(format!(
                        "'kernel.degrees' ({}) and 'kernel.probabilities' ({}) differ in length",
                        degrees.len(),
                        probabilities.len()
                    ));
                    return None;
                }
                Some(KernelSpec::Annealed {
                    degrees,
                    probabilities,
                    conditional,
                })
            }
            "file" => {
                self.check_keys(k, "kernel", &["type", "path", "sampled"]);
                let path = self.opt_str(k, "kernel", "path");
                let sampled = self.opt_bool(k, "kernel", "sampled").unwrap_or(false);
                let Some(path) = path else {
                    if !k.contains_key("path") {
                        self.err("missing required key 'kernel.path'".into());
                    }
                    return None;
                };
                let full = base_dir.join(path);
                if !full.is_file() {
                    self.err(format!("kernel file '{}' does not exist", full.display()));
                    return None;
                }
                Some(KernelSpec::File {
                    path: full,
                    sampled,
                })
            }
            other => {
                self.err(format!(
                    "unknown kernel type '{other}' (expected constant, power_law, grid_sampled, block, annealed or file)"
                ));
                None
            }
        }
    }

    fn tolerances(&mut self, t: &Table) -> Tolerances {
        let path = "tolerances";
        self.check_keys(
            t,
            path,
            &[
                "rel_tol",
                "abs_tol",
                "max_step",
                "method",
                "eigen_tol",
                "endemic_tol",
            ],
        );
        let d = Tolerances::default();
        let pos = |r: &mut Self, key: &str, default: f64| {
            let v = r.opt_f64(t, path, key);
            r.positive(path, key, v).unwrap_or(default)
        };
        let rel_tol = pos(self, "rel_tol", d.rel_tol);
        let abs_tol = pos(self, "abs_tol", d.abs_tol);
        let max_step = pos(self, "max_step", d.max_step);
        let eigen_tol = pos(self, "eigen_tol", d.eigen_tol);
        let endemic_tol = pos(self, "endemic_tol", d.endemic_tol);
        let method = match self.opt_str(t, path, "method") {
            None => d.method,
            Some(s) => s.parse().unwrap_or_else(|_| {
                self.err(format!(
                    "'tolerances.method' must be \"dopri5\", \"extrapolation\" or \"auto\", got \"{s}\""
                ));
                d.method
            }),
        };
        Tolerances {
            rel_tol,
            abs_tol,
            max_step,
            method,
            eigen_tol,
            endemic_tol,
        }
    }

    fn initial(&mut self, t: &Table, path: &str, default: InitialSpec) -> InitialSpec {
        let full = join(path, "initial");
        let v = match t.get("initial") {
            None => return default,
            Some(v) => v,
        };
        let Value::Table(i) = v else {
            self.err(format!("'{full}' must be a table, got {}", v.type_str()));
            return default;
        };
        match self.opt_str(i, &full, "type") {
            Some("uniform") => {
                self.check_keys(i, &full, &["type", "value"]);
                let v = self.req_f64(i, &full, "value");
                match v {
                    Some(x) if (0.0..=1.0).contains(&x) => InitialSpec::Uniform(x),
                    Some(x) => {
                        self.err(format!("'{full}.value' must lie in [0, 1], got {x}"));
                        default
                    }
                    None => default,
                }
            }
            Some("leading") => {
                self.check_keys(i, &full, &["type", "epsilon"]);
                let v = self.req_f64(i, &full, "epsilon");
                self.positive(&full, "epsilon", v)
                    .map_or(default, InitialSpec::Leading)
            }
            Some("values") => {
                self.check_keys(i, &full, &["type", "values"]);
                match self.f64_list(i, &full, "values", true) {
                    Some(v) if v.iter().all(|x| (0.0..=1.0).contains(x)) => InitialSpec::Values(v),
                    Some(_) => {
                        self.err(format!("'{full}.values' must lie in [0, 1]"));
                        default
                    }
                    None => default,
                }
            }
            Some(other) => {
                self.err(format!(
                    "unknown '{full}.type' \"{other}\" (expected uniform, leading or values)"
                ));
                default
            }
            None => {
                if !i.contains_key("type") {
                    self.err(format!("missing required key '{full}.type'"));
                }
                default
            }
        }
    }

    fn simulate(&mut self, s: &Table) -> SimulateOptions {
        let path = "simulate";
        self.check_keys(
            s,
            path,
            &["initial", "t_end", "sample_spacing", "write_states"],
        );
        let initial = self.initial(s, path, InitialSpec::Uniform(1e-3));
        let t = self.opt_f64(s, path, "t_end").or(Some(20.0));
        let t_end = self.positive(path, "t_end", t).unwrap_or(20.0);
        let sp = self.opt_f64(s, path, "sample_spacing");
        let sample_spacing = if sp.is_some() {
            self.positive(path, "sample_spacing", sp)
        } else {
            None
        };
        let write_states = self.opt_bool(s, path, "write_states").unwrap_or(true);
        SimulateOptions {
            initial,
            t_end,
            sample_spacing,
            write_states,
        }
    }

    fn usic(&mut self, s: &Table) -> UsicOptions {
        let path = "usic_align";
        self.check_keys(
            s,
            path,
            &["initial_levels", "level", "crossing", "horizon", "t_end"],
        );
        let initial_levels = self
            .f64_list(s, path, "initial_levels", false)
            .unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5]);
        if initial_levels.is_empty() || initial_levels.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
            self.err(
                "'usic_align.initial_levels' must be a non-empty list of values in (0, 1]".into(),
            );
        }
        let l = self.opt_f64(s, path, "level").or(Some(1e-2));
        let level = self.positive(path, "level", l).unwrap_or(1e-2);
        let crossing = self.crossing(s, path, Crossing::C1);
        let h = self.opt_f64(s, path, "horizon").or(Some(15.0));
        let horizon = self.positive(path, "horizon", h).unwrap_or(15.0);
        let t = self.opt_f64(s, path, "t_end").or(Some(30.0));
        let t_end = self.positive(path, "t_end", t).unwrap_or(30.0);
        UsicOptions {
            initial_levels,
            level,
            crossing,
            horizon,
            t_end,
        }
    }

    fn eternal(&mut self, s: &Table) -> EternalOptions {
        let path = "eternal";
        self.check_keys(
            s,
            path,
            &[
                "n_stages",
                "t_fwd",
                "epsilon0",
                "uniqueness_anchors",
                "uniqueness_tol",
                "crossing",
            ],
        );
        let n_stages = self.opt_usize(s, path, "n_stages").unwrap_or(8);
        if n_stages == 0 {
            self.err("'eternal.n_stages' must be at least 1".into());
        }
        let t = self.opt_f64(s, path, "t_fwd").or(Some(20.0));
        let t_fwd = self.positive(path, "t_fwd", t).unwrap_or(20.0);
        let e = self.opt_f64(s, path, "epsilon0");
        let epsilon0 = if e.is_some() {
            self.positive(path, "epsilon0", e)
        } else {
            None
        };
        let uniqueness_anchors = match self.f64_list(s, path, "uniqueness_anchors", false) {
            None => None,
            Some(v) if v.len() == 2 && v.iter().all(|x| *x > 0.0) => Some((v[0], v[1])),
            Some(_) => {
                self.err("'eternal.uniqueness_anchors' must hold two positive numbers".into());
                None
            }
        };
        let u = self.opt_f64(s, path, "uniqueness_tol").or(Some(5e-3));
        let uniqueness_tol = self.positive(path, "uniqueness_tol", u).unwrap_or(5e-3);
        let crossing = self.crossing(s, path, Crossing::Prevalence);
        EternalOptions {
            n_stages,
            t_fwd,
            epsilon0,
            uniqueness_anchors,
            uniqueness_tol,
            crossing,
        }
    }

    fn si(&mut self, s: &Table) -> SiOptions {
        let path = "si_exact";
        self.check_keys(s, path, &["t_start", "t_end", "spacing", "write_states"]);
        let t_start = self.f64_or(s, path, "t_start", -10.0);
        let t_end = self.f64_or(s, path, "t_end", 20.0);
        if !(t_end > t_start) {
            self.err(format!(
                "'si_exact.t_end' ({t_end}) must exceed 'si_exact.t_start' ({t_start})"
            ));
        }
        let sp = self.opt_f64(s, path, "spacing").or(Some(0.02));
        let spacing = self.positive(path, "spacing", sp).unwrap_or(0.02);
        let write_states = self.opt_bool(s, path, "write_states").unwrap_or(false);
        SiOptions {
            t_start,
            t_end,
            spacing,
            write_states,
        }
    }

    fn bounds(&mut self, s: &Table) -> BoundsOptions {
        let path = "verify_bounds";
        self.check_keys(s, path, &["initial", "eps_prime", "t_end", "theta"]);
        let initial = self.initial(s, path, InitialSpec::Uniform(1e-4));
        let e = self.opt_f64(s, path, "eps_prime").or(Some(1e-2));
        let eps_prime = self.positive(path, "eps_prime", e).unwrap_or(1e-2);
        let t = self.opt_f64(s, path, "t_end").or(Some(40.0));
        let t_end = self.positive(path, "t_end", t).unwrap_or(40.0);
        let th = self.opt_f64(s, path, "theta");
        let theta = if th.is_some() {
            self.positive(path, "theta", th)
        } else {
            None
        };
        BoundsOptions {
            initial,
            eps_prime,
            t_end,
            theta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
        parse_config(text, &[], Path::new("."))
    }

    #[test]
    fn minimal_simulate_config() {
        let c =
            parse("experiment = \"simulate\"\n[kernel]\ntype = \"constant\"\n[params]\nbeta = 1\n")
                .unwrap();
        assert_eq!(c.experiment, Some(Experiment::Simulate));
        assert_eq!(c.kernel, KernelSpec::Constant { value: 1.0 });
        assert_eq!(c.gamma, 0.0);
        assert_eq!(c.simulate.initial, InitialSpec::Uniform(1e-3));
        assert_eq!(c.simulate.t_end, 20.0);
    }

    #[test]
    fn rejects_exponent_above_half() {
        let e = parse(
            "[kernel]\ntype = \"power_law\"\nexponent = 0.6\ncells = 10\n[params]\nbeta = 1\n",
        )
        .unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("p < 1/2")), "{e}");
    }

    #[test]
    fn reports_all_errors() {
        let e = parse(
            "bogus = 1\n[kernel]\ntype = \"power_law\"\nexponent = 0.7\n[params]\nbeta = -1\n[simulate]\nt_end = \"x\"\n",
        )
        .unwrap_err();
        assert!(e.0.len() >= 4, "{e}");
        assert!(e.0.iter().any(|m| m.contains("unknown key 'bogus'")));
        assert!(e.0.iter().any(|m| m.contains("kernel.cells")));
        assert!(e.0.iter().any(|m| m.contains("params.beta")));
        assert!(e.0.iter().any(|m| m.contains("simulate.t_end")));
    }

    #[test]
    fn missing_kernel() {
        let e = parse("[params]\nbeta = 1\n").unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("'kernel'")));
    }

    #[test]
    fn figure_one_sweep() {
        let c = parse(
            "experiment = \"usic-align\"\n[kernel]\ntype = \"power_law\"\nlambda1 = 1\nexponent = 0.4\ncells = 2000\n\
             [params]\nbeta = 1.0\ngamma = 0.0\n[usic_align]\ninitial_levels = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Some(Experiment::UsicAlign));
        assert_eq!(c.usic.initial_levels.len(), 5);
    }

    #[test]
    fn overrides_apply_before_validation() {
        let base = "[kernel]\ntype = \"constant\"\n[params]\nbeta = 1\n";
        let c = parse_config(
            base,
            &[
                "params.gamma=0.25".into(),
                "simulate.initial.type=\"leading\"".into(),
                "simulate.initial.epsilon=0.1".into(),
            ],
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.gamma, 0.25);
        assert_eq!(c.simulate.initial, InitialSpec::Leading(0.1));
        assert!(parse_config(base, &["params.beta".into()], Path::new(".")).is_err());
        let e = parse_config(base, &["params.beta=abc".into()], Path::new(".")).unwrap_err();
        assert!(e.0[0].contains("params.beta"));
    }

    #[test]
    fn missing_kernel_file() {
        let e = parse("[kernel]\ntype = \"file\"\npath = \"nope.txt\"\n[params]\nbeta = 1\n")
            .unwrap_err();
        assert!(e.0[0].contains("does not exist"));
    }
}
