//! Plain-text block kernels and construction of kernels from a config.
//!
//! ```text
//! # comment
//! cells 3
//! weights 0.2 0.3 0.5
//! 1.0 0.5 0.2
//! 0.5 2.0 0.1
//! 0.2 0.1 1.5
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use sisgraphon::kernel::PowerLawKernel;
use sisgraphon::{build_annealed, Correlation, Kernel, Partition};

use crate::config::KernelSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockData {
    pub weights: Vec<f64>,
    /// Row-major `W_ij`.
    pub values: Vec<f64>,
}

pub fn parse_kernel_text(text: &str) -> Result<BlockData> {
    let mut cells = None;
    let mut weights = None;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ctx = || format!("line {}", lineno + 1);
        let mut words = line.split_whitespace();
        match words.clone().next() {
            Some("cells") => {
                words.next();
                let n: usize = words
                    .next()
                    .context("missing cell count")
                    .and_then(|w| w.parse().context("bad cell count"))
                    .with_context(ctx)?;
                cells = Some(n);
            }
            Some("weights") => {
                words.next();
                let w = words
                    .map(|w| w.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .context("bad weight")
                    .with_context(ctx)?;
                weights = Some(w);
            }
            _ => {
                let row = words
                    .map(|w| w.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .context("bad kernel value")
                    .with_context(ctx)?;
                values.extend(row);
            }
        }
    }
    let n = cells.context("missing 'cells' line")?;
    let weights = weights.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    if weights.len() != n {
        bail!("expected {n} weights, found {}", weights.len());
    }
    if values.len() != n * n {
        bail!("expected {} kernel values, found {}", n * n, values.len());
    }
    Ok(BlockData { weights, values })
}

pub fn format_kernel_text(data: &BlockData) -> String {
    let n = data.weights.len();
    let mut s = format!("cells {n}\nweights");
    for w in &data.weights {
        write!(s, " {w:.16e}").unwrap();
    }
    s.push('\n');
    for i in 0..n {
        let row: Vec<String> = data.values[i * n..(i + 1) * n]
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn read_kernel_file(path: &Path) -> Result<BlockData> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading kernel file {}", path.display()))?;
    parse_kernel_text(&text).with_context(|| format!("parsing kernel file {}", path.display()))
}

pub fn build_kernel(spec: &KernelSpec) -> Result<Kernel> {
    let k = match spec {
        KernelSpec::Constant { value } => Kernel::constant(*value)?,
        KernelSpec::PowerLaw {
            lambda1,
            exponent,
            cells,
            grading,
        } => match grading {
            Some(kappa) => Kernel::PowerLaw(PowerLawKernel::with_grading(
                *lambda1, *exponent, *cells, *kappa,
            )?),
            None => Kernel::power_law(*lambda1, *exponent, *cells)?,
        },
        KernelSpec::GridSampled {
            lambda1,
            exponent,
            cells,
        } => PowerLawKernel::new(*lambda1, *exponent, *cells)?.grid_sampled(*cells)?,
        KernelSpec::Block { weights, values } => {
            Kernel::discrete_block(Arc::new(Partition::from_weights(weights)?), values.clone())?
        }
        KernelSpec::Annealed {
            degrees,
            probabilities,
            conditional,
        } => {
            let corr = match conditional {
                Some(c) => Correlation::Conditional(c.clone()),
                None => Correlation::Uncorrelated,
            };
            build_annealed(degrees, probabilities, corr)?
        }
        KernelSpec::File { path, sampled } => {
            let d = read_kernel_file(path)?;
            let p = Arc::new(Partition::from_weights(&d.weights)?);
            if *sampled {
                Kernel::grid_sampled(p, d.values)?
            } else {
                Kernel::discrete_block(p, d.values)?
            }
        }
    };
    Ok(k)
}
