use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use lrcorr::power::MAX_EXHAUSTIVE_ENDPOINTS;
use lrcorr::{
    conjunctive_power, optimize_hierarchy, optimize_hierarchy_exhaustive, sensitivity_sweep,
    CorrelationMatrix, EndpointPlan, HierarchyResult, PowerSpec, SensitivityRow,
};
use serde::{Deserialize, Serialize};

use crate::error::{exit, CliError, Result};
use crate::estimate::{EstimateOutput, SCHEMA_VERSION};
use crate::json;

/// Largest entry-wise change PSD repair may make before the run is flagged.
pub const REPAIR_TOLERANCE: f64 = 0.05;

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Power configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Report the greedy testing order with its stepwise powers.
    #[arg(long)]
    pub optimize: bool,
    /// Also search every order (at most 8 endpoints) for the one with the
    /// largest expected number of rejections.
    #[arg(long)]
    pub exhaustive: bool,
    /// Shifts added to every off-diagonal correlation: `start:stop:step` or a
    /// comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub sensitivity: Option<String>,
    /// JSON output path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfigDoc {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub endpoints: Vec<EndpointDoc>,
    pub correlation: CorrelationSource,
    pub alpha: f64,
    pub primary: String,
    #[serde(default)]
    pub seed: u64,
}

/// Either `delta`, or `hr` together with `events`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<u64>,
}

/// Rows in the order of `endpoints`, or the path of an `estimate` output
/// (relative paths are resolved against the configuration's directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrelationSource {
    Matrix(Vec<Vec<f64>>),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointPower {
    pub name: String,
    pub delta: f64,
    pub marginal_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyDoc {
    pub order: Vec<String>,
    pub stepwise_power: Vec<f64>,
    pub expected_rejections: f64,
}

impl From<HierarchyResult> for HierarchyDoc {
    fn from(h: HierarchyResult) -> Self {
        Self {
            expected_rejections: h.expected_rejections(),
            order: h.order,
            stepwise_power: h.stepwise_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerOutput {
    pub schema_version: u32,
    pub alpha: f64,
    pub primary: String,
    pub seed: u64,
    pub endpoints: Vec<EndpointPower>,
    pub correlation: Vec<Vec<f64>>,
    pub repaired_correlation: Vec<Vec<f64>>,
    pub repair_max_change: f64,
    pub repair_exceeds_tolerance: bool,
    pub conjunctive_power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy: Option<HierarchyDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exhaustive: Option<HierarchyDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<Vec<SensitivityRow>>,
}

pub fn read_config(path: &Path) -> Result<PowerConfigDoc> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc: PowerConfigDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(v) = doc.schema_version {
        if v != SCHEMA_VERSION {
            return Err(CliError::Config(format!("unsupported schema_version {v}")));
        }
    }
    Ok(doc)
}

fn plan(doc: &EndpointDoc) -> Result<EndpointPlan> {
    let plan = match (doc.delta, doc.hr, doc.events) {
        (Some(delta), None, None) => EndpointPlan::direct(&doc.name, delta),
        (None, Some(hr), Some(events)) => EndpointPlan::from_hazard_ratio(&doc.name, hr, events),
        _ => {
            return Err(CliError::Config(format!(
                "endpoint {} needs exactly one of `delta` or `hr` with `events`",
                doc.name
            )))
        }
    };
    plan.map_err(|e| CliError::Config(format!("endpoint {}: {e}", doc.name)))
}

fn load_correlation(doc: &PowerConfigDoc, base: &Path) -> Result<CorrelationMatrix> {
    match &doc.correlation {
        CorrelationSource::Matrix(rows) => {
            let names = doc.endpoints.iter().map(|e| e.name.clone()).collect();
            CorrelationMatrix::from_rows(names, rows)
                .map_err(|e| CliError::Config(format!("correlation: {e}")))
        }
        CorrelationSource::Path(p) => {
            let path = if p.is_relative() { base.join(p) } else { p.clone() };
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::Config(format!("cannot read correlation {}: {e}", path.display()))
            })?;
            let est: EstimateOutput = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            CorrelationMatrix::from_rows(est.endpoint_names, &est.correlation)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }
}

pub fn build_spec(doc: &PowerConfigDoc, base: &Path) -> Result<PowerSpec> {
    let plans = doc.endpoints.iter().map(plan).collect::<Result<Vec<_>>>()?;
    let corr = load_correlation(doc, base)?;
    PowerSpec::new(plans, corr, doc.alpha, doc.primary.clone())
        .map_err(|e| CliError::Config(e.to_string()))
}

/// `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| CliError::Config(format!("sensitivity grid `{spec}`: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        if count > 10_000 {
            return Err(bad("too many points"));
        }
        // Snap to a fine decimal grid so 0.1-style steps print cleanly.
        (0..=count)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("no finite shifts"));
    }
    Ok(values)
}

pub fn compute(args: &PowerArgs, doc: &PowerConfigDoc, base: &Path) -> Result<PowerOutput> {
    let spec = build_spec(doc, base)?;
    let seed = args.seed.unwrap_or(doc.seed);
    let names: Vec<String> = spec.endpoints().iter().map(|e| e.name.clone()).collect();
    let endpoints = spec
        .endpoints()
        .iter()
        .zip(spec.marginal_powers())
        .map(|(e, p)| EndpointPower {
            name: e.name.clone(),
            delta: e.delta,
            marginal_power: p,
        })
        .collect();
    let greedy = if args.optimize {
        Some(optimize_hierarchy(&spec, seed)?.into())
    } else {
        None
    };
    let exhaustive = if args.exhaustive {
        if names.len() > MAX_EXHAUSTIVE_ENDPOINTS {
            return Err(CliError::Config(format!(
                "exhaustive search supports at most {MAX_EXHAUSTIVE_ENDPOINTS} endpoints"
            )));
        }
        Some(optimize_hierarchy_exhaustive(&spec, seed)?.into())
    } else {
        None
    };
    let sensitivity = match &args.sensitivity {
        Some(grid) => Some(sensitivity_sweep(&spec, &parse_grid(grid)?, seed)?),
        None => None,
    };
    let change = spec.repair_max_change();
    Ok(PowerOutput {
        schema_version: SCHEMA_VERSION,
        alpha: spec.alpha(),
        primary: spec.primary().to_string(),
        seed,
        endpoints,
        correlation: spec.corr().rows(),
        repaired_correlation: spec.repaired_corr().rows(),
        repair_max_change: change,
        repair_exceeds_tolerance: change > REPAIR_TOLERANCE,
        conjunctive_power: conjunctive_power(&spec, &names, seed)?,
        greedy,
        exhaustive,
        sensitivity,
    })
}

fn format_order(h: &HierarchyDoc) -> String {
    let mut s = String::new();
    for (k, (name, p)) in h.order.iter().zip(&h.stepwise_power).enumerate() {
        let sep = if k == 0 { "" } else { " -> " };
        let _ = write!(s, "{sep}{name} ({p:.4})");
    }
    let _ = write!(s, "; expected rejections {:.4}", h.expected_rejections);
    s
}

pub fn render_table(out: &PowerOutput) -> String {
    let width = out.endpoints.iter().map(|e| e.name.len()).max().unwrap_or(0).max(8);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>8}  {:>14}", "endpoint", "delta", "marginal power");
    for e in &out.endpoints {
        let _ = writeln!(s, "{:<width$}  {:>8.4}  {:>14.4}", e.name, e.delta, e.marginal_power);
    }
    if out.endpoints.len() > 1 {
        let _ = writeln!(s, "conjunctive power (all endpoints): {:.4}", out.conjunctive_power);
    }
    if let Some(h) = &out.greedy {
        let _ = writeln!(s, "greedy order: {}", format_order(h));
    }
    if let Some(h) = &out.exhaustive {
        let _ = writeln!(s, "best order: {}", format_order(h));
    }
    if let Some(rows) = &out.sensitivity {
        let _ = writeln!(s, "{:>8}  {:>8}  order", "shift", "power");
        for r in rows {
            let _ = writeln!(s, "{:>8.3}  {:>8.4}  {}", r.shift, r.power, r.order.join(" -> "));
        }
    }
    if out.repair_exceeds_tolerance {
        let _ = writeln!(
            s,
            "warning: PSD repair changed a correlation by {:.4} (tolerance {REPAIR_TOLERANCE})",
            out.repair_max_change
        );
    }
    s
}

pub fn run(args: &PowerArgs) -> Result<i32> {
    let doc = read_config(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let out = compute(args, &doc, base)?;
    print!("{}", render_table(&out));
    if let Some(path) = &args.output {
        json::write(path, &out)?;
    }
    if out.repair_exceeds_tolerance {
        eprintln!("correlation matrix needed PSD repair beyond tolerance");
        return Ok(exit::REPAIR_EXCEEDED);
    }
    Ok(exit::OK)
}
