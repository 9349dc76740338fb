use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use lrcorr::simulator::{replicate_rng, run_study_detailed, Scenario, ReplicateOutcome};
use lrcorr::{simulate_trial, ScenarioConfig, StudyResult};
use serde::Deserialize;

use crate::error::{exit, CliError, Result};
use crate::input::write_long_csv;

pub const RESULT_HEADER: &str =
    "copula,theta,censoring,n_obs,n_sim,bias,rho_tilde,rho_bar,pct2_5,pct97_5,n_sim_effective,error";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON: one scenario object or a list of them.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Results CSV; rows are appended, the header is written for a new file.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for the replicates (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides the seed of every scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional tidy per-replicate CSV for plotting.
    #[arg(long)]
    pub replicates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleTrialArgs {
    /// Scenario JSON (for a list, pick one with --index).
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Which replicate of the scenario to write out.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Long-format CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Many(Vec<ScenarioConfig>),
    One(ScenarioConfig),
}

pub fn read_scenarios(path: &Path, seed: Option<u64>) -> Result<Vec<ScenarioConfig>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("{}: not a scenario or list of scenarios: {e}", path.display()))
    })?;
    let mut list = match file {
        ScenarioFile::Many(v) => v,
        ScenarioFile::One(s) => vec![s],
    };
    if list.is_empty() {
        return Err(CliError::Config(format!("{}: no scenarios", path.display())));
    }
    for (k, cfg) in list.iter_mut().enumerate() {
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Scenario::new(cfg).map_err(|e| CliError::Config(format!("scenario {k}: {e}")))?;
    }
    Ok(list)
}

pub fn result_row(cfg: &ScenarioConfig, result: &std::result::Result<StudyResult, String>) -> String {
    let head = format!(
        "{},{},{},{},{}",
        cfg.copula.name(),
        cfg.theta,
        cfg.censor_target,
        cfg.n_obs,
        cfg.n_sim
    );
    match result {
        Ok(r) => format!(
            "{head},{},{},{},{},{},{},",
            r.bias, r.rho_tilde, r.rho_bar, r.pct_2_5, r.pct_97_5, r.n_sim_effective
        ),
        Err(e) => format!("{head},,,,,,,{}", csv_field(e)),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn output_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

/// Opens the results file for appending, writing the header if it is new.
fn open_results(path: &Path) -> Result<File> {
    let existing = match File::open(path) {
        Ok(f) => {
            let mut first = String::new();
            BufReader::new(f)
                .read_line(&mut first)
                .map_err(output_err(path))?;
            Some(first)
        }
        Err(_) => None,
    };
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(output_err(path))?;
    match existing.as_deref().map(str::trim_end) {
        None | Some("") => writeln!(file, "{RESULT_HEADER}").map_err(output_err(path))?,
        Some(h) if h == RESULT_HEADER => {}
        Some(_) => {
            return Err(CliError::Config(format!(
                "{} exists with a different header",
                path.display()
            )))
        }
    }
    Ok(file)
}

fn write_replicates(path: &Path, runs: &[(usize, Vec<ReplicateOutcome>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Output {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    let to_io = |e: csv::Error| CliError::Output {
        path: path.to_path_buf(),
        source: e.into(),
    };
    w.write_record([
        "scenario",
        "replicate",
        "z_primary",
        "z_secondary",
        "rho_hat",
        "events_primary",
        "events_secondary",
    ])
    .map_err(to_io)?;
    for (k, reps) in runs {
        for o in reps {
            w.write_record([
                k.to_string(),
                o.replicate.to_string(),
                o.z_primary.to_string(),
                o.z_secondary.to_string(),
                o.rho_hat.to_string(),
                o.events_primary.to_string(),
                o.events_secondary.to_string(),
            ])
            .map_err(to_io)?;
        }
    }
    w.flush().map_err(output_err(path))
}

pub fn run(args: &SimulateArgs) -> Result<i32> {
    let scenarios = read_scenarios(&args.scenario, args.seed)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;

    let mut rows = Vec::with_capacity(scenarios.len());
    let mut replicates = Vec::new();
    for (k, cfg) in scenarios.iter().enumerate() {
        let result = pool.install(|| run_study_detailed(cfg));
        let summary = match result {
            Ok((summary, reps)) => {
                replicates.push((k, reps));
                Ok(summary)
            }
            Err(e) => Err(e.to_string()),
        };
        if let Err(e) = &summary {
            eprintln!("scenario {k}: {e}");
        }
        rows.push(result_row(cfg, &summary));
    }

    let mut file = open_results(&args.out)?;
    for row in rows {
        writeln!(file, "{row}").map_err(output_err(&args.out))?;
    }
    if let Some(path) = &args.replicates {
        write_replicates(path, &replicates)?;
    }
    Ok(exit::OK)
}

pub fn run_sample_trial(args: &SampleTrialArgs) -> Result<i32> {
    let scenarios = read_scenarios(&args.scenario, args.seed)?;
    let cfg = scenarios.get(args.index).ok_or_else(|| {
        CliError::Config(format!(
            "scenario index {} out of range ({} scenarios)",
            args.index,
            scenarios.len()
        ))
    })?;
    let data = simulate_trial(cfg, &mut replicate_rng(cfg.seed, args.replicate))?;
    let file = File::create(&args.out).map_err(output_err(&args.out))?;
    write_long_csv(&data, file).map_err(|e| CliError::Output {
        path: args.out.clone(),
        source: e.into(),
    })?;
    Ok(exit::OK)
}
