//! The `jrnet` command line.
//!
//! Exit status 0 on success, 1 for usage and configuration errors, 2 for
//! failures while running. Errors are reported as a single line on stderr,
//! `error[config]: ...` or `error[runtime]: ...`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::inference::diagnostics::mode_adjacency;
use crate::inference::record::{read_generation, write_run};
use crate::inference::{
    ess, f1_score, posterior_mean, posterior_network, posterior_predictive, run_nsmc_abc,
    Generation, JrProblem, PosteriorEdge,
};
use crate::integrator::{ingest_csv_file, simulate_observed, MultiSeries};
use crate::model::{Adjacency, ModelParams, ThetaLayout};
use crate::rng::{self, OBSERVED_TAG};
use crate::summaries::{calibrate_weights, compute_summaries, SummarySet};

#[derive(Debug, Parser)]
#[command(
    name = "jrnet",
    version,
    about = "Simulate coupled Jansen-Rit populations and infer their network"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides both `simulation.seed` and `abc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `abc.workers`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides `io.out_dir`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate the configured model and write `series.csv`.
    Simulate,
    /// Summarize the observed series into `summaries/`.
    Summarize,
    /// Run nSMC-ABC on the observed series.
    Infer,
    /// Compare an estimated network with the truth and write `score.json`.
    Score,
    /// Posterior predictive envelopes of the summaries into `ppcheck/`.
    Ppcheck,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            report("config", &first_line(&e.to_string()));
            return 1;
        }
    };
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            report("config", &e.to_string());
            return 1;
        }
    };
    match dispatch(cli.command, &cfg) {
        Ok(()) => 0,
        Err(e @ Error::Config(_)) => {
            report("config", &e.to_string());
            1
        }
        Err(e) => {
            report("runtime", &e.to_string());
            2
        }
    }
}

fn first_line(s: &str) -> String {
    let line = s
        .lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
        .trim();
    line.strip_prefix("error: ").unwrap_or(line).to_string()
}

fn report(kind: &str, msg: &str) {
    let one_line: String = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{kind}]: {one_line}");
}

/// Loads the config and applies the command-line overrides.
pub fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.simulation.seed = s;
        cfg.abc.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.abc.workers = w;
    }
    if let Some(d) = &cli.out_dir {
        cfg.io.out_dir = std::path::absolute(d)?;
    }
    Ok(cfg)
}

pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<()> {
    let out = &cfg.io.out_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    match command {
        Command::Simulate => simulate(cfg),
        Command::Summarize => summarize(cfg),
        Command::Infer => infer(cfg),
        Command::Score => score(cfg),
        Command::Ppcheck => ppcheck(cfg),
    }
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn observed(cfg: &RunConfig) -> Result<MultiSeries<f64>> {
    let path = cfg
        .io
        .observed
        .as_ref()
        .ok_or_else(|| Error::Config("io.observed is required for this command".into()))?;
    if !(cfg.io.scale.is_finite() && cfg.io.scale != 0.0) {
        return Err(Error::Config("io.scale must be finite and nonzero".into()));
    }
    ingest_csv_file(path, cfg.io.scale, cfg.io.dt)
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let m = cfg.model.build()?;
    let s = cfg.simulation.build();
    let mut rng = rng::stream(cfg.simulation.seed, OBSERVED_TAG, 0);
    let series = simulate_observed(&m, &s, &mut rng)?;
    let path = cfg.io.out_dir.join("series.csv");
    series.write_csv_file(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn summarize(cfg: &RunConfig) -> Result<()> {
    let summary = cfg.summary.build()?;
    let obs = observed(cfg)?;
    let set = compute_summaries(&obs, &summary)?;
    let dir = cfg.io.out_dir.join("summaries");
    set.write_dir(&dir, &obs.labels)?;
    write_json(dir.join("weights.json"), &calibrate_weights(&set)?)?;
    println!("{}", dir.display());
    Ok(())
}

fn problem(
    cfg: &RunConfig,
) -> Result<(
    JrProblem<f64>,
    ThetaLayout,
    crate::inference::PriorSpec<f64>,
)> {
    let base = cfg.model.build()?;
    let (layout, prior) = cfg.infer.build(&base)?;
    let summary = cfg.summary.build()?;
    let obs = observed(cfg)?;
    let sim_step = cfg.abc.sim_step.unwrap_or(obs.dt);
    let p = JrProblem::new(
        base,
        layout.clone(),
        &obs,
        sim_step,
        cfg.simulation.burn_in,
        summary,
    )?;
    Ok((p, layout, prior))
}

#[derive(Serialize)]
struct Posterior {
    iteration: usize,
    ess: f64,
    mean: Vec<(String, f64)>,
    edges: Vec<PosteriorEdge>,
}

fn infer(cfg: &RunConfig) -> Result<()> {
    let settings = cfg.abc.build()?;
    let (problem, layout, prior) = problem(cfg)?;
    let rec = run_nsmc_abc(&problem, &prior, &settings)?;
    let out = &cfg.io.out_dir;
    let names = layout.continuous_names();
    write_run(out, &rec, &names, &layout.binary_names(), &cfg.to_json())?;
    if let Some(last) = rec.last() {
        let post = Posterior {
            iteration: last.iteration,
            ess: ess(&last.weights()),
            mean: names.into_iter().zip(posterior_mean(last)).collect(),
            edges: posterior_network(last, &layout.binary),
        };
        write_json(out.join("posterior.json"), &post)?;
    }
    println!(
        "status {} after {} generations and {} simulations",
        serde_json::to_value(rec.status)?.as_str().unwrap_or("?"),
        rec.generations.len(),
        rec.sims_used
    );
    Ok(())
}

/// Last generation file listed in `run.json` of `dir`.
fn last_generation_file(dir: &Path) -> Result<PathBuf> {
    let path = dir.join("run.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    let file = doc["iterations"]
        .as_array()
        .and_then(|a| a.last())
        .and_then(|it| it["file"].as_str())
        .ok_or_else(|| Error::Data(format!("{} lists no completed generation", path.display())))?;
    Ok(dir.join(file))
}

fn load_posterior(layout: &ThetaLayout, file: &Path) -> Result<Generation<f64>> {
    let (cols, gen) = read_generation::<f64>(file, layout.binary.len())?;
    let expected: Vec<String> = layout
        .continuous_names()
        .into_iter()
        .chain(layout.binary_names())
        .collect();
    if cols != expected {
        return Err(Error::Data(format!(
            "{} has columns {:?} but the configuration expects {:?}",
            file.display(),
            cols,
            expected
        )));
    }
    Ok(gen)
}

fn read_matrix(path: &Path) -> Result<Adjacency> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = rec?
            .iter()
            .map(|v| match v.trim() {
                "0" | "-" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::Data(format!(
                    "{} row {}: {other:?} is not 0 or 1",
                    path.display(),
                    i + 1
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Adjacency::from_matrix(&rows).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn is_generation_file(path: &Path) -> Result<bool> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    Ok(r.records()
        .next()
        .transpose()?
        .is_some_and(|rec| rec.get(0).map(str::trim) == Some("weight")))
}

#[derive(Serialize)]
struct Score {
    f1: f64,
    estimate: Vec<Vec<u8>>,
    truth: Vec<Vec<u8>>,
    edges: Vec<PosteriorEdge>,
}

fn score(cfg: &RunConfig) -> Result<()> {
    let base: ModelParams<f64> = cfg.model.build()?;
    let truth = match &cfg.io.truth {
        Some(p) => read_matrix(p)?,
        None => base.adjacency.clone(),
    };
    let estimate_path = match &cfg.io.estimate {
        Some(p) => p.clone(),
        None => last_generation_file(&cfg.io.out_dir)?,
    };
    let (estimate, edges) = if is_generation_file(&estimate_path)? {
        let (layout, _) = cfg.infer.build(&base)?;
        let gen = load_posterior(&layout, &estimate_path)?;
        let edges = posterior_network(&gen, &layout.binary);
        (mode_adjacency(&base.adjacency, &edges), edges)
    } else {
        (read_matrix(&estimate_path)?, Vec::new())
    };
    if estimate.n() != truth.n() {
        return Err(Error::Data(format!(
            "estimate has {} populations, truth has {}",
            estimate.n(),
            truth.n()
        )));
    }
    let f1 = f1_score(&estimate, &truth);
    write_json(
        cfg.io.out_dir.join("score.json"),
        &Score {
            f1,
            estimate: estimate.to_matrix(),
            truth: truth.to_matrix(),
            edges,
        },
    )?;
    println!("f1 {f1}");
    Ok(())
}

fn ppcheck(cfg: &RunConfig) -> Result<()> {
    let (problem, layout, _) = problem(cfg)?;
    let file = match &cfg.io.estimate {
        Some(p) => p.clone(),
        None => last_generation_file(&cfg.io.out_dir)?,
    };
    let gen = load_posterior(&layout, &file)?;
    let bands = posterior_predictive(
        &problem,
        &gen,
        cfg.abc.predictive_draws,
        cfg.abc.seed,
        cfg.abc.workers,
    )?;
    let dir = cfg.io.out_dir.join("ppcheck");
    let labels: Vec<String> = (1..=problem.base.n()).map(|k| format!("Y{k}")).collect();
    let parts: [(&str, &SummarySet<f64>); 4] = [
        ("observed", &problem.observed),
        ("lower", &bands.lower),
        ("median", &bands.median),
        ("upper", &bands.upper),
    ];
    for (name, set) in parts {
        set.write_dir(dir.join(name), &labels)?;
    }
    println!("{}", dir.display());
    Ok(())
}
