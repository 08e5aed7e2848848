//! On-disk layout of a run: one CSV per generation, `run.json` with the
//! per-iteration trace, and `timings.csv` with wall-clock seconds.
//!
//! `run.json` and the generation files contain no timing information, so two
//! runs with the same configuration and seed produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::{ess, Generation, RunRecord, RunStatus};
use crate::error::Result;
use crate::real::Real;

/// File name of generation `r`.
pub fn generation_file(r: usize) -> String {
    format!("generation_{r:03}.csv")
}

/// JSON number, or the strings `"inf"`, `"-inf"` and `"nan"`.
pub fn json_number<T: Real>(v: T) -> Value {
    let x = v.to_f64().unwrap_or(f64::NAN);
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

/// Writes `weight, distance`, the continuous slots and the binary slots
/// (as 0/1) of every particle.
pub fn write_generation<T: Real, W: Write>(
    w: W,
    gen: &Generation<T>,
    continuous: &[String],
    binary: &[String],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["weight".to_string(), "distance".to_string()];
    header.extend(continuous.iter().cloned());
    header.extend(binary.iter().cloned());
    out.write_record(&header)?;
    for p in &gen.particles {
        let mut row = vec![p.weight.to_string(), p.distance.to_string()];
        row.extend(p.theta_c.iter().map(|v| v.to_string()));
        row.extend(
            p.theta_b
                .iter()
                .map(|&b| if b { "1" } else { "0" }.to_string()),
        );
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct IterationEntry {
    iteration: usize,
    threshold: Value,
    ess: Value,
    acceptance_rate: f64,
    proposals: usize,
    sims_used: u64,
    file: String,
}

#[derive(Serialize)]
struct RunDocument<'a> {
    config: &'a Value,
    status: RunStatus,
    delta1: Option<Value>,
    sims_used: u64,
    partial_accepted: usize,
    continuous: &'a [String],
    binary: &'a [String],
    iterations: Vec<IterationEntry>,
    warnings: &'a [String],
    pilot_distances: Vec<Value>,
}

/// Writes the whole record into `dir`. `config` is echoed verbatim into
/// `run.json`.
pub fn write_run<T: Real>(
    dir: impl AsRef<Path>,
    rec: &RunRecord<T>,
    continuous: &[String],
    binary: &[String],
    config: &Value,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for g in &rec.generations {
        let f = File::create(dir.join(generation_file(g.iteration)))?;
        write_generation(BufWriter::new(f), g, continuous, binary)?;
    }
    let doc = RunDocument {
        config,
        status: rec.status,
        delta1: rec.delta1.map(json_number),
        sims_used: rec.sims_used,
        partial_accepted: rec.partial_accepted,
        continuous,
        binary,
        iterations: rec
            .generations
            .iter()
            .map(|g| IterationEntry {
                iteration: g.iteration,
                threshold: json_number(g.threshold),
                ess: json_number(ess(&g.weights())),
                acceptance_rate: g.acceptance_rate,
                proposals: g.proposals,
                sims_used: g.sims_used,
                file: generation_file(g.iteration),
            })
            .collect(),
        warnings: &rec.warnings,
        pilot_distances: rec
            .pilot_distances
            .iter()
            .map(|&d| json_number(d))
            .collect(),
    };
    let mut f = BufWriter::new(File::create(dir.join("run.json"))?);
    serde_json::to_writer_pretty(&mut f, &doc)?;
    writeln!(f)?;
    f.flush()?;

    let mut t = csv::Writer::from_path(dir.join("timings.csv"))?;
    t.write_record(["iteration", "seconds"])?;
    for (g, s) in rec.generations.iter().zip(&rec.timings) {
        t.write_record([g.iteration.to_string(), s.to_string()])?;
    }
    t.flush()?;
    Ok(())
}

/// Reads a generation file written by [`write_generation`], treating the last
/// `n_binary` columns as binary slots. Returns the slot column names and the
/// particles; iteration bookkeeping is not stored in the file.
pub fn read_generation<T: Real>(
    path: impl AsRef<Path>,
    n_binary: usize,
) -> Result<(Vec<String>, Generation<T>)> {
    use crate::error::Error;
    use crate::inference::Particle;
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 + n_binary || header[0] != "weight" || header[1] != "distance" {
        return Err(Error::Data(format!(
            "{} is not a generation file",
            path.as_ref().display()
        )));
    }
    let n_cont = header.len() - 2 - n_binary;
    let parse = |s: &str, row: usize| -> Result<T> {
        s.trim()
            .parse::<T>()
            .map_err(|_| Error::Data(format!("row {row}: cannot parse {s:?}")))
    };
    let mut particles = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let weight = parse(&rec[0], row)?;
        let distance = parse(&rec[1], row)?;
        let theta_c = (0..n_cont)
            .map(|c| parse(&rec[2 + c], row))
            .collect::<Result<Vec<_>>>()?;
        let theta_b = (0..n_binary)
            .map(|c| match rec[2 + n_cont + c].trim() {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(Error::Data(format!(
                    "row {row}: binary entry {other:?} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        particles.push(Particle {
            theta_c,
            theta_b,
            weight,
            distance,
        });
    }
    if particles.is_empty() {
        return Err(Error::Data(format!(
            "{} has no particles",
            path.as_ref().display()
        )));
    }
    let gen = Generation {
        iteration: 0,
        threshold: T::infinity(),
        particles,
        sims_used: 0,
        acceptance_rate: f64::NAN,
        proposals: 0,
    };
    Ok((header[2..].to_vec(), gen))
}
