use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tn_capacity::bounds::{bound_report, BoundError, FamilyParams};
use tn_capacity::learn::{run_sweep, write_outputs, LearnError, SweepConfig};
use tn_capacity::shattering::{
    estimate_shattered_count, verify_certificate_with, Construction, ShatterError, VerifyMode,
    VerifyOptions,
};
use tn_capacity::structure::{build_family, Family, RankSpec, TensorNetworkStructure};
use tn_capacity::tensor::next_index;

/// Capacity bounds, shattering certificates and TT experiments for tensor
/// networks.
#[derive(Parser)]
#[command(name = "tn-capacity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the bound report for a structure.
    Bounds {
        #[command(flatten)]
        source: StructureSource,
        /// Sample sizes for the growth and generalization bounds.
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1000, 10000])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Build a lower-bound certificate and verify it.
    Verify {
        #[arg(long)]
        construction: Construction,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        d: usize,
        /// Rank; ignored by rank_one and the block constructions.
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, value_parser = parse_mode, default_value = "exhaustive")]
        mode: VerifyMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the certificate JSON here.
        #[arg(long)]
        certificate_out: Option<PathBuf>,
    },
    /// Run an experiment sweep and write CSV and JSON outputs.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count distinct sign patterns of random cores on an index set.
    Probe {
        #[command(flatten)]
        source: StructureSource,
        /// JSON list of multi-indices; every entry of the output when omitted.
        #[arg(long)]
        indices: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the JSON of a standard structure.
    Build {
        #[command(flatten)]
        source: StructureSource,
    },
}

#[derive(Args)]
struct StructureSource {
    /// Structure JSON file.
    #[arg(long, conflicts_with = "family")]
    structure: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    /// Order (number of modes).
    #[arg(long)]
    p: Option<usize>,
    /// Mode dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Rank (bond dimension).
    #[arg(long)]
    r: Option<usize>,
    /// Grid height for peps_grid.
    #[arg(long)]
    height: Option<usize>,
}

fn parse_mode(s: &str) -> Result<VerifyMode, String> {
    match s {
        "passthrough" => Ok(VerifyMode::Passthrough),
        "exhaustive" => Ok(VerifyMode::Exhaustive),
        _ => Err(format!("unknown mode {s:?}, expected passthrough or exhaustive")),
    }
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    detail: Value,
}

impl Failure {
    fn new(code: u8, kind: &'static str, message: impl Into<String>) -> Self {
        Self { code, kind, message: message.into(), detail: Value::Null }
    }

    fn with(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }
}

const EXIT_OTHER: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_CONDITION: u8 = 3;
const EXIT_VERIFICATION: u8 = 4;
const EXIT_DIVERGED: u8 = 5;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_OTHER, "io", format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        Failure::new(EXIT_INVALID, "schema", e.inner().to_string())
            .with(json!({ "file": path.display().to_string(), "path": e.path().to_string() }))
    })
}

impl StructureSource {
    fn load(&self) -> Result<(TensorNetworkStructure, Option<FamilyParams>), Failure> {
        if let Some(path) = &self.structure {
            return Ok((read_json(path)?, None));
        }
        let family = self.family.ok_or_else(|| {
            Failure::new(EXIT_INVALID, "usage", "give either --structure or --family with --p, --d, --r")
        })?;
        let missing = |flag: &str| Failure::new(EXIT_INVALID, "usage", format!("--family needs --{flag}"));
        let p = self.p.ok_or_else(|| missing("p"))?;
        let d = self.d.ok_or_else(|| missing("d"))?;
        let r = match family {
            Family::RankOne => self.r.unwrap_or(1),
            _ => self.r.ok_or_else(|| missing("r"))?,
        };
        let rank = match family {
            Family::PepsGrid => RankSpec::Grid { height: self.height.ok_or_else(|| missing("height"))?, bond: r },
            _ => RankSpec::Uniform(r),
        };
        let structure = build_family(family, &vec![d; p], &rank)
            .map_err(|e| Failure::new(EXIT_INVALID, "structure", e.to_string()))?;
        Ok((structure, Some(FamilyParams { family, p, d, r })))
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("output serializes"));
}

fn shatter_failure(e: ShatterError) -> Failure {
    match &e {
        ShatterError::ConditionViolated(c) => {
            Failure::new(EXIT_CONDITION, "condition_violated", e.to_string()).with(json!({ "condition": c }))
        }
        ShatterError::VerificationFailed { index, pattern, expected, found } => {
            Failure::new(EXIT_VERIFICATION, "verification_failed", e.to_string()).with(json!({
                "index": index, "sign_vector": pattern, "expected": expected, "found": found
            }))
        }
        ShatterError::OutOfRange(_) | ShatterError::Malformed(_) | ShatterError::Structure(_) => {
            Failure::new(EXIT_INVALID, "invalid", e.to_string())
        }
        ShatterError::Contract(_) => Failure::new(EXIT_OTHER, "contract", e.to_string()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bounds { source, n, delta } => {
            let (structure, family) = source.load()?;
            let report = bound_report(&structure, family, &n, delta).map_err(|e| match e {
                BoundError::Inconsistent { .. } => Failure::new(EXIT_OTHER, "inconsistent", e.to_string()),
                _ => Failure::new(EXIT_INVALID, "out_of_range", e.to_string()),
            })?;
            print_json(&report);
        }
        Command::Verify { construction, p, d, r, mode, seed, certificate_out } => {
            let start = Instant::now();
            let cert = construction.build(d, p, r).map_err(shatter_failure)?;
            if let Some(path) = certificate_out {
                fs::write(&path, cert.to_json())
                    .map_err(|e| Failure::new(EXIT_OTHER, "io", format!("{}: {e}", path.display())))?;
            }
            let opts = VerifyOptions { seed, ..VerifyOptions::default() };
            let record = verify_certificate_with(&cert, mode, &opts).map_err(shatter_failure)?;
            print_json(&json!({
                "record": record,
                "realized": format!("{}/{}", record.patterns_realized, record.patterns_checked),
                "elapsed_seconds": start.elapsed().as_secs_f64(),
            }));
        }
        Command::Experiment { config, out } => {
            let sweep: SweepConfig = read_json(&config)?;
            let result = run_sweep(&sweep).map_err(|e| match &e {
                LearnError::Diverged { run_id, seed, step } => {
                    Failure::new(EXIT_DIVERGED, "diverged", e.to_string())
                        .with(json!({ "run_id": run_id, "seed": seed, "step": step }))
                }
                LearnError::InvalidConfig(_) | LearnError::Bound(_) => {
                    Failure::new(EXIT_INVALID, "invalid_config", e.to_string())
                }
                LearnError::Io { .. } => Failure::new(EXIT_OTHER, "io", e.to_string()),
            })?;
            write_outputs(&out, &sweep, &result).map_err(|e| Failure::new(EXIT_OTHER, "io", e.to_string()))?;
            print_json(&json!({ "out": out.display().to_string(), "cells": result.aggregates }));
        }
        Command::Probe { source, indices, samples, seed } => {
            let (structure, _) = source.load()?;
            let index_set: Vec<Vec<usize>> = match indices {
                Some(text) => {
                    let de = &mut serde_json::Deserializer::from_str(&text);
                    serde_path_to_error::deserialize(de).map_err(|e| {
                        Failure::new(EXIT_INVALID, "schema", e.inner().to_string())
                            .with(json!({ "path": e.path().to_string() }))
                    })?
                }
                None => {
                    let shape = structure.output_shape();
                    let mut all = Vec::new();
                    let mut ix = vec![0; shape.len()];
                    loop {
                        all.push(ix.clone());
                        if !next_index(&mut ix, &shape) {
                            break;
                        }
                    }
                    all
                }
            };
            let count = estimate_shattered_count(&structure, &index_set, samples, seed).map_err(shatter_failure)?;
            print_json(&json!({
                "patterns": count,
                "index_set_size": index_set.len(),
                "max_patterns": 1u64 << index_set.len(),
                "samples": samples,
                "seed": seed,
            }));
        }
        Command::Build { source } => {
            let (structure, _) = source.load()?;
            println!("{}", structure.to_json());
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("TN_CAPACITY_THREADS") else { return Ok(()) };
    let threads: usize = value.trim().parse().map_err(|_| {
        Failure::new(EXIT_INVALID, "usage", format!("TN_CAPACITY_THREADS must be an integer, got {value:?}"))
    })?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::new(EXIT_OTHER, "threads", e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut err = json!({ "error": f.kind, "message": f.message, "exit_code": f.code });
            if !f.detail.is_null() {
                err["detail"] = f.detail;
            }
            eprintln!("{err}");
            ExitCode::from(f.code)
        }
    }
}
