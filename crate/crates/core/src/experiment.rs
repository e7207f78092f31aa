//! Config-driven runs and the built-in presets.
//!
//! An experiment file is JSON:
//!
//! ```json
//! {
//!   "problem": {"generate": {"kind": "F-S", "m": 6, "seed": 8, "graph": {"kind": "two_cycles"}}},
//!   "run": {"iterations": 1000, "seed": 8, "policy": {"kind": "round_robin"}, "rng": "chacha8"},
//!   "output": {"trace_csv": "trace.csv", "events_csv": "events.csv", "plot_script": "plot.py"}
//! }
//! ```
//!
//! `problem` may instead be `{"file": "problem.json"}`. Optional run fields
//! (`liveness_window`, `record_every`, `epsilon_bar`) fall back to the
//! defaults of [`RunConfig::new`]. Relative paths are taken relative to the
//! experiment file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::generate::{generate_problem, ProblemKind};
use crate::graph::DirectedGraph;
use crate::io::{load_problem, ProblemFileError};
use crate::problem::ProblemInstance;
use crate::simulator::{run, RunConfig, SchedulePolicy, SimError, Trace, RNG_ALGORITHM};

/// Seeds swept by every preset.
pub const REFERENCE_SEEDS: [u64; 3] = [8, 9, 10];

pub const PRESETS: [&str; 3] = ["paper-smooth", "paper-nonsmooth", "consensus-demo"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant violation: {0}")]
    Invariant(SimError),
    #[error("cannot write or read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Invariant(_) => 3,
            Self::Io { .. } => 4,
        }
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<SimError> for ExperimentError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(msg) => Self::Config(msg),
            SimError::Model(m) => Self::Config(m.to_string()),
            other => Self::Invariant(other),
        }
    }
}

impl From<ModelError> for ExperimentError {
    fn from(e: ModelError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<ProblemFileError> for ExperimentError {
    fn from(e: ProblemFileError) -> Self {
        match e {
            ProblemFileError::Io { path, source } => Self::Io {
                path: path.into(),
                source,
            },
            other => Self::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum GraphSpec {
    #[default]
    TwoCycles,
    Ring {
        nodes: usize,
    },
    /// One-based edge list.
    Edges {
        nodes: usize,
        edges: Vec<[usize; 2]>,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<DirectedGraph, ModelError> {
        match self {
            Self::TwoCycles => Ok(DirectedGraph::two_cycles()),
            Self::Ring { nodes } => DirectedGraph::ring(*nodes),
            Self::Edges { nodes, edges } => {
                let pairs: Vec<(usize, usize)> = edges.iter().map(|&[i, j]| (i, j)).collect();
                DirectedGraph::from_one_based(*nodes, &pairs)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub kind: String,
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub graph: GraphSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    Generate(GenerateSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    UniformRandom { send: f64, receive: f64, dual: f64 },
    RoundRobin,
    AdversarialDelay { delay: u32 },
}

impl From<PolicySpec> for SchedulePolicy {
    fn from(p: PolicySpec) -> Self {
        match p {
            PolicySpec::UniformRandom {
                send,
                receive,
                dual,
            } => Self::UniformRandom {
                send,
                receive,
                dual,
            },
            PolicySpec::RoundRobin => Self::RoundRobin,
            PolicySpec::AdversarialDelay { delay } => Self::AdversarialDelay { delay },
        }
    }
}

fn default_rng() -> String {
    RNG_ALGORITHM.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub iterations: u64,
    pub seed: u64,
    pub policy: PolicySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub liveness_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_bar: Option<f64>,
    #[serde(default)]
    pub record_x: bool,
    #[serde(default = "default_rng")]
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trace_csv: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub run: RunSpec,
    pub output: OutputSpec,
}

/// Outcome of a successful experiment.
#[derive(Debug, Clone)]
pub struct Summary {
    pub trace: Trace,
    pub trace_csv: PathBuf,
    pub final_gap: f64,
    pub final_wdist: f64,
    pub final_spread: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text)
            .map_err(|e| ExperimentError::Config(format!("line {}: {e}", e.line())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(ExperimentError::io(path))?;
        Self::from_json(&text)
    }

    /// Builds the problem instance, resolving a file source against `base`.
    pub fn problem(&self, base: &Path) -> Result<ProblemInstance, ExperimentError> {
        match &self.problem {
            ProblemSource::Generate(g) => {
                let kind: ProblemKind = g.kind.parse().map_err(ExperimentError::Config)?;
                Ok(generate_problem(kind, g.m, g.graph.build()?, g.seed)?)
            }
            ProblemSource::File(p) => Ok(load_problem(&base.join(p))?),
        }
    }

    pub fn run_config(
        &self,
        graph: &DirectedGraph,
        debug_invariants: bool,
    ) -> Result<RunConfig, ExperimentError> {
        let r = &self.run;
        if r.rng != RNG_ALGORITHM {
            return Err(ExperimentError::Config(format!(
                "unsupported rng `{}` (only `{RNG_ALGORITHM}`)",
                r.rng
            )));
        }
        let mut config = RunConfig::new(graph, r.iterations, r.seed, r.policy.clone().into());
        if let Some(w) = r.liveness_window {
            config.liveness_window = w;
        }
        if let Some(every) = r.record_every {
            config.record_every = every;
        }
        if let Some(eps) = r.epsilon_bar {
            config.epsilon_bar = eps;
        }
        config.record_x = r.record_x;
        config.debug_invariants = debug_invariants;
        config.validate(graph)?;
        Ok(config)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(ExperimentError::io(dir))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(ExperimentError::io(path))
}

/// Runs `config`, writing all requested outputs. Relative paths are resolved
/// against `base`.
pub fn run_experiment(
    config: &ExperimentConfig,
    base: &Path,
    debug_invariants: bool,
) -> Result<Summary, ExperimentError> {
    let problem = config.problem(base)?;
    let run_config = config.run_config(problem.graph(), debug_invariants)?;
    let trace = run(&problem, &run_config)?;

    let trace_csv = base.join(&config.output.trace_csv);
    let mut out = create(&trace_csv)?;
    trace
        .write_csv(&mut out)
        .and_then(|_| out.flush())
        .map_err(ExperimentError::io(&trace_csv))?;
    if let Some(p) = &config.output.events_csv {
        let path = base.join(p);
        let mut out = create(&path)?;
        trace
            .write_events_csv(problem.graph(), &mut out)
            .and_then(|_| out.flush())
            .map_err(ExperimentError::io(&path))?;
    }
    if let Some(p) = &config.output.plot_script {
        let path = base.join(p);
        let script = plot_script(&trace_csv, &path);
        fs::write(&path, script).map_err(ExperimentError::io(&path))?;
    }

    let last = trace.rows.last().expect("row 0 is always recorded");
    Ok(Summary {
        final_gap: last.duality_gap,
        final_wdist: last.weighted_sq_dist,
        final_spread: last.consensus_spread,
        trace_csv,
        trace,
    })
}

/// Python script plotting the gap and weighted distance columns of `csv` on
/// a log scale. The CSV path is stored relative to the script when possible.
pub fn plot_script(csv: &Path, script: &Path) -> String {
    let csv_ref = match (csv.parent(), script.parent()) {
        (Some(a), Some(b)) if a == b => csv
            .file_name()
            .map(PathBuf::from)
            .unwrap_or_else(|| csv.to_path_buf()),
        _ => csv.to_path_buf(),
    };
    let csv_lit = serde_json::to_string(&csv_ref.display().to_string()).expect("string");
    format!(
        r#"#!/usr/bin/env python3
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
SOURCE = os.path.join(HERE, {csv_lit})

k, gap, wdist = [], [], []
with open(SOURCE, newline="") as fh:
    for row in csv.DictReader(fh):
        k.append(int(row["k"]))
        gap.append(float(row["gap"]))
        wdist.append(float(row["wdist"]))


def positive(xs, ys):
    pts = [(x, y) for x, y in zip(xs, ys) if y > 0]
    return [p[0] for p in pts], [p[1] for p in pts]


fig, ax = plt.subplots()
ax.semilogy(*positive(k, gap), label="duality gap")
ax.semilogy(*positive(k, wdist), label="weighted squared distance")
ax.set_xlabel("iteration k")
ax.legend()
ax.set_title(os.path.basename(SOURCE))
fig.savefig(os.path.splitext(SOURCE)[0] + ".png", dpi=150)
"#
    )
}

/// Config of a named preset for one seed, with outputs named after the
/// preset and seed.
pub fn preset(name: &str, seed: u64) -> Result<ExperimentConfig, ExperimentError> {
    let (kind, m, iterations) = match name {
        "paper-smooth" => (ProblemKind::Smooth, 6, 1000),
        "paper-nonsmooth" => (ProblemKind::Nonsmooth, 6, 50_000),
        "consensus-demo" => (ProblemKind::Consensus, 1, 5000),
        other => {
            return Err(ExperimentError::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    let stem = format!("{name}-seed{seed}");
    Ok(ExperimentConfig {
        problem: ProblemSource::Generate(GenerateSpec {
            kind: kind.to_string(),
            m,
            seed,
            graph: GraphSpec::TwoCycles,
        }),
        run: RunSpec {
            iterations,
            seed,
            policy: PolicySpec::RoundRobin,
            liveness_window: None,
            record_every: None,
            epsilon_bar: None,
            record_x: false,
            rng: default_rng(),
        },
        output: OutputSpec {
            trace_csv: format!("{stem}.csv").into(),
            events_csv: Some(format!("{stem}-events.csv").into()),
            plot_script: Some(format!("{stem}.py").into()),
        },
    })
}

/// Runs a preset over [`REFERENCE_SEEDS`] in parallel, writing outputs and
/// the per-seed experiment file into `out_dir`.
pub fn run_preset(
    name: &str,
    out_dir: &Path,
    debug_invariants: bool,
) -> Result<Vec<Summary>, ExperimentError> {
    let configs = REFERENCE_SEEDS
        .iter()
        .map(|&seed| preset(name, seed))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out_dir).map_err(ExperimentError::io(out_dir))?;
    for (config, seed) in configs.iter().zip(REFERENCE_SEEDS) {
        let path = out_dir.join(format!("{name}-seed{seed}.json"));
        fs::write(&path, config.to_json() + "\n").map_err(ExperimentError::io(&path))?;
    }
    configs
        .par_iter()
        .map(|c| run_experiment(c, out_dir, debug_invariants))
        .collect()
}
