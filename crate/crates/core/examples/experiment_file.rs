//! Runs an experiment described in JSON and writes the trace, event log and
//! plot script, as `dirdyk run --config` does.

use dirdyk::experiment::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"{
  "problem": {"generate": {"kind": "F-S", "m": 3, "seed": 5, "graph": {"kind": "ring", "nodes": 5}}},
  "run": {"iterations": 3000, "seed": 5,
          "policy": {"kind": "uniform_random", "send": 0.4, "receive": 0.4, "dual": 0.2},
          "record_every": 10, "rng": "chacha8"},
  "output": {"trace_csv": "ring.csv", "events_csv": "ring-events.csv", "plot_script": "ring.py"}
}"#;

fn main() {
    let config = ExperimentConfig::from_json(CONFIG).expect("config");
    let dir = std::env::temp_dir().join("dirdyk-experiment");
    match run_experiment(&config, &dir, false) {
        Ok(s) => println!(
            "wrote {} ({} rows), final gap {:.3e}, liveness {}",
            s.trace_csv.display(),
            s.trace.rows.len(),
            s.final_gap,
            s.trace.liveness
        ),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
