//! Runs an experiment from a config and prints the reproducible CSV report.

use flatchain::cli::{run_experiment, ExperimentConfig};

fn main() {
    let cfg = ExperimentConfig {
        experiment: "fubini-check".into(),
        h_list: vec![0.4, 0.2],
        samples: 200,
        seed: 42,
        options: [("dim".to_string(), 2.into()), ("f".to_string(), "ramp".into())].into(),
        ..Default::default()
    };
    match run_experiment(&cfg).and_then(|r| r.to_csv()) {
        Ok(csv) => print!("{csv}"),
        Err(e) => eprintln!("{}: {e}", e.name()),
    }
}
