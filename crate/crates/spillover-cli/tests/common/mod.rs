//! Shared fixtures for the CLI test suites: deterministic synthetic price
//! panels and helpers for driving the binary.

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Write a synthetic price CSV with a common factor so cross-asset
/// spillovers are non-trivial. Deterministic in `seed`.
pub fn write_price_fixture(path: &Path, n_assets: usize, rows: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = vec![100.0_f64; n_assets];
    let mut csv = String::from("date");
    for a in 0..n_assets {
        csv.push_str(&format!(",SYM{a}"));
    }
    csv.push('\n');
    let start = chrono::NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
    for r in 0..rows {
        let date = start + chrono::Days::new(r as u64);
        csv.push_str(&date.format("%Y-%m-%d").to_string());
        let common: f64 = rng.random::<f64>() - 0.5;
        for level in levels.iter_mut() {
            let own: f64 = rng.random::<f64>() - 0.5;
            let shock = 0.012 * common + 0.008 * own;
            *level *= shock.exp();
            csv.push_str(&format!(",{level}"));
        }
        csv.push('\n');
    }
    std::fs::write(path, csv).unwrap();
}

/// Base configuration sized for fast test runs.
pub fn base_config(data_path: &Path, out_dir: &Path) -> serde_json::Value {
    serde_json::json!({
        "data": {"source": "csv", "path": data_path},
        "target": "returns",
        "volatility": {"window": 15},
        "var": {"lag": 1},
        "horizon": 5,
        "rolling": {"window": 120, "step": 20},
        "denoiser": {
            "hidden_dims": [8],
            "batch_size": 4,
            "epochs": 8,
            "learning_rate": 0.005,
            "seed": 42,
            "early_stop_patience": 8,
        },
        "out_dir": out_dir,
    })
}

pub fn write_config(path: &Path, config: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(config).unwrap()).unwrap();
}

/// Run the binary with the given arguments.
pub fn spillover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spillover"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}
