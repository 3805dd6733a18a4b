//! Subcommand implementations. Every command locks the output directory,
//! writes UTF-8 CSV artifacts, and drops a `.meta.json` provenance sidecar
//! next to each file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use spillover_core::{
    align, cov_windows, describe, load_csv, log_returns, rolling_volatility, train,
    AnalysisTarget, CsvSchema, DateRange, DenoiserConfig, DenoiserModel, EodClient, Panel,
    PricePanel, RollingConfig, SpilloverMode, TrainConfig,
};

use crate::config::{DataSource, RunConfig};

const MODEL_FILE: &str = "denoiser_model.json";
const CURVE_FILE: &str = "training_curve.csv";

/// Holds an exclusive lock file inside the output directory for the duration
/// of a command.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let path = dir.join(".spillover.lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => bail!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ),
            Err(e) => Err(e).context("cannot create lock file"),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    target: AnalysisTarget,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_sha256: Option<String>,
    config: &'a RunConfig,
    generated_at: String,
}

fn write_sidecar(
    artifact: &Path,
    command: &str,
    config: &RunConfig,
    mode: Option<&str>,
    seed: Option<u64>,
    model_sha256: Option<String>,
) -> Result<()> {
    let sidecar = Sidecar {
        command,
        target: config.target,
        mode,
        seed,
        model_sha256,
        config,
        generated_at: chrono::Utc::now().to_rfc3339(),
    };
    let path = artifact.with_file_name(format!(
        "{}.meta.json",
        artifact.file_name().unwrap().to_string_lossy()
    ));
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn load_source(config: &RunConfig) -> Result<PricePanel> {
    let panel = match &config.data {
        DataSource::Csv {
            path,
            date_column,
            columns,
        } => {
            let schema = CsvSchema {
                date_column: date_column.clone().unwrap_or_else(|| "date".into()),
                asset_columns: columns.clone(),
            };
            load_csv(path, &schema)?
        }
        DataSource::Eod {
            endpoint,
            symbols,
            from,
            to,
            cache_dir,
        } => {
            let api_key = std::env::var("EOD_API_KEY")
                .context("EOD_API_KEY environment variable is not set")?;
            let cache = cache_dir
                .clone()
                .unwrap_or_else(|| config.out_dir.join("cache"));
            let client = EodClient::new(endpoint.clone(), api_key).with_cache_dir(cache);
            let fetched = client.fetch(
                symbols,
                DateRange {
                    from: *from,
                    to: *to,
                },
            )?;
            for warning in &fetched.warnings {
                log::warn!("{warning}");
            }
            fetched.panel
        }
    };
    match &config.labels {
        Some(labels) => Ok(panel.with_assets(labels.clone())?),
        None => Ok(panel),
    }
}

fn panel_path(config: &RunConfig, target: AnalysisTarget) -> PathBuf {
    match target {
        AnalysisTarget::Returns => config.out_dir.join("panel_returns.csv"),
        AnalysisTarget::Volatility => config.out_dir.join("panel_volatility.csv"),
    }
}

/// Load a previously ingested panel, applying the log transform for
/// volatility targets when configured.
fn load_target_panel(config: &RunConfig) -> Result<Panel> {
    let path = panel_path(config, config.target);
    if !path.exists() {
        bail!(
            "panel file {} does not exist; run `spillover ingest` first",
            path.display()
        );
    }
    let panel = load_csv(&path, &CsvSchema::default())?;
    let mut panel = panel.as_panel().clone();
    if !panel.is_dense() {
        bail!("panel file {} contains gaps", path.display());
    }
    if config.target == AnalysisTarget::Volatility && config.var.log_volatility {
        let values = panel.values();
        if values.iter().any(|&v| v <= 0.0) {
            bail!("log volatility requested but the panel has non-positive entries");
        }
        let logged = values.map(|v| v.ln());
        panel = Panel::new(panel.dates().to_vec(), panel.assets().to_vec(), logged)?;
    }
    Ok(panel)
}

fn resolve_lag(config: &RunConfig, panel: &Panel) -> Result<usize> {
    match config.var.select_lag_max {
        Some(max) => Ok(spillover_core::select_lag_aic(panel, max)?),
        None => Ok(config.var.lag),
    }
}

fn rolling_config(config: &RunConfig, lag: usize, mode: SpilloverMode) -> RollingConfig {
    RollingConfig {
        window_length: config.rolling.window,
        step: config.rolling.step,
        var_lag: lag,
        horizon: config.horizon,
        mode,
        target: config.target,
        parallel: config.rolling.parallel,
        divisor: config.directional_divisor.into(),
        dof_adjust: config.var.dof_adjust,
    }
}

fn load_model(config: &RunConfig) -> Result<(DenoiserModel, String)> {
    let path = config.out_dir.join(MODEL_FILE);
    if !path.exists() {
        bail!(
            "model file {} does not exist; run `spillover train` first",
            path.display()
        );
    }
    let model = DenoiserModel::load_json(&path)?;
    let hash = file_sha256(&path)?;
    Ok((model, hash))
}

/// Load prices, align, derive returns and volatility, and persist the four
/// panel and statistics files.
pub fn cmd_ingest(config: &RunConfig) -> Result<()> {
    let _lock = DirLock::acquire(&config.out_dir)?;
    let prices = load_source(config)?;
    let aligned = align(&prices)?;
    let returns = log_returns(&aligned)?;
    let volatility =
        rolling_volatility(&returns, config.volatility.window, config.annualization_factor())?;

    let returns_path = config.out_dir.join("panel_returns.csv");
    let vol_path = config.out_dir.join("panel_volatility.csv");
    spillover_core::ingest::write_panel_csv(returns.as_panel(), &returns_path)?;
    spillover_core::ingest::write_panel_csv(volatility.as_panel(), &vol_path)?;

    let stats_returns = describe(returns.as_panel())?;
    let stats_vol = describe(volatility.as_panel())?;
    let stats_returns_path = config.out_dir.join("stats_returns.csv");
    let stats_vol_path = config.out_dir.join("stats_volatility.csv");
    stats_returns.write_csv(&stats_returns_path)?;
    stats_vol.write_csv(&stats_vol_path)?;

    for path in [&returns_path, &vol_path, &stats_returns_path, &stats_vol_path] {
        write_sidecar(path, "ingest", config, None, None, None)?;
    }
    println!(
        "ingested {} assets x {} rows -> {}",
        returns.assets().len(),
        returns.values().nrows(),
        config.out_dir.display()
    );
    Ok(())
}

/// Recompute descriptive statistics from the persisted panels.
pub fn cmd_stats(config: &RunConfig) -> Result<()> {
    let _lock = DirLock::acquire(&config.out_dir)?;
    for (target, stats_name) in [
        (AnalysisTarget::Returns, "stats_returns.csv"),
        (AnalysisTarget::Volatility, "stats_volatility.csv"),
    ] {
        let path = panel_path(config, target);
        if !path.exists() {
            bail!(
                "panel file {} does not exist; run `spillover ingest` first",
                path.display()
            );
        }
        let panel = load_csv(&path, &CsvSchema::default())?;
        let table = describe(panel.as_panel())?;
        let out = config.out_dir.join(stats_name);
        table.write_csv(&out)?;
        write_sidecar(&out, "stats", config, None, None, None)?;
    }
    println!("statistics written to {}", config.out_dir.display());
    Ok(())
}

/// Build the covariance window corpus from the target panel, train the
/// denoiser, and persist the model plus its training curve.
pub fn cmd_train(config: &RunConfig) -> Result<()> {
    let _lock = DirLock::acquire(&config.out_dir)?;
    let panel = load_target_panel(config)?;
    let n = panel.n_assets();
    let windows = cov_windows(&panel, config.cov_window(), config.cov_step())?;

    let denoiser_config = DenoiserConfig {
        hidden_dims: config
            .denoiser
            .hidden_dims
            .clone()
            .unwrap_or_else(|| vec![4 * n]),
        residual_weight: config.denoiser.alpha,
        eig_floor: config.denoiser.eig_floor,
        standardization: config.denoiser.standardization,
    };
    let train_config = TrainConfig {
        lambda1: config.denoiser.lambda1,
        lambda2: config.denoiser.lambda2,
        batch_size: config.denoiser.batch_size,
        epochs: config.denoiser.epochs,
        learning_rate: config.denoiser.learning_rate,
        momentum: config.denoiser.momentum,
        seed: config.denoiser.seed,
        early_stop_patience: config.denoiser.early_stop_patience,
    };
    let model = DenoiserModel::init(n, &denoiser_config, train_config.seed)?;
    let trained = train(model, &windows, &train_config)?;

    let model_path = config.out_dir.join(MODEL_FILE);
    trained.model.write_json(&model_path)?;
    let curve_path = config.out_dir.join(CURVE_FILE);
    std::fs::write(&curve_path, trained.report.curve_csv())?;

    let hash = file_sha256(&model_path)?;
    let seed = Some(train_config.seed);
    write_sidecar(&model_path, "train", config, None, seed, Some(hash.clone()))?;
    write_sidecar(&curve_path, "train", config, None, seed, Some(hash))?;
    println!(
        "trained on {} windows, best epoch {} -> {}",
        windows.len(),
        trained.report.best_epoch,
        model_path.display()
    );
    Ok(())
}

/// Full-sample spillover tables in the requested mode(s).
pub fn cmd_static(config: &RunConfig) -> Result<()> {
    let _lock = DirLock::acquire(&config.out_dir)?;
    let panel = load_target_panel(config)?;
    let lag = resolve_lag(config, &panel)?;
    for (mode, model, hash, label) in requested_modes(config)? {
        let cfg = rolling_config(config, lag, mode);
        let table = spillover_core::run_static(&panel, &cfg, model.as_ref())?;
        let path = config.out_dir.join(format!("spillover_static_{label}.csv"));
        table.write_csv(&path, config.decimals)?;
        write_sidecar(&path, "static", config, Some(label), None, hash)?;
        println!(
            "static {label} total index {:.2}% -> {}",
            table.total_index,
            path.display()
        );
    }
    Ok(())
}

/// Rolling spillover series in the requested mode(s).
pub fn cmd_rolling(config: &RunConfig) -> Result<()> {
    let _lock = DirLock::acquire(&config.out_dir)?;
    let panel = load_target_panel(config)?;
    let lag = resolve_lag(config, &panel)?;
    for (mode, model, hash, label) in requested_modes(config)? {
        let cfg = rolling_config(config, lag, mode);
        let series = spillover_core::run_rolling(&panel, &cfg, model.as_ref())?;
        for warning in &series.warnings {
            log::warn!(
                "window {} ({}): {}",
                warning.window,
                warning.date,
                warning.message
            );
        }
        let path = config.out_dir.join(format!("spillover_rolling_{label}.csv"));
        series.write_csv(&path)?;
        write_sidecar(&path, "rolling", config, Some(label), None, hash)?;
        println!(
            "rolling {label}: {} windows ({} gaps) -> {}",
            series.len(),
            series.total.iter().filter(|v| v.is_none()).count(),
            path.display()
        );
    }
    Ok(())
}

type ModeRun = (SpilloverMode, Option<DenoiserModel>, Option<String>, &'static str);

fn requested_modes(config: &RunConfig) -> Result<Vec<ModeRun>> {
    let mut runs = Vec::new();
    if config.mode.traditional() {
        runs.push((SpilloverMode::Traditional, None, None, "traditional"));
    }
    if config.mode.denoised() {
        let (model, hash) = load_model(config)?;
        runs.push((SpilloverMode::Denoised, Some(model), Some(hash), "denoised"));
    }
    Ok(runs)
}
