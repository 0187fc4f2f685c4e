//! Batch entry point: synthetic generation, preprocessing, training,
//! sampling, backtesting, and report emission, with files as the only
//! inter-stage contract. Every artifact embeds the producing config and
//! seed as `#` header comments so any output is regenerable.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::backtest::{compute_metrics, metrics_table, run_backtest, Strategy};
use crate::config::{backtest_from_kv, dit_from_kv, synthetic_from_kv, train_from_kv, KvConfig};
use crate::data::{generate_synthetic_market, load_panel, preprocess_panel, write_panel_csvs};
use crate::diffusion::{train, Checkpoint};
use crate::error::{Error, Result};

#[derive(Parser)]
#[command(
    name = "factordiff",
    about = "Factor-conditioned diffusion for daily cross-sectional returns, with a mean-variance backtest pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Key-value config file (`key = value` lines, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single config key, e.g. --set epochs=5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic factor market (factors.csv, returns.csv).
    GenSynthetic {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Clean a raw panel: standardize/winsorize factors, winsorize returns.
    Preprocess {
        /// Raw factors CSV (date,asset_id,f1..fK).
        #[arg(long)]
        factors: PathBuf,
        /// Raw returns CSV (date,asset_id,ret).
        #[arg(long)]
        returns: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the diffusion model on the chronological train split.
    Train {
        #[arg(long)]
        factors: PathBuf,
        #[arg(long)]
        returns: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Draw conditional return samples at one panel snapshot.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        factors: PathBuf,
        #[arg(long)]
        returns: PathBuf,
        /// Pair index of the condition snapshot (default: last).
        #[arg(long)]
        index: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the daily rebalancing backtest over the test split.
    Backtest {
        #[arg(long)]
        factors: PathBuf,
        #[arg(long)]
        returns: PathBuf,
        /// Trained checkpoint (required for strategy=factordiff).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Recompute the metrics table from one or more ledgers.
    Report {
        /// Ledger CSV (repeatable; column label = file stem).
        #[arg(long = "ledger", required = true)]
        ledgers: Vec<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Parse `argv` and run. Returns the process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap renders usage/help; its exit code is 2 for usage
            // errors and 0 for --help/--version.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("factordiff: {e}");
            match e {
                Error::Config(_) => 2,
                Error::Data(_) | Error::Io(_) => 3,
                Error::Numeric(_) | Error::Shape(_) => 4,
            }
        }
    }
}

/// Entry point for the binary: env args + env_logger.
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    dispatch(std::env::args_os())
}

fn resolved_kv(common: &CommonArgs) -> Result<KvConfig> {
    let mut kv = match &common.config {
        Some(path) => KvConfig::from_file(path)?,
        None => KvConfig::new(),
    };
    for spec in &common.set {
        kv.apply_override(spec)?;
    }
    if let Some(seed) = common.seed {
        kv.set("seed", seed);
    }
    Ok(kv)
}

fn ensure_out(common: &CommonArgs) -> Result<PathBuf> {
    std::fs::create_dir_all(&common.out)?;
    Ok(common.out.clone())
}

fn echo_lines(command: &str, kv: &KvConfig) -> Vec<String> {
    let mut lines = vec![format!("command = {command}")];
    lines.extend(kv.comment_lines());
    lines
}

fn write_text(path: &Path, comments: &[String], body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for c in comments {
        writeln!(f, "# {c}")?;
    }
    f.write_all(body.as_bytes())?;
    Ok(())
}

fn fmt_f64_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenSynthetic { common } => {
            let kv = resolved_kv(&common)?;
            let out = ensure_out(&common)?;
            let spec = synthetic_from_kv(&kv)?;
            let (panel, _oracle) = generate_synthetic_market(&spec)?;
            // Echo the fully resolved spec, not just the user's keys.
            let mut echo = KvConfig::new();
            echo.set("d", spec.n_assets);
            echo.set("k", spec.n_factors);
            echo.set("t", spec.horizon);
            echo.set("seed", spec.seed);
            echo.set("loadings", fmt_f64_list(&spec.loadings));
            echo.set("intercept", spec.intercept);
            echo.set("shock_vol", spec.shock_vol);
            echo.set("shock_corr", spec.shock_corr);
            echo.set("factor_ar", spec.factor_ar);
            echo.set(
                "nonlinearity",
                match spec.nonlinearity {
                    crate::data::Nonlinearity::Linear => "linear",
                    crate::data::Nonlinearity::Tanh => "tanh",
                },
            );
            let comments = echo_lines("gen-synthetic", &echo);
            write_panel_csvs(
                &panel,
                &out.join("factors.csv"),
                &out.join("returns.csv"),
                &comments,
            )?;
            log::info!(
                "wrote {} pairs x {} assets to {}",
                panel.n_pairs(),
                panel.n_assets(),
                out.display()
            );
            Ok(())
        }
        Command::Preprocess {
            factors,
            returns,
            common,
        } => {
            let kv = resolved_kv(&common)?;
            let out = ensure_out(&common)?;
            let panel = load_panel(&factors, &returns)?;
            let (clean, flags) = preprocess_panel(&panel)?;
            let imputed: usize = flags.iter().map(|f| f.imputed).sum();
            let clipped: usize = flags.iter().map(|f| f.clipped_factors).sum();
            let winsorized: usize = flags.iter().map(|f| f.clipped_returns).sum();
            let mut echo = kv.clone();
            echo.set("source_factors", factors.display());
            echo.set("source_returns", returns.display());
            let comments = echo_lines("preprocess", &echo);
            write_panel_csvs(
                &clean,
                &out.join("factors_clean.csv"),
                &out.join("returns_clean.csv"),
                &comments,
            )?;
            log::info!(
                "preprocessed {} pairs: {imputed} imputed, {clipped} clipped factor cells, {winsorized} winsorized returns",
                clean.n_pairs()
            );
            Ok(())
        }
        Command::Train {
            factors,
            returns,
            common,
        } => {
            let kv = resolved_kv(&common)?;
            let out = ensure_out(&common)?;
            let panel = load_panel(&factors, &returns)?;
            panel.validate_clean()?;
            let ratio = kv.get_f64("split_ratio", 0.8)?;
            let (train_panel, _) = crate::data::chronological_split(&panel, ratio)?;
            let dit = dit_from_kv(&kv, panel.n_factors())?;
            let mut cfg = train_from_kv(&kv)?;
            cfg.checkpoint_path = Some(out.join("checkpoint.fdif"));
            let (ckpt, report) = train(&train_panel, &dit, &cfg)?;
            ckpt.save(&out.join("checkpoint.fdif"))?;
            let mut echo = kv.clone();
            echo.set("split_ratio", ratio);
            echo.set("train_pairs", train_panel.n_pairs());
            let mut body = String::from("epoch,loss\n");
            for (i, l) in report.epoch_losses.iter().enumerate() {
                body.push_str(&format!("{},{}\n", i + 1, l));
            }
            write_text(&out.join("loss_log.csv"), &echo_lines("train", &echo), &body)?;
            log::info!(
                "trained {} steps; final epoch loss {:.6}; checkpoint at {}",
                report.steps,
                report.epoch_losses.last().unwrap(),
                out.join("checkpoint.fdif").display()
            );
            Ok(())
        }
        Command::Sample {
            checkpoint,
            factors,
            returns,
            index,
            common,
        } => {
            let kv = resolved_kv(&common)?;
            let out = ensure_out(&common)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let panel = load_panel(&factors, &returns)?;
            panel.validate_clean()?;
            let idx = index.unwrap_or(panel.n_pairs() - 1);
            if idx >= panel.n_pairs() {
                return Err(Error::config(format!(
                    "snapshot index {idx} outside the panel's {} pairs",
                    panel.n_pairs()
                )));
            }
            let count = kv.get_usize("samples", 500)?;
            let seed = kv.get_u64("seed", 1)?;
            let set = ckpt.sample(panel.factors_at(idx), count, seed)?;
            let mut echo = kv.clone();
            echo.set("samples", count);
            echo.set("seed", seed);
            echo.set("index", idx);
            echo.set("condition_date", panel.factor_date(idx));
            echo.set("checkpoint", checkpoint.display());
            let mut body = panel.asset_ids().join(",");
            body.push('\n');
            for s in 0..set.samples.nrows() {
                let row: Vec<String> = (0..set.samples.ncols())
                    .map(|i| format!("{}", set.samples[(s, i)]))
                    .collect();
                body.push_str(&row.join(","));
                body.push('\n');
            }
            write_text(&out.join("samples.csv"), &echo_lines("sample", &echo), &body)?;
            log::info!("wrote {} samples to {}", count, out.join("samples.csv").display());
            Ok(())
        }
        Command::Backtest {
            factors,
            returns,
            checkpoint,
            common,
        } => {
            let kv = resolved_kv(&common)?;
            let out = ensure_out(&common)?;
            let panel = load_panel(&factors, &returns)?;
            panel.validate_clean()?;
            let cfg = backtest_from_kv(&kv)?;
            let ratio = kv.get_f64("split_ratio", 0.8)?;
            let t = panel.n_pairs();
            let test_start = ((ratio * t as f64) - 1e-9).ceil() as usize;
            if test_start == 0 || test_start >= t {
                return Err(Error::config(format!(
                    "split ratio {ratio} leaves no test period in {t} pairs"
                )));
            }
            let ckpt = match &checkpoint {
                Some(p) => Some(Checkpoint::load(p)?),
                None => None,
            };
            if cfg.strategy == Strategy::Factordiff && ckpt.is_none() {
                return Err(Error::config(
                    "strategy=factordiff requires --checkpoint <trained model>",
                ));
            }
            let mut ledger = run_backtest(&panel, test_start, ckpt.as_ref(), &cfg)?;
            let mut echo = kv.clone();
            echo.set("split_ratio", ratio);
            echo.set("test_start", test_start);
            echo.set("strategy", cfg.strategy.label());
            ledger.config_echo = echo_lines("backtest", &echo);
            let label = cfg.strategy.label();
            ledger.write_csv(&out.join(format!("ledger_{label}.csv")))?;
            ledger.write_top_weights_csv(5, &out.join(format!("top_weights_{label}.csv")))?;
            let report = compute_metrics(&ledger.net_returns(), cfg.cvar_level)?;
            let table = metrics_table(&[(label.to_string(), report)]);
            write_text(
                &out.join(format!("metrics_{label}.txt")),
                &ledger.config_echo,
                &table,
            )?;
            log::info!("backtest {label}: {} days\n{table}", ledger.rows.len());
            Ok(())
        }
        Command::Report { ledgers, common } => {
            let kv = resolved_kv(&common)?;
            let out = ensure_out(&common)?;
            let cvar_level = kv.get_f64("cvar_level", 0.95)?;
            let mut columns = Vec::new();
            for path in &ledgers {
                let ledger = crate::backtest::BacktestLedger::read_csv(path)?;
                let label = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("ledger")
                    .trim_start_matches("ledger_")
                    .to_string();
                let report = compute_metrics(&ledger.net_returns(), cvar_level)?;
                columns.push((label, report));
            }
            let table = metrics_table(&columns);
            let mut echo = kv.clone();
            echo.set("cvar_level", cvar_level);
            write_text(&out.join("metrics_report.txt"), &echo_lines("report", &echo), &table)?;
            print!("{table}");
            Ok(())
        }
    }
}
