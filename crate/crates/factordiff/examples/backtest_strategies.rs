//! Full pipeline on a synthetic market: train the diffusion model, then
//! backtest all four strategies under both programs and print the two
//! comparison tables (fees ignored for the plain program, fees included
//! for the cost-aware one).
//!
//!     cargo run -p factordiff --example backtest_strategies

use std::time::Instant;

use factordiff::backtest::{
    compute_metrics, metrics_table, run_backtest, BacktestConfig, FeeTreatment, ProblemVariant,
    Strategy,
};
use factordiff::data::{generate_synthetic_market, SyntheticSpec};
use factordiff::denoiser::DiTConfig;
use factordiff::diffusion::{train, TrainConfig};

fn main() -> factordiff::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let start = Instant::now();

    let spec = SyntheticSpec {
        horizon: 600,
        seed: 21,
        ..SyntheticSpec::default_market()
    };
    let (panel, _) = generate_synthetic_market(&spec)?;
    let test_start = 480; // 8:2 chronological split

    let dit = DiTConfig {
        factor_dim: spec.n_factors,
        d_model: 16,
        heads: 2,
        depth: 2,
        ffn_mult: 4,
        cond_hidden: 16,
    };
    let cfg = TrainConfig {
        epochs: 12,
        n_steps: 50,
        seed: 21,
        standardize_returns: true,
        ..TrainConfig::default()
    };
    let train_panel = panel.slice(0..test_start)?;
    let (ckpt, report) = train(&train_panel, &dit, &cfg)?;
    println!(
        "trained {} steps in {:.0}s (loss {:.3} -> {:.3})",
        report.steps,
        start.elapsed().as_secs_f64(),
        report.epoch_losses[0],
        report.epoch_losses.last().unwrap()
    );

    let strategies = [
        Strategy::EqualWeight,
        Strategy::Factordiff,
        Strategy::Empirical,
        Strategy::ShrinkEmpirical,
    ];

    for (variant, treatment, title) in [
        (
            ProblemVariant::MeanVariance,
            FeeTreatment::Ignored,
            "plain program, fees ignored",
        ),
        (
            ProblemVariant::MeanVariance,
            FeeTreatment::Deducted,
            "plain program, fees deducted",
        ),
        (
            ProblemVariant::MeanVarianceTc,
            FeeTreatment::Deducted,
            "cost-aware program, fees deducted",
        ),
    ] {
        let mut columns = Vec::new();
        for strategy in strategies {
            let cfg = BacktestConfig {
                strategy,
                variant,
                samples: 100,
                fee_treatment: treatment,
                seed: 21,
                ..BacktestConfig::default()
            };
            let ledger = run_backtest(&panel, test_start, Some(&ckpt), &cfg)?;
            let report = compute_metrics(&ledger.net_returns(), cfg.cvar_level)?;
            columns.push((strategy.label().to_string(), report));
        }
        println!("\n{title}:\n{}", metrics_table(&columns));
    }
    println!("total {:.0}s", start.elapsed().as_secs_f64());
    Ok(())
}
