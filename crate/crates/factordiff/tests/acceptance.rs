//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured quantities.
//!
//!     cargo test -p factordiff --test acceptance -- --nocapture

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use factordiff::backtest::{
    compute_metrics, metrics_table, run_backtest, BacktestConfig, FeeTreatment, ProblemVariant,
    Strategy,
};
use factordiff::data::{generate_synthetic_market, SyntheticSpec};
use factordiff::denoiser::{denoise_forward, dit_block, DenoiserParams, DiTConfig};
use factordiff::diffusion::{build_schedule, denoising_loss_with, draw_assignments, train, TrainConfig};
use factordiff::estimators::generative_moments;
use factordiff::numerics::{finite_diff_check, AdamState};
use factordiff::optimizer::{brute_oracle, solve_mv, solve_mv_tc, MvProblem};

fn verdict(criterion: usize, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn grad_check_config() -> DiTConfig {
    DiTConfig {
        factor_dim: 2,
        d_model: 16,
        heads: 2,
        depth: 2,
        ffn_mult: 2,
        cond_hidden: 16,
    }
}

fn perturb_zero_params(params: &mut DenoiserParams, scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in params.flat_mut().iter_mut() {
        if *v == 0.0 {
            *v = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

#[test]
fn c01_full_loss_gradient_matches_finite_differences() {
    let start = Instant::now();
    let cfg = grad_check_config();
    let schedule = build_schedule(8, 0.01, 0.15).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let d = 3;
    let xs: Vec<DMatrix<f64>> = (0..4)
        .map(|_| DMatrix::from_fn(d, 2, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let rs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..d).map(|_| 0.02 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let batch: Vec<(&DMatrix<f64>, &[f64])> =
        (0..4).map(|i| (&xs[i], rs[i].as_slice())).collect();
    let assignments = draw_assignments(&schedule, d, 4, &mut rng);

    let mut params = DenoiserParams::init(&cfg, 7).unwrap();
    let mut worst = 0.0f64;
    for stage in 0..2 {
        if stage == 1 {
            // Ten genuine training steps with fresh Monte-Carlo draws.
            let mut adam = AdamState::new(params.len(), 0.003);
            for step in 0..10 {
                let a = draw_assignments(&schedule, d, 4, &mut rng);
                let _ = step;
                let (_, grads) = denoising_loss_with(&params, &batch, &schedule, &a).unwrap();
                adam.step(params.flat_mut(), &grads).unwrap();
            }
        }
        let (_, analytic) = denoising_loss_with(&params, &batch, &schedule, &assignments).unwrap();
        let eval = |p: &[f64]| {
            let trial = DenoiserParams::from_flat(&cfg, p.to_vec())?;
            Ok(denoising_loss_with(&trial, &batch, &schedule, &assignments)?.0)
        };
        let coords: Vec<usize> = (0..150).map(|_| rng.gen_range(0..params.len())).collect();
        let err = finite_diff_check(eval, &analytic, params.flat(), 1e-5, &coords).unwrap();
        worst = worst.max(err);
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        1,
        worst < 1e-5 && elapsed < 30.0,
        &format!("max relative gradient error {worst:.2e} (< 1e-5), runtime {elapsed:.1}s (< 30s)"),
    );
}

#[test]
fn c02_adaln_zero_initialization_is_exact_identity() {
    let cfg = DiTConfig {
        factor_dim: 3,
        d_model: 32,
        heads: 4,
        depth: 3,
        ffn_mult: 4,
        cond_hidden: 32,
    };
    let params = DenoiserParams::init(&cfg, 123).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut max_out = 0.0f64;
    for trial in 0..100 {
        let d = 2 + trial % 6;
        let x = DMatrix::from_fn(d, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noisy: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = rng.gen_range(1..=100);
        let out = denoise_forward(&params, &noisy, n, &x).unwrap();
        max_out = max_out.max(out.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    // Every block is an exact identity map at initialization.
    let mut max_block = 0.0f64;
    for b in 0..cfg.depth {
        let tokens = DMatrix::from_fn(5, cfg.d_model, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cond = DMatrix::from_fn(5, cfg.d_model, |_, _| rng.sample::<f64, _>(StandardNormal));
        let out = dit_block(&params, b, &tokens, &cond).unwrap();
        let resid = (out - tokens).abs().max();
        max_block = max_block.max(resid);
    }
    verdict(
        2,
        max_out == 0.0 && max_block < 1e-12,
        &format!("max |output| {max_out:.1e} (exact zero), max block residual {max_block:.1e} (< 1e-12)"),
    );
}

#[test]
fn c03_permutation_equivariance_on_six_assets() {
    let cfg = DiTConfig {
        factor_dim: 2,
        d_model: 32,
        heads: 4,
        depth: 2,
        ffn_mult: 4,
        cond_hidden: 32,
    };
    let mut params = DenoiserParams::init(&cfg, 9).unwrap();
    perturb_zero_params(&mut params, 0.1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let d = 6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = DMatrix::from_fn(d, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noisy: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = rng.gen_range(1..=100);
        let out = denoise_forward(&params, &noisy, n, &x).unwrap();
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let xp = DMatrix::from_fn(d, 2, |i, j| x[(perm[i], j)]);
        let np: Vec<f64> = perm.iter().map(|&i| noisy[i]).collect();
        let outp = denoise_forward(&params, &np, n, &xp).unwrap();
        for i in 0..d {
            worst = worst.max((outp[i] - out[perm[i]]).abs());
        }
    }
    verdict(
        3,
        worst < 1e-10,
        &format!("max deviation over 100 permutations {worst:.2e} (< 1e-10)"),
    );
}

#[test]
fn c04_conditional_law_recovery_on_the_default_market() {
    let start = Instant::now();
    let spec = SyntheticSpec {
        horizon: 4025,
        seed: 7,
        ..SyntheticSpec::default_market()
    };
    let (panel, oracle) = generate_synthetic_market(&spec).unwrap();
    let train_panel = panel.slice(0..4000).unwrap();
    let holdout = panel.slice(4000..4025).unwrap();

    let dit = DiTConfig {
        factor_dim: 2,
        d_model: 16,
        heads: 2,
        depth: 2,
        ffn_mult: 4,
        cond_hidden: 16,
    };
    // Paper settings scaled down: Adam lr 0.003, batch 16, <= 30 epochs,
    // N = 100 diffusion steps.
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 16,
        learning_rate: 0.003,
        n_steps: 100,
        beta_min: 1e-4,
        beta_max: 0.12,
        seed: 11,
        standardize_returns: true,
        checkpoint_path: None,
    };
    let (ckpt, _) = train(&train_panel, &dit, &cfg).unwrap();

    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    let mut worst_corr = 0.0f64;
    for s in 0..20 {
        let x = holdout.factors_at(s);
        let set = ckpt.sample(x, 2000, 1000 + s as u64).unwrap();
        let est = generative_moments(&set).unwrap();
        let (true_mean, true_cov) = oracle.true_conditional_moments(x).unwrap();
        for i in 0..4 {
            worst_mean = worst_mean
                .max((est.mean[i] - true_mean[i]).abs() / true_cov[(i, i)].sqrt());
            worst_var = worst_var
                .max((est.covariance[(i, i)] - true_cov[(i, i)]).abs() / true_cov[(i, i)]);
            for j in 0..i {
                let corr = est.covariance[(i, j)]
                    / (est.covariance[(i, i)] * est.covariance[(j, j)]).sqrt();
                let tc = true_cov[(i, j)] / (true_cov[(i, i)] * true_cov[(j, j)]).sqrt();
                worst_corr = worst_corr.max((corr - tc).abs());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        4,
        worst_mean < 0.15 && worst_var < 0.25 && worst_corr < 0.15 && elapsed < 900.0,
        &format!(
            "mean err {worst_mean:.3} (< 0.15 of cond std), var rel err {worst_var:.3} (< 0.25), corr err {worst_corr:.3} (< 0.15), runtime {elapsed:.0}s (< 900s)"
        ),
    );
}

/// Independent projected-gradient oracle: plain (non-accelerated) ascent
/// with its own bisection-based simplex projection.
fn pgd_oracle(problem: &MvProblem, iters: usize) -> DVector<f64> {
    let d = problem.dim();
    let project = |y: &DVector<f64>| -> DVector<f64> {
        // Bisection on tau so that sum(max(0, y - tau)) = 1.
        let mut lo = y.min() - 1.0;
        let mut hi = y.max();
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = y.iter().map(|v| (v - mid).max(0.0)).sum();
            if s >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        DVector::from_fn(d, |i, _| (y[i] - tau).max(0.0))
    };
    // Power iteration for the Lipschitz constant.
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    for _ in 0..200 {
        v = &problem.covariance * &v;
        let n = v.norm();
        if n > 0.0 {
            v /= n;
        }
    }
    let l = problem.risk_aversion * (&problem.covariance * &v).norm().max(1e-12);
    let step = 1.0 / l;
    let mut w = DVector::from_element(d, 1.0 / d as f64);
    for _ in 0..iters {
        let grad = &problem.expected_returns - &(&problem.covariance * &w) * problem.risk_aversion;
        w = project(&(&w + &grad * step));
    }
    w
}

fn random_mv_instance(rng: &mut ChaCha8Rng, d: usize) -> MvProblem {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma = &a * a.transpose() + DMatrix::identity(d, d) * 0.05;
    let mu = DVector::from_fn(d, |_, _| 0.05 * rng.sample::<f64, _>(StandardNormal));
    MvProblem::new(mu, sigma, 0.5 + 3.0 * rng.gen::<f64>())
}

#[test]
fn c05_qp_optimality_against_two_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst_pgd_gap = f64::NEG_INFINITY;
    let mut worst_grid_gap = f64::NEG_INFINITY;
    let mut worst_kkt = 0.0f64;
    for trial in 0..200 {
        let d = 2 + trial % 3;
        let p = random_mv_instance(&mut rng, d);
        let sol = solve_mv(&p).unwrap();
        worst_kkt = worst_kkt.max(sol.kkt_residual);
        let pgd = pgd_oracle(&p, 60_000);
        worst_pgd_gap = worst_pgd_gap.max(p.objective(&pgd) - sol.objective);
        let grid = brute_oracle(&p, 200).unwrap();
        worst_grid_gap = worst_grid_gap.max(grid.objective - sol.objective);
    }
    // Analytic interior case.
    let p = MvProblem::new(
        DVector::from_column_slice(&[0.1, 0.0]),
        DMatrix::identity(2, 2),
        1.0,
    );
    let sol = solve_mv(&p).unwrap();
    let analytic_err = (sol.weights[0] - 0.55).abs().max((sol.weights[1] - 0.45).abs());
    verdict(
        5,
        worst_pgd_gap < 1e-6 && worst_grid_gap < 1e-4 && worst_kkt < 1e-7 && analytic_err < 1e-8,
        &format!(
            "200 instances: pgd-oracle gap {worst_pgd_gap:.2e} (< 1e-6), grid gap {worst_grid_gap:.2e} (< 1e-4), kkt {worst_kkt:.2e} (< 1e-7), analytic case err {analytic_err:.2e} (< 1e-8)"
        ),
    );
}

#[test]
fn c06_fee_program_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst_zero_fee_gap = 0.0f64;
    let mut worst_no_trade = 0.0f64;
    let mut worst_cross = 0.0f64;
    for trial in 0..100 {
        let d = 2 + trial % 3;
        let base = random_mv_instance(&mut rng, d);
        let plain = solve_mv(&base).unwrap();

        // Zero fees from a random prior: objectives agree.
        let raw = DVector::from_fn(d, |_, _| rng.gen::<f64>());
        let prior = &raw / raw.sum();
        let zero_fee = MvProblem::with_fees(
            base.expected_returns.clone(),
            base.covariance.clone(),
            base.risk_aversion,
            0.0,
            0.0,
            prior.clone(),
        );
        let tc0 = solve_mv_tc(&zero_fee).unwrap();
        worst_zero_fee_gap = worst_zero_fee_gap.max((tc0.objective - plain.objective).abs());

        // Prior at the no-fee optimum with positive fees: no trade.
        let at_opt = MvProblem::with_fees(
            base.expected_returns.clone(),
            base.covariance.clone(),
            base.risk_aversion,
            0.00075,
            0.00125,
            plain.weights.clone(),
        );
        let tc = solve_mv_tc(&at_opt).unwrap();
        for i in 0..d {
            worst_no_trade = worst_no_trade.max(tc.buys[i].max(tc.sells[i]));
        }

        // Never simultaneously buy and sell, under random positive fees.
        let fee_p = MvProblem::with_fees(
            base.expected_returns.clone(),
            base.covariance.clone(),
            base.risk_aversion,
            0.01 * rng.gen::<f64>(),
            0.01 * rng.gen::<f64>(),
            prior,
        );
        let sol = solve_mv_tc(&fee_p).unwrap();
        for i in 0..d {
            worst_cross = worst_cross.max(sol.buys[i] * sol.sells[i]);
        }
    }
    verdict(
        6,
        worst_zero_fee_gap < 1e-8 && worst_no_trade < 1e-8 && worst_cross < 1e-12,
        &format!(
            "zero-fee objective gap {worst_zero_fee_gap:.2e} (< 1e-8), no-trade residual {worst_no_trade:.2e} (< 1e-8), max b_i*s_i {worst_cross:.2e} (< 1e-12)"
        ),
    );
}

#[test]
fn c07_metrics_against_hand_oracles() {
    // Wealth path 1 -> 1.1 -> 0.99: drawdown exactly 0.100000.
    let mdd = factordiff::backtest::max_drawdown(&[0.1, -0.1]);
    let dd_err = (mdd - 0.1).abs();

    // 100 random returns: all six metrics vs independent recomputation.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let returns: Vec<f64> = (0..100).map(|_| 0.02 * rng.sample::<f64, _>(StandardNormal)).collect();
    let level = 0.95;
    let m = compute_metrics(&returns, level).unwrap();

    let n = returns.len() as f64;
    let mean: f64 = returns.iter().sum::<f64>() / n;
    let std = (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let downside = (returns.iter().map(|r| r.min(0.0).powi(2)).sum::<f64>() / n).sqrt();
    let mut wealth = 1.0f64;
    let mut peak = 1.0f64;
    let mut mdd2 = 0.0f64;
    for r in &returns {
        wealth *= 1.0 + r;
        peak = peak.max(wealth);
        mdd2 = mdd2.max((peak - wealth) / peak);
    }
    let k = ((1.0 - level) * n).ceil() as usize;
    let mut sorted = returns.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cvar = -(sorted[..k].iter().sum::<f64>() / k as f64);

    let worst = [
        (m.mean_pct - 100.0 * mean).abs(),
        (m.std_pct - 100.0 * std).abs(),
        (m.sharpe.unwrap() - mean / std).abs(),
        (m.sortino.unwrap() - mean / downside).abs(),
        (m.calmar.unwrap() - mean / mdd2).abs(),
        (m.return_to_cvar.unwrap() - mean / cvar).abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    verdict(
        7,
        dd_err < 1e-12 && worst < 1e-10,
        &format!("drawdown fixture err {dd_err:.2e} (< 1e-12), six-metric recomputation err {worst:.2e} (< 1e-10)"),
    );
}

#[test]
fn c08_backtest_accounting() {
    let spec = SyntheticSpec {
        n_assets: 3,
        horizon: 40,
        ..SyntheticSpec::default_market()
    };
    let (panel, _) = generate_synthetic_market(&spec).unwrap();

    // Zero fee rates: deducted and ignored ledgers identical.
    let base = BacktestConfig {
        strategy: Strategy::Empirical,
        variant: ProblemVariant::MeanVarianceTc,
        gamma: 30.0,
        fee_buy: 0.0,
        fee_sell: 0.0,
        fee_treatment: FeeTreatment::Deducted,
        ..BacktestConfig::default()
    };
    let a = run_backtest(&panel, 8, None, &base).unwrap();
    let b = run_backtest(
        &panel,
        8,
        None,
        &BacktestConfig {
            fee_treatment: FeeTreatment::Ignored,
            ..base
        },
    )
    .unwrap();
    let ledgers_equal = a
        .rows
        .iter()
        .zip(&b.rows)
        .all(|(x, y)| {
            x.net_return == y.net_return && x.wealth == y.wealth && x.weights == y.weights
        });

    // EW weights constant across all days.
    let ew = run_backtest(&panel, 8, None, &BacktestConfig::default()).unwrap();
    let ew_constant = ew.rows.iter().all(|r| {
        (0..3).all(|i| (r.weights[i] - 1.0 / 3.0).abs() < 1e-15)
    });

    // Single-asset universe: zero fees after day 1.
    let single = SyntheticSpec {
        n_assets: 1,
        horizon: 12,
        shock_corr: 0.0,
        ..SyntheticSpec::default_market()
    };
    let (panel1, _) = generate_synthetic_market(&single).unwrap();
    let l1 = run_backtest(&panel1, 2, None, &BacktestConfig::default()).unwrap();
    let single_ok = l1.rows[0].fees > 0.0 && l1.rows[1..].iter().all(|r| r.fees == 0.0);

    verdict(
        8,
        ledgers_equal && ew_constant && single_ok,
        &format!("zero-fee treatments identical: {ledgers_equal}, EW constant: {ew_constant}, single-asset fees after day 1 zero: {single_ok}"),
    );
}

#[test]
fn c09_factordiff_beats_equal_weight_on_informative_factors() {
    let start = Instant::now();
    let mut wins = 0usize;
    let mut first_table = String::new();
    let runs = 10;
    for run in 0..runs {
        let spec = SyntheticSpec {
            horizon: 500,
            seed: 101 + run as u64,
            loadings: vec![0.012, -0.008],
            ..SyntheticSpec::default_market()
        };
        let (panel, _) = generate_synthetic_market(&spec).unwrap();
        let test_start = 400;
        let dit = DiTConfig {
            factor_dim: 2,
            d_model: 16,
            heads: 2,
            depth: 2,
            ffn_mult: 4,
            cond_hidden: 16,
        };
        let tc = TrainConfig {
            epochs: 8,
            n_steps: 40,
            seed: 900 + run as u64,
            standardize_returns: true,
            ..TrainConfig::default()
        };
        let (ckpt, _) = train(&panel.slice(0..test_start).unwrap(), &dit, &tc).unwrap();

        let mk = |strategy| BacktestConfig {
            strategy,
            variant: ProblemVariant::MeanVarianceTc,
            samples: 100,
            fee_treatment: FeeTreatment::Deducted,
            seed: 300 + run as u64,
            ..BacktestConfig::default()
        };
        let fd = run_backtest(&panel, test_start, Some(&ckpt), &mk(Strategy::Factordiff)).unwrap();
        let ew = run_backtest(&panel, test_start, None, &mk(Strategy::EqualWeight)).unwrap();
        let fd_m = compute_metrics(&fd.net_returns(), 0.95).unwrap();
        let ew_m = compute_metrics(&ew.net_returns(), 0.95).unwrap();
        let (fd_sharpe, ew_sharpe) = (fd_m.sharpe.unwrap(), ew_m.sharpe.unwrap());
        println!(
            "  run {run}: net Sharpe Factordiff {fd_sharpe:.3} vs EW {ew_sharpe:.3} {}",
            if fd_sharpe > ew_sharpe { "(win)" } else { "(loss)" }
        );
        if fd_sharpe > ew_sharpe {
            wins += 1;
        }
        if run == 0 {
            first_table = metrics_table(&[
                ("EW".to_string(), ew_m),
                ("Factordiff (100)".to_string(), fd_m),
            ]);
        }
    }
    println!("comparison table (run 0, cost-aware program, fees deducted):\n{first_table}");
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        9,
        wins >= 8,
        &format!("Factordiff beat EW on net Sharpe in {wins}/{runs} seeded runs (need >= 8); {elapsed:.0}s"),
    );
}

#[test]
fn c10_identical_config_and_seed_reproduce_artifacts_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| -> (Vec<u8>, Vec<u8>, String) {
        let spec = SyntheticSpec {
            horizon: 80,
            seed: 3,
            ..SyntheticSpec::default_market()
        };
        let (panel, _) = generate_synthetic_market(&spec).unwrap();
        let dit = DiTConfig {
            factor_dim: 2,
            d_model: 8,
            heads: 2,
            depth: 1,
            ffn_mult: 2,
            cond_hidden: 8,
        };
        let tc = TrainConfig {
            epochs: 2,
            n_steps: 6,
            seed: 3,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let (ckpt, _) = train(&panel.slice(0..64).unwrap(), &dit, &tc).unwrap();
        let ckpt_path = dir.path().join(format!("{tag}.fdif"));
        ckpt.save(&ckpt_path).unwrap();

        let cfg = BacktestConfig {
            strategy: Strategy::Factordiff,
            variant: ProblemVariant::MeanVarianceTc,
            samples: 16,
            seed: 3,
            ..BacktestConfig::default()
        };
        let ledger = run_backtest(&panel, 64, Some(&ckpt), &cfg).unwrap();
        let ledger_path = dir.path().join(format!("{tag}.csv"));
        ledger.write_csv(&ledger_path).unwrap();
        let table = metrics_table(&[(
            "Factordiff".to_string(),
            compute_metrics(&ledger.net_returns(), 0.95).unwrap(),
        )]);
        (
            std::fs::read(&ckpt_path).unwrap(),
            std::fs::read(&ledger_path).unwrap(),
            table,
        )
    };
    let (c1, l1, t1) = run("a");
    let (c2, l2, t2) = run("b");
    verdict(
        10,
        c1 == c2 && l1 == l2 && t1 == t2,
        &format!(
            "checkpoint bytes equal: {}, ledger bytes equal: {}, metrics tables equal: {}",
            c1 == c2,
            l1 == l2,
            t1 == t2
        ),
    );
}
