//! Daily rebalancing simulation over the test period: estimate moments,
//! solve the chosen program, drift weights with realized returns, deduct
//! fees, track wealth.

mod metrics;

pub use metrics::{compute_metrics, cvar_loss, max_drawdown, metrics_table, MetricsReport};

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use crate::data::FactorPanel;
use crate::diffusion::Checkpoint;
use crate::error::{Error, Result};
use crate::estimators::{empirical_moments, generative_moments, james_stein_mean, MomentEstimate};
use crate::optimizer::{
    solve_mv, solve_mv_tc, MvProblem, DEFAULT_BUY_FEE, DEFAULT_RISK_AVERSION, DEFAULT_SELL_FEE,
};

/// Which moment estimate (if any) drives the daily weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    EqualWeight,
    Empirical,
    ShrinkEmpirical,
    Factordiff,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::EqualWeight => "EW",
            Strategy::Empirical => "Emp",
            Strategy::ShrinkEmpirical => "ShrEmp",
            Strategy::Factordiff => "Factordiff",
        }
    }
}

/// Which program the weights solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemVariant {
    /// Plain simplex-constrained mean-variance.
    MeanVariance,
    /// Mean-variance net of transaction costs against drifted weights.
    MeanVarianceTc,
}

/// Whether fees reduce the booked net returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeeTreatment {
    Ignored,
    Deducted,
}

#[derive(Debug, Clone)]
pub struct BacktestConfig {
    pub strategy: Strategy,
    pub variant: ProblemVariant,
    pub gamma: f64,
    pub fee_buy: f64,
    pub fee_sell: f64,
    /// Diffusion sample count per day (Factordiff only).
    pub samples: usize,
    pub fee_treatment: FeeTreatment,
    pub seed: u64,
    pub cvar_level: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            strategy: Strategy::EqualWeight,
            variant: ProblemVariant::MeanVariance,
            gamma: DEFAULT_RISK_AVERSION,
            fee_buy: DEFAULT_BUY_FEE,
            fee_sell: DEFAULT_SELL_FEE,
            samples: 500,
            fee_treatment: FeeTreatment::Deducted,
            seed: 1,
            cvar_level: 0.95,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::config("gamma must be positive"));
        }
        if self.fee_buy < 0.0 || self.fee_sell < 0.0 {
            return Err(Error::config("fee rates must be non-negative"));
        }
        if self.strategy == Strategy::Factordiff && self.samples < 2 {
            return Err(Error::config("Factordiff needs at least 2 samples per day"));
        }
        if !(0.0..1.0).contains(&self.cvar_level) || self.cvar_level == 0.0 {
            return Err(Error::config("cvar_level must lie strictly between 0 and 1"));
        }
        Ok(())
    }
}

/// One test day of the ledger.
#[derive(Debug, Clone)]
pub struct LedgerRow {
    /// Date on which the day's return realizes.
    pub date: String,
    /// Post-rebalance target weights.
    pub weights: DVector<f64>,
    /// Pre-trade (drifted) weights.
    pub drifted: DVector<f64>,
    pub buys: DVector<f64>,
    pub sells: DVector<f64>,
    pub gross_return: f64,
    pub fees: f64,
    pub net_return: f64,
    pub wealth: f64,
}

/// Full backtest record; input to the metrics report.
#[derive(Debug, Clone)]
pub struct BacktestLedger {
    pub asset_ids: Vec<String>,
    pub rows: Vec<LedgerRow>,
    /// `key = value` lines embedded in the CSV header.
    pub config_echo: Vec<String>,
}

impl BacktestLedger {
    pub fn net_returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.net_return).collect()
    }

    pub fn gross_returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gross_return).collect()
    }

    /// Ledger CSV: `date, w_<asset>..., gross_return, fees, net_return,
    /// wealth` with `#` header comments.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for c in &self.config_echo {
            writeln!(f, "# {c}")?;
        }
        let mut header = vec!["date".to_string()];
        header.extend(self.asset_ids.iter().map(|a| format!("w_{a}")));
        header.extend(
            ["gross_return", "fees", "net_return", "wealth"]
                .iter()
                .map(|s| s.to_string()),
        );
        writeln!(f, "{}", header.join(","))?;
        for row in &self.rows {
            let mut cells = vec![row.date.clone()];
            cells.extend(row.weights.iter().map(|w| format!("{w}")));
            cells.push(format!("{}", row.gross_return));
            cells.push(format!("{}", row.fees));
            cells.push(format!("{}", row.net_return));
            cells.push(format!("{}", row.wealth));
            writeln!(f, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Read a ledger CSV back. Buys, sells and drifted weights are not
    /// stored in the CSV and come back zeroed; returns and wealth are
    /// exact (round-trip float formatting).
    pub fn read_csv(path: &Path) -> Result<BacktestLedger> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?
            .clone();
        let n = headers.len();
        if n < 5 || &headers[0] != "date" || &headers[n - 1] != "wealth" {
            return Err(Error::data("not a ledger CSV (header mismatch)"));
        }
        let asset_ids: Vec<String> = (1..n - 4)
            .map(|i| {
                headers[i]
                    .strip_prefix("w_")
                    .map(|s| s.to_string())
                    .ok_or_else(|| Error::data(format!("bad weight column '{}'", &headers[i])))
            })
            .collect::<Result<_>>()?;
        let d = asset_ids.len();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::data(format!("{e}")))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::data(format!("line {line}: bad number '{s}'")))
            };
            let mut weights = DVector::zeros(d);
            for i in 0..d {
                weights[i] = parse(&rec[1 + i])?;
            }
            rows.push(LedgerRow {
                date: rec[0].to_string(),
                weights,
                drifted: DVector::zeros(d),
                buys: DVector::zeros(d),
                sells: DVector::zeros(d),
                gross_return: parse(&rec[1 + d])?,
                fees: parse(&rec[2 + d])?,
                net_return: parse(&rec[3 + d])?,
                wealth: parse(&rec[4 + d])?,
            });
        }
        if rows.is_empty() {
            return Err(Error::data("empty ledger"));
        }
        Ok(BacktestLedger {
            asset_ids,
            rows,
            config_echo: Vec::new(),
        })
    }

    /// Weight trajectories of the `n` largest assets by average weight,
    /// as CSV (the weight-over-time figure's content).
    pub fn write_top_weights_csv(&self, n: usize, path: &Path) -> Result<()> {
        let d = self.asset_ids.len();
        let t = self.rows.len() as f64;
        let mut avg: Vec<(usize, f64)> = (0..d)
            .map(|i| {
                (
                    i,
                    self.rows.iter().map(|r| r.weights[i]).sum::<f64>() / t,
                )
            })
            .collect();
        avg.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite weights"));
        let top: Vec<usize> = avg.iter().take(n).map(|(i, _)| *i).collect();

        let mut f = std::fs::File::create(path)?;
        for c in &self.config_echo {
            writeln!(f, "# {c}")?;
        }
        let mut header = vec!["date".to_string()];
        header.extend(top.iter().map(|&i| self.asset_ids[i].clone()));
        writeln!(f, "{}", header.join(","))?;
        for row in &self.rows {
            let mut cells = vec![row.date.clone()];
            cells.extend(top.iter().map(|&i| format!("{}", row.weights[i])));
            writeln!(f, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Pre-trade weights after one day of price moves:
/// `w_i (1 + r_i) / sum_j w_j (1 + r_j)`.
pub fn drift_weights(prev: &DVector<f64>, realized: &DVector<f64>) -> Result<DVector<f64>> {
    if prev.len() != realized.len() {
        return Err(Error::shape("weight and return lengths differ"));
    }
    let mut denom = 0.0;
    for i in 0..prev.len() {
        let growth = 1.0 + realized[i];
        if growth <= 0.0 {
            return Err(Error::numeric(format!(
                "non-positive gross return factor {growth} for asset index {i}"
            )));
        }
        denom += prev[i] * growth;
    }
    if denom <= 0.0 {
        return Err(Error::numeric("portfolio value collapsed to zero"));
    }
    Ok(DVector::from_fn(prev.len(), |i, _| {
        prev[i] * (1.0 + realized[i]) / denom
    }))
}

fn day_sampling_seed(seed: u64, day: usize) -> u64 {
    seed ^ (day as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Run the day loop over pairs `[test_start, T)` of `panel`. History for
/// the expanding-window estimators is everything before the current day
/// (training period included). `model` is required for Factordiff.
pub fn run_backtest(
    panel: &FactorPanel,
    test_start: usize,
    model: Option<&Checkpoint>,
    cfg: &BacktestConfig,
) -> Result<BacktestLedger> {
    cfg.validate()?;
    panel.validate_clean()?;
    let t_total = panel.n_pairs();
    if test_start >= t_total {
        return Err(Error::config(format!(
            "test start {test_start} outside the panel's {t_total} pairs"
        )));
    }
    let needs_history = matches!(cfg.strategy, Strategy::Empirical | Strategy::ShrinkEmpirical);
    if needs_history && test_start < 2 {
        return Err(Error::config(
            "expanding-window estimators need at least 2 prior observations",
        ));
    }
    if cfg.strategy == Strategy::Factordiff && model.is_none() {
        return Err(Error::config(
            "Factordiff backtest requires a trained checkpoint",
        ));
    }
    let d = panel.n_assets();
    let equal = DVector::from_element(d, 1.0 / d as f64);

    let mut rows = Vec::with_capacity(t_total - test_start);
    let mut prev_weights: Option<DVector<f64>> = None;
    let mut wealth = 1.0f64;

    for t in test_start..t_total {
        // Pre-trade weights: all-cash start on day 1, drifted afterwards.
        let drifted = match &prev_weights {
            None => DVector::zeros(d),
            Some(pw) => drift_weights(pw, panel.returns_at(t - 1))?,
        };

        let estimate: Option<MomentEstimate> = match cfg.strategy {
            Strategy::EqualWeight => None,
            Strategy::Empirical => Some(empirical_moments(&panel.return_history(t))?),
            Strategy::ShrinkEmpirical => Some(james_stein_mean(&panel.return_history(t))?.0),
            Strategy::Factordiff => {
                let ckpt = model.expect("checked above");
                let set = ckpt.sample(
                    panel.factors_at(t),
                    cfg.samples,
                    day_sampling_seed(cfg.seed, t),
                )?;
                Some(generative_moments(&set)?)
            }
        };

        let (weights, buys, sells) = match estimate {
            None => {
                let buys = DVector::from_fn(d, |i, _| (equal[i] - drifted[i]).max(0.0));
                let sells = DVector::from_fn(d, |i, _| (drifted[i] - equal[i]).max(0.0));
                (equal.clone(), buys, sells)
            }
            Some(est) => match cfg.variant {
                ProblemVariant::MeanVariance => {
                    let sol = solve_mv(&MvProblem::new(est.mean, est.covariance, cfg.gamma))?;
                    let w = sol.weights;
                    let buys = DVector::from_fn(d, |i, _| (w[i] - drifted[i]).max(0.0));
                    let sells = DVector::from_fn(d, |i, _| (drifted[i] - w[i]).max(0.0));
                    (w, buys, sells)
                }
                ProblemVariant::MeanVarianceTc => {
                    let sol = solve_mv_tc(&MvProblem::with_fees(
                        est.mean,
                        est.covariance,
                        cfg.gamma,
                        cfg.fee_buy,
                        cfg.fee_sell,
                        drifted.clone(),
                    ))?;
                    (sol.weights, sol.buys, sol.sells)
                }
            },
        };

        let realized = panel.returns_at(t);
        let gross = weights.dot(realized);
        let fees = match cfg.fee_treatment {
            FeeTreatment::Ignored => 0.0,
            FeeTreatment::Deducted => cfg.fee_buy * buys.sum() + cfg.fee_sell * sells.sum(),
        };
        let net = gross - fees;
        if net <= -1.0 {
            return Err(Error::numeric(format!(
                "wealth wiped out on {} (net return {net})",
                panel.return_date(t)
            )));
        }
        wealth *= 1.0 + net;
        rows.push(LedgerRow {
            date: panel.return_date(t).to_string(),
            weights: weights.clone(),
            drifted,
            buys,
            sells,
            gross_return: gross,
            fees,
            net_return: net,
            wealth,
        });
        prev_weights = Some(weights);
    }

    Ok(BacktestLedger {
        asset_ids: panel.asset_ids().to_vec(),
        rows,
        config_echo: Vec::new(),
    })
}
