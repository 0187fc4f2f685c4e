//! The six performance metrics and the strategies-by-metrics table.
//!
//! All ratios are raw (unannualized, zero risk-free rate) on daily
//! returns: Sharpe = mean/std, Sortino = mean/downside-deviation (RMS of
//! negative returns, T denominator), Calmar = mean/max-drawdown of the
//! wealth curve, RtC = mean/CVaR with CVaR the sign-flipped average of
//! the worst `ceil((1-level) T)` returns. Undefined denominators yield
//! `None`, never NaN.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Arithmetic mean of daily returns, in percent.
    pub mean_pct: f64,
    /// Sample standard deviation (T-1), in percent.
    pub std_pct: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub calmar: Option<f64>,
    pub return_to_cvar: Option<f64>,
}

/// Maximum fractional peak-to-trough decline of the wealth curve
/// `1, prod(1+r_1..t)`.
pub fn max_drawdown(returns: &[f64]) -> f64 {
    let mut wealth = 1.0f64;
    let mut peak = 1.0f64;
    let mut mdd = 0.0f64;
    for r in returns {
        wealth *= 1.0 + r;
        if wealth > peak {
            peak = wealth;
        }
        mdd = mdd.max((peak - wealth) / peak);
    }
    mdd
}

/// Average of the worst `ceil((1-level) T)` daily returns, sign-flipped
/// to a positive loss magnitude.
pub fn cvar_loss(returns: &[f64], level: f64) -> f64 {
    let t = returns.len();
    let k = ((1.0 - level) * t as f64).ceil().max(1.0) as usize;
    let mut sorted = returns.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite returns"));
    -(sorted[..k.min(t)].iter().sum::<f64>() / k.min(t) as f64)
}

/// Compute the six metrics from a daily return series.
pub fn compute_metrics(returns: &[f64], cvar_level: f64) -> Result<MetricsReport> {
    let t = returns.len();
    if t < 2 {
        return Err(Error::data(format!("metrics need at least 2 days, got {t}")));
    }
    if !(0.0..1.0).contains(&cvar_level) || cvar_level == 0.0 {
        return Err(Error::config(format!(
            "CVaR level {cvar_level} must lie strictly between 0 and 1"
        )));
    }
    if let Some(r) = returns.iter().find(|r| !r.is_finite()) {
        return Err(Error::numeric(format!("non-finite daily return {r}")));
    }
    let n = t as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    let downside = (returns.iter().map(|r| r.min(0.0).powi(2)).sum::<f64>() / n).sqrt();
    let mdd = max_drawdown(returns);
    let cvar = cvar_loss(returns, cvar_level);

    let ratio = |den: f64| if den > 0.0 { Some(mean / den) } else { None };
    Ok(MetricsReport {
        mean_pct: 100.0 * mean,
        std_pct: 100.0 * std,
        sharpe: ratio(std),
        sortino: ratio(downside),
        calmar: ratio(mdd),
        return_to_cvar: ratio(cvar),
    })
}

/// Strategies-as-columns table with the six metric rows, mirroring the
/// usual comparison layout.
pub fn metrics_table(columns: &[(String, MetricsReport)]) -> String {
    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.3}"),
        None => "n/a".to_string(),
    };
    let rows: Vec<(&str, Box<dyn Fn(&MetricsReport) -> String>)> = vec![
        ("Mean (%)", Box::new(|m: &MetricsReport| format!("{:.3}", m.mean_pct))),
        ("Std (%)", Box::new(|m: &MetricsReport| format!("{:.3}", m.std_pct))),
        ("Sharpe", Box::new(move |m: &MetricsReport| fmt_opt(m.sharpe))),
        ("Sortino", Box::new(move |m: &MetricsReport| fmt_opt(m.sortino))),
        ("Calmar", Box::new(move |m: &MetricsReport| fmt_opt(m.calmar))),
        ("RtC", Box::new(move |m: &MetricsReport| fmt_opt(m.return_to_cvar))),
    ];
    let mut widths: Vec<usize> = vec![10];
    for (name, _) in columns {
        widths.push(name.len().max(12));
    }
    let mut out = String::new();
    out.push_str(&format!("{:<10}", "Metric"));
    for ((name, _), w) in columns.iter().zip(&widths[1..]) {
        out.push_str(&format!(" {:>w$}", name, w = w));
    }
    out.push('\n');
    for (label, extract) in &rows {
        out.push_str(&format!("{label:<10}"));
        for ((_, report), w) in columns.iter().zip(&widths[1..]) {
            out.push_str(&format!(" {:>w$}", extract(report), w = w));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_returns_have_zero_mean_and_sharpe() {
        let returns = [0.01, -0.01].repeat(50);
        let m = compute_metrics(&returns, 0.95).unwrap();
        assert!(m.mean_pct.abs() < 1e-12);
        assert!(m.sharpe.unwrap().abs() < 1e-12);
    }

    #[test]
    fn drawdown_of_the_reference_wealth_path() {
        // 1 -> 1.1 -> 0.99: peak 1.1, trough 0.99, drawdown exactly 0.10.
        let returns = [0.1, -0.1];
        let mdd = max_drawdown(&returns);
        assert!((mdd - 0.10).abs() < 1e-12, "mdd {mdd}");
    }

    #[test]
    fn random_series_matches_independent_recomputation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let returns: Vec<f64> = (0..100).map(|_| 0.02 * (rng.gen::<f64>() - 0.45)).collect();
        let level = 0.95;
        let m = compute_metrics(&returns, level).unwrap();

        // Spreadsheet-style recomputation.
        let n = returns.len() as f64;
        let mean: f64 = returns.iter().sum::<f64>() / n;
        let std = (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((m.mean_pct - 100.0 * mean).abs() < 1e-10);
        assert!((m.std_pct - 100.0 * std).abs() < 1e-10);
        assert!((m.sharpe.unwrap() - mean / std).abs() < 1e-10);

        let dd = (returns.iter().map(|r| r.min(0.0) * r.min(0.0)).sum::<f64>() / n).sqrt();
        assert!((m.sortino.unwrap() - mean / dd).abs() < 1e-10);

        let mut wealth = vec![1.0];
        for r in &returns {
            wealth.push(wealth.last().unwrap() * (1.0 + r));
        }
        let mut mdd = 0.0f64;
        for i in 1..wealth.len() {
            let peak = wealth[..=i].iter().cloned().fold(f64::MIN, f64::max);
            mdd = mdd.max((peak - wealth[i]) / peak);
        }
        assert!((m.calmar.unwrap() - mean / mdd).abs() < 1e-10);

        let k = ((1.0 - level) * n).ceil() as usize;
        let mut sorted = returns.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cvar = -(sorted[..k].iter().sum::<f64>() / k as f64);
        assert!((m.return_to_cvar.unwrap() - mean / cvar).abs() < 1e-10);
    }

    #[test]
    fn undefined_denominators_are_flagged_not_nan() {
        // Strictly positive constant returns: no drawdown, no tail loss,
        // zero std. The constant is exactly representable so the sample
        // deviations vanish bit-exactly.
        let returns = [0.015625; 30];
        let m = compute_metrics(&returns, 0.95).unwrap();
        assert_eq!(m.sharpe, None);
        assert_eq!(m.sortino, None);
        assert_eq!(m.calmar, None);
        assert_eq!(m.return_to_cvar, None);
        assert!((m.mean_pct - 1.5625).abs() < 1e-12);
    }

    #[test]
    fn input_validation() {
        assert!(compute_metrics(&[0.01], 0.95).is_err());
        assert!(compute_metrics(&[0.01, 0.02], 0.0).is_err());
        assert!(compute_metrics(&[0.01, f64::NAN], 0.95).is_err());
    }

    #[test]
    fn table_contains_the_six_metric_rows() {
        let m = compute_metrics(&[0.01, -0.02, 0.005, 0.0], 0.95).unwrap();
        let table = metrics_table(&[("EW".to_string(), m)]);
        for row in ["Mean (%)", "Std (%)", "Sharpe", "Sortino", "Calmar", "RtC"] {
            assert!(table.contains(row), "missing row {row}:\n{table}");
        }
    }
}
