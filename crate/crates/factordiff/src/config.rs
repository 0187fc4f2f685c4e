//! Key-value config files (`key = value` lines, `#` comments) and the
//! typed views the pipeline stages read from them. Unknown keys are
//! ignored so one file can configure several stages.

use std::collections::BTreeMap;
use std::path::Path;

use crate::backtest::{BacktestConfig, FeeTreatment, ProblemVariant, Strategy};
use crate::data::{Nonlinearity, SyntheticSpec};
use crate::denoiser::DiTConfig;
use crate::diffusion::TrainConfig;
use crate::error::{Error, Result};

/// Ordered string map with line-based parsing and deterministic output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    map: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("config line {}: expected 'key = value'", i + 1))
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::config(format!("config line {}: empty key", i + 1)));
            }
            map.insert(key.to_string(), v.trim().to_string());
        }
        Ok(KvConfig { map })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    /// Apply a `key=value` override (the CLI's `--set`).
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set '{spec}' must be key=value")))?;
        if k.trim().is_empty() {
            return Err(Error::config(format!("--set '{spec}' has an empty key")));
        }
        self.map.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::config(format!("{key}: cannot parse '{s}' as a number"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.map.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::config(format!("{key}: cannot parse '{s}' as an integer"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::config(format!("{key}: cannot parse '{s}' as an integer"))),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.map.get(key).map(|s| s.as_str()) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(s) => Err(Error::config(format!("{key}: cannot parse '{s}' as a bool"))),
        }
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::config(format!("{key}: bad list entry '{p}'")))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    /// Deterministic `key = value` text, one line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Lines for embedding into artifact headers.
    pub fn comment_lines(&self) -> Vec<String> {
        self.map.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Synthetic-market spec from keys
/// `d, k, t, seed, loadings, intercept, shock_vol, shock_corr, factor_ar,
/// nonlinearity`.
pub fn synthetic_from_kv(kv: &KvConfig) -> Result<SyntheticSpec> {
    let default = SyntheticSpec::default_market();
    let n_factors = kv.get_usize("k", default.n_factors)?;
    let loadings = match kv.get_f64_list("loadings")? {
        Some(l) => l,
        None if n_factors == default.n_factors => default.loadings.clone(),
        None => {
            // Alternate small positive/negative loadings by default.
            (0..n_factors)
                .map(|i| if i % 2 == 0 { 0.006 } else { -0.004 })
                .collect()
        }
    };
    let nonlinearity = match kv.get("nonlinearity").unwrap_or("linear") {
        "linear" => Nonlinearity::Linear,
        "tanh" => Nonlinearity::Tanh,
        other => {
            return Err(Error::config(format!(
                "nonlinearity '{other}' must be linear or tanh"
            )))
        }
    };
    let spec = SyntheticSpec {
        n_assets: kv.get_usize("d", default.n_assets)?,
        n_factors,
        horizon: kv.get_usize("t", default.horizon)?,
        seed: kv.get_u64("seed", default.seed)?,
        loadings,
        intercept: kv.get_f64("intercept", default.intercept)?,
        shock_vol: kv.get_f64("shock_vol", default.shock_vol)?,
        shock_corr: kv.get_f64("shock_corr", default.shock_corr)?,
        factor_ar: kv.get_f64("factor_ar", default.factor_ar)?,
        nonlinearity,
    };
    spec.validate()?;
    Ok(spec)
}

/// Architecture from keys `d_model, heads, depth, ffn_mult, cond_hidden`
/// plus the data-bound factor dimension.
pub fn dit_from_kv(kv: &KvConfig, factor_dim: usize) -> Result<DiTConfig> {
    let d_model = kv.get_usize("d_model", 64)?;
    let cfg = DiTConfig {
        factor_dim,
        d_model,
        heads: kv.get_usize("heads", 4)?,
        depth: kv.get_usize("depth", 3)?,
        ffn_mult: kv.get_usize("ffn_mult", 4)?,
        cond_hidden: kv.get_usize("cond_hidden", d_model)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Training config from keys `epochs, batch_size, learning_rate, n_steps,
/// beta_min, beta_max, seed, standardize_returns`.
pub fn train_from_kv(kv: &KvConfig) -> Result<TrainConfig> {
    let default = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: kv.get_usize("epochs", default.epochs)?,
        batch_size: kv.get_usize("batch_size", default.batch_size)?,
        learning_rate: kv.get_f64("learning_rate", default.learning_rate)?,
        n_steps: kv.get_usize("n_steps", default.n_steps)?,
        beta_min: kv.get_f64("beta_min", default.beta_min)?,
        beta_max: kv.get_f64("beta_max", default.beta_max)?,
        seed: kv.get_u64("seed", default.seed)?,
        standardize_returns: kv.get_bool("standardize_returns", default.standardize_returns)?,
        grad_clip: match kv.get_f64("grad_clip", default.grad_clip.unwrap_or(0.0))? {
            c if c > 0.0 => Some(c),
            _ => None,
        },
        checkpoint_path: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Backtest config from keys `strategy, variant, gamma, fee_buy, fee_sell,
/// samples, fee_treatment, seed, cvar_level, split_ratio`.
pub fn backtest_from_kv(kv: &KvConfig) -> Result<BacktestConfig> {
    let default = BacktestConfig::default();
    let strategy = match kv.get("strategy").unwrap_or("ew") {
        "ew" | "EW" => Strategy::EqualWeight,
        "emp" | "Emp" => Strategy::Empirical,
        "shremp" | "ShrEmp" => Strategy::ShrinkEmpirical,
        "factordiff" | "Factordiff" => Strategy::Factordiff,
        other => {
            return Err(Error::config(format!(
                "strategy '{other}' must be one of ew, emp, shremp, factordiff"
            )))
        }
    };
    let variant = match kv.get("variant").unwrap_or("mv") {
        "mv" => ProblemVariant::MeanVariance,
        "mv_tc" => ProblemVariant::MeanVarianceTc,
        other => {
            return Err(Error::config(format!(
                "variant '{other}' must be mv (no fees in the program) or mv_tc"
            )))
        }
    };
    let fee_treatment = match kv.get("fee_treatment").unwrap_or("deducted") {
        "deducted" => FeeTreatment::Deducted,
        "ignored" => FeeTreatment::Ignored,
        other => {
            return Err(Error::config(format!(
                "fee_treatment '{other}' must be deducted or ignored"
            )))
        }
    };
    let cfg = BacktestConfig {
        strategy,
        variant,
        gamma: kv.get_f64("gamma", default.gamma)?,
        fee_buy: kv.get_f64("fee_buy", default.fee_buy)?,
        fee_sell: kv.get_f64("fee_sell", default.fee_sell)?,
        samples: kv.get_usize("samples", default.samples)?,
        fee_treatment,
        seed: kv.get_u64("seed", default.seed)?,
        cvar_level: kv.get_f64("cvar_level", default.cvar_level)?,
    };
    cfg.validate()?;
    Ok(cfg)
}
