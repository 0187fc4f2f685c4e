//! Panel data: aligned (factor matrix, next-period return) pairs, the
//! cross-sectional preprocessing pipeline, chronological splitting, CSV
//! ingestion, and a synthetic factor market with exact conditional
//! moments.

mod csvio;
mod preprocess;
mod synthetic;

pub use csvio::{load_panel, write_panel_csvs};
pub use preprocess::{preprocess_day, preprocess_panel, PreprocessFlags};
pub use synthetic::{
    generate_synthetic_market, Nonlinearity, SyntheticOracle, SyntheticSpec,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Time-aligned panel: for each pair index `t`, `factors[t]` is the
/// `D x K` factor matrix observed on `factor_dates[t]` and `returns[t]`
/// is the `D`-vector of returns realized over the following period,
/// dated `return_dates[t]` (strictly later than the factor date).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    asset_ids: Vec<String>,
    factor_dates: Vec<String>,
    return_dates: Vec<String>,
    factors: Vec<DMatrix<f64>>,
    returns: Vec<DVector<f64>>,
}

impl FactorPanel {
    pub fn new(
        asset_ids: Vec<String>,
        factor_dates: Vec<String>,
        return_dates: Vec<String>,
        factors: Vec<DMatrix<f64>>,
        returns: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let t = factor_dates.len();
        if return_dates.len() != t || factors.len() != t || returns.len() != t {
            return Err(Error::data("panel component lengths differ"));
        }
        if t == 0 {
            return Err(Error::data("empty panel"));
        }
        let d = asset_ids.len();
        if d == 0 {
            return Err(Error::data("panel with zero assets"));
        }
        let k = factors[0].ncols();
        for (i, (f, r)) in factors.iter().zip(&returns).enumerate() {
            if f.nrows() != d || f.ncols() != k || r.len() != d {
                return Err(Error::data(format!(
                    "inconsistent dimensions at pair {i}: factors {}x{}, returns {}",
                    f.nrows(),
                    f.ncols(),
                    r.len()
                )));
            }
        }
        for i in 0..t {
            if factor_dates[i] >= return_dates[i] {
                return Err(Error::data(format!(
                    "factor date {} does not precede its return date {}",
                    factor_dates[i], return_dates[i]
                )));
            }
            if i + 1 < t && factor_dates[i] >= factor_dates[i + 1] {
                return Err(Error::data(format!(
                    "factor dates not strictly increasing at {}",
                    factor_dates[i]
                )));
            }
        }
        Ok(FactorPanel {
            asset_ids,
            factor_dates,
            return_dates,
            factors,
            returns,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.factor_dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn factor_date(&self, t: usize) -> &str {
        &self.factor_dates[t]
    }

    pub fn return_date(&self, t: usize) -> &str {
        &self.return_dates[t]
    }

    pub fn factors_at(&self, t: usize) -> &DMatrix<f64> {
        &self.factors[t]
    }

    pub fn returns_at(&self, t: usize) -> &DVector<f64> {
        &self.returns[t]
    }

    /// Return history of pairs `[0, upto)` as a `upto x D` matrix
    /// (row per day), the expanding window the estimators consume.
    pub fn return_history(&self, upto: usize) -> DMatrix<f64> {
        let d = self.n_assets();
        DMatrix::from_fn(upto, d, |t, i| self.returns[t][i])
    }

    /// True when every factor and return entry is finite (preprocessing
    /// leaves no missing values behind).
    pub fn is_clean(&self) -> bool {
        self.factors.iter().all(|f| f.iter().all(|v| v.is_finite()))
            && self.returns.iter().all(|r| r.iter().all(|v| v.is_finite()))
    }

    pub fn validate_clean(&self) -> Result<()> {
        if self.is_clean() {
            Ok(())
        } else {
            Err(Error::data(
                "panel contains missing or non-finite values; run preprocessing first",
            ))
        }
    }

    /// Sub-panel over a pair range (shared asset ids, cloned data).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<FactorPanel> {
        if range.start >= range.end || range.end > self.n_pairs() {
            return Err(Error::data(format!(
                "pair range {range:?} invalid for {} pairs",
                self.n_pairs()
            )));
        }
        FactorPanel::new(
            self.asset_ids.clone(),
            self.factor_dates[range.clone()].to_vec(),
            self.return_dates[range.clone()].to_vec(),
            self.factors[range.clone()].to_vec(),
            self.returns[range].to_vec(),
        )
    }
}

/// First `ceil(ratio * T)` pairs to the train panel, the rest to test;
/// no shuffling, no overlap.
pub fn chronological_split(panel: &FactorPanel, ratio: f64) -> Result<(FactorPanel, FactorPanel)> {
    if !(0.0..1.0).contains(&ratio) || ratio == 0.0 {
        return Err(Error::config(format!(
            "split ratio {ratio} must lie strictly between 0 and 1"
        )));
    }
    let t = panel.n_pairs();
    // Guard the ceiling against representation noise in ratio * T.
    let train_len = ((ratio * t as f64) - 1e-9).ceil() as usize;
    if train_len == 0 || train_len >= t {
        return Err(Error::data(format!(
            "split of {t} pairs at ratio {ratio} leaves an empty side"
        )));
    }
    Ok((panel.slice(0..train_len)?, panel.slice(train_len..t)?))
}
