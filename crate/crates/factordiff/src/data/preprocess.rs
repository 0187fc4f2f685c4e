//! Cross-sectional preprocessing: per-day factor standardization with
//! 3-sigma winsorization and mean imputation, plus raw-unit return
//! winsorization. All statistics are taken across assets within one day,
//! never across time.

use nalgebra::{DMatrix, DVector};

use crate::data::FactorPanel;
use crate::error::{Error, Result};

/// What preprocessing had to patch up on one day.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreprocessFlags {
    /// Columns with zero cross-sectional std (set to all-zero z-scores).
    pub constant_columns: Vec<usize>,
    /// Columns with fewer than two observed values (zero-filled).
    pub sparse_columns: Vec<usize>,
    /// Count of imputed factor cells.
    pub imputed: usize,
    /// Count of clipped factor cells.
    pub clipped_factors: usize,
    /// Count of winsorized return entries.
    pub clipped_returns: usize,
}

/// Clean one day: factors are standardized across assets (observed
/// entries only), missing cells imputed to the cross-sectional mean
/// (z-score 0), and z-scores clipped to [-3, 3]. Returns are winsorized
/// at mean +/- 3 sample std in raw units, not standardized. NaN marks a
/// missing factor cell on input.
pub fn preprocess_day(
    raw_factors: &DMatrix<f64>,
    raw_returns: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>, PreprocessFlags)> {
    let (d, k) = (raw_factors.nrows(), raw_factors.ncols());
    if raw_returns.len() != d {
        return Err(Error::shape(format!(
            "factor rows {d} do not match return length {}",
            raw_returns.len()
        )));
    }
    if let Some(i) = raw_returns.iter().position(|v| !v.is_finite()) {
        return Err(Error::data(format!(
            "missing or non-finite return for asset index {i}"
        )));
    }
    let mut flags = PreprocessFlags::default();
    let mut factors = DMatrix::zeros(d, k);

    for col in 0..k {
        let observed: Vec<f64> = (0..d)
            .map(|i| raw_factors[(i, col)])
            .filter(|v| v.is_finite())
            .collect();
        if observed.len() < 2 {
            flags.sparse_columns.push(col);
            continue; // column stays all-zero
        }
        let n = observed.len() as f64;
        let mean = observed.iter().sum::<f64>() / n;
        let var = observed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        if std == 0.0 {
            flags.constant_columns.push(col);
            flags.imputed += (0..d).filter(|&i| !raw_factors[(i, col)].is_finite()).count();
            continue; // constant column: all z-scores zero
        }
        for i in 0..d {
            let v = raw_factors[(i, col)];
            if !v.is_finite() {
                flags.imputed += 1;
                // imputed to the mean, i.e. z-score exactly 0
                continue;
            }
            let z = (v - mean) / std;
            let clipped = z.clamp(-3.0, 3.0);
            if clipped != z {
                flags.clipped_factors += 1;
            }
            factors[(i, col)] = clipped;
        }
    }

    let mut returns = raw_returns.clone();
    if d >= 2 {
        let n = d as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        let (lo, hi) = (mean - 3.0 * std, mean + 3.0 * std);
        for v in returns.iter_mut() {
            let w = v.clamp(lo, hi);
            if w != *v {
                flags.clipped_returns += 1;
                *v = w;
            }
        }
    }

    Ok((factors, returns, flags))
}

/// Apply [`preprocess_day`] to every pair of a panel.
pub fn preprocess_panel(panel: &FactorPanel) -> Result<(FactorPanel, Vec<PreprocessFlags>)> {
    let mut factors = Vec::with_capacity(panel.n_pairs());
    let mut returns = Vec::with_capacity(panel.n_pairs());
    let mut all_flags = Vec::with_capacity(panel.n_pairs());
    for t in 0..panel.n_pairs() {
        let (f, r, flags) = preprocess_day(panel.factors_at(t), panel.returns_at(t))?;
        if !flags.sparse_columns.is_empty() || !flags.constant_columns.is_empty() {
            log::warn!(
                "{}: sparse columns {:?}, constant columns {:?}",
                panel.factor_date(t),
                flags.sparse_columns,
                flags.constant_columns
            );
        }
        factors.push(f);
        returns.push(r);
        all_flags.push(flags);
    }
    let clean = FactorPanel::new(
        panel.asset_ids().to_vec(),
        (0..panel.n_pairs()).map(|t| panel.factor_date(t).to_string()).collect(),
        (0..panel.n_pairs()).map(|t| panel.return_date(t).to_string()).collect(),
        factors,
        returns,
    )?;
    Ok((clean, all_flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_of_one_two_three_standardizes_to_unit_steps() {
        let f = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let r = DVector::zeros(3);
        let (z, _, flags) = preprocess_day(&f, &r).unwrap();
        // Sample std of (1,2,3) is exactly 1.
        assert!((z[(0, 0)] + 1.0).abs() < 1e-14);
        assert!(z[(1, 0)].abs() < 1e-14);
        assert!((z[(2, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(flags.clipped_factors, 0);
    }

    #[test]
    fn outlier_is_clipped_to_three() {
        // Column engineered so one value has |z| > 3.
        let mut vals = vec![0.0; 12];
        vals[11] = 10.0;
        let f = DMatrix::from_column_slice(12, 1, &vals);
        let r = DVector::zeros(12);
        let (z, _, flags) = preprocess_day(&f, &r).unwrap();
        assert_eq!(flags.clipped_factors, 1);
        assert!((z[(11, 0)] - 3.0).abs() < 1e-14);
        assert!(z.iter().all(|v| v.abs() <= 3.0));
    }

    #[test]
    fn missing_cell_imputes_to_zero_z_score() {
        let f = DMatrix::from_column_slice(3, 1, &[1.0, f64::NAN, 5.0]);
        let r = DVector::zeros(3);
        let (z, _, flags) = preprocess_day(&f, &r).unwrap();
        assert_eq!(flags.imputed, 1);
        assert_eq!(z[(1, 0)], 0.0);
    }

    #[test]
    fn constant_column_is_flagged_and_zeroed() {
        let f = DMatrix::from_column_slice(3, 1, &[2.0, 2.0, 2.0]);
        let r = DVector::zeros(3);
        let (z, _, flags) = preprocess_day(&f, &r).unwrap();
        assert_eq!(flags.constant_columns, vec![0]);
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sparse_column_is_zero_filled_with_warning_flag() {
        let f = DMatrix::from_column_slice(3, 1, &[1.0, f64::NAN, f64::NAN]);
        let r = DVector::zeros(3);
        let (z, _, flags) = preprocess_day(&f, &r).unwrap();
        assert_eq!(flags.sparse_columns, vec![0]);
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn returns_are_winsorized_in_raw_units() {
        let f = DMatrix::zeros(12, 1);
        let mut vals = vec![0.001; 12];
        vals[0] = 0.5; // far outside mean + 3 std
        let r = DVector::from_vec(vals);
        let (_, w, flags) = preprocess_day(&f, &r).unwrap();
        assert_eq!(flags.clipped_returns, 1);
        assert!(w[0] < 0.5);
        // Everything else untouched.
        for i in 1..12 {
            assert_eq!(w[i], 0.001);
        }
    }

    #[test]
    fn post_conditions_mean_zero_and_bounded() {
        let mut raw = DMatrix::from_fn(20, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        raw[(3, 1)] = f64::NAN;
        raw[(7, 2)] = 40.0; // outlier
        let r = DVector::from_fn(20, |i, _| 0.001 * i as f64);
        let (z, _, _) = preprocess_day(&raw, &r).unwrap();
        for col in 0..3 {
            let mean: f64 = (0..20).map(|i| z[(i, col)]).sum::<f64>() / 20.0;
            // Imputed entries sit at exactly 0; clipping can shift the mean
            // slightly, so the bound is loose only where clipping occurred.
            assert!(mean.abs() < 0.2, "col {col} mean {mean}");
            assert!((0..20).all(|i| z[(i, col)].abs() <= 3.0));
        }
    }

    #[test]
    fn idempotent_on_clean_standardized_data() {
        // Already standardized column within clip bounds: a second pass only
        // re-standardizes an already unit-variance column.
        let f = DMatrix::from_column_slice(5, 1, &[-1.2649, -0.6325, 0.0, 0.6325, 1.2649]);
        let r = DVector::from_column_slice(&[0.01, -0.01, 0.0, 0.02, -0.02]);
        let (z1, r1, flags1) = preprocess_day(&f, &r).unwrap();
        let (z2, r2, flags2) = preprocess_day(&z1, &r1).unwrap();
        assert_eq!(flags1.clipped_factors, 0);
        assert_eq!(flags2.clipped_factors, 0);
        assert_eq!(r1, r2);
        // Output std exactly 1 after the second pass.
        let mean: f64 = z2.column(0).iter().sum::<f64>() / 5.0;
        let var: f64 = z2.column(0).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
        for (a, b) in z1.iter().zip(z2.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_return_is_an_error() {
        let f = DMatrix::zeros(2, 1);
        let r = DVector::from_column_slice(&[0.01, f64::NAN]);
        assert!(preprocess_day(&f, &r).is_err());
    }
}
