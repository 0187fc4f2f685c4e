//! Variance schedule tables for the forward/reverse diffusion chains.

use crate::error::{Error, Result};

/// Per-step schedule tables, 1-indexed through the accessors:
/// `beta(n)`, `alpha(n) = 1 - beta(n)`, `alpha_bar(n) = prod alpha(s)`,
/// and the reverse-step variance
/// `sigma2(n) = (1 - alpha_bar(n-1)) / (1 - alpha_bar(n)) * beta(n)`
/// under the convention `alpha_bar(0) = 1`, which makes `sigma2(1) = 0`
/// (the final reverse step is noiseless).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma2: Vec<f64>,
}

impl NoiseSchedule {
    pub fn n_steps(&self) -> usize {
        self.beta.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.beta.len() {
            return Err(Error::config(format!(
                "step index {n} outside 1..={}",
                self.beta.len()
            )));
        }
        Ok(())
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.beta[n - 1]
    }

    pub fn alpha(&self, n: usize) -> f64 {
        self.alpha[n - 1]
    }

    pub fn alpha_bar(&self, n: usize) -> f64 {
        self.alpha_bar[n - 1]
    }

    pub fn sigma2(&self, n: usize) -> f64 {
        self.sigma2[n - 1]
    }

    pub fn validate_step(&self, n: usize) -> Result<()> {
        self.check(n)
    }
}

/// Linear beta schedule from `beta_min` to `beta_max` inclusive over
/// `n_steps` steps, with all derived tables populated.
pub fn build_schedule(n_steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule> {
    if n_steps == 0 {
        return Err(Error::config("schedule needs at least one step"));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(Error::config(format!(
            "betas must satisfy 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
        )));
    }
    let beta: Vec<f64> = if n_steps == 1 {
        vec![beta_min]
    } else {
        (0..n_steps)
            .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (n_steps - 1) as f64)
            .collect()
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(n_steps);
    let mut prod = 1.0;
    for &a in &alpha {
        prod *= a;
        alpha_bar.push(prod);
    }
    let mut sigma2 = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let prev = if n == 0 { 1.0 } else { alpha_bar[n - 1] };
        sigma2.push((1.0 - prev) / (1.0 - alpha_bar[n]) * beta[n]);
    }
    Ok(NoiseSchedule {
        beta,
        alpha,
        alpha_bar,
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_tables_match_hand_computation() {
        let s = build_schedule(2, 0.1, 0.2).unwrap();
        assert_eq!(s.beta(1), 0.1);
        assert_eq!(s.beta(2), 0.2);
        // alpha_bar = (0.9, 0.72)
        assert!((s.alpha_bar(1) - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar(2) - 0.72).abs() < 1e-15);
        // sigma2(2) = (1 - 0.9) / (1 - 0.72) * 0.2 ~= 0.0714286
        assert!((s.sigma2(2) - 0.1 / 0.28 * 0.2).abs() < 1e-15);
        assert!((s.sigma2(2) - 0.0714286).abs() < 1e-6);
        // Final reverse step is noiseless by the alpha_bar(0) = 1 convention.
        assert_eq!(s.sigma2(1), 0.0);
    }

    #[test]
    fn constant_half_beta_gives_geometric_alpha_bar() {
        let s = build_schedule(20, 0.5, 0.5).unwrap();
        for n in 1..=20 {
            assert_eq!(s.alpha_bar(n), 0.5f64.powi(n as i32));
        }
    }

    #[test]
    fn recurrences_hold_bitwise() {
        let s = build_schedule(100, 1e-4, 0.12).unwrap();
        let mut prod = 1.0;
        for n in 1..=100 {
            assert_eq!(s.alpha(n), 1.0 - s.beta(n));
            prod *= s.alpha(n);
            assert_eq!(s.alpha_bar(n), prod, "alpha_bar recurrence broken at {n}");
            let prev = if n == 1 { 1.0 } else { s.alpha_bar(n - 1) };
            assert_eq!(s.sigma2(n), (1.0 - prev) / (1.0 - s.alpha_bar(n)) * s.beta(n));
            if n > 1 {
                assert!(s.alpha_bar(n) < s.alpha_bar(n - 1), "alpha_bar not decreasing");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn schedule_invariants_hold_for_any_valid_betas(
            n in 1usize..60,
            bmin in 1e-6f64..0.4,
            spread in 0.0f64..0.5,
        ) {
            let bmax = (bmin + spread).min(0.99);
            let s = build_schedule(n, bmin, bmax).unwrap();
            let mut prev = 1.0f64;
            for k in 1..=n {
                proptest::prop_assert!(s.beta(k) > 0.0 && s.beta(k) < 1.0);
                proptest::prop_assert!(s.alpha_bar(k) < prev);
                prev = s.alpha_bar(k);
                // q_sample interpolation: the signal coefficient decreases
                // in k while the noise coefficient increases.
                if k > 1 {
                    proptest::prop_assert!(s.alpha_bar(k).sqrt() < s.alpha_bar(k - 1).sqrt());
                    // Non-strict: 1 - alpha_bar saturates at 1.0 once
                    // alpha_bar drops below one ulp.
                    proptest::prop_assert!(
                        (1.0 - s.alpha_bar(k)).sqrt() >= (1.0 - s.alpha_bar(k - 1)).sqrt()
                    );
                }
            }
            proptest::prop_assert_eq!(s.sigma2(1), 0.0);
        }
    }

    #[test]
    fn out_of_range_betas_are_rejected() {
        assert!(build_schedule(0, 0.1, 0.2).is_err());
        assert!(build_schedule(10, 0.0, 0.2).is_err());
        assert!(build_schedule(10, 0.3, 0.2).is_err());
        assert!(build_schedule(10, 0.1, 1.0).is_err());
        assert!(build_schedule(1, 0.1, 0.9).map(|s| s.beta(1)).unwrap() == 0.1);
    }
}
