//! The training loop: seeded shuffled batches, Monte-Carlo loss, Adam.

use std::path::PathBuf;

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::FactorPanel;
use crate::denoiser::{DenoiserParams, DiTConfig};
use crate::diffusion::checkpoint::{Checkpoint, ReturnScale};
use crate::diffusion::loss::denoising_loss;
use crate::diffusion::schedule::build_schedule;
use crate::error::{Error, Result};
use crate::numerics::AdamState;

/// Training hyperparameters. Defaults: 30 epochs, batch 16, learning
/// rate 0.003, N = 100 diffusion steps with betas linear on
/// [1e-4, 0.12]. Returns are used in raw (winsorized) units unless
/// `standardize_returns` switches on per-asset z-scaling (the inverse
/// transform is stored in the checkpoint).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub seed: u64,
    pub standardize_returns: bool,
    /// Global-norm gradient clip. Rare large-gradient batches otherwise
    /// destabilize small-batch Adam runs.
    pub grad_clip: Option<f64>,
    /// When set, a checkpoint is written after every epoch (last wins).
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.003,
            n_steps: 100,
            beta_min: 1e-4,
            beta_max: 0.12,
            seed: 1,
            standardize_returns: false,
            grad_clip: Some(1.0),
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.n_steps == 0 {
            return Err(Error::config("epochs, batch_size and n_steps must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max && self.beta_max < 1.0) {
            return Err(Error::config("betas must satisfy 0 < beta_min <= beta_max < 1"));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config("grad_clip must be positive when set"));
            }
        }
        Ok(())
    }
}

/// Per-epoch mean losses and the total optimizer step count.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// Train the denoiser on a clean panel. Runs
/// `epochs x ceil(T / batch_size)` Adam steps over seeded shuffled
/// batches; bit-identical given (config, seed).
pub fn train(panel: &FactorPanel, dit: &DiTConfig, cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    cfg.validate()?;
    dit.validate()?;
    panel.validate_clean()?;
    if panel.n_factors() != dit.factor_dim {
        return Err(Error::config(format!(
            "panel has {} factors, architecture expects {}",
            panel.n_factors(),
            dit.factor_dim
        )));
    }
    let t = panel.n_pairs();
    let schedule = build_schedule(cfg.n_steps, cfg.beta_min, cfg.beta_max)?;

    // Optional per-asset z-scaling of returns, inverse stored for sampling.
    let d = panel.n_assets();
    let (scaled_returns, return_scale) = if cfg.standardize_returns {
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for i in 0..d {
            let m = (0..t).map(|ti| panel.returns_at(ti)[i]).sum::<f64>() / t as f64;
            let v = (0..t)
                .map(|ti| {
                    let x = panel.returns_at(ti)[i] - m;
                    x * x
                })
                .sum::<f64>()
                / (t.max(2) - 1) as f64;
            mean[i] = m;
            std[i] = if v > 0.0 { v.sqrt() } else { 1.0 };
        }
        let scaled: Vec<Vec<f64>> = (0..t)
            .map(|ti| {
                (0..d)
                    .map(|i| (panel.returns_at(ti)[i] - mean[i]) / std[i])
                    .collect()
            })
            .collect();
        (scaled, Some(ReturnScale { mean, std }))
    } else {
        let raw: Vec<Vec<f64>> = (0..t)
            .map(|ti| panel.returns_at(ti).iter().cloned().collect())
            .collect();
        (raw, None)
    };

    let mut params = DenoiserParams::init(dit, cfg.seed)?;
    let mut adam = AdamState::new(params.len(), cfg.learning_rate);
    // Stream 1 for the training loop; stream 0 was parameter init.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut order: Vec<usize> = (0..t).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut steps: u64 = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&nalgebra::DMatrix<f64>, &[f64])> = chunk
                .iter()
                .map(|&i| (panel.factors_at(i), scaled_returns[i].as_slice()))
                .collect();
            let (loss, mut grads) = denoising_loss(&params, &batch, &schedule, &mut rng)
                .map_err(|e| Error::numeric(format!("optimizer step {steps}: {e}")))?;
            if !loss.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite loss at optimizer step {steps}"
                )));
            }
            if let Some(clip) = cfg.grad_clip {
                let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > clip {
                    let scale = clip / norm;
                    for g in grads.iter_mut() {
                        *g *= scale;
                    }
                }
            }
            adam.step(params.flat_mut(), &grads)?;
            steps += 1;
            epoch_loss += loss;
            batches += 1;
        }
        let mean_loss = epoch_loss / batches as f64;
        epoch_losses.push(mean_loss);
        log::info!("epoch {:>3}: loss {mean_loss:.6}", epoch + 1);
        if let Some(path) = &cfg.checkpoint_path {
            let ckpt = Checkpoint {
                dit: dit.clone(),
                train: cfg.clone(),
                params: params.clone(),
                return_scale: return_scale.clone(),
            };
            ckpt.save(path)?;
        }
    }

    let ckpt = Checkpoint {
        dit: dit.clone(),
        train: cfg.clone(),
        params,
        return_scale,
    };
    Ok((ckpt, TrainReport { epoch_losses, steps }))
}
