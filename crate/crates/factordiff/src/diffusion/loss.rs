//! Forward noising and the single-step Monte-Carlo training objective:
//! per batch element draw `n` uniform on {1..N} and a standard normal
//! `eps`, then score `||eps - eps_theta(q_sample(r0, n, eps), n; X)||^2`
//! and average over the batch.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::denoiser::{build_forward, sinusoidal_features, stack_row_major, DenoiserParams};
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor};

/// Closed-form forward noising:
/// `sqrt(alpha_bar_n) r0 + sqrt(1 - alpha_bar_n) eps`.
pub fn q_sample(schedule: &NoiseSchedule, r0: &[f64], n: usize, eps: &[f64]) -> Result<Vec<f64>> {
    schedule.validate_step(n)?;
    if r0.len() != eps.len() {
        return Err(Error::shape(format!(
            "r0 length {} does not match eps length {}",
            r0.len(),
            eps.len()
        )));
    }
    let ab = schedule.alpha_bar(n);
    let (s_sig, s_noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(r0
        .iter()
        .zip(eps)
        .map(|(r, e)| s_sig * r + s_noise * e)
        .collect())
}

/// The per-element (step, noise) draw of the Monte-Carlo loss estimate.
#[derive(Debug, Clone)]
pub struct NoiseAssignment {
    pub step: usize,
    pub eps: Vec<f64>,
}

/// Draw one (n, eps) pair per batch element from `rng` (sequential,
/// deterministic given the rng state).
pub fn draw_assignments(
    schedule: &NoiseSchedule,
    d_assets: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<NoiseAssignment> {
    (0..count)
        .map(|_| NoiseAssignment {
            step: rng.gen_range(1..=schedule.n_steps()),
            eps: (0..d_assets).map(|_| rng.sample(StandardNormal)).collect(),
        })
        .collect()
}

/// Loss value implied by a set of assignments and the model's noise
/// predictions: mean over elements of the squared error. This is the
/// same reduction the differentiable path uses.
pub fn loss_for_predictions(assignments: &[NoiseAssignment], predictions: &[Vec<f64>]) -> f64 {
    let b = assignments.len() as f64;
    assignments
        .iter()
        .zip(predictions)
        .map(|(a, p)| {
            a.eps
                .iter()
                .zip(p)
                .map(|(e, q)| (e - q) * (e - q))
                .sum::<f64>()
        })
        .sum::<f64>()
        / b
}

/// Differentiable batch loss at fixed assignments. Returns the scalar
/// loss and the flat parameter gradient.
pub fn denoising_loss_with(
    params: &DenoiserParams,
    batch: &[(&DMatrix<f64>, &[f64])],
    schedule: &NoiseSchedule,
    assignments: &[NoiseAssignment],
) -> Result<(f64, Vec<f64>)> {
    let cfg = params.config();
    let b = batch.len();
    if b == 0 {
        return Err(Error::data("empty training batch"));
    }
    if assignments.len() != b {
        return Err(Error::shape("one noise assignment per batch element required"));
    }
    let d = batch[0].1.len();
    let mut noisy_flat = Vec::with_capacity(b * d);
    let mut eps_flat = Vec::with_capacity(b * d);
    let mut fac_flat = Vec::with_capacity(b * d * cfg.factor_dim);
    let mut sin_flat = Vec::with_capacity(b * cfg.d_model);
    for ((x, r0), a) in batch.iter().zip(assignments) {
        if r0.len() != d || x.nrows() != d {
            return Err(Error::shape(format!(
                "batch element dimensions differ: expected {d} assets, got returns {} / factors {}",
                r0.len(),
                x.nrows()
            )));
        }
        if x.ncols() != cfg.factor_dim {
            return Err(Error::shape(format!(
                "factor matrix has {} columns, model expects {}",
                x.ncols(),
                cfg.factor_dim
            )));
        }
        if a.eps.len() != d {
            return Err(Error::shape("noise assignment dimension mismatch"));
        }
        let noisy = q_sample(schedule, r0, a.step, &a.eps)?;
        noisy_flat.extend_from_slice(&noisy);
        eps_flat.extend_from_slice(&a.eps);
        fac_flat.extend_from_slice(&stack_row_major(x));
        sin_flat.extend_from_slice(&sinusoidal_features(a.step, cfg.d_model)?);
    }

    let mut g = Graph::new();
    let bound = params.bind(&mut g, true)?;
    let noisy_node = g.input(Tensor::matrix(b * d, 1, noisy_flat)?)?;
    let sin_node = g.input(Tensor::matrix(b, cfg.d_model, sin_flat)?)?;
    let fac_node = g.input(Tensor::matrix(b * d, cfg.factor_dim, fac_flat)?)?;
    let out = build_forward(
        &mut g,
        cfg,
        &bound,
        params.slots(),
        noisy_node,
        sin_node,
        fac_node,
        d,
    )?;
    let eps_node = g.input(Tensor::matrix(b * d, 1, eps_flat)?)?;
    let se = g.squared_error(out, eps_node)?;
    let loss = g.scale(se, 1.0 / b as f64)?;
    let grads = g.backward(loss)?;
    Ok((g.value(loss).item()?, params.gather_grads(&bound, &grads)))
}

/// Monte-Carlo training loss: draws one (n, eps) per element from `rng`,
/// then evaluates [`denoising_loss_with`].
pub fn denoising_loss(
    params: &DenoiserParams,
    batch: &[(&DMatrix<f64>, &[f64])],
    schedule: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::data("empty training batch"));
    }
    let d = batch[0].1.len();
    let assignments = draw_assignments(schedule, d, batch.len(), rng);
    denoising_loss_with(params, batch, schedule, &assignments)
}
