//! Ancestral sampling of conditional return vectors.
//!
//! Each of the S chains draws its noise from an independent ChaCha
//! substream indexed by the sample id (base seed, stream = chain index),
//! so results are reproducible regardless of batching or thread count,
//! and sampling S then truncating to S' equals sampling S' directly.
//!
//! Per-chain draw order: the initial `R^(N) ~ N(0, I)` (D values), then
//! the transition noises `z_n` for n = N..2 (D values each); the final
//! step n = 1 is noiseless (`sigma2(1) = 0`).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::denoiser::{build_forward, sinusoidal_features, stack_row_major, DenoiserParams};
use crate::diffusion::checkpoint::Checkpoint;
use crate::diffusion::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor};

/// Generated conditional samples: row s of `samples` is chain s's
/// `R^(0)`.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub condition: DMatrix<f64>,
    pub samples: DMatrix<f64>,
    pub seed: u64,
}

/// Chains per batched forward pass. Any value gives identical output
/// (row-wise ops plus per-chain attention groups); this only balances
/// throughput against per-graph memory.
const CHAIN_CHUNK: usize = 64;

/// Draw `count` independent reverse chains conditioned on `x`.
pub fn ancestral_sample(
    params: &DenoiserParams,
    schedule: &NoiseSchedule,
    x: &DMatrix<f64>,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::config("sample count must be >= 1"));
    }
    let cfg = params.config();
    let d = x.nrows();
    if d == 0 {
        return Err(Error::shape("condition matrix has zero rows"));
    }
    if x.ncols() != cfg.factor_dim {
        return Err(Error::shape(format!(
            "condition matrix has {} columns, model expects {}",
            x.ncols(),
            cfg.factor_dim
        )));
    }
    let n_steps = schedule.n_steps();

    // Pre-draw every chain's noise from its own substream.
    let draws: Vec<Vec<f64>> = (0..count)
        .map(|chain| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chain as u64);
            (0..d * n_steps).map(|_| rng.sample(StandardNormal)).collect()
        })
        .collect();

    let x_flat = stack_row_major(x);
    let chunk_ranges: Vec<(usize, usize)> = (0..count)
        .step_by(CHAIN_CHUNK)
        .map(|lo| (lo, (lo + CHAIN_CHUNK).min(count)))
        .collect();
    let chunk_results: Vec<Vec<f64>> = chunk_ranges
        .par_iter()
        .map(|&(lo, hi)| run_chunk(params, schedule, &x_flat, d, &draws[lo..hi]))
        .collect::<Result<Vec<_>>>()?;

    let mut samples = DMatrix::zeros(count, d);
    let mut row = 0usize;
    for chunk in chunk_results {
        for chain in chunk.chunks_exact(d) {
            for (i, &v) in chain.iter().enumerate() {
                samples[(row, i)] = v;
            }
            row += 1;
        }
    }
    Ok(SampleSet {
        condition: x.clone(),
        samples,
        seed,
    })
}

fn run_chunk(
    params: &DenoiserParams,
    schedule: &NoiseSchedule,
    x_flat: &[f64],
    d: usize,
    draws: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let cfg = params.config();
    let b = draws.len();
    let n_steps = schedule.n_steps();

    // R^(N) from each chain's first D draws.
    let mut state: Vec<f64> = Vec::with_capacity(b * d);
    for chain in draws {
        state.extend_from_slice(&chain[0..d]);
    }
    let mut fac_flat = Vec::with_capacity(b * x_flat.len());
    for _ in 0..b {
        fac_flat.extend_from_slice(x_flat);
    }

    for n in (1..=n_steps).rev() {
        let sin = sinusoidal_features(n, cfg.d_model)?;
        let mut sin_flat = Vec::with_capacity(b * cfg.d_model);
        for _ in 0..b {
            sin_flat.extend_from_slice(&sin);
        }
        let mut g = Graph::new();
        let bound = params.bind(&mut g, false)?;
        let noisy = g.input(Tensor::matrix(b * d, 1, state.clone())?)?;
        let sin_node = g.input(Tensor::matrix(b, cfg.d_model, sin_flat)?)?;
        let fac_node = g.input(Tensor::matrix(b * d, cfg.factor_dim, fac_flat.clone())?)?;
        let out = build_forward(&mut g, cfg, &bound, params.slots(), noisy, sin_node, fac_node, d)?;
        let eps_hat = g.value(out).data();

        let alpha = schedule.alpha(n);
        let coef = schedule.beta(n) / (1.0 - schedule.alpha_bar(n)).sqrt();
        let inv_sqrt_alpha = 1.0 / alpha.sqrt();
        let sigma = schedule.sigma2(n).sqrt();
        for (c, chain) in draws.iter().enumerate() {
            for i in 0..d {
                let idx = c * d + i;
                let mut v = inv_sqrt_alpha * (state[idx] - coef * eps_hat[idx]);
                if n >= 2 {
                    // z_n sits at offset D * (1 + (N - n)) in the chain's draws.
                    v += sigma * chain[d * (1 + n_steps - n) + i];
                }
                state[idx] = v;
            }
        }
    }
    Ok(state)
}

impl Checkpoint {
    /// Sample through the stored model, undoing return standardization
    /// when the checkpoint carries a scale.
    pub fn sample(&self, x: &DMatrix<f64>, count: usize, seed: u64) -> Result<SampleSet> {
        let schedule = self.schedule()?;
        let mut set = ancestral_sample(&self.params, &schedule, x, count, seed)?;
        if let Some(rs) = &self.return_scale {
            if rs.mean.len() != x.nrows() {
                return Err(Error::shape(format!(
                    "return scale covers {} assets, condition has {}",
                    rs.mean.len(),
                    x.nrows()
                )));
            }
            for s in 0..set.samples.nrows() {
                for i in 0..set.samples.ncols() {
                    set.samples[(s, i)] = rs.mean[i] + rs.std[i] * set.samples[(s, i)];
                }
            }
        }
        Ok(set)
    }
}
