//! Check the analytic gradient of the denoising loss against central
//! finite differences, at random init and after a few optimizer steps.
//!
//!     cargo run -p factordiff --example gradient_check

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use factordiff::denoiser::{DenoiserParams, DiTConfig};
use factordiff::diffusion::{build_schedule, denoising_loss_with, draw_assignments};
use factordiff::numerics::{finite_diff_check, AdamState};

fn main() -> factordiff::Result<()> {
    let cfg = DiTConfig {
        factor_dim: 2,
        d_model: 16,
        heads: 2,
        depth: 2,
        ffn_mult: 2,
        cond_hidden: 16,
    };
    let schedule = build_schedule(10, 0.01, 0.2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // A small batch of (factor matrix, next-day returns) pairs.
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

    let mut params = DenoiserParams::init(&cfg, 3)?;
    for stage in ["random init", "after 10 Adam steps"] {
        let (loss, analytic) = denoising_loss_with(&params, &batch, &schedule, &assignments)?;
        let eval = |p: &[f64]| {
            let trial = DenoiserParams::from_flat(&cfg, p.to_vec())?;
            Ok(denoising_loss_with(&trial, &batch, &schedule, &assignments)?.0)
        };
        let coords: Vec<usize> = (0..60).map(|_| rng.gen_range(0..params.len())).collect();
        let err = finite_diff_check(eval, &analytic, params.flat(), 1e-5, &coords)?;
        println!("{stage}: loss {loss:.6}, max relative gradient error {err:.2e}");

        if stage == "random init" {
            let mut adam = AdamState::new(params.len(), 0.003);
            for _ in 0..10 {
                let (_, grads) = denoising_loss_with(&params, &batch, &schedule, &assignments)?;
                adam.step(params.flat_mut(), &grads)?;
            }
        }
    }
    Ok(())
}
