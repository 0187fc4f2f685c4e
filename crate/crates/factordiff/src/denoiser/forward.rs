//! Forward pass assembly on the autodiff graph.
//!
//! The batched layout stacks B token sets of D assets each into
//! `[B * D, d_model]` matrices. Every op except attention acts row-wise,
//! and attention is grouped per consecutive block of D rows, so batched
//! evaluation is numerically identical to element-at-a-time evaluation.

use nalgebra::DMatrix;

use crate::denoiser::{BlockSlots, BoundParams, DenoiserParams, DiTConfig, Slots};
use crate::error::{Error, Result};
use crate::numerics::{Graph, NodeId, Tensor};

/// Sinusoidal features of a diffusion step: `dim/2` cosine and `dim/2`
/// sine components with geometrically spaced frequencies in
/// `[1/10000, 1]`. All entries lie in `[-1, 1]`.
pub fn sinusoidal_features(n: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::config(format!(
            "sinusoidal feature dim {dim} must be even and positive"
        )));
    }
    if n == 0 {
        return Err(Error::config("diffusion step index starts at 1"));
    }
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10_000.0f64.ln()) * i as f64 / half as f64).exp();
        let arg = n as f64 * freq;
        out[i] = arg.cos();
        out[half + i] = arg.sin();
    }
    Ok(out)
}

/// Row-major flattening of a (column-major) nalgebra matrix.
pub(crate) fn stack_row_major(x: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = (x.nrows(), x.ncols());
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(x[(i, j)]);
        }
    }
    out
}

fn linear(g: &mut Graph, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
    let t = g.matmul(x, w)?;
    g.add_row_broadcast(t, b)
}

/// Two-layer MLP with GELU between the layers.
fn mlp2(
    g: &mut Graph,
    x: NodeId,
    w1: NodeId,
    b1: NodeId,
    w2: NodeId,
    b2: NodeId,
) -> Result<NodeId> {
    let h = linear(g, x, w1, b1)?;
    let h = g.gelu(h)?;
    linear(g, h, w2, b2)
}

/// Multi-head self-attention over each consecutive block of `d_assets`
/// rows, with 1/sqrt(d_model/heads) score scaling and no positional
/// encoding.
fn attention(
    g: &mut Graph,
    cfg: &DiTConfig,
    bound: &BoundParams,
    bs: &BlockSlots,
    x: NodeId,
    d_assets: usize,
) -> Result<NodeId> {
    let q = linear(g, x, bound.node(bs.wq), bound.node(bs.bq))?;
    let k = linear(g, x, bound.node(bs.wk), bound.node(bs.bk))?;
    let v = linear(g, x, bound.node(bs.wv), bound.node(bs.bv))?;
    let dk = cfg.d_model / cfg.heads;
    let mut heads = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let (lo, hi) = (h * dk, (h + 1) * dk);
        let qh = g.slice_cols(q, lo, hi)?;
        let kh = g.slice_cols(k, lo, hi)?;
        let vh = g.slice_cols(v, lo, hi)?;
        heads.push(g.grouped_attention(qh, kh, vh, d_assets)?);
    }
    let cat = g.concat_cols(&heads)?;
    linear(g, cat, bound.node(bs.wo), bound.node(bs.bo))
}

/// One DiT block with per-token AdaLN-Zero modulation.
///
/// `mod_in` is `gelu(C)`; the modulation layer maps it to
/// (shift1, scale1, gate1, shift2, scale2, gate2) per token.
fn block_forward(
    g: &mut Graph,
    cfg: &DiTConfig,
    bound: &BoundParams,
    bs: &BlockSlots,
    tokens: NodeId,
    mod_in: NodeId,
    d_assets: usize,
) -> Result<NodeId> {
    let dm = cfg.d_model;
    let m = linear(g, mod_in, bound.node(bs.mod_w), bound.node(bs.mod_b))?;
    let shift1 = g.slice_cols(m, 0, dm)?;
    let scale1 = g.slice_cols(m, dm, 2 * dm)?;
    let gate1 = g.slice_cols(m, 2 * dm, 3 * dm)?;
    let shift2 = g.slice_cols(m, 3 * dm, 4 * dm)?;
    let scale2 = g.slice_cols(m, 4 * dm, 5 * dm)?;
    let gate2 = g.slice_cols(m, 5 * dm, 6 * dm)?;

    // tokens += gate1 .* Attn((1 + scale1) .* LN(tokens) + shift1)
    let h = g.layer_norm_rows(tokens)?;
    let s1 = g.offset(scale1, 1.0)?;
    let h = g.mul(h, s1)?;
    let h = g.add(h, shift1)?;
    let a = attention(g, cfg, bound, bs, h, d_assets)?;
    let a = g.mul(gate1, a)?;
    let tokens = g.add(tokens, a)?;

    // tokens += gate2 .* FFN((1 + scale2) .* LN(tokens) + shift2)
    let h = g.layer_norm_rows(tokens)?;
    let s2 = g.offset(scale2, 1.0)?;
    let h = g.mul(h, s2)?;
    let h = g.add(h, shift2)?;
    let f = mlp2(
        g,
        h,
        bound.node(bs.fw1),
        bound.node(bs.fb1),
        bound.node(bs.fw2),
        bound.node(bs.fb2),
    )?;
    let f = g.mul(gate2, f)?;
    g.add(tokens, f)
}

/// Assemble the full noise-prediction network on `g`.
///
/// - `noisy`: `[B * D, 1]` noisy returns, one token per row;
/// - `sinusoid`: `[B, d_model]` sinusoidal step features, one row per
///   batch element (repeated across that element's D tokens internally);
/// - `factors`: `[B * D, K]` per-token factor vectors.
///
/// Returns the `[B * D, 1]` predicted noise.
pub(crate) fn build_forward(
    g: &mut Graph,
    cfg: &DiTConfig,
    bound: &BoundParams,
    slots: &Slots,
    noisy: NodeId,
    sinusoid: NodeId,
    factors: NodeId,
    d_assets: usize,
) -> Result<NodeId> {
    let (rows, one) = g.value(noisy).dims2()?;
    if one != 1 {
        return Err(Error::shape("noisy returns must be a [rows, 1] matrix"));
    }
    let (b, sdim) = g.value(sinusoid).dims2()?;
    if sdim != cfg.d_model {
        return Err(Error::shape(format!(
            "sinusoid width {sdim} must equal d_model {}",
            cfg.d_model
        )));
    }
    if d_assets == 0 || rows != b * d_assets {
        return Err(Error::shape(format!(
            "row count {rows} does not equal batch {b} x assets {d_assets}"
        )));
    }
    let (frows, k) = g.value(factors).dims2()?;
    if frows != rows {
        return Err(Error::shape("factor rows must match token rows"));
    }
    if k != cfg.factor_dim {
        return Err(Error::shape(format!(
            "factor dim {k} does not match configured {}",
            cfg.factor_dim
        )));
    }

    // Step embedding e_n, shared by all tokens of a batch element.
    let e = mlp2(
        g,
        sinusoid,
        bound.node(slots.time_w1),
        bound.node(slots.time_b1),
        bound.node(slots.time_w2),
        bound.node(slots.time_b2),
    )?;
    let e_rows = g.repeat_rows(e, d_assets)?;

    // Token-wise condition c_i = MLP(x_i) + e_n.
    let cm = mlp2(
        g,
        factors,
        bound.node(slots.cond_w1),
        bound.node(slots.cond_b1),
        bound.node(slots.cond_w2),
        bound.node(slots.cond_b2),
    )?;
    let cond = g.add(cm, e_rows)?;
    let mod_in = g.gelu(cond)?;

    // Scalar return -> token embedding.
    let mut tokens = linear(g, noisy, bound.node(slots.token_w), bound.node(slots.token_b))?;

    for bs in &slots.blocks {
        tokens = block_forward(g, cfg, bound, bs, tokens, mod_in, d_assets)?;
    }

    // Final AdaLN-style shift/scale, then the linear head to one scalar
    // per token.
    let dm = cfg.d_model;
    let fm = linear(
        g,
        mod_in,
        bound.node(slots.final_mod_w),
        bound.node(slots.final_mod_b),
    )?;
    let fshift = g.slice_cols(fm, 0, dm)?;
    let fscale = g.slice_cols(fm, dm, 2 * dm)?;
    let h = g.layer_norm_rows(tokens)?;
    let fs = g.offset(fscale, 1.0)?;
    let h = g.mul(h, fs)?;
    let h = g.add(h, fshift)?;
    linear(g, h, bound.node(slots.head_w), bound.node(slots.head_b))
}

/// Post-projection step embedding e_n (sinusoidal features through the
/// learned two-layer MLP).
pub fn timestep_embedding(params: &DenoiserParams, n: usize) -> Result<Vec<f64>> {
    let cfg = params.config();
    let sin = sinusoidal_features(n, cfg.d_model)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false)?;
    let slots = params.slots();
    let s = g.input(Tensor::matrix(1, cfg.d_model, sin)?)?;
    let e = mlp2(
        &mut g,
        s,
        bound.node(slots.time_w1),
        bound.node(slots.time_b1),
        bound.node(slots.time_w2),
        bound.node(slots.time_b2),
    )?;
    Ok(g.value(e).data().to_vec())
}

/// Condition matrix C with rows c_i = MLP(x_i) + e_n. The MLP is shared
/// across assets and e_n is identical across rows.
pub fn condition_vectors(params: &DenoiserParams, x: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let cfg = params.config();
    if x.ncols() != cfg.factor_dim {
        return Err(Error::shape(format!(
            "factor matrix has {} columns, model expects {}",
            x.ncols(),
            cfg.factor_dim
        )));
    }
    let d = x.nrows();
    let sin = sinusoidal_features(n, cfg.d_model)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false)?;
    let slots = params.slots();
    let s = g.input(Tensor::matrix(1, cfg.d_model, sin)?)?;
    let e = mlp2(
        &mut g,
        s,
        bound.node(slots.time_w1),
        bound.node(slots.time_b1),
        bound.node(slots.time_w2),
        bound.node(slots.time_b2),
    )?;
    let e_rows = g.repeat_rows(e, d)?;
    let xf = g.input(Tensor::matrix(d, cfg.factor_dim, stack_row_major(x))?)?;
    let cm = mlp2(
        &mut g,
        xf,
        bound.node(slots.cond_w1),
        bound.node(slots.cond_b1),
        bound.node(slots.cond_w2),
        bound.node(slots.cond_b2),
    )?;
    let cond = g.add(cm, e_rows)?;
    let data = g.value(cond).data();
    Ok(DMatrix::from_row_slice(d, cfg.d_model, data))
}

/// Run one DiT block outside the full network: `tokens` and `cond` are
/// `D x d_model`; `cond` is the raw condition matrix (the block applies
/// its own GELU before the modulation layer).
pub fn dit_block(
    params: &DenoiserParams,
    block: usize,
    tokens: &DMatrix<f64>,
    cond: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let cfg = params.config();
    if block >= cfg.depth {
        return Err(Error::config(format!(
            "block index {block} out of range for depth {}",
            cfg.depth
        )));
    }
    let d = tokens.nrows();
    if tokens.ncols() != cfg.d_model || cond.nrows() != d || cond.ncols() != cfg.d_model {
        return Err(Error::shape(format!(
            "dit_block expects [{d} x {dm}] tokens and conditions, got {}x{} and {}x{}",
            tokens.nrows(),
            tokens.ncols(),
            cond.nrows(),
            cond.ncols(),
            dm = cfg.d_model
        )));
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false)?;
    let slots = params.slots();
    let t = g.input(Tensor::matrix(d, cfg.d_model, stack_row_major(tokens))?)?;
    let c = g.input(Tensor::matrix(d, cfg.d_model, stack_row_major(cond))?)?;
    let mod_in = g.gelu(c)?;
    let out = block_forward(&mut g, cfg, &bound, &slots.blocks[block], t, mod_in, d)?;
    let data = g.value(out).data();
    Ok(DMatrix::from_row_slice(d, cfg.d_model, data))
}

/// Predicted noise for one (noisy returns, step, factor matrix) triple.
pub fn denoise_forward(
    params: &DenoiserParams,
    noisy: &[f64],
    n: usize,
    x: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let mut out = denoise_forward_batch(params, &[noisy.to_vec()], &[n], &[x.clone()])?;
    Ok(out.pop().expect("batch of one"))
}

/// Batched noise prediction; element `i` pairs `noisy[i]`, `steps[i]`,
/// `xs[i]`. All elements must share the asset count.
pub fn denoise_forward_batch(
    params: &DenoiserParams,
    noisy: &[Vec<f64>],
    steps: &[usize],
    xs: &[DMatrix<f64>],
) -> Result<Vec<Vec<f64>>> {
    let cfg = params.config();
    let b = noisy.len();
    if b == 0 || steps.len() != b || xs.len() != b {
        return Err(Error::shape(
            "denoise_forward_batch requires equal, non-empty noisy/steps/xs",
        ));
    }
    let d = noisy[0].len();
    if d == 0 {
        return Err(Error::shape("empty return vector"));
    }
    let mut noisy_flat = Vec::with_capacity(b * d);
    let mut fac_flat = Vec::with_capacity(b * d * cfg.factor_dim);
    let mut sin_flat = Vec::with_capacity(b * cfg.d_model);
    for i in 0..b {
        if noisy[i].len() != d {
            return Err(Error::shape("ragged batch: asset counts differ"));
        }
        if xs[i].nrows() != d || xs[i].ncols() != cfg.factor_dim {
            return Err(Error::shape(format!(
                "factor matrix {i} is {}x{}, expected {d}x{}",
                xs[i].nrows(),
                xs[i].ncols(),
                cfg.factor_dim
            )));
        }
        noisy_flat.extend_from_slice(&noisy[i]);
        fac_flat.extend_from_slice(&stack_row_major(&xs[i]));
        sin_flat.extend_from_slice(&sinusoidal_features(steps[i], cfg.d_model)?);
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false)?;
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
    let data = g.value(out).data();
    Ok(data.chunks_exact(d).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn small_config() -> DiTConfig {
        DiTConfig {
            factor_dim: 2,
            d_model: 16,
            heads: 2,
            depth: 2,
            ffn_mult: 2,
            cond_hidden: 16,
        }
    }

    fn randn_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn sinusoidal_features_bounded_and_deterministic() {
        let a = sinusoidal_features(7, 16).unwrap();
        let b = sinusoidal_features(7, 16).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(sinusoidal_features(7, 15).is_err());
        assert!(sinusoidal_features(0, 16).is_err());
    }

    #[test]
    fn step_embeddings_are_distinct_over_full_range() {
        // Exhaustive scan: every step up to 10^4 gets a distinct embedding.
        let dim = 16;
        let mut feats: Vec<Vec<u64>> = (1..=10_000)
            .map(|n| {
                sinusoidal_features(n, dim)
                    .unwrap()
                    .iter()
                    .map(|v| v.to_bits())
                    .collect()
            })
            .collect();
        feats.sort();
        let before = feats.len();
        feats.dedup();
        assert_eq!(before, feats.len(), "duplicate step features found");
    }

    #[test]
    fn timestep_embedding_changes_with_n() {
        let params = DenoiserParams::init(&small_config(), 5).unwrap();
        let e1 = timestep_embedding(&params, 1).unwrap();
        let e1b = timestep_embedding(&params, 1).unwrap();
        let e2 = timestep_embedding(&params, 2).unwrap();
        assert_eq!(e1, e1b);
        assert!(e1.iter().zip(&e2).any(|(a, b)| a != b));
    }

    #[test]
    fn condition_rows_share_the_mlp_and_step_embedding() {
        let cfg = small_config();
        let params = DenoiserParams::init(&cfg, 5).unwrap();
        // Two identical factor rows produce identical condition rows.
        let x = DMatrix::from_row_slice(3, 2, &[0.4, -1.0, 0.4, -1.0, 2.0, 0.3]);
        let c = condition_vectors(&params, &x, 3).unwrap();
        for j in 0..cfg.d_model {
            assert_eq!(c[(0, j)], c[(1, j)]);
        }
        // C(X, n) - C(X, n') has identical rows equal to e_n - e_{n'}.
        let c2 = condition_vectors(&params, &x, 9).unwrap();
        let e3 = timestep_embedding(&params, 3).unwrap();
        let e9 = timestep_embedding(&params, 9).unwrap();
        for i in 0..3 {
            for j in 0..cfg.d_model {
                let diff = c[(i, j)] - c2[(i, j)];
                assert!((diff - (e3[j] - e9[j])).abs() < 1e-12);
            }
        }
        // Permuting rows of X permutes rows of C identically.
        let perm = [2usize, 0, 1];
        let xp = DMatrix::from_fn(3, 2, |i, j| x[(perm[i], j)]);
        let cp = condition_vectors(&params, &xp, 3).unwrap();
        for i in 0..3 {
            for j in 0..cfg.d_model {
                assert_eq!(cp[(i, j)], c[(perm[i], j)]);
            }
        }
        // Factor-dimension mismatch errors.
        let bad = DMatrix::zeros(3, 5);
        assert!(condition_vectors(&params, &bad, 3).is_err());
    }

    #[test]
    fn block_is_identity_at_zero_init() {
        let cfg = small_config();
        let params = DenoiserParams::init(&cfg, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tokens = randn_mat(&mut rng, 4, cfg.d_model);
        let cond = randn_mat(&mut rng, 4, cfg.d_model);
        let out = dit_block(&params, 0, &tokens, &cond).unwrap();
        assert_eq!(out, tokens, "zero-initialized gates must keep tokens bit-exact");
    }

    #[test]
    fn block_permutation_equivariance_after_perturbation() {
        let cfg = small_config();
        let mut params = DenoiserParams::init(&cfg, 21).unwrap();
        // Give the modulation layers non-zero weights so the block does work.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for v in params.flat_mut().iter_mut() {
            if *v == 0.0 {
                *v = 0.05 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let d = 5;
        let tokens = randn_mat(&mut rng, d, cfg.d_model);
        let cond = randn_mat(&mut rng, d, cfg.d_model);
        let out = dit_block(&params, 1, &tokens, &cond).unwrap();
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let tp = DMatrix::from_fn(d, cfg.d_model, |i, j| tokens[(perm[i], j)]);
        let cp = DMatrix::from_fn(d, cfg.d_model, |i, j| cond[(perm[i], j)]);
        let outp = dit_block(&params, 1, &tp, &cp).unwrap();
        for i in 0..d {
            for j in 0..cfg.d_model {
                assert!(
                    (outp[(i, j)] - out[(perm[i], j)]).abs() < 1e-12,
                    "block not permutation equivariant"
                );
            }
        }
    }

    #[test]
    fn forward_is_zero_at_initialization() {
        let cfg = small_config();
        let params = DenoiserParams::init(&cfg, 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let d = 1 + (trial % 5);
            let x = randn_mat(&mut rng, d, cfg.factor_dim);
            let noisy: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = rng.gen_range(1..=50);
            let out = denoise_forward(&params, &noisy, n, &x).unwrap();
            assert!(out.iter().all(|&v| v == 0.0), "non-zero output at init");
        }
    }

    #[test]
    fn forward_permutation_equivariance() {
        let cfg = small_config();
        let mut params = DenoiserParams::init(&cfg, 13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for v in params.flat_mut().iter_mut() {
            if *v == 0.0 {
                *v = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let d = 6;
        for _ in 0..10 {
            let x = randn_mat(&mut rng, d, cfg.factor_dim);
            let noisy: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let out = denoise_forward(&params, &noisy, 7, &x).unwrap();
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(&mut rng);
            let xp = DMatrix::from_fn(d, cfg.factor_dim, |i, j| x[(perm[i], j)]);
            let np: Vec<f64> = perm.iter().map(|&i| noisy[i]).collect();
            let outp = denoise_forward(&params, &np, 7, &xp).unwrap();
            for i in 0..d {
                assert!(
                    (outp[i] - out[perm[i]]).abs() < 1e-10,
                    "forward not permutation equivariant"
                );
            }
        }
    }

    #[test]
    fn batched_forward_matches_single_elements() {
        let cfg = small_config();
        let mut params = DenoiserParams::init(&cfg, 31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for v in params.flat_mut().iter_mut() {
            if *v == 0.0 {
                *v = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let d = 3;
        let noisy: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let steps = vec![1usize, 5, 9, 2];
        let xs: Vec<DMatrix<f64>> = (0..4).map(|_| randn_mat(&mut rng, d, cfg.factor_dim)).collect();
        let batched = denoise_forward_batch(&params, &noisy, &steps, &xs).unwrap();
        for i in 0..4 {
            let single = denoise_forward(&params, &noisy[i], steps[i], &xs[i]).unwrap();
            for j in 0..d {
                assert_eq!(batched[i][j], single[j], "batching changed values");
            }
        }
    }

    #[test]
    fn single_asset_forward_is_finite_and_local() {
        // D = 1: attention degenerates to the value path; output depends
        // only on (r_1, x_1, n).
        let cfg = small_config();
        let mut params = DenoiserParams::init(&cfg, 41).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for v in params.flat_mut().iter_mut() {
            if *v == 0.0 {
                *v = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let x = randn_mat(&mut rng, 1, cfg.factor_dim);
        let out = denoise_forward(&params, &[0.3], 4, &x).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].is_finite());
        let again = denoise_forward(&params, &[0.3], 4, &x).unwrap();
        assert_eq!(out, again);
    }
}
