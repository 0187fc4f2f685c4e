//! Token-wise-conditioned diffusion transformer used as the noise
//! predictor: one token per asset, each conditioned on its own factor
//! vector plus the step embedding, with per-token AdaLN-Zero modulation
//! and global multi-head self-attention across assets. No positional
//! encoding: assets form a set, and the network is permutation
//! equivariant by construction.

mod forward;

pub use forward::{
    condition_vectors, denoise_forward, denoise_forward_batch, dit_block, sinusoidal_features,
    timestep_embedding,
};
pub(crate) use forward::{build_forward, stack_row_major};

use crate::error::{Error, Result};
use crate::numerics::{Gradients, Graph, NodeId, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Architecture hyperparameters. The model accepts any token (asset)
/// count; only the factor dimension is data-bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DiTConfig {
    /// Factor vector length K per asset.
    pub factor_dim: usize,
    /// Token width.
    pub d_model: usize,
    /// Attention heads; must divide `d_model`.
    pub heads: usize,
    /// Number of transformer blocks.
    pub depth: usize,
    /// Feed-forward hidden width = `ffn_mult * d_model`.
    pub ffn_mult: usize,
    /// Hidden width of the two-layer condition MLP.
    pub cond_hidden: usize,
}

impl DiTConfig {
    /// Desk-scale defaults: d_model 64, 4 heads, depth 3, FFN x4,
    /// condition-MLP hidden width equal to d_model.
    pub fn new(factor_dim: usize) -> Self {
        DiTConfig {
            factor_dim,
            d_model: 64,
            heads: 4,
            depth: 3,
            ffn_mult: 4,
            cond_hidden: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.factor_dim == 0 {
            return Err(Error::config("factor_dim must be >= 1"));
        }
        if self.depth == 0 {
            return Err(Error::config("depth must be >= 1"));
        }
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.d_model % 2 != 0 {
            return Err(Error::config("d_model must be even (sinusoidal features)"));
        }
        if self.ffn_mult == 0 || self.cond_hidden == 0 {
            return Err(Error::config("ffn_mult and cond_hidden must be >= 1"));
        }
        Ok(())
    }

    /// Closed-form parameter count for this architecture.
    pub fn param_count(&self) -> usize {
        let (dm, k, ch, h) = (
            self.d_model,
            self.factor_dim,
            self.cond_hidden,
            self.ffn_mult * self.d_model,
        );
        let token = dm + dm;
        let cond = k * ch + ch + ch * dm + dm;
        let time = dm * dm + dm + dm * dm + dm;
        let block = 4 * (dm * dm + dm) + (dm * h + h + h * dm + dm) + (6 * dm * dm + 6 * dm);
        let fin = dm * 2 * dm + 2 * dm + dm + 1;
        token + cond + time + self.depth * block + fin
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Xavier,
    Zero,
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    init: Init,
}

/// Positions of each block's entries within the layout.
#[derive(Debug, Clone)]
pub(crate) struct BlockSlots {
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
    pub fw1: usize,
    pub fb1: usize,
    pub fw2: usize,
    pub fb2: usize,
    pub mod_w: usize,
    pub mod_b: usize,
}

/// Positions of every named parameter within the layout.
#[derive(Debug, Clone)]
pub(crate) struct Slots {
    pub token_w: usize,
    pub token_b: usize,
    pub cond_w1: usize,
    pub cond_b1: usize,
    pub cond_w2: usize,
    pub cond_b2: usize,
    pub time_w1: usize,
    pub time_b1: usize,
    pub time_w2: usize,
    pub time_b2: usize,
    pub blocks: Vec<BlockSlots>,
    pub final_mod_w: usize,
    pub final_mod_b: usize,
    pub head_w: usize,
    pub head_b: usize,
}

fn build_layout(cfg: &DiTConfig) -> (Vec<Entry>, Slots) {
    let (dm, k, ch, h) = (
        cfg.d_model,
        cfg.factor_dim,
        cfg.cond_hidden,
        cfg.ffn_mult * cfg.d_model,
    );
    let mut entries: Vec<Entry> = Vec::new();
    let mut offset = 0usize;
    let mut push = |entries: &mut Vec<Entry>, name: String, shape: Vec<usize>, init: Init| {
        let len: usize = shape.iter().product();
        entries.push(Entry {
            name,
            shape,
            offset,
            init,
        });
        offset += len;
        entries.len() - 1
    };

    let token_w = push(&mut entries, "token.w".into(), vec![1, dm], Init::Xavier);
    let token_b = push(&mut entries, "token.b".into(), vec![dm], Init::Zero);
    let cond_w1 = push(&mut entries, "cond.w1".into(), vec![k, ch], Init::Xavier);
    let cond_b1 = push(&mut entries, "cond.b1".into(), vec![ch], Init::Zero);
    let cond_w2 = push(&mut entries, "cond.w2".into(), vec![ch, dm], Init::Xavier);
    let cond_b2 = push(&mut entries, "cond.b2".into(), vec![dm], Init::Zero);
    let time_w1 = push(&mut entries, "time.w1".into(), vec![dm, dm], Init::Xavier);
    let time_b1 = push(&mut entries, "time.b1".into(), vec![dm], Init::Zero);
    let time_w2 = push(&mut entries, "time.w2".into(), vec![dm, dm], Init::Xavier);
    let time_b2 = push(&mut entries, "time.b2".into(), vec![dm], Init::Zero);

    let mut blocks = Vec::with_capacity(cfg.depth);
    for b in 0..cfg.depth {
        let wq = push(&mut entries, format!("block{b}.attn.wq"), vec![dm, dm], Init::Xavier);
        let bq = push(&mut entries, format!("block{b}.attn.bq"), vec![dm], Init::Zero);
        let wk = push(&mut entries, format!("block{b}.attn.wk"), vec![dm, dm], Init::Xavier);
        let bk = push(&mut entries, format!("block{b}.attn.bk"), vec![dm], Init::Zero);
        let wv = push(&mut entries, format!("block{b}.attn.wv"), vec![dm, dm], Init::Xavier);
        let bv = push(&mut entries, format!("block{b}.attn.bv"), vec![dm], Init::Zero);
        let wo = push(&mut entries, format!("block{b}.attn.wo"), vec![dm, dm], Init::Xavier);
        let bo = push(&mut entries, format!("block{b}.attn.bo"), vec![dm], Init::Zero);
        let fw1 = push(&mut entries, format!("block{b}.ffn.w1"), vec![dm, h], Init::Xavier);
        let fb1 = push(&mut entries, format!("block{b}.ffn.b1"), vec![h], Init::Zero);
        let fw2 = push(&mut entries, format!("block{b}.ffn.w2"), vec![h, dm], Init::Xavier);
        let fb2 = push(&mut entries, format!("block{b}.ffn.b2"), vec![dm], Init::Zero);
        // AdaLN-Zero: the modulation output layer starts at zero so every
        // block is the identity map at initialization.
        let mod_w = push(&mut entries, format!("block{b}.mod.w"), vec![dm, 6 * dm], Init::Zero);
        let mod_b = push(&mut entries, format!("block{b}.mod.b"), vec![6 * dm], Init::Zero);
        blocks.push(BlockSlots {
            wq, bq, wk, bk, wv, bv, wo, bo, fw1, fb1, fw2, fb2, mod_w, mod_b,
        });
    }

    let final_mod_w = push(&mut entries, "final.mod.w".into(), vec![dm, 2 * dm], Init::Zero);
    let final_mod_b = push(&mut entries, "final.mod.b".into(), vec![2 * dm], Init::Zero);
    let head_w = push(&mut entries, "final.head.w".into(), vec![dm, 1], Init::Zero);
    let head_b = push(&mut entries, "final.head.b".into(), vec![1], Init::Zero);

    let slots = Slots {
        token_w,
        token_b,
        cond_w1,
        cond_b1,
        cond_w2,
        cond_b2,
        time_w1,
        time_b1,
        time_w2,
        time_b2,
        blocks,
        final_mod_w,
        final_mod_b,
        head_w,
        head_b,
    };
    (entries, slots)
}

/// All learnable weights in one flat vector with a stable, documented
/// layout (the checkpoint format stores exactly this vector).
///
/// Layout order: token embedding (w, b); condition MLP (w1, b1, w2, b2);
/// step-embedding MLP (w1, b1, w2, b2); then per block the attention
/// projections (wq, bq, wk, bk, wv, bv, wo, bo), feed-forward
/// (w1, b1, w2, b2) and the modulation layer (w, b); finally the output
/// modulation (w, b) and the linear head (w, b). Matrices are row-major
/// with shape `[in, out]`.
#[derive(Debug, Clone)]
pub struct DenoiserParams {
    config: DiTConfig,
    entries: Vec<Entry>,
    slots: Slots,
    flat: Vec<f64>,
}

impl DenoiserParams {
    /// Seeded initialization: rank-2 weights are Xavier-uniform
    /// (`U(-sqrt(6/(fan_in+fan_out)), +)`), biases zero, and every
    /// modulation output layer and the final head exactly zero.
    pub fn init(config: &DiTConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (entries, slots) = build_layout(config);
        let total = config.param_count();
        debug_assert_eq!(
            total,
            entries.iter().map(|e| e.shape.iter().product::<usize>()).sum::<usize>()
        );
        let mut flat = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for e in &entries {
            if e.init == Init::Xavier {
                let (fan_in, fan_out) = (e.shape[0], e.shape[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let len: usize = e.shape.iter().product();
                for v in flat[e.offset..e.offset + len].iter_mut() {
                    *v = rng.gen_range(-limit..limit);
                }
            }
        }
        Ok(DenoiserParams {
            config: config.clone(),
            entries,
            slots,
            flat,
        })
    }

    /// Rebuild from a flat vector previously produced by this layout
    /// (checkpoint loading).
    pub fn from_flat(config: &DiTConfig, flat: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if flat.len() != config.param_count() {
            return Err(Error::data(format!(
                "flat parameter vector has {} entries, layout expects {}",
                flat.len(),
                config.param_count()
            )));
        }
        if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite parameter at index {i}")));
        }
        let (entries, slots) = build_layout(config);
        Ok(DenoiserParams {
            config: config.clone(),
            entries,
            slots,
            flat,
        })
    }

    pub fn config(&self) -> &DiTConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub(crate) fn slots(&self) -> &Slots {
        &self.slots
    }

    fn entry_tensor(&self, idx: usize) -> Tensor {
        let e = &self.entries[idx];
        let len: usize = e.shape.iter().product();
        Tensor::new_unchecked(
            e.shape.clone(),
            self.flat[e.offset..e.offset + len].to_vec(),
        )
    }

    /// Insert every parameter into `g`. With `trainable` the leaves are
    /// gradient targets; otherwise they are plain inputs (sampling path).
    pub(crate) fn bind(&self, g: &mut Graph, trainable: bool) -> Result<BoundParams> {
        let mut ids = Vec::with_capacity(self.entries.len());
        for i in 0..self.entries.len() {
            let t = self.entry_tensor(i);
            ids.push(if trainable { g.param(t)? } else { g.input(t)? });
        }
        Ok(BoundParams { ids })
    }

    /// Collect adjoints from `grads` into a flat gradient vector aligned
    /// with [`Self::flat`].
    pub(crate) fn gather_grads(&self, bound: &BoundParams, grads: &Gradients) -> Vec<f64> {
        let mut out = vec![0.0; self.flat.len()];
        for (i, e) in self.entries.iter().enumerate() {
            if let Some(t) = grads.get(bound.ids[i]) {
                let len = t.numel();
                out[e.offset..e.offset + len].copy_from_slice(t.data());
            }
        }
        out
    }

    /// Name and flat range of each entry, for introspection and tests.
    pub fn layout(&self) -> impl Iterator<Item = (&str, std::ops::Range<usize>)> {
        self.entries.iter().map(|e| {
            let len: usize = e.shape.iter().product();
            (e.name.as_str(), e.offset..e.offset + len)
        })
    }
}

/// Graph node handles for one bound parameter set.
pub(crate) struct BoundParams {
    ids: Vec<NodeId>,
}

impl BoundParams {
    pub(crate) fn node(&self, idx: usize) -> NodeId {
        self.ids[idx]
    }
}
