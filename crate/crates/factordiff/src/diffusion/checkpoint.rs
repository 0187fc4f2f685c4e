//! Versioned binary checkpoint container.
//!
//! Layout: magic `FDIF`, format version (u32 LE), config echo as a
//! length-prefixed `key = value` text block, parameter count (u64 LE),
//! the flat little-endian f64 parameter array, and a trailing SHA-256
//! checksum over all preceding bytes. Readers reject wrong magic,
//! version, or checksum.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::denoiser::{DenoiserParams, DiTConfig};
use crate::diffusion::schedule::{build_schedule, NoiseSchedule};
use crate::diffusion::train::TrainConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FDIF";
const VERSION: u32 = 1;

/// Per-asset affine transform undoing optional return standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnScale {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Everything needed to sample: architecture, schedule parameters,
/// weights, and the optional return scaling.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub dit: DiTConfig,
    pub train: TrainConfig,
    pub params: DenoiserParams,
    pub return_scale: Option<ReturnScale>,
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

impl Checkpoint {
    /// Schedule implied by the stored training config.
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        build_schedule(self.train.n_steps, self.train.beta_min, self.train.beta_max)
    }

    fn config_echo(&self) -> String {
        // Round-trip float formatting keeps reloads bit-exact. The
        // checkpoint path itself is not echoed.
        let mut kv = crate::config::KvConfig::new();
        kv.set("factor_dim", self.dit.factor_dim);
        kv.set("d_model", self.dit.d_model);
        kv.set("heads", self.dit.heads);
        kv.set("depth", self.dit.depth);
        kv.set("ffn_mult", self.dit.ffn_mult);
        kv.set("cond_hidden", self.dit.cond_hidden);
        kv.set("epochs", self.train.epochs);
        kv.set("batch_size", self.train.batch_size);
        kv.set("learning_rate", self.train.learning_rate);
        kv.set("n_steps", self.train.n_steps);
        kv.set("beta_min", self.train.beta_min);
        kv.set("beta_max", self.train.beta_max);
        kv.set("seed", self.train.seed);
        kv.set("standardize_returns", self.train.standardize_returns);
        kv.set("grad_clip", self.train.grad_clip.unwrap_or(0.0));
        if let Some(rs) = &self.return_scale {
            kv.set("ret_mean", fmt_list(&rs.mean));
            kv.set("ret_std", fmt_list(&rs.std));
        }
        kv.to_text()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let echo = self.config_echo();
        let mut buf: Vec<u8> = Vec::with_capacity(64 + echo.len() + self.params.len() * 8);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(echo.len() as u32).to_le_bytes());
        buf.extend_from_slice(echo.as_bytes());
        buf.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in self.params.flat() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 4 + 4 + 4 + 8 + 32 {
            return Err(Error::data("checkpoint file truncated"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - 32);
        let digest = Sha256::digest(body);
        if digest.as_slice() != checksum {
            return Err(Error::data("checkpoint checksum mismatch"));
        }
        if &body[0..4] != MAGIC {
            return Err(Error::data("checkpoint magic mismatch (not an FDIF file)"));
        }
        let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::data(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let cfg_len = u32::from_le_bytes(body[8..12].try_into().unwrap()) as usize;
        let cfg_end = 12 + cfg_len;
        if body.len() < cfg_end + 8 {
            return Err(Error::data("checkpoint config block truncated"));
        }
        let echo = std::str::from_utf8(&body[12..cfg_end])
            .map_err(|_| Error::data("checkpoint config block is not UTF-8"))?;
        let kv = crate::config::KvConfig::parse(echo)?;

        let dit = DiTConfig {
            factor_dim: kv.get_usize("factor_dim", 0)?,
            d_model: kv.get_usize("d_model", 0)?,
            heads: kv.get_usize("heads", 0)?,
            depth: kv.get_usize("depth", 0)?,
            ffn_mult: kv.get_usize("ffn_mult", 0)?,
            cond_hidden: kv.get_usize("cond_hidden", 0)?,
        };
        dit.validate()?;
        let train = TrainConfig {
            epochs: kv.get_usize("epochs", 0)?,
            batch_size: kv.get_usize("batch_size", 0)?,
            learning_rate: kv.get_f64("learning_rate", 0.0)?,
            n_steps: kv.get_usize("n_steps", 0)?,
            beta_min: kv.get_f64("beta_min", 0.0)?,
            beta_max: kv.get_f64("beta_max", 0.0)?,
            seed: kv.get_u64("seed", 0)?,
            standardize_returns: kv.get_bool("standardize_returns", false)?,
            grad_clip: match kv.get_f64("grad_clip", 0.0)? {
                c if c > 0.0 => Some(c),
                _ => None,
            },
            checkpoint_path: None,
        };
        train.validate()?;
        let return_scale = match (kv.get_f64_list("ret_mean")?, kv.get_f64_list("ret_std")?) {
            (Some(mean), Some(std)) => {
                if mean.len() != std.len() {
                    return Err(Error::data("ret_mean and ret_std lengths differ"));
                }
                Some(ReturnScale { mean, std })
            }
            (None, None) => None,
            _ => return Err(Error::data("ret_mean/ret_std must appear together")),
        };

        let count = u64::from_le_bytes(body[cfg_end..cfg_end + 8].try_into().unwrap()) as usize;
        if count != dit.param_count() {
            return Err(Error::data(format!(
                "checkpoint has {count} parameters, architecture expects {}",
                dit.param_count()
            )));
        }
        let data_start = cfg_end + 8;
        if body.len() != data_start + count * 8 {
            return Err(Error::data("checkpoint parameter block length mismatch"));
        }
        let mut flat = Vec::with_capacity(count);
        for chunk in body[data_start..].chunks_exact(8) {
            flat.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        let params = DenoiserParams::from_flat(&dit, flat)?;
        Ok(Checkpoint {
            dit,
            train,
            params,
            return_scale,
        })
    }
}
