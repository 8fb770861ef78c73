//! Model hyperparameters and parameter initialization for both policies.

use crate::error::{ModelError, Result};
use carss_nn::layers::{init_affine, init_block, init_ffn, init_layer_norm, init_mha};
use carss_nn::{ParamSet, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Architecture hyperparameters shared by the generation and merging
/// policies. Desk-scale defaults; `published()` restores the full-scale
/// sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Vertex feature dimension d_v.
    pub d_v: usize,
    /// Feed-forward hidden width d_f.
    pub d_f: usize,
    /// Attention heads.
    pub heads: usize,
    /// Vertex-encoder depth (generation).
    pub l_enc_v: usize,
    /// Agent-encoder depth.
    pub l_enc_a: usize,
    /// Memory-decoder depth (generation).
    pub l_dec_g: usize,
    /// Endpoint-encoder depth (merging).
    pub l_enc_vp: usize,
    /// Decoder depth (merging).
    pub l_dec_c: usize,
    /// Wrap attention/FFN sub-layers in residual + layer norm.
    pub residual_norm: bool,
    /// Logit cropping threshold C.
    pub clip_c: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_v: 64,
            d_f: 128,
            heads: 4,
            l_enc_v: 3,
            l_enc_a: 3,
            l_dec_g: 1,
            l_enc_vp: 3,
            l_dec_c: 1,
            residual_norm: true,
            clip_c: 10.0,
        }
    }
}

impl ModelConfig {
    /// Full-scale published hyperparameters (d_v=256, d_f=512, H=8).
    pub fn published() -> Self {
        Self {
            d_v: 256,
            d_f: 512,
            heads: 8,
            ..Self::default()
        }
    }

    /// Tiny preset for smoke tests and CPU training runs.
    pub fn toy() -> Self {
        Self {
            d_v: 16,
            d_f: 32,
            heads: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_v == 0 || self.heads == 0 || !self.d_v.is_multiple_of(self.heads) {
            return Err(ModelError::Config(format!(
                "d_v {} must be a positive multiple of heads {}",
                self.d_v, self.heads
            )));
        }
        if self.l_enc_v == 0 || self.l_enc_vp == 0 || self.l_dec_c == 0 || self.l_dec_g == 0 {
            return Err(ModelError::Config("layer counts must be positive".into()));
        }
        if self.clip_c.is_nan() || self.clip_c <= 0.0 {
            return Err(ModelError::Config("clip_c must be positive".into()));
        }
        Ok(())
    }
}

/// Register the generation-policy parameters (theta) under `gen/`.
pub fn init_gen_params<T: Scalar>(ps: &mut ParamSet<T>, cfg: &ModelConfig, rng: &mut impl Rng) {
    init_affine(ps, "gen/embed", 2, cfg.d_v, rng);
    for l in 0..cfg.l_enc_v {
        init_block(
            ps,
            &format!("gen/enc_v/{l}"),
            cfg.d_v,
            cfg.d_f,
            cfg.heads,
            cfg.residual_norm,
            rng,
        );
    }
    init_ffn(ps, "gen/comm", 2 * cfg.d_v, cfg.d_f, cfg.d_v, rng);
    init_ffn(ps, "gen/ctx", 4 * cfg.d_v, cfg.d_f, cfg.d_v, rng);
    for l in 0..cfg.l_enc_a {
        init_block(
            ps,
            &format!("gen/enc_a/{l}"),
            cfg.d_v,
            cfg.d_f,
            cfg.heads,
            cfg.residual_norm,
            rng,
        );
    }
    for l in 0..cfg.l_dec_g {
        init_block(
            ps,
            &format!("gen/dec/{l}"),
            cfg.d_v,
            cfg.d_f,
            cfg.heads,
            cfg.residual_norm,
            rng,
        );
    }
    init_affine(ps, "gen/out_q", cfg.d_v, cfg.d_v, rng);
    init_affine(ps, "gen/out_k", cfg.d_v, cfg.d_v, rng);
}

/// Register the merging-policy parameters (phi) under `merge/`.
pub fn init_merge_params<T: Scalar>(ps: &mut ParamSet<T>, cfg: &ModelConfig, rng: &mut impl Rng) {
    init_affine(ps, "merge/embed", 4, cfg.d_v, rng);
    for l in 0..cfg.l_enc_vp {
        init_block(
            ps,
            &format!("merge/enc_v/{l}"),
            cfg.d_v,
            cfg.d_f,
            cfg.heads,
            cfg.residual_norm,
            rng,
        );
    }
    init_affine(ps, "merge/state", 3 * cfg.d_v, cfg.d_v, rng);
    for l in 0..cfg.l_dec_c {
        init_mha(ps, &format!("merge/dec/{l}/mha"), cfg.d_v, cfg.heads, rng);
        if cfg.residual_norm {
            init_layer_norm(ps, &format!("merge/dec/{l}/ln"), cfg.d_v);
        }
    }
    init_affine(ps, "merge/out_q", cfg.d_v, cfg.d_v, rng);
    init_affine(ps, "merge/out_k", cfg.d_v, cfg.d_v, rng);
}

/// Both policies in one parameter set (the checkpointed unit).
pub fn init_params<T: Scalar>(cfg: &ModelConfig, rng: &mut impl Rng) -> ParamSet<T> {
    let mut ps = ParamSet::new();
    init_gen_params(&mut ps, cfg, rng);
    init_merge_params(&mut ps, cfg, rng);
    ps
}

/// Human-readable layer/shape/count report.
pub fn describe<T: Scalar>(cfg: &ModelConfig, ps: &ParamSet<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "model: d_v={} d_f={} heads={} enc_v={} enc_a={} dec_g={} enc_v'={} dec_c={} residual_norm={}",
        cfg.d_v,
        cfg.d_f,
        cfg.heads,
        cfg.l_enc_v,
        cfg.l_enc_a,
        cfg.l_dec_g,
        cfg.l_enc_vp,
        cfg.l_dec_c,
        cfg.residual_norm
    );
    let (mut gen_count, mut merge_count) = (0usize, 0usize);
    for (name, t) in ps.iter() {
        let _ = writeln!(s, "  {name}  {}x{}", t.rows(), t.cols());
        if name.starts_with("gen/") {
            gen_count += t.len();
        } else {
            merge_count += t.len();
        }
    }
    let _ = writeln!(
        s,
        "parameters: generation={gen_count} merging={merge_count} total={}",
        gen_count + merge_count
    );
    s
}
