//! Merging policy: a single-agent pointer over the endpoint graph.
//!
//! Each endpoint embeds its own coordinates concatenated with its
//! partner's (isolated vertices repeat their own), runs through an encoder
//! stack, and at each step a state context (graph mean, merge-start
//! embedding, previous-endpoint embedding) queries the endpoints through
//! masked attention; a clipped masked softmax yields the next endpoint.

use crate::config::ModelConfig;
use crate::error::Result;
use carss_core::env::MergeGraph;
use carss_core::Instance;
use carss_nn::layers::{affine, layer_norm, mha, AffineVars, BlockVars, LayerNormVars, MhaVars};
use carss_nn::{Binding, Graph, Mask, Scalar, Tensor, Var};

/// One decoder layer: masked attention with optional residual + norm (the
/// merge decoder has no feed-forward sub-layer).
#[derive(Debug, Clone)]
pub struct MergeDecVars {
    pub mha: MhaVars,
    pub ln: Option<LayerNormVars>,
}

/// Graph-bound merging-policy parameters.
#[derive(Debug, Clone)]
pub struct MergeVars {
    pub embed: AffineVars,
    pub enc_v: Vec<BlockVars>,
    pub state: AffineVars,
    pub dec: Vec<MergeDecVars>,
    pub out_q: AffineVars,
    pub out_k: AffineVars,
}

impl MergeVars {
    pub fn bind(b: &Binding, cfg: &ModelConfig) -> Result<Self> {
        let enc_v = (0..cfg.l_enc_vp)
            .map(|l| {
                BlockVars::bind(
                    b,
                    &format!("merge/enc_v/{l}"),
                    cfg.d_v,
                    cfg.heads,
                    cfg.residual_norm,
                )
            })
            .collect::<carss_nn::Result<Vec<_>>>()?;
        let dec = (0..cfg.l_dec_c)
            .map(|l| -> carss_nn::Result<MergeDecVars> {
                Ok(MergeDecVars {
                    mha: MhaVars::bind(b, &format!("merge/dec/{l}/mha"), cfg.d_v, cfg.heads)?,
                    ln: cfg
                        .residual_norm
                        .then(|| LayerNormVars::bind(b, &format!("merge/dec/{l}/ln")))
                        .transpose()?,
                })
            })
            .collect::<carss_nn::Result<Vec<_>>>()?;
        Ok(Self {
            embed: AffineVars::bind(b, "merge/embed")?,
            enc_v,
            state: AffineVars::bind(b, "merge/state")?,
            dec,
            out_q: AffineVars::bind(b, "merge/out_q")?,
            out_k: AffineVars::bind(b, "merge/out_k")?,
        })
    }
}

/// Endpoint input features: own coordinates concatenated with the
/// partner's, `2(K+|I|) x 4`.
pub fn endpoint_input<T: Scalar>(
    g: &mut Graph<T>,
    inst: &Instance,
    mg: &MergeGraph,
) -> Var {
    let size = mg.size();
    let mut data = Vec::with_capacity(size * 4);
    for i in 0..size {
        let own = inst.point(mg.orig(i));
        let other = inst.point(mg.orig(mg.partner(i)));
        data.extend([
            T::from_f64(own[0]),
            T::from_f64(own[1]),
            T::from_f64(other[0]),
            T::from_f64(other[1]),
        ]);
    }
    g.constant(Tensor::from_vec(size, 4, data).unwrap())
}

/// Endpoint embeddings `H^v'`, computed once per merge graph.
pub fn encode_merge_graph<T: Scalar>(
    g: &mut Graph<T>,
    vars: &MergeVars,
    inst: &Instance,
    mg: &MergeGraph,
) -> Result<Var> {
    let x = endpoint_input(g, inst, mg);
    let mut h = affine(g, vars.embed, x)?;
    for blk in &vars.enc_v {
        h = carss_nn::layers::block(g, blk, h, h, None)?;
    }
    Ok(h)
}

/// Distribution over the endpoints for one merge step. `feasible` must be
/// the exact feasible-action support from the environment.
pub fn merge_distribution<T: Scalar>(
    g: &mut Graph<T>,
    vars: &MergeVars,
    cfg: &ModelConfig,
    hvp: Var,
    q_start: usize,
    q_prev: usize,
    feasible: &[bool],
) -> Result<Var> {
    let size = g.value(hvp).rows();
    debug_assert_eq!(feasible.len(), size);
    let all: Vec<usize> = (0..size).collect();
    let h_graph = g.rows_mean(hvp, &all)?;
    let h_front = g.gather_rows(hvp, &[q_start])?;
    let h_rear = g.gather_rows(hvp, &[q_prev])?;
    let ctx_in = g.concat_cols(&[h_graph, h_front, h_rear])?;
    let mut h = affine(g, vars.state, ctx_in)?;

    let mask = Mask::broadcast_row(1, feasible);
    for layer in &vars.dec {
        let attn = mha(g, &layer.mha, h, hvp, hvp, Some(&mask))?;
        h = match layer.ln {
            Some(ln) => {
                let res = g.add(h, attn)?;
                layer_norm(g, ln, res)?
            }
            None => attn,
        };
    }

    let q = affine(g, vars.out_q, h)?;
    let keys = affine(g, vars.out_k, hvp)?;
    let kt = g.transpose(keys);
    let scores = g.matmul(q, kt)?;
    let scaled = g.scale(scores, 1.0 / (cfg.d_v as f64).sqrt());
    let logits = g.clipped_logits(scaled, cfg.clip_c);
    g.masked_softmax(logits, &mask).map_err(Into::into)
}
