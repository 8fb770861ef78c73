//! Generation policy: from raw coordinates and the current game state to a
//! per-agent distribution over candidate-vertex slots.
//!
//! Pipeline per step: shared vertex embeddings (encoded once per episode),
//! per-agent comm/context features built from the subpath endpoints and the
//! unvisited mean, an agent-level attention encoder, a memory decoder over
//! the agent's own attachment history, and a clipped masked softmax over
//! `ceil(n/K)` candidate slots. Slots beyond the agent's candidate list are
//! padded with the lowest-index infeasible vertices and masked to exact
//! zero probability.

use crate::config::ModelConfig;
use crate::error::Result;
use carss_core::assignment::{candidate_lists, Assignment};
use carss_core::env::GameState;
use carss_core::Instance;
use carss_nn::layers::{affine, block, ffn, AffineVars, BlockVars, FfnVars};
use carss_nn::{Binding, Graph, Mask, Scalar, Tensor, Var};

/// Graph-bound generation-policy parameters.
#[derive(Debug, Clone)]
pub struct GenVars {
    pub embed: AffineVars,
    pub enc_v: Vec<BlockVars>,
    pub comm: FfnVars,
    pub ctx: FfnVars,
    pub enc_a: Vec<BlockVars>,
    pub dec: Vec<BlockVars>,
    pub out_q: AffineVars,
    pub out_k: AffineVars,
}

impl GenVars {
    pub fn bind(b: &Binding, cfg: &ModelConfig) -> Result<Self> {
        let blocks = |prefix: &str, count: usize| -> Result<Vec<BlockVars>> {
            (0..count)
                .map(|l| {
                    BlockVars::bind(
                        b,
                        &format!("{prefix}/{l}"),
                        cfg.d_v,
                        cfg.heads,
                        cfg.residual_norm,
                    )
                    .map_err(Into::into)
                })
                .collect()
        };
        Ok(Self {
            embed: AffineVars::bind(b, "gen/embed")?,
            enc_v: blocks("gen/enc_v", cfg.l_enc_v)?,
            comm: FfnVars::bind(b, "gen/comm")?,
            ctx: FfnVars::bind(b, "gen/ctx")?,
            enc_a: blocks("gen/enc_a", cfg.l_enc_a)?,
            dec: blocks("gen/dec", cfg.l_dec_g)?,
            out_q: AffineVars::bind(b, "gen/out_q")?,
            out_k: AffineVars::bind(b, "gen/out_k")?,
        })
    }
}

/// Coordinates as an `n x 2` constant.
pub fn coord_input<T: Scalar>(g: &mut Graph<T>, inst: &Instance) -> Var {
    let mut data = Vec::with_capacity(inst.n() * 2);
    for p in inst.coords() {
        data.push(T::from_f64(p[0]));
        data.push(T::from_f64(p[1]));
    }
    g.constant(Tensor::from_vec(inst.n(), 2, data).unwrap())
}

/// Vertex embeddings `H^v`: input affine then the vertex encoder stack over
/// the full (all-ones) attention mask. Computed once per episode.
pub fn encode_vertices<T: Scalar>(
    g: &mut Graph<T>,
    vars: &GenVars,
    inst: &Instance,
) -> Result<Var> {
    let x = coord_input(g, inst);
    let mut h = affine(g, vars.embed, x)?;
    for blk in &vars.enc_v {
        h = block(g, blk, h, h, None)?;
    }
    Ok(h)
}

/// Per-episode cache: the shared vertex embeddings plus each agent's
/// attachment history (start vertex first), which backs the growing memory
/// tensor as rows of `H^v`.
#[derive(Debug, Clone)]
pub struct GenEpisodeCache {
    pub hv: Var,
    pub memory: Vec<Vec<usize>>,
}

impl GenEpisodeCache {
    pub fn new(hv: Var, starts: &[usize]) -> Self {
        Self {
            hv,
            memory: starts.iter().map(|&s| vec![s]).collect(),
        }
    }

    /// Append each agent's newly attached vertex.
    pub fn update(&mut self, chosen: &[usize]) {
        debug_assert_eq!(chosen.len(), self.memory.len());
        for (mem, &v) in self.memory.iter_mut().zip(chosen) {
            mem.push(v);
        }
    }
}

/// One step's per-agent action distributions.
#[derive(Debug, Clone)]
pub struct GenStepEval {
    /// Per-agent `1 x cap` probability rows.
    pub dists: Vec<Var>,
    /// Per-agent slot-to-vertex map (length cap; padding slots included).
    pub slots: Vec<Vec<usize>>,
    /// Per-agent feasibility flags per slot.
    pub feasible: Vec<Vec<bool>>,
}

impl GenStepEval {
    /// Number of feasible slots for an agent.
    pub fn feasible_count(&self, agent: usize) -> usize {
        self.feasible[agent].iter().filter(|&&f| f).count()
    }
}

/// Pad an agent's candidate list to `cap` slots with vertices not assigned
/// to it, taken from `pool_order` (ascending index by default). Padded
/// slots are masked, so the arbitrary choice cannot influence the
/// distribution.
pub fn pad_slots(
    candidates: &[usize],
    assignment: &Assignment,
    agent: usize,
    pool_order: impl Iterator<Item = usize>,
    cap: usize,
) -> (Vec<usize>, Vec<bool>) {
    let mut slots = candidates.to_vec();
    let mut feasible = vec![true; candidates.len()];
    for filler in pool_order {
        if slots.len() >= cap {
            break;
        }
        if assignment.agent_of(filler) != Some(agent) {
            slots.push(filler);
            feasible.push(false);
        }
    }
    debug_assert_eq!(slots.len(), cap, "not enough padding vertices");
    (slots, feasible)
}

/// Padding-vertex selection; the default takes the lowest-index infeasible
/// vertices, the reversed variant exists so tests can verify the choice is
/// immaterial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaddingOrder {
    #[default]
    LowestIndex,
    HighestIndex,
}

/// Evaluate the generation policy at the current state: one masked
/// distribution over `cap` slots per agent.
pub fn gen_distribution<T: Scalar>(
    g: &mut Graph<T>,
    vars: &GenVars,
    cfg: &ModelConfig,
    state: &GameState,
    assignment: &Assignment,
    cache: &GenEpisodeCache,
) -> Result<GenStepEval> {
    gen_distribution_padded(
        g,
        vars,
        cfg,
        state,
        assignment,
        cache,
        PaddingOrder::LowestIndex,
    )
}

/// [`gen_distribution`] with an explicit padding order.
pub fn gen_distribution_padded<T: Scalar>(
    g: &mut Graph<T>,
    vars: &GenVars,
    cfg: &ModelConfig,
    state: &GameState,
    assignment: &Assignment,
    cache: &GenEpisodeCache,
    padding: PaddingOrder,
) -> Result<GenStepEval> {
    let inst = state.instance();
    let n = inst.n();
    let k = state.agents();
    let cap = state.action_cap();
    let hv = cache.hv;
    let candidates = candidate_lists(assignment, cap);
    let unvisited = state.unvisited();

    // context per agent: [h_front, h_rear, unvisited mean, comm]
    let mean_unvisited = g.rows_mean(hv, &unvisited)?;
    let mut contexts = Vec::with_capacity(k);
    for &(front, rear) in &state.endpoints() {
        let h_f = g.gather_rows(hv, &[front])?;
        let h_r = g.gather_rows(hv, &[rear])?;
        let comm_in = g.concat_cols(&[h_f, h_r])?;
        let comm = ffn(g, vars.comm, comm_in)?;
        let ctx_in = g.concat_cols(&[h_f, h_r, mean_unvisited, comm])?;
        contexts.push(ffn(g, vars.ctx, ctx_in)?);
    }

    // agent encoder over the K context rows
    let mut ha = g.concat_rows(&contexts)?;
    for blk in &vars.enc_a {
        ha = block(g, blk, ha, ha, None)?;
    }

    let scale = 1.0 / (cfg.d_v as f64).sqrt();
    let mut dists = Vec::with_capacity(k);
    let mut all_slots = Vec::with_capacity(k);
    let mut all_feasible = Vec::with_capacity(k);
    for (agent, agent_candidates) in candidates.iter().enumerate() {
        // memory decoder: the agent's row attends over its own history
        let mut hd = g.gather_rows(ha, &[agent])?;
        let memory = g.gather_rows(hv, &cache.memory[agent])?;
        for blk in &vars.dec {
            hd = block(g, blk, hd, memory, None)?;
        }

        let (slots, feasible) = match padding {
            PaddingOrder::LowestIndex => {
                pad_slots(agent_candidates, assignment, agent, 0..n, cap)
            }
            PaddingOrder::HighestIndex => {
                pad_slots(agent_candidates, assignment, agent, (0..n).rev(), cap)
            }
        };
        let slot_feats = g.gather_rows(hv, &slots)?;
        let q = affine(g, vars.out_q, hd)?;
        let keys = affine(g, vars.out_k, slot_feats)?;
        let kt = g.transpose(keys);
        let scores = g.matmul(q, kt)?;
        let scaled = g.scale(scores, scale);
        let logits = g.clipped_logits(scaled, cfg.clip_c);
        let mask = Mask::broadcast_row(1, &feasible);
        dists.push(g.masked_softmax(logits, &mask)?);
        all_slots.push(slots);
        all_feasible.push(feasible);
    }
    Ok(GenStepEval {
        dists,
        slots: all_slots,
        feasible: all_feasible,
    })
}
