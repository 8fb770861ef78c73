//! Rollout drivers: run the two game phases under a policy with greedy,
//! sampled, or replayed action selection, and assemble solve-time results.
//!
//! Replay mode re-executes a recorded trajectory so the surrogate loss can
//! be rebuilt as a pure function of the parameters (the finite-difference
//! oracle perturbs parameters and replays).

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::gen_policy::{encode_vertices, gen_distribution, GenEpisodeCache, GenVars};
use crate::merge_policy::{encode_merge_graph, merge_distribution, MergeVars};
use carss_core::env::trace::{MergeEdgeRecord, RolloutTrace};
use carss_core::env::{GameState, GenAction, MergeGraph, MergeTracker, Phase};
use carss_core::{Instance, Seed, Tour};
use carss_nn::{Graph, ParamSet, Scalar, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Action selection for the generation phase. Replay carries the chosen
/// slot per step per agent.
#[derive(Debug, Clone, Copy)]
pub enum GenDecode<'a> {
    Greedy,
    Sample,
    Replay(&'a [Vec<usize>]),
}

/// Action selection for one merge rollout. Replay carries the chosen
/// endpoint per step.
#[derive(Debug, Clone, Copy)]
pub enum MergeDecode<'a> {
    Greedy,
    Sample,
    Replay(&'a [usize]),
}

/// Pick an index from a probability row. Greedy takes the first argmax;
/// sampling inverts the CDF; both stay inside the feasible support because
/// masked probabilities are exactly zero.
fn choose(probs: &[f64], feasible: &[bool], sampled: Option<f64>) -> usize {
    match sampled {
        None => {
            let mut best = 0;
            let mut best_p = f64::NEG_INFINITY;
            for (i, &p) in probs.iter().enumerate() {
                if feasible[i] && p > best_p {
                    best = i;
                    best_p = p;
                }
            }
            best
        }
        Some(u) => {
            let mut acc = 0.0;
            let mut last_feasible = 0;
            for (i, &p) in probs.iter().enumerate() {
                if feasible[i] {
                    acc += p;
                    last_feasible = i;
                    if u < acc {
                        return i;
                    }
                }
            }
            last_feasible
        }
    }
}

/// Completed generation phase with everything the trainer needs.
pub struct GenTrajectory<'a> {
    pub starts: Vec<usize>,
    /// State at the phase switch (merging).
    pub state: GameState<'a>,
    pub cache: GenEpisodeCache,
    /// Chosen slot per step per agent.
    pub slot_choices: Vec<Vec<usize>>,
    /// Log-probability nodes, indexed `[agent][step]`.
    pub logps: Vec<Vec<Var>>,
    pub joint_actions: Vec<Vec<GenAction>>,
}

/// Run the generation phase from given start vertices. `hv` is the
/// episode's vertex-embedding node (shared across trajectories of the same
/// instance).
#[allow(clippy::too_many_arguments)]
pub fn run_generation<'a, T: Scalar>(
    g: &mut Graph<T>,
    vars: &GenVars,
    cfg: &ModelConfig,
    inst: &'a Instance,
    hv: Var,
    starts: &[usize],
    mode: GenDecode,
    rng: &mut ChaCha8Rng,
) -> Result<GenTrajectory<'a>> {
    let k = starts.len();
    let mut state = GameState::init(inst, k, starts)?;
    let mut cache = GenEpisodeCache::new(hv, starts);
    let mut slot_choices = Vec::new();
    let mut logps: Vec<Vec<Var>> = vec![Vec::new(); k];
    let mut joint_actions = Vec::new();

    let mut step = 0usize;
    while state.phase() == Phase::Generation {
        let assignment = state.assignment()?;
        let eval = gen_distribution(g, vars, cfg, &state, &assignment, &cache)?;
        let mut joint = Vec::with_capacity(k);
        let mut chosen_slots = Vec::with_capacity(k);
        let mut chosen_vertices = Vec::with_capacity(k);
        for agent in 0..k {
            let probs: Vec<f64> = g.value(eval.dists[agent]).row(0)
                .iter()
                .map(|v| v.to_f64())
                .collect();
            let slot = match mode {
                GenDecode::Greedy => choose(&probs, &eval.feasible[agent], None),
                GenDecode::Sample => {
                    choose(&probs, &eval.feasible[agent], Some(rng.random::<f64>()))
                }
                GenDecode::Replay(slots) => slots[step][agent],
            };
            if !eval.feasible[agent][slot] {
                return Err(ModelError::Config(format!(
                    "replayed slot {slot} infeasible for agent {agent} at step {step}"
                )));
            }
            let p = g.entry(eval.dists[agent], 0, slot)?;
            logps[agent].push(g.ln(p)?);
            let vertex = eval.slots[agent][slot];
            joint.push(GenAction {
                agent,
                vertex,
                side: state.nearer_side(agent, vertex),
            });
            chosen_slots.push(slot);
            chosen_vertices.push(vertex);
        }
        state.step_generation(&joint)?;
        cache.update(&chosen_vertices);
        slot_choices.push(chosen_slots);
        joint_actions.push(joint);
        step += 1;
    }

    Ok(GenTrajectory {
        starts: starts.to_vec(),
        state,
        cache,
        slot_choices,
        logps,
        joint_actions,
    })
}

/// One completed merge rollout.
pub struct MergeRollout<'a> {
    pub q_start: usize,
    /// Chosen endpoint per policy step.
    pub choices: Vec<usize>,
    pub logps: Vec<Var>,
    pub edges: Vec<MergeEdgeRecord>,
    pub state: GameState<'a>,
    pub tour: Tour,
}

impl MergeRollout<'_> {
    pub fn reward(&self) -> f64 {
        -self.tour.length()
    }
}

/// Run the merging phase from endpoint `q_start` on a clone of the
/// post-generation state. `hvp` is the endpoint-embedding node (shared
/// across the starts enumerated for the same trajectory).
#[allow(clippy::too_many_arguments)]
pub fn run_merge<'a, T: Scalar>(
    g: &mut Graph<T>,
    vars: &MergeVars,
    cfg: &ModelConfig,
    base: &GameState<'a>,
    mg: &MergeGraph,
    hvp: Var,
    q_start: usize,
    mode: MergeDecode,
    rng: &mut ChaCha8Rng,
) -> Result<MergeRollout<'a>> {
    let mut state = base.clone();
    let mut tracker = MergeTracker::new(mg, q_start)?;
    let mut choices = Vec::new();
    let mut logps = Vec::new();
    let mut edges = Vec::new();
    let mut step = 0usize;

    while !tracker.is_final(mg) {
        let feasible_actions = tracker.feasible_actions(mg);
        let mut feasible = vec![false; mg.size()];
        for a in &feasible_actions {
            feasible[a.q] = true;
        }
        let dist = merge_distribution(
            g,
            vars,
            cfg,
            hvp,
            q_start,
            tracker.q_prev(),
            &feasible,
        )?;
        let probs: Vec<f64> = g.value(dist).row(0).iter().map(|v| v.to_f64()).collect();
        let q = match mode {
            MergeDecode::Greedy => choose(&probs, &feasible, None),
            MergeDecode::Sample => choose(&probs, &feasible, Some(rng.random::<f64>())),
            MergeDecode::Replay(qs) => qs[step],
        };
        if !feasible[q] {
            return Err(ModelError::Config(format!(
                "replayed endpoint {q} infeasible at merge step {step}"
            )));
        }
        let p = g.entry(dist, 0, q)?;
        logps.push(g.ln(p)?);
        let action = *feasible_actions.iter().find(|a| a.q == q).unwrap();
        state.step_merging(mg, &mut tracker, action)?;
        edges.push(MergeEdgeRecord::new(mg, action));
        choices.push(q);
        step += 1;
    }
    let closing = state.close_tour(mg, &mut tracker)?;
    edges.push(MergeEdgeRecord::new(mg, closing));
    let tour = state.extract_tour()?;

    Ok(MergeRollout {
        q_start,
        choices,
        logps,
        edges,
        state,
        tour,
    })
}

/// Assemble a renderable trace from a generation trajectory and one of its
/// merge rollouts.
pub fn make_trace(gen: &GenTrajectory, merge: &MergeRollout) -> RolloutTrace {
    let inst = gen.state.instance();
    RolloutTrace {
        instance_id: inst.id().to_string(),
        n: inst.n(),
        k: gen.state.agents(),
        t_prime: gen.state.t_prime(),
        starts: gen.starts.clone(),
        isolated: gen.state.isolated().to_vec(),
        gen_steps: gen.joint_actions.clone(),
        merge_start: merge.q_start,
        merge_edges: merge.edges.clone(),
        subpaths: gen
            .state
            .paths()
            .iter()
            .map(|p| p.iter().collect())
            .collect(),
        tour: merge.tour.order().to_vec(),
        length: merge.tour.length(),
    }
}

/// Inference options for [`solve`].
#[derive(Debug, Clone)]
#[derive(Default)]
pub struct SolveOptions {
    /// Additional generation trajectories with freshly sampled starts (the
    /// base trajectory plus these makes `1 + extra_rollouts` total).
    pub extra_rollouts: usize,
    /// Sample actions in the extra trajectories instead of greedy decoding.
    pub sample_actions: bool,
}


/// Solve one instance: run a greedy generation trajectory, enumerate all
/// `2(K+|I|)` merge starts greedily, keep the best cycle; optionally add
/// extra trajectories from sampled starts. Deterministic given the seed.
pub fn solve<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &ModelConfig,
    inst: &Instance,
    k: usize,
    seed: Seed,
    opts: &SolveOptions,
) -> Result<(Tour, RolloutTrace)> {
    let mut g: Graph<T> = Graph::new();
    let binding = params.bind(&mut g);
    let gen_vars = GenVars::bind(&binding, cfg)?;
    let merge_vars = MergeVars::bind(&binding, cfg)?;
    let mut rng = seed.rng();
    let n = inst.n();

    let mut best: Option<(Tour, RolloutTrace)> = None;
    for r in 0..=opts.extra_rollouts {
        let mut starts: Vec<usize> = (0..n).collect();
        partial_shuffle(&mut starts, k, &mut rng);
        starts.truncate(k);
        let gen_mode = if r > 0 && opts.sample_actions {
            GenDecode::Sample
        } else {
            GenDecode::Greedy
        };
        let hv = encode_vertices(&mut g, &gen_vars, inst)?;
        let gen = run_generation(&mut g, &gen_vars, cfg, inst, hv, &starts, gen_mode, &mut rng)?;
        let mg = gen.state.build_merge_graph()?;
        let hvp = encode_merge_graph(&mut g, &merge_vars, inst, &mg)?;
        for q_start in 0..mg.size() {
            let merge = run_merge(
                &mut g,
                &merge_vars,
                cfg,
                &gen.state,
                &mg,
                hvp,
                q_start,
                MergeDecode::Greedy,
                &mut rng,
            )?;
            let better = best
                .as_ref()
                .map(|(t, _)| merge.tour.length() < t.length())
                .unwrap_or(true);
            if better {
                let trace = make_trace(&gen, &merge);
                best = Some((merge.tour, trace));
            }
        }
    }
    Ok(best.expect("at least one rollout runs"))
}

/// Fisher-Yates over the first `k` positions only.
fn partial_shuffle(items: &mut [usize], k: usize, rng: &mut impl Rng) {
    let n = items.len();
    for i in 0..k.min(n - 1) {
        let j = rng.random_range(i..n);
        items.swap(i, j);
    }
}
