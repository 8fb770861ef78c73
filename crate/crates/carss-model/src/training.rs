//! Independent REINFORCE with POMO baselines: batched rollouts, baseline
//! construction, surrogate-loss assembly (gradient ascent expressed as a
//! negated loss), parameter updates, and the training log.

use crate::config::{init_params, ModelConfig};
use crate::error::{ModelError, Result};
use crate::gen_policy::{encode_vertices, GenVars};
use crate::merge_policy::{encode_merge_graph, MergeVars};
use crate::rollout::{run_generation, run_merge, GenDecode, MergeDecode};
use carss_core::{generate_instances, Instance, Seed};
use carss_nn::checkpoint::save_checkpoint;
use carss_nn::optim::{global_norm, AdamState, GradMap};
use carss_nn::{Graph, ParamSet, Scalar, Var};
use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Baseline construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    Pomo,
    None,
}

/// How the per-trajectory return is selected over merge starts for the
/// generation-policy gradient. `Best` rewards the shortest tour over
/// starts; `PaperLiteralMin` takes the literal minimum over returns, which
/// under negated-length returns selects the longest tour instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnSelection {
    Best,
    PaperLiteralMin,
}

pub fn select_return(returns: &[f64], sel: ReturnSelection) -> f64 {
    match sel {
        ReturnSelection::Best => returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ReturnSelection::PaperLiteralMin => {
            returns.iter().copied().fold(f64::INFINITY, f64::min)
        }
    }
}

/// Training configuration; mirrors the TOML config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Epochs E.
    pub epochs: usize,
    /// Batches per epoch B.
    pub batches_per_epoch: usize,
    /// Instances per batch.
    pub instances_per_batch: usize,
    /// Trajectory samples per instance N.
    pub trajectories: usize,
    /// Agent count K.
    pub k: usize,
    /// Instance size n.
    pub n: usize,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Root seed for everything (instances, starts, action sampling, init).
    pub seed: u64,
    pub baseline: BaselineMode,
    pub return_selection: ReturnSelection,
    /// Per-policy global-norm gradient clip.
    pub grad_clip: f64,
    /// Checkpoint every this many batches (0 = final only).
    pub checkpoint_every: usize,
    /// Record wall-clock milliseconds in the log (off keeps logs
    /// bit-identical across runs).
    pub log_timings: bool,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            batches_per_epoch: 200,
            instances_per_batch: 32,
            trajectories: 2,
            k: 2,
            n: 20,
            learning_rate: 1e-3,
            seed: 0,
            baseline: BaselineMode::Pomo,
            return_selection: ReturnSelection::Best,
            grad_clip: 1.0,
            checkpoint_every: 0,
            log_timings: false,
            model: ModelConfig::toy(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.k < 2 || 2 * self.k > self.n {
            return Err(ModelError::Config(format!(
                "need 2 <= K <= n/2, got K={} n={}",
                self.k, self.n
            )));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("batches_per_epoch", self.batches_per_epoch),
            ("instances_per_batch", self.instances_per_batch),
            ("trajectories", self.trajectories),
        ] {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        let positive = |v: f64| !v.is_nan() && v > 0.0;
        if !positive(self.learning_rate) || !positive(self.grad_clip) {
            return Err(ModelError::Config(
                "learning_rate and grad_clip must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| ModelError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Metadata stored in checkpoint files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub batches_trained: usize,
}

/// One sampled generation trajectory with its enumerated merge rollouts.
pub struct TrajectoryRecord {
    pub starts: Vec<usize>,
    /// Chosen slot per step per agent (replayable).
    pub gen_slots: Vec<Vec<usize>>,
    /// Log-prob nodes `[agent][step]`.
    pub gen_logps: Vec<Vec<Var>>,
    /// Chosen endpoint per step, per merge start (replayable).
    pub merge_choices: Vec<Vec<usize>>,
    /// Log-prob nodes `[merge start][step]`.
    pub merge_logps: Vec<Vec<Var>>,
    /// Terminal return (negated tour length) per merge start.
    pub returns: Vec<f64>,
}

/// All trajectories rolled out for one instance inside one graph.
pub struct InstanceRecord {
    pub trajectories: Vec<TrajectoryRecord>,
    /// `K + |I|` (fixed given n and K).
    pub half: usize,
}

/// Replayable action record extracted from an [`InstanceRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub starts: Vec<Vec<usize>>,
    pub gen_slots: Vec<Vec<Vec<usize>>>,
    pub merge_choices: Vec<Vec<Vec<usize>>>,
}

impl InstanceRecord {
    pub fn replay_record(&self) -> ReplayRecord {
        ReplayRecord {
            starts: self.trajectories.iter().map(|t| t.starts.clone()).collect(),
            gen_slots: self
                .trajectories
                .iter()
                .map(|t| t.gen_slots.clone())
                .collect(),
            merge_choices: self
                .trajectories
                .iter()
                .map(|t| t.merge_choices.clone())
                .collect(),
        }
    }

    /// Returns flattened `[n][m]`.
    pub fn all_returns(&self) -> Vec<Vec<f64>> {
        self.trajectories.iter().map(|t| t.returns.clone()).collect()
    }
}

/// Sample (or replay) `n_traj` generation trajectories for one instance;
/// for each, enumerate every merge-graph endpoint as a POMO start and roll
/// the merge policy once per start. All log-prob nodes land in `g`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_pomo<T: Scalar>(
    g: &mut Graph<T>,
    gen_vars: &GenVars,
    merge_vars: &MergeVars,
    cfg: &ModelConfig,
    inst: &Instance,
    k: usize,
    n_traj: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    replay: Option<&ReplayRecord>,
) -> Result<InstanceRecord> {
    let n = inst.n();
    let hv = encode_vertices(g, gen_vars, inst)?;
    let mut trajectories = Vec::with_capacity(n_traj);
    let mut half = 0;
    for traj in 0..n_traj {
        let starts: Vec<usize> = match replay {
            Some(r) => r.starts[traj].clone(),
            None => {
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(rng);
                all.truncate(k);
                all
            }
        };
        let gen_mode = match replay {
            Some(r) => GenDecode::Replay(&r.gen_slots[traj]),
            None => GenDecode::Sample,
        };
        let gen = run_generation(g, gen_vars, cfg, inst, hv, &starts, gen_mode, rng)?;
        let mg = gen.state.build_merge_graph()?;
        half = mg.half();
        let hvp = encode_merge_graph(g, merge_vars, inst, &mg)?;

        let mut merge_choices = Vec::with_capacity(mg.size());
        let mut merge_logps = Vec::with_capacity(mg.size());
        let mut returns = Vec::with_capacity(mg.size());
        for q_start in 0..mg.size() {
            let merge_mode = match replay {
                Some(r) => MergeDecode::Replay(&r.merge_choices[traj][q_start]),
                None => MergeDecode::Sample,
            };
            let m = run_merge(
                g,
                merge_vars,
                cfg,
                &gen.state,
                &mg,
                hvp,
                q_start,
                merge_mode,
                rng,
            )?;
            returns.push(m.reward());
            merge_choices.push(m.choices);
            merge_logps.push(m.logps);
        }
        trajectories.push(TrajectoryRecord {
            starts,
            gen_slots: gen.slot_choices,
            gen_logps: gen.logps,
            merge_choices,
            merge_logps,
            returns,
        });
    }
    Ok(InstanceRecord { trajectories, half })
}

/// POMO baselines: `b_d` averages the selected return over trajectories;
/// `b_c` is the per-trajectory mean over merge starts (never pooled across
/// trajectories). Baseline-off mode zeroes both.
pub fn baselines(
    record: &InstanceRecord,
    sel: ReturnSelection,
    mode: BaselineMode,
) -> (f64, Vec<f64>) {
    let n = record.trajectories.len() as f64;
    if mode == BaselineMode::None {
        return (0.0, vec![0.0; record.trajectories.len()]);
    }
    let b_d = record
        .trajectories
        .iter()
        .map(|t| select_return(&t.returns, sel))
        .sum::<f64>()
        / n;
    let b_c = record
        .trajectories
        .iter()
        .map(|t| t.returns.iter().sum::<f64>() / t.returns.len() as f64)
        .collect();
    (b_d, b_c)
}

/// Surrogate loss whose gradient is the negated REINFORCE ascent
/// direction: minimizing it maximizes the expected return. Advantages are
/// detached constants; only the log-probability terms carry gradients.
pub fn surrogate_loss<T: Scalar>(
    g: &mut Graph<T>,
    record: &InstanceRecord,
    sel: ReturnSelection,
    mode: BaselineMode,
) -> Result<Var> {
    surrogate_loss_with_returns(g, record, &record.all_returns(), sel, mode)
}

/// Loss assembly with explicit returns (tests substitute scaled returns to
/// check linearity).
pub fn surrogate_loss_with_returns<T: Scalar>(
    g: &mut Graph<T>,
    record: &InstanceRecord,
    returns: &[Vec<f64>],
    sel: ReturnSelection,
    mode: BaselineMode,
) -> Result<Var> {
    let n_traj = record.trajectories.len();
    let k = record.trajectories[0].gen_logps.len();
    let (b_d, b_c) = {
        // baselines over the substituted returns
        let n = n_traj as f64;
        match mode {
            BaselineMode::None => (0.0, vec![0.0; n_traj]),
            BaselineMode::Pomo => (
                returns.iter().map(|r| select_return(r, sel)).sum::<f64>() / n,
                returns
                    .iter()
                    .map(|r| r.iter().sum::<f64>() / r.len() as f64)
                    .collect(),
            ),
        }
    };

    let mut terms: Vec<Var> = Vec::new();
    for (t_idx, traj) in record.trajectories.iter().enumerate() {
        let selected = select_return(&returns[t_idx], sel);
        let adv_d = selected - b_d;
        let coeff_d = -adv_d / (n_traj as f64 * k as f64);
        for agent_logps in &traj.gen_logps {
            if agent_logps.is_empty() {
                continue; // T' = 0: no generation decisions
            }
            let sum = g.add_n(agent_logps)?;
            terms.push(g.scale(sum, coeff_d));
        }
        let m_count = traj.merge_logps.len() as f64;
        for (m_idx, logps) in traj.merge_logps.iter().enumerate() {
            let adv_c = returns[t_idx][m_idx] - b_c[t_idx];
            let coeff_c = -adv_c / (n_traj as f64 * m_count);
            let sum = g.add_n(logps)?;
            terms.push(g.scale(sum, coeff_c));
        }
    }
    g.add_n(&terms).map_err(Into::into)
}

/// Per-batch statistics for the training log.
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchStats {
    pub mean_return: f64,
    pub mean_b_d: f64,
    pub grad_norm_gen: f64,
    pub grad_norm_merge: f64,
    pub loss: f64,
}

/// Gradients plus (mean return, POMO b_d, loss) for one instance.
type InstancePass<T> = (GradMap<T>, f64, f64, f64);

#[allow(clippy::too_many_arguments)]
fn instance_pass<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &ModelConfig,
    inst: &Instance,
    k: usize,
    n_traj: usize,
    seed: Seed,
    sel: ReturnSelection,
    mode: BaselineMode,
) -> Result<InstancePass<T>> {
    let mut g: Graph<T> = Graph::new();
    let binding = params.bind(&mut g);
    let gen_vars = GenVars::bind(&binding, cfg)?;
    let merge_vars = MergeVars::bind(&binding, cfg)?;
    let mut rng = seed.rng();
    let record = rollout_pomo(
        &mut g,
        &gen_vars,
        &merge_vars,
        cfg,
        inst,
        k,
        n_traj,
        &mut rng,
        None,
    )?;
    let loss = surrogate_loss(&mut g, &record, sel, mode)?;
    let loss_val = g.value(loss).item().to_f64();
    let grads = g.backward(loss)?;
    let named = binding.collect_grads(&g, &grads, params);
    let (b_d, _) = baselines(&record, sel, BaselineMode::Pomo);
    let mean_return = record
        .trajectories
        .iter()
        .flat_map(|t| t.returns.iter())
        .sum::<f64>()
        / record
            .trajectories
            .iter()
            .map(|t| t.returns.len())
            .sum::<usize>() as f64;
    Ok((named, mean_return, b_d, loss_val))
}

/// One batch's averaged gradient over instances, in a fixed reduction
/// order regardless of worker scheduling. Exposed for the variance probes
/// as well as the train loop.
#[allow(clippy::too_many_arguments)]
pub fn batch_gradient<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &ModelConfig,
    instances: &[Instance],
    k: usize,
    n_traj: usize,
    seed: Seed,
    sel: ReturnSelection,
    mode: BaselineMode,
) -> Result<(GradMap<T>, BatchStats)> {
    let passes: Vec<Result<_>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            instance_pass(
                params,
                cfg,
                inst,
                k,
                n_traj,
                seed.derive(&[i as u64]),
                sel,
                mode,
            )
        })
        .collect();

    let scale = T::from_f64(1.0 / instances.len() as f64);
    let mut total: GradMap<T> = BTreeMap::new();
    let mut stats = BatchStats::default();
    for pass in passes {
        let (named, mean_return, b_d, loss) = pass?;
        stats.mean_return += mean_return / instances.len() as f64;
        stats.mean_b_d += b_d / instances.len() as f64;
        stats.loss += loss / instances.len() as f64;
        for (name, grad) in named {
            total
                .entry(name)
                .and_modify(|t| t.add_scaled(&grad, T::ONE))
                .or_insert(grad);
        }
    }
    for t in total.values_mut() {
        for v in t.data_mut() {
            *v = *v * scale;
        }
    }
    Ok((total, stats))
}

/// Clip the subset of gradients under a name prefix to a global-norm cap;
/// returns the pre-clip norm.
pub fn clip_prefix<T: Scalar>(
    grads: &mut GradMap<T>,
    prefix: &str,
    max_norm: f64,
) -> f64 {
    let norm = grads
        .iter()
        .filter(|(n, _)| n.starts_with(prefix))
        .map(|(_, g)| g.frobenius_sq())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = T::from_f64(max_norm / norm);
        for (name, g) in grads.iter_mut() {
            if name.starts_with(prefix) {
                for v in g.data_mut() {
                    *v = *v * k;
                }
            }
        }
    }
    norm
}

/// Greedy-decode a set of instances and return the mean tour length.
/// Per-instance seeds derive from `seed`, so evaluation is reproducible
/// and start vertices are identical across policy snapshots.
pub fn greedy_eval<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &ModelConfig,
    instances: &[Instance],
    k: usize,
    seed: Seed,
) -> Result<f64> {
    let lengths: Vec<Result<f64>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let opts = crate::rollout::SolveOptions::default();
            let (tour, _) =
                crate::rollout::solve(params, cfg, inst, k, seed.derive(&[i as u64]), &opts)?;
            Ok(tour.length())
        })
        .collect();
    let mut total = 0.0;
    for l in lengths {
        total += l?;
    }
    Ok(total / instances.len() as f64)
}

/// Outputs of a training run.
pub struct TrainOutputs {
    pub params: ParamSet<f32>,
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub log_csv: String,
    pub batches: usize,
}

/// Full training loop (32-bit). Writes `train_log.csv` and
/// `checkpoint.bin` (plus periodic `checkpoint_b{batch}.bin`) to
/// `out_dir`.
pub fn train(cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutputs> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let root = Seed(cfg.seed);
    let mut params: ParamSet<f32> = init_params(&cfg.model, &mut root.derive(&[0x1717]).rng());
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut log = String::from("batch,mean_return,b_d,grad_norm_theta,grad_norm_phi,wall_ms\n");

    let meta = |batches: usize| {
        serde_json::to_string(&CheckpointMeta {
            model: cfg.model.clone(),
            k: cfg.k,
            n: cfg.n,
            seed: cfg.seed,
            batches_trained: batches,
        })
        .expect("meta serializes")
    };

    let mut batch_no = 0usize;
    for epoch in 0..cfg.epochs {
        for b in 0..cfg.batches_per_epoch {
            let started = Instant::now();
            let instances = generate_instances(
                cfg.n,
                cfg.instances_per_batch,
                root.derive(&[1, epoch as u64, b as u64]),
            )?;
            let (mut grads, stats) = batch_gradient(
                &params,
                &cfg.model,
                &instances,
                cfg.k,
                cfg.trajectories,
                root.derive(&[2, epoch as u64, b as u64]),
                cfg.return_selection,
                cfg.baseline,
            )?;
            if !stats.loss.is_finite() || global_norm(&grads).is_nan() {
                let diag = out_dir.join("checkpoint_diverged.bin");
                save_checkpoint(&diag, &meta(batch_no), &params, Some(&adam))?;
                return Err(ModelError::Diverged {
                    batch: batch_no,
                    detail: format!("loss {} (diagnostic checkpoint written)", stats.loss),
                });
            }
            let norm_gen = clip_prefix(&mut grads, "gen/", cfg.grad_clip);
            let norm_merge = clip_prefix(&mut grads, "merge/", cfg.grad_clip);
            adam.apply(&mut params, &grads);
            batch_no += 1;

            let wall_ms = if cfg.log_timings {
                started.elapsed().as_millis() as u64
            } else {
                0
            };
            let _ = writeln!(
                log,
                "{batch_no},{},{},{},{},{wall_ms}",
                stats.mean_return, stats.mean_b_d, norm_gen, norm_merge
            );
            if cfg.checkpoint_every > 0 && batch_no.is_multiple_of(cfg.checkpoint_every) {
                save_checkpoint(
                    out_dir.join(format!("checkpoint_b{batch_no}.bin")),
                    &meta(batch_no),
                    &params,
                    Some(&adam),
                )?;
            }
        }
    }

    let checkpoint_path = out_dir.join("checkpoint.bin");
    save_checkpoint(&checkpoint_path, &meta(batch_no), &params, Some(&adam))?;
    let log_path = out_dir.join("train_log.csv");
    std::fs::write(&log_path, &log)?;
    Ok(TrainOutputs {
        params,
        checkpoint_path,
        log_path,
        log_csv: log,
        batches: batch_no,
    })
}
