//! Solver registry shared by `solve` and `bench`.

use crate::{AppError, AppResult};
use carss_core::baselines::{
    brute_force, held_karp, insertion, nearest_neighbor, two_opt, InsertionRule,
};
use carss_core::env::trace::RolloutTrace;
use carss_core::{Instance, Seed, Tour};
use carss_model::rollout::SolveOptions;
use carss_model::{CheckpointMeta, ModelConfig};
use carss_nn::checkpoint::load_checkpoint;
use carss_nn::ParamSet;
use std::path::Path;

/// A named solver, ready to run on instances.
pub enum Solver {
    Insertion(InsertionRule),
    TwoOpt,
    NearestNeighbor,
    HeldKarp,
    BruteForce,
    Carss(Box<CarssSolver>),
}

pub struct CarssSolver {
    pub params: ParamSet<f32>,
    pub model: ModelConfig,
    pub k: usize,
    pub opts: SolveOptions,
}

impl Solver {
    pub fn tag(&self) -> String {
        match self {
            Solver::Insertion(r) => r.tag().to_string(),
            Solver::TwoOpt => "2opt".into(),
            Solver::NearestNeighbor => "nn".into(),
            Solver::HeldKarp => "held-karp".into(),
            Solver::BruteForce => "brute-force".into(),
            Solver::Carss(c) => format!("carss(k={})", c.k),
        }
    }

    /// Agent count recorded in result rows; classical solvers are
    /// single-agent.
    pub fn k(&self) -> usize {
        match self {
            Solver::Carss(c) => c.k,
            _ => 1,
        }
    }

    /// Solve one instance. `seed` drives any solver randomness; equal
    /// seeds reproduce identical tours.
    pub fn run(&self, inst: &Instance, seed: Seed) -> AppResult<(Tour, Option<RolloutTrace>)> {
        Ok(match self {
            Solver::Insertion(rule) => (insertion(inst, *rule, seed)?, None),
            Solver::TwoOpt => {
                // documented initialization: nearest-neighbor tour from
                // vertex 0, first-improvement to local optimality
                let init = nearest_neighbor(inst, 0)?;
                (two_opt(inst, &init, None)?, None)
            }
            Solver::NearestNeighbor => (nearest_neighbor(inst, 0)?, None),
            Solver::HeldKarp => (held_karp(inst)?, None),
            Solver::BruteForce => (brute_force(inst)?, None),
            Solver::Carss(c) => {
                let (tour, trace) =
                    carss_model::solve(&c.params, &c.model, inst, c.k, seed, &c.opts)?;
                (tour, Some(trace))
            }
        })
    }
}

/// Load a checkpoint plus its stored metadata.
pub fn load_carss(
    path: &Path,
    k_override: Option<usize>,
    rollouts: usize,
    sample: bool,
) -> AppResult<CarssSolver> {
    let loaded = load_checkpoint::<f32>(path)?;
    let meta: CheckpointMeta = serde_json::from_str(&loaded.meta)
        .map_err(|e| AppError::Data(format!("checkpoint metadata: {e}")))?;
    Ok(CarssSolver {
        params: loaded.params,
        model: meta.model,
        k: k_override.unwrap_or(meta.k),
        opts: SolveOptions {
            extra_rollouts: rollouts,
            sample_actions: sample,
        },
    })
}

/// Resolve a solver name. `carss` requires a loaded checkpoint.
pub fn parse_solver(name: &str, carss: Option<&dyn Fn() -> AppResult<CarssSolver>>) -> AppResult<Solver> {
    Ok(match name {
        "fi" => Solver::Insertion(InsertionRule::Farthest),
        "ri" => Solver::Insertion(InsertionRule::Random),
        "ni" => Solver::Insertion(InsertionRule::Nearest),
        "2opt" => Solver::TwoOpt,
        "nn" => Solver::NearestNeighbor,
        "held-karp" => Solver::HeldKarp,
        "brute-force" => Solver::BruteForce,
        "carss" => {
            let loader = carss.ok_or_else(|| {
                AppError::Data("--algo carss requires --checkpoint".to_string())
            })?;
            Solver::Carss(Box::new(loader()?))
        }
        other => return Err(AppError::Data(format!("unknown solver '{other}'"))),
    })
}

/// One per-instance result row. The CSV schema is fixed:
/// `instance_id,n,K,algo,obj,gap_pct,wall_ms,seed`.
#[derive(Debug, Clone)]
pub struct SolveRow {
    /// Position of the instance within the run (not serialized); gap
    /// references are joined on this, so duplicate file names are safe.
    pub instance_idx: usize,
    pub instance_id: String,
    pub n: usize,
    pub k: usize,
    pub algo: String,
    pub obj: f64,
    pub gap_pct: Option<f64>,
    pub wall_ms: u64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "instance_id,n,K,algo,obj,gap_pct,wall_ms,seed";

impl SolveRow {
    pub fn to_csv(&self) -> String {
        let gap = self
            .gap_pct
            .map(|g| g.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{gap},{},{}",
            self.instance_id, self.n, self.k, self.algo, self.obj, self.wall_ms, self.seed
        )
    }
}

pub fn rows_to_csv(rows: &[SolveRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}
