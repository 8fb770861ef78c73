//! Implementations of the CLI subcommands.

use crate::render::{render_svg, RenderSpec};
use crate::report::{aggregate, report_to_csv, report_to_table};
use crate::solvers::{load_carss, parse_solver, rows_to_csv, Solver, SolveRow};
use crate::{
    AppError, AppResult, BenchArgs, DescribeArgs, GenerateArgs, RenderArgs, SolveArgs, TrainArgs,
};
use carss_core::baselines::held_karp;
use carss_core::env::trace::RolloutTrace;
use carss_core::env::GameState;
use carss_core::{gap, generate_instances, Instance, Seed};
use carss_model::config::{describe as describe_model, init_params, ModelConfig};
use carss_model::{CheckpointMeta, TrainConfig};
use carss_nn::checkpoint::load_checkpoint;
use carss_nn::ParamSet;
use rand::Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn generate(args: GenerateArgs) -> AppResult<()> {
    let instances = generate_instances(args.n, args.count, Seed(args.seed))?;
    std::fs::create_dir_all(&args.out)?;
    for inst in &instances {
        carss_core::io::write_instance(inst, args.out.join(format!("{}.carss", inst.id())))?;
    }
    println!(
        "wrote {} instances of size {} to {}",
        instances.len(),
        args.n,
        args.out.display()
    );
    Ok(())
}

pub fn train(args: TrainArgs) -> AppResult<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            TrainConfig::from_toml(&text)?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = carss_model::train(&cfg, &args.out)?;
    println!(
        "trained {} batches; checkpoint {} log {}",
        out.batches,
        out.checkpoint_path.display(),
        out.log_path.display()
    );
    Ok(())
}

/// Load instance files; directories are expanded to their instance files
/// in name order.
fn load_instances(paths: &[PathBuf]) -> AppResult<Vec<Instance>> {
    let mut files: Vec<PathBuf> = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("carss") | Some("tsp")
                    )
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(AppError::Data("no instance files found".into()));
    }
    files
        .iter()
        .map(|f| carss_core::io::read_instance(f).map_err(Into::into))
        .collect()
}

fn gather_instances(
    instances: &[PathBuf],
    n: Option<usize>,
    count: Option<usize>,
    seed: u64,
) -> AppResult<Vec<Instance>> {
    if !instances.is_empty() {
        load_instances(instances)
    } else {
        match (n, count) {
            (Some(n), Some(count)) => Ok(generate_instances(n, count, Seed(seed))?),
            _ => Err(AppError::Data(
                "provide --instances or both --n and --count".into(),
            )),
        }
    }
}

/// Run one solver over instances in parallel, with per-instance derived
/// seeds and deterministic row order.
type RunOutput = (Vec<SolveRow>, Vec<Option<RolloutTrace>>, Vec<carss_core::Tour>);

fn run_rows(
    solver: &Solver,
    instances: &[Instance],
    seed: u64,
    timings: bool,
) -> AppResult<RunOutput> {
    let results: Vec<AppResult<(SolveRow, Option<RolloutTrace>, carss_core::Tour)>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let started = Instant::now();
            let (tour, trace) = solver.run(inst, Seed(seed).derive(&[0x501E, i as u64]))?;
            let wall_ms = if timings {
                started.elapsed().as_millis() as u64
            } else {
                0
            };
            Ok((
                SolveRow {
                    instance_idx: i,
                    instance_id: inst.id().to_string(),
                    n: inst.n(),
                    k: solver.k(),
                    algo: solver.tag(),
                    obj: tour.length(),
                    gap_pct: None,
                    wall_ms,
                    seed,
                },
                trace,
                tour,
            ))
        })
        .collect();
    let mut rows = Vec::with_capacity(instances.len());
    let mut traces = Vec::with_capacity(instances.len());
    let mut tours = Vec::with_capacity(instances.len());
    for r in results {
        let (row, trace, tour) = r?;
        rows.push(row);
        traces.push(trace);
        tours.push(tour);
    }
    Ok((rows, traces, tours))
}

/// Reference objective per instance: the exact optimum when small enough,
/// otherwise the best objective seen in this run ("best-known-in-run").
fn fill_gaps(rows: &mut [SolveRow], instances: &[Instance]) -> AppResult<()> {
    let n = instances.first().map(|i| i.n()).unwrap_or(0);
    let refs: Vec<f64> = if n <= carss_core::baselines::HELD_KARP_MAX {
        instances
            .par_iter()
            .map(|inst| held_karp(inst).map(|t| t.length()))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let mut best = vec![f64::INFINITY; instances.len()];
        for row in rows.iter() {
            best[row.instance_idx] = best[row.instance_idx].min(row.obj);
        }
        best
    };
    for row in rows.iter_mut() {
        row.gap_pct = Some(gap(row.obj, refs[row.instance_idx])?);
    }
    Ok(())
}

pub fn solve(args: SolveArgs) -> AppResult<()> {
    let instances = gather_instances(&args.instances, args.n, args.count, args.seed)?;
    let carss_loader = args.checkpoint.clone().map(|path| {
        let (k, rollouts, sample) = (args.k, args.rollouts, args.sample);
        move || load_carss(&path, k, rollouts, sample)
    });
    let solver = parse_solver(
        &args.algo,
        carss_loader
            .as_ref()
            .map(|f| f as &dyn Fn() -> AppResult<_>),
    )?;
    if args.trace.is_some() && !matches!(solver, Solver::Carss(_)) {
        return Err(AppError::Data("--trace requires --algo carss".into()));
    }

    if let Some(dump_path) = &args.dump_assignment {
        dump_assignment(&solver, &instances[0], args.seed, dump_path)?;
    }

    let (mut rows, traces, tours) = run_rows(&solver, &instances, args.seed, args.timings)?;
    // exact reference is affordable at oracle sizes
    if instances
        .first()
        .map(|i| i.n() <= carss_core::baselines::HELD_KARP_MAX)
        .unwrap_or(false)
    {
        fill_gaps(&mut rows, &instances)?;
    }
    let csv = rows_to_csv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }

    if let Some(trace_path) = &args.trace {
        let mut blob = String::new();
        for t in traces.iter().flatten() {
            blob.push_str(&t.to_jsonl());
        }
        std::fs::write(trace_path, blob)?;
    }
    if let Some(tour_dir) = &args.tours {
        std::fs::create_dir_all(tour_dir)?;
        for (inst, tour) in instances.iter().zip(&tours) {
            carss_core::io::write_tour(tour, tour_dir.join(format!("{}.tour", inst.id())))?;
        }
    }
    Ok(())
}

/// Debug dump of the first instance's initial-state assignment as
/// `vertex,agent,distance` CSV, using the same seeded starts the first
/// rollout would draw.
fn dump_assignment(
    solver: &Solver,
    inst: &Instance,
    seed: u64,
    path: &Path,
) -> AppResult<()> {
    let Solver::Carss(c) = solver else {
        return Err(AppError::Data(
            "--dump-assignment requires --algo carss".into(),
        ));
    };
    let mut rng = Seed(seed).derive(&[0x501E, 0]).rng();
    let n = inst.n();
    let mut starts: Vec<usize> = (0..n).collect();
    for i in 0..c.k.min(n - 1) {
        let j = rng.random_range(i..n);
        starts.swap(i, j);
    }
    starts.truncate(c.k);
    let state = GameState::init(inst, c.k, &starts)?;
    let assignment = state.assignment()?;
    let mut csv = String::from("vertex,agent,distance\n");
    for v in 0..n {
        if let Some(agent) = assignment.agent_of(v) {
            let _ = writeln!(csv, "{v},{agent},{}", assignment.dist_to_agent(v));
        }
    }
    std::fs::write(path, csv)?;
    Ok(())
}

pub fn bench(args: BenchArgs) -> AppResult<()> {
    if args.algos.is_empty() {
        return Err(AppError::Data("--algos must name at least one solver".into()));
    }
    let instances = generate_instances(args.n, args.count, Seed(args.seed))?;
    let mut all_rows: Vec<SolveRow> = Vec::new();
    for name in &args.algos {
        let carss_loader = args.checkpoint.clone().map(|path| {
            let (k, rollouts) = (args.k, args.rollouts);
            move || load_carss(&path, k, rollouts, false)
        });
        let solver = parse_solver(
            name,
            carss_loader
                .as_ref()
                .map(|f| f as &dyn Fn() -> AppResult<_>),
        )?;
        let (rows, _, _) = run_rows(&solver, &instances, args.seed, args.timings)?;
        all_rows.extend(rows);
    }
    fill_gaps(&mut all_rows, &instances)?;
    let report = aggregate(&all_rows);
    print!("{}", report_to_table(&report));
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench_rows.csv"), rows_to_csv(&all_rows))?;
        std::fs::write(dir.join("bench_report.csv"), report_to_csv(&report))?;
    }
    Ok(())
}

fn load_params_for_render(
    checkpoint: Option<&Path>,
    k_flag: Option<usize>,
    seed: u64,
) -> AppResult<(ParamSet<f32>, ModelConfig, usize)> {
    match checkpoint {
        Some(path) => {
            let loaded = load_checkpoint::<f32>(path)?;
            let meta: CheckpointMeta = serde_json::from_str(&loaded.meta)
                .map_err(|e| AppError::Data(format!("checkpoint metadata: {e}")))?;
            Ok((loaded.params, meta.model.clone(), k_flag.unwrap_or(meta.k)))
        }
        None => {
            // untrained policy: fresh seeded initialization
            let cfg = ModelConfig::toy();
            let params = init_params(&cfg, &mut Seed(seed).derive(&[0x1717]).rng());
            let k = k_flag.ok_or_else(|| {
                AppError::Data("--k is required when no checkpoint is given".into())
            })?;
            Ok((params, cfg, k))
        }
    }
}

pub fn render(args: RenderArgs) -> AppResult<()> {
    let spec = RenderSpec::default();
    let (inst, trace) = match &args.from_trace {
        Some(trace_path) => {
            let instance_path = args.instance.as_ref().ok_or_else(|| {
                AppError::Data("--from-trace needs --instance for coordinates".into())
            })?;
            let inst = carss_core::io::read_instance(instance_path)?;
            let text = std::fs::read_to_string(trace_path)?;
            let trace = RolloutTrace::from_jsonl(&text)?;
            (inst, trace)
        }
        None => {
            let inst = match (&args.instance, args.n) {
                (Some(path), _) => carss_core::io::read_instance(path)?,
                (None, Some(n)) => generate_instances(n, 1, Seed(args.seed))?.remove(0),
                (None, None) => {
                    return Err(AppError::Data(
                        "provide --instance, --n, or --from-trace".into(),
                    ))
                }
            };
            let (params, model, k) =
                load_params_for_render(args.checkpoint.as_deref(), args.k, args.seed)?;
            let opts = carss_model::SolveOptions::default();
            let (_, trace) =
                carss_model::solve(&params, &model, &inst, k, Seed(args.seed), &opts)?;
            (inst, trace)
        }
    };
    let svg = render_svg(&inst, &trace, &spec)?;
    std::fs::write(&args.out, svg)?;
    if let Some(trace_path) = &args.trace {
        std::fs::write(trace_path, trace.to_jsonl())?;
    }
    println!(
        "rendered {} (n={}, K={}, length {:.4}) to {}",
        trace.instance_id,
        trace.n,
        trace.k,
        trace.length,
        args.out.display()
    );
    Ok(())
}

pub fn describe(args: DescribeArgs) -> AppResult<()> {
    let (cfg, params) = match (&args.checkpoint, &args.config) {
        (Some(path), _) => {
            let loaded = load_checkpoint::<f32>(path)?;
            let meta: CheckpointMeta = serde_json::from_str(&loaded.meta)
                .map_err(|e| AppError::Data(format!("checkpoint metadata: {e}")))?;
            (meta.model, loaded.params)
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let train_cfg = TrainConfig::from_toml(&text)?;
            let params = init_params(
                &train_cfg.model,
                &mut Seed(train_cfg.seed).derive(&[0x1717]).rng(),
            );
            (train_cfg.model, params)
        }
        (None, None) => {
            let cfg = ModelConfig::default();
            let params = init_params(&cfg, &mut Seed(0).derive(&[0x1717]).rng());
            (cfg, params)
        }
    };
    print!("{}", describe_model(&cfg, &params));
    Ok(())
}
