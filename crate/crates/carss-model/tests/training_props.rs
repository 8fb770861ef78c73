//! Trainer math: baseline formulas, advantage identities, gradient
//! linearity in the returns, and the zero-advantage cases.

use carss_core::{generate_instances, Seed};
use carss_model::config::{init_params, ModelConfig};
use carss_model::gen_policy::GenVars;
use carss_model::merge_policy::MergeVars;
use carss_model::training::{
    baselines, batch_gradient, rollout_pomo, select_return, surrogate_loss,
    surrogate_loss_with_returns, BaselineMode, InstanceRecord, ReturnSelection, TrainConfig,
};
use carss_nn::{Graph, ParamSet, Tensor};
use std::collections::BTreeMap;

fn toy_cfg() -> ModelConfig {
    ModelConfig {
        d_v: 8,
        d_f: 16,
        heads: 2,
        l_enc_v: 1,
        l_enc_a: 1,
        l_enc_vp: 1,
        ..ModelConfig::default()
    }
}

fn make_record(
    g: &mut Graph<f64>,
    params: &ParamSet<f64>,
    cfg: &ModelConfig,
    inst: &carss_core::Instance,
    k: usize,
    n_traj: usize,
    seed: u64,
) -> InstanceRecord {
    let binding = params.bind(g);
    let gen_vars = GenVars::bind(&binding, cfg).unwrap();
    let merge_vars = MergeVars::bind(&binding, cfg).unwrap();
    let mut rng = Seed(seed).rng();
    rollout_pomo(
        g,
        &gen_vars,
        &merge_vars,
        cfg,
        inst,
        k,
        n_traj,
        &mut rng,
        None,
    )
    .unwrap()
}

#[test]
fn return_selection_modes() {
    let returns = [-5.0, -3.5, -7.25];
    assert_eq!(select_return(&returns, ReturnSelection::Best), -3.5);
    assert_eq!(
        select_return(&returns, ReturnSelection::PaperLiteralMin),
        -7.25
    );
}

#[test]
fn baseline_formulas_and_advantage_sums() {
    let cfg = toy_cfg();
    let params: ParamSet<f64> = init_params(&cfg, &mut Seed(1).rng());
    let inst = &generate_instances(12, 1, Seed(2)).unwrap()[0];
    let mut g = Graph::new();
    let record = make_record(&mut g, &params, &cfg, inst, 2, 3, 3);

    let (b_d, b_c) = baselines(&record, ReturnSelection::Best, BaselineMode::Pomo);
    // b_d is the mean over trajectories of the selected return
    let manual: f64 = record
        .trajectories
        .iter()
        .map(|t| select_return(&t.returns, ReturnSelection::Best))
        .sum::<f64>()
        / 3.0;
    assert!((b_d - manual).abs() < 1e-12);

    // b_c is per-trajectory (never pooled): advantage sums vanish exactly
    assert_eq!(b_c.len(), 3);
    for (t, bc) in record.trajectories.iter().zip(&b_c) {
        let mean: f64 = t.returns.iter().sum::<f64>() / t.returns.len() as f64;
        assert!((bc - mean).abs() < 1e-12);
        let adv_sum: f64 = t.returns.iter().map(|r| r - bc).sum();
        assert!(adv_sum.abs() < 1e-9, "per-trajectory advantages must center");
    }
    // distinct trajectories have their own baselines
    assert!(b_c.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-12));

    let (b_d_off, b_c_off) = baselines(&record, ReturnSelection::Best, BaselineMode::None);
    assert_eq!(b_d_off, 0.0);
    assert!(b_c_off.iter().all(|&b| b == 0.0));
}

#[test]
fn single_trajectory_zeroes_the_generation_gradient() {
    // N=1: b_d equals the trajectory's selected return, so the advantage is
    // zero and no gradient reaches the generation parameters.
    let cfg = toy_cfg();
    let params: ParamSet<f64> = init_params(&cfg, &mut Seed(4).rng());
    let inst = &generate_instances(12, 1, Seed(5)).unwrap()[0];
    let mut g = Graph::new();
    let binding = params.bind(&mut g);
    let gen_vars = GenVars::bind(&binding, &cfg).unwrap();
    let merge_vars = MergeVars::bind(&binding, &cfg).unwrap();
    let mut rng = Seed(6).rng();
    let record = rollout_pomo(
        &mut g,
        &gen_vars,
        &merge_vars,
        &cfg,
        inst,
        2,
        1,
        &mut rng,
        None,
    )
    .unwrap();
    let loss = surrogate_loss(&mut g, &record, ReturnSelection::Best, BaselineMode::Pomo).unwrap();
    let grads = g.backward(loss).unwrap();
    let named = binding.collect_grads(&g, &grads, &params);

    let gen_norm: f64 = named
        .iter()
        .filter(|(n, _)| n.starts_with("gen/"))
        .map(|(_, t)| t.frobenius_sq())
        .sum::<f64>()
        .sqrt();
    let merge_norm: f64 = named
        .iter()
        .filter(|(n, _)| n.starts_with("merge/"))
        .map(|(_, t)| t.frobenius_sq())
        .sum::<f64>()
        .sqrt();
    assert!(gen_norm < 1e-12, "theta gradient should vanish, got {gen_norm}");
    assert!(merge_norm > 1e-8, "phi gradient should not vanish");
}

#[test]
fn zero_advantages_give_zero_gradients() {
    // Force every advantage to zero by substituting constant returns.
    let cfg = toy_cfg();
    let params: ParamSet<f64> = init_params(&cfg, &mut Seed(7).rng());
    let inst = &generate_instances(10, 1, Seed(8)).unwrap()[0];
    let mut g = Graph::new();
    let binding = params.bind(&mut g);
    let gen_vars = GenVars::bind(&binding, &cfg).unwrap();
    let merge_vars = MergeVars::bind(&binding, &cfg).unwrap();
    let mut rng = Seed(9).rng();
    let record = rollout_pomo(
        &mut g,
        &gen_vars,
        &merge_vars,
        &cfg,
        inst,
        2,
        2,
        &mut rng,
        None,
    )
    .unwrap();
    let constant: Vec<Vec<f64>> = record
        .trajectories
        .iter()
        .map(|t| vec![-4.0; t.returns.len()])
        .collect();
    let loss = surrogate_loss_with_returns(
        &mut g,
        &record,
        &constant,
        ReturnSelection::Best,
        BaselineMode::Pomo,
    )
    .unwrap();
    assert!(g.value(loss).item().abs() < 1e-12);
    let grads = g.backward(loss).unwrap();
    let named = binding.collect_grads(&g, &grads, &params);
    let norm: f64 = named.values().map(|t| t.frobenius_sq()).sum::<f64>().sqrt();
    assert!(norm < 1e-12, "zero advantages must give zero gradients, got {norm}");
}

#[test]
fn gradients_are_linear_in_return_scaling() {
    // Advantages are affine in the returns, so scaling all returns scales
    // the gradient by the same constant.
    let cfg = toy_cfg();
    let params: ParamSet<f64> = init_params(&cfg, &mut Seed(10).rng());
    let inst = &generate_instances(12, 1, Seed(11)).unwrap()[0];
    let mut g = Graph::new();
    let binding = params.bind(&mut g);
    let gen_vars = GenVars::bind(&binding, &cfg).unwrap();
    let merge_vars = MergeVars::bind(&binding, &cfg).unwrap();
    let mut rng = Seed(12).rng();
    let record = rollout_pomo(
        &mut g,
        &gen_vars,
        &merge_vars,
        &cfg,
        inst,
        2,
        2,
        &mut rng,
        None,
    )
    .unwrap();

    let base_returns = record.all_returns();
    let scaled_returns: Vec<Vec<f64>> = base_returns
        .iter()
        .map(|r| r.iter().map(|x| 3.0 * x).collect())
        .collect();

    let collect = |g: &mut Graph<f64>, returns: &[Vec<f64>]| -> BTreeMap<String, Tensor<f64>> {
        let loss = surrogate_loss_with_returns(
            g,
            &record,
            returns,
            ReturnSelection::Best,
            BaselineMode::Pomo,
        )
        .unwrap();
        let grads = g.backward(loss).unwrap();
        binding.collect_grads(g, &grads, &params)
    };
    let g1 = collect(&mut g, &base_returns);
    let g3 = collect(&mut g, &scaled_returns);
    for (name, a) in &g1 {
        let b = &g3[name];
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!(
                (3.0 * x - y).abs() <= 1e-9 * y.abs().max(1e-6),
                "{name}: {x} scaled vs {y}"
            );
        }
    }
}

#[test]
fn batch_gradient_is_deterministic() {
    let cfg = toy_cfg();
    let params: ParamSet<f64> = init_params(&cfg, &mut Seed(13).rng());
    let instances = generate_instances(10, 4, Seed(14)).unwrap();
    let run = || {
        batch_gradient(
            &params,
            &cfg,
            &instances,
            2,
            2,
            Seed(15),
            ReturnSelection::Best,
            BaselineMode::Pomo,
        )
        .unwrap()
    };
    let (ga, sa) = run();
    let (gb, sb) = run();
    assert_eq!(ga, gb);
    assert_eq!(sa.mean_return, sb.mean_return);
}

#[test]
fn config_toml_round_trip_and_validation() {
    let cfg = TrainConfig::default();
    let text = cfg.to_toml();
    let back = TrainConfig::from_toml(&text).unwrap();
    assert_eq!(back.n, cfg.n);
    assert_eq!(back.model, cfg.model);

    // defaults fill missing keys
    let partial = TrainConfig::from_toml("n = 24\nk = 3\n").unwrap();
    assert_eq!(partial.n, 24);
    assert_eq!(partial.k, 3);
    assert_eq!(partial.trajectories, TrainConfig::default().trajectories);

    assert!(TrainConfig::from_toml("k = 9\nn = 10\n").is_err());
    assert!(TrainConfig::from_toml("epochs = 0\n").is_err());
    assert!(TrainConfig::from_toml("baseline = \"nope\"\n").is_err());
}
