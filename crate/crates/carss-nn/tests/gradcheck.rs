//! Finite-difference verification of every differentiable op, in 64-bit
//! with randomized probes. The oracle builds the graph twice per probe with
//! a perturbed input entry and compares the central difference against the
//! analytic gradient.

use carss_nn::graph::{Graph, Mask, Var};
use carss_nn::layers;
use carss_nn::params::ParamSet;
use carss_nn::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REL_TOL: f64 = 1e-5;
const EPS: f64 = 1e-6;
const PROBES: usize = 10;

/// Check d(loss)/d(inputs) for a graph builder against central finite
/// differences at `PROBES` random input entries.
fn fd_check(
    name: &str,
    rng: &mut ChaCha8Rng,
    inputs: &[Tensor<f64>],
    build: impl Fn(&mut Graph<f64>, &[Var]) -> Var,
) {
    let eval = |tensors: &[Tensor<f64>]| -> (f64, Vec<Option<Tensor<f64>>>) {
        let mut g = Graph::new();
        let vars: Vec<Var> = tensors.iter().map(|t| g.param(t.clone())).collect();
        let loss = build(&mut g, &vars);
        let value = g.value(loss).item();
        let grads = g.backward(loss).unwrap();
        let collected = vars.iter().map(|&v| grads.get(v).cloned()).collect();
        (value, collected)
    };

    let (_, analytic) = eval(inputs);
    for _ in 0..PROBES {
        let which = rng.random_range(0..inputs.len());
        let idx = rng.random_range(0..inputs[which].len());
        let mut plus = inputs.to_vec();
        let mut minus = inputs.to_vec();
        plus[which].data_mut()[idx] += EPS;
        minus[which].data_mut()[idx] -= EPS;
        let (fp, _) = eval(&plus);
        let (fm, _) = eval(&minus);
        let numeric = (fp - fm) / (2.0 * EPS);
        let exact = analytic[which]
            .as_ref()
            .map(|t| t.data()[idx])
            .unwrap_or(0.0);
        let denom = exact.abs().max(numeric.abs()).max(1e-4);
        let rel = (exact - numeric).abs() / denom;
        assert!(
            rel < REL_TOL,
            "{name}: input {which}[{idx}] analytic {exact} vs numeric {numeric} (rel {rel:.2e})"
        );
    }
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xC0FFEE)
}

fn rand_t(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor<f64> {
    Tensor::uniform(rng, r, c, -1.5, 1.5)
}

/// Reduce any matrix to a scalar with fixed random-ish weights so the test
/// exercises full output sensitivity.
fn spread_loss(g: &mut Graph<f64>, x: Var) -> Var {
    let (rows, cols) = g.value(x).shape();
    let data: Vec<f64> = (0..rows * cols)
        .map(|i| 0.3 + 0.13 * (i as f64) * if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let w = g.constant(Tensor::from_vec(rows, cols, data).unwrap());
    let prod = g.mul_elem(x, w).unwrap();
    let flatten: Vec<usize> = vec![0; 1];
    let _ = flatten;
    // sum all entries: multiply by ones from both sides
    let ones_left = g.constant(Tensor::filled(1, rows, 1.0));
    let ones_right = g.constant(Tensor::filled(cols, 1, 1.0));
    let s = g.matmul(ones_left, prod).unwrap();
    g.matmul(s, ones_right).unwrap()
}

#[test]
fn fd_matmul() {
    let mut r = rng();
    let a = rand_t(&mut r, 3, 4);
    let b = rand_t(&mut r, 4, 2);
    fd_check("matmul", &mut r, &[a, b], |g, v| {
        let y = g.matmul(v[0], v[1]).unwrap();
        spread_loss(g, y)
    });
}

#[test]
fn fd_transpose_add_scale() {
    let mut r = rng();
    let a = rand_t(&mut r, 3, 2);
    let b = rand_t(&mut r, 2, 3);
    fd_check("transpose+add+scale", &mut r, &[a, b], |g, v| {
        let at = g.transpose(v[0]);
        let s = g.add(at, v[1]).unwrap();
        let sc = g.scale(s, -1.7);
        spread_loss(g, sc)
    });
}

#[test]
fn fd_add_row() {
    let mut r = rng();
    let a = rand_t(&mut r, 4, 3);
    let row = rand_t(&mut r, 1, 3);
    fd_check("add_row", &mut r, &[a, row], |g, v| {
        let y = g.add_row(v[0], v[1]).unwrap();
        spread_loss(g, y)
    });
}

#[test]
fn fd_mul_elem_tanh_relu() {
    let mut r = rng();
    let a = rand_t(&mut r, 3, 3);
    let b = rand_t(&mut r, 3, 3);
    fd_check("mul+tanh+relu", &mut r, &[a, b], |g, v| {
        let m = g.mul_elem(v[0], v[1]).unwrap();
        let t = g.tanh(m);
        let rl = g.relu(t);
        spread_loss(g, rl)
    });
}

#[test]
fn fd_masked_softmax() {
    let mut r = rng();
    let a = rand_t(&mut r, 2, 5);
    let mask = Mask::new(
        2,
        5,
        vec![true, true, false, true, true, true, false, true, true, false],
    )
    .unwrap();
    fd_check("masked_softmax", &mut r, &[a], move |g, v| {
        let y = g.masked_softmax(v[0], &mask).unwrap();
        spread_loss(g, y)
    });
}

#[test]
fn fd_softmax_gradient_spec_example() {
    // rel. error < 1e-6 at a few probes per the tighter op-level contract
    let mut r = rng();
    let a = rand_t(&mut r, 1, 6);
    let eval = |t: &Tensor<f64>| -> (f64, Tensor<f64>) {
        let mut g = Graph::new();
        let v = g.param(t.clone());
        let y = g.softmax(v).unwrap();
        let loss = {
            let w = g.constant(Tensor::from_vec(1, 6, vec![0.9, -0.4, 0.3, 1.2, -0.7, 0.1]).unwrap());
            let p = g.mul_elem(y, w).unwrap();
            let ones = g.constant(Tensor::filled(6, 1, 1.0));
            g.matmul(p, ones).unwrap()
        };
        let grads = g.backward(loss).unwrap();
        (g.value(loss).item(), grads.get(v).unwrap().clone())
    };
    let (_, analytic) = eval(&a);
    for idx in 0..6 {
        let mut plus = a.clone();
        let mut minus = a.clone();
        plus.data_mut()[idx] += EPS;
        minus.data_mut()[idx] -= EPS;
        let numeric = (eval(&plus).0 - eval(&minus).0) / (2.0 * EPS);
        let exact = analytic.data()[idx];
        let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-6);
        assert!(rel < 1e-6, "softmax grad idx {idx}: {exact} vs {numeric}");
    }
}

#[test]
fn fd_layer_norm() {
    let mut r = rng();
    let x = rand_t(&mut r, 3, 6);
    let gamma = rand_t(&mut r, 1, 6);
    let beta = rand_t(&mut r, 1, 6);
    fd_check("layer_norm", &mut r, &[x, gamma, beta], |g, v| {
        let y = g.layer_norm(v[0], v[1], v[2]).unwrap();
        spread_loss(g, y)
    });
}

#[test]
fn fd_concat_gather_mean_entry_ln() {
    let mut r = rng();
    let a = rand_t(&mut r, 2, 3);
    let b = rand_t(&mut r, 3, 3);
    fd_check("concat+gather+mean", &mut r, &[a, b], |g, v| {
        let cat = g.concat_rows(&[v[0], v[1]]).unwrap();
        let picked = g.gather_rows(cat, &[4, 0, 0, 2]).unwrap();
        let mean = g.rows_mean(picked, &[0, 1, 3]).unwrap();
        let wide = g.concat_cols(&[mean, mean]).unwrap();
        spread_loss(g, wide)
    });
}

#[test]
fn fd_log_prob_pattern() {
    // The exact pattern policies use: entry of a masked softmax, then ln.
    let mut r = rng();
    let a = rand_t(&mut r, 1, 5);
    let mask = Mask::new(1, 5, vec![true, true, true, false, true]).unwrap();
    fd_check("log_prob", &mut r, &[a], move |g, v| {
        let clipped = g.clipped_logits(v[0], 10.0);
        let probs = g.masked_softmax(clipped, &mask).unwrap();
        let p = g.entry(probs, 0, 2).unwrap();
        g.ln(p).unwrap()
    });
}

#[test]
fn fd_add_n() {
    let mut r = rng();
    let a = rand_t(&mut r, 2, 2);
    let b = rand_t(&mut r, 2, 2);
    let c = rand_t(&mut r, 2, 2);
    fd_check("add_n", &mut r, &[a, b, c], |g, v| {
        let s = g.add_n(&[v[0], v[1], v[2], v[0]]).unwrap();
        spread_loss(g, s)
    });
}

#[test]
fn fd_full_attention_block() {
    // End-to-end through MHA + FFN + residual/norm wrapping.
    let mut r = rng();
    let mut ps = ParamSet::<f64>::new();
    layers::init_block(&mut ps, "blk", 8, 12, 2, true, &mut r);
    let x0 = rand_t(&mut r, 4, 8);
    let names: Vec<String> = ps.names().cloned().collect();
    let tensors: Vec<Tensor<f64>> = names.iter().map(|n| ps.get(n).unwrap().clone()).collect();
    let mut all_inputs = tensors.clone();
    all_inputs.push(x0);

    let mask = Mask::new(
        4,
        4,
        vec![
            true, true, false, true, true, true, true, false, false, true, true, true, true,
            false, true, true,
        ],
    )
    .unwrap();

    fd_check("attention_block", &mut r, &all_inputs, move |g, v| {
        let x = *v.last().unwrap();
        let vars = bind_block_from_sorted(&names, v);
        let y = layers::block(g, &vars, x, x, Some(&mask)).unwrap();
        spread_loss(g, y)
    });
}

/// Reconstruct BlockVars from the sorted parameter name list and the
/// matching Var slice (test-only plumbing).
fn bind_block_from_sorted(names: &[String], vars: &[Var]) -> layers::BlockVars {
    let var_of = |suffix: &str| -> Var {
        let idx = names
            .iter()
            .position(|n| n == &format!("blk/{suffix}"))
            .unwrap_or_else(|| panic!("missing blk/{suffix}"));
        vars[idx]
    };
    layers::BlockVars {
        mha: layers::MhaVars {
            wq: vec![var_of("mha/wq0"), var_of("mha/wq1")],
            wk: vec![var_of("mha/wk0"), var_of("mha/wk1")],
            wv: vec![var_of("mha/wv0"), var_of("mha/wv1")],
            wo: var_of("mha/wo"),
            d_head: 4,
        },
        ffn: layers::FfnVars {
            l1: layers::AffineVars {
                w: var_of("ffn/l1/w"),
                b: var_of("ffn/l1/b"),
            },
            l2: layers::AffineVars {
                w: var_of("ffn/l2/w"),
                b: var_of("ffn/l2/b"),
            },
        },
        ln1: Some(layers::LayerNormVars {
            gamma: var_of("ln1/gamma"),
            beta: var_of("ln1/beta"),
        }),
        ln2: Some(layers::LayerNormVars {
            gamma: var_of("ln2/gamma"),
            beta: var_of("ln2/beta"),
        }),
    }
}

#[test]
fn gradients_skip_unreachable_parameters() {
    let mut r = rng();
    let mut g = Graph::<f64>::new();
    let used = g.param(rand_t(&mut r, 1, 3));
    let unused = g.param(rand_t(&mut r, 1, 3));
    let w = g.constant(Tensor::filled(3, 1, 1.0));
    let loss = g.matmul(used, w).unwrap();
    let grads = g.backward(loss).unwrap();
    assert!(grads.get(used).is_some());
    assert!(grads.get(unused).is_none());
}
