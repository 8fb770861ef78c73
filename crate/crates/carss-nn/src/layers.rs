//! Attention and feed-forward building blocks shared by both policies.
//!
//! Parameter tensors are registered under slash-separated prefixes; the
//! `*Vars` structs resolve those names to graph leaves for one forward
//! pass. Multi-head attention keeps separate per-head projection matrices,
//! so no column slicing is needed.

use crate::error::Result;
use crate::graph::{Graph, Mask, Var};
use crate::params::{Binding, ParamSet};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::Rng;

/// Glorot-uniform initialization.
pub fn glorot<T: Scalar>(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::uniform(rng, rows, cols, -bound, bound)
}

/// Register an affine map `d_in -> d_out` (weight + bias).
pub fn init_affine<T: Scalar>(
    ps: &mut ParamSet<T>,
    prefix: &str,
    d_in: usize,
    d_out: usize,
    rng: &mut impl Rng,
) {
    ps.insert(format!("{prefix}/w"), glorot(rng, d_in, d_out));
    ps.insert(format!("{prefix}/b"), Tensor::zeros(1, d_out));
}

#[derive(Debug, Clone, Copy)]
pub struct AffineVars {
    pub w: Var,
    pub b: Var,
}

impl AffineVars {
    pub fn bind(b: &Binding, prefix: &str) -> Result<Self> {
        Ok(Self {
            w: b.var(&format!("{prefix}/w"))?,
            b: b.var(&format!("{prefix}/b"))?,
        })
    }
}

/// `x W + 1 b`
pub fn affine<T: Scalar>(g: &mut Graph<T>, vars: AffineVars, x: Var) -> Result<Var> {
    let xw = g.matmul(x, vars.w)?;
    g.add_row(xw, vars.b)
}

/// Multi-head attention parameters: per-head Q/K/V projections
/// (`d_model x d_head`) plus the output projection (`d_model x d_model`).
/// `d_model` must be divisible by the head count.
pub fn init_mha<T: Scalar>(
    ps: &mut ParamSet<T>,
    prefix: &str,
    d_model: usize,
    heads: usize,
    rng: &mut impl Rng,
) {
    assert!(
        heads >= 1 && d_model.is_multiple_of(heads),
        "d_model {d_model} not divisible by heads {heads}"
    );
    let d_head = d_model / heads;
    for h in 0..heads {
        ps.insert(format!("{prefix}/wq{h}"), glorot(rng, d_model, d_head));
        ps.insert(format!("{prefix}/wk{h}"), glorot(rng, d_model, d_head));
        ps.insert(format!("{prefix}/wv{h}"), glorot(rng, d_model, d_head));
    }
    ps.insert(format!("{prefix}/wo"), glorot(rng, d_model, d_model));
}

#[derive(Debug, Clone)]
pub struct MhaVars {
    pub wq: Vec<Var>,
    pub wk: Vec<Var>,
    pub wv: Vec<Var>,
    pub wo: Var,
    pub d_head: usize,
}

impl MhaVars {
    pub fn bind(b: &Binding, prefix: &str, d_model: usize, heads: usize) -> Result<Self> {
        let mut wq = Vec::with_capacity(heads);
        let mut wk = Vec::with_capacity(heads);
        let mut wv = Vec::with_capacity(heads);
        for h in 0..heads {
            wq.push(b.var(&format!("{prefix}/wq{h}"))?);
            wk.push(b.var(&format!("{prefix}/wk{h}"))?);
            wv.push(b.var(&format!("{prefix}/wv{h}"))?);
        }
        Ok(Self {
            wq,
            wk,
            wv,
            wo: b.var(&format!("{prefix}/wo"))?,
            d_head: d_model / heads,
        })
    }
}

/// Scaled dot-product multi-head attention. `mask` (query rows x key rows)
/// excludes key positions per query; `None` attends everywhere (the
/// all-ones mask).
pub fn mha<T: Scalar>(
    g: &mut Graph<T>,
    vars: &MhaVars,
    q: Var,
    k: Var,
    v: Var,
    mask: Option<&Mask>,
) -> Result<Var> {
    let scale = 1.0 / (vars.d_head as f64).sqrt();
    let q_rows = g.value(q).rows();
    let k_rows = g.value(k).rows();
    let full;
    let mask = match mask {
        Some(m) => m,
        None => {
            full = Mask::all(q_rows, k_rows);
            &full
        }
    };
    let mut heads = Vec::with_capacity(vars.wq.len());
    for h in 0..vars.wq.len() {
        let qh = g.matmul(q, vars.wq[h])?;
        let kh = g.matmul(k, vars.wk[h])?;
        let vh = g.matmul(v, vars.wv[h])?;
        let kt = g.transpose(kh);
        let scores = g.matmul(qh, kt)?;
        let scaled = g.scale(scores, scale);
        let attn = g.masked_softmax(scaled, mask)?;
        heads.push(g.matmul(attn, vh)?);
    }
    let cat = g.concat_cols(&heads)?;
    g.matmul(cat, vars.wo)
}

/// Two affine maps with a ReLU between them.
pub fn init_ffn<T: Scalar>(
    ps: &mut ParamSet<T>,
    prefix: &str,
    d_in: usize,
    d_hidden: usize,
    d_out: usize,
    rng: &mut impl Rng,
) {
    init_affine(ps, &format!("{prefix}/l1"), d_in, d_hidden, rng);
    init_affine(ps, &format!("{prefix}/l2"), d_hidden, d_out, rng);
}

#[derive(Debug, Clone, Copy)]
pub struct FfnVars {
    pub l1: AffineVars,
    pub l2: AffineVars,
}

impl FfnVars {
    pub fn bind(b: &Binding, prefix: &str) -> Result<Self> {
        Ok(Self {
            l1: AffineVars::bind(b, &format!("{prefix}/l1"))?,
            l2: AffineVars::bind(b, &format!("{prefix}/l2"))?,
        })
    }
}

pub fn ffn<T: Scalar>(g: &mut Graph<T>, vars: FfnVars, x: Var) -> Result<Var> {
    let h = affine(g, vars.l1, x)?;
    let h = g.relu(h);
    affine(g, vars.l2, h)
}

pub fn init_layer_norm<T: Scalar>(ps: &mut ParamSet<T>, prefix: &str, d: usize) {
    ps.insert(format!("{prefix}/gamma"), Tensor::filled(1, d, T::ONE));
    ps.insert(format!("{prefix}/beta"), Tensor::zeros(1, d));
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNormVars {
    pub gamma: Var,
    pub beta: Var,
}

impl LayerNormVars {
    pub fn bind(b: &Binding, prefix: &str) -> Result<Self> {
        Ok(Self {
            gamma: b.var(&format!("{prefix}/gamma"))?,
            beta: b.var(&format!("{prefix}/beta"))?,
        })
    }
}

pub fn layer_norm<T: Scalar>(g: &mut Graph<T>, vars: LayerNormVars, x: Var) -> Result<Var> {
    g.layer_norm(x, vars.gamma, vars.beta)
}

/// One transformer-style block: multi-head self- or cross-attention then a
/// feed-forward, each optionally wrapped in residual + layer norm.
pub fn init_block<T: Scalar>(
    ps: &mut ParamSet<T>,
    prefix: &str,
    d_model: usize,
    d_ff: usize,
    heads: usize,
    residual_norm: bool,
    rng: &mut impl Rng,
) {
    init_mha(ps, &format!("{prefix}/mha"), d_model, heads, rng);
    init_ffn(ps, &format!("{prefix}/ffn"), d_model, d_ff, d_model, rng);
    if residual_norm {
        init_layer_norm(ps, &format!("{prefix}/ln1"), d_model);
        init_layer_norm(ps, &format!("{prefix}/ln2"), d_model);
    }
}

#[derive(Debug, Clone)]
pub struct BlockVars {
    pub mha: MhaVars,
    pub ffn: FfnVars,
    pub ln1: Option<LayerNormVars>,
    pub ln2: Option<LayerNormVars>,
}

impl BlockVars {
    pub fn bind(
        b: &Binding,
        prefix: &str,
        d_model: usize,
        heads: usize,
        residual_norm: bool,
    ) -> Result<Self> {
        Ok(Self {
            mha: MhaVars::bind(b, &format!("{prefix}/mha"), d_model, heads)?,
            ffn: FfnVars::bind(b, &format!("{prefix}/ffn"))?,
            ln1: residual_norm
                .then(|| LayerNormVars::bind(b, &format!("{prefix}/ln1")))
                .transpose()?,
            ln2: residual_norm
                .then(|| LayerNormVars::bind(b, &format!("{prefix}/ln2")))
                .transpose()?,
        })
    }
}

/// Apply a block with query `x` attending to `kv` (self-attention when they
/// coincide).
pub fn block<T: Scalar>(
    g: &mut Graph<T>,
    vars: &BlockVars,
    x: Var,
    kv: Var,
    mask: Option<&Mask>,
) -> Result<Var> {
    let attn = mha(g, &vars.mha, x, kv, kv, mask)?;
    let x = match vars.ln1 {
        Some(ln) => {
            let res = g.add(x, attn)?;
            layer_norm(g, ln, res)?
        }
        None => attn,
    };
    let f = ffn(g, vars.ffn, x)?;
    match vars.ln2 {
        Some(ln) => {
            let res = g.add(x, f)?;
            layer_norm(g, ln, res)
        }
        None => Ok(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn mha_single_position_is_projection_of_v() {
        // With one sequence position the softmax weight is exactly 1, so
        // the output equals Wo applied to the concatenated head values.
        let mut r = rng();
        let mut ps = ParamSet::<f64>::new();
        init_mha(&mut ps, "m", 8, 2, &mut r);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let vars = MhaVars::bind(&b, "m", 8, 2).unwrap();
        let x = g.constant(Tensor::uniform(&mut r, 1, 8, -1.0, 1.0));
        let out = mha(&mut g, &vars, x, x, x, None).unwrap();

        let mut heads = Vec::new();
        for h in 0..2 {
            heads.push(g.matmul(x, vars.wv[h]).unwrap());
        }
        let cat = g.concat_cols(&heads).unwrap();
        let expect = g.matmul(cat, vars.wo).unwrap();
        let (a, e) = (g.value(out).clone(), g.value(expect).clone());
        for (x, y) in a.data().iter().zip(e.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mha_forced_single_key() {
        // Mask all but one key: attention output equals that key's value row.
        let mut r = rng();
        let mut ps = ParamSet::<f64>::new();
        init_mha(&mut ps, "m", 4, 1, &mut r);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let vars = MhaVars::bind(&b, "m", 4, 1).unwrap();
        let q = g.constant(Tensor::uniform(&mut r, 1, 4, -1.0, 1.0));
        let kv = g.constant(Tensor::uniform(&mut r, 3, 4, -1.0, 1.0));
        let mask = Mask::new(1, 3, vec![false, true, false]).unwrap();
        let out = mha(&mut g, &vars, q, kv, kv, Some(&mask)).unwrap();

        let vh = g.matmul(kv, vars.wv[0]).unwrap();
        let selected = g.gather_rows(vh, &[1]).unwrap();
        let expect = g.matmul(selected, vars.wo).unwrap();
        for (x, y) in g.value(out).data().iter().zip(g.value(expect).data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mha_is_permutation_equivariant() {
        let mut r = rng();
        let mut ps = ParamSet::<f64>::new();
        init_mha(&mut ps, "m", 8, 4, &mut r);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let vars = MhaVars::bind(&b, "m", 8, 4).unwrap();
        let x = g.constant(Tensor::uniform(&mut r, 5, 8, -1.0, 1.0));
        let out = mha(&mut g, &vars, x, x, x, None).unwrap();

        let perm = [3usize, 0, 4, 1, 2];
        let xp = g.gather_rows(x, &perm).unwrap();
        let outp = mha(&mut g, &vars, xp, xp, xp, None).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            for c in 0..8 {
                let a = g.value(out).get(i, c);
                let b = g.value(outp).get(j, c);
                assert!((a - b).abs() < 1e-9, "row {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mha_equivariant_under_matching_key_and_mask_permutation() {
        let mut r = rng();
        let mut ps = ParamSet::<f64>::new();
        init_mha(&mut ps, "m", 8, 2, &mut r);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let vars = MhaVars::bind(&b, "m", 8, 2).unwrap();
        let q = g.constant(Tensor::uniform(&mut r, 1, 8, -1.0, 1.0));
        let kv = g.constant(Tensor::uniform(&mut r, 4, 8, -1.0, 1.0));
        let keep = [true, false, true, true];
        let mask = Mask::new(1, 4, keep.to_vec()).unwrap();
        let out = mha(&mut g, &vars, q, kv, kv, Some(&mask)).unwrap();

        let perm = [2usize, 0, 3, 1];
        let kvp = g.gather_rows(kv, &perm).unwrap();
        let keep_p: Vec<bool> = perm.iter().map(|&i| keep[i]).collect();
        let mask_p = Mask::new(1, 4, keep_p).unwrap();
        let outp = mha(&mut g, &vars, q, kvp, kvp, Some(&mask_p)).unwrap();
        for (a, b) in g.value(out).data().iter().zip(g.value(outp).data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn block_shapes_hold_with_and_without_norm() {
        let mut r = rng();
        for residual in [true, false] {
            let mut ps = ParamSet::<f64>::new();
            init_block(&mut ps, "blk", 8, 16, 2, residual, &mut r);
            let mut g = Graph::new();
            let b = ps.bind(&mut g);
            let vars = BlockVars::bind(&b, "blk", 8, 2, residual).unwrap();
            let x = g.constant(Tensor::uniform(&mut r, 6, 8, -1.0, 1.0));
            let y = block(&mut g, &vars, x, x, None).unwrap();
            assert_eq!(g.value(y).shape(), (6, 8));
        }
    }
}
