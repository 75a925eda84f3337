//! Embedding parameters, TransR energy, attention, and propagation.
//!
//! Entities live in a `d`-dimensional space; each relation carries a `k`
//! vector and a `k x d` projection into its own space. Plausibility of a
//! triple is the squared translation residual in relation space. Attention
//! over a node's neighborhood is a softmax of projected tail/head agreement
//! scores computed from layer-0 embeddings. Propagation aggregates
//! attention-weighted neighbor representations through `L` transform layers,
//! and the final representation concatenates all layers.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::kg::Ckg;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Neighborhood aggregator used by the propagation layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    /// `LeakyReLU(W (e_h + e_N))`
    #[default]
    Sum,
    /// Adds a second path over the elementwise product:
    /// `LeakyReLU(W1 (e_h + e_N)) + LeakyReLU(W2 (e_h * e_N))`
    BiInteraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Entity embedding width.
    pub d: usize,
    /// Relation space width.
    pub k: usize,
    /// Propagation layers.
    pub layers: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d: 16,
            k: 16,
            layers: 2,
        }
    }
}

/// All trainable parameter blocks, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub dims: ModelDims,
    pub n_entities: usize,
    pub n_relations: usize,
    /// `n_entities x d`
    pub entity: Vec<f64>,
    /// `n_relations x k`
    pub relation: Vec<f64>,
    /// `n_relations x (k x d)` relation-space projections
    pub proj: Vec<f64>,
    /// `layers` transform matrices, each `d x d`
    pub layer_w: Vec<Vec<f64>>,
    /// Second transform per layer, used by the bi-interaction aggregator.
    pub layer_w_bi: Vec<Vec<f64>>,
}

impl EmbeddingParams {
    /// Seeded uniform init in `[-1/sqrt(dim_in), 1/sqrt(dim_in)]` per block.
    pub fn init(n_entities: usize, n_relations: usize, dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let scale_d = 1.0 / (dims.d as f64).sqrt();
        let scale_k = 1.0 / (dims.k as f64).sqrt();
        let fill = |n: usize, s: f64, rng: &mut ChaCha20Rng| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-s..s)).collect()
        };
        let entity = fill(n_entities * dims.d, scale_d, &mut rng);
        let relation = fill(n_relations * dims.k, scale_k, &mut rng);
        let proj = fill(n_relations * dims.k * dims.d, scale_d, &mut rng);
        let layer_w = (0..dims.layers)
            .map(|_| fill(dims.d * dims.d, scale_d, &mut rng))
            .collect();
        let layer_w_bi = (0..dims.layers)
            .map(|_| fill(dims.d * dims.d, scale_d, &mut rng))
            .collect();
        EmbeddingParams {
            dims,
            n_entities,
            n_relations,
            entity,
            relation,
            proj,
            layer_w,
            layer_w_bi,
        }
    }

    pub fn entity_row(&self, e: u32) -> &[f64] {
        let d = self.dims.d;
        &self.entity[e as usize * d..(e as usize + 1) * d]
    }

    pub fn relation_row(&self, r: u32) -> &[f64] {
        let k = self.dims.k;
        &self.relation[r as usize * k..(r as usize + 1) * k]
    }

    pub fn proj_mat(&self, r: u32) -> &[f64] {
        let kd = self.dims.k * self.dims.d;
        &self.proj[r as usize * kd..(r as usize + 1) * kd]
    }

    /// Sum of squares over every parameter block.
    pub fn norm_sq(&self) -> f64 {
        let mut s: f64 = self.entity.iter().map(|v| v * v).sum();
        s += self.relation.iter().map(|v| v * v).sum::<f64>();
        s += self.proj.iter().map(|v| v * v).sum::<f64>();
        for w in self.layer_w.iter().chain(&self.layer_w_bi) {
            s += w.iter().map(|v| v * v).sum::<f64>();
        }
        s
    }

    pub fn n_params(&self) -> usize {
        self.entity.len()
            + self.relation.len()
            + self.proj.len()
            + self.layer_w.iter().map(|w| w.len()).sum::<usize>()
            + self.layer_w_bi.iter().map(|w| w.len()).sum::<usize>()
    }

    /// Same shape, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> EmbeddingParams {
        EmbeddingParams {
            dims: self.dims,
            n_entities: self.n_entities,
            n_relations: self.n_relations,
            entity: vec![0.0; self.entity.len()],
            relation: vec![0.0; self.relation.len()],
            proj: vec![0.0; self.proj.len()],
            layer_w: self.layer_w.iter().map(|w| vec![0.0; w.len()]).collect(),
            layer_w_bi: self.layer_w_bi.iter().map(|w| vec![0.0; w.len()]).collect(),
        }
    }

    /// `self += a * other`, blockwise.
    pub fn axpy(&mut self, a: f64, other: &EmbeddingParams) {
        for (x, y) in self.entity.iter_mut().zip(&other.entity) {
            *x += a * y;
        }
        for (x, y) in self.relation.iter_mut().zip(&other.relation) {
            *x += a * y;
        }
        for (x, y) in self.proj.iter_mut().zip(&other.proj) {
            *x += a * y;
        }
        let own = self.layer_w.iter_mut().chain(self.layer_w_bi.iter_mut());
        let theirs = other.layer_w.iter().chain(other.layer_w_bi.iter());
        for (ws, wo) in own.zip(theirs) {
            for (x, y) in ws.iter_mut().zip(wo) {
                *x += a * y;
            }
        }
    }

    /// Flat view over [entity, relation, proj, layer_w...], for numeric checks.
    pub fn flat_len(&self) -> usize {
        self.n_params()
    }

    pub fn flat_get(&self, idx: usize) -> f64 {
        let mut i = idx;
        if i < self.entity.len() {
            return self.entity[i];
        }
        i -= self.entity.len();
        if i < self.relation.len() {
            return self.relation[i];
        }
        i -= self.relation.len();
        if i < self.proj.len() {
            return self.proj[i];
        }
        i -= self.proj.len();
        for w in self.layer_w.iter().chain(&self.layer_w_bi) {
            if i < w.len() {
                return w[i];
            }
            i -= w.len();
        }
        panic!("flat index {idx} out of range");
    }

    pub fn flat_set(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        if i < self.entity.len() {
            self.entity[i] = value;
            return;
        }
        i -= self.entity.len();
        if i < self.relation.len() {
            self.relation[i] = value;
            return;
        }
        i -= self.relation.len();
        if i < self.proj.len() {
            self.proj[i] = value;
            return;
        }
        i -= self.proj.len();
        for w in self.layer_w.iter_mut().chain(self.layer_w_bi.iter_mut()) {
            if i < w.len() {
                w[i] = value;
                return;
            }
            i -= w.len();
        }
        panic!("flat index {idx} out of range");
    }
}

/// `out = M v` for a row-major `rows x cols` matrix.
pub fn matvec(m: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// `out = M^T v` for a row-major `rows x cols` matrix.
pub fn matvec_t(m: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(v.len(), rows);
    for c in out.iter_mut() {
        *c = 0.0;
    }
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * v[r];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Translation residual of `(h, r, t)` in relation space.
pub fn transr_residual(params: &EmbeddingParams, h: u32, r: u32, t: u32) -> Vec<f64> {
    let (d, k) = (params.dims.d, params.dims.k);
    let w = params.proj_mat(r);
    let mut ph = vec![0.0; k];
    let mut pt = vec![0.0; k];
    matvec(w, params.entity_row(h), k, d, &mut ph);
    matvec(w, params.entity_row(t), k, d, &mut pt);
    let er = params.relation_row(r);
    (0..k).map(|i| ph[i] + er[i] - pt[i]).collect()
}

/// TransR plausibility energy `g = || W_r e_h + e_r - W_r e_t ||^2`.
/// Lower is more plausible; zero iff the translation is exact.
pub fn transr_energy(params: &EmbeddingParams, h: u32, r: u32, t: u32) -> f64 {
    transr_residual(params, h, r, t).iter().map(|v| v * v).sum()
}

/// Raw (pre-softmax) attention score of neighbor `(r, t)` seen from `h`.
pub fn attention_raw(params: &EmbeddingParams, h: u32, r: u32, t: u32) -> f64 {
    let (d, k) = (params.dims.d, params.dims.k);
    let w = params.proj_mat(r);
    let mut ph = vec![0.0; k];
    let mut pt = vec![0.0; k];
    matvec(w, params.entity_row(h), k, d, &mut ph);
    matvec(w, params.entity_row(t), k, d, &mut pt);
    let er = params.relation_row(r);
    (0..k).map(|i| pt[i] * (ph[i] + er[i]).tanh()).sum()
}

/// Softmax-normalized attention over `N(h)`, in adjacency order.
///
/// Disabled attention yields the uniform distribution; an isolated node
/// yields an empty one.
pub fn attention_weights(
    params: &EmbeddingParams,
    ckg: &Ckg,
    h: u32,
    enabled: bool,
) -> Vec<f64> {
    let neighbors = &ckg.adjacency[h as usize];
    if neighbors.is_empty() {
        return Vec::new();
    }
    if !enabled {
        return vec![1.0 / neighbors.len() as f64; neighbors.len()];
    }
    let raw: Vec<f64> = neighbors
        .iter()
        .map(|&(r, t)| attention_raw(params, h, r, t))
        .collect();
    softmax(&raw)
}

pub fn softmax(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Attention tables for every entity, computed once per pass.
pub fn all_attention(params: &EmbeddingParams, ckg: &Ckg, enabled: bool) -> Vec<Vec<f64>> {
    (0..ckg.n_entities() as u32)
        .map(|h| attention_weights(params, ckg, h, enabled))
        .collect()
}

pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub fn leaky_relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Everything the backward pass needs from one forward propagation.
pub struct Forward {
    /// `acts[l][entity]`: layer-`l` representation; `acts[0]` is the raw table.
    pub acts: Vec<Vec<Vec<f64>>>,
    /// `neigh[l][entity]`: attention-weighted neighbor sum feeding layer `l+1`.
    pub neigh: Vec<Vec<Vec<f64>>>,
    /// `pre[l][entity]`: pre-activation of the sum path feeding layer `l+1`.
    pub pre: Vec<Vec<Vec<f64>>>,
    /// `pre_bi[l][entity]`: pre-activation of the product path (bi-interaction).
    pub pre_bi: Vec<Vec<Vec<f64>>>,
}

/// Forward propagation keeping intermediates.
pub fn propagate_full(
    params: &EmbeddingParams,
    ckg: &Ckg,
    attention: &[Vec<f64>],
    aggregator: Aggregator,
) -> Forward {
    let d = params.dims.d;
    let n = ckg.n_entities();
    let mut acts: Vec<Vec<Vec<f64>>> = Vec::with_capacity(params.dims.layers + 1);
    let mut neigh = Vec::with_capacity(params.dims.layers);
    let mut pre = Vec::with_capacity(params.dims.layers);
    let mut pre_bi = Vec::with_capacity(params.dims.layers);
    acts.push(
        (0..n as u32)
            .map(|e| params.entity_row(e).to_vec())
            .collect(),
    );
    for l in 0..params.dims.layers {
        let prev = &acts[l];
        let w = &params.layer_w[l];
        let w_bi = &params.layer_w_bi[l];
        let mut neigh_l = Vec::with_capacity(n);
        let mut pre_l = Vec::with_capacity(n);
        let mut pre_bi_l = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        for h in 0..n {
            // attention-weighted neighbor sum
            let mut e_n = vec![0.0; d];
            for (j, &(_, t)) in ckg.adjacency[h].iter().enumerate() {
                let pi = attention[h][j];
                for (sv, tv) in e_n.iter_mut().zip(&prev[t as usize]) {
                    *sv += pi * tv;
                }
            }
            let s: Vec<f64> = prev[h].iter().zip(&e_n).map(|(a, b)| a + b).collect();
            let mut z = vec![0.0; d];
            matvec(w, &s, d, d, &mut z);
            let mut act: Vec<f64> = z.iter().map(|&v| leaky_relu(v)).collect();
            let z_bi = match aggregator {
                Aggregator::Sum => Vec::new(),
                Aggregator::BiInteraction => {
                    let prod: Vec<f64> =
                        prev[h].iter().zip(&e_n).map(|(a, b)| a * b).collect();
                    let mut z2 = vec![0.0; d];
                    matvec(w_bi, &prod, d, d, &mut z2);
                    for (av, &zv) in act.iter_mut().zip(&z2) {
                        *av += leaky_relu(zv);
                    }
                    z2
                }
            };
            neigh_l.push(e_n);
            pre_l.push(z);
            pre_bi_l.push(z_bi);
            next.push(act);
        }
        acts.push(next);
        neigh.push(neigh_l);
        pre.push(pre_l);
        pre_bi.push(pre_bi_l);
    }
    Forward {
        acts,
        neigh,
        pre,
        pre_bi,
    }
}

/// Final representations: the concatenation of every layer's activation.
pub fn propagate(
    params: &EmbeddingParams,
    ckg: &Ckg,
    attention: &[Vec<f64>],
    aggregator: Aggregator,
) -> Vec<Vec<f64>> {
    let acts = propagate_full(params, ckg, attention, aggregator).acts;
    concat_layers(&acts)
}

pub fn concat_layers(acts: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let n = acts[0].len();
    (0..n)
        .map(|e| {
            let mut v = Vec::new();
            for layer in acts {
                v.extend_from_slice(&layer[e]);
            }
            v
        })
        .collect()
}

/// Recommendation score: the inner product of final representations.
pub fn predict_score(repr: &[Vec<f64>], u: u32, i: u32) -> f64 {
    dot(&repr[u as usize], &repr[i as usize])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckat::kg::Triple;

    fn tiny_params(d: usize, k: usize, layers: usize) -> EmbeddingParams {
        EmbeddingParams::init(4, 2, ModelDims { d, k, layers }, 7)
    }

    fn line_ckg(n: usize) -> Ckg {
        // entities 0..n in a chain under a single relation (+inverse)
        let mut triples = Vec::new();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n.saturating_sub(1) {
            let (h, t) = (i as u32, (i + 1) as u32);
            triples.push(Triple {
                head: h,
                relation: 0,
                tail: t,
            });
            adjacency[h as usize].push((0, t));
            triples.push(Triple {
                head: t,
                relation: 1,
                tail: h,
            });
            adjacency[t as usize].push((1, h));
        }
        Ckg {
            entities: (0..n).map(|i| format!("e{i}")).collect(),
            relations: vec!["rel".into(), "rel^-1".into()],
            triples,
            adjacency,
            users: vec![],
            items: vec![],
            interactions: vec![],
        }
    }

    #[test]
    fn energy_is_zero_on_exact_translation() {
        let mut p = tiny_params(2, 2, 0);
        // e_h == e_t and e_r == 0 cancels exactly
        for i in 0..2 {
            p.entity[i] = 1.5;
            p.entity[2 + i] = 1.5;
            p.relation[i] = 0.0;
        }
        assert_eq!(transr_energy(&p, 0, 0, 1), 0.0);
    }

    #[test]
    fn energy_matches_hand_arithmetic_in_one_dimension() {
        let mut p = EmbeddingParams::init(2, 1, ModelDims { d: 1, k: 1, layers: 0 }, 0);
        p.entity = vec![1.0, 2.0];
        p.relation = vec![0.5];
        p.proj = vec![1.0];
        let g = transr_energy(&p, 0, 0, 1);
        assert!((g - 0.25).abs() < 1e-12, "{g}");
    }

    #[test]
    fn energy_is_never_negative() {
        let p = tiny_params(3, 2, 0);
        for h in 0..4 {
            for t in 0..4 {
                for r in 0..2 {
                    assert!(transr_energy(&p, h, r, t) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn attention_uniform_when_scores_equal_or_disabled() {
        let ckg = line_ckg(3);
        let p = EmbeddingParams::init(3, 2, ModelDims { d: 1, k: 1, layers: 0 }, 1);
        // middle node has two neighbors
        let w = attention_weights(&p, &ckg, 1, false);
        assert_eq!(w, vec![0.5, 0.5]);

        // e_h = 0, e_r = 0 makes every raw score tanh(0) * x = 0 -> uniform
        let mut p2 = p.clone();
        p2.entity[1] = 0.0;
        p2.relation = vec![0.0, 0.0];
        let w = attention_weights(&p2, &ckg, 1, true);
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn attention_sums_to_one_and_single_neighbor_gets_all() {
        let ckg = line_ckg(4);
        let p = EmbeddingParams::init(4, 2, ModelDims { d: 3, k: 2, layers: 0 }, 3);
        for h in 0..4u32 {
            let w = attention_weights(&p, &ckg, h, true);
            if ckg.adjacency[h as usize].is_empty() {
                assert!(w.is_empty());
            } else {
                let sum: f64 = w.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
        // end nodes have exactly one neighbor
        let w = attention_weights(&p, &ckg, 0, true);
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn zero_layers_returns_raw_embeddings() {
        let ckg = line_ckg(3);
        let p = EmbeddingParams::init(3, 2, ModelDims { d: 2, k: 2, layers: 0 }, 5);
        let att = all_attention(&p, &ckg, true);
        let repr = propagate(&p, &ckg, &att, Aggregator::Sum);
        for e in 0..3u32 {
            assert_eq!(repr[e as usize], p.entity_row(e).to_vec());
        }
    }

    #[test]
    fn isolated_node_propagates_through_transform_only() {
        let mut ckg = line_ckg(3);
        ckg.entities.push("lonely".into());
        ckg.adjacency.push(Vec::new());
        let p = EmbeddingParams::init(4, 2, ModelDims { d: 2, k: 2, layers: 1 }, 9);
        let att = all_attention(&p, &ckg, true);
        let repr = propagate(&p, &ckg, &att, Aggregator::Sum);
        let e0 = p.entity_row(3);
        let w = &p.layer_w[0];
        let mut z = vec![0.0; 2];
        matvec(w, e0, 2, 2, &mut z);
        let expect: Vec<f64> = z.iter().map(|&v| leaky_relu(v)).collect();
        assert_eq!(&repr[3][2..], expect.as_slice());
    }

    #[test]
    fn two_node_one_dimensional_recurrence_matches_hand_computation() {
        // entities a, b joined by one relation; d = k = 1, L = 2
        let ckg = line_ckg(2);
        let mut p = EmbeddingParams::init(2, 2, ModelDims { d: 1, k: 1, layers: 2 }, 0);
        p.entity = vec![0.3, -0.7];
        p.relation = vec![0.2, -0.1];
        p.proj = vec![1.0, 1.0];
        p.layer_w = vec![vec![0.5], vec![-2.0]];
        let att = all_attention(&p, &ckg, true);
        // each node has exactly one neighbor, so attention is 1 either way
        assert_eq!(att[0], vec![1.0]);

        let lr = |x: f64| if x > 0.0 { x } else { 0.2 * x };
        let a0 = 0.3f64;
        let b0 = -0.7f64;
        let a1 = lr(0.5 * (a0 + b0));
        let b1 = lr(0.5 * (b0 + a0));
        let a2 = lr(-2.0 * (a1 + b1));
        let b2 = lr(-2.0 * (b1 + a1));

        let att = all_attention(&p, &ckg, true);
        let repr = propagate(&p, &ckg, &att, Aggregator::Sum);
        let expect_a = vec![a0, a1, a2];
        let expect_b = vec![b0, b1, b2];
        for (got, want) in repr[0].iter().zip(&expect_a) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in repr[1].iter().zip(&expect_b) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_vector_scores_zero_everywhere() {
        let repr = vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![-4.0, 3.0]];
        assert_eq!(predict_score(&repr, 0, 1), 0.0);
        // orthogonal vectors score zero too
        assert_eq!(predict_score(&repr, 1, 2), 0.0);
    }
}
