//! Alternating two-phase training with hand-derived gradients.
//!
//! Each epoch runs one pass of pairwise ranking over knowledge triples
//! (corrupted-tail negatives, TransR energies) and one pass of pairwise
//! ranking over user-item interactions (sampled item negatives, scores from
//! attention propagation). Both phases optimize
//! `sum(-ln sigmoid(margin)) + l2 * ||params||^2` per mini batch with plain
//! SGD. Attention weights are computed from layer-0 embeddings at the start
//! of each interaction pass and held fixed through it, so interaction
//! gradients flow through the propagation layers and entity table only.

use std::collections::{BTreeMap, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::kg::Ckg;
use super::model::{
    all_attention, dot, leaky_relu_grad, matvec_t, propagate_full, transr_residual, Aggregator,
    EmbeddingParams, ModelDims,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dims: ModelDims,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Negative samples per positive.
    pub negatives: usize,
    pub attention: bool,
    pub aggregator: Aggregator,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dims: ModelDims::default(),
            learning_rate: 0.01,
            l2: 1e-5,
            batch_size: 256,
            epochs: 30,
            negatives: 1,
            attention: true,
            aggregator: Aggregator::Sum,
            seed: 0,
        }
    }
}

/// A trained model plus its loss curves.
#[derive(Debug, Clone)]
pub struct Trained {
    pub params: EmbeddingParams,
    pub attention_enabled: bool,
    pub aggregator: Aggregator,
    pub kg_losses: Vec<f64>,
    pub cf_losses: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln sigmoid(x)`, computed stably.
fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// One ranking pair for the knowledge phase: positive (h, r, t), corrupted t'.
pub type KgPair = (u32, u32, u32, u32);
/// One ranking triple for the interaction phase: user, positive, negative.
pub type CfTriple = (u32, u32, u32);

/// Knowledge-phase batch loss `sum(-ln s(g(h,r,t') - g(h,r,t))) + l2||params||^2`.
pub fn kg_batch_loss(params: &EmbeddingParams, pairs: &[KgPair], l2: f64) -> f64 {
    let mut loss = 0.0;
    for &(h, r, t, t2) in pairs {
        let g_pos: f64 = transr_residual(params, h, r, t).iter().map(|v| v * v).sum();
        let g_neg: f64 = transr_residual(params, h, r, t2).iter().map(|v| v * v).sum();
        loss += softplus_neg(g_neg - g_pos);
    }
    loss + l2 * params.norm_sq()
}

/// Analytic gradient of [`kg_batch_loss`].
pub fn kg_batch_grads(params: &EmbeddingParams, pairs: &[KgPair], l2: f64) -> EmbeddingParams {
    let (d, k) = (params.dims.d, params.dims.k);
    let mut grads = params.zeros_like();
    let mut wt_u = vec![0.0; d];
    for &(h, r, t, t2) in pairs {
        let delta = transr_residual(params, h, r, t);
        let delta2 = transr_residual(params, h, r, t2);
        let g_pos: f64 = delta.iter().map(|v| v * v).sum();
        let g_neg: f64 = delta2.iter().map(|v| v * v).sum();
        let c = sigmoid(g_neg - g_pos) - 1.0;

        // residual adjoints: d loss / d delta2 = 2c*delta2, d loss / d delta = -2c*delta
        let u2: Vec<f64> = delta2.iter().map(|v| 2.0 * c * v).collect();
        let u: Vec<f64> = delta.iter().map(|v| -2.0 * c * v).collect();

        let w = params.proj_mat(r);
        let e_h = params.entity_row(h);
        let e_t = params.entity_row(t);
        let e_t2 = params.entity_row(t2);

        // entity gradients: e_h feels both residuals, tails feel their own
        let combined: Vec<f64> = u.iter().zip(&u2).map(|(a, b)| a + b).collect();
        matvec_t(w, &combined, k, d, &mut wt_u);
        for (gi, v) in grads.entity[h as usize * d..(h as usize + 1) * d]
            .iter_mut()
            .zip(&wt_u)
        {
            *gi += v;
        }
        matvec_t(w, &u, k, d, &mut wt_u);
        for (gi, v) in grads.entity[t as usize * d..(t as usize + 1) * d]
            .iter_mut()
            .zip(&wt_u)
        {
            *gi -= v;
        }
        matvec_t(w, &u2, k, d, &mut wt_u);
        for (gi, v) in grads.entity[t2 as usize * d..(t2 as usize + 1) * d]
            .iter_mut()
            .zip(&wt_u)
        {
            *gi -= v;
        }

        // relation vector feels both residuals directly
        for (gi, v) in grads.relation[r as usize * k..(r as usize + 1) * k]
            .iter_mut()
            .zip(&combined)
        {
            *gi += v;
        }

        // projection: u (x) (e_h - e_t) + u2 (x) (e_h - e_t2)
        let gw = &mut grads.proj[r as usize * k * d..(r as usize + 1) * k * d];
        for row in 0..k {
            for col in 0..d {
                gw[row * d + col] +=
                    u[row] * (e_h[col] - e_t[col]) + u2[row] * (e_h[col] - e_t2[col]);
            }
        }
    }
    grads.axpy(2.0 * l2, params);
    grads
}

/// Interaction-phase batch loss with attention weights held fixed.
pub fn cf_batch_loss(
    params: &EmbeddingParams,
    ckg: &Ckg,
    attention: &[Vec<f64>],
    aggregator: Aggregator,
    triples: &[CfTriple],
    l2: f64,
) -> f64 {
    let fwd = propagate_full(params, ckg, attention, aggregator);
    let repr = super::model::concat_layers(&fwd.acts);
    let mut loss = 0.0;
    for &(u, i, j) in triples {
        let x = dot(&repr[u as usize], &repr[i as usize])
            - dot(&repr[u as usize], &repr[j as usize]);
        loss += softplus_neg(x);
    }
    loss + l2 * params.norm_sq()
}

/// Analytic gradient of [`cf_batch_loss`]: reverse pass through the
/// propagation layers into the transforms and the entity table.
#[allow(clippy::too_many_arguments)]
pub fn cf_batch_grads(
    params: &EmbeddingParams,
    ckg: &Ckg,
    attention: &[Vec<f64>],
    aggregator: Aggregator,
    triples: &[CfTriple],
    l2: f64,
) -> EmbeddingParams {
    let d = params.dims.d;
    let layers = params.dims.layers;
    let fwd = propagate_full(params, ckg, attention, aggregator);
    let repr = super::model::concat_layers(&fwd.acts);
    let mut grads = params.zeros_like();

    // concat-space adjoints per entity
    let mut top: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let width = (layers + 1) * d;
    for &(u, i, j) in triples {
        let ru = &repr[u as usize];
        let ri = &repr[i as usize];
        let rj = &repr[j as usize];
        let x = dot(ru, ri) - dot(ru, rj);
        let c = sigmoid(x) - 1.0;
        let au = top.entry(u).or_insert_with(|| vec![0.0; width]);
        for idx in 0..width {
            au[idx] += c * (ri[idx] - rj[idx]);
        }
        let ai = top.entry(i).or_insert_with(|| vec![0.0; width]);
        for idx in 0..width {
            ai[idx] += c * ru[idx];
        }
        let aj = top.entry(j).or_insert_with(|| vec![0.0; width]);
        for idx in 0..width {
            aj[idx] -= c * ru[idx];
        }
    }

    // slice per layer: cur holds adjoints w.r.t. acts[l]
    let slice = |v: &Vec<f64>, l: usize| v[l * d..(l + 1) * d].to_vec();
    let mut cur: BTreeMap<u32, Vec<f64>> = top
        .iter()
        .map(|(&e, v)| (e, slice(v, layers)))
        .collect();

    let mut ds = vec![0.0; d];
    let mut dp = vec![0.0; d];
    for l in (1..=layers).rev() {
        let w = &params.layer_w[l - 1];
        let w_bi = &params.layer_w_bi[l - 1];
        let mut lower: BTreeMap<u32, Vec<f64>> = top
            .iter()
            .map(|(&e, v)| (e, slice(v, l - 1)))
            .collect();
        for (&h, a) in &cur {
            let hz = h as usize;
            let e_prev = &fwd.acts[l - 1][hz];
            let e_n = &fwd.neigh[l - 1][hz];

            // sum path: z = W (e_h + e_N)
            let pre = &fwd.pre[l - 1][hz];
            let dz: Vec<f64> = a
                .iter()
                .zip(pre)
                .map(|(av, &zv)| av * leaky_relu_grad(zv))
                .collect();
            let gw = &mut grads.layer_w[l - 1];
            for row in 0..d {
                for col in 0..d {
                    gw[row * d + col] += dz[row] * (e_prev[col] + e_n[col]);
                }
            }
            matvec_t(w, &dz, d, d, &mut ds);

            // product path: z_bi = W_bi (e_h * e_N)
            if aggregator == Aggregator::BiInteraction {
                let pre_bi = &fwd.pre_bi[l - 1][hz];
                let dz_bi: Vec<f64> = a
                    .iter()
                    .zip(pre_bi)
                    .map(|(av, &zv)| av * leaky_relu_grad(zv))
                    .collect();
                let gw = &mut grads.layer_w_bi[l - 1];
                for row in 0..d {
                    for col in 0..d {
                        gw[row * d + col] += dz_bi[row] * e_prev[col] * e_n[col];
                    }
                }
                matvec_t(w_bi, &dz_bi, d, d, &mut dp);
            } else {
                dp.iter_mut().for_each(|v| *v = 0.0);
            }

            // into e_h(l-1): ds + dp * e_N; into each neighbor: pi * (ds + dp * e_h)
            let entry = lower.entry(h).or_insert_with(|| vec![0.0; d]);
            for idx in 0..d {
                entry[idx] += ds[idx] + dp[idx] * e_n[idx];
            }
            for (jn, &(_, t)) in ckg.adjacency[hz].iter().enumerate() {
                let pi = attention[hz][jn];
                let entry = lower.entry(t).or_insert_with(|| vec![0.0; d]);
                for idx in 0..d {
                    entry[idx] += pi * (ds[idx] + dp[idx] * e_prev[idx]);
                }
            }
        }
        cur = lower;
    }

    for (&e, a) in &cur {
        let ge = &mut grads.entity[e as usize * d..(e as usize + 1) * d];
        for (gv, av) in ge.iter_mut().zip(a) {
            *gv += av;
        }
    }

    grads.axpy(2.0 * l2, params);
    grads
}

/// Trains on a CKG. Deterministic per `(ckg, config)`.
pub fn train(ckg: &Ckg, config: &TrainConfig) -> Result<Trained> {
    if ckg.interactions.is_empty() {
        return Err(Error::validation("cannot train without interactions"));
    }
    let mut params = EmbeddingParams::init(
        ckg.n_entities(),
        ckg.n_relations(),
        config.dims,
        config.seed,
    );
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));

    let triple_set: HashSet<(u32, u32, u32)> = ckg
        .triples
        .iter()
        .map(|t| (t.head, t.relation, t.tail))
        .collect();
    let positive_set: HashSet<(u32, u32)> = ckg.interactions.iter().copied().collect();

    let n_entities = ckg.n_entities() as u32;
    let mut kg_losses = Vec::with_capacity(config.epochs);
    let mut cf_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        // knowledge phase
        let mut order: Vec<usize> = (0..ckg.triples.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut pairs_seen = 0usize;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let mut pairs: Vec<KgPair> = Vec::with_capacity(chunk.len() * config.negatives);
            for &ti in chunk {
                let t = ckg.triples[ti];
                for _ in 0..config.negatives.max(1) {
                    let mut corrupt = rng.gen_range(0..n_entities);
                    let mut tries = 0;
                    while triple_set.contains(&(t.head, t.relation, corrupt)) && tries < 50 {
                        corrupt = rng.gen_range(0..n_entities);
                        tries += 1;
                    }
                    pairs.push((t.head, t.relation, t.tail, corrupt));
                }
            }
            let grads = kg_batch_grads(&params, &pairs, config.l2);
            // pair losses only; the regularizer is reported once per epoch
            epoch_loss += kg_batch_loss(&params, &pairs, 0.0);
            pairs_seen += pairs.len();
            params.axpy(-config.learning_rate, &grads);
        }
        let kg_loss = epoch_loss / pairs_seen.max(1) as f64 + config.l2 * params.norm_sq();
        if !kg_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                msg: format!("knowledge-phase loss {kg_loss}"),
            });
        }
        kg_losses.push(kg_loss);

        // interaction phase: attention fixed for the whole pass
        let attention = all_attention(&params, ckg, config.attention);
        let mut order: Vec<usize> = (0..ckg.interactions.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let mut triples: Vec<CfTriple> = Vec::with_capacity(chunk.len());
            for &ii in chunk {
                let (u, i) = ckg.interactions[ii];
                for _ in 0..config.negatives.max(1) {
                    let mut j = ckg.items[rng.gen_range(0..ckg.items.len())];
                    let mut tries = 0;
                    while positive_set.contains(&(u, j)) && tries < 50 {
                        j = ckg.items[rng.gen_range(0..ckg.items.len())];
                        tries += 1;
                    }
                    triples.push((u, i, j));
                }
            }
            let grads =
                cf_batch_grads(&params, ckg, &attention, config.aggregator, &triples, config.l2);
            epoch_loss += cf_batch_loss(&params, ckg, &attention, config.aggregator, &triples, 0.0);
            seen += triples.len();
            params.axpy(-config.learning_rate, &grads);
        }
        let cf_loss = epoch_loss / seen.max(1) as f64 + config.l2 * params.norm_sq();
        if !cf_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                msg: format!("interaction-phase loss {cf_loss}"),
            });
        }
        cf_losses.push(cf_loss);
    }

    Ok(Trained {
        params,
        attention_enabled: config.attention,
        aggregator: config.aggregator,
        kg_losses,
        cf_losses,
    })
}
