//! Feature-hashing bag-of-words encoder with a highway head.
//!
//! Maps (mention tokens, context tokens) to a hidden vector and then, through
//! a linear projection plus a width-preserving highway layer, to the output
//! space: 2d center/offset coordinates for the box model or d' coordinates
//! for the vector baseline. Input text is pre-tokenized; the encoder only
//! lowercases.

use crate::error::{Error, Result};
use crate::gradients::{LrGroup, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncoderConfig {
    /// Size of the hashing space.
    pub feature_dim: usize,
    /// Hidden width of the bag-of-words layer.
    pub hidden_dim: usize,
    /// Box dimension d (the encoder output is 2d wide in box mode).
    pub box_dim: usize,
    pub hash_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { feature_dim: 1 << 16, hidden_dim: 128, box_dim: 16, hash_seed: 0 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.hidden_dim == 0 || self.box_dim == 0 {
            return Err(Error::InvalidParameter("encoder dimensions must be >= 1".into()));
        }
        if self.feature_dim < 2 * self.box_dim {
            return Err(Error::InvalidParameter(format!(
                "feature_dim {} must be >= 2 * box_dim {}",
                self.feature_dim, self.box_dim
            )));
        }
        Ok(())
    }
}

// Seeded FNV-1a so feature buckets are stable across builds and platforms.
fn hash_feature(name: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sparse hashed feature vector: sorted (bucket, weight) pairs with duplicate
/// buckets merged. Weights are raw counts normalized by the total count.
///
/// Emitted features: each mention token tagged `M:`, each context token
/// tagged `C:`, mention bigrams tagged `MB:`, plus one bias feature.
pub fn featurize(mention: &[String], context: &[String], cfg: &EncoderConfig) -> Result<Vec<(u32, f64)>> {
    if mention.is_empty() {
        return Err(Error::data("example has an empty mention"));
    }
    let dim = cfg.feature_dim as u64;
    let mut buckets: Vec<u32> = Vec::with_capacity(mention.len() * 2 + context.len() + 1);
    let mut push = |name: &str| {
        buckets.push((hash_feature(name, cfg.hash_seed) % dim) as u32);
    };
    let lowered: Vec<String> = mention.iter().map(|t| t.to_lowercase()).collect();
    for tok in &lowered {
        push(&format!("M:{tok}"));
    }
    for pair in lowered.windows(2) {
        push(&format!("MB:{}_{}", pair[0], pair[1]));
    }
    for tok in context {
        push(&format!("C:{}", tok.to_lowercase()));
    }
    push("BIAS");

    let total = buckets.len() as f64;
    buckets.sort_unstable();
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(buckets.len());
    for b in buckets {
        match out.last_mut() {
            Some((prev, w)) if *prev == b => *w += 1.0 / total,
            _ => out.push((b, 1.0 / total)),
        }
    }
    Ok(out)
}

/// Flat offsets of the encoder parameter arrays inside a [`ParamStore`],
/// plus the widths needed to walk them.
#[derive(Debug, Clone, Copy)]
pub struct EncoderIndex {
    pub embed: usize,
    pub proj_w: usize,
    pub proj_b: usize,
    pub hw_t_w: usize,
    pub hw_t_b: usize,
    pub hw_g_w: usize,
    pub hw_g_b: usize,
    pub hidden: usize,
    pub out: usize,
}

/// Register encoder parameter arrays (zero-initialized) for output width
/// `out_dim` and return their flat offsets.
pub fn register_encoder(store: &mut ParamStore, cfg: &EncoderConfig, out_dim: usize) -> EncoderIndex {
    let h = cfg.hidden_dim;
    store.register("embed", &[cfg.feature_dim, h], LrGroup::Encoder);
    store.register("proj_w", &[h, out_dim], LrGroup::Other);
    store.register("proj_b", &[out_dim], LrGroup::Other);
    store.register("hw_t_w", &[out_dim, out_dim], LrGroup::Other);
    store.register("hw_t_b", &[out_dim], LrGroup::Other);
    store.register("hw_g_w", &[out_dim, out_dim], LrGroup::Other);
    store.register("hw_g_b", &[out_dim], LrGroup::Other);
    EncoderIndex {
        embed: store.offset_of("embed"),
        proj_w: store.offset_of("proj_w"),
        proj_b: store.offset_of("proj_b"),
        hw_t_w: store.offset_of("hw_t_w"),
        hw_t_b: store.offset_of("hw_t_b"),
        hw_g_w: store.offset_of("hw_g_w"),
        hw_g_b: store.offset_of("hw_g_b"),
        hidden: h,
        out: out_dim,
    }
}

/// Encoder forward pass on the tape. Returns the highway output
/// `h̄ = g ⊙ ReLU(W_T u + b_T) + (1 − g) ⊙ u` of width `idx.out`.
pub fn encode_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    idx: &EncoderIndex,
    features: &[(u32, f64)],
) -> Vec<Var> {
    let h = idx.hidden;
    let out = idx.out;

    // hidden = relu(embed^T features)
    let mut hidden_vars = Vec::with_capacity(h);
    for j in 0..h {
        let mut acc: Option<Var> = None;
        for &(f, v) in features {
            let w = tape.param(store, idx.embed + f as usize * h + j);
            let term = tape.mul_const(w, v);
            acc = Some(match acc {
                Some(a) => tape.add(a, term),
                None => term,
            });
        }
        let pre = acc.unwrap_or_else(|| tape.constant(0.0));
        hidden_vars.push(tape.relu(pre));
    }

    // u = proj_w^T hidden + proj_b
    let mut u = Vec::with_capacity(out);
    for k in 0..out {
        let mut acc = tape.param(store, idx.proj_b + k);
        for (j, hj) in hidden_vars.iter().enumerate() {
            let w = tape.param(store, idx.proj_w + j * out + k);
            let term = tape.mul(w, *hj);
            acc = tape.add(acc, term);
        }
        u.push(acc);
    }

    // highway over u
    let mut hbar = Vec::with_capacity(out);
    for k in 0..out {
        let mut t_acc = tape.param(store, idx.hw_t_b + k);
        let mut g_acc = tape.param(store, idx.hw_g_b + k);
        for (i, ui) in u.iter().enumerate() {
            let wt = tape.param(store, idx.hw_t_w + i * out + k);
            let term = tape.mul(wt, *ui);
            t_acc = tape.add(t_acc, term);
            let wg = tape.param(store, idx.hw_g_w + i * out + k);
            let term = tape.mul(wg, *ui);
            g_acc = tape.add(g_acc, term);
        }
        let t = tape.relu(t_acc);
        let g = tape.sigmoid(g_acc);
        let gated = tape.mul(g, t);
        let neg_g = tape.neg(g);
        let one_minus_g = tape.add_const(neg_g, 1.0);
        let pass = tape.mul(one_minus_g, u[k]);
        hbar.push(tape.add(gated, pass));
    }
    hbar
}
