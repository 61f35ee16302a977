//! Classifier heads over the shared encoder: the box-based multi-label
//! classifier and the vector-based baseline, plus thresholded prediction and
//! the post-hoc BBN prediction rules.

use crate::encoder::{self, EncoderConfig, EncoderIndex};
use crate::error::{Error, Result};
use crate::geometry::{
    box_from_params, conditional_prob, sigmoid, BoxEmbedding, BoxParams, GumbelConfig, PROB_EPS,
};
use crate::gradients::{LrGroup, ParamStore, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeClass {
    Coarse,
    Fine,
    UltraFine,
}

impl std::str::FromStr for TypeClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(TypeClass::Coarse),
            "fine" => Ok(TypeClass::Fine),
            "ultra-fine" | "ultrafine" => Ok(TypeClass::UltraFine),
            other => Err(Error::data(format!("unknown type class `{other}`"))),
        }
    }
}

/// The type inventory, with optional class labels and supertype/subtype
/// pairs for the consistency protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeVocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
    pub class_of: Option<Vec<TypeClass>>,
    /// (supertype id, subtype id) pairs.
    pub supertype_pairs: Vec<(usize, usize)>,
}

impl TypeVocabulary {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::data("empty type vocabulary"));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate type name `{n}`")));
            }
        }
        Ok(Self { names, index, class_of: None, supertype_pairs: Vec::new() })
    }

    pub fn with_classes(mut self, classes: Vec<TypeClass>) -> Result<Self> {
        if classes.len() != self.names.len() {
            return Err(Error::data("class list length does not match vocabulary"));
        }
        self.class_of = Some(classes);
        Ok(self)
    }

    pub fn set_pairs_by_name(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let mut out = Vec::with_capacity(pairs.len());
        for (sup, sub) in pairs {
            let s = self.id(sup).ok_or_else(|| Error::UnknownType(sup.clone()))?;
            let b = self.id(sub).ok_or_else(|| Error::UnknownType(sub.clone()))?;
            out.push((s, b));
        }
        self.supertype_pairs = out;
        Ok(())
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn class(&self, id: usize) -> Option<TypeClass> {
        self.class_of.as_ref().map(|c| c[id])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Box,
    Vector,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Box => write!(f, "box"),
            ModelKind::Vector => write!(f, "vector"),
        }
    }
}

/// Per-example probabilities plus the strict `p > 0.5` prediction set.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub probs: Vec<f64>,
    pub predicted: BTreeSet<usize>,
}

/// Threshold probabilities at a strict 0.5; ties at exactly 0.5 are excluded
/// and the prediction set may be empty.
pub fn predict(probs: &[f64]) -> PredictionSet {
    let predicted = probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.5)
        .map(|(k, _)| k)
        .collect();
    PredictionSet { probs: probs.to_vec(), predicted }
}

/// Post-hoc BBN prediction rules: drop `person` when `organization` is
/// predicted, drop `location` when `gpe` is predicted, rename `facility` to
/// `fac`. Each rule is a no-op when the vocabulary lacks the names involved.
pub fn apply_bbn_rules(mut pred: PredictionSet, vocab: &TypeVocabulary) -> PredictionSet {
    if let (Some(person), Some(org)) = (vocab.id("person"), vocab.id("organization")) {
        if pred.predicted.contains(&org) {
            pred.predicted.remove(&person);
        }
    }
    if let (Some(location), Some(gpe)) = (vocab.id("location"), vocab.id("gpe")) {
        if pred.predicted.contains(&gpe) {
            pred.predicted.remove(&location);
        }
    }
    if let (Some(facility), Some(fac)) = (vocab.id("facility"), vocab.id("fac")) {
        if pred.predicted.remove(&facility) {
            pred.predicted.insert(fac);
        }
    }
    pred
}

/// Conditional probability of each type box given a fixed mention box,
/// computed through pure geometry (no tape). This is the reference route the
/// tape path is tested against.
pub fn box_type_probs(
    mention_box: &BoxEmbedding,
    centers: &[f64],
    offsets: &[f64],
    dim: usize,
    cfg: &GumbelConfig,
) -> Result<Vec<f64>> {
    if mention_box.dim() != dim {
        return Err(Error::DimensionMismatch { left: mention_box.dim(), right: dim });
    }
    let n_types = centers.len() / dim;
    let mut probs = Vec::with_capacity(n_types);
    for k in 0..n_types {
        let params = BoxParams {
            center: centers[k * dim..(k + 1) * dim].to_vec(),
            offset: offsets[k * dim..(k + 1) * dim].to_vec(),
        };
        let type_box = box_from_params(&params)?;
        probs.push(conditional_prob(mention_box, &type_box, cfg)?);
    }
    Ok(probs)
}

/// `sigmoid(<v_k, mention_vec>)` per type; the vector baseline head.
pub fn vector_type_probs(mention_vec: &[f64], type_vectors: &[f64], dim: usize) -> Result<Vec<f64>> {
    if mention_vec.len() != dim {
        return Err(Error::DimensionMismatch { left: mention_vec.len(), right: dim });
    }
    Ok(type_vectors
        .chunks(dim)
        .map(|row| sigmoid(row.iter().zip(mention_vec).map(|(a, b)| a * b).sum()))
        .collect())
}

/// Tape-side log soft volume of a box given per-dimension corner variables:
/// `Σ_i ln(β · softplus_t((max_i − min_i)/β − 2γ))`.
pub fn log_soft_volume_on_tape(
    tape: &mut Tape,
    mins: &[Var],
    maxs: &[Var],
    cfg: &GumbelConfig,
) -> Var {
    let t = cfg.softplus_inv_temp;
    let shift = cfg.beta.ln() - t.ln();
    let mut acc: Option<Var> = None;
    for (lo, hi) in mins.iter().zip(maxs) {
        let edge = tape.sub(*hi, *lo);
        let scaled = tape.mul_const(edge, 1.0 / cfg.beta);
        let arg = tape.add_const(scaled, -2.0 * cfg.euler_gamma);
        let u = tape.mul_const(arg, t);
        let log_sp = tape.log_softplus1(u);
        let term = tape.add_const(log_sp, shift);
        acc = Some(match acc {
            Some(a) => tape.add(a, term),
            None => term,
        });
    }
    acc.expect("boxes have at least one dimension")
}

/// Box corners from center/offset variables, `σ(c ∓ softplus(o))`.
pub fn box_corners_on_tape(tape: &mut Tape, centers: &[Var], offsets: &[Var]) -> (Vec<Var>, Vec<Var>) {
    let mut mins = Vec::with_capacity(centers.len());
    let mut maxs = Vec::with_capacity(centers.len());
    for (c, o) in centers.iter().zip(offsets) {
        let half = tape.softplus1(*o);
        let lo_arg = tape.sub(*c, half);
        mins.push(tape.sigmoid(lo_arg));
        let hi_arg = tape.add(*c, half);
        maxs.push(tape.sigmoid(hi_arg));
    }
    (mins, maxs)
}

/// A full typing model: encoder plus one of the two heads.
#[derive(Debug, Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub encoder_cfg: EncoderConfig,
    pub gumbel: GumbelConfig,
    pub vocab: TypeVocabulary,
    pub params: ParamStore,
    pub enc: EncoderIndex,
    /// Box dimension d (box model) or vector dimension d' (baseline).
    pub dim: usize,
}

impl Model {
    pub fn new_box(
        encoder_cfg: EncoderConfig,
        gumbel: GumbelConfig,
        vocab: TypeVocabulary,
        box_dim: usize,
    ) -> Result<Self> {
        let mut cfg = encoder_cfg;
        cfg.box_dim = box_dim;
        cfg.validate()?;
        let mut params = ParamStore::new();
        let enc = encoder::register_encoder(&mut params, &cfg, 2 * box_dim);
        params.register("type_centers", &[vocab.len(), box_dim], LrGroup::Other);
        params.register("type_offsets", &[vocab.len(), box_dim], LrGroup::Other);
        Ok(Model { kind: ModelKind::Box, encoder_cfg: cfg, gumbel, vocab, params, enc, dim: box_dim })
    }

    pub fn new_vector(
        encoder_cfg: EncoderConfig,
        vocab: TypeVocabulary,
        vec_dim: usize,
    ) -> Result<Self> {
        encoder_cfg.validate()?;
        let mut params = ParamStore::new();
        let enc = encoder::register_encoder(&mut params, &encoder_cfg, vec_dim);
        params.register("type_vectors", &[vocab.len(), vec_dim], LrGroup::Other);
        // gumbel config unused by this head; keep defaults for the checkpoint
        let gumbel = GumbelConfig::new(1.0, 1.0).expect("static config");
        Ok(Model { kind: ModelKind::Vector, encoder_cfg, gumbel, vocab, params, enc, dim: vec_dim })
    }

    /// Seeded Gaussian initialization. Type offsets start around 0.5 so that
    /// fresh type boxes cover a generous chunk of the unit cube.
    pub fn init_random(&mut self, seed: u64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x7f4a_7c15);
        let normal = |rng: &mut ChaCha12Rng, mean: f64, std: f64| {
            // Box-Muller; two uniforms per draw keeps this dependency-free.
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            mean + std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let arrays: Vec<(String, usize, usize)> = self
            .params
            .arrays()
            .iter()
            .map(|a| (a.name.clone(), a.offset, a.shape.iter().product()))
            .collect();
        for (name, offset, len) in arrays {
            let (mean, std) = match name.as_str() {
                "type_offsets" => (0.5, 0.1),
                _ => (0.0, 0.1),
            };
            for i in 0..len {
                self.params.data_mut()[offset + i] = normal(&mut rng, mean, std);
            }
        }
    }

    pub fn n_types(&self) -> usize {
        self.vocab.len()
    }

    pub fn featurize(&self, mention: &[String], context: &[String]) -> Result<Vec<(u32, f64)>> {
        encoder::featurize(mention, context, &self.encoder_cfg)
    }

    /// Probabilities for the types in `active`, as clamped tape variables.
    pub fn probs_on_tape(&self, tape: &mut Tape, features: &[(u32, f64)], active: &[usize]) -> Vec<Var> {
        let hbar = encoder::encode_on_tape(tape, &self.params, &self.enc, features);
        match self.kind {
            ModelKind::Box => self.box_probs_on_tape(tape, &hbar, active),
            ModelKind::Vector => self.vector_probs_on_tape(tape, &hbar, active),
        }
    }

    fn box_probs_on_tape(&self, tape: &mut Tape, hbar: &[Var], active: &[usize]) -> Vec<Var> {
        let d = self.dim;
        let beta = self.gumbel.beta;
        let (xm, xmx) = box_corners_on_tape(tape, &hbar[..d], &hbar[d..]);
        let log_vol_x = log_soft_volume_on_tape(tape, &xm, &xmx, &self.gumbel);

        let centers_off = self.params.offset_of("type_centers");
        let offsets_off = self.params.offset_of("type_offsets");
        let mut probs = Vec::with_capacity(active.len());
        for &k in active {
            let mut zm = Vec::with_capacity(d);
            let mut zmx = Vec::with_capacity(d);
            for i in 0..d {
                let c = tape.param(&self.params, centers_off + k * d + i);
                let o = tape.param(&self.params, offsets_off + k * d + i);
                let half = tape.softplus1(o);
                let lo_arg = tape.sub(c, half);
                let ym = tape.sigmoid(lo_arg);
                let hi_arg = tape.add(c, half);
                let ymx = tape.sigmoid(hi_arg);

                let a = tape.mul_const(xm[i], 1.0 / beta);
                let b = tape.mul_const(ym, 1.0 / beta);
                let lse_min = tape.logsumexp2(a, b);
                zm.push(tape.mul_const(lse_min, beta));

                let a = tape.mul_const(xmx[i], -1.0 / beta);
                let b = tape.mul_const(ymx, -1.0 / beta);
                let lse_max = tape.logsumexp2(a, b);
                zmx.push(tape.mul_const(lse_max, -beta));
            }
            let log_vol_z = log_soft_volume_on_tape(tape, &zm, &zmx, &self.gumbel);
            let log_p = tape.sub(log_vol_z, log_vol_x);
            let p_raw = tape.exp(log_p);
            probs.push(tape.clamp(p_raw, PROB_EPS, 1.0 - PROB_EPS));
        }
        probs
    }

    fn vector_probs_on_tape(&self, tape: &mut Tape, hbar: &[Var], active: &[usize]) -> Vec<Var> {
        let d = self.dim;
        let vectors_off = self.params.offset_of("type_vectors");
        let mut probs = Vec::with_capacity(active.len());
        for &k in active {
            let mut acc: Option<Var> = None;
            for (i, h) in hbar.iter().enumerate() {
                let w = tape.param(&self.params, vectors_off + k * d + i);
                let term = tape.mul(w, *h);
                acc = Some(match acc {
                    Some(a) => tape.add(a, term),
                    None => term,
                });
            }
            let dot = acc.expect("head dimension >= 1");
            let p = tape.sigmoid(dot);
            probs.push(tape.clamp(p, PROB_EPS, 1.0 - PROB_EPS));
        }
        probs
    }

    /// Forward-only probabilities over the whole vocabulary.
    pub fn predict_probs_from_features(&self, features: &[(u32, f64)]) -> Result<Vec<f64>> {
        let active: Vec<usize> = (0..self.n_types()).collect();
        let mut tape = Tape::with_capacity(1 << 16);
        let vars = self.probs_on_tape(&mut tape, features, &active);
        tape.assert_finite()?;
        Ok(vars.into_iter().map(|v| tape.value(v)).collect())
    }

    pub fn predict_probs(&self, mention: &[String], context: &[String]) -> Result<Vec<f64>> {
        let feats = self.featurize(mention, context)?;
        self.predict_probs_from_features(&feats)
    }

    /// The trained box of type `k` (box model only).
    pub fn type_box(&self, k: usize) -> Result<BoxEmbedding> {
        if self.kind != ModelKind::Box {
            return Err(Error::InvalidParameter("type_box requires a box model".into()));
        }
        let d = self.dim;
        let centers = self.params.slice("type_centers");
        let offsets = self.params.slice("type_offsets");
        box_from_params(&BoxParams {
            center: centers[k * d..(k + 1) * d].to_vec(),
            offset: offsets[k * d..(k + 1) * d].to_vec(),
        })
    }

    /// Mention/context box for one example (box model only).
    pub fn mention_box(&self, mention: &[String], context: &[String]) -> Result<BoxEmbedding> {
        if self.kind != ModelKind::Box {
            return Err(Error::InvalidParameter("mention_box requires a box model".into()));
        }
        let feats = self.featurize(mention, context)?;
        let mut tape = Tape::with_capacity(1 << 14);
        let hbar = encoder::encode_on_tape(&mut tape, &self.params, &self.enc, &feats);
        tape.assert_finite()?;
        let d = self.dim;
        let center: Vec<f64> = hbar[..d].iter().map(|v| tape.value(*v)).collect();
        let offset: Vec<f64> = hbar[d..].iter().map(|v| tape.value(*v)).collect();
        box_from_params(&BoxParams { center, offset })
    }
}
