//! Measurement protocols: macro/micro F1 with class breakdown,
//! supertype/subtype consistency, label-noise harness, calibration with
//! temperature + shift fitting, CAP cosine coreference, and box-edge reports.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{gumbel_intersection, sigmoid, BoxEmbedding, GumbelConfig, PROB_EPS};
use crate::models::{TypeClass, TypeVocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub total: Prf,
    pub micro_f1: f64,
    pub per_class: Option<Vec<(TypeClass, Prf)>>,
    /// Fraction of examples with an empty prediction set (diagnostic).
    pub empty_rate: f64,
    pub n_examples: usize,
}

fn check_aligned(preds: &[BTreeSet<usize>], golds: &[BTreeSet<usize>]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::DimensionMismatch { left: preds.len(), right: golds.len() });
    }
    if let Some(i) = golds.iter().position(|g| g.is_empty()) {
        return Err(Error::data(format!("example {i} has an empty gold set")));
    }
    Ok(())
}

/// Example-averaged macro P/R/F1 in the UFET convention: precision averaged
/// over examples with nonempty predictions, recall over all examples, F1 the
/// harmonic mean of the two aggregates.
pub fn macro_prf(preds: &[BTreeSet<usize>], golds: &[BTreeSet<usize>]) -> Result<Prf> {
    check_aligned(preds, golds)?;
    let mut p_sum = 0.0;
    let mut p_n = 0usize;
    let mut r_sum = 0.0;
    for (pred, gold) in preds.iter().zip(golds) {
        let hits = pred.intersection(gold).count() as f64;
        if !pred.is_empty() {
            p_sum += hits / pred.len() as f64;
            p_n += 1;
        }
        r_sum += hits / gold.len() as f64;
    }
    let p = if p_n == 0 { 0.0 } else { p_sum / p_n as f64 };
    let r = if golds.is_empty() { 0.0 } else { r_sum / golds.len() as f64 };
    Ok(Prf { p, r, f1: harmonic(p, r) })
}

/// Pooled TP/FP/FN over all (example, type) decisions.
pub fn micro_f1(preds: &[BTreeSet<usize>], golds: &[BTreeSet<usize>]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (pred, gold) in preds.iter().zip(golds) {
        tp += pred.intersection(gold).count();
        fp += pred.difference(gold).count();
        fn_ += gold.difference(pred).count();
    }
    if 2 * tp + fp + fn_ == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

fn filter_class(set: &BTreeSet<usize>, classes: &[TypeClass], c: TypeClass) -> BTreeSet<usize> {
    set.iter().copied().filter(|&k| classes[k] == c).collect()
}

/// Full report. When class labels are available the breakdown filters both
/// prediction and gold to each class; examples with no gold (resp. no
/// predicted) type of that class are excluded from the recall (resp.
/// precision) average.
pub fn evaluate(
    preds: &[BTreeSet<usize>],
    golds: &[BTreeSet<usize>],
    classes: Option<&[TypeClass]>,
) -> Result<EvalReport> {
    let total = macro_prf(preds, golds)?;
    let micro = micro_f1(preds, golds);
    let empty = preds.iter().filter(|p| p.is_empty()).count() as f64;
    let per_class = classes.map(|classes| {
        [TypeClass::Coarse, TypeClass::Fine, TypeClass::UltraFine]
            .iter()
            .map(|&c| {
                let mut p_sum = 0.0;
                let mut p_n = 0usize;
                let mut r_sum = 0.0;
                let mut r_n = 0usize;
                for (pred, gold) in preds.iter().zip(golds) {
                    let fp = filter_class(pred, classes, c);
                    let fg = filter_class(gold, classes, c);
                    let hits = fp.intersection(&fg).count() as f64;
                    if !fp.is_empty() {
                        p_sum += hits / fp.len() as f64;
                        p_n += 1;
                    }
                    if !fg.is_empty() {
                        r_sum += hits / fg.len() as f64;
                        r_n += 1;
                    }
                }
                let p = if p_n == 0 { 0.0 } else { p_sum / p_n as f64 };
                let r = if r_n == 0 { 0.0 } else { r_sum / r_n as f64 };
                (c, Prf { p, r, f1: harmonic(p, r) })
            })
            .collect()
    });
    Ok(EvalReport {
        total,
        micro_f1: micro,
        per_class,
        empty_rate: if preds.is_empty() { 0.0 } else { empty / preds.len() as f64 },
        n_examples: preds.len(),
    })
}

#[derive(Debug, Clone)]
pub struct SupertypeStats {
    pub supertype: String,
    /// Number of predicted subtype occurrences under this supertype.
    pub count: usize,
    /// How many of those predictions also include the supertype.
    pub hits: usize,
}

impl SupertypeStats {
    pub fn accuracy(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.hits as f64 / self.count as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub per_supertype: Vec<SupertypeStats>,
    pub total_count: usize,
    pub total_hits: usize,
}

impl ConsistencyReport {
    pub fn total_accuracy(&self) -> f64 {
        if self.total_count == 0 {
            f64::NAN
        } else {
            self.total_hits as f64 / self.total_count as f64
        }
    }
}

/// For every predicted subtype occurrence, check whether its supertype is
/// predicted in the same set. Grouped by supertype in first-seen order.
pub fn consistency(preds: &[BTreeSet<usize>], vocab: &TypeVocabulary) -> Result<ConsistencyReport> {
    if vocab.supertype_pairs.is_empty() {
        return Err(Error::data("no supertype pairs available"));
    }
    let mut order: Vec<usize> = Vec::new();
    let mut stats: std::collections::HashMap<usize, SupertypeStats> = Default::default();
    for &(sup, _) in &vocab.supertype_pairs {
        if !stats.contains_key(&sup) {
            order.push(sup);
            stats.insert(
                sup,
                SupertypeStats { supertype: vocab.name(sup).to_string(), count: 0, hits: 0 },
            );
        }
    }
    for pred in preds {
        for &(sup, sub) in &vocab.supertype_pairs {
            if pred.contains(&sub) {
                let s = stats.get_mut(&sup).expect("initialized above");
                s.count += 1;
                if pred.contains(&sup) {
                    s.hits += 1;
                }
            }
        }
    }
    let per_supertype: Vec<SupertypeStats> = order.into_iter().map(|k| stats[&k].clone()).collect();
    let total_count = per_supertype.iter().map(|s| s.count).sum();
    let total_hits = per_supertype.iter().map(|s| s.hits).sum();
    Ok(ConsistencyReport { per_supertype, total_count, total_hits })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseTarget {
    Coarse,
    FineUltra,
    All,
}

impl std::str::FromStr for NoiseTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(NoiseTarget::Coarse),
            "fine" | "fine-ultra" => Ok(NoiseTarget::FineUltra),
            "all" => Ok(NoiseTarget::All),
            other => Err(Error::data(format!("unknown noise target `{other}`"))),
        }
    }
}

fn targeted(class: Option<TypeClass>, target: NoiseTarget) -> bool {
    match target {
        NoiseTarget::All => true,
        NoiseTarget::Coarse => class == Some(TypeClass::Coarse),
        NoiseTarget::FineUltra => {
            matches!(class, Some(TypeClass::Fine) | Some(TypeClass::UltraFine))
        }
    }
}

/// Drop each targeted gold label independently with probability `drop_prob`.
/// An example whose gold set would become empty keeps its original labels.
pub fn noise_labels(
    dataset: &Dataset,
    drop_prob: f64,
    target: NoiseTarget,
    seed: u64,
    vocab: &TypeVocabulary,
) -> Result<Dataset> {
    if target != NoiseTarget::All && vocab.class_of.is_none() {
        return Err(Error::data("noise target filters by class but vocabulary has no classes"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dataset.len());
    for ex in dataset {
        let mut noised = ex.clone();
        noised.gold = ex
            .gold
            .iter()
            .copied()
            .filter(|&k| !(targeted(vocab.class(k), target) && rng.gen_bool(drop_prob)))
            .collect();
        if noised.gold.is_empty() {
            noised.gold = ex.gold.clone();
        }
        out.push(noised);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStats {
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    /// Ten equal-width bins [0,0.1), ..., [0.9,1.0].
    pub bins: Vec<BinStats>,
    /// Sum over nonempty bins of |mean confidence - empirical accuracy|.
    pub total_error: f64,
}

pub fn calibration_report(confidences: &[f64], outcomes: &[bool]) -> Result<CalibrationReport> {
    if confidences.is_empty() || confidences.len() != outcomes.len() {
        return Err(Error::data("calibration inputs must be nonempty and aligned"));
    }
    let mut count = [0usize; 10];
    let mut conf_sum = [0.0f64; 10];
    let mut pos = [0usize; 10];
    for (&p, &y) in confidences.iter().zip(outcomes) {
        let b = ((p * 10.0) as usize).min(9);
        count[b] += 1;
        conf_sum[b] += p;
        if y {
            pos[b] += 1;
        }
    }
    let mut bins = Vec::with_capacity(10);
    let mut total_error = 0.0;
    for b in 0..10 {
        if count[b] == 0 {
            bins.push(BinStats { count: 0, mean_confidence: f64::NAN, accuracy: f64::NAN });
        } else {
            let mean_conf = conf_sum[b] / count[b] as f64;
            let acc = pos[b] as f64 / count[b] as f64;
            total_error += (mean_conf - acc).abs();
            bins.push(BinStats { count: count[b], mean_confidence: mean_conf, accuracy: acc });
        }
    }
    Ok(CalibrationReport { bins, total_error })
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    (p / (1.0 - p)).ln()
}

/// `p -> sigmoid(scale * logit(p) + shift)`.
pub fn transform_prob(p: f64, scale: f64, shift: f64) -> f64 {
    sigmoid(scale * logit(p) + shift)
}

/// Grid-search the post-hoc calibration transform over
/// scale in {0.1, ..., 3.0} x shift in {-3.0, ..., 3.0} (step 0.1),
/// minimizing the calibration total error; ties break toward scale closest
/// to 1, then shift closest to 0.
pub fn fit_temperature_shift(confidences: &[f64], outcomes: &[bool]) -> Result<(f64, f64)> {
    if confidences.is_empty() || confidences.len() != outcomes.len() {
        return Err(Error::data("calibration inputs must be nonempty and aligned"));
    }
    if outcomes.iter().all(|&y| y) || outcomes.iter().all(|&y| !y) {
        log::warn!("degenerate calibration input (all outcomes identical); returning identity");
        return Ok((1.0, 0.0));
    }
    let logits: Vec<f64> = confidences.iter().map(|&p| logit(p)).collect();
    let mut best = (f64::INFINITY, f64::INFINITY, f64::INFINITY, 1.0, 0.0);
    for si in 1..=30 {
        let scale = si as f64 * 0.1;
        for bi in -30..=30i32 {
            let shift = bi as f64 * 0.1;
            let transformed: Vec<f64> =
                logits.iter().map(|&l| sigmoid(scale * l + shift)).collect();
            let err = calibration_report(&transformed, outcomes)?.total_error;
            let key = (err, (scale - 1.0).abs(), shift.abs());
            if key < (best.0, best.1, best.2) {
                best = (err, key.1, key.2, scale, shift);
            }
        }
    }
    Ok((best.3, best.4))
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Coreference-arc decision: cosine of the two type-probability vectors
/// against a 0.5 threshold.
pub fn cap_predict(probs_a: &[f64], probs_b: &[f64]) -> bool {
    cosine(probs_a, probs_b) >= 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRow {
    pub dim: usize,
    pub box_min: f64,
    pub box_max: f64,
    pub mbb_min: Option<f64>,
    pub mbb_max: Option<f64>,
}

/// Per-dimension edges of a type box and, when qualifying mention boxes are
/// supplied, of the minimum bounding box of their Gumbel intersections with
/// the type box.
pub fn edge_report(
    type_box: &BoxEmbedding,
    qualifying_mentions: &[BoxEmbedding],
    cfg: &GumbelConfig,
) -> Result<Vec<EdgeRow>> {
    let d = type_box.dim();
    let mut mbb: Option<(Vec<f64>, Vec<f64>)> = None;
    for m in qualifying_mentions {
        let inter = gumbel_intersection(m, type_box, cfg)?;
        match &mut mbb {
            None => mbb = Some((inter.min.clone(), inter.max.clone())),
            Some((lo, hi)) => {
                for i in 0..d {
                    lo[i] = lo[i].min(inter.min[i]);
                    hi[i] = hi[i].max(inter.max[i]);
                }
            }
        }
    }
    Ok((0..d)
        .map(|i| EdgeRow {
            dim: i,
            box_min: type_box.min[i],
            box_max: type_box.max[i],
            mbb_min: mbb.as_ref().map(|(lo, _)| lo[i]),
            mbb_max: mbb.as_ref().map(|(_, hi)| hi[i]),
        })
        .collect())
}

/// Fraction of dimensions in which the candidate interval lies inside the
/// supertype box interval.
pub fn containment_score(super_box: &BoxEmbedding, inner: &BoxEmbedding) -> Result<f64> {
    if super_box.dim() != inner.dim() {
        return Err(Error::DimensionMismatch { left: super_box.dim(), right: inner.dim() });
    }
    let d = super_box.dim();
    let contained = (0..d)
        .filter(|&i| inner.min[i] >= super_box.min[i] && inner.max[i] <= super_box.max[i])
        .count();
    Ok(contained as f64 / d as f64)
}

pub fn edge_csv(rows: &[EdgeRow]) -> String {
    let mut out = String::from("dim,box_min,box_max,mbb_min,mbb_max\n");
    for r in rows {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.dim,
            r.box_min,
            r.box_max,
            fmt(r.mbb_min),
            fmt(r.mbb_max)
        ));
    }
    out
}

pub fn calibration_csv(report: &CalibrationReport) -> String {
    let mut out = String::from("bin_lo,bin_hi,count,mean_confidence,accuracy\n");
    for (b, s) in report.bins.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            b as f64 / 10.0,
            (b + 1) as f64 / 10.0,
            s.count,
            if s.count == 0 { String::new() } else { s.mean_confidence.to_string() },
            if s.count == 0 { String::new() } else { s.accuracy.to_string() },
        ))
    }
    out
}
