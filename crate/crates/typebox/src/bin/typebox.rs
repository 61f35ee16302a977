//! Command-line entry point: training, evaluation, and the analysis
//! protocols (consistency, label noise, calibration, coreference arcs,
//! box-edge exports), plus synthetic data generation and format conversion.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! Log verbosity via `RUST_LOG` (default `info`).

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use typebox::data::{self, Dataset, SynthTaxonomy};
use typebox::encoder::EncoderConfig;
use typebox::error::{Error, Result};
use typebox::evaluation::{self, NoiseTarget};
use typebox::geometry::GumbelConfig;
use typebox::models::{apply_bbn_rules, Model, ModelKind, PredictionSet};
use typebox::training::{self, predict_dataset, TrainConfig};
use typebox::{checkpoint, training::TrainOutcome};

#[derive(Parser)]
#[command(name = "typebox", version, about = "Box-embedding entity typing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a box or vector typing model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset (macro/micro F1).
    Eval(EvalArgs),
    /// Supertype/subtype consistency of predictions.
    Consistency(ConsistencyArgs),
    /// Write a label-noised copy of a dataset.
    Noise(NoiseArgs),
    /// Fit temperature+shift calibration on dev, report error on test.
    Calibrate(CalibrateArgs),
    /// Coreference-arc prediction from type-probability cosine.
    Cap(CapArgs),
    /// Export per-dimension box edges and mention-intersection hulls as CSV.
    Edges(EdgesArgs),
    /// Generate a synthetic taxonomy dataset with train/dev/test splits.
    GenSynth(GenSynthArgs),
    /// Convert UFET-style records to the native JSONL schema.
    ConvertUfet(ConvertArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training data (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Dev data for early stopping and model selection (JSONL).
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Type vocabulary file.
    #[arg(long)]
    vocab: PathBuf,
    /// Supertype/subtype pair TSV to embed in the checkpoint.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// JSON config file; explicit flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model head: box or vector.
    #[arg(long)]
    model: Option<String>,
    /// Box dimension d (default 109) or vector dimension (default 307).
    #[arg(long)]
    dim: Option<usize>,
    /// Gumbel temperature beta [default: 0.00036].
    #[arg(long)]
    beta: Option<f64>,
    /// Softplus inverse temperature t [default: 1.2471].
    #[arg(long)]
    softplus_temp: Option<f64>,
    /// Learning rate [default: 0.00372 box, 0.00539 vector].
    #[arg(long)]
    lr: Option<f64>,
    /// Learning rate for the hashed embedding table [default: same as --lr].
    #[arg(long)]
    lr_encoder: Option<f64>,
    /// Minibatch size [default: 128].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Maximum epochs [default: 30].
    #[arg(long)]
    epochs: Option<usize>,
    /// Negatives per example for the box head; 0 scores all types
    /// [default: 1000]. Ignored with a warning for the vector head.
    #[arg(long)]
    neg_samples: Option<usize>,
    /// Epochs without dev improvement before stopping; 0 disables
    /// [default: 5].
    #[arg(long)]
    patience: Option<usize>,
    /// Hashing-space size of the encoder [default: 65536].
    #[arg(long)]
    feature_dim: Option<usize>,
    /// Hidden width of the encoder [default: 128].
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// Master RNG seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output checkpoint path.
    #[arg(long)]
    out: PathBuf,
}

/// Optional JSON config mirroring the train flags.
#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    dim: Option<usize>,
    beta: Option<f64>,
    softplus_temp: Option<f64>,
    lr: Option<f64>,
    lr_encoder: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    neg_samples: Option<usize>,
    patience: Option<usize>,
    feature_dim: Option<usize>,
    hidden_dim: Option<usize>,
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Report per-class P/R/F1 (requires class labels in the vocabulary).
    #[arg(long)]
    breakdown: bool,
    /// Apply the BBN post-hoc prediction rules before scoring.
    #[arg(long)]
    bbn_rules: bool,
    /// Also write the report as CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ConsistencyArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Pair TSV overriding the pairs stored in the checkpoint.
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Which classes to noise: coarse, fine (fine + ultra-fine), or all.
    #[arg(long, default_value = "coarse")]
    target: String,
    /// Per-label drop probability.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    drop_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Dev data the (scale, shift) transform is fitted on.
    #[arg(long)]
    dev: PathBuf,
    /// Test data the pre/post calibration error is reported on.
    #[arg(long)]
    test: PathBuf,
    /// Restrict decisions to types with at least this many dev gold
    /// occurrences (0 keeps everything).
    #[arg(long, default_value_t = 0)]
    min_type_count: usize,
    /// Write the post-fit test reliability table as CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct CapArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// JSONL with mention_a/context_a/mention_b/context_b/label per line.
    #[arg(long)]
    pairs_data: PathBuf,
}

#[derive(Args)]
struct EdgesArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Type name to report on.
    #[arg(long = "type", value_name = "TYPE")]
    type_name: String,
    /// Mentions whose intersections define the effective region.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
}

#[derive(Args)]
struct GenSynthArgs {
    /// Comma-separated branching factors, e.g. 4,4,3.
    #[arg(long, default_value = "4,4,3")]
    branching: String,
    /// Total number of examples before splitting.
    #[arg(long, default_value_t = 6000)]
    n: usize,
    /// Probability of dropping a non-leaf gold label.
    #[arg(long, default_value_t = 0.0)]
    label_dropout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    dev_frac: f64,
    /// Directory receiving train/dev/test.jsonl, vocab.tsv, pairs.tsv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    /// UFET-style JSONL (mention_span, left_context_token,
    /// right_context_token, y_str).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        let code = match e {
            Error::Numerical(_) => 3,
            Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => 1,
            _ => 2,
        };
        std::process::exit(code);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Consistency(args) => cmd_consistency(args),
        Command::Noise(args) => cmd_noise(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Cap(args) => cmd_cap(args),
        Command::Edges(args) => cmd_edges(args),
        Command::GenSynth(args) => cmd_gen_synth(args),
        Command::ConvertUfet(args) => cmd_convert_ufet(args),
    }
}

fn parse_kind(s: &str) -> Result<ModelKind> {
    match s {
        "box" => Ok(ModelKind::Box),
        "vector" => Ok(ModelKind::Vector),
        other => Err(Error::InvalidParameter(format!("unknown model kind `{other}`"))),
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let file: FileConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => FileConfig::default(),
    };
    let kind = parse_kind(&args.model.or(file.model).unwrap_or_else(|| "box".into()))?;
    let dim = args.dim.or(file.dim).unwrap_or(match kind {
        ModelKind::Box => training::DEFAULT_BOX_DIM,
        ModelKind::Vector => training::DEFAULT_VECTOR_DIM,
    });
    let seed = args.seed.or(file.seed).unwrap_or(0);

    let mut cfg = TrainConfig::for_kind(kind);
    cfg.seed = seed;
    if let Some(e) = args.epochs.or(file.epochs) {
        cfg.epochs = e;
    }
    if let Some(b) = args.batch_size.or(file.batch_size) {
        cfg.batch_size = b;
    }
    if let Some(lr) = args.lr.or(file.lr) {
        cfg.lr_other = lr;
        cfg.lr_encoder = lr;
    }
    if let Some(lr) = args.lr_encoder.or(file.lr_encoder) {
        cfg.lr_encoder = lr;
    }
    if let Some(p) = args.patience.or(file.patience) {
        cfg.patience = p;
    }
    match (kind, args.neg_samples.or(file.neg_samples)) {
        (ModelKind::Vector, Some(_)) => {
            log::warn!("--neg-samples has no effect on the vector model; ignoring");
            cfg.neg_samples = None;
        }
        (ModelKind::Box, Some(0)) => cfg.neg_samples = None,
        (ModelKind::Box, Some(k)) => cfg.neg_samples = Some(k),
        _ => {}
    }

    let mut vocab = data::load_vocab(&args.vocab)?;
    if let Some(pairs_path) = &args.pairs {
        vocab.set_pairs_by_name(&data::load_pairs(pairs_path)?)?;
    }
    let train_set = data::load_jsonl(&args.data, &vocab)?;
    let dev_set = args.dev.as_deref().map(|p| data::load_jsonl(p, &vocab)).transpose()?;

    let mut enc = EncoderConfig {
        hash_seed: seed,
        ..EncoderConfig::default()
    };
    if let Some(f) = args.feature_dim.or(file.feature_dim) {
        enc.feature_dim = f;
    }
    if let Some(h) = args.hidden_dim.or(file.hidden_dim) {
        enc.hidden_dim = h;
    }
    let model = match kind {
        ModelKind::Box => {
            let gumbel = GumbelConfig::new(
                args.beta.or(file.beta).unwrap_or(training::DEFAULT_BETA),
                args.softplus_temp
                    .or(file.softplus_temp)
                    .unwrap_or(training::DEFAULT_SOFTPLUS_INV_TEMP),
            )?;
            Model::new_box(enc, gumbel, vocab, dim)?
        }
        ModelKind::Vector => Model::new_vector(enc, vocab, dim)?,
    };

    log::info!(
        "training {kind} model: dim {dim}, {} types, {} train / {} dev examples",
        model.n_types(),
        train_set.len(),
        dev_set.as_ref().map_or(0, |d| d.len())
    );
    let TrainOutcome { model, history, best_dev_f1, steps } =
        training::train(model, &train_set, dev_set.as_ref(), &cfg)?;
    checkpoint::save(&args.out, &model, seed, steps)?;
    println!("trained {} epochs ({steps} steps)", history.len());
    if let Some(f1) = best_dev_f1 {
        println!("best dev macro-F1: {f1:.4}");
    }
    println!("checkpoint written to {}", args.out.display());
    Ok(())
}

fn load_predictions(model: &Model, data_path: &Path) -> Result<(Dataset, Vec<PredictionSet>)> {
    let dataset = data::load_jsonl(data_path, &model.vocab)?;
    let preds = predict_dataset(model, &dataset)?;
    Ok((dataset, preds))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (model, _, _) = checkpoint::load(&args.ckpt)?;
    if args.breakdown && model.vocab.class_of.is_none() {
        return Err(Error::data("--breakdown requires class labels in the vocabulary"));
    }
    let (dataset, mut preds) = load_predictions(&model, &args.data)?;
    if args.bbn_rules {
        preds = preds.into_iter().map(|p| apply_bbn_rules(p, &model.vocab)).collect();
    }
    let pred_sets: Vec<BTreeSet<usize>> = preds.into_iter().map(|p| p.predicted).collect();
    let golds: Vec<BTreeSet<usize>> = dataset.iter().map(|ex| ex.gold.clone()).collect();
    let classes = if args.breakdown { model.vocab.class_of.as_deref() } else { None };
    let report = evaluation::evaluate(&pred_sets, &golds, classes)?;

    println!("examples: {}", report.n_examples);
    println!(
        "macro  P {:.4}  R {:.4}  F1 {:.4}",
        report.total.p, report.total.r, report.total.f1
    );
    println!("micro  F1 {:.4}", report.micro_f1);
    println!("empty prediction rate: {:.4}", report.empty_rate);
    let mut csv = String::from("scope,precision,recall,f1\n");
    csv.push_str(&format!(
        "all,{},{},{}\n",
        report.total.p, report.total.r, report.total.f1
    ));
    if let Some(per_class) = &report.per_class {
        for (class, prf) in per_class {
            let name = format!("{class:?}").to_lowercase();
            println!("{name:<11} P {:.4}  R {:.4}  F1 {:.4}", prf.p, prf.r, prf.f1);
            csv.push_str(&format!("{name},{},{},{}\n", prf.p, prf.r, prf.f1));
        }
    }
    if let Some(path) = &args.out_csv {
        std::fs::write(path, csv)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_consistency(args: ConsistencyArgs) -> Result<()> {
    let (mut model, _, _) = checkpoint::load(&args.ckpt)?;
    if let Some(pairs_path) = &args.pairs {
        model.vocab.set_pairs_by_name(&data::load_pairs(pairs_path)?)?;
    }
    let (_, preds) = load_predictions(&model, &args.data)?;
    let pred_sets: Vec<BTreeSet<usize>> = preds.into_iter().map(|p| p.predicted).collect();
    let report = evaluation::consistency(&pred_sets, &model.vocab)?;
    for s in &report.per_supertype {
        if s.count > 0 {
            println!("{:<20} {:>6} predictions  accuracy {:.4}", s.supertype, s.count, s.accuracy());
        } else {
            println!("{:<20} {:>6} predictions", s.supertype, 0);
        }
    }
    if report.total_count == 0 {
        println!("no subtype predictions; consistency undefined");
    } else {
        println!(
            "total: {} / {} consistent ({:.4})",
            report.total_hits,
            report.total_count,
            report.total_accuracy()
        );
    }
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> Result<()> {
    let vocab = data::load_vocab(&args.vocab)?;
    let dataset = data::load_jsonl(&args.data, &vocab)?;
    let target: NoiseTarget = args.target.parse()?;
    if !(0.0..=1.0).contains(&args.drop_prob) {
        return Err(Error::InvalidParameter("--drop-prob must lie in [0, 1]".into()));
    }
    let noised = evaluation::noise_labels(&dataset, args.drop_prob, target, args.seed, &vocab)?;
    data::save_jsonl(&args.out, &noised, &vocab)?;
    println!("wrote {} noised examples to {}", noised.len(), args.out.display());
    Ok(())
}

/// Flatten per-example probability vectors into (confidence, outcome)
/// decisions, optionally keeping only frequent-enough types.
fn decisions(
    dataset: &Dataset,
    preds: &[PredictionSet],
    keep: &[bool],
) -> (Vec<f64>, Vec<bool>) {
    let mut conf = Vec::new();
    let mut outcomes = Vec::new();
    for (ex, pred) in dataset.iter().zip(preds) {
        for (k, &p) in pred.probs.iter().enumerate() {
            if keep[k] {
                conf.push(p);
                outcomes.push(ex.gold.contains(&k));
            }
        }
    }
    (conf, outcomes)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let (model, _, _) = checkpoint::load(&args.ckpt)?;
    let (dev, dev_preds) = load_predictions(&model, &args.dev)?;
    let (test, test_preds) = load_predictions(&model, &args.test)?;

    let mut counts = vec![0usize; model.n_types()];
    for ex in &dev {
        for &g in &ex.gold {
            counts[g] += 1;
        }
    }
    let keep: Vec<bool> = counts.iter().map(|&c| c >= args.min_type_count).collect();
    if keep.iter().all(|&k| !k) {
        return Err(Error::data("min-type-count filter removed every type"));
    }

    let (dev_conf, dev_out) = decisions(&dev, &dev_preds, &keep);
    let (test_conf, test_out) = decisions(&test, &test_preds, &keep);
    let (scale, shift) = evaluation::fit_temperature_shift(&dev_conf, &dev_out)?;
    let pre = evaluation::calibration_report(&test_conf, &test_out)?;
    let post_conf: Vec<f64> = test_conf
        .iter()
        .map(|&p| evaluation::transform_prob(p, scale, shift))
        .collect();
    let post = evaluation::calibration_report(&post_conf, &test_out)?;
    println!("fitted scale {scale:.1}, shift {shift:.1}");
    println!("test total error: {:.4} before, {:.4} after", pre.total_error, post.total_error);
    if let Some(path) = &args.out_csv {
        std::fs::write(path, evaluation::calibration_csv(&post))?;
        println!("reliability table written to {}", path.display());
    }
    Ok(())
}

fn cmd_cap(args: CapArgs) -> Result<()> {
    let (model, _, _) = checkpoint::load(&args.ckpt)?;
    let content = std::fs::read_to_string(&args.pairs_data)?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::data_at(line_no, format!("malformed JSON: {e}")))?;
        let field = |name: &str| -> Result<Vec<String>> {
            let raw = v
                .get(name)
                .ok_or_else(|| Error::data_at(line_no, format!("missing `{name}`")))?;
            match raw {
                serde_json::Value::String(s) => {
                    Ok(s.split_whitespace().map(str::to_string).collect())
                }
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| {
                        x.as_str().map(str::to_string).ok_or_else(|| {
                            Error::data_at(line_no, format!("`{name}` must contain strings"))
                        })
                    })
                    .collect(),
                _ => Err(Error::data_at(line_no, format!("`{name}` must be a string or list"))),
            }
        };
        let label = v
            .get("label")
            .and_then(|l| l.as_bool().or_else(|| l.as_u64().map(|n| n != 0)))
            .ok_or_else(|| Error::data_at(line_no, "missing or non-boolean `label`"))?;
        let pa = model.predict_probs(&field("mention_a")?, &field("context_a")?)?;
        let pb = model.predict_probs(&field("mention_b")?, &field("context_b")?)?;
        if evaluation::cap_predict(&pa, &pb) == label {
            correct += 1;
        }
        total += 1;
    }
    if total == 0 {
        return Err(Error::data("no coreference pairs in input"));
    }
    println!("coreference accuracy: {:.4} ({correct}/{total})", correct as f64 / total as f64);
    Ok(())
}

fn cmd_edges(args: EdgesArgs) -> Result<()> {
    let (model, _, _) = checkpoint::load(&args.ckpt)?;
    let type_id = model
        .vocab
        .id(&args.type_name)
        .ok_or_else(|| Error::UnknownType(args.type_name.clone()))?;
    let type_box = model.type_box(type_id)?;
    let dataset = data::load_jsonl(&args.data, &model.vocab)?;

    // qualifying mentions: those the model assigns the type to (p > 0.5)
    let mut qualifying = Vec::new();
    for ex in &dataset {
        let probs = model.predict_probs(&ex.mention, &ex.context)?;
        if probs[type_id] > 0.5 {
            qualifying.push(model.mention_box(&ex.mention, &ex.context)?);
        }
    }
    if qualifying.is_empty() {
        log::warn!("no mention qualified for `{}`; hull columns will be empty", args.type_name);
    }
    let rows = evaluation::edge_report(&type_box, &qualifying, &model.gumbel)?;
    std::fs::write(&args.out_csv, evaluation::edge_csv(&rows))?;
    println!(
        "{} qualifying mentions; edge report for `{}` written to {}",
        qualifying.len(),
        args.type_name,
        args.out_csv.display()
    );
    Ok(())
}

fn cmd_gen_synth(args: GenSynthArgs) -> Result<()> {
    let branching: Vec<usize> = args
        .branching
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad branching factor `{s}`")))
        })
        .collect::<Result<_>>()?;
    let test_frac = 1.0 - args.train_frac - args.dev_frac;
    if args.train_frac <= 0.0 || args.dev_frac <= 0.0 || test_frac <= 0.0 {
        return Err(Error::InvalidParameter("split fractions must be positive and sum below 1".into()));
    }
    let tax = SynthTaxonomy { branching, ..SynthTaxonomy::default() };
    let (dataset, vocab) = data::generate_synthetic(&tax, args.n, args.label_dropout, args.seed)?;
    let splits = data::split(&dataset, &[args.train_frac, args.dev_frac, test_frac], args.seed)?;

    std::fs::create_dir_all(&args.out_dir)?;
    for (name, part) in ["train", "dev", "test"].iter().zip(&splits) {
        data::save_jsonl(&args.out_dir.join(format!("{name}.jsonl")), part, &vocab)?;
    }
    data::save_vocab(&args.out_dir.join("vocab.tsv"), &vocab)?;
    let pairs: Vec<(String, String)> = vocab
        .supertype_pairs
        .iter()
        .map(|&(s, b)| (vocab.name(s).to_string(), vocab.name(b).to_string()))
        .collect();
    data::save_pairs(&args.out_dir.join("pairs.tsv"), &pairs)?;
    println!(
        "wrote {} types, {}/{}/{} examples to {}",
        vocab.len(),
        splits[0].len(),
        splits[1].len(),
        splits[2].len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_convert_ufet(args: ConvertArgs) -> Result<()> {
    use std::io::Write as _;
    let content = std::fs::read_to_string(&args.input)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&args.output)?);
    let mut n = 0usize;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::data_at(line_no, format!("malformed JSON: {e}")))?;
        let strings = |name: &str| -> Result<Vec<String>> {
            v.get(name)
                .and_then(serde_json::Value::as_array)
                .ok_or_else(|| Error::data_at(line_no, format!("missing `{name}` list")))?
                .iter()
                .map(|x| {
                    x.as_str().map(str::to_string).ok_or_else(|| {
                        Error::data_at(line_no, format!("`{name}` must contain strings"))
                    })
                })
                .collect()
        };
        let mention: Vec<String> = v
            .get("mention_span")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| Error::data_at(line_no, "missing `mention_span`"))?
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let mut context = strings("left_context_token")?;
        context.extend(strings("right_context_token")?);
        let types = strings("y_str")?;
        if types.is_empty() {
            return Err(Error::data_at(line_no, "empty `y_str`"));
        }
        let obj = serde_json::json!({ "mention": mention, "context": context, "types": types });
        writeln!(w, "{obj}")?;
        n += 1;
    }
    println!("converted {n} records to {}", args.output.display());
    Ok(())
}
