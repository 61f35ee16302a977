//! Dataset ingestion and the seeded synthetic-taxonomy generator.
//!
//! Datasets are JSONL: one object per line with `mention` (string or token
//! list), `context` (string or token list, may be absent or empty) and
//! `types` (list of type names). Strings are whitespace-tokenized.
//! Vocabulary files are one type per line, optionally `name<TAB>class`;
//! supertype pairs are two-column TSV (supertype, subtype).

use crate::error::{Error, Result};
use crate::models::{TypeClass, TypeVocabulary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde_json::Value;
use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub mention: Vec<String>,
    pub context: Vec<String>,
    pub gold: BTreeSet<usize>,
}

pub type Dataset = Vec<Example>;

fn tokens_from_value(v: &Value, field: &str, line: usize) -> Result<Vec<String>> {
    match v {
        Value::String(s) => Ok(s.split_whitespace().map(|t| t.to_string()).collect()),
        Value::Array(items) => items
            .iter()
            .map(|item| {
                item.as_str()
                    .map(|s| s.to_string())
                    .ok_or_else(|| Error::data_at(line, format!("`{field}` must contain strings")))
            })
            .collect(),
        _ => Err(Error::data_at(line, format!("`{field}` must be a string or token list"))),
    }
}

pub fn load_jsonl(path: &Path, vocab: &TypeVocabulary) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::data_at(line_no, format!("malformed JSON: {e}")))?;
        let mention = tokens_from_value(
            value.get("mention").ok_or_else(|| Error::data_at(line_no, "missing `mention`"))?,
            "mention",
            line_no,
        )?;
        if mention.is_empty() {
            return Err(Error::data_at(line_no, "empty mention"));
        }
        let context = match value.get("context") {
            Some(v) => tokens_from_value(v, "context", line_no)?,
            None => Vec::new(),
        };
        let types = value
            .get("types")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::data_at(line_no, "missing `types` list"))?;
        if types.is_empty() {
            return Err(Error::data_at(line_no, "empty gold type set"));
        }
        let mut gold = BTreeSet::new();
        for t in types {
            let name = t
                .as_str()
                .ok_or_else(|| Error::data_at(line_no, "`types` must contain strings"))?;
            let id = vocab
                .id(name)
                .ok_or_else(|| Error::data_at(line_no, format!("unknown type `{name}`")))?;
            gold.insert(id);
        }
        out.push(Example { mention, context, gold });
    }
    Ok(out)
}

pub fn save_jsonl(path: &Path, dataset: &Dataset, vocab: &TypeVocabulary) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for ex in dataset {
        let obj = serde_json::json!({
            "mention": ex.mention,
            "context": ex.context,
            "types": ex.gold.iter().map(|&k| vocab.name(k)).collect::<Vec<_>>(),
        });
        writeln!(w, "{obj}")?;
    }
    Ok(())
}

/// Vocabulary file: one type per line, optionally `name<TAB>class` where
/// class is coarse / fine / ultra-fine. Classes must be given for all types
/// or none.
pub fn load_vocab(path: &Path) -> Result<TypeVocabulary> {
    let content = std::fs::read_to_string(path)?;
    let mut names = Vec::new();
    let mut classes: Vec<Option<TypeClass>> = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        names.push(parts.next().unwrap().to_string());
        classes.push(match parts.next() {
            Some(c) => Some(c.trim().parse().map_err(|_| {
                Error::data_at(i + 1, format!("unknown type class `{}`", c.trim()))
            })?),
            None => None,
        });
    }
    let vocab = TypeVocabulary::new(names)?;
    if classes.iter().all(|c| c.is_some()) {
        vocab.with_classes(classes.into_iter().map(|c| c.unwrap()).collect())
    } else if classes.iter().any(|c| c.is_some()) {
        Err(Error::data("vocabulary mixes classified and unclassified types"))
    } else {
        Ok(vocab)
    }
}

pub fn save_vocab(path: &Path, vocab: &TypeVocabulary) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (i, name) in vocab.names().iter().enumerate() {
        match vocab.class(i) {
            Some(TypeClass::Coarse) => writeln!(w, "{name}\tcoarse")?,
            Some(TypeClass::Fine) => writeln!(w, "{name}\tfine")?,
            Some(TypeClass::UltraFine) => writeln!(w, "{name}\tultra-fine")?,
            None => writeln!(w, "{name}")?,
        }
    }
    Ok(())
}

/// Two-column TSV of (supertype, subtype) name pairs.
pub fn load_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let content = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next()) {
            (Some(sup), Some(sub)) => pairs.push((sup.trim().to_string(), sub.trim().to_string())),
            _ => return Err(Error::data_at(i + 1, "expected `supertype<TAB>subtype`")),
        }
    }
    Ok(pairs)
}

pub fn save_pairs(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (sup, sub) in pairs {
        writeln!(w, "{sup}\t{sub}")?;
    }
    Ok(())
}

/// Synthetic taxonomy: a tree with `branching[l]` children per node at each
/// level, leaf-specific token vocabularies and shared noise tokens.
#[derive(Debug, Clone)]
pub struct SynthTaxonomy {
    pub branching: Vec<usize>,
    pub tokens_per_leaf: usize,
}

impl Default for SynthTaxonomy {
    fn default() -> Self {
        Self { branching: vec![4, 4, 3], tokens_per_leaf: 6 }
    }
}

const NOISE_TOKENS: &[&str] = &["the", "of", "in", "was", "a", "to", "and", "on", "for", "with"];

struct Tree {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    level: Vec<usize>,
    leaves: Vec<usize>,
}

fn build_tree(branching: &[usize]) -> Tree {
    let mut names = Vec::new();
    let mut parent = Vec::new();
    let mut level = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    for (l, &b) in branching.iter().enumerate() {
        let mut next = Vec::new();
        if l == 0 {
            for i in 0..b {
                names.push(format!("n{i}"));
                parent.push(None);
                level.push(0);
                next.push(names.len() - 1);
            }
        } else {
            for &p in &frontier {
                for j in 0..b {
                    names.push(format!("{}.{j}", names[p]));
                    parent.push(Some(p));
                    level.push(l);
                    next.push(names.len() - 1);
                }
            }
        }
        frontier = next;
    }
    Tree { names, parent, level, leaves: frontier }
}

/// Generate `n_examples` examples. Every example picks a uniform leaf; its
/// gold set is the leaf plus all ancestors, each non-leaf ancestor
/// independently dropped with probability `label_dropout`. Deterministic per
/// seed. Returns the dataset and a vocabulary carrying class labels and all
/// (parent, child) supertype pairs.
pub fn generate_synthetic(
    tax: &SynthTaxonomy,
    n_examples: usize,
    label_dropout: f64,
    seed: u64,
) -> Result<(Dataset, TypeVocabulary)> {
    if n_examples == 0 {
        return Err(Error::data("n_examples must be >= 1"));
    }
    if tax.branching.is_empty() || tax.branching.iter().any(|&b| b == 0) {
        return Err(Error::data("branching factors must be >= 1"));
    }
    let tree = build_tree(&tax.branching);
    let last_level = tax.branching.len() - 1;
    let classes: Vec<TypeClass> = tree
        .level
        .iter()
        .map(|&l| {
            if l == 0 {
                TypeClass::Coarse
            } else if l == last_level {
                TypeClass::UltraFine
            } else {
                TypeClass::Fine
            }
        })
        .collect();
    let mut vocab = TypeVocabulary::new(tree.names.clone())?.with_classes(classes)?;
    let pairs: Vec<(String, String)> = tree
        .parent
        .iter()
        .enumerate()
        .filter_map(|(child, p)| p.map(|p| (tree.names[p].clone(), tree.names[child].clone())))
        .collect();
    vocab.set_pairs_by_name(&pairs)?;

    let leaf_vocab: Vec<Vec<String>> = tree
        .leaves
        .iter()
        .map(|&leaf| (0..tax.tokens_per_leaf).map(|t| format!("w{leaf}_{t}")).collect())
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut dataset = Vec::with_capacity(n_examples);
    for _ in 0..n_examples {
        let li = rng.gen_range(0..tree.leaves.len());
        let leaf = tree.leaves[li];
        let mut gold = BTreeSet::new();
        gold.insert(leaf);
        let mut node = tree.parent[leaf];
        while let Some(p) = node {
            if !(label_dropout > 0.0 && rng.gen_bool(label_dropout)) {
                gold.insert(p);
            }
            node = tree.parent[p];
        }
        let lv = &leaf_vocab[li];
        let mention: Vec<String> =
            (0..2).map(|_| lv[rng.gen_range(0..lv.len())].clone()).collect();
        let mut context: Vec<String> =
            (0..3).map(|_| lv[rng.gen_range(0..lv.len())].clone()).collect();
        for _ in 0..4 {
            context.push(NOISE_TOKENS[rng.gen_range(0..NOISE_TOKENS.len())].to_string());
        }
        context.shuffle(&mut rng);
        dataset.push(Example { mention, context, gold });
    }
    Ok((dataset, vocab))
}

/// Deterministic shuffled split. Fractions must be positive and sum to 1.
pub fn split(dataset: &Dataset, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
    if fractions.is_empty() || fractions.iter().any(|&f| f <= 0.0) {
        return Err(Error::data("split fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::data(format!("split fractions must sum to 1, got {total}")));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n = dataset.len();
    let mut out = Vec::with_capacity(fractions.len());
    let mut cum = 0.0;
    let mut start = 0;
    for (i, f) in fractions.iter().enumerate() {
        cum += f;
        let end = if i + 1 == fractions.len() { n } else { (cum * n as f64).round() as usize };
        out.push(indices[start..end].iter().map(|&j| dataset[j].clone()).collect());
        start = end;
    }
    Ok(out)
}
