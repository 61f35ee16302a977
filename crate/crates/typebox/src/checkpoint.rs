//! Binary model checkpoints: a JSON header (architecture, vocabulary,
//! training provenance) followed by the raw little-endian f64 parameter
//! buffer. Round-trips are bit-exact.

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::geometry::GumbelConfig;
use crate::gradients::LrGroup;
use crate::models::{Model, ModelKind, TypeClass, TypeVocabulary};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"TBCP";
const VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct ArrayMeta {
    name: String,
    shape: Vec<usize>,
    group: LrGroup,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Header {
    version: u32,
    kind: ModelKind,
    encoder: EncoderConfig,
    gumbel: GumbelConfig,
    dim: usize,
    type_names: Vec<String>,
    type_classes: Option<Vec<TypeClass>>,
    /// Supertype/subtype pairs by name.
    pairs: Vec<(String, String)>,
    seed: u64,
    step: u64,
    arrays: Vec<ArrayMeta>,
}

pub fn save(path: &Path, model: &Model, seed: u64, step: u64) -> Result<()> {
    let header = Header {
        version: VERSION,
        kind: model.kind,
        encoder: model.encoder_cfg,
        gumbel: model.gumbel,
        dim: model.dim,
        type_names: model.vocab.names().to_vec(),
        type_classes: model.vocab.class_of.clone(),
        pairs: model
            .vocab
            .supertype_pairs
            .iter()
            .map(|&(s, b)| (model.vocab.name(s).to_string(), model.vocab.name(b).to_string()))
            .collect(),
        seed,
        step,
        arrays: model
            .params
            .arrays()
            .iter()
            .map(|a| ArrayMeta { name: a.name.clone(), shape: a.shape.clone(), group: a.group })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    w.write_all(&(model.params.len() as u64).to_le_bytes())?;
    for &x in model.params.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Load a checkpoint: the reconstructed model plus the recorded training
/// seed and optimizer step count.
pub fn load(path: &Path) -> Result<(Model, u64, u64)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::data("not a checkpoint file (bad magic)"));
    }
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)?;
    let header_len = u64::from_le_bytes(len8) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.version != VERSION {
        return Err(Error::data(format!(
            "unsupported checkpoint version {} (expected {VERSION})",
            header.version
        )));
    }

    let mut vocab = TypeVocabulary::new(header.type_names)?;
    if let Some(classes) = header.type_classes {
        vocab = vocab.with_classes(classes)?;
    }
    vocab.set_pairs_by_name(&header.pairs)?;

    let model = match header.kind {
        ModelKind::Box => Model::new_box(header.encoder, header.gumbel, vocab, header.dim)?,
        ModelKind::Vector => Model::new_vector(header.encoder, vocab, header.dim)?,
    };
    // registration order is part of the format; verify before reading data
    if model.params.arrays().len() != header.arrays.len() {
        return Err(Error::data("checkpoint parameter layout does not match architecture"));
    }
    for (a, meta) in model.params.arrays().iter().zip(&header.arrays) {
        if a.name != meta.name || a.shape != meta.shape {
            return Err(Error::data(format!(
                "checkpoint array `{}` {:?} does not match expected `{}` {:?}",
                meta.name, meta.shape, a.name, a.shape
            )));
        }
    }

    r.read_exact(&mut len8)?;
    let n_params = u64::from_le_bytes(len8) as usize;
    let mut model = model;
    if n_params != model.params.len() {
        return Err(Error::data(format!(
            "checkpoint holds {n_params} parameters, architecture expects {}",
            model.params.len()
        )));
    }
    let mut buf = [0u8; 8];
    for i in 0..n_params {
        r.read_exact(&mut buf)?;
        model.params.data_mut()[i] = f64::from_le_bytes(buf);
    }
    Ok((model, header.seed, header.step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TypeClass;

    fn sample_box_model() -> Model {
        let names: Vec<String> = vec!["person".into(), "politician".into(), "city".into()];
        let mut vocab = TypeVocabulary::new(names)
            .unwrap()
            .with_classes(vec![TypeClass::Coarse, TypeClass::Fine, TypeClass::Fine])
            .unwrap();
        vocab.set_pairs_by_name(&[("person".into(), "politician".into())]).unwrap();
        let cfg = EncoderConfig { feature_dim: 128, hidden_dim: 8, box_dim: 4, hash_seed: 5 };
        let mut m =
            Model::new_box(cfg, GumbelConfig::new(0.01, 1.2471).unwrap(), vocab, 4).unwrap();
        m.init_random(99);
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample_box_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&path, &m, 99, 1234).unwrap();
        let (back, seed, step) = load(&path).unwrap();
        assert_eq!(seed, 99);
        assert_eq!(step, 1234);
        assert_eq!(back.kind, m.kind);
        assert_eq!(back.dim, m.dim);
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(back.params.data(), m.params.data());

        // saving the loaded model reproduces the file byte for byte
        let path2 = dir.path().join("model2.ckpt");
        save(&path2, &back, seed, step).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let m = sample_box_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&path, &m, 0, 0).unwrap();
        let (back, _, _) = load(&path).unwrap();
        let mention = vec!["obama".to_string()];
        let context = vec!["was".to_string(), "elected".to_string()];
        let a = m.predict_probs(&mention, &context).unwrap();
        let b = back.predict_probs(&mention, &context).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vector_model_round_trips() {
        let vocab = TypeVocabulary::new(vec!["a".into(), "b".into()]).unwrap();
        let cfg = EncoderConfig { feature_dim: 64, hidden_dim: 4, box_dim: 1, hash_seed: 0 };
        let mut m = Model::new_vector(cfg, vocab, 6).unwrap();
        m.init_random(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.ckpt");
        save(&path, &m, 3, 10).unwrap();
        let (back, _, _) = load(&path).unwrap();
        assert_eq!(back.kind, ModelKind::Vector);
        assert_eq!(back.params.data(), m.params.data());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(load(&path).is_err());
    }
}
