//! Model checkpoint format (`DMMHCKPT`).
//!
//! Layout: magic `DMMHCKPT`, u32 version = 1, u32 config-JSON length, the
//! config JSON bytes, then every parameter tensor in declaration order,
//! each prefixed by u32 rank and u32 extents, data as little-endian f64.
//! Write then read is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::format::{check_magic, read_exact_or_truncated, read_u32};
use crate::error::{Error, Result};
use crate::model::{DmmhModel, ModelConfig};
use crate::nn::Parameterized;

const CKPT_MAGIC: &[u8; 8] = b"DMMHCKPT";
const CKPT_VERSION: u32 = 1;

pub fn write_checkpoint(path: &Path, model: &DmmhModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CKPT_MAGIC)?;
    w.write_all(&CKPT_VERSION.to_le_bytes())?;
    let config_json = serde_json::to_vec(model.config())?;
    w.write_all(&(config_json.len() as u32).to_le_bytes())?;
    w.write_all(&config_json)?;

    let mut io_err: Option<std::io::Error> = None;
    let mut clone = model.clone();
    clone.visit_params("", &mut |_, p| {
        if io_err.is_some() {
            return;
        }
        let shape = p.value.shape();
        let mut write_all = |bytes: &[u8]| {
            if io_err.is_none() {
                if let Err(e) = w.write_all(bytes) {
                    io_err = Some(e);
                }
            }
        };
        write_all(&(shape.len() as u32).to_le_bytes());
        for &extent in shape {
            write_all(&(extent as u32).to_le_bytes());
        }
        for v in p.value.data() {
            write_all(&v.to_le_bytes());
        }
    });
    if let Some(e) = io_err {
        return Err(Error::Io(e));
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<DmmhModel> {
    let context = format!("checkpoint {}", path.display());
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, CKPT_MAGIC, &context)?;
    let version = read_u32(&mut r, &context)?;
    if version != CKPT_VERSION {
        return Err(Error::UnsupportedVersion {
            context,
            found: version,
        });
    }
    let config_len = read_u32(&mut r, &context)? as usize;
    let mut config_bytes = vec![0u8; config_len];
    read_exact_or_truncated(&mut r, &mut config_bytes, &context)?;
    let config: ModelConfig = serde_json::from_slice(&config_bytes)?;

    let mut model = DmmhModel::new(config)?;
    let mut failure: Option<Error> = None;
    model.visit_params("", &mut |name, p| {
        if failure.is_some() {
            return;
        }
        let load = (|| -> Result<()> {
            let rank = read_u32(&mut r, &context)? as usize;
            if rank != p.value.rank() {
                return Err(Error::ShapeMismatch {
                    op: "read_checkpoint",
                    expected: p.value.shape().to_vec(),
                    actual: vec![rank],
                });
            }
            let mut extents = Vec::with_capacity(rank);
            for _ in 0..rank {
                extents.push(read_u32(&mut r, &context)? as usize);
            }
            if extents != p.value.shape() {
                return Err(Error::ShapeMismatch {
                    op: "read_checkpoint",
                    expected: p.value.shape().to_vec(),
                    actual: extents,
                });
            }
            let mut bytes = vec![0u8; p.value.len() * 8];
            read_exact_or_truncated(&mut r, &mut bytes, &context)?;
            for (dst, chunk) in p.value.data_mut().iter_mut().zip(bytes.chunks_exact(8)) {
                *dst = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
            }
            p.value.check_finite(&format!("{context} `{name}`"))?;
            Ok(())
        })();
        if let Err(e) = load {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing)? {
        0 => Ok(model),
        _ => Err(Error::invalid(
            "read_checkpoint",
            "trailing bytes after last parameter tensor",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_config;
    use crate::nn::collect_param_values;
    use crate::rng::RngState;
    use crate::tensor::Tensor;

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut config = tiny_config();
        config.loss.cls = 0.3;
        config.categories = Some(3);
        let model = DmmhModel::new(config).unwrap();
        write_checkpoint(&path, &model).unwrap();
        let bytes1 = std::fs::read(&path).unwrap();

        let mut loaded = read_checkpoint(&path).unwrap();
        assert_eq!(loaded.config(), model.config());
        let mut original = model.clone();
        assert_eq!(
            collect_param_values(&mut loaded),
            collect_param_values(&mut original)
        );

        write_checkpoint(&path, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes1);
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let config = tiny_config();
        let model = DmmhModel::new(config.clone()).unwrap();
        write_checkpoint(&path, &model).unwrap();
        let loaded = read_checkpoint(&path).unwrap();

        let mut rng = RngState::new(77);
        let feats: Vec<Tensor> = config
            .modalities
            .iter()
            .map(|m| Tensor::uniform(vec![3, m.dim], -1.0, 1.0, &mut rng))
            .collect();
        let refs: Vec<&Tensor> = feats.iter().collect();
        let (a, _, _) = model.forward(&refs).unwrap();
        let (b, _, _) = loaded.forward(&refs).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn bad_magic_and_truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = DmmhModel::new(tiny_config()).unwrap();
        write_checkpoint(&path, &model).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'Z';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::BadMagic { .. })));

        write_checkpoint(&path, &model).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = DmmhModel::new(tiny_config()).unwrap();
        write_checkpoint(&path, &model).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
