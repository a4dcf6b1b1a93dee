//! Binary on-disk formats.
//!
//! Feature bank (`DMFB`): magic `DMFB`, u32 version = 1, u64 n, u32 dim,
//! then `n * dim` little-endian f32 values.
//!
//! Label file (`DMLB`): magic `DMLB`, u64 n, u32 C, then `n * C` bytes,
//! each 0 or 1.
//!
//! All multi-byte integers are little-endian. Write then read is the
//! identity at byte level.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::{FeatureBank, LabelMatrix};
use crate::error::{Error, Result};

pub(crate) const FEATURE_MAGIC: &[u8; 4] = b"DMFB";
pub(crate) const LABEL_MAGIC: &[u8; 4] = b"DMLB";
pub(crate) const FEATURE_VERSION: u32 = 1;

pub(crate) fn read_exact_or_truncated(
    r: &mut impl Read,
    buf: &mut [u8],
    context: &str,
) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated {
                context: context.to_string(),
            }
        } else {
            Error::Io(e)
        }
    })
}

pub(crate) fn read_u32(r: &mut impl Read, context: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_truncated(r, &mut b, context)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read, context: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_truncated(r, &mut b, context)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn check_magic(r: &mut impl Read, expected: &[u8], context: &str) -> Result<()> {
    let mut found = vec![0u8; expected.len()];
    read_exact_or_truncated(r, &mut found, context)?;
    if found != expected {
        return Err(Error::BadMagic {
            context: context.to_string(),
            expected: String::from_utf8_lossy(expected).into_owned(),
            found: String::from_utf8_lossy(&found).into_owned(),
        });
    }
    Ok(())
}

pub fn write_feature_bank(path: &Path, bank: &FeatureBank) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes())?;
    w.write_all(&(bank.n() as u64).to_le_bytes())?;
    w.write_all(&(bank.dim() as u32).to_le_bytes())?;
    for v in bank.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_bank(path: &Path) -> Result<FeatureBank> {
    let context = format!("feature bank {}", path.display());
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, FEATURE_MAGIC, &context)?;
    let version = read_u32(&mut r, &context)?;
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion {
            context,
            found: version,
        });
    }
    let n = read_u64(&mut r, &context)? as usize;
    let dim = read_u32(&mut r, &context)? as usize;
    if dim == 0 {
        return Err(Error::ZeroDim { context });
    }
    let mut payload = vec![0u8; n * dim * 4];
    read_exact_or_truncated(&mut r, &mut payload, &context)?;
    let mut data = Vec::with_capacity(n * dim);
    for chunk in payload.chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().expect("chunk of 4")));
    }
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context, index });
    }
    FeatureBank::new(n, dim, data)
}

/// Header-only read: `(n, dim)` without loading the payload.
pub fn read_feature_header(path: &Path) -> Result<(u64, u32)> {
    let context = format!("feature bank {}", path.display());
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, FEATURE_MAGIC, &context)?;
    let version = read_u32(&mut r, &context)?;
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion {
            context,
            found: version,
        });
    }
    let n = read_u64(&mut r, &context)?;
    let dim = read_u32(&mut r, &context)?;
    if dim == 0 {
        return Err(Error::ZeroDim { context });
    }
    Ok((n, dim))
}

pub fn write_labels(path: &Path, labels: &LabelMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(LABEL_MAGIC)?;
    w.write_all(&(labels.n() as u64).to_le_bytes())?;
    w.write_all(&(labels.categories() as u32).to_le_bytes())?;
    w.write_all(labels.data())?;
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<LabelMatrix> {
    let context = format!("label file {}", path.display());
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, LABEL_MAGIC, &context)?;
    let n = read_u64(&mut r, &context)? as usize;
    let c = read_u32(&mut r, &context)? as usize;
    if c == 0 {
        return Err(Error::ZeroDim { context });
    }
    let mut data = vec![0u8; n * c];
    read_exact_or_truncated(&mut r, &mut data, &context)?;
    if let Some(index) = data.iter().position(|&b| b > 1) {
        return Err(Error::InvalidLabelByte {
            context,
            index,
            value: data[index],
        });
    }
    LabelMatrix::new(n, c, data)
}
