//! Code bank file format (`DMHCODES`).
//!
//! Layout: magic `DMHCODES`, u32 version = 1, u32 k, u64 n, u32 C, then
//! `n * ceil(k/64)` u64 code words, then `n * C` label bytes, then `n` u64
//! ids. Little-endian throughout; write then read is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::format::{check_magic, read_exact_or_truncated, read_u32, read_u64};
use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::hamming::{words_per_code, CodeBank};

const CODES_MAGIC: &[u8; 8] = b"DMHCODES";
const CODES_VERSION: u32 = 1;

pub fn write_code_bank(path: &Path, bank: &CodeBank) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CODES_MAGIC)?;
    w.write_all(&CODES_VERSION.to_le_bytes())?;
    w.write_all(&(bank.k() as u32).to_le_bytes())?;
    w.write_all(&(bank.n() as u64).to_le_bytes())?;
    w.write_all(&(bank.labels().categories() as u32).to_le_bytes())?;
    for i in 0..bank.n() {
        for word in bank.code(i) {
            w.write_all(&word.to_le_bytes())?;
        }
    }
    w.write_all(bank.labels().data())?;
    for id in bank.ids() {
        w.write_all(&id.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_code_bank(path: &Path) -> Result<CodeBank> {
    let context = format!("code bank {}", path.display());
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, CODES_MAGIC, &context)?;
    let version = read_u32(&mut r, &context)?;
    if version != CODES_VERSION {
        return Err(Error::UnsupportedVersion {
            context,
            found: version,
        });
    }
    let k = read_u32(&mut r, &context)? as usize;
    if k == 0 {
        return Err(Error::ZeroDim { context });
    }
    let n = read_u64(&mut r, &context)? as usize;
    let categories = read_u32(&mut r, &context)? as usize;
    if categories == 0 {
        return Err(Error::ZeroDim { context });
    }
    let wpc = words_per_code(k);

    let mut word_bytes = vec![0u8; n * wpc * 8];
    read_exact_or_truncated(&mut r, &mut word_bytes, &context)?;
    let rows: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            word_bytes[i * wpc * 8..(i + 1) * wpc * 8]
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        })
        .collect();

    let mut label_bytes = vec![0u8; n * categories];
    read_exact_or_truncated(&mut r, &mut label_bytes, &context)?;
    if let Some(index) = label_bytes.iter().position(|&b| b > 1) {
        return Err(Error::InvalidLabelByte {
            context,
            index,
            value: label_bytes[index],
        });
    }
    let labels = LabelMatrix::new(n, categories, label_bytes)?;

    let mut id_bytes = vec![0u8; n * 8];
    read_exact_or_truncated(&mut r, &mut id_bytes, &context)?;
    let ids: Vec<u64> = id_bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    CodeBank::new(k, rows, labels, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamming::PackedCode;
    use crate::rng::RngState;

    fn random_bank(n: usize, k: usize, categories: usize, seed: u64) -> CodeBank {
        let mut rng = RngState::new(seed);
        let rows: Vec<Vec<u64>> = (0..n)
            .map(|_| {
                let code: Vec<f64> = (0..k)
                    .map(|_| if rng.next_u64() & 1 == 1 { 1.0 } else { -1.0 })
                    .collect();
                PackedCode::pack(&code).unwrap().words
            })
            .collect();
        let label_bytes: Vec<u8> = (0..n * categories)
            .map(|_| (rng.next_u64() & 1) as u8)
            .collect();
        let labels = LabelMatrix::new(n, categories, label_bytes).unwrap();
        let ids: Vec<u64> = (0..n as u64).map(|i| i * 3 + 1).collect();
        CodeBank::new(k, rows, labels, ids).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        for k in [16, 64, 128] {
            let path = dir.path().join(format!("bank{k}.dmhc"));
            let bank = random_bank(23, k, 5, k as u64);
            write_code_bank(&path, &bank).unwrap();
            let bytes1 = std::fs::read(&path).unwrap();
            let loaded = read_code_bank(&path).unwrap();
            assert_eq!(loaded, bank);
            write_code_bank(&path, &loaded).unwrap();
            assert_eq!(std::fs::read(&path).unwrap(), bytes1);
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.dmhc");
        write_code_bank(&path, &random_bank(3, 16, 2, 1)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[3] = b'!';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_code_bank(&path),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn nonzero_padding_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.dmhc");
        let bank = random_bank(2, 16, 2, 2);
        write_code_bank(&path, &bank).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // first code word starts after magic(8) + version(4) + k(4) + n(8) + C(4)
        let word_off = 28;
        bytes[word_off + 3] |= 0x80; // set bit 31, outside k=16
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_code_bank(&path),
            Err(Error::PaddingBitsSet { .. })
        ));
    }

    #[test]
    fn truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.dmhc");
        write_code_bank(&path, &random_bank(5, 32, 2, 3)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            read_code_bank(&path),
            Err(Error::Truncated { .. })
        ));
    }
}
