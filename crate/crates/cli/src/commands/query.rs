use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use dmmh_core::hamming::{knn, read_code_bank, PackedCode};

use crate::commands::emit;
use crate::CliError;

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Code bank to search.
    #[arg(long)]
    pub codes: PathBuf,

    /// Query by stored sample id.
    #[arg(long, conflicts_with = "code")]
    pub id: Option<u64>,

    /// Query by explicit bit string (`1` = +1, `0` = -1), length k.
    #[arg(long)]
    pub code: Option<String>,

    /// Number of neighbors to return.
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
}

pub fn run(args: QueryArgs) -> Result<(), CliError> {
    if args.topk == 0 {
        return Err(CliError::usage("--topk must be >= 1"));
    }
    let bank = read_code_bank(&args.codes)?;
    let query = match (&args.id, &args.code) {
        (Some(id), None) => {
            let row = bank.position_of_id(*id).ok_or_else(|| {
                CliError::usage(format!("id {id} not present in {}", args.codes.display()))
            })?;
            bank.packed(row)
        }
        (None, Some(bits)) => parse_bits(bits, bank.k())?,
        _ => return Err(CliError::usage("exactly one of --id or --code required")),
    };
    let ranked = knn(&query, &bank, args.topk)?;
    for item in &ranked {
        emit(json!({"id": item.id, "distance": item.distance}));
    }
    Ok(())
}

fn parse_bits(bits: &str, k: usize) -> Result<PackedCode, CliError> {
    if bits.len() != k {
        return Err(CliError::usage(format!(
            "--code has {} bits, bank holds {k}-bit codes",
            bits.len()
        )));
    }
    let code: Vec<f64> = bits
        .chars()
        .map(|c| match c {
            '1' => Ok(1.0),
            '0' => Ok(-1.0),
            other => Err(CliError::usage(format!(
                "--code may only contain 0 and 1, found `{other}`"
            ))),
        })
        .collect::<Result<_, _>>()?;
    Ok(PackedCode::pack(&code)?)
}
