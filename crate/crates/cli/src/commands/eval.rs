use std::path::{Path, PathBuf};

use clap::Args;

use dmmh_core::hamming::{ranker_by_name, read_code_bank};
use dmmh_core::metrics::{mean_average_precision, paper_reference, reference_datasets, PaperReference};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Query code bank.
    #[arg(long = "query-codes")]
    pub query_codes: PathBuf,

    /// Retrieval code bank.
    #[arg(long = "retrieval-codes")]
    pub retrieval_codes: PathBuf,

    /// Ranking strategy (bucket | sort).
    #[arg(long)]
    pub ranker: Option<String>,

    /// Precision@K cutoffs, comma separated.
    #[arg(long = "precision-at", value_delimiter = ',')]
    pub precision_at: Option<Vec<usize>>,

    /// Attach the published mAP for this dataset at the bank's code length.
    #[arg(long = "paper-ref")]
    pub paper_ref: Option<String>,

    /// Also write the report JSON to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: EvalArgs, config: Option<&Path>) -> Result<(), CliError> {
    let config = config.map(RunConfig::read).transpose()?;
    let ranker_name = args
        .ranker
        .or_else(|| config.as_ref().map(|c| c.ranker.clone()))
        .unwrap_or_else(|| "bucket".to_string());
    let precision_at = args
        .precision_at
        .or_else(|| config.as_ref().map(|c| c.precision_at.clone()))
        .unwrap_or_else(|| vec![1, 5, 10]);
    let out = args.out.or_else(|| config.as_ref().and_then(|c| c.report.clone()));

    let ranker = ranker_by_name(&ranker_name)?;
    let queries = read_code_bank(&args.query_codes)?;
    let retrieval = read_code_bank(&args.retrieval_codes)?;

    let mut report = mean_average_precision(&queries, &retrieval, ranker, &precision_at)?;
    if let Some(dataset) = &args.paper_ref {
        let map = paper_reference(dataset, report.bits).ok_or_else(|| {
            CliError::usage(format!(
                "no published value for `{dataset}` at {} bits; datasets: {:?}",
                report.bits,
                reference_datasets()
            ))
        })?;
        report.paper_reference = Some(PaperReference {
            dataset: dataset.clone(),
            map,
        });
    }

    let line = report.to_json();
    println!("{line}");
    if let Some(path) = out {
        std::fs::write(&path, format!("{line}\n"))
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
