use std::process::ExitCode;

use mers_core::error::Result;
use mers_core::metrics::{compute_cl_metrics, AccuracyMatrix};

use crate::io::{to_json_bytes, write_atomic};
use crate::report::{MetricsReport, METRICS_SCHEMA};
use crate::MetricsArgs;

pub fn run(args: MetricsArgs) -> Result<ExitCode> {
    let matrix = AccuracyMatrix::from_csv(&args.input)?;
    let metrics = compute_cl_metrics(&matrix);
    let report = MetricsReport {
        schema: METRICS_SCHEMA,
        tasks: matrix.tasks(),
        faa: metrics.faa,
        aaa: metrics.aaa,
        forgetting: metrics.forgetting,
        stability: metrics.stability,
    };
    let bytes = to_json_bytes(&report)?;
    match &args.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(ExitCode::SUCCESS)
}
