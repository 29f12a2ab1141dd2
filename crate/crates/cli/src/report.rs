//! CSV rows. Every row carries the seed, config hash and commit so any
//! number can be regenerated.

use std::io::Write;

use sigt_models::ModelConfig;
use sigt_train::Metrics;

use crate::error::Result;
use crate::experiment::{Experiment, Receiver, RunOutcome};

pub const EPOCH_HEADER: [&str; 9] = [
    "run_id",
    "epoch",
    "train_loss",
    "train_aacc",
    "test_aacc",
    "seconds",
    "seed",
    "config_hash",
    "commit",
];

pub const SUMMARY_HEADER: [&str; 18] = [
    "run_id",
    "model",
    "agg",
    "opt",
    "dropout",
    "snr_db",
    "n_train",
    "best_epoch",
    "train_loss",
    "train_aacc",
    "test_aacc",
    "final_test_aacc",
    "test_ber",
    "seconds",
    "seed",
    "config_hash",
    "commit",
    "status",
];

/// Commit identifier stamped on every row, taken from `SIGT_COMMIT`.
pub fn commit() -> String {
    std::env::var("SIGT_COMMIT").unwrap_or_else(|_| "unknown".into())
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn seconds(v: f64, timing: bool) -> String {
    if timing {
        format!("{v:.3}")
    } else {
        String::new()
    }
}

pub fn epoch_rows(run_id: &str, exp: &Experiment, rows: &[Metrics], timing: bool) -> Vec<Vec<String>> {
    let (seed, hash, commit) = (exp.seed.to_string(), exp.config_hash(), commit());
    rows.iter()
        .map(|m| {
            vec![
                run_id.to_string(),
                m.epoch.to_string(),
                num(m.train_loss),
                num(m.train_aacc),
                num(m.test_aacc),
                seconds(m.seconds, timing),
                seed.clone(),
                hash.clone(),
                commit.clone(),
            ]
        })
        .collect()
}

/// Columns describing the configuration: model, agg, opt, dropout, snr_db
/// and n_train.
fn describe(exp: &Experiment, snr_db: f64, n_train: usize) -> Vec<String> {
    let (agg, opt, dropout) = match &exp.receiver {
        Receiver::Classic { .. } => (String::new(), String::new(), String::new()),
        Receiver::Net { model, run } => {
            let (agg, p) = match model {
                ModelConfig::SigT(c) => (c.aggregation.name(), c.dropout_p),
                ModelConfig::Lstm(c) => (c.aggregation.name(), c.dropout_p),
                ModelConfig::FcDnn(c) => ("", c.dropout_p),
                ModelConfig::CsiNet(c) => ("", c.dropout_p),
            };
            (agg.to_string(), run.optim.kind.name().to_string(), p.to_string())
        }
    };
    vec![
        exp.receiver.kind().to_string(),
        agg,
        opt,
        dropout,
        snr_db.to_string(),
        n_train.to_string(),
    ]
}

pub fn summary_row(
    run_id: &str,
    exp: &Experiment,
    snr_db: f64,
    n_train: usize,
    out: &RunOutcome,
    timing: bool,
) -> Vec<String> {
    let mut row = vec![run_id.to_string()];
    row.extend(describe(exp, snr_db, n_train));
    row.extend([
        out.best_epoch.to_string(),
        num(out.best.train_loss),
        num(out.best.train_aacc),
        num(out.best.test_aacc),
        num(out.final_test_aacc),
        num(1.0 - out.best.test_aacc),
        seconds(out.seconds, timing),
        exp.seed.to_string(),
        exp.config_hash(),
        commit(),
        "ok".into(),
    ]);
    row
}

/// Row for a cell that could not be run.
pub fn failure_row(run_id: &str, model: &str, seed: u64, hash: &str, status: &str) -> Vec<String> {
    let mut row = vec![run_id.to_string(), model.to_string()];
    row.resize(SUMMARY_HEADER.len() - 4, String::new());
    row.extend([seed.to_string(), hash.to_string(), commit(), format!("error: {status}")]);
    row
}

pub fn write_csv<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(r)?;
    }
    out.flush()?;
    Ok(())
}
