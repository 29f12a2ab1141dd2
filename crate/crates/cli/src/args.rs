use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "sigt", version, about = "MIMO-OFDM signal detection experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a train/test dataset pair and write it to disk.
    Generate {
        #[command(flatten)]
        exp: ExpArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one receiver and report per-epoch metrics.
    Train {
        #[command(flatten)]
        exp: ExpArgs,
        #[command(flatten)]
        report: ReportArgs,
        /// Directory for metrics.csv, summary.csv and model.sgtc.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Evaluate a checkpoint or the classical receiver on one split.
    Eval {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// train or test
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Run a grid of experiments along one axis and report per-cell medians.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        #[command(flatten)]
        report: ReportArgs,
        /// snr, nb, model, aggregation, optimizer or dropout
        #[arg(long)]
        axis: String,
        /// Comma-separated values along the axis.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        /// Comma-separated model kinds crossed with the axis values.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Runs per cell, with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        /// Summary CSV path (also printed to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for the per-run epoch logs.
        #[arg(long)]
        runs_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Fill the `seconds` column with wall time. Off by default so reruns
    /// produce identical files.
    #[arg(long)]
    pub timing: bool,
    /// Suppress per-epoch progress on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

/// Experiment settings shared by every subcommand. Anything left unset
/// falls back to `--config`, then to the built-in default.
#[derive(Debug, Args)]
pub struct ExpArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Subcarriers.
    #[arg(long)]
    pub ns: Option<usize>,
    /// Transmit antennas.
    #[arg(long)]
    pub nt: Option<usize>,
    /// Receive antennas.
    #[arg(long)]
    pub nr: Option<usize>,
    /// OFDM symbols per frame.
    #[arg(long)]
    pub ni: Option<usize>,
    /// Cyclic prefix length.
    #[arg(long)]
    pub cp: Option<usize>,
    /// Channel taps.
    #[arg(long)]
    pub taps: Option<usize>,
    /// SNR per receive antenna in dB (`inf` for noiseless).
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    /// Training samples.
    #[arg(long)]
    pub train: Option<usize>,
    /// Test samples (default: a tenth of the training set).
    #[arg(long)]
    pub test: Option<usize>,
    /// Channel realizations in the pool.
    #[arg(long)]
    pub pool: Option<usize>,
    /// Training set size in minibatches; overrides --train.
    #[arg(long)]
    pub nb: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// sigt, fcdnn, csinet, lstm or classic
    #[arg(long)]
    pub model: Option<String>,
    /// conv, avg or max
    #[arg(long)]
    pub agg: Option<String>,
    /// adam or sgd
    #[arg(long)]
    pub opt: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Encoder layers.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
    #[arg(long)]
    pub mlp_hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// FC-DNN hidden widths, e.g. 1000,500,250
    #[arg(long)]
    pub fc_hidden: Option<String>,
    #[arg(long)]
    pub csi_blocks: Option<usize>,
    /// zf or mmse
    #[arg(long)]
    pub detector: Option<String>,
    /// Channel knowledge of the classical receiver: ls or perfect
    #[arg(long)]
    pub csi: Option<String>,
    /// Directory written by `generate`; replaces in-memory generation.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// binary or csv
    #[arg(long)]
    pub format: Option<String>,
}

impl ExpArgs {
    /// Resolves the config file and overlays the flags that were given.
    pub fn settings(&self) -> crate::error::Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        s.set_opt("ns", self.ns);
        s.set_opt("nt", self.nt);
        s.set_opt("nr", self.nr);
        s.set_opt("ni", self.ni);
        s.set_opt("cp", self.cp);
        s.set_opt("taps", self.taps);
        s.set_opt("snr", self.snr);
        s.set_opt("train", self.train);
        s.set_opt("test", self.test);
        s.set_opt("pool", self.pool);
        s.set_opt("nb", self.nb);
        s.set_opt("seed", self.seed);
        s.set_opt("model", self.model.as_ref());
        s.set_opt("agg", self.agg.as_ref());
        s.set_opt("opt", self.opt.as_ref());
        s.set_opt("lr", self.lr);
        s.set_opt("beta1", self.beta1);
        s.set_opt("beta2", self.beta2);
        s.set_opt("eps", self.eps);
        s.set_opt("batch", self.batch);
        s.set_opt("epochs", self.epochs);
        s.set_opt("depth", self.depth);
        s.set_opt("heads", self.heads);
        s.set_opt("d_model", self.d_model);
        s.set_opt("d_ff", self.d_ff);
        s.set_opt("mlp_hidden", self.mlp_hidden);
        s.set_opt("dropout", self.dropout);
        s.set_opt("fc_hidden", self.fc_hidden.as_ref());
        s.set_opt("csi_blocks", self.csi_blocks);
        s.set_opt("detector", self.detector.as_ref());
        s.set_opt("csi", self.csi.as_ref());
        s.set_opt("data", self.data.as_ref().map(|p| p.display()));
        s.set_opt("format", self.format.as_ref());
        Ok(s)
    }
}
