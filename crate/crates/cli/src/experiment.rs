//! Resolved experiment descriptions, their data, and a single run.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::Instant;

use num_complex::Complex64;
use sha2::{Digest, Sha256};
use sigt_models::{Aggregation, CsiNetConfig, FcDnnConfig, LstmConfig, Model, ModelConfig, SigTConfig};
use sigt_phy::{
    bit_errors, ls_estimate, read_binary, ChannelEstimate, ChannelPool, ClassicReceiver, Dataset, DatasetSpec, Detector,
    FrameConfig, LinkSimulator, Split,
};
use sigt_train::{train, Batches, Metrics, OptimConfig, OptimizerKind, RunConfig, TrainReport};

use crate::error::{usage, CliError, Result};
use crate::settings::{parse_config, Settings};

pub const MANIFEST: &str = "manifest.txt";
pub const DEFAULT_EPOCHS: usize = 200;
pub const DEFAULT_POOL: usize = 500;
pub const DEFAULT_TRAIN: usize = 25_600;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Csi {
    Ls,
    Perfect,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Receiver {
    Net { model: ModelConfig, run: RunConfig },
    Classic { detector: Detector, csi: Csi },
}

impl Receiver {
    pub fn kind(&self) -> &'static str {
        match self {
            Receiver::Net { model, .. } => model.kind(),
            Receiver::Classic { .. } => "classic",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Generate(DatasetSpec),
    Files(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub frame: FrameConfig,
    pub source: Source,
    pub seed: u64,
    pub receiver: Receiver,
    /// `key=value` lines identifying everything but the seed.
    pub canonical: String,
}

/// Seeds for model initialization and minibatch order, kept apart from the
/// data seed so the three streams are unrelated.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    let mut z = seed ^ purpose.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|s| s.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid list `{v}` for `{key}`")))
}

pub fn frame_from(s: &Settings) -> Result<FrameConfig> {
    let d = FrameConfig::default();
    Ok(FrameConfig {
        n_subcarriers: s.get("ns", d.n_subcarriers)?,
        n_tx: s.get("nt", d.n_tx)?,
        n_rx: s.get("nr", d.n_rx)?,
        n_info: s.get("ni", d.n_info)?,
        cp_len: s.get("cp", d.cp_len)?,
        n_taps: s.get("taps", d.n_taps)?,
        qam_bits: d.qam_bits,
    })
}

/// Training-set size, honouring `nb` (minibatches of `batch`) over `train`.
fn n_train_from(s: &Settings) -> Result<usize> {
    match s.get_opt::<usize>("nb")? {
        Some(nb) => Ok(nb * s.get("batch", RunConfig::default().batch_size)?),
        None => s.get("train", DEFAULT_TRAIN),
    }
}

pub fn dataset_spec_from(s: &Settings) -> Result<DatasetSpec> {
    let n_train = n_train_from(s)?;
    let spec = DatasetSpec {
        cfg: frame_from(s)?,
        pool_size: s.get("pool", DEFAULT_POOL)?,
        n_train,
        n_test: s.get("test", (n_train / 10).max(1))?,
        snr_db: s.get("snr", 10.0)?,
        seed: s.get("seed", 0)?,
    };
    spec.validate()?;
    Ok(spec)
}

fn aggregation(s: &Settings) -> Result<Aggregation> {
    let v = s.raw("agg").unwrap_or("conv");
    Aggregation::parse(v).ok_or_else(|| CliError::Usage(format!("unknown aggregation `{v}`")))
}

fn receiver_from(s: &Settings) -> Result<Receiver> {
    let kind = s.raw("model").unwrap_or("sigt");
    let dropout = s.get("dropout", 0.0)?;
    let sd = SigTConfig::default();
    let model = match kind {
        "sigt" => ModelConfig::SigT(SigTConfig {
            depth: s.get("depth", sd.depth)?,
            heads: s.get("heads", sd.heads)?,
            d_model: s.get("d_model", sd.d_model)?,
            d_ff: s.get("d_ff", sd.d_ff)?,
            aggregation: aggregation(s)?,
            dropout_p: dropout,
            mlp_hidden: s.get("mlp_hidden", sd.mlp_hidden)?,
        }),
        "lstm" => ModelConfig::Lstm(LstmConfig {
            d_model: s.get("d_model", sd.d_model)?,
            aggregation: aggregation(s)?,
            dropout_p: dropout,
            mlp_hidden: s.get("mlp_hidden", sd.mlp_hidden)?,
        }),
        "fcdnn" => {
            let hidden = match s.raw("fc_hidden") {
                Some(v) => parse_list("fc_hidden", v)?
                    .try_into()
                    .map_err(|_| CliError::Usage("fc_hidden takes three widths".into()))?,
                None => FcDnnConfig::default().hidden,
            };
            ModelConfig::FcDnn(FcDnnConfig {
                hidden,
                dropout_p: dropout,
            })
        }
        "csinet" => ModelConfig::CsiNet(CsiNetConfig {
            blocks: s.get("csi_blocks", CsiNetConfig::default().blocks)?,
            dropout_p: dropout,
            ..CsiNetConfig::default()
        }),
        "classic" => {
            let detector = match s.raw("detector").unwrap_or("mmse") {
                "zf" => Detector::ZeroForcing,
                "mmse" => Detector::Mmse,
                v => return usage(format!("unknown detector `{v}`")),
            };
            let csi = match s.raw("csi").unwrap_or("ls") {
                "ls" => Csi::Ls,
                "perfect" => Csi::Perfect,
                v => return usage(format!("unknown csi mode `{v}`")),
            };
            return Ok(Receiver::Classic { detector, csi });
        }
        v => return usage(format!("unknown model `{v}`")),
    };
    let d = OptimConfig::default();
    let opt = s.raw("opt").unwrap_or("adam");
    let run = RunConfig {
        optim: OptimConfig {
            kind: OptimizerKind::parse(opt).ok_or_else(|| CliError::Usage(format!("unknown optimizer `{opt}`")))?,
            lr: s.get("lr", d.lr)?,
            beta1: s.get("beta1", d.beta1)?,
            beta2: s.get("beta2", d.beta2)?,
            eps: s.get("eps", d.eps)?,
        },
        batch_size: s.get("batch", RunConfig::default().batch_size)?,
        epochs: s.get("epochs", DEFAULT_EPOCHS)?,
        ..RunConfig::default()
    };
    if run.batch_size == 0 {
        return usage("batch must be at least 1");
    }
    Ok(Receiver::Net { model, run })
}

fn canonical(frame: &FrameConfig, data: &[(&str, String)], receiver: &Receiver) -> String {
    let mut kv: Vec<(&str, String)> = vec![
        ("ns", frame.n_subcarriers.to_string()),
        ("nt", frame.n_tx.to_string()),
        ("nr", frame.n_rx.to_string()),
        ("ni", frame.n_info.to_string()),
        ("cp", frame.cp_len.to_string()),
        ("taps", frame.n_taps.to_string()),
    ];
    kv.extend(data.iter().cloned());
    kv.push(("model", receiver.kind().to_string()));
    match receiver {
        Receiver::Classic { detector, csi } => {
            kv.push(("detector", format!("{detector:?}")));
            kv.push(("csi", format!("{csi:?}")));
        }
        Receiver::Net { model, run } => {
            match model {
                ModelConfig::SigT(c) => {
                    kv.push(("depth", c.depth.to_string()));
                    kv.push(("heads", c.heads.to_string()));
                    kv.push(("d_model", c.d_model.to_string()));
                    kv.push(("d_ff", c.d_ff.to_string()));
                    kv.push(("agg", c.aggregation.name().to_string()));
                    kv.push(("dropout", c.dropout_p.to_string()));
                    kv.push(("mlp_hidden", c.mlp_hidden.to_string()));
                }
                ModelConfig::Lstm(c) => {
                    kv.push(("d_model", c.d_model.to_string()));
                    kv.push(("agg", c.aggregation.name().to_string()));
                    kv.push(("dropout", c.dropout_p.to_string()));
                    kv.push(("mlp_hidden", c.mlp_hidden.to_string()));
                }
                ModelConfig::FcDnn(c) => {
                    kv.push(("fc_hidden", format!("{},{},{}", c.hidden[0], c.hidden[1], c.hidden[2])));
                    kv.push(("dropout", c.dropout_p.to_string()));
                }
                ModelConfig::CsiNet(c) => {
                    kv.push(("csi_blocks", c.blocks.to_string()));
                    kv.push(("dropout", c.dropout_p.to_string()));
                }
            }
            kv.push(("opt", run.optim.kind.name().to_string()));
            kv.push(("lr", run.optim.lr.to_string()));
            kv.push(("beta1", run.optim.beta1.to_string()));
            kv.push(("beta2", run.optim.beta2.to_string()));
            kv.push(("eps", run.optim.eps.to_string()));
            kv.push(("batch", run.batch_size.to_string()));
            kv.push(("epochs", run.epochs.to_string()));
        }
    }
    kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

impl Experiment {
    /// Resolves settings into an experiment, loading (or recalling) its
    /// data so the description covers what is actually trained on.
    pub fn resolve(s: &Settings, cache: &mut DataCache) -> Result<(Self, Rc<Data>)> {
        let receiver = receiver_from(s)?;
        let seed = s.get("seed", 0u64)?;
        let (source, data) = load_data(s, cache)?;
        let frame = data.frame;
        if let Receiver::Net { model, .. } = &receiver {
            model.validate(&frame)?;
        }
        let mut described = vec![
            ("snr", data.snr_db.to_string()),
            ("train", data.train.len.to_string()),
            ("test", data.test.len.to_string()),
        ];
        match &source {
            Source::Generate(spec) => described.push(("pool", spec.pool_size.to_string())),
            Source::Files(_) => described.push(("data_seed", data.seed.to_string())),
        }
        let canonical = canonical(&frame, &described, &receiver);
        Ok((
            Self {
                frame,
                source,
                seed,
                receiver,
                canonical,
            },
            data,
        ))
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_id(&self) -> String {
        format!("{}-{}", self.receiver.kind(), self.config_hash())
    }

    /// Model seed used for the weights; the data seed is `self.seed` itself.
    pub fn model_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }

    pub fn shuffle_seed(&self) -> u64 {
        derive_seed(self.seed, 2)
    }
}

/// The data an experiment trains and evaluates on: files named by `data`,
/// or generated from the frame and dataset keys.
pub fn load_data(s: &Settings, cache: &mut DataCache) -> Result<(Source, Rc<Data>)> {
    match s.raw("data") {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            let data = cache.files(&dir)?;
            check_drift(s, &data)?;
            Ok((Source::Files(dir), data))
        }
        None => {
            let spec = dataset_spec_from(s)?;
            let data = cache.generated(&spec)?;
            Ok((Source::Generate(spec), data))
        }
    }
}

fn check_drift(s: &Settings, data: &Data) -> Result<()> {
    let f = frame_from(s)?;
    let d = &data.frame;
    let pairs = [
        ("ns", f.n_subcarriers, d.n_subcarriers),
        ("nt", f.n_tx, d.n_tx),
        ("nr", f.n_rx, d.n_rx),
        ("ni", f.n_info, d.n_info),
        ("cp", f.cp_len, d.cp_len),
        ("taps", f.n_taps, d.n_taps),
    ];
    for (key, want, got) in pairs {
        if s.is_set(key) && want != got {
            return Err(CliError::Data(format!(
                "incompatible dataset: `{key}` is {want} but the data was generated with {got}"
            )));
        }
    }
    if let Some(snr) = s.get_opt::<f64>("snr")? {
        if snr != data.snr_db {
            return Err(CliError::Data(format!(
                "incompatible dataset: `snr` is {snr} but the data was generated at {}",
                data.snr_db
            )));
        }
    }
    Ok(())
}

/// Train and test splits in training layout, plus what the classical
/// receiver needs to reconstruct pilots.
#[derive(Debug)]
pub struct Data {
    pub frame: FrameConfig,
    pub snr_db: f64,
    pub seed: u64,
    pub train: Batches,
    pub test: Batches,
    pub train_channels: Vec<Option<usize>>,
    pub test_channels: Vec<Option<usize>>,
    /// Known when the data was generated here or a manifest is present.
    pub spec: Option<DatasetSpec>,
}

impl Data {
    fn new(train: &Dataset, test: &Dataset, spec: Option<DatasetSpec>) -> Result<Self> {
        if train.cfg != test.cfg || train.is_empty() || test.is_empty() {
            return Err(CliError::Data("train and test splits must be non-empty and share a frame".into()));
        }
        let ids = |d: &Dataset| d.samples.iter().map(|s| s.channel_id).collect();
        Ok(Self {
            frame: train.cfg,
            snr_db: train.snr_db,
            seed: train.seed,
            train: Batches::from_dataset(train),
            test: Batches::from_dataset(test),
            train_channels: ids(train),
            test_channels: ids(test),
            spec,
        })
    }

    pub fn split(&self, split: Split) -> (&Batches, &[Option<usize>]) {
        match split {
            Split::Train => (&self.train, &self.train_channels),
            Split::Test => (&self.test, &self.test_channels),
        }
    }
}

/// Datasets already built during this process, so sweep cells sharing a
/// dataset do not regenerate it.
#[derive(Debug, Default)]
pub struct DataCache {
    generated: Vec<(DatasetSpec, Rc<Data>)>,
    files: Vec<(PathBuf, Rc<Data>)>,
}

impl DataCache {
    pub fn generated(&mut self, spec: &DatasetSpec) -> Result<Rc<Data>> {
        if let Some((_, d)) = self.generated.iter().find(|(s, _)| s == spec) {
            return Ok(d.clone());
        }
        let sim = LinkSimulator::new(spec.cfg)?;
        let pool = spec.pool();
        let train = spec.generate_split(&sim, &pool, Split::Train)?;
        let test = spec.generate_split(&sim, &pool, Split::Test)?;
        let data = Rc::new(Data::new(&train, &test, Some(*spec))?);
        self.generated.push((*spec, data.clone()));
        Ok(data)
    }

    pub fn files(&mut self, dir: &Path) -> Result<Rc<Data>> {
        if let Some((_, d)) = self.files.iter().find(|(p, _)| p == dir) {
            return Ok(d.clone());
        }
        let read = |name: &str| -> Result<Dataset> {
            let path = dir.join(name);
            let f = File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            read_binary(BufReader::new(f)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        };
        let train = read("train.sigt")?;
        let test = read("test.sigt")?;
        let spec = read_manifest_spec(dir, &train, &test)?;
        let data = Rc::new(Data::new(&train, &test, spec)?);
        self.files.push((dir.to_path_buf(), data.clone()));
        Ok(data)
    }
}

/// Rebuilds the generation parameters from a data directory's manifest,
/// cross-checked against the file headers.
fn read_manifest_spec(dir: &Path, train: &Dataset, test: &Dataset) -> Result<Option<DatasetSpec>> {
    let path = dir.join(MANIFEST);
    let Ok(text) = std::fs::read_to_string(&path) else {
        return Ok(None);
    };
    let map = parse_config(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut s = Settings::default();
    for (k, v) in &map {
        s.set(k, v);
    }
    let spec = dataset_spec_from(&s).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if spec.cfg != train.cfg
        || spec.seed != train.seed
        || spec.snr_db.to_bits() != train.snr_db.to_bits()
        || spec.n_train != train.len()
        || spec.n_test != test.len()
    {
        return Err(CliError::Data(format!("{} does not match the dataset files", path.display())));
    }
    Ok(Some(spec))
}

/// Outcome of one experiment at one seed.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Epoch 0 (before training) followed by one row per epoch.
    pub epochs: Vec<Metrics>,
    pub best_epoch: usize,
    pub best: Metrics,
    pub final_test_aacc: f64,
    pub seconds: f64,
    /// Model holding the best-epoch parameters.
    pub model: Option<Model>,
}

pub fn run(exp: &Experiment, data: &Data, mut progress: impl FnMut(&Metrics)) -> Result<RunOutcome> {
    let start = Instant::now();
    match &exp.receiver {
        Receiver::Classic { detector, csi } => {
            let train_aacc = classic_aacc(exp, data, Split::Train, *detector, *csi)?;
            let test_aacc = classic_aacc(exp, data, Split::Test, *detector, *csi)?;
            let row = Metrics {
                epoch: 0,
                train_loss: f64::NAN,
                train_aacc,
                test_aacc,
                seconds: start.elapsed().as_secs_f64(),
            };
            progress(&row);
            Ok(RunOutcome {
                epochs: vec![row.clone()],
                best_epoch: 0,
                final_test_aacc: test_aacc,
                seconds: row.seconds,
                best: row,
                model: None,
            })
        }
        Receiver::Net { model, run } => {
            let mut net = Model::new(*model, exp.frame, exp.model_seed())?;
            let cfg = RunConfig {
                seed: exp.shuffle_seed(),
                ..*run
            };
            let report: TrainReport = train(&mut net, &data.train, &data.test, &cfg, &mut progress)?;
            let mut epochs = vec![report.initial.clone()];
            epochs.extend(report.metrics.iter().cloned());
            let best = epochs[report.best_epoch].clone();
            let final_test_aacc = epochs.last().map_or(best.test_aacc, |m| m.test_aacc);
            let best_model = net.with_params(report.best_params)?;
            Ok(RunOutcome {
                epochs,
                best_epoch: report.best_epoch,
                best,
                final_test_aacc,
                seconds: start.elapsed().as_secs_f64(),
                model: Some(best_model),
            })
        }
    }
}

/// `1 - BER` of the pilot-based receiver over one split.
pub fn classic_aacc(exp: &Experiment, data: &Data, split: Split, detector: Detector, csi: Csi) -> Result<f64> {
    let spec = data.spec.as_ref().ok_or_else(|| {
        CliError::Data("the classic receiver needs the channel pool: generate in memory or keep the manifest".into())
    })?;
    let frame = &exp.frame;
    let sim = LinkSimulator::new(*frame)?;
    let pool: ChannelPool = spec.pool();
    let rx = ClassicReceiver::new(detector);
    let (batches, channels) = data.split(split);
    let pilot_tx = vec![vec![Complex64::new(1.0, 0.0); frame.n_subcarriers]; frame.n_tx];
    let (yl, xl) = (frame.y_len(), frame.x_len());
    let mut errors = 0usize;
    for (i, id) in channels.iter().enumerate() {
        // Files do not store the channel index; sample generation is
        // deterministic per index, so redraw it from the spec.
        let id = match id {
            Some(id) => *id,
            None => spec
                .sample(&sim, &pool, split, i)?
                .channel_id
                .ok_or_else(|| CliError::Data(format!("sample {i} has no channel id")))?,
        };
        let chan = pool.get(id);
        let est = match csi {
            Csi::Perfect => ChannelEstimate::perfect(chan, frame.n_subcarriers),
            Csi::Ls => ls_estimate(&spec.pilots(&sim, chan, split, i)?, &pilot_tx, frame.n_rx)?,
        };
        let noise_var = if data.snr_db.is_finite() {
            (0..frame.n_rx).map(|r| chan.noise_variance(r, data.snr_db)).sum::<f64>() / frame.n_rx as f64
        } else {
            0.0
        };
        let bits = rx.decode(frame, &batches.y[i * yl..(i + 1) * yl], &est, noise_var)?;
        let truth: Vec<u8> = batches.x[i * xl..(i + 1) * xl].iter().map(|&b| b as u8).collect();
        errors += bit_errors(&bits, &truth);
    }
    Ok(1.0 - errors as f64 / (channels.len() * xl) as f64)
}
