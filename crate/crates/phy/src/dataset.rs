//! Seeded dataset generation. Every sample owns its own ChaCha stream derived
//! from `(seed, split, index)`, so samples can be produced in any order or in
//! parallel and still be bit-identical.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{apply_channel, ChannelPool, ChannelRealization};
use crate::config::FrameConfig;
use crate::error::{PhyError, Result};
use crate::fft::Fft;
use crate::ofdm::{cp_remove_fft, ifft_cp_add, receive_frontend, transmit};
use crate::qam::qam_modulate;

/// One received frame and the bits that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `N_s x N_r x N_i x 2`, row-major.
    pub y: Vec<f64>,
    /// `N_s x N_t x 2`, entries in `{0, 1}`.
    pub x: Vec<u8>,
    pub snr_db: f64,
    /// Pool index of the channel; unknown for samples loaded from disk.
    pub channel_id: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Purpose {
    Data,
    Pilot,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_stream(split: Split, index: usize, purpose: Purpose) -> u64 {
    let s: u64 = match split {
        Split::Train => 1,
        Split::Test => 2,
    };
    (s << 56) | ((index as u64) << 1) | u64::from(purpose == Purpose::Pilot)
}

/// Transmit chain, channel, and receiver front end for a fixed frame layout.
#[derive(Clone, Debug)]
pub struct LinkSimulator {
    cfg: FrameConfig,
    fft: Fft,
}

impl LinkSimulator {
    pub fn new(cfg: FrameConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            fft: Fft::new(cfg.n_subcarriers)?,
            cfg,
        })
    }

    pub fn cfg(&self) -> &FrameConfig {
        &self.cfg
    }

    pub fn fft(&self) -> &Fft {
        &self.fft
    }

    /// Received grid `y` for the given bits sent through `chan`.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        bits: &[u8],
        chan: &ChannelRealization,
        snr_db: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if bits.len() != self.cfg.x_len() {
            return Err(PhyError::FrameLength {
                expected: self.cfg.x_len(),
                got: bits.len(),
            });
        }
        let tx = transmit(&self.cfg, &self.fft, &qam_modulate(bits)?)?;
        let rx = apply_channel(&tx, chan, snr_db, rng);
        receive_frontend(&self.cfg, &self.fft, &rx)
    }

    /// Uniform bits through a uniformly chosen pool member.
    pub fn random_sample<R: Rng + ?Sized>(&self, pool: &ChannelPool, snr_db: f64, rng: &mut R) -> Result<Sample> {
        let id = rng.random_range(0..pool.len());
        let x: Vec<u8> = (0..self.cfg.x_len()).map(|_| rng.random_range(0..=1u8)).collect();
        let y = self.simulate(&x, pool.get(id), snr_db, rng)?;
        Ok(Sample {
            y,
            x,
            snr_db,
            channel_id: Some(id),
        })
    }

    /// Time-orthogonal pilot block: in pilot symbol `t` only antenna `t`
    /// transmits, with `pilot` on every subcarrier. Returns the received
    /// frequency grids `[t][k][r]`.
    pub fn pilot_grids<R: Rng + ?Sized>(
        &self,
        chan: &ChannelRealization,
        pilot: Complex64,
        snr_db: f64,
        rng: &mut R,
    ) -> Result<Vec<Vec<Complex64>>> {
        let (n_s, n_t, n_r) = (self.cfg.n_subcarriers, self.cfg.n_tx, self.cfg.n_rx);
        let sym_len = self.cfg.symbol_len();
        let active = ifft_cp_add(&self.fft, &vec![pilot; n_s], self.cfg.cp_len)?;
        let mut tx = vec![vec![Complex64::new(0.0, 0.0); n_t * sym_len]; n_t];
        for (t, signal) in tx.iter_mut().enumerate() {
            signal[t * sym_len..(t + 1) * sym_len].copy_from_slice(&active);
        }
        let rx = apply_channel(&tx, chan, snr_db, rng);
        let mut grids = vec![vec![Complex64::new(0.0, 0.0); n_s * n_r]; n_t];
        for (r, signal) in rx.iter().enumerate() {
            for (t, grid) in grids.iter_mut().enumerate() {
                let freq = cp_remove_fft(&self.fft, &signal[t * sym_len..(t + 1) * sym_len], self.cfg.cp_len)?;
                for (k, v) in freq.into_iter().enumerate() {
                    grid[k * n_r + r] = v;
                }
            }
        }
        Ok(grids)
    }
}

/// Parameters of a generated train/test pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetSpec {
    pub cfg: FrameConfig,
    pub pool_size: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub snr_db: f64,
    pub seed: u64,
}

impl DatasetSpec {
    /// Train split of `n_train` samples with a test split one tenth its size.
    pub fn with_ratio(cfg: FrameConfig, pool_size: usize, n_train: usize, snr_db: f64, seed: u64) -> Self {
        Self {
            cfg,
            pool_size,
            n_train,
            n_test: (n_train / 10).max(1),
            snr_db,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        for (field, v) in [("pool_size", self.pool_size), ("n_train", self.n_train), ("n_test", self.n_test)] {
            if v == 0 {
                return Err(PhyError::Config {
                    field,
                    msg: "must be at least 1".into(),
                });
            }
        }
        if self.snr_db.is_nan() {
            return Err(PhyError::Config {
                field: "snr_db",
                msg: "is NaN".into(),
            });
        }
        Ok(())
    }

    pub fn pool(&self) -> ChannelPool {
        ChannelPool::generate(&self.cfg, self.pool_size, &mut stream_rng(self.seed, 0))
    }

    pub fn len(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Test => self.n_test,
        }
    }

    /// Sample `index` of `split`; identical no matter which other samples
    /// have been generated.
    pub fn sample(&self, sim: &LinkSimulator, pool: &ChannelPool, split: Split, index: usize) -> Result<Sample> {
        let mut rng = stream_rng(self.seed, sample_stream(split, index, Purpose::Data));
        sim.random_sample(pool, self.snr_db, &mut rng)
    }

    /// Pilot observation matching sample `index` of `split`, drawn from a
    /// stream disjoint from the data so the samples do not depend on whether
    /// pilots were simulated.
    pub fn pilots(
        &self,
        sim: &LinkSimulator,
        chan: &ChannelRealization,
        split: Split,
        index: usize,
    ) -> Result<Vec<Vec<Complex64>>> {
        let mut rng = stream_rng(self.seed, sample_stream(split, index, Purpose::Pilot));
        sim.pilot_grids(chan, Complex64::new(1.0, 0.0), self.snr_db, &mut rng)
    }

    pub fn generate_split(&self, sim: &LinkSimulator, pool: &ChannelPool, split: Split) -> Result<Dataset> {
        let samples = (0..self.len(split))
            .map(|i| self.sample(sim, pool, split, i))
            .collect::<Result<_>>()?;
        Ok(Dataset {
            cfg: self.cfg,
            snr_db: self.snr_db,
            seed: self.seed,
            samples,
        })
    }
}

/// A split of samples sharing one frame layout and SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub cfg: FrameConfig,
    pub snr_db: f64,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First `n` samples (all of them if fewer).
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            samples: self.samples[..n.min(self.len())].to_vec(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedData {
    pub pool: ChannelPool,
    pub train: Dataset,
    pub test: Dataset,
}

/// Draws the channel pool once, then the train and test splits.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<GeneratedData> {
    spec.validate()?;
    let sim = LinkSimulator::new(spec.cfg)?;
    let pool = spec.pool();
    Ok(GeneratedData {
        train: spec.generate_split(&sim, &pool, Split::Train)?,
        test: spec.generate_split(&sim, &pool, Split::Test)?,
        pool,
    })
}
