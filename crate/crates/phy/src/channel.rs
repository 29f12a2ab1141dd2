use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::FrameConfig;

/// Exponential power-delay profile, tap `l` with power proportional to
/// `exp(-l/4)`, normalized to unit total power.
pub fn power_delay_profile(n_taps: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_taps).map(|l| (-(l as f64) / 4.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Draw from `CN(0, var)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Multipath MIMO impulse response, taps stored `[r][t][l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub n_rx: usize,
    pub n_tx: usize,
    pub n_taps: usize,
    pub taps: Vec<Complex64>,
    pub pool_id: usize,
}

impl ChannelRealization {
    /// Independent Rayleigh taps following [`power_delay_profile`].
    pub fn rayleigh<R: Rng + ?Sized>(cfg: &FrameConfig, pool_id: usize, rng: &mut R) -> Self {
        let pdp = power_delay_profile(cfg.n_taps);
        let mut taps = Vec::with_capacity(cfg.n_rx * cfg.n_tx * cfg.n_taps);
        for _ in 0..cfg.n_rx * cfg.n_tx {
            taps.extend(pdp.iter().map(|&p| complex_gaussian(rng, p)));
        }
        Self {
            n_rx: cfg.n_rx,
            n_tx: cfg.n_tx,
            n_taps: cfg.n_taps,
            taps,
            pool_id,
        }
    }

    /// Single-tap channel whose `N_r x N_t` coupling matrix is `m` (row-major).
    pub fn flat(n_rx: usize, n_tx: usize, m: &[Complex64]) -> Self {
        assert_eq!(m.len(), n_rx * n_tx, "coupling matrix size");
        Self {
            n_rx,
            n_tx,
            n_taps: 1,
            taps: m.to_vec(),
            pool_id: 0,
        }
    }

    /// Flat channel with unit gain on `min(N_r, N_t)` diagonal pairs.
    pub fn identity(n_rx: usize, n_tx: usize) -> Self {
        let m: Vec<Complex64> = (0..n_rx * n_tx)
            .map(|i| Complex64::new(if i / n_tx == i % n_tx { 1.0 } else { 0.0 }, 0.0))
            .collect();
        Self::flat(n_rx, n_tx, &m)
    }

    pub fn tap(&self, r: usize, t: usize, l: usize) -> Complex64 {
        self.taps[(r * self.n_tx + t) * self.n_taps + l]
    }

    pub fn pair_energy(&self, r: usize, t: usize) -> f64 {
        (0..self.n_taps).map(|l| self.tap(r, t, l).norm_sqr()).sum()
    }

    /// Signal power at receive antenna `r` for unit-power transmit samples.
    pub fn rx_power(&self, r: usize) -> f64 {
        (0..self.n_tx).map(|t| self.pair_energy(r, t)).sum()
    }

    /// Noise variance at receive antenna `r` for the requested SNR. Defined
    /// from the nominal signal power, so a silent input still sees noise.
    pub fn noise_variance(&self, r: usize, snr_db: f64) -> f64 {
        self.rx_power(r) / 10f64.powf(snr_db / 10.0)
    }

    /// Per-subcarrier channel matrices `H_k[r][t] = sum_l h_rtl exp(-2 pi i k l / N_s)`,
    /// laid out `[k][r][t]`.
    pub fn frequency_response(&self, n_subcarriers: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(n_subcarriers * self.n_rx * self.n_tx);
        for k in 0..n_subcarriers {
            for r in 0..self.n_rx {
                for t in 0..self.n_tx {
                    out.push(
                        (0..self.n_taps)
                            .map(|l| {
                                let phase = -2.0 * std::f64::consts::PI * ((k * l) % n_subcarriers) as f64
                                    / n_subcarriers as f64;
                                self.tap(r, t, l) * Complex64::from_polar(1.0, phase)
                            })
                            .sum(),
                    );
                }
            }
        }
        out
    }
}

/// Finite set of channel realizations reused across samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelPool {
    pub channels: Vec<ChannelRealization>,
}

impl ChannelPool {
    pub fn generate<R: Rng + ?Sized>(cfg: &FrameConfig, size: usize, rng: &mut R) -> Self {
        Self {
            channels: (0..size).map(|i| ChannelRealization::rayleigh(cfg, i, rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn get(&self, id: usize) -> &ChannelRealization {
        &self.channels[id]
    }
}

/// Linear convolution of each transmit signal with its taps, summed per
/// receive antenna and truncated to the input length, plus complex Gaussian
/// noise at the requested per-antenna SNR. An infinite SNR adds no noise and
/// draws nothing from `rng`.
pub fn apply_channel<R: Rng + ?Sized>(
    tx: &[Vec<Complex64>],
    chan: &ChannelRealization,
    snr_db: f64,
    rng: &mut R,
) -> Vec<Vec<Complex64>> {
    assert_eq!(tx.len(), chan.n_tx, "transmit antenna count");
    let len = tx.first().map_or(0, Vec::len);
    let zero = Complex64::new(0.0, 0.0);
    (0..chan.n_rx)
        .map(|r| {
            let mut out = vec![zero; len];
            for (t, signal) in tx.iter().enumerate() {
                for l in 0..chan.n_taps {
                    let h = chan.tap(r, t, l);
                    if h == zero {
                        continue;
                    }
                    for n in l..len {
                        out[n] += h * signal[n - l];
                    }
                }
            }
            let var = chan.noise_variance(r, snr_db);
            if var > 0.0 {
                out.iter_mut().for_each(|v| *v += complex_gaussian(rng, var));
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn profile_is_normalized_and_decaying() {
        let p = power_delay_profile(8);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for w in p.windows(2) {
            assert!((w[1] / w[0] - (-0.25f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_channel_passes_through() {
        let chan = ChannelRealization::identity(2, 2);
        let tx = vec![
            vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)],
            vec![Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)],
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(apply_channel(&tx, &chan, f64::INFINITY, &mut rng), tx);
    }
}
