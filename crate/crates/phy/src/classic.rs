//! Pilot-based receiver: least-squares channel estimation, linear ZF or MMSE
//! detection per subcarrier, and hard QPSK demapping.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::config::FrameConfig;
use crate::error::{PhyError, Result};
use crate::ofdm::real_to_complex;
use crate::qam::qam_demodulate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Detector {
    ZeroForcing,
    Mmse,
}

/// Per-subcarrier channel matrices laid out `[k][r][t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEstimate {
    pub n_subcarriers: usize,
    pub n_rx: usize,
    pub n_tx: usize,
    pub h: Vec<Complex64>,
}

impl ChannelEstimate {
    /// Exact frequency response of a known channel.
    pub fn perfect(chan: &ChannelRealization, n_subcarriers: usize) -> Self {
        Self {
            n_subcarriers,
            n_rx: chan.n_rx,
            n_tx: chan.n_tx,
            h: chan.frequency_response(n_subcarriers),
        }
    }

    pub fn get(&self, k: usize, r: usize, t: usize) -> Complex64 {
        self.h[(k * self.n_rx + r) * self.n_tx + t]
    }

    pub fn matrix(&self, k: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n_rx, self.n_tx, |r, t| self.get(k, r, t))
    }
}

/// `pilot_rx[t]` is the `[k][r]` grid received while only antenna `t`
/// transmitted `pilot_tx[t][k]`. The estimate is `y / x` elementwise.
pub fn ls_estimate(pilot_rx: &[Vec<Complex64>], pilot_tx: &[Vec<Complex64>], n_rx: usize) -> Result<ChannelEstimate> {
    let n_tx = pilot_tx.len();
    if pilot_rx.len() != n_tx {
        return Err(PhyError::FrameLength {
            expected: n_tx,
            got: pilot_rx.len(),
        });
    }
    let n_s = pilot_tx.first().map_or(0, Vec::len);
    for (t, (rx, tx)) in pilot_rx.iter().zip(pilot_tx).enumerate() {
        if tx.len() != n_s || rx.len() != n_s * n_rx {
            return Err(PhyError::FrameLength {
                expected: n_s * n_rx,
                got: rx.len(),
            });
        }
        if let Some(k) = tx.iter().position(|p| p.norm_sqr() == 0.0) {
            return Err(PhyError::ZeroPilot { subcarrier: k, tx: t });
        }
    }
    let mut h = Vec::with_capacity(n_s * n_rx * n_tx);
    for k in 0..n_s {
        for r in 0..n_rx {
            for t in 0..n_tx {
                h.push(pilot_rx[t][k * n_rx + r] / pilot_tx[t][k]);
            }
        }
    }
    Ok(ChannelEstimate {
        n_subcarriers: n_s,
        n_rx,
        n_tx,
        h,
    })
}

/// Linear detection on one subcarrier. ZF solves `(H^H H) x = H^H y`; MMSE
/// adds `noise_var * I` to the Gram matrix.
pub fn detect(
    y: &[Complex64],
    h: &DMatrix<Complex64>,
    detector: Detector,
    noise_var: f64,
    subcarrier: usize,
) -> Result<Vec<Complex64>> {
    if y.len() != h.nrows() {
        return Err(PhyError::FrameLength {
            expected: h.nrows(),
            got: y.len(),
        });
    }
    let hh = h.adjoint();
    let mut gram = &hh * h;
    if detector == Detector::Mmse {
        for i in 0..gram.nrows() {
            gram[(i, i)] += Complex64::new(noise_var, 0.0);
        }
    }
    let scale = (0..gram.nrows()).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let chol = Cholesky::new(gram).ok_or(PhyError::RankDeficient { subcarrier })?;
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| l[(i, i)].norm_sqr() <= 1e-12 * scale) {
        return Err(PhyError::RankDeficient { subcarrier });
    }
    let rhs = hh * DVector::from_column_slice(y);
    Ok(chol.solve(&rhs).iter().copied().collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicReceiver {
    pub detector: Detector,
}

impl ClassicReceiver {
    pub fn new(detector: Detector) -> Self {
        Self { detector }
    }

    /// Equalized `N_s x N_t` symbol grid from a received `y`. Repeated
    /// OFDM symbols are averaged before detection, which divides the
    /// effective noise variance by `N_i`.
    pub fn equalize(&self, cfg: &FrameConfig, y: &[f64], est: &ChannelEstimate, noise_var: f64) -> Result<Vec<Complex64>> {
        if y.len() != cfg.y_len() {
            return Err(PhyError::FrameLength {
                expected: cfg.y_len(),
                got: y.len(),
            });
        }
        let (n_s, n_r, n_i) = (cfg.n_subcarriers, cfg.n_rx, cfg.n_info);
        let grid = real_to_complex(y);
        let mut out = Vec::with_capacity(n_s * cfg.n_tx);
        for k in 0..n_s {
            let yk: Vec<Complex64> = (0..n_r)
                .map(|r| (0..n_i).map(|i| grid[(k * n_r + r) * n_i + i]).sum::<Complex64>() / n_i as f64)
                .collect();
            out.extend(detect(&yk, &est.matrix(k), self.detector, noise_var / n_i as f64, k)?);
        }
        Ok(out)
    }

    /// Hard bit decisions laid out like the transmitted `N_s x N_t x 2` bits.
    pub fn decode(&self, cfg: &FrameConfig, y: &[f64], est: &ChannelEstimate, noise_var: f64) -> Result<Vec<u8>> {
        Ok(qam_demodulate(&self.equalize(cfg, y, est, noise_var)?))
    }
}

pub fn bit_errors(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_pilot_is_rejected() {
        let tx = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]];
        let rx = vec![vec![Complex64::new(1.0, 0.0); 2]];
        assert!(matches!(
            ls_estimate(&rx, &tx, 1),
            Err(PhyError::ZeroPilot { subcarrier: 1, tx: 0 })
        ));
    }

    #[test]
    fn singular_channel_names_subcarrier() {
        let h = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let y = [Complex64::new(1.0, 0.0); 2];
        assert!(matches!(
            detect(&y, &h, Detector::ZeroForcing, 0.0, 7),
            Err(PhyError::RankDeficient { subcarrier: 7 })
        ));
        // regularization makes the same matrix invertible
        assert!(detect(&y, &h, Detector::Mmse, 0.1, 7).is_ok());
    }
}
