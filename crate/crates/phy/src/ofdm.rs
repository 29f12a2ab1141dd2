use num_complex::Complex64;

use crate::config::FrameConfig;
use crate::error::{PhyError, Result};
use crate::fft::Fft;

/// Unitary IFFT of one antenna's subcarrier grid, then prefix the last
/// `cp_len` samples.
pub fn ifft_cp_add(fft: &Fft, freq: &[Complex64], cp_len: usize) -> Result<Vec<Complex64>> {
    let n = fft.len();
    if freq.len() != n {
        return Err(PhyError::FrameLength {
            expected: n,
            got: freq.len(),
        });
    }
    let mut body = freq.to_vec();
    fft.inverse(&mut body);
    // a prefix longer than the symbol wraps around it cyclically
    let mut out: Vec<Complex64> = (0..cp_len)
        .map(|j| body[(j as isize - cp_len as isize).rem_euclid(n as isize) as usize])
        .collect();
    out.reserve(n);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Strip the cyclic prefix and apply the unitary FFT.
pub fn cp_remove_fft(fft: &Fft, time: &[Complex64], cp_len: usize) -> Result<Vec<Complex64>> {
    let n = fft.len();
    if time.len() != n + cp_len {
        return Err(PhyError::FrameLength {
            expected: n + cp_len,
            got: time.len(),
        });
    }
    let mut body = time[cp_len..].to_vec();
    fft.forward(&mut body);
    Ok(body)
}

/// Transmit chain for one frame. `symbols` is the `N_s x N_t` grid; with
/// identity precoding stream `t` goes to antenna `t`, and the grid is sent in
/// each of the `N_i` OFDM symbols of the frame. Returns `N_t` time signals.
pub fn transmit(cfg: &FrameConfig, fft: &Fft, symbols: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
    let (n_s, n_t) = (cfg.n_subcarriers, cfg.n_tx);
    if symbols.len() != n_s * n_t {
        return Err(PhyError::FrameLength {
            expected: n_s * n_t,
            got: symbols.len(),
        });
    }
    (0..n_t)
        .map(|t| {
            let grid: Vec<Complex64> = (0..n_s).map(|k| symbols[k * n_t + t]).collect();
            let sym = ifft_cp_add(fft, &grid, cfg.cp_len)?;
            Ok(sym.repeat(cfg.n_info))
        })
        .collect()
}

/// Frequency-domain grids after CP removal and FFT, laid out `[k][r][i]`.
pub fn ofdm_demodulate(cfg: &FrameConfig, fft: &Fft, rx: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    let (n_s, n_r, n_i) = (cfg.n_subcarriers, cfg.n_rx, cfg.n_info);
    if rx.len() != n_r {
        return Err(PhyError::FrameLength {
            expected: n_r,
            got: rx.len(),
        });
    }
    let sym_len = cfg.symbol_len();
    let mut out = vec![Complex64::new(0.0, 0.0); n_s * n_r * n_i];
    for (r, signal) in rx.iter().enumerate() {
        if signal.len() != cfg.frame_len() {
            return Err(PhyError::FrameLength {
                expected: cfg.frame_len(),
                got: signal.len(),
            });
        }
        for i in 0..n_i {
            let freq = cp_remove_fft(fft, &signal[i * sym_len..(i + 1) * sym_len], cfg.cp_len)?;
            for (k, v) in freq.into_iter().enumerate() {
                out[(k * n_r + r) * n_i + i] = v;
            }
        }
    }
    Ok(out)
}

/// Receiver front end: CP removal, FFT, and real/imag split into the
/// `N_s x N_r x N_i x 2` layout (one row per subcarrier).
pub fn receive_frontend(cfg: &FrameConfig, fft: &Fft, rx: &[Vec<Complex64>]) -> Result<Vec<f64>> {
    Ok(complex_to_real(&ofdm_demodulate(cfg, fft, rx)?))
}

pub fn complex_to_real(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn real_to_complex(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}
