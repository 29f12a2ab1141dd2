//! Gray-mapped QPSK: bit pair `(b0, b1)` maps to
//! `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{PhyError, Result};

pub fn qpsk_symbol(b0: u8, b1: u8) -> Complex64 {
    Complex64::new(
        (1.0 - 2.0 * b0 as f64) * FRAC_1_SQRT_2,
        (1.0 - 2.0 * b1 as f64) * FRAC_1_SQRT_2,
    )
}

/// Maps consecutive bit pairs to symbols: a `N_s x N_t x 2` bit grid becomes
/// a `N_s x N_t` symbol grid with the same row-major order.
pub fn qam_modulate(bits: &[u8]) -> Result<Vec<Complex64>> {
    if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
        return Err(PhyError::NonBinary { index, value });
    }
    if bits.len() % 2 != 0 {
        return Err(PhyError::FrameLength {
            expected: bits.len() + 1,
            got: bits.len(),
        });
    }
    Ok(bits.chunks(2).map(|p| qpsk_symbol(p[0], p[1])).collect())
}

/// Hard sign decision per component; a component of exactly zero decides 0.
pub fn qam_demodulate(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}
