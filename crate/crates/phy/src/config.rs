use crate::error::{PhyError, Result};

/// Physical-layer dimensions of one frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameConfig {
    /// Subcarriers per OFDM symbol (power of two).
    pub n_subcarriers: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    /// Information symbols per subcarrier, i.e. OFDM symbols per frame.
    pub n_info: usize,
    pub cp_len: usize,
    /// Channel impulse-response length; must fit inside the cyclic prefix.
    pub n_taps: usize,
    pub qam_bits: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 256,
            n_tx: 4,
            n_rx: 16,
            n_info: 1,
            cp_len: 16,
            n_taps: 8,
            qam_bits: 2,
        }
    }
}

impl FrameConfig {
    /// Small frame used by gradient checks and quick tests.
    pub fn miniature() -> Self {
        Self {
            n_subcarriers: 8,
            n_tx: 2,
            n_rx: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |field, msg: String| Err(PhyError::Config { field, msg });
        if self.n_subcarriers < 2 || !self.n_subcarriers.is_power_of_two() {
            return err(
                "n_subcarriers",
                format!("{} is not a power of two >= 2", self.n_subcarriers),
            );
        }
        for (field, v) in [("n_tx", self.n_tx), ("n_rx", self.n_rx), ("n_info", self.n_info), ("n_taps", self.n_taps)] {
            if v == 0 {
                return err(field, "must be at least 1".into());
            }
        }
        if self.n_taps > self.cp_len {
            return err(
                "n_taps",
                format!("{} taps exceed cyclic prefix of {}", self.n_taps, self.cp_len),
            );
        }
        if self.qam_bits != 2 {
            return err(
                "qam_bits",
                format!("{} bits per symbol unsupported (QPSK only)", self.qam_bits),
            );
        }
        Ok(())
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    pub fn frame_len(&self) -> usize {
        self.n_info * self.symbol_len()
    }

    /// Length of the real-valued received grid `N_s x N_r x N_i x 2`.
    pub fn y_len(&self) -> usize {
        self.n_subcarriers * self.n_rx * self.n_info * 2
    }

    /// Number of bits per frame, `N_s x N_t x 2`.
    pub fn x_len(&self) -> usize {
        self.n_subcarriers * self.n_tx * self.qam_bits
    }

    /// Width of one receive-antenna token, `2 N_s N_i`.
    pub fn token_width(&self) -> usize {
        2 * self.n_subcarriers * self.n_info
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_reference_setup() {
        let c = FrameConfig::default();
        assert_eq!((c.n_subcarriers, c.n_tx, c.n_rx, c.n_info), (256, 4, 16, 1));
        assert_eq!(c.token_width(), 512);
        assert_eq!(c.x_len(), 2048);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values_with_field_names() {
        let bad = FrameConfig {
            n_subcarriers: 12,
            ..FrameConfig::default()
        };
        assert!(matches!(bad.validate(), Err(PhyError::Config { field: "n_subcarriers", .. })));
        let bad = FrameConfig {
            n_taps: 17,
            ..FrameConfig::default()
        };
        assert!(matches!(bad.validate(), Err(PhyError::Config { field: "n_taps", .. })));
        let bad = FrameConfig {
            qam_bits: 4,
            ..FrameConfig::default()
        };
        assert!(matches!(bad.validate(), Err(PhyError::Config { field: "qam_bits", .. })));
    }
}
