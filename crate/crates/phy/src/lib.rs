//! MIMO-OFDM link simulation: QPSK mapping, OFDM modulation, multipath
//! Rayleigh channels, dataset generation and storage, and a classical
//! pilot-based receiver.

pub mod channel;
pub mod classic;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod format;
pub mod ofdm;
pub mod qam;

pub use channel::{apply_channel, power_delay_profile, ChannelPool, ChannelRealization};
pub use classic::{bit_errors, detect, ls_estimate, ChannelEstimate, ClassicReceiver, Detector};
pub use config::FrameConfig;
pub use dataset::{generate_dataset, Dataset, DatasetSpec, GeneratedData, LinkSimulator, Sample, Split};
pub use error::{PhyError, Result};
pub use fft::Fft;
pub use format::{read_binary, write_binary, write_csv};
pub use ofdm::{ifft_cp_add, receive_frontend, transmit};
pub use qam::{qam_demodulate, qam_modulate};
