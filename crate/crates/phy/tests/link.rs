use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigt_phy::ofdm::{complex_to_real, ofdm_demodulate};
use sigt_phy::{
    apply_channel, qam_modulate, receive_frontend, transmit, ChannelPool, ChannelRealization, FrameConfig,
    LinkSimulator,
};

fn random_bits(n: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..=1u8)).collect()
}

fn cfg(n_s: usize, n_t: usize, n_r: usize, n_i: usize) -> FrameConfig {
    FrameConfig {
        n_subcarriers: n_s,
        n_tx: n_t,
        n_rx: n_r,
        n_info: n_i,
        ..FrameConfig::default()
    }
}

/// Direct-form linear convolution, written independently of the library.
fn convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    (0..x.len())
        .map(|n| {
            h.iter()
                .enumerate()
                .filter(|(l, _)| *l <= n)
                .map(|(l, hv)| hv * x[n - l])
                .sum()
        })
        .collect()
}

#[test]
fn identity_channel_sums_transmit_antennas() {
    let chan = ChannelRealization::flat(1, 3, &[Complex64::new(1.0, 0.0); 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tx: Vec<Vec<Complex64>> = (0..3)
        .map(|_| (0..20).map(|_| Complex64::new(rng.random(), rng.random())).collect())
        .collect();
    let rx = apply_channel(&tx, &chan, f64::INFINITY, &mut rng);
    for n in 0..20 {
        let s: Complex64 = tx.iter().map(|t| t[n]).sum();
        assert!((rx[0][n] - s).norm() < 1e-15);
    }
}

#[test]
fn multipath_matches_direct_convolution() {
    let c = cfg(16, 2, 3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let chan = ChannelRealization::rayleigh(&c, 0, &mut rng);
    let tx: Vec<Vec<Complex64>> = (0..2)
        .map(|_| (0..40).map(|_| Complex64::new(rng.random(), rng.random())).collect())
        .collect();
    let rx = apply_channel(&tx, &chan, f64::INFINITY, &mut rng);
    for (r, out) in rx.iter().enumerate() {
        let mut expect = vec![Complex64::new(0.0, 0.0); 40];
        for (t, x) in tx.iter().enumerate() {
            let h: Vec<Complex64> = (0..c.n_taps).map(|l| chan.tap(r, t, l)).collect();
            for (e, v) in expect.iter_mut().zip(convolve(x, &h)) {
                *e += v;
            }
        }
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn cyclic_prefix_diagonalizes_channel() {
    // with the prefix absorbing the delay spread, subcarrier k sees H_k x_k
    let c = cfg(32, 2, 4, 3);
    let sim = LinkSimulator::new(c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let chan = ChannelRealization::rayleigh(&c, 0, &mut rng);
    let bits = random_bits(c.x_len(), &mut rng);
    let sym = qam_modulate(&bits).unwrap();
    let grid = ofdm_demodulate(&c, sim.fft(), &apply_channel(&transmit(&c, sim.fft(), &sym).unwrap(), &chan, f64::INFINITY, &mut rng)).unwrap();
    for k in 0..c.n_subcarriers {
        for r in 0..c.n_rx {
            // independent DFT of the taps
            let expect: Complex64 = (0..c.n_tx)
                .map(|t| {
                    let hk: Complex64 = (0..c.n_taps)
                        .map(|l| chan.tap(r, t, l) * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * l) as f64 / 32.0))
                        .sum();
                    hk * sym[k * c.n_tx + t]
                })
                .sum();
            for i in 0..c.n_info {
                assert!((grid[(k * c.n_rx + r) * c.n_info + i] - expect).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn flat_channel_maps_grid_through_coupling_matrix() {
    let c = FrameConfig {
        n_taps: 1,
        ..cfg(16, 2, 3, 1)
    };
    let sim = LinkSimulator::new(c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m: Vec<Complex64> = (0..6).map(|_| Complex64::new(rng.random(), rng.random())).collect();
    let chan = ChannelRealization::flat(3, 2, &m);
    let bits = random_bits(c.x_len(), &mut rng);
    let sym = qam_modulate(&bits).unwrap();
    let y = sim.simulate(&bits, &chan, f64::INFINITY, &mut rng).unwrap();
    for k in 0..16 {
        for r in 0..3 {
            let e = m[r * 2] * sym[k * 2] + m[r * 2 + 1] * sym[k * 2 + 1];
            let base = (k * 3 + r) * 2;
            assert!((y[base] - e.re).abs() < 1e-9 && (y[base + 1] - e.im).abs() < 1e-9);
        }
    }
}

#[test]
fn identity_round_trip_reproduces_symbol_grid() {
    let c = cfg(64, 4, 4, 1);
    let sim = LinkSimulator::new(c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let bits = random_bits(c.x_len(), &mut rng);
    let y = sim.simulate(&bits, &ChannelRealization::identity(4, 4), f64::INFINITY, &mut rng).unwrap();
    let expect = complex_to_real(&qam_modulate(&bits).unwrap());
    for (a, b) in y.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn frontend_preserves_post_prefix_energy() {
    let c = cfg(64, 2, 4, 2);
    let fft = sigt_phy::Fft::new(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rx: Vec<Vec<Complex64>> = (0..4)
        .map(|_| (0..c.frame_len()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
        .collect();
    let y = receive_frontend(&c, &fft, &rx).unwrap();
    let energy_y: f64 = y.iter().map(|v| v * v).sum();
    let energy_t: f64 = rx
        .iter()
        .flat_map(|s| s.chunks(c.symbol_len()).flat_map(|sym| sym[c.cp_len..].iter()))
        .map(|v| v.norm_sqr())
        .sum();
    assert!((energy_y - energy_t).abs() < 1e-9);
}

#[test]
fn zero_input_gives_nominal_noise() {
    let c = cfg(8, 2, 2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let chan = ChannelRealization::rayleigh(&c, 0, &mut rng);
    let snr_db = 7.0;
    let tx = vec![vec![Complex64::new(0.0, 0.0); 100_000]; 2];
    let rx = apply_channel(&tx, &chan, snr_db, &mut rng);
    for (r, out) in rx.iter().enumerate() {
        let var = out.iter().map(|v| v.norm_sqr()).sum::<f64>() / out.len() as f64;
        let nominal = chan.rx_power(r) / 10f64.powf(0.7);
        assert!((var / nominal - 1.0).abs() < 0.05, "antenna {r}: {var} vs {nominal}");
    }
}

#[test]
fn empirical_snr_is_calibrated() {
    let c = cfg(256, 4, 2, 1);
    let sim = LinkSimulator::new(c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pool = ChannelPool::generate(&c, 8, &mut rng);
    let snr_db = 10.0;
    let (mut signal, mut noise, mut count) = (vec![0.0; 2], vec![0.0; 2], 0usize);
    // 2000 frames x 272 samples x 2 antennas is just over 10^6 noise samples
    for f in 0..2000 {
        let chan = pool.get(f % pool.len());
        let sym = qam_modulate(&random_bits(c.x_len(), &mut rng)).unwrap();
        let tx = transmit(&c, sim.fft(), &sym).unwrap();
        let clean = apply_channel(&tx, chan, f64::INFINITY, &mut rng);
        let noisy = apply_channel(&tx, chan, snr_db, &mut rng);
        for r in 0..2 {
            for (a, b) in clean[r].iter().zip(&noisy[r]) {
                signal[r] += a.norm_sqr();
                noise[r] += (b - a).norm_sqr();
            }
        }
        count += clean[0].len() * 2;
    }
    assert!(count >= 1_000_000);
    for r in 0..2 {
        let measured = 10.0 * (signal[r] / noise[r]).log10();
        assert!((measured - snr_db).abs() < 0.2, "antenna {r}: {measured} dB");
    }
}

#[test]
fn pool_taps_have_unit_pair_energy() {
    let c = FrameConfig::default();
    let pool = ChannelPool::generate(&c, 500, &mut ChaCha8Rng::seed_from_u64(17));
    let mut total = 0.0;
    for ch in &pool.channels {
        for r in 0..c.n_rx {
            for t in 0..c.n_tx {
                total += ch.pair_energy(r, t);
            }
        }
    }
    let mean = total / (500 * c.n_rx * c.n_tx) as f64;
    assert!((mean - 1.0).abs() < 0.02, "mean pair energy {mean}");
}

#[test]
fn fixed_seed_channel_output_is_bit_identical() {
    let c = FrameConfig::miniature();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let chan = ChannelRealization::rayleigh(&c, 0, &mut rng);
        let tx = vec![vec![Complex64::new(0.5, -0.5); 50]; c.n_tx];
        apply_channel(&tx, &chan, 3.0, &mut rng)
    };
    assert_eq!(run(), run());
}
