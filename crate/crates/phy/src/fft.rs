//! Iterative radix-2 FFT with the unitary `1/sqrt(N)` scaling in both
//! directions, so Parseval holds exactly up to rounding.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{PhyError, Result};

#[derive(Clone, Debug)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
    bit_rev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(PhyError::Config {
                field: "n_subcarriers",
                msg: format!("FFT length {n} is not a power of two"),
            });
        }
        let bits = n.trailing_zeros();
        let bit_rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Self {
            n,
            twiddles,
            bit_rev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X[k] = N^{-1/2} sum_n x[n] exp(-2 pi i k n / N)`, in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// Inverse of [`Fft::forward`], in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.n, "FFT buffer length");
        for i in 0..self.n {
            let j = self.bit_rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let step = self.n / len;
            for start in (0..self.n).step_by(len) {
                for j in 0..half {
                    let mut w = self.twiddles[j * step];
                    if inverse {
                        w = w.conj();
                    }
                    let t = w * buf[start + j + half];
                    let u = buf[start + j];
                    buf[start + j] = u + t;
                    buf[start + j + half] = u - t;
                }
            }
            len <<= 1;
        }
        let scale = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / n as f64))
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn matches_direct_dft() {
        for n in [1, 2, 4, 8, 64] {
            let x: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let mut y = x.clone();
            Fft::new(n).unwrap().forward(&mut y);
            for (a, b) in y.iter().zip(naive_dft(&x)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Fft::new(12).is_err());
        assert!(Fft::new(0).is_err());
    }

    #[test]
    fn single_subcarrier_inverse_has_constant_modulus() {
        let n = 16;
        let fft = Fft::new(n).unwrap();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        x[3] = Complex64::new(1.0, 0.0);
        fft.inverse(&mut x);
        for v in &x {
            assert!((v.norm() - 1.0 / (n as f64).sqrt()).abs() < 1e-12);
        }
    }
}
