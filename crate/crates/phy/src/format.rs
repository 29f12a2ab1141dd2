//! On-disk dataset layout, all little-endian:
//!
//! ```text
//! "SIGT" | version u16 | N_s N_t N_r N_i cp_len n_taps qam_bits (u32 each)
//! | sample count u64 | snr_db f64 | seed u64
//! | per sample: y as f32 (N_s*N_r*N_i*2), x packed LSB-first (ceil(N_s*N_t*2 / 8) bytes)
//! ```

use std::io::{self, Read, Write};

use crate::config::FrameConfig;
use crate::dataset::{Dataset, Sample};
use crate::error::{PhyError, Result};

pub const MAGIC: &[u8; 4] = b"SIGT";
pub const VERSION: u16 = 1;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PhyError::Format(msg.into()))
}

pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b & 1) << (i % 8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

pub fn write_binary<W: Write>(mut w: W, data: &Dataset) -> Result<()> {
    let c = &data.cfg;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [c.n_subcarriers, c.n_tx, c.n_rx, c.n_info, c.cp_len, c.n_taps, c.qam_bits] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&(data.len() as u64).to_le_bytes())?;
    w.write_all(&data.snr_db.to_le_bytes())?;
    w.write_all(&data.seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(c.y_len() * 4 + c.x_len().div_ceil(8));
    for (i, s) in data.samples.iter().enumerate() {
        if s.y.len() != c.y_len() || s.x.len() != c.x_len() {
            return format_err(format!("sample {i} does not match the frame layout"));
        }
        buf.clear();
        for &v in &s.y {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        buf.extend_from_slice(&pack_bits(&s.x));
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(b)
}

fn truncated(e: io::Error) -> PhyError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        PhyError::Format("file is truncated".into())
    } else {
        PhyError::Io(e)
    }
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Dataset> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return format_err("bad magic, not a dataset file");
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return format_err(format!("unsupported version {version}"));
    }
    let mut f = [0usize; 7];
    for v in &mut f {
        *v = u32::from_le_bytes(read_array(&mut r)?) as usize;
    }
    let cfg = FrameConfig {
        n_subcarriers: f[0],
        n_tx: f[1],
        n_rx: f[2],
        n_info: f[3],
        cp_len: f[4],
        n_taps: f[5],
        qam_bits: f[6],
    };
    cfg.validate()?;
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let snr_db = f64::from_le_bytes(read_array(&mut r)?);
    let seed = u64::from_le_bytes(read_array(&mut r)?);

    let y_bytes = cfg.y_len() * 4;
    let x_bytes = cfg.x_len().div_ceil(8);
    let mut buf = vec![0u8; y_bytes + x_bytes];
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        r.read_exact(&mut buf).map_err(truncated)?;
        let y: Vec<f64> = buf[..y_bytes]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if y.iter().any(|v| !v.is_finite()) {
            return format_err(format!("sample {i} has non-finite entries"));
        }
        samples.push(Sample {
            y,
            x: unpack_bits(&buf[y_bytes..], cfg.x_len()),
            snr_db,
            channel_id: None,
        });
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return format_err("trailing bytes after the last sample");
    }
    Ok(Dataset {
        cfg,
        snr_db,
        seed,
        samples,
    })
}

/// One row per sample: `y` values (as stored, f32 precision) then `x` bits.
pub fn write_csv<W: Write>(mut w: W, data: &Dataset) -> Result<()> {
    let c = &data.cfg;
    let header: Vec<String> = (0..c.y_len())
        .map(|i| format!("y{i}"))
        .chain((0..c.x_len()).map(|i| format!("x{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for s in &data.samples {
        let row: Vec<String> = s
            .y
            .iter()
            .map(|&v| (v as f32).to_string())
            .chain(s.x.iter().map(u8::to_string))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
