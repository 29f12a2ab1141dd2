//! Checkpoint container, little-endian:
//!
//! ```text
//! "SGTC" | version u16 | kind u8 | frame (7 x u32) | kind-specific config
//! | block count u32 | blocks: name (u32 length + UTF-8) | rank u32 | dims (u32 each) | f64 payload
//! ```

use std::io::{Read, Write};

use sigt_phy::FrameConfig;
use sigt_tensor::{ParamStore, PoolKind, Tensor};

use crate::config::{Aggregation, CsiNetConfig, FcDnnConfig, LstmConfig, ModelConfig, SigTConfig};
use crate::error::{ModelError, Result};
use crate::model::Model;

pub const MAGIC: &[u8; 4] = b"SGTC";
pub const VERSION: u16 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.0.write_all(b)?)
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| ModelError::Format(format!("{v} does not fit in u32")))?;
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn agg(&mut self, a: Aggregation) -> Result<()> {
        self.bytes(&[match a {
            Aggregation::Pool(PoolKind::Avg) => 0,
            Aggregation::Pool(PoolKind::Max) => 1,
            Aggregation::Conv => 2,
        }])
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => ModelError::Format("file is truncated".into()),
            _ => e.into(),
        })?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn agg(&mut self) -> Result<Aggregation> {
        match self.u8()? {
            0 => Ok(Aggregation::Pool(PoolKind::Avg)),
            1 => Ok(Aggregation::Pool(PoolKind::Max)),
            2 => Ok(Aggregation::Conv),
            t => Err(ModelError::Format(format!("unknown aggregation tag {t}"))),
        }
    }
}

impl Model {
    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let mut w = Writer(w);
        w.bytes(MAGIC)?;
        w.bytes(&VERSION.to_le_bytes())?;
        let f = self.frame();
        match self.config() {
            ModelConfig::SigT(_) => w.bytes(&[0])?,
            ModelConfig::FcDnn(_) => w.bytes(&[1])?,
            ModelConfig::CsiNet(_) => w.bytes(&[2])?,
            ModelConfig::Lstm(_) => w.bytes(&[3])?,
        }
        for v in [f.n_subcarriers, f.n_tx, f.n_rx, f.n_info, f.cp_len, f.n_taps, f.qam_bits] {
            w.u32(v)?;
        }
        match *self.config() {
            ModelConfig::SigT(c) => {
                for v in [c.depth, c.heads, c.d_model, c.d_ff, c.mlp_hidden] {
                    w.u32(v)?;
                }
                w.agg(c.aggregation)?;
                w.f64(c.dropout_p)?;
            }
            ModelConfig::FcDnn(c) => {
                for v in c.hidden {
                    w.u32(v)?;
                }
                w.f64(c.dropout_p)?;
            }
            ModelConfig::CsiNet(c) => {
                for v in [c.blocks, c.widths[0], c.widths[1]] {
                    w.u32(v)?;
                }
                w.f64(c.dropout_p)?;
            }
            ModelConfig::Lstm(c) => {
                w.u32(c.d_model)?;
                w.u32(c.mlp_hidden)?;
                w.agg(c.aggregation)?;
                w.f64(c.dropout_p)?;
            }
        }
        w.u32(self.params().len())?;
        for (_, name, t) in self.params().iter() {
            w.u32(name.len())?;
            w.bytes(name.as_bytes())?;
            w.u32(t.rank())?;
            for &d in t.shape() {
                w.u32(d)?;
            }
            let mut buf = Vec::with_capacity(t.len() * 8);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.bytes(&buf)?;
        }
        w.0.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader(r);
        if &r.array::<4>()? != MAGIC {
            return Err(ModelError::Format("bad magic, not a checkpoint".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(ModelError::Format(format!("unsupported version {version}")));
        }
        let kind = r.u8()?;
        let mut f = [0usize; 7];
        for v in &mut f {
            *v = r.u32()?;
        }
        let frame = FrameConfig {
            n_subcarriers: f[0],
            n_tx: f[1],
            n_rx: f[2],
            n_info: f[3],
            cp_len: f[4],
            n_taps: f[5],
            qam_bits: f[6],
        };
        let config = match kind {
            0 => {
                let [depth, heads, d_model, d_ff, mlp_hidden] =
                    [r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?];
                ModelConfig::SigT(SigTConfig {
                    depth,
                    heads,
                    d_model,
                    d_ff,
                    mlp_hidden,
                    aggregation: r.agg()?,
                    dropout_p: r.f64()?,
                })
            }
            1 => ModelConfig::FcDnn(FcDnnConfig {
                hidden: [r.u32()?, r.u32()?, r.u32()?],
                dropout_p: r.f64()?,
            }),
            2 => ModelConfig::CsiNet(CsiNetConfig {
                blocks: r.u32()?,
                widths: [r.u32()?, r.u32()?],
                dropout_p: r.f64()?,
            }),
            3 => ModelConfig::Lstm(LstmConfig {
                d_model: r.u32()?,
                mlp_hidden: r.u32()?,
                aggregation: r.agg()?,
                dropout_p: r.f64()?,
            }),
            t => return Err(ModelError::Format(format!("unknown model kind tag {t}"))),
        };
        let mut model = Model::new(config, frame, 0)?;
        let count = r.u32()?;
        let mut store = ParamStore::new();
        for i in 0..count {
            let len = r.u32()?;
            let mut name = vec![0u8; len];
            r.0.read_exact(&mut name).map_err(|_| ModelError::Format("file is truncated".into()))?;
            let name = String::from_utf8(name).map_err(|_| ModelError::Format(format!("block {i} name is not UTF-8")))?;
            let rank = r.u32()?;
            let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let expected = model
                .params()
                .iter()
                .nth(i)
                .filter(|(_, n, _)| *n == name)
                .map(|(_, _, t)| t.shape().to_vec());
            if expected.as_deref() != Some(&shape[..]) {
                return Err(ModelError::Format(format!(
                    "parameter block {i} `{name}` {shape:?} does not match the architecture"
                )));
            }
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            store.add(name, Tensor::new(shape, data)?);
        }
        if r.0.read(&mut [0u8; 1])? != 0 {
            return Err(ModelError::Format("trailing bytes after the last block".into()));
        }
        model.set_params(store)?;
        Ok(model)
    }
}
