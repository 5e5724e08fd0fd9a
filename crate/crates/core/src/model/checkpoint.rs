//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes   "GCLCKPT\0"
//! version      u32       currently 1
//! head kind    u8        0 = cosine, 1 = linear
//! iteration    u64
//! config hash  u64
//! layers       u32       number of backbone layers
//!   per layer: weight tensor, bias tensor
//! head weight  tensor
//! head bias    tensor    linear heads only
//! optimizer    u8        0 = absent, 1 = present
//!   lr f64, momentum f64, buffers u32, then per buffer: len u64, len x f64
//!
//! tensor:      rows u32, cols u32, rows*cols x f64 (row-major)
//! ```
//!
//! Biases are stored as `1 x n` tensors.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{SgdState, Tensor1, Tensor2};

use super::{CosineClassifier, Head, Layer, LinearClassifier, MlpBackbone, Model};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GCLCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<SgdState>,
    pub iteration: u64,
    pub config_hash: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn tensor(&mut self, rows: usize, cols: usize, data: &[f64]) {
        self.u32(rows as u32);
        self.u32(cols as u32);
        for &v in data {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Data(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Data("tensor too large".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn tensor(&mut self) -> Result<Tensor2> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let data = self.f64s(rows * cols)?;
        Tensor2::from_vec(rows, cols, data)
    }
    fn vector(&mut self) -> Result<Tensor1> {
        let t = self.tensor()?;
        if t.rows() != 1 {
            return Err(Error::Data(format!("bias stored as {:?}", t.shape())));
        }
        Tensor1::from_vec(t.into_vec())
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u8(match self.model.head {
            Head::Cosine(_) => 0,
            Head::Linear(_) => 1,
        });
        w.u64(self.iteration);
        w.u64(self.config_hash);
        let layers = self.model.backbone.layers();
        w.u32(layers.len() as u32);
        for l in layers {
            w.tensor(l.weight.rows(), l.weight.cols(), l.weight.data());
            w.tensor(1, l.bias.len(), l.bias.data());
        }
        match &self.model.head {
            Head::Cosine(c) => {
                let t = c.weight();
                w.tensor(t.rows(), t.cols(), t.data());
            }
            Head::Linear(l) => {
                let t = l.weight();
                w.tensor(t.rows(), t.cols(), t.data());
                w.tensor(1, l.bias().len(), l.bias().data());
            }
        }
        match &self.optimizer {
            None => w.u8(0),
            Some(opt) => {
                w.u8(1);
                w.f64(opt.lr);
                w.f64(opt.momentum);
                w.u32(opt.velocity().len() as u32);
                for v in opt.velocity() {
                    w.u64(v.len() as u64);
                    for &x in v {
                        w.f64(x);
                    }
                }
            }
        }
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Data("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {version}")));
        }
        let kind = r.u8()?;
        let iteration = r.u64()?;
        let config_hash = r.u64()?;
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let weight = r.tensor()?;
            let bias = r.vector()?;
            layers.push(Layer { weight, bias });
        }
        let backbone = MlpBackbone::from_layers(layers)?;
        let head = match kind {
            0 => Head::Cosine(CosineClassifier::from_weight(r.tensor()?)?),
            1 => {
                let weight = r.tensor()?;
                Head::Linear(LinearClassifier::from_parts(weight, r.vector()?)?)
            }
            k => return Err(Error::Data(format!("unknown head kind {k}"))),
        };
        if head.weight().rows() != backbone.embedding_dim() {
            return Err(Error::Data("head does not match backbone width".into()));
        }
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let lr = r.f64()?;
                let momentum = r.f64()?;
                let n = r.u32()? as usize;
                let mut velocity = Vec::with_capacity(n);
                for _ in 0..n {
                    let len = r.u64()? as usize;
                    velocity.push(r.f64s(len)?);
                }
                Some(SgdState::with_velocity(lr, momentum, velocity)?)
            }
            t => return Err(Error::Data(format!("bad optimizer tag {t}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Data(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            model: Model { backbone, head },
            optimizer,
            iteration,
            config_hash,
        })
    }

    /// Writes to a sibling temp file, then renames into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.encode()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HeadKind;
    use crate::numerics::RngStream;

    fn sample(kind: HeadKind) -> Checkpoint {
        let mut rng = RngStream::new(17);
        let model = Model::new(&[4, 6, 3], 3, kind, &mut rng).unwrap();
        let opt = SgdState::with_velocity(0.1, 0.9, vec![vec![0.5, -0.25], vec![1.0]]).unwrap();
        Checkpoint {
            model,
            optimizer: Some(opt),
            iteration: 1234,
            config_hash: 0xdead_beef,
        }
    }

    #[test]
    fn roundtrip_both_heads() {
        for kind in [HeadKind::Cosine, HeadKind::Linear] {
            let ck = sample(kind);
            let back = Checkpoint::decode(&ck.encode()).unwrap();
            assert_eq!(back, ck);
        }
    }

    #[test]
    fn layout_header_is_stable() {
        let bytes = sample(HeadKind::Cosine).encode();
        assert_eq!(&bytes[..8], b"GCLCKPT\0");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(bytes[12], 0);
        assert_eq!(&bytes[13..21], &1234u64.to_le_bytes());
        assert_eq!(&bytes[21..29], &0xdead_beefu64.to_le_bytes());
        assert_eq!(&bytes[29..33], &2u32.to_le_bytes());
        // first weight tensor header: 4 x 6
        assert_eq!(&bytes[33..37], &4u32.to_le_bytes());
        assert_eq!(&bytes[37..41], &6u32.to_le_bytes());
    }

    #[test]
    fn corrupt_input_rejected() {
        let mut bytes = sample(HeadKind::Linear).encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 3]).is_err());
        bytes[0] = b'X';
        assert!(Checkpoint::decode(&bytes).is_err());
        assert!(Checkpoint::decode(b"").is_err());
    }

    #[test]
    fn reload_reproduces_forward_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample(HeadKind::Cosine);
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        let x = Tensor2::from_rows(&[[0.3, -1.0, 0.2, 0.9]]).unwrap();
        let a = ck.model.logits(&x).unwrap();
        let b = back.model.logits(&x).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(!dir.path().join("m.tmp").exists());
    }
}
