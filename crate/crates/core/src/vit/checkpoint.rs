//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "FDSL" | version: u32
//! repeated until EOF:
//!   name_len: u32 | name: UTF-8 | rank: u32 | dims: u32 × rank | values: f32 × Π dims
//! ```
//!
//! The first tensor, `config`, holds the ten integers of [`ModelConfig`] so a
//! checkpoint is self-describing; the rest follow [`ViTParams::names`] order.

use std::path::Path;

use super::{ModelConfig, ViTParams};
use crate::error::{Error, Result};
use crate::image::write_atomic;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FDSL";
pub const CHECKPOINT_VERSION: u32 = 1;
const CONFIG_TENSOR: &str = "config";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ViTParams<f32>,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, params: ViTParams<f32>) -> Result<Self> {
        params.check(&config)?;
        Ok(Checkpoint { config, params })
    }

    /// Fails unless the stored configuration equals `expected`.
    pub fn expect_config(&self, expected: &ModelConfig) -> Result<()> {
        if &self.config != expected {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint was saved for {:?}, expected {:?}",
                self.config, expected
            )));
        }
        Ok(())
    }
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], values: impl Iterator<Item = f32>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * ckpt.params.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let record = ckpt.config.to_record();
    put_tensor(&mut out, CONFIG_TENSOR, &[record.len()], record.iter().map(|&v| v as f32));
    for (name, t) in ViTParams::<f32>::names(&ckpt.config).iter().zip(ckpt.params.tensors()) {
        put_tensor(&mut out, name, t.shape(), t.data().iter().copied());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        if self.bytes.len() - self.pos < n {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn decode_tensors(bytes: &[u8]) -> std::result::Result<Vec<(String, Tensor<f32>)>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let mut out = Vec::new();
    while !r.done() {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| format!("tensor name: {e}"))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(format!("{name}: implausible rank {rank}"));
        }
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
        let count: usize = shape.iter().product();
        let raw = r.take(count.checked_mul(4).ok_or("tensor too large")?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        out.push((name, Tensor::from_vec(&shape, data).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

/// Decodes a checkpoint and validates every tensor name and shape against
/// the configuration it carries.
pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let bad = |msg: String| Error::format("checkpoint", path, msg);
    let mut tensors = decode_tensors(bytes).map_err(bad)?.into_iter();
    let (name, record) = tensors.next().ok_or_else(|| bad("no tensors".into()))?;
    if name != CONFIG_TENSOR {
        return Err(bad(format!("first tensor is {name:?}, expected {CONFIG_TENSOR:?}")));
    }
    let record: Vec<usize> = record.data().iter().map(|&v| v as usize).collect();
    let config = ModelConfig::from_record(&record)?;
    let names = ViTParams::<f32>::names(&config);
    let rest: Vec<(String, Tensor<f32>)> = tensors.collect();
    if rest.len() != names.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameter tensors in checkpoint, config needs {}",
            rest.len(),
            names.len()
        )));
    }
    for ((got, _), want) in rest.iter().zip(&names) {
        if got != want {
            return Err(bad(format!("tensor {got:?} where {want:?} was expected")));
        }
    }
    let params = ViTParams::from_tensors(&config, rest.into_iter().map(|(_, t)| t).collect())?;
    Ok(Checkpoint { config, params })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ckpt))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_round_trip() {
        let cfg = ModelConfig::micro(5);
        let ckpt = Checkpoint::new(cfg, ViTParams::init(&cfg, 9)).unwrap();
        let bytes = encode_checkpoint(&ckpt);
        assert_eq!(&bytes[..4], b"FDSL");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        let back = decode_checkpoint(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let cfg = ModelConfig::micro(2);
        let bytes = encode_checkpoint(&Checkpoint::new(cfg, ViTParams::init(&cfg, 1)).unwrap());
        let p = Path::new("mem");
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3], p).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_checkpoint(&wrong, p).is_err());
        let mut version = bytes.clone();
        version[4] = 2;
        assert!(decode_checkpoint(&version, p).is_err());
        assert!(decode_checkpoint(&bytes[..8], p).is_err());
    }

    #[test]
    fn config_mismatch_is_reported() {
        let cfg = ModelConfig::micro(2);
        let ckpt = Checkpoint::new(cfg, ViTParams::init(&cfg, 1)).unwrap();
        assert!(ckpt.expect_config(&cfg).is_ok());
        assert!(ckpt.expect_config(&ModelConfig::micro(3)).is_err());
        assert!(Checkpoint::new(ModelConfig::micro(3), ckpt.params.clone()).is_err());
    }
}
