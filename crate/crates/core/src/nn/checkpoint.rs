//! Weight checkpoints.
//!
//! Layout (little-endian): magic `FFCK`, `u32` version, `u32` header length,
//! a JSON header with the network configurations, `u32` tensor count, then
//! per tensor: `u32` name length, UTF-8 name, `u32` rank, `u32` dims, and
//! `f32` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::context::{ContextConfig, ContextNet};
use super::params::ParamLayout;
use super::regressor::{Regressor, RegressorConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FFCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    regressor: RegressorConfig,
    context: Option<ContextConfig>,
}

/// A regressor, optionally paired with a context network.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub regressor: Regressor,
    pub context: Option<ContextNet>,
}

fn put_u32(out: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::format("checkpoint", "value exceeds u32"))?;
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32(input: &mut impl Read) -> Result<usize> {
    let mut b = [0; 4];
    input
        .read_exact(&mut b)
        .map_err(|_| Error::format("checkpoint", "truncated"))?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn write_tensors(out: &mut impl Write, layout: &ParamLayout, weights: &[f64]) -> Result<()> {
    for spec in layout.entries() {
        put_u32(out, spec.name.len())?;
        out.write_all(spec.name.as_bytes())?;
        put_u32(out, spec.shape.len())?;
        for &d in &spec.shape {
            put_u32(out, d)?;
        }
        let mut buf = Vec::with_capacity(4 * spec.len());
        for &w in &weights[spec.range()] {
            buf.extend_from_slice(&(w as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

impl Checkpoint {
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            regressor: self.regressor.config().clone(),
            context: self.context.as_ref().map(|c| c.config().clone()),
        })
        .map_err(|e| Error::format("checkpoint", e.to_string()))?;
        out.write_all(MAGIC)?;
        put_u32(&mut out, VERSION as usize)?;
        put_u32(&mut out, header.len())?;
        out.write_all(&header)?;
        let count = self.regressor.layout().entries().len()
            + self.context.as_ref().map_or(0, |c| c.layout().entries().len());
        put_u32(&mut out, count)?;
        write_tensors(&mut out, self.regressor.layout(), &self.regressor.weights)?;
        if let Some(c) = &self.context {
            write_tensors(&mut out, c.layout(), &c.weights)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn read_from(mut input: impl Read) -> Result<Self> {
        let mut magic = [0; 4];
        input
            .read_exact(&mut magic)
            .map_err(|_| Error::format("checkpoint", "truncated"))?;
        if &magic != MAGIC {
            return Err(Error::format("checkpoint", "bad magic"));
        }
        let version = get_u32(&mut input)?;
        if version != VERSION as usize {
            return Err(Error::format("checkpoint", format!("unsupported version {version}")));
        }
        let len = get_u32(&mut input)?;
        let mut header = vec![0; len];
        input
            .read_exact(&mut header)
            .map_err(|_| Error::format("checkpoint", "truncated header"))?;
        let header: Header =
            serde_json::from_slice(&header).map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let mut regressor = Regressor::empty(header.regressor)?;
        let mut context = header.context.map(ContextNet::zeroed).transpose()?;
        let expected = regressor.layout().entries().len() + context.as_ref().map_or(0, |c| c.layout().entries().len());
        let count = get_u32(&mut input)?;
        if count != expected {
            return Err(Error::format("checkpoint", format!("expected {expected} tensors, found {count}")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..count {
            let name_len = get_u32(&mut input)?;
            let mut name = vec![0; name_len];
            input
                .read_exact(&mut name)
                .map_err(|_| Error::format("checkpoint", "truncated name"))?;
            let name = String::from_utf8(name).map_err(|_| Error::format("checkpoint", "non-UTF-8 tensor name"))?;
            let rank = get_u32(&mut input)?;
            let shape = (0..rank).map(|_| get_u32(&mut input)).collect::<Result<Vec<_>>>()?;
            let (layout, weights) = match (regressor.layout().get(&name), &mut context) {
                (Some(_), _) => (regressor.layout().clone(), &mut regressor.weights),
                (None, Some(c)) if c.layout().get(&name).is_some() => (c.layout().clone(), &mut c.weights),
                _ => return Err(Error::format("checkpoint", format!("unknown tensor `{name}`"))),
            };
            let spec = layout.get(&name).expect("looked up above");
            if spec.shape != shape {
                return Err(Error::format(
                    "checkpoint",
                    format!("tensor `{name}` has shape {shape:?}, expected {:?}", spec.shape),
                ));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::format("checkpoint", format!("duplicate tensor `{name}`")));
            }
            let mut buf = vec![0; 4 * spec.len()];
            input
                .read_exact(&mut buf)
                .map_err(|_| Error::format("checkpoint", format!("truncated tensor `{name}`")))?;
            for (w, b) in weights[spec.range()].iter_mut().zip(buf.chunks_exact(4)) {
                *w = f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64;
            }
        }
        Ok(Self { regressor, context })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    /// Rounds every weight to single precision, matching a save/load cycle.
    pub fn quantized(mut self) -> Self {
        let round = |w: &mut Vec<f64>| w.iter_mut().for_each(|x| *x = *x as f32 as f64);
        round(&mut self.regressor.weights);
        if let Some(c) = &mut self.context {
            round(&mut c.weights);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let cfg = RegressorConfig {
            feature_dim: 16,
            encoder_widths: vec![4],
            head_hidden: 8,
            image_height: 8,
            image_width: 8,
            ..Default::default()
        };
        let context = ContextNet::new(ContextConfig {
            feature_dim: 16,
            hidden: 8,
            init_std: 0.1,
            ..Default::default()
        })
        .unwrap();
        Checkpoint {
            regressor: Regressor::new(cfg).unwrap(),
            context: Some(context),
        }
    }

    #[test]
    fn round_trip_equals_quantized_weights() {
        let ck = sample();
        let back = Checkpoint::read_from(ck.to_bytes().as_slice()).unwrap();
        assert_eq!(back, ck.clone().quantized());
        assert_eq!(back.to_bytes(), ck.to_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::read_from(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read_from(bad.as_slice()).is_err());
    }
}
