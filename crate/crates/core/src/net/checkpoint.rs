//! Binary checkpoint: `RLPQCKPT`, format version (u32 LE), header length
//! (u64 LE), a JSON header, then every tensor as little-endian `f32` in
//! header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{NetConfig, ParamStore, QNetwork, TensorSpec};
use crate::error::{Error, Result};
use crate::zest::ZestPrior;

const MAGIC: &[u8; 8] = b"RLPQCKPT";
const VERSION: u32 = 1;
const MAX_HEADER: u64 = 64 << 20;

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetConfig,
    tensors: Vec<TensorSpec>,
    #[serde(default)]
    prior: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    meta: serde_json::Value,
}

/// A trained network with the prior it was trained against.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: QNetwork<f32>,
    pub prior: Option<ZestPrior>,
    pub meta: serde_json::Value,
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, ckpt)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

pub fn write_checkpoint(w: &mut impl Write, ckpt: &Checkpoint) -> Result<()> {
    let params = ckpt.net.params();
    let header = Header {
        config: ckpt.net.config().clone(),
        tensors: params.specs().to_vec(),
        prior: ckpt.prior.as_ref().map(|p| p.pdfs().iter().map(|pdf| pdf.to_vec()).collect()),
        meta: ckpt.meta.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(json.len() as u64)?;
    w.write_all(&json)?;
    for t in params.data() {
        for &x in t.iter() {
            w.write_f32::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Checkpoint> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated file"))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated file"))?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = r.read_u64::<LittleEndian>().map_err(|_| bad("truncated file"))?;
    if len > MAX_HEADER {
        return Err(bad("header too large"));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let mut data = Vec::with_capacity(header.tensors.len());
    for spec in &header.tensors {
        let mut buf = vec![0f32; spec.len()];
        r.read_f32_into::<LittleEndian>(&mut buf)
            .map_err(|_| Error::Checkpoint(format!("truncated tensor {}", spec.name)))?;
        data.push(Array1::from(buf));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after tensors"));
    }
    let params = ParamStore::from_parts(header.tensors, data);
    let net = QNetwork::from_params(header.config, params).map_err(|e| match e {
        Error::Shape(m) => Error::Checkpoint(format!("shape mismatch: {m}")),
        other => other,
    })?;
    let prior = header.prior.map(ZestPrior::from_pdfs).transpose()?;
    if let Some(p) = &prior {
        if p.len() != net.config().locations {
            return Err(Error::Checkpoint(format!("prior has {} locations", p.len())));
        }
    }
    Ok(Checkpoint { net, prior, meta: header.meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from, Stream};

    fn sample() -> Checkpoint {
        let net = QNetwork::<f32>::new(NetConfig::reduced(), &mut rng_from(1, Stream::Init, 0)).unwrap();
        Checkpoint { net, prior: Some(ZestPrior::uniform(54)), meta: serde_json::json!({"episode": 3}) }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &c).unwrap();
        let back = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back.net.params(), c.net.params());
        assert_eq!(back.net.config(), c.net.config());
        assert_eq!(back.prior, c.prior);
        assert_eq!(back.meta["episode"], 3);
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_checkpoint(&mut bad_magic.as_slice()), Err(Error::Checkpoint(_))));
        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(&mut &truncated[..]), Err(Error::Checkpoint(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint(&mut extra.as_slice()).is_err());
    }

    #[test]
    fn rejects_shape_mismatch() {
        let c = sample();
        let mut other = c.net.config().clone();
        other.trunk = vec![16, 32];
        let header = Header {
            config: other,
            tensors: c.net.params().specs().to_vec(),
            prior: None,
            meta: serde_json::Value::Null,
        };
        let json = serde_json::to_vec(&header).unwrap();
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.write_u32::<LittleEndian>(VERSION).unwrap();
        buf.write_u64::<LittleEndian>(json.len() as u64).unwrap();
        buf.extend_from_slice(&json);
        for t in c.net.params().data() {
            for &x in t.iter() {
                buf.write_f32::<LittleEndian>(x).unwrap();
            }
        }
        let err = read_checkpoint(&mut buf.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(ref m) if m.contains("shape")), "{err}");
    }
}
