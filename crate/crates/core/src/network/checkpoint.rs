//! Checkpoint container.
//!
//! ```text
//! magic      8 bytes   "ULIFCKPT"
//! version    u32 LE    1
//! manifest   u64 LE length, then UTF-8 JSON (CheckpointManifest)
//! count      u32 LE    number of parameters
//! per parameter:
//!   name     u32 LE length, then UTF-8 bytes
//!   flags    u8        1 = trainable
//!   ndim     u32 LE, then ndim × u64 LE dimensions
//!   data     product(dims) × f64 LE
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{Network, NetworkSpec, ParamStore};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ULIFCKPT";
const VERSION: u32 = 1;

/// Metadata stored ahead of the parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: String,
    pub spec: NetworkSpec,
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn from_network(net: &Network, seed: u64, epoch: usize) -> Self {
        Checkpoint {
            manifest: CheckpointManifest {
                kind: net.spec.kind().to_string(),
                spec: net.spec.clone(),
                seed,
                epoch,
            },
            params: net.params.clone(),
        }
    }

    pub fn into_network(self) -> Result<Network> {
        self.manifest.spec.validate()?;
        let template = Network::new(self.manifest.spec.clone(), 0)?;
        for p in template.params.iter() {
            let got = self.params.get(&p.name).ok_or_else(|| {
                Error::Format(format!("checkpoint is missing parameter `{}`", p.name))
            })?;
            if got.value.shape() != p.value.shape() {
                return Err(Error::Format(format!(
                    "parameter `{}` has shape {:?}, spec requires {:?}",
                    p.name,
                    got.value.shape(),
                    p.value.shape()
                )));
            }
        }
        Ok(Network {
            spec: self.manifest.spec,
            params: self.params,
        })
    }

    pub fn to_writer<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        let manifest = serde_json::to_vec(&self.manifest)
            .map_err(|e| Error::Format(format!("manifest: {e}")))?;
        w.write_u64::<LittleEndian>(manifest.len() as u64)?;
        w.write_all(&manifest)?;
        w.write_u32::<LittleEndian>(self.params.len() as u32)?;
        for p in self.params.iter() {
            w.write_u32::<LittleEndian>(p.name.len() as u32)?;
            w.write_all(p.name.as_bytes())?;
            w.write_u8(p.trainable as u8)?;
            w.write_u32::<LittleEndian>(p.value.ndim() as u32)?;
            for &d in p.value.shape() {
                w.write_u64::<LittleEndian>(d as u64)?;
            }
            for &x in p.value.data() {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_reader<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let len = r.read_u64::<LittleEndian>()? as usize;
        let manifest = read_bytes(&mut r, len)?;
        let manifest: CheckpointManifest = serde_json::from_slice(&manifest)
            .map_err(|e| Error::Format(format!("manifest: {e}")))?;
        let count = r.read_u32::<LittleEndian>()?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name_len = r.read_u32::<LittleEndian>()? as usize;
            let name = String::from_utf8(read_bytes(&mut r, name_len)?)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
            let trainable = match r.read_u8()? {
                0 => false,
                1 => true,
                f => return Err(Error::Format(format!("bad flag byte {f} for `{name}`"))),
            };
            let ndim = r.read_u32::<LittleEndian>()? as usize;
            let shape = (0..ndim)
                .map(|_| r.read_u64::<LittleEndian>().map(|d| d as usize))
                .collect::<std::io::Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let mut data = vec![0.0; n];
            r.read_f64_into::<LittleEndian>(&mut data)?;
            params.push(name, Tensor::new(shape, data)?, trainable);
        }
        Ok(Checkpoint { manifest, params })
    }
}

fn read_bytes<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(std::io::Error::from(std::io::ErrorKind::UnexpectedEof).into());
    }
    Ok(buf)
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    ckpt.to_writer(BufWriter::new(File::create(path)?))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_reader(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurons::NeuronKind;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut spec = NetworkSpec::new(5, 3, NeuronKind::UltraDplif);
        spec.hidden = vec![4, 2];
        let mut net = Network::new(spec, 9).unwrap();
        net.params.get_mut("readout.bias").unwrap().value.data_mut()[0] = -0.0;
        net.fix_eps(0.37).unwrap();
        let ckpt = Checkpoint::from_network(&net, 9, 3);
        let mut bytes = Vec::new();
        ckpt.to_writer(&mut bytes).unwrap();
        let back = Checkpoint::from_reader(bytes.as_slice()).unwrap();
        assert_eq!(back.manifest, ckpt.manifest);
        for (a, b) in back.params.iter().zip(ckpt.params.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.trainable, b.trainable);
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        let mut again = Vec::new();
        back.to_writer(&mut again).unwrap();
        assert_eq!(bytes, again);
        assert_eq!(back.into_network().unwrap(), net);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let net = Network::new(NetworkSpec::new(2, 2, NeuronKind::Lif), 0).unwrap();
        let mut bytes = Vec::new();
        Checkpoint::from_network(&net, 0, 0)
            .to_writer(&mut bytes)
            .unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Checkpoint::from_reader(bad.as_slice()),
            Err(Error::Format(_))
        ));
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(Checkpoint::from_reader(cut), Err(Error::Io(_))));
    }
}
