//! IDX files as distributed for MNIST: big-endian header, unsigned bytes,
//! optionally gzip-compressed.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use flate2::read::GzDecoder;

use super::Dataset;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxData {
    Images {
        rows: usize,
        cols: usize,
        /// `count · rows · cols` bytes, image-major.
        pixels: Vec<u8>,
    },
    Labels(Vec<u8>),
}

/// Parse an IDX stream. Gzip input is recognised by its `1f 8b` header.
pub fn read_idx<R: Read>(reader: R) -> Result<IdxData> {
    let mut reader = BufReader::new(reader);
    let mut head = [0u8; 2];
    reader.read_exact(&mut head)?;
    let chained = head.as_slice().chain(reader);
    if head == [0x1f, 0x8b] {
        parse(GzDecoder::new(chained))
    } else {
        parse(chained)
    }
}

fn parse<R: Read>(mut r: R) -> Result<IdxData> {
    let magic = r.read_u32::<BigEndian>()?;
    match magic {
        IMAGES_MAGIC => {
            let n = r.read_u32::<BigEndian>()? as usize;
            let rows = r.read_u32::<BigEndian>()? as usize;
            let cols = r.read_u32::<BigEndian>()? as usize;
            let pixels = read_exactly(&mut r, n * rows * cols)?;
            Ok(IdxData::Images { rows, cols, pixels })
        }
        LABELS_MAGIC => {
            let n = r.read_u32::<BigEndian>()? as usize;
            Ok(IdxData::Labels(read_exactly(&mut r, n)?))
        }
        other => Err(Error::Format(format!(
            "unrecognised IDX magic number {other}"
        ))),
    }
}

fn read_exactly<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() < len {
        return Err(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("IDX payload truncated: {} of {len} bytes", buf.len()),
        )
        .into());
    }
    Ok(buf)
}

pub fn load_idx(path: &Path) -> Result<IdxData> {
    read_idx(File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

fn find(dir: &Path, stem: &str) -> Result<std::path::PathBuf> {
    for name in [format!("{stem}.gz"), stem.to_string()] {
        let p = dir.join(name);
        if p.exists() {
            return Ok(p);
        }
    }
    Err(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{stem}[.gz] not found in {}", dir.display()),
    )
    .into())
}

/// Load `{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]` from `dir`,
/// scaling pixels by `1/255`.
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let images = load_idx(&find(
        dir,
        &format!("{}-images-idx3-ubyte", split.prefix()),
    )?)?;
    let labels = load_idx(&find(
        dir,
        &format!("{}-labels-idx1-ubyte", split.prefix()),
    )?)?;
    let (IdxData::Images { rows, cols, pixels }, IdxData::Labels(labels)) = (images, labels) else {
        return Err(Error::Format(
            "image/label files have the wrong kinds".into(),
        ));
    };
    let n = rows * cols;
    let count = if n == 0 { 0 } else { pixels.len() / n };
    let data = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let images = Tensor::new(vec![count, n], data)?;
    let labels = labels.into_iter().map(usize::from).collect();
    Dataset::new(images, labels, 10)
}
