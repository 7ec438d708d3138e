//! On-disk formats: the `CTC2DT` tensor container (binary, with a JSON
//! text alternative for small tensors), the `CTC2DD` dataset container,
//! JSON report/config helpers, and binary PGM encoding for map exports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::Label;
use crate::error::CtcError;
use crate::synth::{SynthConfig, SynthInstance};

const TENSOR_MAGIC: &[u8; 6] = b"CTC2DT";
const DATASET_MAGIC: &[u8; 6] = b"CTC2DD";
const FORMAT_VERSION: u16 = 1;
const ELEM_F32: u8 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad magic bytes (expected {expected})")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    BadVersion(u16),
    #[error("unsupported element type tag {0}")]
    BadElemType(u8),
    #[error("tensor rank {rank} not supported by the JSON form (max 3)")]
    JsonRank { rank: usize },
    #[error("{what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: String,
        actual: String,
    },
    #[error(transparent)]
    Domain(#[from] CtcError),
}

/// A dense row-major float32 tensor with explicit dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, IoError> {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(IoError::Shape {
                what: "tensor payload",
                expected: format!("{expected} elements"),
                actual: format!("{}", data.len()),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_f64(dims: Vec<usize>, data: &[f64]) -> Result<Self, IoError> {
        Self::new(dims, data.iter().map(|&v| v as f32).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Writes binary `CTC2DT` unless the path ends in `.json`.
    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut out = BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|e| e == "json") {
            self.write_json(&mut out)
        } else {
            self.write_binary(&mut out)
        }
    }

    /// Reads either form, sniffing the leading byte.
    pub fn read(path: &Path) -> Result<Self, IoError> {
        let mut input = BufReader::new(File::open(path)?);
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.first() == Some(&b'{') {
            Self::from_json_bytes(&bytes)
        } else {
            Self::from_binary_bytes(&bytes)
        }
    }

    pub fn write_binary(&self, out: &mut impl Write) -> Result<(), IoError> {
        out.write_all(TENSOR_MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&[ELEM_F32, self.rank() as u8])?;
        for &d in &self.dims {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn from_binary_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(6)? != TENSOR_MAGIC {
            return Err(IoError::BadMagic { expected: "CTC2DT" });
        }
        let version = u16::from_le_bytes(cursor.take(2)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(IoError::BadVersion(version));
        }
        let elem = cursor.take(1)?[0];
        if elem != ELEM_F32 {
            return Err(IoError::BadElemType(elem));
        }
        let rank = cursor.take(1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize);
        }
        let count: usize = dims.iter().product();
        let payload = cursor.take(count * 4)?;
        if cursor.pos != bytes.len() {
            return Err(IoError::Shape {
                what: "tensor file",
                expected: format!("{} bytes", cursor.pos),
                actual: format!("{}", bytes.len()),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn write_json(&self, out: &mut impl Write) -> Result<(), IoError> {
        if self.rank() > 3 {
            return Err(IoError::JsonRank { rank: self.rank() });
        }
        serde_json::to_writer(
            out,
            &TensorJson { dims: self.dims.clone(), data: self.data.clone() },
        )?;
        Ok(())
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        let parsed: TensorJson = serde_json::from_slice(bytes)?;
        if parsed.dims.len() > 3 {
            return Err(IoError::JsonRank { rank: parsed.dims.len() });
        }
        Self::new(parsed.dims, parsed.data)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        if self.pos + n > self.bytes.len() {
            return Err(IoError::Shape {
                what: "tensor file",
                expected: format!("at least {} bytes", self.pos + n),
                actual: format!("{}", self.bytes.len()),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }
}

/// Dataset manifest: alphabet, shapes, and the generator config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub alphabet: String,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub feature_channels: usize,
    pub config: SynthConfig,
}

/// Writes `CTC2DD`: manifest JSON followed by fixed-layout records
/// (label classes u16, baseline u16 per column, features f32).
pub fn write_dataset(
    path: &Path,
    config: &SynthConfig,
    instances: &[SynthInstance],
) -> Result<(), IoError> {
    let manifest = DatasetManifest {
        alphabet: (1..config.num_classes)
            .map(|c| config.alphabet().symbol(c).unwrap())
            .collect(),
        count: instances.len(),
        height: config.height,
        width: config.width,
        feature_channels: config.feature_channels(),
        config: config.clone(),
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(DATASET_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(manifest_bytes.len() as u32).to_le_bytes())?;
    out.write_all(&manifest_bytes)?;
    for inst in instances {
        out.write_all(&(inst.label.len() as u16).to_le_bytes())?;
        for &c in inst.label.classes() {
            out.write_all(&(c as u16).to_le_bytes())?;
        }
        for &h in &inst.baseline {
            out.write_all(&(h as u16).to_le_bytes())?;
        }
        for &v in &inst.features {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(DatasetManifest, Vec<SynthInstance>), IoError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let mut cursor = Cursor { bytes: &bytes, pos: 0 };
    if cursor.take(6)? != DATASET_MAGIC {
        return Err(IoError::BadMagic { expected: "CTC2DD" });
    }
    let version = u16::from_le_bytes(cursor.take(2)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(IoError::BadVersion(version));
    }
    let manifest_len = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
    let manifest: DatasetManifest = serde_json::from_slice(cursor.take(manifest_len)?)?;

    let feature_len = manifest.height * manifest.width * manifest.feature_channels;
    let num_classes = manifest.config.num_classes;
    let mut instances = Vec::with_capacity(manifest.count);
    for _ in 0..manifest.count {
        let label_len = u16::from_le_bytes(cursor.take(2)?.try_into().unwrap()) as usize;
        let mut classes = Vec::with_capacity(label_len);
        for _ in 0..label_len {
            let c = u16::from_le_bytes(cursor.take(2)?.try_into().unwrap()) as usize;
            if c == 0 || c >= num_classes {
                return Err(IoError::Domain(CtcError::ClassOutOfRange { class: c, num_classes }));
            }
            classes.push(c);
        }
        let mut baseline = Vec::with_capacity(manifest.width);
        for _ in 0..manifest.width {
            baseline.push(u16::from_le_bytes(cursor.take(2)?.try_into().unwrap()) as usize);
        }
        let mut features = Vec::with_capacity(feature_len);
        for chunk in cursor.take(feature_len * 4)?.chunks_exact(4) {
            features.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
        }
        instances.push(SynthInstance {
            features,
            label: Label::new(classes).map_err(IoError::Domain)?,
            baseline,
        });
    }
    Ok((manifest, instances))
}

/// Pretty-printed JSON for configs, reports, and checkpoints.
pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Binary PGM (P5, maxval 255), rows top to bottom.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel buffer mismatch");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Linear quantization of probabilities: 255 means probability 1.
pub fn quantize_prob(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}
