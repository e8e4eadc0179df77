//! The `MCBM` binary tensor format.
//!
//! Layout: magic `MCBM`, version byte, dtype byte, ndim byte, `ndim` dims as
//! little-endian u32, then the row-major little-endian payload. Dtypes are
//! 0 = f32, 1 = u8 and 2 = f64 (used for gradients).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{LabelGrid, MulticlassPrediction};

pub const MAGIC: &[u8; 4] = b"MCBM";
pub const VERSION: u8 = 1;
const HEADER: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
    F64(Vec<f64>),
}

impl TensorData {
    fn dtype(&self) -> u8 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::U8(_) => 1,
            TensorData::F64(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

fn dtype_size(dtype: u8) -> Result<usize> {
    match dtype {
        0 => Ok(4),
        1 => Ok(1),
        2 => Ok(8),
        d => Err(Error::Format(format!("unknown dtype {d}"))),
    }
}

impl Tensor {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let count: usize = self.dims.iter().product();
        if count != self.data.len() {
            return Err(Error::LengthMismatch {
                expected: count,
                actual: self.data.len(),
            });
        }
        if !(2..=3).contains(&self.dims.len()) {
            return Err(Error::Format(format!("ndim must be 2 or 3, got {}", self.dims.len())));
        }
        let mut out = Vec::with_capacity(HEADER + 4 * self.dims.len() + count * dtype_size(self.data.dtype())?);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[VERSION, self.data.dtype(), self.dims.len() as u8]);
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Tensor> {
        if bytes.len() < HEADER {
            return Err(Error::Truncated {
                expected: HEADER,
                actual: bytes.len(),
            });
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, expected MCBM".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", bytes[4])));
        }
        let (dtype, ndim) = (bytes[5], bytes[6] as usize);
        let size = dtype_size(dtype)?;
        if !(2..=3).contains(&ndim) {
            return Err(Error::Format(format!("ndim must be 2 or 3, got {ndim}")));
        }
        let header = HEADER + 4 * ndim;
        if bytes.len() < header {
            return Err(Error::Truncated {
                expected: header,
                actual: bytes.len(),
            });
        }
        let dims: Vec<usize> = bytes[HEADER..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let expected = dims
            .iter()
            .try_fold(size, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_add(header))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        if bytes.len() != expected {
            return Err(Error::Truncated {
                expected,
                actual: bytes.len(),
            });
        }
        let payload = &bytes[header..];
        let data = match dtype {
            0 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            1 => TensorData::U8(payload.to_vec()),
            _ => TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        let finite = match &data {
            TensorData::F32(v) => v.iter().position(|x| !x.is_finite()).map(|i| (i, v[i] as f64)),
            TensorData::F64(v) => v.iter().position(|x| !x.is_finite()).map(|i| (i, v[i])),
            TensorData::U8(_) => None,
        };
        if let Some((index, value)) = finite {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Tensor { dims, data })
    }
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    Tensor::decode(&fs::read(path)?)
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    Ok(fs::write(path, tensor.encode()?)?)
}

pub fn prediction_from_tensor(t: Tensor) -> Result<MulticlassPrediction> {
    if t.dims.len() != 3 {
        return Err(Error::Format("predictions must be 3D (classes, height, width)".into()));
    }
    let TensorData::F32(v) = t.data else {
        return Err(Error::Format("predictions must be 32-bit float".into()));
    };
    MulticlassPrediction::new(t.dims[0], t.dims[2], t.dims[1], v.into_iter().map(f64::from).collect())
}

pub fn labels_from_tensor(t: Tensor) -> Result<LabelGrid> {
    let TensorData::U8(v) = t.data else {
        return Err(Error::Format("labels must be 8-bit unsigned".into()));
    };
    if t.dims.len() != 2 {
        return Err(Error::Format("labels must be 2D".into()));
    }
    LabelGrid::new(t.dims[1], t.dims[0], v.into_iter().map(u32::from).collect())
}

pub fn prediction_to_tensor(p: &MulticlassPrediction) -> Tensor {
    Tensor {
        dims: vec![p.num_classes(), p.height(), p.width()],
        data: TensorData::F32(p.values().iter().map(|&v| v as f32).collect()),
    }
}

pub fn labels_to_tensor(l: &LabelGrid) -> Result<Tensor> {
    let data = l
        .labels()
        .iter()
        .map(|&v| u8::try_from(v).map_err(|_| Error::Format(format!("label {v} does not fit in 8 bits"))))
        .collect::<Result<Vec<u8>>>()?;
    Ok(Tensor {
        dims: vec![l.height(), l.width()],
        data: TensorData::U8(data),
    })
}

pub fn read_prediction(path: &Path) -> Result<MulticlassPrediction> {
    prediction_from_tensor(read_tensor(path)?)
}

pub fn read_labels(path: &Path) -> Result<LabelGrid> {
    labels_from_tensor(read_tensor(path)?)
}

pub fn write_prediction(path: &Path, p: &MulticlassPrediction) -> Result<()> {
    write_tensor(path, &prediction_to_tensor(p))
}

pub fn write_labels(path: &Path, l: &LabelGrid) -> Result<()> {
    write_tensor(path, &labels_to_tensor(l)?)
}

/// Gradient `(classes, height, width)` at full precision.
pub fn write_gradient(path: &Path, shape: (usize, usize, usize), gradient: &[f64]) -> Result<()> {
    write_tensor(
        path,
        &Tensor {
            dims: vec![shape.0, shape.2, shape.1],
            data: TensorData::F64(gradient.to_vec()),
        },
    )
}
