//! RHRT tensor files: `"RHRT"`, version `1`, `ndim`, the dims, then the
//! payload as little-endian `f32` in row-major order. All header integers are
//! little-endian `u32`.

use std::path::Path;

use rhr_core::LatentGrid;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"RHRT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// A decoding failure at a byte offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub reason: String,
}

impl ParseError {
    fn new(offset: usize, reason: impl Into<String>) -> Self {
        Self {
            offset,
            reason: reason.into(),
        }
    }

    pub fn at(self, path: &Path) -> CliError {
        CliError::Format {
            path: path.to_path_buf(),
            offset: self.offset,
            reason: self.reason,
        }
    }
}

impl Tensor {
    pub fn from_grid(grid: &LatentGrid) -> Self {
        Self {
            dims: vec![grid.channels(), grid.height(), grid.width()],
            data: grid.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ParseError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(ParseError::new(0, "missing RHRT magic"));
        }
        let version = read_u32(bytes, 4)?;
        if version != VERSION {
            return Err(ParseError::new(4, format!("unsupported version {version}")));
        }
        let ndim = read_u32(bytes, 8)? as usize;
        let mut dims = Vec::with_capacity(ndim.min(16));
        let mut count: usize = 1;
        for i in 0..ndim {
            let offset = 12 + 4 * i;
            let d = read_u32(bytes, offset)? as usize;
            count = count
                .checked_mul(d)
                .ok_or_else(|| ParseError::new(offset, "element count overflows"))?;
            dims.push(d);
        }
        let start = 12 + 4 * ndim;
        let expected = count
            .checked_mul(4)
            .and_then(|n| n.checked_add(start))
            .ok_or_else(|| ParseError::new(start, "payload size overflows"))?;
        if bytes.len() < expected {
            return Err(ParseError::new(
                bytes.len(),
                format!("payload truncated, expected {expected} bytes in total"),
            ));
        }
        if bytes.len() > expected {
            return Err(ParseError::new(expected, "trailing bytes after payload"));
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let offset = start + 4 * i;
            let v = f32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("four bytes"));
            if !v.is_finite() {
                return Err(ParseError::new(offset, format!("non-finite value {v}")));
            }
            data.push(v);
        }
        Ok(Self { dims, data })
    }

    /// Interprets a 3-d tensor as a grid.
    pub fn into_grid(self) -> Result<LatentGrid, ParseError> {
        if self.dims.len() != 3 {
            return Err(ParseError::new(
                8,
                format!("expected ndim 3, found {}", self.dims.len()),
            ));
        }
        let (c, h, w) = (self.dims[0], self.dims[1], self.dims[2]);
        LatentGrid::new(c, h, w, self.data.into_iter().map(f64::from).collect())
            .map_err(|e| ParseError::new(12, e.to_string()))
    }

    /// Interprets a 4-d tensor `N x C x H x W` as `N` grids.
    pub fn into_grids(self) -> Result<Vec<LatentGrid>, ParseError> {
        if self.dims.len() != 4 {
            return Err(ParseError::new(
                8,
                format!("expected ndim 4, found {}", self.dims.len()),
            ));
        }
        let (c, h, w) = (self.dims[1], self.dims[2], self.dims[3]);
        let per = c * h * w;
        if per == 0 {
            return Err(ParseError::new(16, "empty point shape"));
        }
        self.data
            .chunks(per)
            .map(|chunk| {
                LatentGrid::new(c, h, w, chunk.iter().copied().map(f64::from).collect())
                    .map_err(|e| ParseError::new(12, e.to_string()))
            })
            .collect()
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, ParseError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("four bytes")))
        .ok_or_else(|| ParseError::new(offset, "unexpected end of header"))
}

pub fn read(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Tensor::decode(&bytes).map_err(|e| e.at(path))
}

pub fn read_grid(path: &Path) -> Result<LatentGrid> {
    read(path)?.into_grid().map_err(|e| e.at(path))
}

pub fn write(path: &Path, tensor: &Tensor) -> Result<()> {
    std::fs::write(path, tensor.encode()).map_err(|e| CliError::io(path, e))
}

pub fn write_grid(path: &Path, grid: &LatentGrid) -> Result<()> {
    write(path, &Tensor::from_grid(grid))
}
