//! Binary field files.
//!
//! Layout, all little-endian: magic `PWF2`, version `u32`, channel count
//! `u32`, rank `u32`, one `u32` extent per axis (x first), then the samples
//! as `f64`, channel after channel, each channel with x varying fastest.

use std::fs;
use std::path::Path;

use crate::energy::EnergyField;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, WaveField};

const MAGIC: &[u8; 4] = b"PWF2";
const VERSION: u32 = 1;

/// Multi-channel array as stored in a field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub channels: usize,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl FieldFile {
    pub fn new(channels: usize, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected = channels * shape.iter().product::<usize>();
        if channels == 0 || shape.is_empty() || expected != data.len() {
            return Err(Error::Shape(format!(
                "{} samples do not fill {channels} channel(s) of shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self { channels, shape, data })
    }

    pub fn channel_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let len = self.channel_len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn from_scalars(fields: &[&ScalarField]) -> Result<Self> {
        let grid = fields.first().ok_or_else(|| Error::Shape("no channels".into()))?.grid();
        let mut data = Vec::with_capacity(grid.len() * fields.len());
        for f in fields {
            if f.grid() != grid {
                return Err(Error::Shape("channels live on different grids".into()));
            }
            data.extend_from_slice(f.values());
        }
        Self::new(fields.len(), vec![grid.n(); grid.dims()], data)
    }

    pub fn from_wave(w: &WaveField) -> Result<Self> {
        Self::from_scalars(&[&w.u, &w.v])
    }

    pub fn from_energy(e: &EnergyField) -> Result<Self> {
        Self::from_scalars(&e.channels())
    }

    fn grid(&self) -> Result<GridSpec> {
        let n = self.shape[0];
        if self.shape.iter().any(|&m| m != n) {
            return Err(Error::Shape(format!("shape {:?} is not a square grid", self.shape)));
        }
        GridSpec::new(n, self.shape.len())
    }

    pub fn scalars(&self) -> Result<Vec<ScalarField>> {
        let grid = self.grid()?;
        (0..self.channels).map(|c| ScalarField::from_vec(grid, self.channel(c).to_vec())).collect()
    }

    fn expect_channels(&self, n: usize, what: &str) -> Result<Vec<ScalarField>> {
        if self.channels != n {
            return Err(Error::Format(format!("{what} needs {n} channel(s), file has {}", self.channels)));
        }
        self.scalars()
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        Ok(self.expect_channels(1, "scalar field")?.remove(0))
    }

    pub fn to_wave(&self) -> Result<WaveField> {
        let mut ch = self.expect_channels(2, "wave field")?;
        let v = ch.pop().unwrap();
        WaveField::new(ch.pop().unwrap(), v)
    }

    pub fn to_energy(&self) -> Result<EnergyField> {
        let mut ch = self.expect_channels(3, "energy field")?;
        let p = ch.pop().unwrap();
        let qy = ch.pop().unwrap();
        EnergyField::new(ch.pop().unwrap(), qy, p)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.shape.len() + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &n in &self.shape {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a field file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported field file version {version}")));
        }
        let channels = r.u32()? as usize;
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::Format(format!("implausible rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(channels, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::Format("header extents overflow".into()))?;
        if r.remaining() != count * 8 {
            return Err(Error::Format(format!("payload is {} bytes, header promises {}", r.remaining(), count * 8)));
        }
        let data = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Self::new(channels, shape, data).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn write_field_file(path: impl AsRef<Path>, f: &FieldFile) -> Result<()> {
    fs::write(path, f.to_bytes())?;
    Ok(())
}

pub fn read_field_file(path: impl AsRef<Path>) -> Result<FieldFile> {
    FieldFile::from_bytes(&fs::read(path)?)
}

/// Little-endian cursor shared by the binary formats.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}
