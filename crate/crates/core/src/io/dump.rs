//! Binary field dumps.
//!
//! Little-endian layout:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `PISOFLD\0` |
//! | 4 | format version (u32, currently 1) |
//! | 1 | precision tag: 4 = f32, 8 = f64 |
//! | 3 | zero padding |
//! | 8 | simulation time (f64) |
//! | 4 | block count `B` (u32) |
//! | 16·B | per block: resolution x, y, z and component count (u32 each) |
//! | … | payload: per block, cells with x fastest, components innermost |
//! | 4 | CRC-32 of every preceding byte |

use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::mesh::Domain;
use crate::piso::{FlowState, Precision};

pub const MAGIC: [u8; 8] = *b"PISOFLD\0";
pub const VERSION: u32 = 1;

/// Payload values in their stored precision.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Single(Vec<f32>),
    Double(Vec<f64>),
}

impl FieldData {
    pub fn len(&self) -> usize {
        match self {
            FieldData::Single(v) => v.len(),
            FieldData::Double(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn precision(&self) -> Precision {
        match self {
            FieldData::Single(_) => Precision::Single,
            FieldData::Double(_) => Precision::Double,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            FieldData::Single(v) => v[i] as f64,
            FieldData::Double(v) => v[i],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockField {
    pub resolution: [u32; 3],
    pub components: u32,
    pub data: FieldData,
}

impl BlockField {
    pub fn cells(&self) -> usize {
        self.resolution.iter().map(|&n| n as usize).product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub time: f64,
    pub blocks: Vec<BlockField>,
}

impl FieldDump {
    /// Velocity components `0..dim` followed by pressure, stored in `precision`.
    pub fn from_state(d: &Domain, state: &FlowState, precision: Precision) -> Result<Self> {
        let dim = d.dim();
        if state.velocity.len() != d.n_cells() || state.pressure.len() != d.n_cells() {
            return Err(Error::Dump("state shape does not match the domain".into()));
        }
        let blocks = d
            .blocks()
            .iter()
            .enumerate()
            .map(|(b, block)| {
                let range = d.block_range(b);
                let values = range.flat_map(|p| state.velocity[p][..dim].iter().copied().chain(std::iter::once(state.pressure[p])));
                let data = match precision {
                    Precision::Single => FieldData::Single(values.map(|x| x as f32).collect()),
                    Precision::Double => FieldData::Double(values.collect()),
                };
                let r = block.spec.resolution;
                BlockField { resolution: [r[0] as u32, r[1] as u32, r[2] as u32], components: dim as u32 + 1, data }
            })
            .collect();
        Ok(FieldDump { time: state.time, blocks })
    }

    pub fn precision(&self) -> Option<Precision> {
        self.blocks.first().map(|b| b.data.precision())
    }

    /// Velocity and pressure in global cell order; checks the block layout against `d`.
    pub fn to_fields(&self, d: &Domain) -> Result<(Vec<Vec3>, Vec<f64>)> {
        let dim = d.dim();
        if self.blocks.len() != d.blocks().len() {
            return Err(Error::Dump(format!("dump has {} blocks, domain has {}", self.blocks.len(), d.blocks().len())));
        }
        let mut velocity = Vec::with_capacity(d.n_cells());
        let mut pressure = Vec::with_capacity(d.n_cells());
        for (b, (field, block)) in self.blocks.iter().zip(d.blocks()).enumerate() {
            let r = block.spec.resolution;
            if field.resolution != [r[0] as u32, r[1] as u32, r[2] as u32] || field.components as usize != dim + 1 {
                return Err(Error::Dump(format!("block {b} layout does not match the domain")));
            }
            let c = dim + 1;
            for cell in 0..field.cells() {
                let mut v = [0.0; 3];
                for (i, x) in v.iter_mut().enumerate().take(dim) {
                    *x = field.data.get(cell * c + i);
                }
                velocity.push(v);
                pressure.push(field.data.get(cell * c + dim));
            }
        }
        Ok((velocity, pressure))
    }

    fn validate(&self) -> Result<()> {
        let Some(prec) = self.precision() else {
            return Err(Error::Dump("cannot write a dump without blocks".into()));
        };
        for (b, f) in self.blocks.iter().enumerate() {
            if f.cells() == 0 || f.components == 0 {
                return Err(Error::Dump(format!("block {b} is empty")));
            }
            if f.data.precision() != prec {
                return Err(Error::Dump("all blocks must share one precision".into()));
            }
            if f.data.len() != f.cells() * f.components as usize {
                return Err(Error::Dump(format!("block {b} payload length does not match its header")));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let prec = self.precision().expect("validated");
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(if prec == Precision::Single { 4 } else { 8 });
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for f in &self.blocks {
            for r in f.resolution {
                out.extend_from_slice(&r.to_le_bytes());
            }
            out.extend_from_slice(&f.components.to_le_bytes());
        }
        for f in &self.blocks {
            match &f.data {
                FieldData::Single(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                FieldData::Double(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Dump("not a field dump (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Dump(format!("unsupported format version {version} (expected {VERSION})")));
        }
        let width = match r.take(4)?[0] {
            4 => 4,
            8 => 8,
            t => return Err(Error::Dump(format!("unknown precision tag {t}"))),
        };
        let time = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let count = r.u32()? as usize;
        let mut headers = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let resolution = [r.u32()?, r.u32()?, r.u32()?];
            headers.push((resolution, r.u32()?));
        }
        let mut blocks = Vec::with_capacity(headers.len());
        for (resolution, components) in headers {
            let n = resolution
                .iter()
                .try_fold(components as usize, |acc, &x| acc.checked_mul(x as usize))
                .and_then(|n| n.checked_mul(width))
                .ok_or_else(|| Error::Dump("block size overflows".into()))?;
            let raw = r.take(n)?;
            let data = if width == 4 {
                FieldData::Single(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
            } else {
                FieldData::Double(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
            };
            blocks.push(BlockField { resolution, components, data });
        }
        let body = r.pos;
        let stored = r.u32()?;
        if r.pos != bytes.len() {
            return Err(Error::Dump(format!("{} trailing bytes after the checksum", bytes.len() - r.pos)));
        }
        if crc32fast::hash(&bytes[..body]) != stored {
            return Err(Error::Dump("checksum mismatch".into()));
        }
        let dump = FieldDump { time, blocks };
        dump.validate()?;
        Ok(dump)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Dump(format!("truncated at byte {} (needed {n} more)", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Replaces `path` with `bytes` through a temporary file in the same directory, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_fields(path: &Path, dump: &FieldDump) -> Result<()> {
    write_atomic(path, &dump.to_bytes()?)
}

pub fn read_fields(path: &Path) -> Result<FieldDump> {
    FieldDump::from_bytes(&std::fs::read(path)?)
}
