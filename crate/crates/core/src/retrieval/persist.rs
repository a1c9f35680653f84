//! Binary index files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      "SLEDIDX1"
//! config     window u32, block_size u32, overlap f64, n_scales u32,
//!            scales f64 * n_scales, epsilon_scale f64, strict_extrema u8
//! count      u64
//! entries    id u64, label_len u32, label UTF-8,
//!            per scale 210 f64 (upper triangle of the 20x20 matrix, row-major)
//! crc        CRC-32C of every preceding byte, u32
//! ```

use std::io::Write;
use std::path::Path;

use super::{DescriptorIndex, IndexEntry};
use crate::descriptor::{CovarianceDescriptor, MultiscaleDescriptor, PipelineConfig, SLED_DIM};
use crate::metric::SpdMatrix;
use crate::{Error, Result};

pub const INDEX_MAGIC: &[u8; 8] = b"SLEDIDX1";
const TRIANGLE_LEN: usize = SLED_DIM * (SLED_DIM + 1) / 2;

/// Serializes an index into its file representation.
pub fn write_index(index: &DescriptorIndex) -> Result<Vec<u8>> {
    let cfg = index.config();
    let mut buf = Vec::new();
    buf.extend_from_slice(INDEX_MAGIC);
    buf.extend_from_slice(&to_u32(cfg.window, "window")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(cfg.block_size, "block size")?.to_le_bytes());
    buf.extend_from_slice(&cfg.overlap.to_le_bytes());
    buf.extend_from_slice(&to_u32(cfg.scales.len(), "scale count")?.to_le_bytes());
    for s in &cfg.scales {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    buf.extend_from_slice(&cfg.epsilon_scale.to_le_bytes());
    buf.push(u8::from(cfg.strict_extrema));

    buf.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for entry in index.entries() {
        buf.extend_from_slice(&entry.id.to_le_bytes());
        buf.extend_from_slice(&to_u32(entry.label.len(), "label length")?.to_le_bytes());
        buf.extend_from_slice(entry.label.as_bytes());
        for m in &entry.descriptor.matrices {
            if m.matrix().dim() != SLED_DIM {
                return Err(Error::DimensionMismatch {
                    left: m.matrix().dim(),
                    right: SLED_DIM,
                });
            }
            for v in m.matrix().upper_triangle() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let crc = crc32c::crc32c(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

pub fn save_index(index: &DescriptorIndex, path: impl AsRef<Path>) -> Result<()> {
    let bytes = write_index(index)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<DescriptorIndex> {
    read_index(&std::fs::read(path)?)
}

/// Parses an index file.
///
/// Errors are distinguished as: wrong magic ([`Error::Format`]), other format
/// version ([`Error::VersionMismatch`]), missing bytes ([`Error::Truncated`])
/// and damaged content ([`Error::ChecksumMismatch`]).
pub fn read_index(bytes: &[u8]) -> Result<DescriptorIndex> {
    let prefix = &INDEX_MAGIC[..7];
    if bytes.len() < 8 {
        return if INDEX_MAGIC.starts_with(bytes) {
            Err(Error::Truncated)
        } else {
            Err(Error::Format("not an index file (bad magic)".into()))
        };
    }
    if &bytes[..7] != prefix {
        return Err(Error::Format("not an index file (bad magic)".into()));
    }
    if bytes[7] != INDEX_MAGIC[7] {
        return Err(Error::VersionMismatch { found: bytes[7] });
    }
    if bytes.len() < 12 {
        return Err(Error::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4-byte tail"));
    let computed = crc32c::crc32c(body);
    if stored == computed {
        return match parse_body(body) {
            Err(Error::Truncated) => Err(Error::Format("entry data ends early".into())),
            other => other,
        };
    }
    // Damaged file: a body that is structurally short was cut off, anything
    // else is corruption.
    match parse_body(body) {
        Err(Error::Truncated) => Err(Error::Truncated),
        _ => Err(Error::ChecksumMismatch { stored, computed }),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice of length N"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn parse_body(body: &[u8]) -> Result<DescriptorIndex> {
    let mut r = Reader { bytes: body, pos: 8 };
    let window = r.u32()? as usize;
    let block_size = r.u32()? as usize;
    let overlap = r.f64()?;
    let n_scales = r.u32()? as usize;
    if n_scales > r.remaining() / 8 {
        return Err(Error::Truncated);
    }
    let scales = (0..n_scales).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let epsilon_scale = r.f64()?;
    let strict_extrema = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("invalid strict_extrema flag {other}"))),
    };
    let config = PipelineConfig {
        window,
        block_size,
        overlap,
        scales,
        epsilon_scale,
        strict_extrema,
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("stored configuration is invalid: {e}")))?;

    let count = r.u64()?;
    let min_entry = 12 + n_scales * TRIANGLE_LEN * 8;
    if count > (r.remaining() / min_entry) as u64 {
        return Err(Error::Truncated);
    }
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let id = r.u64()?;
        let label_len = r.u32()? as usize;
        let label = std::str::from_utf8(r.take(label_len)?)
            .map_err(|_| Error::Format(format!("label of entry {id} is not UTF-8")))?
            .to_string();
        let mut matrices = Vec::with_capacity(n_scales);
        for _ in 0..n_scales {
            let tri = (0..TRIANGLE_LEN).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let spd = SpdMatrix::from_upper_triangle(SLED_DIM, &tri)
                .map_err(|e| Error::Format(format!("matrix of entry {id}: {e}")))?;
            matrices.push(CovarianceDescriptor::from_matrix(spd));
        }
        entries.push(IndexEntry {
            id,
            label,
            descriptor: MultiscaleDescriptor {
                scales: config.scales.clone(),
                matrices,
            },
        });
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} unexpected trailing bytes", r.remaining())));
    }
    DescriptorIndex::new(config, entries).map_err(|e| Error::Format(e.to_string()))
}
