//! On-disk embedding cache, one file per week.
//!
//! Fixed layout, all integers little-endian:
//!   bytes 0..8   magic `CTSEMB01`
//!   bytes 8..12  format version (u32, currently 1)
//!   bytes 12..20 node count N (u64)
//!   bytes 20..28 dimension D (u64)
//!   bytes 28..36 seed used for the week (u64)
//!   then N * D IEEE-754 doubles, row-major (node-major), little-endian.
//!
//! Round-trips are bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};

pub const MAGIC: [u8; 8] = *b"CTSEMB01";
pub const VERSION: u32 = 1;

pub struct CachedWeek {
    pub nodes: usize,
    pub dim: usize,
    pub seed: u64,
    pub data: Vec<f64>,
}

pub fn write_cache<W: Write>(
    mut writer: W,
    nodes: usize,
    dim: usize,
    seed: u64,
    data: &[f64],
) -> std::io::Result<()> {
    assert_eq!(data.len(), nodes * dim);
    writer.write_all(&MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(nodes as u64).to_le_bytes())?;
    writer.write_all(&(dim as u64).to_le_bytes())?;
    writer.write_all(&seed.to_le_bytes())?;
    for value in data {
        writer.write_all(&value.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_cache<R: Read>(mut reader: R) -> Result<CachedWeek> {
    let fail = |msg: &str| CoreError::CacheFormat(msg.to_string());
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic).map_err(|_| fail("truncated header"))?;
    if magic != MAGIC {
        return Err(fail("bad magic"));
    }
    let mut buf4 = [0u8; 4];
    reader.read_exact(&mut buf4).map_err(|_| fail("truncated header"))?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(CoreError::CacheFormat(format!(
            "unsupported version {version}"
        )));
    }
    let mut buf8 = [0u8; 8];
    let mut read_u64 = |reader: &mut R| -> Result<u64> {
        reader.read_exact(&mut buf8).map_err(|_| fail("truncated header"))?;
        Ok(u64::from_le_bytes(buf8))
    };
    let nodes = read_u64(&mut reader)? as usize;
    let dim = read_u64(&mut reader)? as usize;
    let seed = read_u64(&mut reader)?;

    let mut data = vec![0.0f64; nodes * dim];
    let mut value = [0u8; 8];
    for slot in data.iter_mut() {
        reader
            .read_exact(&mut value)
            .map_err(|_| fail("truncated payload"))?;
        *slot = f64::from_le_bytes(value);
    }
    // Trailing bytes indicate a layout mismatch.
    let mut probe = [0u8; 1];
    if reader.read(&mut probe).map_err(|_| fail("read error"))? != 0 {
        return Err(fail("trailing bytes after payload"));
    }
    Ok(CachedWeek {
        nodes,
        dim,
        seed,
        data,
    })
}

pub fn write_cache_file(
    path: impl AsRef<Path>,
    nodes: usize,
    dim: usize,
    seed: u64,
    data: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| CoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_cache(std::io::BufWriter::new(file), nodes, dim, seed, data).map_err(|source| {
        CoreError::Io {
            path: path.display().to_string(),
            source,
        }
    })
}

pub fn read_cache_file(path: impl AsRef<Path>) -> Result<CachedWeek> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_cache(std::io::BufReader::new(file))
}
