//! Binary density-matrix dumps.
//!
//! Layout, little-endian: magic `SPDSNAP\0`, u32 version, u32 n, u64 count,
//! then per snapshot an f64 time in fs followed by n² (re, im) f64 pairs in
//! row-major order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

const MAGIC: &[u8; 8] = b"SPDSNAP\0";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t_fs: f64,
    pub rho: CMatrix,
}

pub fn write_snapshots(path: impl AsRef<Path>, snapshots: &[Snapshot]) -> Result<()> {
    let path = path.as_ref();
    let n = snapshots.first().map_or(0, |s| s.rho.nrows());
    if let Some(s) = snapshots.iter().find(|s| s.rho.nrows() != n || s.rho.ncols() != n) {
        return Err(Error::Dimension {
            what: format!("snapshot at {} fs", s.t_fs),
            got: s.rho.nrows(),
            expected: n,
        });
    }
    let mut buf = Vec::with_capacity(24 + snapshots.len() * (8 + 16 * n * n));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(snapshots.len() as u64).to_le_bytes());
    for s in snapshots {
        buf.extend_from_slice(&s.t_fs.to_le_bytes());
        for a in 0..n {
            for b in 0..n {
                let z = s.rho[(a, b)];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_snapshots(path: impl AsRef<Path>) -> Result<Vec<Snapshot>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        field: "snapshot".into(),
        msg: msg.into(),
    };
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(bad("not a snapshot file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(8) != VERSION {
        return Err(bad(&format!("unsupported version {}", u32_at(8))));
    }
    let n = u32_at(12) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let record = 8 + 16 * n * n;
    if bytes.len() != 24 + count * record {
        return Err(bad("truncated or oversized payload"));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    Ok((0..count)
        .map(|k| {
            let base = 24 + k * record;
            Snapshot {
                t_fs: f64_at(base),
                rho: CMatrix::from_fn(n, n, |a, b| {
                    let o = base + 8 + 16 * (a * n + b);
                    C64::new(f64_at(o), f64_at(o + 8))
                }),
            }
        })
        .collect())
}
