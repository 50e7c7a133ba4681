//! On-disk cache of preimage fibers and backward trees.
//!
//! Files are named by the SHA-256 of the cache key and hold a small
//! little-endian binary format:
//!
//! ```text
//! magic "MLPC" | version u16 | level count u32
//! per level: record count u64, then records of
//!   re f64 | im f64 | flag u8 (0 finite, 1 infinity) | multiplicity u32 | parent u32
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sphere::SpherePoint;

const MAGIC: &[u8; 4] = b"MLPC";
const VERSION: u16 = 1;
const RECORD_LEN: usize = 8 + 8 + 1 + 4 + 4;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "MOTIONLAB_CACHE";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreimageRecord {
    pub point: SpherePoint,
    pub multiplicity: u32,
    /// Index of the parent in the previous level (or of the grid node for fibers).
    pub parent: u32,
}

/// Levels of preimage records, the payload of one cache file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreimageRecords {
    pub levels: Vec<Vec<PreimageRecord>>,
}

impl PreimageRecords {
    pub fn encode(&self) -> Vec<u8> {
        let total: usize = self.levels.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(10 + 8 * self.levels.len() + RECORD_LEN * total);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.levels.len() as u32).to_le_bytes());
        for level in &self.levels {
            out.extend_from_slice(&(level.len() as u64).to_le_bytes());
            for r in level {
                let (re, im, flag) = match r.point {
                    SpherePoint::Finite(z) => (z.re, z.im, 0u8),
                    SpherePoint::Infinity => (0.0, 0.0, 1u8),
                };
                out.extend_from_slice(&re.to_le_bytes());
                out.extend_from_slice(&im.to_le_bytes());
                out.push(flag);
                out.extend_from_slice(&r.multiplicity.to_le_bytes());
                out.extend_from_slice(&r.parent.to_le_bytes());
            }
        }
        out
    }

    /// Decodes and validates a cache file. Rejects truncated or trailing data,
    /// unknown flags, non-finite coordinates, zero multiplicities and parent
    /// indices that do not refer to the previous level.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let version = u16::from_le_bytes(cur.array()?);
        if version != VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        let nlevels = u32::from_le_bytes(cur.array()?) as usize;
        let mut levels: Vec<Vec<PreimageRecord>> = Vec::new();
        for li in 0..nlevels {
            let count = u64::from_le_bytes(cur.array()?);
            let remaining = (bytes.len() - cur.pos) as u64;
            if count.checked_mul(RECORD_LEN as u64).is_none_or(|need| need > remaining) {
                return Err(Error::Cache(format!("level {li} truncated")));
            }
            let prev_len = if li == 0 { None } else { Some(levels[li - 1].len()) };
            let mut level = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let re = f64::from_le_bytes(cur.array()?);
                let im = f64::from_le_bytes(cur.array()?);
                let flag = cur.take(1)?[0];
                let multiplicity = u32::from_le_bytes(cur.array()?);
                let parent = u32::from_le_bytes(cur.array()?);
                let point = match flag {
                    0 if re.is_finite() && im.is_finite() => SpherePoint::from_re_im(re, im),
                    0 => return Err(Error::Cache("non-finite coordinate".into())),
                    1 => SpherePoint::Infinity,
                    f => return Err(Error::Cache(format!("unknown point flag {f}"))),
                };
                if multiplicity == 0 {
                    return Err(Error::Cache("zero multiplicity".into()));
                }
                if let Some(n) = prev_len {
                    if parent as usize >= n {
                        return Err(Error::Cache(format!("parent {parent} out of range {n}")));
                    }
                }
                level.push(PreimageRecord {
                    point,
                    multiplicity,
                    parent,
                });
            }
            levels.push(level);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Cache("trailing bytes".into()));
        }
        Ok(PreimageRecords { levels })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        match end {
            Some(e) => {
                let s = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(Error::Cache("unexpected end of data".into())),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

/// Hex SHA-256 of `(map JSON, grid resolution, depth, extra)`.
pub fn cache_key(map_json: &str, resolution: usize, depth: usize, extra: &str) -> String {
    let mut h = Sha256::new();
    h.update(map_json.as_bytes());
    h.update(b"\0");
    h.update((resolution as u64).to_le_bytes());
    h.update((depth as u64).to_le_bytes());
    h.update(extra.as_bytes());
    hex::encode(h.finalize())
}

/// A directory of cache files. A cache without a directory never hits.
#[derive(Clone, Debug, Default)]
pub struct PreimageCache {
    dir: Option<PathBuf>,
}

impl PreimageCache {
    pub fn disabled() -> Self {
        PreimageCache { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        PreimageCache { dir: Some(dir.into()) }
    }

    /// Uses `$MOTIONLAB_CACHE` when set, otherwise `fallback`.
    pub fn from_env_or(fallback: Option<PathBuf>) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(v) if !v.is_empty() => PreimageCache::at(PathBuf::from(v)),
            _ => PreimageCache { dir: fallback },
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.mlpc")))
    }

    /// Loads an entry; unreadable or corrupt files count as misses.
    pub fn load(&self, key: &str) -> Option<PreimageRecords> {
        let path = self.path(key)?;
        let bytes = fs::read(&path).ok()?;
        match PreimageRecords::decode(&bytes) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("ignoring corrupt cache file {}: {e}", path.display());
                None
            }
        }
    }

    pub fn store(&self, key: &str, records: &PreimageRecords) -> Result<()> {
        let Some(path) = self.path(key) else {
            return Ok(());
        };
        let dir = path.parent().expect("cache file has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&records.encode())?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Returns the cached entry or computes and stores it.
    pub fn get_or_compute<F>(&self, key: &str, compute: F) -> Result<PreimageRecords>
    where
        F: FnOnce() -> Result<PreimageRecords>,
    {
        if let Some(r) = self.load(key) {
            return Ok(r);
        }
        let r = compute()?;
        self.store(key, &r)?;
        Ok(r)
    }
}
