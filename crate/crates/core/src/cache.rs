//! On-disk store of step propagators keyed by parameter fingerprint.
//!
//! Each entry is one file `<fingerprint-hex>.sbp`:
//!
//! ```text
//! offset size  field
//!      0    8  magic "SBPROP01"
//!      8    4  format version (u32)
//!     12    4  Taylor order N (u32)
//!     16    8  dim (u64)
//!     24    8  dt (f64)
//!     32    8  fingerprint (u64)
//!     40    8  last Taylor term max-norm (f64)
//!     48    8  created-at, seconds since the Unix epoch (u64)
//!     56    8  reserved, zero
//!     64  16*dim*dim  row-major (re, im) f64 pairs
//!    end    8  checksum of the payload (u64)
//! ```
//!
//! All fields are little-endian. Writers go through a temporary file in the
//! cache directory followed by an atomic rename.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fingerprint::digest64;
use crate::taylor::StepPropagator;

pub const MAGIC: &[u8; 8] = b"SBPROP01";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;
pub const EXTENSION: &str = "sbp";
/// Environment variable overriding the cache root.
pub const CACHE_DIR_ENV: &str = "SBPROP_CACHE_DIR";

#[derive(Clone, Debug, PartialEq)]
pub struct CacheEntry {
    pub fingerprint: u64,
    pub order: usize,
    pub dt: f64,
    pub last_term_norm: f64,
    pub created_at: u64,
    pub matrix: Array2<Complex64>,
}

/// Header fields of a stored entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntryInfo {
    pub fingerprint: u64,
    pub dim: usize,
    pub order: usize,
    pub dt: f64,
    pub last_term_norm: f64,
    pub created_at: u64,
}

impl CacheEntry {
    pub fn from_propagator(step: &StepPropagator<f64>) -> Self {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            fingerprint: step.fingerprint(),
            order: step.order(),
            dt: step.dt(),
            last_term_norm: step.last_term_norm(),
            created_at,
            matrix: step.matrix().clone(),
        }
    }

    pub fn into_propagator(self) -> Result<StepPropagator<f64>> {
        StepPropagator::from_parts(
            self.matrix,
            self.last_term_norm,
            self.dt,
            self.order,
            self.fingerprint,
        )
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn info(&self) -> EntryInfo {
        EntryInfo {
            fingerprint: self.fingerprint,
            dim: self.dim(),
            order: self.order,
            dt: self.dt,
            last_term_norm: self.last_term_norm,
            created_at: self.created_at,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let dim = self.dim();
        if self.matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.matrix.ncols(),
            });
        }
        let order = u32::try_from(self.order)
            .map_err(|_| Error::InvalidConfig("Taylor order exceeds u32".into()))?;
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * dim * dim + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&order.to_le_bytes());
        out.extend_from_slice(&(dim as u64).to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        out.extend_from_slice(&self.fingerprint.to_le_bytes());
        out.extend_from_slice(&self.last_term_norm.to_le_bytes());
        out.extend_from_slice(&self.created_at.to_le_bytes());
        out.extend_from_slice(&[0u8; 8]);
        debug_assert_eq!(out.len(), HEADER_LEN);
        for z in self.matrix.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        let checksum = digest64(&out[HEADER_LEN..]);
        out.extend_from_slice(&checksum.to_le_bytes());
        Ok(out)
    }

    /// Parse an encoded entry; `path` only labels errors.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let info = decode_header(bytes, path)?;
        let corrupt = |reason: String| Error::CacheCorrupt {
            path: path.to_path_buf(),
            reason,
        };
        let payload_len = info
            .dim
            .checked_mul(info.dim)
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| corrupt("dimension overflow".into()))?;
        if bytes.len() != HEADER_LEN + payload_len + 8 {
            return Err(corrupt(format!(
                "length {} does not match dim {} (expected {})",
                bytes.len(),
                info.dim,
                HEADER_LEN + payload_len + 8
            )));
        }
        let payload = &bytes[HEADER_LEN..HEADER_LEN + payload_len];
        let stored = u64_at(bytes, HEADER_LEN + payload_len);
        if digest64(payload) != stored {
            return Err(corrupt("checksum mismatch".into()));
        }
        let data: Vec<Complex64> = payload
            .chunks_exact(16)
            .map(|c| Complex64::new(f64_at(c, 0), f64_at(c, 8)))
            .collect();
        let matrix = Array2::from_shape_vec((info.dim, info.dim), data).expect("length checked");
        Ok(Self {
            fingerprint: info.fingerprint,
            order: info.order,
            dt: info.dt,
            last_term_norm: info.last_term_norm,
            created_at: info.created_at,
            matrix,
        })
    }
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn decode_header(bytes: &[u8], path: &Path) -> Result<EntryInfo> {
    let corrupt = |reason: &str| Error::CacheCorrupt {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < HEADER_LEN {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    Ok(EntryInfo {
        order: u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize,
        dim: usize::try_from(u64_at(bytes, 16)).map_err(|_| corrupt("dimension overflow"))?,
        dt: f64_at(bytes, 24),
        fingerprint: u64_at(bytes, 32),
        last_term_norm: f64_at(bytes, 40),
        created_at: u64_at(bytes, 48),
    })
}

/// A directory of cache entries. Single writer, many readers.
#[derive(Clone, Debug)]
pub struct CacheStore {
    root: PathBuf,
}

impl CacheStore {
    /// Opens (creating if needed) the cache rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    /// `$SBPROP_CACHE_DIR`, else `$XDG_CACHE_HOME/sbprop`, else
    /// `$HOME/.cache/sbprop`, else a directory under the system temp dir.
    pub fn default_root() -> PathBuf {
        let env = |k: &str| {
            std::env::var_os(k)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        };
        env(CACHE_DIR_ENV)
            .or_else(|| env("XDG_CACHE_HOME").map(|p| p.join("sbprop")))
            .or_else(|| env("HOME").map(|p| p.join(".cache").join("sbprop")))
            .unwrap_or_else(|| std::env::temp_dir().join("sbprop-cache"))
    }

    pub fn from_env() -> Result<Self> {
        Self::open(Self::default_root())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, fingerprint: u64) -> PathBuf {
        self.root.join(format!("{fingerprint:016x}.{EXTENSION}"))
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<u64> {
        let bytes = entry.encode()?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        tmp.write_all(&bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path_for(entry.fingerprint))
            .map_err(|e| e.error)?;
        Ok(entry.fingerprint)
    }

    /// `Ok(None)` is a miss; a damaged file is an error.
    pub fn get(&self, fingerprint: u64) -> Result<Option<CacheEntry>> {
        let path = self.path_for(fingerprint);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let entry = CacheEntry::decode(&bytes, &path)?;
        if entry.fingerprint != fingerprint {
            return Err(Error::CacheCorrupt {
                path,
                reason: format!(
                    "header fingerprint {:016x} does not match file name",
                    entry.fingerprint
                ),
            });
        }
        Ok(Some(entry))
    }

    /// Removes the entry; returns whether it existed.
    pub fn invalidate(&self, fingerprint: u64) -> Result<bool> {
        match fs::remove_file(self.path_for(fingerprint)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    /// Header information of every entry, sorted by fingerprint. Unreadable
    /// files are reported as errors.
    pub fn list(&self) -> Result<Vec<EntryInfo>> {
        let mut out = Vec::new();
        for path in self.entry_paths()? {
            let bytes = fs::read(&path)?;
            out.push(decode_header(&bytes, &path)?);
        }
        out.sort_by_key(|e| e.fingerprint);
        Ok(out)
    }

    /// Removes every entry; returns how many were removed.
    pub fn clear(&self) -> Result<usize> {
        let paths = self.entry_paths()?;
        for p in &paths {
            fs::remove_file(p)?;
        }
        Ok(paths.len())
    }

    fn entry_paths(&self) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        for ent in fs::read_dir(&self.root)? {
            let path = ent?.path();
            if path.extension().and_then(|e| e.to_str()) == Some(EXTENSION) {
                paths.push(path);
            }
        }
        paths.sort();
        Ok(paths)
    }
}
