//! Optional on-disk cache of shell-transform samples.
//!
//! Entries are keyed by `(packet hash, frequency sign, grid hash)` and
//! stored as a self-describing binary file: a fixed header carrying the
//! format version, the sign, and the full grid specification, followed by
//! the row-major complex samples. A cached file therefore reconstructs a
//! [`ShellTransform`] without recomputation, and a mismatched or damaged
//! file is detected and treated as a miss.
//!
//! The cache is best-effort: read and write failures fall back to direct
//! computation rather than failing the caller. Access is serialized with
//! an advisory lock file (shared for reads, exclusive for writes), and a
//! size guard (default 256 MiB) skips stores that would overgrow the
//! directory. The directory is chosen explicitly or through the
//! `UQFT_CACHE_DIR` environment variable, which takes precedence.
//!
//! Multi-leg contraction integrals plan their grids jointly over all legs
//! of a block, so their slices are memoized in-process by the pairing
//! engine instead; this store serves the standalone per-packet transform.

use crate::quad::{shell_transform, Grid1, QuadConfig, QuadError, ShellTransform};
use num_complex::Complex64;
use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use uqft_core::algebra::{GaussianPacket, Kinematics, Slot};

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "UQFT_CACHE_DIR";

/// Default ceiling on the total size of a cache directory.
pub const DEFAULT_MAX_BYTES: u64 = 256 * 1024 * 1024;

/// File magic identifying a shell-transform cache entry.
const MAGIC: &[u8; 8] = b"UQFTSHTC";

/// Format version written after the magic.
const FORMAT_VERSION: u32 = 1;

/// Extension of cache entries (everything else in the directory is left
/// untouched by `clear`).
const ENTRY_EXT: &str = "shl";

/// Error raised by explicit cache management (the compute path never
/// surfaces these; it falls back to recomputation).
#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    /// Filesystem access failed.
    #[error("cache I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Identity of one cache entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheKey {
    /// Fingerprint of the packet label (centre, width, phase parameter,
    /// lift flag, transformation tag).
    pub packet_hash: u64,
    /// Frequency sheet of the transform: `+1` plain, `−1` starred.
    pub sign: i8,
    /// Fingerprint of the grid specification (mass and every quadrature
    /// setting that shapes the sample lattice).
    pub grid_hash: u64,
}

impl CacheKey {
    /// The key under which `shell_transform(packet, sign, kin, cfg)`
    /// would be stored.
    pub fn new(packet: &GaussianPacket, sign: i8, kin: &Kinematics, cfg: &QuadConfig) -> Self {
        let slot = Slot::plain(packet.clone());
        let mut grid = Vec::with_capacity(48);
        grid.extend_from_slice(&kin.mass().to_le_bytes());
        grid.extend_from_slice(&(cfg.momentum_points as u64).to_le_bytes());
        grid.extend_from_slice(&cfg.momentum_halfspan_widths.to_le_bytes());
        grid.extend_from_slice(&cfg.upsilon_step_mass.to_le_bytes());
        grid.extend_from_slice(&cfg.upsilon_halfspan_mass.to_le_bytes());
        CacheKey {
            packet_hash: crate::quad::slot_fingerprint(&slot),
            sign,
            grid_hash: fnv64(&grid),
        }
    }

    /// Entry file name: `<packet>-<p|m>-<grid>.shl`.
    fn file_name(&self) -> String {
        let s = if self.sign >= 0 { 'p' } else { 'm' };
        format!("{:016x}-{}-{:016x}.{}", self.packet_hash, s, self.grid_hash, ENTRY_EXT)
    }
}

/// 64-bit FNV-1a over a byte string (also fingerprints run
/// configurations for their manifests).
pub(crate) fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Occupancy summary of a cache directory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStat {
    /// Number of cache entries.
    pub entries: usize,
    /// Total size of those entries in bytes.
    pub bytes: u64,
}

/// An on-disk shell-transform store rooted at one directory.
#[derive(Clone, Debug)]
pub struct TransformCache {
    dir: PathBuf,
    max_bytes: u64,
}

impl TransformCache {
    /// A cache rooted at `dir` with the default size ceiling. The
    /// directory is created on first store.
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TransformCache { dir: dir.into(), max_bytes: DEFAULT_MAX_BYTES }
    }

    /// Replaces the size ceiling (stores that would exceed it are
    /// skipped, never truncated).
    pub fn with_max_bytes(mut self, max_bytes: u64) -> Self {
        self.max_bytes = max_bytes;
        self
    }

    /// Resolves the cache directory: the `UQFT_CACHE_DIR` environment
    /// variable when set and nonempty, else the configured directory,
    /// else no cache.
    pub fn resolve(configured: Option<&Path>) -> Option<TransformCache> {
        resolve_dir(std::env::var_os(CACHE_DIR_ENV), configured).map(TransformCache::new)
    }

    /// The cache directory.
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Loads the entry under `key`, or `None` when it is absent, damaged,
    /// or inconsistent (damaged entries are removed).
    pub fn load(&self, key: &CacheKey) -> Result<Option<ShellTransform>, CacheError> {
        let path = self.dir.join(key.file_name());
        if !path.exists() {
            return Ok(None);
        }
        let _lock = self.lock(false)?;
        let bytes = fs::read(&path)?;
        match decode(&bytes) {
            Some(t) => Ok(Some(t)),
            None => {
                // Self-description failed: prune so the slot is rebuilt.
                let _ = fs::remove_file(&path);
                Ok(None)
            }
        }
    }

    /// Stores `transform` under `key`; returns whether it was written
    /// (`false` when the size guard skipped it). Writes go through a
    /// temporary file and a rename so readers never observe a partial
    /// entry.
    pub fn store(&self, key: &CacheKey, transform: &ShellTransform) -> Result<bool, CacheError> {
        fs::create_dir_all(&self.dir)?;
        let _lock = self.lock(true)?;
        let bytes = encode(transform);
        if self.stat_locked()?.bytes + bytes.len() as u64 > self.max_bytes {
            return Ok(false);
        }
        let path = self.dir.join(key.file_name());
        let tmp = self.dir.join(format!("{}.tmp", key.file_name()));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(true)
    }

    /// Entry count and total size.
    pub fn stat(&self) -> Result<CacheStat, CacheError> {
        if !self.dir.exists() {
            return Ok(CacheStat::default());
        }
        let _lock = self.lock(false)?;
        self.stat_locked()
    }

    /// Removes every cache entry; returns how many were removed.
    pub fn clear(&self) -> Result<usize, CacheError> {
        if !self.dir.exists() {
            return Ok(0);
        }
        let _lock = self.lock(true)?;
        let mut removed = 0;
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some(ENTRY_EXT) {
                fs::remove_file(&path)?;
                removed += 1;
            }
        }
        Ok(removed)
    }

    fn stat_locked(&self) -> Result<CacheStat, CacheError> {
        let mut stat = CacheStat::default();
        if !self.dir.exists() {
            return Ok(stat);
        }
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            if entry.path().extension().and_then(|e| e.to_str()) == Some(ENTRY_EXT) {
                stat.entries += 1;
                stat.bytes += entry.metadata()?.len();
            }
        }
        Ok(stat)
    }

    /// Takes the directory's advisory lock (shared for reads, exclusive
    /// for writes); released when the returned handle drops.
    fn lock(&self, exclusive: bool) -> Result<File, CacheError> {
        let f = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.dir.join(".lock"))?;
        if exclusive {
            f.lock()?;
        } else {
            f.lock_shared()?;
        }
        Ok(f)
    }
}

/// Pure resolution rule behind [`TransformCache::resolve`], separated for
/// testability: a nonempty environment value wins, then the configured
/// path.
pub fn resolve_dir(env: Option<OsString>, configured: Option<&Path>) -> Option<PathBuf> {
    if let Some(dir) = env {
        if !dir.is_empty() {
            return Some(PathBuf::from(dir));
        }
    }
    configured.map(Path::to_path_buf)
}

/// Computes the shell transform of `packet` on sheet `sign`, reading and
/// populating `cache` when one is given. Cache failures of any kind fall
/// back to direct computation; the returned samples are always exactly
/// those `shell_transform` would produce.
pub fn cached_shell_transform(
    cache: Option<&TransformCache>,
    packet: &GaussianPacket,
    sign: i8,
    kin: &Kinematics,
    cfg: &QuadConfig,
) -> Result<ShellTransform, QuadError> {
    let key = cache.map(|_| CacheKey::new(packet, sign, kin, cfg));
    if let (Some(cache), Some(key)) = (cache, key.as_ref()) {
        if let Ok(Some(hit)) = cache.load(key) {
            return Ok(hit);
        }
    }
    let transform = shell_transform(packet, sign, kin, cfg)?;
    if let (Some(cache), Some(key)) = (cache, key.as_ref()) {
        let _ = cache.store(key, &transform);
    }
    Ok(transform)
}

/// Serializes a transform: magic, version, sign, grid specification,
/// sample count, then row-major little-endian `(re, im)` pairs.
fn encode(t: &ShellTransform) -> Vec<u8> {
    let mut out = Vec::with_capacity(96 + t.samples.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(t.sign as u8);
    out.extend_from_slice(&[0u8; 3]);
    out.extend_from_slice(&(t.n as u64).to_le_bytes());
    out.extend_from_slice(&t.du.to_le_bytes());
    out.extend_from_slice(&t.dp.to_le_bytes());
    for c in t.p0 {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&t.upsilon.start.to_le_bytes());
    out.extend_from_slice(&t.upsilon.step.to_le_bytes());
    out.extend_from_slice(&(t.upsilon.n as u64).to_le_bytes());
    out.extend_from_slice(&(t.samples.len() as u64).to_le_bytes());
    for s in &t.samples {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
    out
}

/// Parses an entry; `None` on any structural mismatch.
fn decode(bytes: &[u8]) -> Option<ShellTransform> {
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Option<&[u8]> {
        let slice = bytes.get(*at..*at + n)?;
        *at += n;
        Some(slice)
    };
    if take(&mut at, 8)? != MAGIC {
        return None;
    }
    let version = u32::from_le_bytes(take(&mut at, 4)?.try_into().ok()?);
    if version != FORMAT_VERSION {
        return None;
    }
    let sign = take(&mut at, 1)?[0] as i8;
    if sign != 1 && sign != -1 {
        return None;
    }
    take(&mut at, 3)?;
    let f64_at = |at: &mut usize| -> Option<f64> {
        Some(f64::from_le_bytes(take(at, 8)?.try_into().ok()?))
    };
    let n = u64::from_le_bytes(take(&mut at, 8)?.try_into().ok()?) as usize;
    let du = f64_at(&mut at)?;
    let dp = f64_at(&mut at)?;
    let p0 = [f64_at(&mut at)?, f64_at(&mut at)?, f64_at(&mut at)?];
    let upsilon = Grid1 {
        start: f64_at(&mut at)?,
        step: f64_at(&mut at)?,
        n: u64::from_le_bytes(take(&mut at, 8)?.try_into().ok()?) as usize,
    };
    let count = u64::from_le_bytes(take(&mut at, 8)?.try_into().ok()?) as usize;
    if count != upsilon.n.checked_mul(n.checked_pow(3)?)? {
        return None;
    }
    if bytes.len() != at + count * 16 {
        return None;
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f64_at(&mut at)?;
        let im = f64_at(&mut at)?;
        samples.push(Complex64::new(re, im));
    }
    Some(ShellTransform { sign, upsilon, n, du, dp, p0, samples })
}
