//! Persistent cache of simulated null distributions.
//!
//! One file per `TestSpec`, holding the sorted sample. Layout, all little
//! endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "MLRTQC01" (format version 01)
//! 8       4     m   (u32)
//! 12      4     p   (u32)
//! 16      1     flags: bit 0 missing_diagonal, bit 1 heteroscedastic
//! 17      3     reserved, zero
//! 20      8     S   (u64)
//! 28      8     seed (u64)
//! 36      8*S   statistics, f64, sorted ascending
//! ```
//!
//! Files are written atomically (temp file + rename) and a cache hit is
//! bit-identical to regeneration because the sample is a pure function of
//! the spec.

use crate::error::{Error, Result};
use crate::lrt::{null_distribution, TestSpec};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 8] = b"MLRTQC01";
const HEADER_LEN: usize = 36;

/// Canonical file name for a spec, e.g.
/// `null_m26_p13_md_het_S100000_seed7.qcache`.
pub fn cache_file_name(spec: &TestSpec) -> String {
    format!(
        "null_m{}_p{}{}{}_S{}_seed{}.qcache",
        spec.m,
        spec.p,
        if spec.missing_diagonal { "_md" } else { "" },
        if spec.heteroscedastic { "_het" } else { "" },
        spec.s,
        spec.seed
    )
}

fn header(spec: &TestSpec) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..8].copy_from_slice(MAGIC);
    h[8..12].copy_from_slice(&(spec.m as u32).to_le_bytes());
    h[12..16].copy_from_slice(&(spec.p as u32).to_le_bytes());
    h[16] = u8::from(spec.missing_diagonal) | (u8::from(spec.heteroscedastic) << 1);
    h[20..28].copy_from_slice(&(spec.s as u64).to_le_bytes());
    h[28..36].copy_from_slice(&spec.seed.to_le_bytes());
    h
}

/// Writes the sorted sample for `spec` into `dir`, creating the directory if
/// needed. Returns the final path.
pub fn write_cache(spec: &TestSpec, sorted: &[f64], dir: &Path) -> Result<PathBuf> {
    if sorted.len() != spec.s {
        return Err(Error::Cache(format!(
            "sample has {} values but the spec says S = {}",
            sorted.len(),
            spec.s
        )));
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(cache_file_name(spec));
    let tmp = dir.join(format!(
        "{}.tmp.{}",
        cache_file_name(spec),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&header(spec))?;
        let mut buf = Vec::with_capacity(sorted.len() * 8);
        for t in sorted {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Reads and validates a cache file against `spec`.
pub fn read_cache(path: &Path, spec: &TestSpec) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN || &bytes[0..8] != MAGIC {
        return Err(Error::Cache(format!(
            "{} is not a quantile cache file",
            path.display()
        )));
    }
    if bytes[0..HEADER_LEN] != header(spec) {
        return Err(Error::Cache(format!(
            "{} was generated for a different spec",
            path.display()
        )));
    }
    let expected = HEADER_LEN + 8 * spec.s;
    if bytes.len() != expected {
        return Err(Error::Cache(format!(
            "{} is truncated: {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(spec.s);
    for chunk in bytes[HEADER_LEN..].chunks_exact(8) {
        out.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    if out.iter().any(|t| !t.is_finite()) || out.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Cache(format!(
            "{} holds a corrupt (unsorted or non-finite) sample",
            path.display()
        )));
    }
    Ok(out)
}

/// Returns the cached sample for `spec` if present in `dir`, otherwise
/// simulates it, persists it, and returns it. The boolean reports a cache
/// hit.
pub fn load_or_generate(spec: &TestSpec, dir: &Path) -> Result<(Vec<f64>, bool)> {
    spec.validate()?;
    let path = dir.join(cache_file_name(spec));
    if path.exists() {
        return Ok((read_cache(&path, spec)?, true));
    }
    let sample = null_distribution(spec)?;
    write_cache(spec, &sample, dir)?;
    Ok((sample, false))
}
