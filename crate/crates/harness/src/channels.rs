//! Equivalent channels computed once per scenario and user set.
//!
//! With a cache directory, channels are stored in little-endian binary files
//! named by the SHA-256 of the scenario and the user coordinates.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nfbeam::propagation::{equivalent_channel, ChannelVector};
use nfbeam::Scenario;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{io_err, Context, HarnessError, Result};

const MAGIC: &[u8; 8] = b"NFBCH001";

#[derive(Debug, Clone, Default)]
pub struct ChannelCache {
    dir: Option<PathBuf>,
}

impl ChannelCache {
    pub fn in_memory() -> Self {
        Self { dir: None }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    /// Hex key for a scenario and user list.
    pub fn key(scenario: &Scenario, users: &[(f64, f64)]) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&scenario.to_config()).expect("scenario serializes"));
        for &(x, y) in users {
            h.update(x.to_le_bytes());
            h.update(y.to_le_bytes());
        }
        hex(&h.finalize())
    }

    pub fn path_for(&self, scenario: &Scenario, users: &[(f64, f64)]) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.bin", Self::key(scenario, users))))
    }

    /// Loads the channels from disk if present, otherwise propagates and
    /// stores them.
    pub fn get(&self, scenario: &Scenario, users: &[(f64, f64)]) -> Result<Vec<ChannelVector>> {
        let path = self.path_for(scenario, users);
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            return read_channels(p, users, scenario.num_elements());
        }
        let channels = equivalent_channel(scenario, users).context(|| format!("channels for {} users", users.len()))?;
        if let Some(p) = path {
            write_channels(&p, &channels)?;
        }
        Ok(channels)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn write_channels(path: &Path, channels: &[ChannelVector]) -> Result<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let n = channels.first().map_or(0, |c| c.len());
    let mut buf = Vec::with_capacity(24 + channels.len() * (16 + 16 * n));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(channels.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for c in channels {
        buf.extend_from_slice(&c.user.0.to_le_bytes());
        buf.extend_from_slice(&c.user.1.to_le_bytes());
        for v in &c.h {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    // Entries appear atomically.
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(&buf))
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(io_err(path))
}

fn read_channels(path: &Path, users: &[(f64, f64)], n: usize) -> Result<Vec<ChannelVector>> {
    let mut buf = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(io_err(path))?;
    let corrupt = || HarnessError::Config(format!("corrupt channel cache {}", path.display()));
    let mut words = buf.get(8..).ok_or_else(corrupt)?.chunks_exact(8).map(|c| c.try_into().expect("8 bytes"));
    if &buf[..8] != MAGIC {
        return Err(corrupt());
    }
    let mut u64_next = || words.next().map(u64::from_le_bytes).ok_or_else(corrupt);
    let (count, width) = (u64_next()? as usize, u64_next()? as usize);
    if count != users.len() || width != n || buf.len() != 24 + count * (16 + 16 * n) {
        return Err(corrupt());
    }
    let mut f = buf[24..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut out = Vec::with_capacity(count);
    for &u in users {
        let user = (f.next().ok_or_else(corrupt)?, f.next().ok_or_else(corrupt)?);
        if user != u {
            return Err(corrupt());
        }
        let h = (0..n)
            .map(|_| Some(Complex64::new(f.next()?, f.next()?)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(corrupt)?;
        out.push(ChannelVector { h, user });
    }
    Ok(out)
}
