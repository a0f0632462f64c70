//! On-disk operator cache under `TTIGA_CACHE_DIR`.
//!
//! Each entry is three files named by the SHA-256 of the configuration's key
//! material: `<key>.K.tt` and `<key>.f.tt` (TT containers) and `<key>.json`
//! (manifest with the key material and ranks).

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ttiga_core::driver::OperatorCache;
use ttiga_tensor::{io, TtMatrix, TtTensor};

use crate::output::{write_atomic, write_json};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheManifest {
    pub key: String,
    pub key_material: serde_json::Value,
    pub modes: Vec<usize>,
    pub ranks_k: Vec<usize>,
    pub ranks_f: Vec<usize>,
}

pub struct DiskCache {
    dir: PathBuf,
}

pub fn cache_key(material: &str) -> String {
    hex::encode(Sha256::digest(material.as_bytes()))
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DiskCache { dir: dir.into() }
    }

    /// Cache named by `TTIGA_CACHE_DIR`, if set and non-empty.
    pub fn from_env() -> Option<Self> {
        std::env::var_os("TTIGA_CACHE_DIR").filter(|v| !v.is_empty()).map(DiskCache::new)
    }

    pub fn paths(&self, key: &str) -> (PathBuf, PathBuf, PathBuf) {
        (
            self.dir.join(format!("{key}.K.tt")),
            self.dir.join(format!("{key}.f.tt")),
            self.dir.join(format!("{key}.json")),
        )
    }

    fn try_load(&self, material: &str) -> Result<Option<(TtMatrix, TtTensor)>> {
        let key = cache_key(material);
        let (kp, fp, mp) = self.paths(&key);
        if !mp.exists() {
            return Ok(None);
        }
        let manifest: CacheManifest = serde_json::from_reader(BufReader::new(File::open(&mp)?))?;
        if manifest.key_material != serde_json::from_str::<serde_json::Value>(material)? {
            anyhow::bail!("manifest {} does not match its key", mp.display());
        }
        let k = io::read_matrix(&mut BufReader::new(File::open(&kp)?))?;
        let f = io::read_tensor(&mut BufReader::new(File::open(&fp)?))?;
        Ok(Some((k, f)))
    }

    fn try_store(&self, material: &str, k: &TtMatrix, f: &TtTensor) -> Result<()> {
        let key = cache_key(material);
        let (kp, fp, mp) = self.paths(&key);
        let mut buf = Vec::new();
        io::write_matrix(&mut buf, k)?;
        write_atomic(&kp, &buf)?;
        buf.clear();
        io::write_tensor(&mut buf, f)?;
        write_atomic(&fp, &buf)?;
        // manifest last: its presence marks a complete entry
        let manifest = CacheManifest {
            key,
            key_material: serde_json::from_str(material)?,
            modes: f.modes(),
            ranks_k: k.ranks(),
            ranks_f: f.ranks(),
        };
        write_json(&mp, &manifest)
    }
}

impl OperatorCache for DiskCache {
    fn load(&self, key: &str) -> Option<(TtMatrix, TtTensor)> {
        match self.try_load(key) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("warning: ignoring cache entry: {e:#}");
                None
            }
        }
    }

    fn store(&self, key: &str, k: &TtMatrix, f: &TtTensor) {
        if let Err(e) = self.try_store(key, k, f) {
            eprintln!("warning: could not write cache entry: {e:#}");
        }
    }
}
