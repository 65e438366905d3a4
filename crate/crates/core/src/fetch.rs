//! Download of QAPLib instances into a local cache.
//!
//! Only names in the vendored manifest are fetched. Mirrors are tried in
//! order. A download must parse as a symmetric QAPLib instance before it is
//! cached. When the manifest pins a SHA-256 the file must match it; otherwise
//! the hash of the first download is stored next to the file and checked on
//! every later use.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::parse_qaplib;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "SYMRED_CACHE";

const VENDORED_MANIFEST: &str = include_str!("../fixtures/qaplib/manifest.json");
const MAX_BYTES: u64 = 16 << 20;

#[derive(Clone, Debug, Deserialize)]
pub struct InstanceEntry {
    pub n: usize,
    pub sha256: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Manifest {
    pub mirrors: Vec<String>,
    pub instances: BTreeMap<String, InstanceEntry>,
}

impl Manifest {
    pub fn vendored() -> Self {
        serde_json::from_str(VENDORED_MANIFEST).expect("vendored manifest is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `$SYMRED_CACHE`, else `$XDG_CACHE_HOME/symred`, else `$HOME/.cache/symred`,
/// else `.symred-cache`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os(CACHE_ENV) {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(d).join("symred");
    }
    if let Some(h) = std::env::var_os("HOME") {
        return PathBuf::from(h).join(".cache").join("symred");
    }
    PathBuf::from(".symred-cache")
}

#[derive(Clone, Debug)]
pub struct Fetcher {
    pub manifest: Manifest,
    pub cache_dir: PathBuf,
    /// Replaces the manifest mirrors when set.
    pub url_base: Option<String>,
    pub offline: bool,
    pub timeout: Duration,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Fetcher {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Fetcher {
            manifest: Manifest::vendored(),
            cache_dir: cache_dir.into(),
            url_base: None,
            offline: false,
            timeout: Duration::from_secs(30),
        }
    }

    fn err(name: &str, msg: impl Into<String>) -> Error {
        Error::Fetch {
            name: name.to_string(),
            msg: msg.into(),
        }
    }

    fn lock_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".sha256");
        PathBuf::from(s)
    }

    /// Hash the cached bytes must have, if one is known.
    fn expected_hash(&self, name: &str, path: &Path) -> Result<Option<String>> {
        if let Some(h) = &self.manifest.instances[name].sha256 {
            return Ok(Some(h.to_lowercase()));
        }
        let lock = Self::lock_path(path);
        if lock.exists() {
            return Ok(Some(fs::read_to_string(lock)?.trim().to_lowercase()));
        }
        Ok(None)
    }

    fn check(&self, name: &str, bytes: &[u8], expected: Option<&str>) -> Result<()> {
        let found = sha256_hex(bytes);
        match expected {
            Some(e) if e != found => Err(Error::Checksum {
                name: name.to_string(),
                expected: e.to_string(),
                found,
            }),
            _ => Ok(()),
        }
    }

    /// Returns the cached path of `name`, downloading it first when needed.
    pub fn fetch(&self, name: &str) -> Result<PathBuf> {
        let Some(entry) = self.manifest.instances.get(name) else {
            return Err(Self::err(name, "not in the instance manifest"));
        };
        let path = self.cache_dir.join(format!("{name}.dat"));
        let expected = self.expected_hash(name, &path)?;
        if path.exists() {
            let bytes = fs::read(&path)?;
            self.check(name, &bytes, expected.as_deref())?;
            log::debug!("{name}: using cached {}", path.display());
            return Ok(path);
        }
        if self.offline {
            return Err(Self::err(name, format!("not cached in {} and offline", self.cache_dir.display())));
        }
        let bases: Vec<String> = match &self.url_base {
            Some(b) => vec![b.clone()],
            None => self.manifest.mirrors.clone(),
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut failures = Vec::new();
        for base in &bases {
            let url = format!("{}/{name}.dat", base.trim_end_matches('/'));
            let bytes = match agent
                .get(&url)
                .call()
                .and_then(|mut r| r.body_mut().with_config().limit(MAX_BYTES).read_to_vec())
            {
                Ok(b) => b,
                Err(e) => {
                    log::info!("{url}: {e}");
                    failures.push(format!("{url}: {e}"));
                    continue;
                }
            };
            let text = String::from_utf8_lossy(&bytes);
            match parse_qaplib(&text) {
                Ok(inst) if inst.n() == entry.n => {}
                Ok(inst) => {
                    failures.push(format!("{url}: size {} instead of {}", inst.n(), entry.n));
                    continue;
                }
                Err(e) => {
                    failures.push(format!("{url}: {e}"));
                    continue;
                }
            }
            self.check(name, &bytes, expected.as_deref())?;
            fs::create_dir_all(&self.cache_dir)?;
            let tmp = self.cache_dir.join(format!(".{name}.dat.part"));
            fs::write(&tmp, &bytes)?;
            fs::rename(&tmp, &path)?;
            if expected.is_none() {
                fs::write(Self::lock_path(&path), sha256_hex(&bytes) + "\n")?;
            }
            return Ok(path);
        }
        Err(Self::err(name, format!("all mirrors failed: {}", failures.join("; "))))
    }
}
