use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, SystemTime};

use sha2::{Digest, Sha256};

use super::{http_error, is_url, RetryPolicy};
use crate::error::{Error, Result};

const DEFAULT_CACHE_BYTES: u64 = 2 << 30;

/// Resolves band locations to local files. Remote assets are downloaded
/// once into a cache keyed by URL digest, trimmed least-recently-used first
/// when it grows past its byte budget.
#[derive(Debug)]
pub struct AssetFetcher {
    cache_dir: Option<PathBuf>,
    max_bytes: u64,
    retry: RetryPolicy,
    timeout: Duration,
    client: OnceLock<reqwest::blocking::Client>,
    lock: Mutex<()>,
}

impl AssetFetcher {
    /// Local files only; remote locations are refused.
    pub fn local_only() -> Self {
        AssetFetcher {
            cache_dir: None,
            max_bytes: 0,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
            client: OnceLock::new(),
            lock: Mutex::new(()),
        }
    }

    pub fn with_cache(dir: impl Into<PathBuf>) -> Self {
        AssetFetcher {
            cache_dir: Some(dir.into()),
            max_bytes: DEFAULT_CACHE_BYTES,
            ..Self::local_only()
        }
    }

    pub fn max_bytes(mut self, bytes: u64) -> Self {
        self.max_bytes = bytes;
        self
    }

    pub fn retry(mut self, policy: RetryPolicy) -> Self {
        self.retry = policy;
        self
    }

    pub fn cache_dir(&self) -> Option<&Path> {
        self.cache_dir.as_deref()
    }

    /// Cache file for a URL.
    pub fn cache_path(&self, url: &str) -> Option<PathBuf> {
        let name = hex::encode(Sha256::digest(url.as_bytes()));
        self.cache_dir
            .as_ref()
            .map(|d| d.join(format!("{name}.tif")))
    }

    /// Local path for `location`, downloading remote assets as needed.
    pub fn localize(&self, location: &str) -> Result<PathBuf> {
        let location = location.strip_prefix("file://").unwrap_or(location);
        if !is_url(location) {
            return Ok(PathBuf::from(location));
        }
        let dest = self.cache_path(location).ok_or_else(|| {
            Error::InvalidData(format!("remote asset {location} needs a cache directory"))
        })?;
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        if dest.exists() {
            touch(&dest);
            return Ok(dest);
        }
        let dir = dest.parent().expect("cache file has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bytes = self.retry.run(|| self.download(location))?;
        let part = dest.with_extension("part");
        let mut f = fs::File::create(&part).map_err(|e| Error::io(&part, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&part, e))?;
        drop(f);
        fs::rename(&part, &dest).map_err(|e| Error::io(&dest, e))?;
        self.evict(&dest)?;
        Ok(dest)
    }

    fn client(&self) -> Result<&reqwest::blocking::Client> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(self.client.get_or_init(|| c))
    }

    fn download(&self, url: &str) -> Result<Vec<u8>> {
        log::info!("fetching {url}");
        let resp = self.client()?.get(url).send().map_err(http_error)?;
        let resp = resp.error_for_status().map_err(http_error)?;
        Ok(resp.bytes().map_err(http_error)?.to_vec())
    }

    /// Deletes the oldest cached files until the cache fits, never `keep`.
    fn evict(&self, keep: &Path) -> Result<()> {
        let Some(dir) = &self.cache_dir else {
            return Ok(());
        };
        let mut files: Vec<(SystemTime, u64, PathBuf)> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "tif"))
            .filter_map(|e| {
                let m = e.metadata().ok()?;
                Some((m.modified().ok()?, m.len(), e.path()))
            })
            .collect();
        let mut total: u64 = files.iter().map(|f| f.1).sum();
        files.sort();
        for (_, len, path) in files {
            if total <= self.max_bytes {
                break;
            }
            if path == keep {
                continue;
            }
            if fs::remove_file(&path).is_ok() {
                log::debug!("evicted {}", path.display());
                total -= len;
            }
        }
        Ok(())
    }
}

fn touch(path: &Path) {
    if let Ok(f) = fs::File::options().append(true).open(path) {
        let _ = f.set_modified(SystemTime::now());
    }
}
