//! Scene discovery and raster I/O: manifests, STAC search, remote asset
//! caching and GeoTIFF export.

mod export;
mod fetch;
mod manifest;
mod stac;

use std::thread;
use std::time::Duration;

use crate::error::{Error, Result};

pub use export::{export_composite, ExportKind, ExportRecord};
pub use fetch::AssetFetcher;
pub use manifest::{
    filter_scenes, load_manifest, load_scene, BandRef, ManifestEntry, SceneManifest,
};
pub use stac::{StacClient, StacQuery};

/// Bounded exponential backoff for retryable transport failures.
#[derive(Clone, Copy, Debug)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// Runs `op` until it succeeds, fails with a non-transport error, or
    /// the attempts are used up.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match op() {
                Err(Error::Transport(msg)) if attempt < self.attempts.max(1) => {
                    log::warn!("attempt {attempt} failed: {msg}; retrying");
                    thread::sleep(self.base_delay * 2u32.pow(attempt - 1));
                }
                other => return other,
            }
        }
    }
}

/// Maps an HTTP client error to the transport/protocol split.
pub(crate) fn http_error(e: reqwest::Error) -> Error {
    match e.status() {
        Some(s) if s.is_server_error() || s.as_u16() == 429 => Error::Transport(e.to_string()),
        Some(_) => Error::Protocol(e.to_string()),
        None if e.is_decode() => Error::Protocol(e.to_string()),
        None => Error::Transport(e.to_string()),
    }
}

pub(crate) fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}
