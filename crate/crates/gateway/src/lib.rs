//! HTTP service and shared configuration for the `ndvi` command.

pub mod api;
mod openapi;

use std::path::PathBuf;

use anyhow::Context;
use ndvi_core::pipeline::{Analyzer, AnalyzerConfig, DatasetCatalog};
use ndvi_core::raster::tile::Tiling;

pub use api::router;
pub use openapi::api_description;

/// Environment variable naming the remote-asset download cache.
pub const ENV_CACHE_DIR: &str = "NDVI_CACHE_DIR";
/// Environment variable bounding pixels × scenes per request.
pub const ENV_PIXEL_BUDGET: &str = "NDVI_PIXEL_BUDGET";
pub const ENV_EXPORT_DIR: &str = "NDVI_EXPORT_DIR";
pub const ENV_CATALOG: &str = "NDVI_CATALOG";

/// Settings shared by the server and the one-shot commands.
#[derive(Clone, Debug, clap::Args)]
pub struct EngineArgs {
    /// Dataset catalog (JSON) for admin and protected-area ROIs.
    #[arg(long, env = ENV_CATALOG)]
    pub catalog: Option<PathBuf>,
    /// Directory for exported GeoTIFFs.
    #[arg(long, env = ENV_EXPORT_DIR, default_value = "ndvi-exports")]
    pub export_dir: PathBuf,
    /// Download cache for remote scene assets.
    #[arg(long, env = ENV_CACHE_DIR)]
    pub cache_dir: Option<PathBuf>,
    /// Largest cropped pixel count × scene count accepted per request.
    #[arg(long, env = ENV_PIXEL_BUDGET, default_value_t = 400_000_000)]
    pub pixel_budget: usize,
    /// Worker threads for compositing and area sums (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

impl EngineArgs {
    pub fn build(&self) -> anyhow::Result<Analyzer> {
        let datasets = match &self.catalog {
            Some(p) => DatasetCatalog::load(p)
                .with_context(|| format!("loading catalog {}", p.display()))?,
            None => DatasetCatalog::new(),
        };
        let mut cfg = AnalyzerConfig::new(&self.export_dir);
        cfg.pixel_budget = self.pixel_budget;
        cfg.asset_cache_dir = self.cache_dir.clone();
        if self.threads > 0 {
            cfg.tiling = Tiling::default().with_threads(self.threads)?;
        }
        Ok(Analyzer::new(cfg, datasets))
    }
}
