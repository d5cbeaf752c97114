use std::path::PathBuf;
use std::sync::Arc;

use chrono::{NaiveDate, Utc};
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::cache::{CacheStats, CachedComposite, CompositeCache, ExportStore};
use super::catalog::{DatasetCatalog, DatasetKind};
use super::{
    export_ref, AnalysisOutcome, AnalysisRequest, AnalysisResult, AnalyzeError, RoiSpec, SourceSpec,
};
use crate::analytics::{masked_area_km2_with, pixel_area_grid, time_series, SceneNdvi};
use crate::error::{Error, Result};
use crate::ingest::{
    filter_scenes, load_manifest, load_scene, AssetFetcher, ExportKind, ManifestEntry,
    SceneManifest, StacClient, StacQuery,
};
use crate::masking::{apply_mask, clear_mask};
use crate::ndvi::{ndvi_from_dn, threshold_mask, CompositeMeta, NdviComposite, ThresholdMask};
use crate::raster::tile::Tiling;
use crate::raster::{Bbox, RasterGrid};
use crate::roi::{rasterize_roi, roi_from_bbox, roi_from_polygon, roi_from_vector_file, Roi};
use crate::sensor::{validate_params_at, ValidationReport};

#[derive(Clone, Debug)]
pub struct AnalyzerConfig {
    /// Composites kept in memory.
    pub cache_capacity: usize,
    /// Upper bound on cropped pixels times scenes for one request.
    pub pixel_budget: usize,
    pub export_dir: PathBuf,
    /// Analyses whose exports are kept on disk.
    pub export_capacity: usize,
    /// Download cache for remote assets; remote sources fail without it.
    pub asset_cache_dir: Option<PathBuf>,
    pub asset_cache_bytes: u64,
    pub tiling: Tiling,
    /// Fixed "today" for sensor windows; the UTC date when absent.
    pub today: Option<NaiveDate>,
}

impl AnalyzerConfig {
    pub fn new(export_dir: impl Into<PathBuf>) -> Self {
        AnalyzerConfig {
            cache_capacity: 16,
            pixel_budget: 400_000_000,
            export_dir: export_dir.into(),
            export_capacity: 64,
            asset_cache_dir: None,
            asset_cache_bytes: 2 << 30,
            tiling: Tiling::default(),
            today: None,
        }
    }
}

/// Runs analyses, sharing composites between requests that differ only in
/// thresholds or ROI shape.
pub struct Analyzer {
    config: AnalyzerConfig,
    datasets: DatasetCatalog,
    cache: CompositeCache,
    exports: ExportStore,
    fetcher: AssetFetcher,
}

impl Analyzer {
    pub fn new(config: AnalyzerConfig, datasets: DatasetCatalog) -> Self {
        let fetcher = match &config.asset_cache_dir {
            Some(d) => AssetFetcher::with_cache(d).max_bytes(config.asset_cache_bytes),
            None => AssetFetcher::local_only(),
        };
        Analyzer {
            cache: CompositeCache::new(config.cache_capacity),
            exports: ExportStore::new(&config.export_dir, config.export_capacity),
            fetcher,
            datasets,
            config,
        }
    }

    pub fn datasets(&self) -> &DatasetCatalog {
        &self.datasets
    }

    pub fn exports(&self) -> &ExportStore {
        &self.exports
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    pub fn today(&self) -> NaiveDate {
        self.config.today.unwrap_or_else(|| Utc::now().date_naive())
    }

    pub fn validate(&self, req: &AnalysisRequest) -> ValidationReport {
        let p = &req.params;
        validate_params_at(p, p.sensor_id.spec(), req.roi.is_some(), self.today())
    }

    pub fn resolve_roi(&self, spec: &RoiSpec) -> Result<Roi> {
        match spec {
            RoiSpec::Polygon { vertices, crs } => {
                roi_from_polygon(vertices.iter().map(|&[x, y]| (x, y)).collect(), *crs)
            }
            RoiSpec::Bbox {
                bbox: [a, b, c, d],
                crs,
            } => roi_from_bbox(Bbox::new(*a, *b, *c, *d)?, *crs),
            RoiSpec::Admin { dataset, path } => {
                let (_, ds) = self.datasets.get(dataset)?;
                let sel: Vec<&str> = path.iter().map(String::as_str).collect();
                ds.resolve_admin_roi(&sel)
            }
            RoiSpec::ProtectedArea {
                dataset,
                iso3,
                name,
            } => match self.datasets.get(dataset)? {
                (DatasetKind::ProtectedAreas, ds) => ds.resolve_protected_area_roi(iso3, name),
                _ => Err(Error::Dataset(format!(
                    "`{dataset}` is not a protected-area dataset"
                ))),
            },
            RoiSpec::VectorFile { path } => roi_from_vector_file(path),
        }
    }

    pub fn analyze(
        &self,
        req: &AnalysisRequest,
    ) -> std::result::Result<AnalysisOutcome, AnalyzeError> {
        let report = self.validate(req);
        if !report.is_empty() {
            return Err(AnalyzeError::Invalid(report));
        }
        let roi_spec = req.roi.as_ref().expect("validated");
        let roi = self.resolve_roi(roi_spec).map_err(AnalyzeError::Roi)?;
        let analysis_id = req.analysis_id();
        let p = &req.params;

        let key = composite_key(req, &roi);
        let cached = match self.cache.get(&key) {
            Some(c) => c,
            None => match self.build_composite(req, &roi)? {
                Some(c) => {
                    let c = Arc::new(c);
                    self.cache.insert(key, c.clone());
                    c
                }
                None => return Ok(AnalysisOutcome::NoScenes {
                    analysis_id,
                    message: format!(
                        "no {} scenes between {} and {} with cloud cover <= {}% intersect the ROI",
                        p.sensor_id, p.start_date, p.end_date, p.max_cloud_pct
                    ),
                    params_echo: Box::new(req.clone()),
                }),
            },
        };

        let grid = &cached.composite.grid;
        let (w, h, t) = (grid.width(), grid.height(), *grid.transform());
        let fail = AnalyzeError::Failed;
        let roi_mask = rasterize_roi(&roi, &t, w, h).map_err(AnalyzeError::Roi)?;
        let clipped = apply_mask(grid, &roi_mask).map_err(fail)?;
        let mask = threshold_mask(&clipped, p.ndvi_min, p.ndvi_max).map_err(fail)?;
        let areas: RasterGrid<f64> = pixel_area_grid(&t, w, h);
        let tiling = &self.config.tiling;
        let area = masked_area_km2_with(&mask, &roi_mask, &areas, tiling).map_err(fail)?;
        let roi_all = RasterGrid::from_fn(w, h, t, 0u8, |_, _| Some(1));
        let roi_full = ThresholdMask {
            grid: roi_all,
            ndvi_min: -1.0,
            ndvi_max: 1.0,
        };
        let roi_area = masked_area_km2_with(&roi_full, &roi_mask, &areas, tiling).map_err(fail)?;
        let series = time_series(&cached.scenes, &roi_mask).map_err(fail)?;
        let record = self
            .exports
            .export(&analysis_id, &clipped, &mask, p.sensor_id)
            .map_err(fail)?;

        let mut warnings = cached.warnings.clone();
        if roi_area.pixel_count == 0 {
            warnings.push("the ROI contains no pixel centers at this resolution".into());
        }
        let native = p.sensor_id.spec().native_scale_m;
        if !t.crs.is_geographic() && (record.scale - native).abs() > 1e-9 {
            warnings.push(format!(
                "exported at {} m, sensor native scale is {native} m",
                record.scale
            ));
        }
        let result = AnalysisResult {
            sensor_id: p.sensor_id,
            start_date: p.start_date,
            end_date: p.end_date,
            roi_label: roi.label.clone(),
            scene_count: cached.composite.scene_count,
            scene_ids: cached.scenes.iter().map(|s| s.scene_id.clone()).collect(),
            area,
            roi_area_km2: roi_area.area_km2,
            roi_pixel_count: roi_area.pixel_count,
            series,
            composite_ref: export_ref(&analysis_id, ExportKind::Composite),
            mask_ref: export_ref(&analysis_id, ExportKind::Mask),
            export_scale: record.scale,
            params_echo: req.clone(),
            warnings,
            analysis_id,
        };
        Ok(AnalysisOutcome::Completed(Box::new(result)))
    }

    fn scene_source(
        &self,
        req: &AnalysisRequest,
        roi: &Roi,
    ) -> std::result::Result<SceneManifest, AnalyzeError> {
        match &req.source {
            SourceSpec::Manifest { path } => load_manifest(path).map_err(AnalyzeError::Upstream),
            SourceSpec::Stac {
                endpoint,
                collection,
                search_bbox,
            } => {
                let bbox = match (search_bbox, roi.crs.is_geographic()) {
                    (Some([a, b, c, d]), _) => {
                        Bbox::new(*a, *b, *c, *d).map_err(AnalyzeError::Roi)?
                    }
                    (None, true) => roi.bbox(),
                    (None, false) => return Err(AnalyzeError::Roi(Error::InvalidData(
                        "a projected ROI needs search_bbox in longitude/latitude for STAC search"
                            .into(),
                    ))),
                };
                let p = &req.params;
                let query = StacQuery {
                    sensor_id: p.sensor_id,
                    bbox,
                    start_date: p.start_date,
                    end_date: p.end_date,
                    max_cloud_pct: p.max_cloud_pct,
                    collection: collection.clone(),
                };
                StacClient::new(endpoint)
                    .and_then(|c| c.search(&query, self.today()))
                    .map_err(AnalyzeError::Upstream)
            }
        }
    }

    /// `None` when no scene passes the filters.
    fn build_composite(
        &self,
        req: &AnalysisRequest,
        roi: &Roi,
    ) -> std::result::Result<Option<CachedComposite>, AnalyzeError> {
        let p = &req.params;
        let manifest = self.scene_source(req, roi)?;
        let roi_bbox = roi.bbox();
        let entries = filter_scenes(
            &manifest,
            Some(p.sensor_id),
            Some((&roi_bbox, roi.crs)),
            p.start_date,
            p.end_date,
            p.max_cloud_pct,
        );
        if entries.is_empty() {
            return Ok(None);
        }

        let mut warnings = Vec::new();
        let mut scenes = Vec::with_capacity(entries.len());
        let mut rest: &[ManifestEntry] = &entries;
        // Load scenes one at a time until the first usable crop fixes the
        // window size, so an over-budget request fails before reading more.
        while let Some((first, tail)) = rest.split_first() {
            rest = tail;
            if let Some(s) = self.scene_ndvi(first, &manifest, roi, &mut warnings)? {
                let pixels = s.ndvi.len().saturating_mul(rest.len() + 1);
                if pixels > self.config.pixel_budget {
                    return Err(AnalyzeError::TooLarge {
                        pixels,
                        budget: self.config.pixel_budget,
                    });
                }
                scenes.push(s);
                break;
            }
        }
        let loaded: Vec<(Option<SceneNdvi>, Vec<String>)> = rest
            .par_iter()
            .map(|e| {
                let mut w = Vec::new();
                self.scene_ndvi(e, &manifest, roi, &mut w).map(|s| (s, w))
            })
            .collect::<std::result::Result<_, _>>()?;
        for (s, w) in loaded {
            warnings.extend(w);
            scenes.extend(s);
        }
        if scenes.is_empty() {
            return Ok(None);
        }

        let stack: Vec<RasterGrid<f32>> = scenes.iter().map(|s| s.ndvi.clone()).collect();
        let meta = CompositeMeta {
            scene_count: stack.len(),
            start_date: p.start_date,
            end_date: p.end_date,
            sensor_id: p.sensor_id,
        };
        let composite = NdviComposite::from_stack(&stack, meta, &self.config.tiling)
            .map_err(AnalyzeError::Failed)?;
        Ok(Some(CachedComposite {
            composite,
            scenes,
            warnings,
        }))
    }

    /// Masked NDVI of one scene cropped to the ROI bbox; `None` when the
    /// scene does not overlap it.
    fn scene_ndvi(
        &self,
        entry: &ManifestEntry,
        manifest: &SceneManifest,
        roi: &Roi,
        warnings: &mut Vec<String>,
    ) -> std::result::Result<Option<SceneNdvi>, AnalyzeError> {
        let scene = load_scene(entry, manifest, &self.fetcher).map_err(|e| match e {
            Error::Transport(_) | Error::Protocol(_) => AnalyzeError::Upstream(e),
            e => AnalyzeError::Failed(e),
        })?;
        let grid_crs = scene.red().crs();
        if grid_crs != roi.crs {
            return Err(AnalyzeError::Roi(Error::CrsMismatch {
                roi: roi.crs.to_string(),
                grid: grid_crs.to_string(),
            }));
        }
        let scene = match scene.crop(&roi.bbox()) {
            Ok(s) => s,
            Err(Error::EmptyRegion) => {
                warnings.push(format!("scene {} does not overlap the ROI", entry.scene_id));
                return Ok(None);
            }
            Err(e) => return Err(AnalyzeError::Failed(e)),
        };
        let spec = entry.sensor_id.spec();
        let fail = AnalyzeError::Failed;
        let ndvi: RasterGrid<f32> = ndvi_from_dn(scene.red(), scene.nir(), spec).map_err(fail)?;
        let clear = clear_mask(scene.qa(), spec.mask_scheme).map_err(fail)?;
        let ndvi = apply_mask(&ndvi, &clear).map_err(fail)?;
        Ok(Some(SceneNdvi {
            scene_id: entry.scene_id.clone(),
            date: entry.timestamp,
            ndvi,
        }))
    }
}

/// Inputs that determine the composite: source, sensor, window, cloud cap
/// and the ROI's bbox (the crop window).
fn composite_key(req: &AnalysisRequest, roi: &Roi) -> String {
    let p = &req.params;
    let key = json!({
        "source": req.source,
        "sensor": p.sensor_id,
        "start": p.start_date,
        "end": p.end_date,
        "cloud": p.max_cloud_pct,
        "bbox": roi.bbox().as_array(),
        "crs": roi.crs,
    });
    hex::encode(Sha256::digest(key.to_string().as_bytes()))
}
