//! End-to-end analysis: request resolution, compositing with caching,
//! classification, statistics and export.

mod analyzer;
mod cache;
mod catalog;

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{AreaReport, TimeSeriesPoint};
use crate::error::Error;
use crate::raster::Crs;
use crate::sensor::{AnalysisParams, SensorId, ValidationReport};

pub use analyzer::{Analyzer, AnalyzerConfig};
pub use cache::{CacheStats, CompositeCache, ExportStore};
pub use catalog::{DatasetCatalog, DatasetConfig, DatasetKind};

/// How the region of interest is given. Exactly one variant per request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RoiSpec {
    Polygon {
        vertices: Vec<[f64; 2]>,
        #[serde(default = "geographic")]
        crs: Crs,
    },
    Bbox {
        bbox: [f64; 4],
        #[serde(default = "geographic")]
        crs: Crs,
    },
    /// Administrative unit selected by its hierarchy path.
    Admin { dataset: String, path: Vec<String> },
    ProtectedArea {
        dataset: String,
        iso3: String,
        name: String,
    },
    /// GeoJSON file dissolved into one region.
    VectorFile { path: PathBuf },
}

fn geographic() -> Crs {
    Crs::Geographic
}

/// Where scenes come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Manifest {
        path: PathBuf,
    },
    Stac {
        endpoint: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        collection: Option<String>,
        /// Longitude/latitude search box; defaults to the ROI bbox when the
        /// ROI is geographic.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        search_bbox: Option<[f64; 4]>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRequest {
    #[serde(flatten)]
    pub params: AnalysisParams,
    #[serde(default)]
    pub roi: Option<RoiSpec>,
    pub source: SourceSpec,
}

impl AnalysisRequest {
    /// Stable identifier: digest of the canonical request JSON.
    pub fn analysis_id(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub analysis_id: String,
    pub sensor_id: SensorId,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub roi_label: String,
    pub scene_count: usize,
    pub scene_ids: Vec<String>,
    /// Area retained by the NDVI thresholds within the ROI.
    pub area: AreaReport,
    /// Area of all ROI pixels, whatever their NDVI.
    pub roi_area_km2: f64,
    pub roi_pixel_count: usize,
    pub series: Vec<TimeSeriesPoint>,
    pub composite_ref: String,
    pub mask_ref: String,
    /// Pixel size of the exported grids, in CRS units.
    pub export_scale: f64,
    pub params_echo: AnalysisRequest,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AnalysisOutcome {
    Completed(Box<AnalysisResult>),
    /// Nothing matched the filters; not an error.
    NoScenes {
        analysis_id: String,
        message: String,
        params_echo: Box<AnalysisRequest>,
    },
}

/// Why an analysis did not produce an outcome.
#[derive(Debug, thiserror::Error)]
pub enum AnalyzeError {
    #[error("invalid parameters")]
    Invalid(ValidationReport),
    #[error("region of interest: {0}")]
    Roi(Error),
    #[error("request needs {pixels} pixels, budget is {budget}")]
    TooLarge { pixels: usize, budget: usize },
    #[error("scene source: {0}")]
    Upstream(Error),
    #[error("analysis failed: {0}")]
    Failed(Error),
}

pub fn export_ref(analysis_id: &str, kind: crate::ingest::ExportKind) -> String {
    format!("/export/{analysis_id}/{kind}")
}
