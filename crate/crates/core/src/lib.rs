//! Vegetation analysis over optical satellite imagery: cloud masking, NDVI
//! median compositing, threshold classification, area and time-series
//! statistics for a region of interest.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the types used by the pipeline.

pub mod analytics;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod masking;
pub mod ndvi;
pub mod pipeline;
pub mod raster;
pub mod roi;
pub mod scalar;
pub mod scene;
pub mod sensor;

pub use error::{Error, Result};
pub use raster::{Bbox, Crs, GeoTransform, RasterGrid};
pub use scalar::{Numeric, Real, Sample};
pub use scene::Scene;
pub use sensor::{AnalysisParams, SensorId, SensorSpec, ValidationReport};

/// NDVI grid at pipeline precision.
pub type NdviGrid = RasterGrid<f32>;
/// Raw digital numbers, including QA words.
pub type DnGrid = RasterGrid<u16>;
/// Boolean grid such as a clear-sky or ROI mask.
pub type MaskGrid = RasterGrid<bool>;
/// Per-pixel area in m².
pub type AreaGrid = RasterGrid<f64>;
