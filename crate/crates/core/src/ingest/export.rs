use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndvi::ThresholdMask;
use crate::raster::{write_geotiff, Crs, RasterGrid};
use crate::sensor::SensorId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportKind {
    Composite,
    Mask,
}

impl ExportKind {
    pub fn file_name(&self, analysis_id: &str) -> String {
        format!("{analysis_id}_{self}.tif")
    }
}

impl fmt::Display for ExportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportKind::Composite => "composite",
            ExportKind::Mask => "mask",
        })
    }
}

impl FromStr for ExportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "composite" => Ok(ExportKind::Composite),
            "mask" => Ok(ExportKind::Mask),
            _ => Err(Error::InvalidData(format!("unknown export kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub composite_path: PathBuf,
    pub mask_path: PathBuf,
    /// Pixel size of the written grids in CRS units.
    pub scale: f64,
    pub native_scale_m: f64,
    pub crs: Crs,
}

impl ExportRecord {
    pub fn path(&self, kind: ExportKind) -> &Path {
        match kind {
            ExportKind::Composite => &self.composite_path,
            ExportKind::Mask => &self.mask_path,
        }
    }
}

/// Writes the float composite and the 8-bit threshold mask as GeoTIFFs
/// named after `analysis_id`. Invalid pixels are nodata in both files.
pub fn export_composite(
    composite: &RasterGrid<f32>,
    mask: &ThresholdMask,
    sensor: SensorId,
    dir: impl AsRef<Path>,
    analysis_id: &str,
) -> Result<ExportRecord> {
    composite.ensure_aligned(&mask.grid)?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let composite_path = dir.join(ExportKind::Composite.file_name(analysis_id));
    let mask_path = dir.join(ExportKind::Mask.file_name(analysis_id));
    write_geotiff(composite, &composite_path)?;
    write_geotiff(&mask.grid, &mask_path)?;
    Ok(ExportRecord {
        composite_path,
        mask_path,
        scale: composite.transform().scale(),
        native_scale_m: sensor.spec().native_scale_m,
        crs: composite.crs(),
    })
}
