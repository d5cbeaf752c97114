//! Per-sensor cloud masking and reflectance scaling.
//!
//! QA_PIXEL bit layout (Landsat Collection-2 Level-2): bit 0 fill, bit 1
//! dilated cloud, bit 2 cirrus, bit 3 cloud, bit 4 cloud shadow. Confidence
//! bit pairs (8–15) are ignored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterGrid;
use crate::scalar::{Numeric, Real, Sample};
use crate::sensor::SensorSpec;

pub const QA_FILL_BIT: u8 = 0;
pub const QA_DILATED_CLOUD_BIT: u8 = 1;
pub const QA_CIRRUS_BIT: u8 = 2;
pub const QA_CLOUD_BIT: u8 = 3;
pub const QA_CLOUD_SHADOW_BIT: u8 = 4;

/// SCL classes kept as clear surface: vegetation, not vegetated, water,
/// unclassified, snow.
pub const SCL_KEEP_CLASSES: [u16; 5] = [4, 5, 6, 7, 11];

const QA_L89_BITS: [u8; 4] = [
    QA_DILATED_CLOUD_BIT,
    QA_CIRRUS_BIT,
    QA_CLOUD_BIT,
    QA_CLOUD_SHADOW_BIT,
];
const QA_L57_BITS: [u8; 2] = [QA_CLOUD_BIT, QA_CLOUD_SHADOW_BIT];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskScheme {
    /// Sentinel-2 scene classification layer.
    #[serde(rename = "SCL")]
    Scl,
    /// Landsat 8/9 QA_PIXEL.
    #[serde(rename = "QA_L89")]
    QaL89,
    /// Landsat 5/7 QA_PIXEL.
    #[serde(rename = "QA_L57")]
    QaL57,
}

impl MaskScheme {
    /// SCL codes retained (empty for QA schemes).
    pub fn keep_classes(&self) -> &'static [u16] {
        match self {
            MaskScheme::Scl => &SCL_KEEP_CLASSES,
            _ => &[],
        }
    }

    /// QA_PIXEL flag bits that discard a pixel (empty for SCL).
    pub fn mask_bits(&self) -> &'static [u8] {
        match self {
            MaskScheme::Scl => &[],
            MaskScheme::QaL89 => &QA_L89_BITS,
            MaskScheme::QaL57 => &QA_L57_BITS,
        }
    }

    fn flag_word(&self) -> u16 {
        self.mask_bits().iter().fold(0u16, |m, b| m | (1 << b))
    }
}

/// Whether an SCL code is clear surface.
pub fn scl_code_kept(code: u16) -> bool {
    SCL_KEEP_CLASSES.contains(&code)
}

/// Decodes one QA_PIXEL word: `None` for fill, otherwise whether the pixel
/// is clear under `scheme`.
pub fn qa_word_kept(word: u16, scheme: MaskScheme) -> Option<bool> {
    if word & (1 << QA_FILL_BIT) != 0 {
        return None;
    }
    Some(word & scheme.flag_word() == 0)
}

/// Clear-sky mask from an SCL band. Output validity follows the input;
/// the value is `true` for kept classes.
pub fn scl_clear_mask<T: Numeric>(scl: &RasterGrid<T>) -> RasterGrid<bool> {
    scl.map(|v| {
        v.to_u16().is_some_and(scl_code_kept) && v.to_f64().is_some_and(|f| f.fract() == 0.0)
    })
}

/// Clear-sky mask from a QA_PIXEL band. Fill pixels become invalid.
pub fn qa_pixel_mask(qa: &RasterGrid<u16>, scheme: MaskScheme) -> Result<RasterGrid<bool>> {
    if scheme == MaskScheme::Scl {
        return Err(Error::InvalidData(
            "QA_PIXEL decoding needs a QA scheme, not SCL".into(),
        ));
    }
    Ok(qa.filter_map(false, |w| qa_word_kept(w, scheme)))
}

/// Clear-sky mask for whichever QA band the sensor carries.
pub fn clear_mask(qa: &RasterGrid<u16>, scheme: MaskScheme) -> Result<RasterGrid<bool>> {
    match scheme {
        MaskScheme::Scl => Ok(scl_clear_mask(qa)),
        s => qa_pixel_mask(qa, s),
    }
}

/// Converts raw digital numbers to surface reflectance with the sensor's
/// scale and offset: `dn × scale + offset`. Values are not clipped.
pub fn scale_reflectance<D: Numeric, T: Real>(
    dn: &RasterGrid<D>,
    spec: &SensorSpec,
) -> RasterGrid<T> {
    let (scale, offset) = (spec.reflectance_scale, spec.reflectance_offset);
    dn.map(|v| T::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN) * scale + offset))
}

/// Restricts `grid` to pixels where `mask` is valid and true.
pub fn apply_mask<T: Sample>(
    grid: &RasterGrid<T>,
    mask: &RasterGrid<bool>,
) -> Result<RasterGrid<T>> {
    grid.ensure_aligned(mask)?;
    let valid = grid
        .validity()
        .iter()
        .zip(mask.iter())
        .map(|(ok, m)| *ok && m == Some(true))
        .collect();
    grid.with_validity(valid)
}
