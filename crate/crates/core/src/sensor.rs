//! Registry of supported platforms and validation of analysis parameters.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::MaskScheme;

/// Supported satellite platforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SensorId {
    Sentinel2,
    Landsat9,
    Landsat8,
    Landsat7,
    Landsat5,
}

impl SensorId {
    pub const ALL: [SensorId; 5] = [
        SensorId::Sentinel2,
        SensorId::Landsat9,
        SensorId::Landsat8,
        SensorId::Landsat7,
        SensorId::Landsat5,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SensorId::Sentinel2 => "Sentinel-2",
            SensorId::Landsat9 => "Landsat 9",
            SensorId::Landsat8 => "Landsat 8",
            SensorId::Landsat7 => "Landsat 7",
            SensorId::Landsat5 => "Landsat 5",
        }
    }

    pub fn spec(&self) -> &'static SensorSpec {
        let i = SensorId::ALL.iter().position(|s| s == self).unwrap_or(0);
        &registry()[i]
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensorId {
    type Err = Error;

    /// Accepts the display name or any spelling that matches it after
    /// dropping case, spaces, hyphens and underscores (`sentinel-2`, `landsat8`).
    fn from_str(s: &str) -> Result<Self> {
        let norm = |t: &str| {
            t.chars()
                .filter(|c| !matches!(c, ' ' | '-' | '_'))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        };
        let key = norm(s);
        SensorId::ALL
            .into_iter()
            .find(|id| norm(id.name()) == key)
            .ok_or_else(|| Error::UnknownSensor(s.to_string()))
    }
}

impl TryFrom<String> for SensorId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SensorId> for String {
    fn from(s: SensorId) -> String {
        s.name().to_string()
    }
}

/// Static configuration for one platform.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensorSpec {
    pub sensor_id: SensorId,
    pub red_band: &'static str,
    pub nir_band: &'static str,
    pub qa_band: &'static str,
    pub mask_scheme: MaskScheme,
    pub reflectance_scale: f64,
    pub reflectance_offset: f64,
    pub availability_start: NaiveDate,
    /// `None` while the platform is still acquiring.
    pub availability_end: Option<NaiveDate>,
    pub native_scale_m: f64,
    pub cloud_metadata_key: &'static str,
    /// Collection id on public STAC catalogs.
    pub stac_collection: &'static str,
    /// Value of the STAC `platform` property, when the collection mixes platforms.
    pub stac_platform: Option<&'static str>,
}

impl SensorSpec {
    /// Last admissible acquisition date, using `today` for active platforms.
    pub fn effective_end(&self, today: NaiveDate) -> NaiveDate {
        self.availability_end.unwrap_or(today)
    }

    pub fn is_active(&self) -> bool {
        self.availability_end.is_none()
    }
}

/// Landsat Collection-2 Level-2 surface reflectance scale factor.
pub const LANDSAT_SR_SCALE: f64 = 0.0000275;
/// Landsat Collection-2 Level-2 surface reflectance offset.
pub const LANDSAT_SR_OFFSET: f64 = -0.2;
/// Sentinel-2 L2A digital numbers are reflectance × 10000.
pub const SENTINEL2_SR_SCALE: f64 = 1.0 / 10_000.0;

const fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    match NaiveDate::from_ymd_opt(y, m, d) {
        Some(d) => d,
        None => panic!("invalid registry date"),
    }
}

static REGISTRY: [SensorSpec; 5] = [
    SensorSpec {
        sensor_id: SensorId::Sentinel2,
        red_band: "B4",
        nir_band: "B8",
        qa_band: "SCL",
        mask_scheme: MaskScheme::Scl,
        reflectance_scale: SENTINEL2_SR_SCALE,
        reflectance_offset: 0.0,
        availability_start: date(2017, 3, 28),
        availability_end: None,
        native_scale_m: 10.0,
        cloud_metadata_key: "CLOUDY_PIXEL_PERCENTAGE",
        stac_collection: "sentinel-2-l2a",
        stac_platform: None,
    },
    SensorSpec {
        sensor_id: SensorId::Landsat9,
        red_band: "SR_B4",
        nir_band: "SR_B5",
        qa_band: "QA_PIXEL",
        mask_scheme: MaskScheme::QaL89,
        reflectance_scale: LANDSAT_SR_SCALE,
        reflectance_offset: LANDSAT_SR_OFFSET,
        availability_start: date(2021, 10, 31),
        availability_end: None,
        native_scale_m: 30.0,
        cloud_metadata_key: "CLOUD_COVER",
        stac_collection: "landsat-c2-l2",
        stac_platform: Some("landsat-9"),
    },
    SensorSpec {
        sensor_id: SensorId::Landsat8,
        red_band: "SR_B4",
        nir_band: "SR_B5",
        qa_band: "QA_PIXEL",
        mask_scheme: MaskScheme::QaL89,
        reflectance_scale: LANDSAT_SR_SCALE,
        reflectance_offset: LANDSAT_SR_OFFSET,
        availability_start: date(2013, 4, 11),
        availability_end: None,
        native_scale_m: 30.0,
        cloud_metadata_key: "CLOUD_COVER",
        stac_collection: "landsat-c2-l2",
        stac_platform: Some("landsat-8"),
    },
    SensorSpec {
        sensor_id: SensorId::Landsat7,
        red_band: "SR_B3",
        nir_band: "SR_B4",
        qa_band: "QA_PIXEL",
        mask_scheme: MaskScheme::QaL57,
        reflectance_scale: LANDSAT_SR_SCALE,
        reflectance_offset: LANDSAT_SR_OFFSET,
        availability_start: date(1999, 5, 28),
        availability_end: Some(date(2022, 3, 30)),
        native_scale_m: 30.0,
        cloud_metadata_key: "CLOUD_COVER",
        stac_collection: "landsat-c2-l2",
        stac_platform: Some("landsat-7"),
    },
    SensorSpec {
        sensor_id: SensorId::Landsat5,
        red_band: "SR_B3",
        nir_band: "SR_B4",
        qa_band: "QA_PIXEL",
        mask_scheme: MaskScheme::QaL57,
        reflectance_scale: LANDSAT_SR_SCALE,
        reflectance_offset: LANDSAT_SR_OFFSET,
        availability_start: date(1984, 3, 16),
        availability_end: Some(date(2012, 5, 5)),
        native_scale_m: 30.0,
        cloud_metadata_key: "CLOUD_COVER",
        stac_collection: "landsat-c2-l2",
        stac_platform: Some("landsat-5"),
    },
];

/// All registry entries in display order.
pub fn registry() -> &'static [SensorSpec] {
    &REGISTRY
}

/// Registry entry for a sensor name such as `"Sentinel-2"` or `"landsat-5"`.
pub fn lookup_sensor(sensor_id: &str) -> Result<&'static SensorSpec> {
    Ok(sensor_id.parse::<SensorId>()?.spec())
}

/// Human-readable availability table.
pub fn availability_table() -> String {
    let mut out = format!(
        "{:<12} {:<10} {:<10} {:<6} {:<6} {:>6}\n",
        "Platform", "Start", "End", "Red", "NIR", "Scale"
    );
    for s in registry() {
        let end = s
            .availability_end
            .map(|d| d.to_string())
            .unwrap_or_else(|| "Present".into());
        out.push_str(&format!(
            "{:<12} {:<10} {:<10} {:<6} {:<6} {:>5}m\n",
            s.sensor_id.name(),
            s.availability_start,
            end,
            s.red_band,
            s.nir_band,
            s.native_scale_m
        ));
    }
    out
}

/// User-supplied analysis parameters. May hold inadmissible values; only
/// [`validate_params`] decides admissibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub sensor_id: SensorId,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub ndvi_min: f64,
    pub ndvi_max: f64,
    pub max_cloud_pct: f64,
}

/// Machine-readable validation rule identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    DateBeforeSensor,
    DateAfterSensor,
    DateOrder,
    NdviOrder,
    NdviRange,
    CloudRange,
    RoiMissing,
}

/// Parameter fields addressed by violations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamField {
    SensorId,
    StartDate,
    EndDate,
    NdviMin,
    NdviMax,
    MaxCloudPct,
    Roi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub field: ParamField,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn fields(&self) -> Vec<ParamField> {
        self.violations.iter().map(|v| v.field).collect()
    }

    fn push(&mut self, code: ViolationCode, field: ParamField, message: String) {
        self.violations.push(Violation {
            code,
            field,
            message,
        });
    }
}

/// Validates against today's UTC date for active platforms.
pub fn validate_params(
    params: &AnalysisParams,
    spec: &SensorSpec,
    roi_defined: bool,
) -> ValidationReport {
    validate_params_at(params, spec, roi_defined, chrono::Utc::now().date_naive())
}

/// Collects every violated rule; `today` closes the window of active platforms.
pub fn validate_params_at(
    params: &AnalysisParams,
    spec: &SensorSpec,
    roi_defined: bool,
    today: NaiveDate,
) -> ValidationReport {
    use ParamField as F;
    use ViolationCode as C;

    let mut report = ValidationReport::default();
    let first = spec.availability_start;
    let last = spec.effective_end(today);
    let sensor = spec.sensor_id;

    for (field, d) in [
        (F::StartDate, params.start_date),
        (F::EndDate, params.end_date),
    ] {
        if d < first {
            report.push(
                C::DateBeforeSensor,
                field,
                format!("{d} is before {sensor} data begins on {first}"),
            );
        } else if d > last {
            let why = if spec.is_active() {
                "today"
            } else {
                "the end of the mission"
            };
            report.push(
                C::DateAfterSensor,
                field,
                format!("{d} is after {why} ({last}) for {sensor}"),
            );
        }
    }
    if params.start_date > params.end_date {
        report.push(
            C::DateOrder,
            F::EndDate,
            format!(
                "start date {} must precede or equal end date {}",
                params.start_date, params.end_date
            ),
        );
    }

    let in_ndvi_range = |v: f64| (-1.0..=1.0).contains(&v);
    for (field, v) in [(F::NdviMin, params.ndvi_min), (F::NdviMax, params.ndvi_max)] {
        if !in_ndvi_range(v) {
            report.push(
                C::NdviRange,
                field,
                format!("NDVI threshold {v} outside [-1, 1]"),
            );
        }
    }
    if params.ndvi_min.is_finite()
        && params.ndvi_max.is_finite()
        && params.ndvi_min >= params.ndvi_max
    {
        report.push(
            C::NdviOrder,
            F::NdviMax,
            format!(
                "minimum NDVI {} must be strictly less than maximum {}",
                params.ndvi_min, params.ndvi_max
            ),
        );
    }
    if !(0.0..=100.0).contains(&params.max_cloud_pct) {
        report.push(
            C::CloudRange,
            F::MaxCloudPct,
            format!(
                "cloud cover {} outside [0, 100] percent",
                params.max_cloud_pct
            ),
        );
    }
    if !roi_defined {
        report.push(
            C::RoiMissing,
            F::Roi,
            "no region of interest defined".into(),
        );
    }
    report
}
