use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use super::fetch::AssetFetcher;
use super::is_url;
use crate::error::{Error, Result};
use crate::raster::{read_geotiff_as, Bbox, Crs};
use crate::scene::Scene;
use crate::sensor::SensorId;

/// One scene record. `bbox` is expressed in `crs`, which defaults to the
/// ROI's CRS when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub sensor_id: SensorId,
    #[serde(deserialize_with = "lenient_date")]
    pub timestamp: NaiveDate,
    /// Scene-level cloud percentage. When omitted it is read from
    /// `properties` under the sensor's cloud metadata key.
    #[serde(default)]
    pub cloud_cover_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, Value>,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crs: Option<Crs>,
    /// Band label to file path or URL, optionally suffixed `#n` for the n-th
    /// band of a multi-band file.
    pub band_paths: BTreeMap<String, String>,
}

impl ManifestEntry {
    /// Cloud percentage from the explicit field or the sensor's metadata key.
    pub fn cloud_cover(&self) -> Option<f64> {
        self.cloud_cover_pct.or_else(|| {
            self.properties
                .get(self.sensor_id.spec().cloud_metadata_key)
                .and_then(Value::as_f64)
        })
    }

    pub fn footprint(&self) -> Result<Bbox> {
        let [a, b, c, d] = self.bbox;
        Bbox::new(a, b, c, d)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.scene_id.trim().is_empty() {
            return Err("empty scene_id".into());
        }
        let spec = self.sensor_id.spec();
        for band in [spec.red_band, spec.nir_band, spec.qa_band] {
            let Some(r) = self.band_paths.get(band) else {
                return Err(format!(
                    "scene {} lacks required band {band}",
                    self.scene_id
                ));
            };
            BandRef::parse(r).map_err(|e| e.to_string())?;
        }
        match self.cloud_cover() {
            None => {
                return Err(format!(
                    "scene {} has neither cloud_cover_pct nor {}",
                    self.scene_id, spec.cloud_metadata_key
                ))
            }
            Some(c) if !(0.0..=100.0).contains(&c) => {
                return Err(format!(
                    "scene {} cloud cover {c} outside [0, 100]",
                    self.scene_id
                ))
            }
            Some(_) => {}
        }
        self.footprint().map_err(|e| e.to_string())?;
        Ok(())
    }
}

fn lenient_date<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<NaiveDate, D::Error> {
    let s = String::deserialize(d)?;
    parse_date(&s).map_err(serde::de::Error::custom)
}

/// Accepts `YYYY-MM-DD` or an RFC 3339 timestamp (date part kept).
pub(crate) fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    if let Ok(d) = s.parse::<NaiveDate>() {
        return Ok(d);
    }
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.date_naive())
        .map_err(|e| format!("bad timestamp `{s}`: {e}"))
}

/// Parsed band reference: a location and a 1-based band index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandRef {
    pub location: String,
    pub band: usize,
}

impl BandRef {
    pub fn parse(s: &str) -> Result<BandRef> {
        let (loc, band) = match s.rsplit_once('#') {
            Some((loc, n)) => {
                let band = n
                    .parse::<usize>()
                    .ok()
                    .filter(|&b| b >= 1)
                    .ok_or_else(|| Error::InvalidData(format!("bad band suffix in `{s}`")))?;
                (loc, band)
            }
            None => (s, 1),
        };
        if loc.is_empty() {
            return Err(Error::InvalidData("empty band path".into()));
        }
        Ok(BandRef {
            location: loc.to_string(),
            band,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SceneManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative band paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestDoc {
    Wrapped { entries: Vec<Value> },
    Bare(Vec<Value>),
}

impl SceneManifest {
    /// Checks every entry and rejects duplicate scene ids.
    pub fn new(entries: Vec<ManifestEntry>, base_dir: Option<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (index, e) in entries.iter().enumerate() {
            e.check()
                .map_err(|message| Error::Manifest { index, message })?;
            if !seen.insert(e.scene_id.as_str()) {
                return Err(Error::Manifest {
                    index,
                    message: format!("duplicate scene_id {}", e.scene_id),
                });
            }
        }
        Ok(SceneManifest { entries, base_dir })
    }

    pub fn from_json_str(text: &str, base_dir: Option<PathBuf>) -> Result<Self> {
        let doc: ManifestDoc = serde_json::from_str(text).map_err(|e| Error::Manifest {
            index: 0,
            message: format!("not a manifest document: {e}"),
        })?;
        let (ManifestDoc::Wrapped { entries } | ManifestDoc::Bare(entries)) = doc;
        let entries = entries
            .into_iter()
            .enumerate()
            .map(|(index, v)| {
                serde_json::from_value(v).map_err(|e| Error::Manifest {
                    index,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<ManifestEntry>>>()?;
        SceneManifest::new(entries, base_dir)
    }

    /// Resolves a band location against the manifest directory.
    pub fn resolve(&self, location: &str) -> String {
        if is_url(location) || Path::new(location).is_absolute() {
            return location.to_string();
        }
        match &self.base_dir {
            Some(dir) => dir.join(location).to_string_lossy().into_owned(),
            None => location.to_string(),
        }
    }
}

/// Reads a JSON manifest, either `{"entries": [...]}` or a bare array.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<SceneManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SceneManifest::from_json_str(&text, path.parent().map(Path::to_path_buf))
}

/// Entries of `sensor` dated within `[start, end]` with cloud cover at most
/// `max_cloud_pct` whose footprint meets `bbox`, sorted by timestamp then id.
///
/// The footprint test applies only when the entry's CRS is absent or equal
/// to `bbox_crs`; other entries are kept for the grid checks downstream.
pub fn filter_scenes(
    manifest: &SceneManifest,
    sensor: Option<SensorId>,
    bbox: Option<(&Bbox, Crs)>,
    start: NaiveDate,
    end: NaiveDate,
    max_cloud_pct: f64,
) -> Vec<ManifestEntry> {
    let mut out: Vec<ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| sensor.is_none_or(|s| e.sensor_id == s))
        .filter(|e| e.timestamp >= start && e.timestamp <= end)
        .filter(|e| e.cloud_cover().is_some_and(|c| c <= max_cloud_pct))
        .filter(|e| match (bbox, e.footprint()) {
            (None, _) => true,
            (Some((b, crs)), Ok(fp)) => e.crs.is_some_and(|c| c != crs) || fp.intersects(b),
            (Some(_), Err(_)) => false,
        })
        .cloned()
        .collect();
    out.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.scene_id.cmp(&b.scene_id))
    });
    out
}

/// Reads the red, NIR and QA bands of `entry`.
pub fn load_scene(
    entry: &ManifestEntry,
    manifest: &SceneManifest,
    fetcher: &AssetFetcher,
) -> Result<Scene> {
    let spec = entry.sensor_id.spec();
    let mut bands = BTreeMap::new();
    for label in [spec.red_band, spec.nir_band, spec.qa_band] {
        let raw = entry
            .band_paths
            .get(label)
            .ok_or_else(|| Error::BandNotFound(format!("{label} in scene {}", entry.scene_id)))?;
        let r = BandRef::parse(raw)?;
        let local = fetcher.localize(&manifest.resolve(&r.location))?;
        bands.insert(label.to_string(), read_geotiff_as::<u16>(&local, r.band)?);
    }
    // Coarser bands (the 20 m SCL next to 10 m reflectance) are brought onto
    // the red band's grid.
    let red = bands[spec.red_band].clone();
    for g in bands.values_mut() {
        if !g.same_grid(&red) {
            *g = g.resample_nearest(red.transform(), red.width(), red.height())?;
        }
    }
    let cloud = entry.cloud_cover().unwrap_or(100.0);
    Scene::new(
        entry.scene_id.clone(),
        entry.sensor_id,
        entry.timestamp,
        cloud,
        bands,
    )
}
