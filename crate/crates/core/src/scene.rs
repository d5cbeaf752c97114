use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::raster::{Bbox, RasterGrid};
use crate::sensor::SensorId;

/// One acquisition with its raw bands, all on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub sensor_id: SensorId,
    pub timestamp: NaiveDate,
    pub cloud_cover_pct: f64,
    bands: BTreeMap<String, RasterGrid<u16>>,
}

impl Scene {
    /// Checks the sensor's red, NIR and QA bands are present and that every
    /// band shares one grid.
    pub fn new(
        scene_id: impl Into<String>,
        sensor_id: SensorId,
        timestamp: NaiveDate,
        cloud_cover_pct: f64,
        bands: BTreeMap<String, RasterGrid<u16>>,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        if !(0.0..=100.0).contains(&cloud_cover_pct) {
            return Err(Error::InvalidData(format!(
                "scene {scene_id}: cloud cover {cloud_cover_pct} outside [0, 100]"
            )));
        }
        let spec = sensor_id.spec();
        for b in [spec.red_band, spec.nir_band, spec.qa_band] {
            if !bands.contains_key(b) {
                return Err(Error::BandNotFound(format!("{b} in scene {scene_id}")));
            }
        }
        let mut grids = bands.values();
        if let Some(first) = grids.next() {
            for g in grids {
                first.ensure_aligned(g)?;
            }
        }
        Ok(Scene {
            scene_id,
            sensor_id,
            timestamp,
            cloud_cover_pct,
            bands,
        })
    }

    pub fn band(&self, label: &str) -> Result<&RasterGrid<u16>> {
        self.bands
            .get(label)
            .ok_or_else(|| Error::BandNotFound(label.to_string()))
    }

    pub fn red(&self) -> &RasterGrid<u16> {
        &self.bands[self.sensor_id.spec().red_band]
    }

    pub fn nir(&self) -> &RasterGrid<u16> {
        &self.bands[self.sensor_id.spec().nir_band]
    }

    pub fn qa(&self) -> &RasterGrid<u16> {
        &self.bands[self.sensor_id.spec().qa_band]
    }

    /// Crops every band to `bbox`.
    pub fn crop(&self, bbox: &Bbox) -> Result<Scene> {
        let bands = self
            .bands
            .iter()
            .map(|(k, g)| Ok((k.clone(), g.crop(bbox)?)))
            .collect::<Result<_>>()?;
        Ok(Scene {
            bands,
            scene_id: self.scene_id.clone(),
            ..*self
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Crs, GeoTransform};

    #[test]
    fn bands_must_share_grid() {
        let t = GeoTransform::north_up(0.0, 0.0, 10.0, Crs::from_epsg(32646)).unwrap();
        let t2 = t.shifted(1, 0);
        let mut bands = BTreeMap::new();
        bands.insert("B4".into(), RasterGrid::filled(2, 2, t, 1u16));
        bands.insert("B8".into(), RasterGrid::filled(2, 2, t, 1u16));
        let date = "2021-01-01".parse().unwrap();
        let missing = Scene::new("s", SensorId::Sentinel2, date, 1.0, bands.clone());
        assert!(matches!(missing, Err(Error::BandNotFound(_))));
        bands.insert("SCL".into(), RasterGrid::filled(2, 2, t2, 4u16));
        assert!(matches!(
            Scene::new("s", SensorId::Sentinel2, date, 1.0, bands.clone()),
            Err(Error::GridMismatch(_))
        ));
        bands.insert("SCL".into(), RasterGrid::filled(2, 2, t, 4u16));
        assert!(Scene::new("s", SensorId::Sentinel2, date, 1.0, bands.clone()).is_ok());
        assert!(Scene::new("s", SensorId::Sentinel2, date, 101.0, bands).is_err());
    }
}
