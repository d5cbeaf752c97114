use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Point, Polygon, Ring, Roi, RoiGeometry};
use crate::error::{Error, Result};
use crate::raster::Crs;

/// Attribute roles within a vector dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    /// Attribute names from the coarsest level to the finest.
    pub hierarchy_keys: Vec<String>,
    /// ISO 3166-1 alpha-3 country attribute (protected-area datasets).
    #[serde(default)]
    pub iso3_key: Option<String>,
    /// Feature name attribute (protected-area datasets).
    #[serde(default)]
    pub name_key: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub polygons: Vec<Polygon>,
    pub properties: Map<String, Value>,
}

impl Feature {
    /// Attribute rendered as text; numbers are formatted, null is absent.
    pub fn attr(&self, key: &str) -> Option<String> {
        match self.properties.get(key)? {
            Value::String(s) => Some(s.clone()),
            Value::Null => None,
            other => Some(other.to_string()),
        }
    }
}

/// Attributed polygon features loaded from GeoJSON.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorDataset {
    pub features: Vec<Feature>,
    pub crs: Crs,
    pub schema: DatasetSchema,
}

impl VectorDataset {
    pub fn new(features: Vec<Feature>, crs: Crs, schema: DatasetSchema) -> Result<Self> {
        let required = schema
            .hierarchy_keys
            .iter()
            .chain(schema.iso3_key.iter())
            .chain(schema.name_key.iter());
        for key in required {
            if let Some(i) = features.iter().position(|f| f.attr(key).is_none()) {
                return Err(Error::Dataset(format!(
                    "feature {i} lacks attribute `{key}`"
                )));
            }
        }
        Ok(VectorDataset {
            features,
            crs,
            schema,
        })
    }

    pub fn from_geojson_file(path: impl AsRef<Path>, schema: DatasetSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_geojson_str(&text, schema)
    }

    /// Parses a FeatureCollection of Polygon/MultiPolygon features. The CRS
    /// comes from a legacy `crs` member when present, else WGS84.
    pub fn from_geojson_str(text: &str, schema: DatasetSchema) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::Dataset(format!("invalid JSON: {e}")))?;
        let crs = match doc.pointer("/crs/properties/name").and_then(Value::as_str) {
            Some(name) => name.parse()?,
            None => Crs::Geographic,
        };
        let raw = match doc.get("type").and_then(Value::as_str) {
            Some("FeatureCollection") => doc
                .get("features")
                .and_then(Value::as_array)
                .cloned()
                .ok_or_else(|| Error::Dataset("FeatureCollection without features".into()))?,
            Some("Feature") => vec![doc.clone()],
            other => {
                return Err(Error::Dataset(format!(
                    "unsupported GeoJSON type {other:?}"
                )))
            }
        };
        let mut features = Vec::with_capacity(raw.len());
        for (i, f) in raw.iter().enumerate() {
            let polygons = parse_geometry(f.get("geometry").unwrap_or(&Value::Null))
                .map_err(|e| Error::Dataset(format!("feature {i}: {e}")))?;
            let properties = f
                .get("properties")
                .and_then(Value::as_object)
                .cloned()
                .unwrap_or_default();
            features.push(Feature {
                polygons,
                properties,
            });
        }
        Self::new(features, crs, schema)
    }

    fn matching<'a>(
        &'a self,
        keys: &'a [String],
        values: &'a [&str],
    ) -> impl Iterator<Item = &'a Feature> + 'a {
        self.features.iter().filter(move |f| {
            keys.iter()
                .zip(values)
                .all(|(k, v)| f.attr(k).as_deref() == Some(*v))
        })
    }

    /// Sorted distinct names one level below `selections`.
    pub fn list_children(&self, selections: &[&str]) -> Result<Vec<String>> {
        let keys = &self.schema.hierarchy_keys;
        let next = keys.get(selections.len()).ok_or_else(|| {
            Error::NoSuchUnit(format!(
                "path of {} levels has no level below it ({} levels defined)",
                selections.len(),
                keys.len()
            ))
        })?;
        let names: BTreeSet<String> = self
            .matching(keys, selections)
            .filter_map(|f| f.attr(next))
            .collect();
        if names.is_empty() {
            return Err(Error::NoSuchUnit(selections.join(" / ")));
        }
        Ok(names.into_iter().collect())
    }

    /// Dissolves every feature under a hierarchy path (any depth ≥ 1).
    pub fn resolve_admin_roi(&self, selections: &[&str]) -> Result<Roi> {
        let keys = &self.schema.hierarchy_keys;
        if selections.is_empty() || selections.len() > keys.len() {
            return Err(Error::NoSuchUnit(format!(
                "path must name 1..={} levels, got {}",
                keys.len(),
                selections.len()
            )));
        }
        let polygons: Vec<Polygon> = self
            .matching(keys, selections)
            .flat_map(|f| f.polygons.iter().cloned())
            .collect();
        if polygons.is_empty() {
            return Err(Error::NoSuchUnit(selections.join(" / ")));
        }
        Roi::new(
            RoiGeometry::Polygons(polygons),
            self.crs,
            selections.join(" / "),
        )
    }

    fn pa_keys(&self) -> Result<(&str, &str)> {
        match (&self.schema.iso3_key, &self.schema.name_key) {
            (Some(i), Some(n)) => Ok((i, n)),
            _ => Err(Error::Dataset("dataset has no ISO3/name attributes".into())),
        }
    }

    /// Sorted protected-area names within a country.
    pub fn list_protected_areas(&self, iso3: &str) -> Result<Vec<String>> {
        let (iso_key, name_key) = self.pa_keys()?;
        let names: BTreeSet<String> = self
            .features
            .iter()
            .filter(|f| f.attr(iso_key).as_deref() == Some(iso3))
            .filter_map(|f| f.attr(name_key))
            .collect();
        if names.is_empty() {
            return Err(Error::NoSuchUnit(iso3.to_string()));
        }
        Ok(names.into_iter().collect())
    }

    pub fn resolve_protected_area_roi(&self, iso3: &str, name: &str) -> Result<Roi> {
        let (iso_key, name_key) = self.pa_keys()?;
        let polygons: Vec<Polygon> = self
            .features
            .iter()
            .filter(|f| {
                f.attr(iso_key).as_deref() == Some(iso3)
                    && f.attr(name_key).as_deref() == Some(name)
            })
            .flat_map(|f| f.polygons.iter().cloned())
            .collect();
        if polygons.is_empty() {
            return Err(Error::NoSuchUnit(format!("{name} ({iso3})")));
        }
        Roi::new(RoiGeometry::Polygons(polygons), self.crs, name)
    }

    /// Whole dataset as one ROI.
    pub fn dissolve_all(&self, label: impl Into<String>) -> Result<Roi> {
        let polygons: Vec<Polygon> = self
            .features
            .iter()
            .flat_map(|f| f.polygons.iter().cloned())
            .collect();
        Roi::new(RoiGeometry::Polygons(polygons), self.crs, label)
    }
}

/// Loads a vector file and dissolves all of its features into one ROI.
pub fn roi_from_vector_file(path: impl AsRef<Path>) -> Result<Roi> {
    let path = path.as_ref();
    let ds = VectorDataset::from_geojson_file(path, DatasetSchema::default())?;
    ds.dissolve_all(path.display().to_string())
}

fn parse_ring(v: &Value) -> Result<Ring> {
    let pts = v
        .as_array()
        .ok_or_else(|| Error::Dataset("ring is not an array".into()))?
        .iter()
        .map(|p| {
            let a = p.as_array().filter(|a| a.len() >= 2);
            match a.map(|a| (a[0].as_f64(), a[1].as_f64())) {
                Some((Some(x), Some(y))) => Ok((x, y)),
                _ => Err(Error::Dataset("position is not [x, y]".into())),
            }
        })
        .collect::<Result<Vec<Point>>>()?;
    Ring::new(pts)
}

fn parse_polygon(v: &Value) -> Result<Polygon> {
    let rings = v
        .as_array()
        .ok_or_else(|| Error::Dataset("polygon is not an array of rings".into()))?;
    let (first, rest) = rings
        .split_first()
        .ok_or_else(|| Error::Dataset("polygon without rings".into()))?;
    Ok(Polygon::new(
        parse_ring(first)?,
        rest.iter().map(parse_ring).collect::<Result<_>>()?,
    ))
}

fn parse_geometry(g: &Value) -> Result<Vec<Polygon>> {
    let coords = g.get("coordinates").unwrap_or(&Value::Null);
    match g.get("type").and_then(Value::as_str) {
        Some("Polygon") => Ok(vec![parse_polygon(coords)?]),
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or_else(|| Error::Dataset("MultiPolygon coordinates not an array".into()))?
            .iter()
            .map(parse_polygon)
            .collect(),
        other => Err(Error::Dataset(format!(
            "unsupported geometry type {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> Value {
        serde_json::json!([[[x, y], [x + s, y], [x + s, y + s], [x, y + s], [x, y]]])
    }

    fn admin() -> VectorDataset {
        let f = |country: &str, province: &str, geom: Value| {
            serde_json::json!({
                "type": "Feature",
                "properties": {"ADM0_NAME": country, "ADM1_NAME": province},
                "geometry": {"type": "Polygon", "coordinates": geom}
            })
        };
        let doc = serde_json::json!({
            "type": "FeatureCollection",
            "crs": {"type": "name", "properties": {"name": "urn:ogc:def:crs:EPSG::32646"}},
            "features": [
                f("Atlantis", "North", square(0.0, 0.0, 10.0)),
                f("Atlantis", "North", square(20.0, 0.0, 5.0)),
                f("Atlantis", "South", square(0.0, -10.0, 10.0)),
                f("Atlantis", "East", square(10.0, 0.0, 10.0)),
                f("Lemuria", "Core", square(100.0, 100.0, 1.0)),
            ]
        });
        let schema = DatasetSchema {
            hierarchy_keys: vec!["ADM0_NAME".into(), "ADM1_NAME".into()],
            ..Default::default()
        };
        VectorDataset::from_geojson_str(&doc.to_string(), schema).unwrap()
    }

    #[test]
    fn children_of_country() {
        let ds = admin();
        assert_eq!(
            ds.list_children(&["Atlantis"]).unwrap(),
            vec!["East", "North", "South"]
        );
        assert_eq!(ds.list_children(&[]).unwrap(), vec!["Atlantis", "Lemuria"]);
        assert!(matches!(
            ds.list_children(&["Nowhere"]),
            Err(Error::NoSuchUnit(_))
        ));
        assert!(matches!(
            ds.list_children(&["Atlantis", "North"]),
            Err(Error::NoSuchUnit(_))
        ));
    }

    #[test]
    fn dissolve_sums_disjoint_features() {
        let ds = admin();
        let roi = ds.resolve_admin_roi(&["Atlantis", "North"]).unwrap();
        assert_eq!(roi.area(), 100.0 + 25.0);
        assert_eq!(roi.crs, Crs::from_epsg(32646));
        assert_eq!(roi.label, "Atlantis / North");
        let one = ds.resolve_admin_roi(&["Atlantis", "South"]).unwrap();
        assert_eq!(one.area(), 100.0);
        assert!(matches!(
            ds.resolve_admin_roi(&["Atlantis", "West"]),
            Err(Error::NoSuchUnit(_))
        ));
    }

    #[test]
    fn missing_attribute_rejected() {
        let doc = serde_json::json!({
            "type": "FeatureCollection",
            "features": [{"type": "Feature", "properties": {}, "geometry": {"type": "Polygon", "coordinates": square(0.0, 0.0, 1.0)}}]
        });
        let schema = DatasetSchema {
            hierarchy_keys: vec!["ADM0_NAME".into()],
            ..Default::default()
        };
        assert!(matches!(
            VectorDataset::from_geojson_str(&doc.to_string(), schema),
            Err(Error::Dataset(_))
        ));
    }

    #[test]
    fn multipolygon_flattened() {
        let doc = serde_json::json!({
            "type": "Feature",
            "properties": {},
            "geometry": {"type": "MultiPolygon", "coordinates": [square(0.0, 0.0, 1.0), square(5.0, 5.0, 2.0)]}
        });
        let ds =
            VectorDataset::from_geojson_str(&doc.to_string(), DatasetSchema::default()).unwrap();
        assert_eq!(ds.crs, Crs::Geographic);
        assert_eq!(ds.dissolve_all("all").unwrap().area(), 5.0);
    }
}
