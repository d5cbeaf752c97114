//! Synthetic scene sets with known answers, for tests and demos.
//!
//! The Sentinel-2 set is a 40 × 40 grid of 10 m pixels in UTM 46N with four
//! land-cover zones of fixed NDVI, six dated scenes with varying cloud, a
//! 30 × 30 pixel square ROI, and small admin and protected-area datasets
//! laid over the same grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::pipeline::{AnalysisRequest, RoiSpec, SourceSpec};
use crate::raster::{write_geotiff, Crs, GeoTransform, RasterGrid};
use crate::sensor::{AnalysisParams, SensorId};

pub const GRID: usize = 40;
pub const PIXEL_M: f64 = 10.0;
pub const ORIGIN_X: f64 = 380_000.0;
pub const ORIGIN_Y: f64 = 2_700_000.0;
pub const EPSG: u16 = 32646;
/// ROI pixel window: columns and rows `ROI_LO..ROI_HI`.
pub const ROI_LO: usize = 5;
pub const ROI_HI: usize = 35;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Zone {
    Dense,
    Sparse,
    Barren,
    Water,
}

impl Zone {
    pub fn at(col: usize, row: usize) -> Zone {
        match (row, col) {
            (r, _) if r < 15 => Zone::Dense,
            (r, _) if r < 25 => Zone::Sparse,
            (_, c) if c < 20 => Zone::Barren,
            _ => Zone::Water,
        }
    }

    /// Clear-sky (red, nir) digital numbers.
    pub fn dn(&self) -> (u16, u16) {
        match self {
            Zone::Dense => (500, 3500),
            Zone::Sparse => (1300, 2700),
            Zone::Barren => (1900, 2100),
            Zone::Water => (700, 300),
        }
    }

    fn scl(&self) -> u16 {
        match self {
            Zone::Dense | Zone::Sparse => 4,
            Zone::Barren => 5,
            Zone::Water => 6,
        }
    }
}

/// Obstruction covering a pixel rectangle `[c0, c1) × [r0, r1)`.
#[derive(Clone, Copy, Debug)]
pub struct Patch {
    pub cols: (usize, usize),
    pub rows: (usize, usize),
    pub scl: u16,
    pub dn: (u16, u16),
}

impl Patch {
    pub fn covers(&self, col: usize, row: usize) -> bool {
        (self.cols.0..self.cols.1).contains(&col) && (self.rows.0..self.rows.1).contains(&row)
    }
}

#[derive(Clone, Debug)]
pub struct FixtureScene {
    pub scene_id: &'static str,
    pub date: &'static str,
    pub cloud_pct: f64,
    /// Added to every NIR value.
    pub nir_jitter: i32,
    pub patches: Vec<Patch>,
}

impl FixtureScene {
    pub fn date(&self) -> NaiveDate {
        self.date.parse().expect("fixture date")
    }

    /// (red, nir, scl) at a pixel.
    pub fn pixel(&self, col: usize, row: usize) -> (u16, u16, u16) {
        if let Some(p) = self.patches.iter().rev().find(|p| p.covers(col, row)) {
            return (p.dn.0, p.dn.1, p.scl);
        }
        let z = Zone::at(col, row);
        let (r, n) = z.dn();
        (r, (n as i32 + self.nir_jitter) as u16, z.scl())
    }
}

const fn patch(cols: (usize, usize), rows: (usize, usize), scl: u16, dn: (u16, u16)) -> Patch {
    Patch {
        cols,
        rows,
        scl,
        dn,
    }
}

/// The six Sentinel-2 scenes; four have cloud cover of at most 10 %.
pub fn sentinel2_scenes() -> Vec<FixtureScene> {
    vec![
        FixtureScene {
            scene_id: "S2_20210105",
            date: "2021-01-05",
            cloud_pct: 2.0,
            nir_jitter: 0,
            patches: vec![],
        },
        FixtureScene {
            scene_id: "S2_20210120",
            date: "2021-01-20",
            cloud_pct: 8.5,
            nir_jitter: 30,
            patches: vec![patch((8, 20), (8, 12), 9, (4000, 4200))],
        },
        FixtureScene {
            scene_id: "S2_20210209",
            date: "2021-02-09",
            cloud_pct: 35.0,
            nir_jitter: -30,
            patches: vec![
                patch((0, GRID), (0, 25), 8, (3600, 3900)),
                patch((0, GRID), (25, 28), 3, (200, 250)),
            ],
        },
        FixtureScene {
            scene_id: "S2_20210224",
            date: "2021-02-24",
            cloud_pct: 96.0,
            nir_jitter: 0,
            patches: vec![patch((0, GRID), (0, GRID), 9, (5000, 5200))],
        },
        FixtureScene {
            scene_id: "S2_20210310",
            date: "2021-03-10",
            cloud_pct: 6.0,
            nir_jitter: 60,
            patches: vec![patch((22, 30), (30, 33), 3, (150, 160))],
        },
        FixtureScene {
            scene_id: "S2_20210325",
            date: "2021-03-25",
            cloud_pct: 1.5,
            nir_jitter: -60,
            patches: vec![patch((GRID - 1, GRID), (0, GRID), 0, (0, 0))],
        },
    ]
}

pub fn transform() -> GeoTransform {
    GeoTransform::north_up(ORIGIN_X, ORIGIN_Y, PIXEL_M, Crs::from_epsg(EPSG))
        .expect("fixture transform")
}

/// Map coordinates of a pixel corner.
pub fn corner(col: usize, row: usize) -> (f64, f64) {
    (
        ORIGIN_X + col as f64 * PIXEL_M,
        ORIGIN_Y - row as f64 * PIXEL_M,
    )
}

fn rect(cols: (usize, usize), rows: (usize, usize)) -> Vec<[f64; 2]> {
    let (x0, y0) = corner(cols.0, rows.1);
    let (x1, y1) = corner(cols.1, rows.0);
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]
}

/// Vertices of the square ROI.
pub fn roi_vertices() -> Vec<[f64; 2]> {
    rect((ROI_LO, ROI_HI), (ROI_LO, ROI_HI))
}

pub fn in_roi(col: usize, row: usize) -> bool {
    (ROI_LO..ROI_HI).contains(&col) && (ROI_LO..ROI_HI).contains(&row)
}

/// Paths of a written fixture set.
#[derive(Clone, Debug)]
pub struct FixtureSet {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub roi: PathBuf,
    pub catalog: PathBuf,
    pub scenes: Vec<FixtureScene>,
}

impl FixtureSet {
    /// Request over the whole fixture period with the square ROI.
    pub fn request(&self, ndvi_min: f64, ndvi_max: f64, max_cloud_pct: f64) -> AnalysisRequest {
        AnalysisRequest {
            params: AnalysisParams {
                sensor_id: SensorId::Sentinel2,
                start_date: "2021-01-01".parse().expect("date"),
                end_date: "2021-03-31".parse().expect("date"),
                ndvi_min,
                ndvi_max,
                max_cloud_pct,
            },
            roi: Some(RoiSpec::Polygon {
                vertices: roi_vertices(),
                crs: Crs::from_epsg(EPSG),
            }),
            source: SourceSpec::Manifest {
                path: self.manifest.clone(),
            },
        }
    }
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::InvalidData(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn feature(props: Value, rings: Vec<Vec<[f64; 2]>>) -> Value {
    json!({
        "type": "Feature",
        "properties": props,
        "geometry": {"type": "Polygon", "coordinates": rings},
    })
}

fn collection(features: Vec<Value>) -> Value {
    json!({
        "type": "FeatureCollection",
        "crs": {"type": "name", "properties": {"name": format!("urn:ogc:def:crs:EPSG::{EPSG}")}},
        "features": features,
    })
}

/// Writes the Sentinel-2 fixture set under `dir`.
pub fn write_sentinel2_fixtures(dir: impl AsRef<Path>) -> Result<FixtureSet> {
    let dir = dir.as_ref();
    let scene_dir = dir.join("scenes");
    std::fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;
    let t = transform();
    let scenes = sentinel2_scenes();
    let mut entries = Vec::new();
    for s in &scenes {
        let band = |pick: fn((u16, u16, u16)) -> u16| {
            RasterGrid::from_fn(GRID, GRID, t, 0u16, |c, r| Some(pick(s.pixel(c, r))))
        };
        let mut paths = BTreeMap::new();
        for (label, grid) in [
            ("B4", band(|p| p.0)),
            ("B8", band(|p| p.1)),
            ("SCL", band(|p| p.2)),
        ] {
            let rel = format!("scenes/{}_{label}.tif", s.scene_id);
            write_geotiff(&grid, dir.join(&rel))?;
            paths.insert(label, rel);
        }
        entries.push(json!({
            "scene_id": s.scene_id,
            "sensor_id": SensorId::Sentinel2,
            "timestamp": s.date,
            "properties": {"CLOUDY_PIXEL_PERCENTAGE": s.cloud_pct},
            "bbox": t.extent(GRID, GRID).as_array(),
            "crs": Crs::from_epsg(EPSG),
            "band_paths": paths,
        }));
    }
    let manifest = dir.join("manifest.json");
    write_json(&manifest, &json!({ "entries": entries }))?;

    let roi = dir.join("roi.geojson");
    write_json(
        &roi,
        &collection(vec![feature(
            json!({"name": "study square"}),
            vec![roi_vertices()],
        )]),
    )?;

    let admin = collection(vec![
        feature(
            json!({"country": "Atlantis", "province": "North"}),
            vec![rect((5, 20), (5, 15))],
        ),
        feature(
            json!({"country": "Atlantis", "province": "North"}),
            vec![rect((20, 35), (5, 15))],
        ),
        feature(
            json!({"country": "Atlantis", "province": "Central"}),
            vec![rect((5, 35), (15, 25))],
        ),
        feature(
            json!({"country": "Atlantis", "province": "South"}),
            vec![rect((5, 35), (25, 35))],
        ),
        feature(
            json!({"country": "Lemuria", "province": "Isle"}),
            vec![rect((0, 5), (0, 5))],
        ),
    ]);
    write_json(&dir.join("admin.geojson"), &admin)?;

    let protected = collection(vec![
        feature(
            json!({"ISO3": "BGD", "NAME": "Lawachara National Park"}),
            vec![rect((5, 20), (5, 15))],
        ),
        feature(
            json!({"ISO3": "BGD", "NAME": "Teknaf Wildlife Sanctuary"}),
            vec![rect((20, 35), (25, 35))],
        ),
        feature(
            json!({"ISO3": "IND", "NAME": "Kaziranga National Park"}),
            vec![rect((5, 35), (15, 25))],
        ),
    ]);
    write_json(&dir.join("protected_areas.geojson"), &protected)?;

    let catalog = dir.join("datasets.json");
    write_json(
        &catalog,
        &json!({"datasets": [
            {"id": "admin", "kind": "admin", "path": "admin.geojson",
             "schema": {"hierarchy_keys": ["country", "province"]}},
            {"id": "protected", "kind": "protected_areas", "path": "protected_areas.geojson",
             "schema": {"hierarchy_keys": ["ISO3", "NAME"], "iso3_key": "ISO3", "name_key": "NAME"}},
        ]}),
    )?;

    Ok(FixtureSet {
        dir: dir.to_path_buf(),
        manifest,
        roi,
        catalog,
        scenes,
    })
}

/// QA_PIXEL word of a clear Landsat 8/9 land pixel (low-confidence bits set).
pub const QA_CLEAR: u16 = 21824;
/// QA_PIXEL word with the cloud bit set.
pub const QA_CLOUD: u16 = 22280;
/// QA_PIXEL word with only the cirrus bit among the flag bits.
pub const QA_CIRRUS: u16 = QA_CLEAR | (1 << 2);
pub const QA_FILL: u16 = 1;

type BandFn<'a> = Box<dyn Fn(usize, usize) -> u16 + 'a>;

/// A 12 × 12 Landsat 8 set at 30 m in UTM 30N: three scenes, the second with
/// a cloud block and cirrus column, the third with fill in its first row.
/// Red and NIR digital numbers are 9000 and 20000 wherever clear.
pub fn write_landsat8_fixtures(dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let t = GeoTransform::north_up(500_000.0, 4_000_000.0, 30.0, Crs::from_epsg(32630))?;
    let qa_of = |scene: usize, c: usize, r: usize| match scene {
        1 if r < 4 && c < 6 => QA_CLOUD,
        1 if c == 11 => QA_CIRRUS,
        2 if r == 0 => QA_FILL,
        _ => QA_CLEAR,
    };
    const CLOUD: [f64; 3] = [0.0, 12.0, 0.5];
    let mut entries = Vec::new();
    for (i, date) in ["2021-06-03", "2021-06-19", "2021-07-05"]
        .iter()
        .enumerate()
    {
        let id = format!("LC08_L2SP_{}", date.replace('-', ""));
        let mut paths = BTreeMap::new();
        let bands: [(&str, BandFn); 3] = [
            (
                "SR_B4",
                Box::new(|c, r| {
                    if qa_of(i, c, r) == QA_CLEAR {
                        9000
                    } else {
                        30000
                    }
                }),
            ),
            (
                "SR_B5",
                Box::new(|c, r| {
                    if qa_of(i, c, r) == QA_CLEAR {
                        20000
                    } else {
                        31000
                    }
                }),
            ),
            ("QA_PIXEL", Box::new(|c, r| qa_of(i, c, r))),
        ];
        for (label, f) in bands {
            let rel = format!("{id}_{label}.tif");
            let grid = RasterGrid::from_fn(12, 12, t, 0u16, |c, r| Some(f(c, r)));
            write_geotiff(&grid, dir.join(&rel))?;
            paths.insert(label, rel);
        }
        entries.push(json!({
            "scene_id": id,
            "sensor_id": SensorId::Landsat8,
            "timestamp": date,
            "properties": {"CLOUD_COVER": CLOUD[i]},
            "bbox": t.extent(12, 12).as_array(),
            "crs": Crs::from_epsg(32630),
            "band_paths": paths,
        }));
    }
    let manifest = dir.join("manifest.json");
    write_json(&manifest, &json!({ "entries": entries }))?;
    Ok(manifest)
}
