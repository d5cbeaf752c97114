//! Area quantification and mean-NDVI time series.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndvi::ThresholdMask;
use crate::raster::tile::{NeumaierSum, Tiling};
use crate::raster::{Crs, GeoTransform, RasterGrid};
use crate::scalar::Real;

/// Radius of the sphere with the WGS84 ellipsoid's surface area, in meters.
pub const AUTHALIC_RADIUS_M: f64 = 6_371_007.180_9;

const M2_PER_KM2: f64 = 1.0e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaBasis {
    /// Every pixel has the same planar area.
    ProjectedConstant,
    /// Spherical latitude-band area per row.
    SphericalPerRow,
}

impl AreaBasis {
    pub fn as_str(&self) -> &'static str {
        match self {
            AreaBasis::ProjectedConstant => "projected-constant",
            AreaBasis::SphericalPerRow => "spherical-per-row",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub area_km2: f64,
    pub pixel_count: usize,
    pub pixel_area_basis: AreaBasis,
    pub crs: Crs,
}

/// Area of the spherical band between two latitudes over `dlon_deg` degrees.
pub fn spherical_band_area(lat_a_deg: f64, lat_b_deg: f64, dlon_deg: f64) -> f64 {
    let clamp = |v: f64| v.clamp(-90.0, 90.0).to_radians().sin();
    AUTHALIC_RADIUS_M
        * AUTHALIC_RADIUS_M
        * dlon_deg.abs().to_radians()
        * (clamp(lat_a_deg) - clamp(lat_b_deg)).abs()
}

pub fn area_basis(crs: Crs) -> AreaBasis {
    if crs.is_geographic() {
        AreaBasis::SphericalPerRow
    } else {
        AreaBasis::ProjectedConstant
    }
}

/// Area of every pixel in m². Projected CRS units are taken as meters.
pub fn pixel_area_grid<F: Real>(
    transform: &GeoTransform,
    width: usize,
    height: usize,
) -> RasterGrid<F> {
    match area_basis(transform.crs) {
        AreaBasis::ProjectedConstant => {
            let a = (transform.pixel_width * transform.pixel_height).abs();
            RasterGrid::filled(width, height, *transform, F::from_f64_lossy(a))
        }
        AreaBasis::SphericalPerRow => {
            let rows: Vec<F> = (0..height)
                .map(|r| {
                    let top = transform.origin_y + r as f64 * transform.pixel_height;
                    let bottom = top + transform.pixel_height;
                    F::from_f64_lossy(spherical_band_area(top, bottom, transform.pixel_width))
                })
                .collect();
            RasterGrid::from_fn(width, height, *transform, F::zero(), |_, r| Some(rows[r]))
        }
    }
}

/// Summed area of pixels retained by `mask` and inside `roi_mask`, in km².
pub fn masked_area_km2(
    mask: &ThresholdMask,
    roi_mask: &RasterGrid<bool>,
    areas: &RasterGrid<f64>,
) -> Result<AreaReport> {
    masked_area_km2_with(mask, roi_mask, areas, &Tiling::untiled())
}

pub fn masked_area_km2_with(
    mask: &ThresholdMask,
    roi_mask: &RasterGrid<bool>,
    areas: &RasterGrid<f64>,
    tiling: &Tiling,
) -> Result<AreaReport> {
    let m = &mask.grid;
    m.ensure_aligned(roi_mask)?;
    m.ensure_aligned(areas)?;
    let (w, h) = (m.width(), m.height());
    let per_row = tiling.map_rows(w, h, |rows| {
        rows.map(|row| {
            let mut sum = NeumaierSum::new();
            let mut count = 0usize;
            for col in 0..w {
                if m.is_valid(col, row) && roi_mask.get(col, row) == Some(true) {
                    if let Some(a) = areas.get(col, row) {
                        sum.add(a);
                        count += 1;
                    }
                }
            }
            (sum.value(), count)
        })
        .collect()
    });
    let total: NeumaierSum = per_row.iter().map(|(s, _)| *s).collect();
    let pixel_count = per_row.iter().map(|(_, c)| c).sum();
    Ok(AreaReport {
        area_km2: total.value() / M2_PER_KM2,
        pixel_count,
        pixel_area_basis: area_basis(m.crs()),
        crs: m.crs(),
    })
}

/// Unweighted mean over pixels valid in `ndvi` and true in `roi_mask`, with
/// the number of contributing pixels.
pub fn mean_ndvi_with_count<T: Real>(
    ndvi: &RasterGrid<T>,
    roi_mask: &RasterGrid<bool>,
) -> Result<(Option<f64>, usize)> {
    ndvi.ensure_aligned(roi_mask)?;
    let mut sum = NeumaierSum::new();
    let mut n = 0usize;
    for (v, inside) in ndvi.iter().zip(roi_mask.iter()) {
        if let (Some(v), Some(true)) = (v, inside) {
            sum.add(v.to_f64_lossless());
            n += 1;
        }
    }
    Ok(((n > 0).then(|| sum.value() / n as f64), n))
}

pub fn mean_ndvi<T: Real>(
    ndvi: &RasterGrid<T>,
    roi_mask: &RasterGrid<bool>,
) -> Result<Option<f64>> {
    Ok(mean_ndvi_with_count(ndvi, roi_mask)?.0)
}

/// One cloud-masked NDVI scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneNdvi<T: Real = f32> {
    pub scene_id: String,
    pub date: NaiveDate,
    pub ndvi: RasterGrid<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPoint {
    pub timestamp: NaiveDate,
    /// Absent when the scene has no clear pixel inside the ROI.
    pub mean_ndvi: Option<f64>,
    pub valid_pixel_count: usize,
    pub scene_id: String,
}

/// One point per scene, ordered by timestamp and then scene id.
pub fn time_series<T: Real>(
    scenes: &[SceneNdvi<T>],
    roi_mask: &RasterGrid<bool>,
) -> Result<Vec<TimeSeriesPoint>> {
    let mut points = scenes
        .iter()
        .map(|s| {
            let (mean, n) = mean_ndvi_with_count(&s.ndvi, roi_mask)?;
            Ok(TimeSeriesPoint {
                timestamp: s.date,
                mean_ndvi: mean,
                valid_pixel_count: n,
                scene_id: s.scene_id.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.scene_id.cmp(&b.scene_id))
    });
    Ok(points)
}

/// CSV with header `timestamp,mean_ndvi,valid_pixel_count,scene_id`; absent
/// means are empty fields.
pub fn time_series_csv(points: &[TimeSeriesPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidData(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndvi::threshold_mask;

    fn utm30() -> GeoTransform {
        GeoTransform::north_up(0.0, 0.0, 30.0, Crs::from_epsg(32630)).unwrap()
    }

    #[test]
    fn projected_pixels_are_900_m2() {
        let a: RasterGrid<f64> = pixel_area_grid(&utm30(), 4, 4);
        assert!(a.iter().all(|v| v == Some(900.0)));
    }

    #[test]
    fn one_degree_equatorial_pixel() {
        let t = GeoTransform::north_up(0.0, 1.0, 1.0, Crs::Geographic).unwrap();
        let a: RasterGrid<f64> = pixel_area_grid(&t, 1, 1);
        // R² · (π/180) · sin(1°)
        let expect =
            AUTHALIC_RADIUS_M.powi(2) * std::f64::consts::PI / 180.0 * (1.0f64).to_radians().sin();
        assert!((a.raw(0, 0) - expect).abs() / expect < 1e-12);
        assert!((a.raw(0, 0) - 1.2364e10).abs() < 5e6);
    }

    #[test]
    fn seven_pixels_area() {
        let t = utm30();
        let comp = RasterGrid::from_fn(4, 4, t, 0.0f32, |c, r| (r * 4 + c < 7).then_some(0.5));
        let mask = threshold_mask(&comp, -1.0, 1.0).unwrap();
        let roi = RasterGrid::filled(4, 4, t, true);
        let r = masked_area_km2(&mask, &roi, &pixel_area_grid(&t, 4, 4)).unwrap();
        assert_eq!(r.pixel_count, 7);
        assert_eq!(r.area_km2, 6300.0 / 1e6);
        assert_eq!(r.pixel_area_basis, AreaBasis::ProjectedConstant);
    }

    #[test]
    fn empty_mask_is_zero() {
        let t = utm30();
        let comp = RasterGrid::new(2, 2, t, vec![0.0f32; 4], vec![false; 4]).unwrap();
        let mask = threshold_mask(&comp, -1.0, 1.0).unwrap();
        let r = masked_area_km2(
            &mask,
            &RasterGrid::filled(2, 2, t, true),
            &pixel_area_grid(&t, 2, 2),
        )
        .unwrap();
        assert_eq!((r.area_km2, r.pixel_count), (0.0, 0));
    }

    #[test]
    fn mean_examples() {
        let t = utm30();
        let roi = RasterGrid::filled(4, 4, t, true);
        assert_eq!(
            mean_ndvi(&RasterGrid::filled(4, 4, t, 0.4f64), &roi).unwrap(),
            Some(0.4)
        );
        let half = RasterGrid::from_fn(4, 4, t, 0.0f64, |c, _| Some(if c < 2 { 0.2 } else { 0.6 }));
        assert!((mean_ndvi(&half, &roi).unwrap().unwrap() - 0.4).abs() < 1e-15);
        let cloudy = RasterGrid::new(4, 4, t, vec![0.3f32; 16], vec![false; 16]).unwrap();
        assert_eq!(mean_ndvi(&cloudy, &roi).unwrap(), None);
    }

    #[test]
    fn series_sorted_with_gaps() {
        let t = utm30();
        let roi = RasterGrid::filled(2, 2, t, true);
        let scene = |id: &str, d: &str, valid: bool| SceneNdvi {
            scene_id: id.into(),
            date: d.parse().unwrap(),
            ndvi: RasterGrid::new(2, 2, t, vec![0.5f32; 4], vec![valid; 4]).unwrap(),
        };
        let pts = time_series(
            &[
                scene("c", "2021-03-01", true),
                scene("a", "2021-01-01", true),
                scene("b", "2021-02-01", false),
            ],
            &roi,
        )
        .unwrap();
        assert_eq!(
            pts.iter().map(|p| p.scene_id.as_str()).collect::<Vec<_>>(),
            ["a", "b", "c"]
        );
        assert_eq!(pts[1].mean_ndvi, None);
        assert_eq!(pts[1].valid_pixel_count, 0);
        assert!(time_series::<f32>(&[], &roi).unwrap().is_empty());
        let csv = time_series_csv(&pts).unwrap();
        assert!(csv.starts_with("timestamp,mean_ndvi,valid_pixel_count,scene_id\n"));
        assert!(csv.contains("2021-02-01,,0,b\n"));
    }
}
