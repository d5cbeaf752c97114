//! Per-scene NDVI, per-pixel median compositing and threshold classification.

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::tile::Tiling;
use crate::raster::RasterGrid;
use crate::scalar::{Numeric, Real};
use crate::sensor::{SensorId, SensorSpec};

/// `(nir − red) / (nir + red)` evaluated in `f64`.
///
/// Differences and sums of `f32` reflectances are exact in `f64` for any
/// realistic dynamic range, so the result depends only on the exact input
/// ratio and is unchanged by any exact positive rescaling of both bands.
/// Returns `None` for a zero or non-finite denominator.
pub fn ndvi_value(red: f64, nir: f64) -> Option<f64> {
    let denom = nir + red;
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    let v = (nir - red) / denom;
    v.is_finite().then_some(v)
}

/// NDVI for every pixel valid in both bands.
pub fn ndvi_scene<T: Real>(red: &RasterGrid<T>, nir: &RasterGrid<T>) -> Result<RasterGrid<T>> {
    red.ensure_aligned(nir)?;
    Ok(ndvi_pixels(red, nir, |v| v.to_f64_lossless()))
}

/// NDVI straight from digital numbers.
///
/// With a zero offset the reflectance scale cancels, so the ratio is taken
/// on the raw numbers; otherwise reflectance `dn × scale + offset` is formed
/// first.
pub fn ndvi_from_dn<D: Numeric, T: Real>(
    red: &RasterGrid<D>,
    nir: &RasterGrid<D>,
    spec: &SensorSpec,
) -> Result<RasterGrid<T>> {
    red.ensure_aligned(nir)?;
    let (scale, offset) = (spec.reflectance_scale, spec.reflectance_offset);
    let to_f64 = |v: D| v.to_f64().unwrap_or(f64::NAN);
    Ok(if offset == 0.0 {
        ndvi_pixels(red, nir, to_f64)
    } else {
        ndvi_pixels(red, nir, move |v| to_f64(v) * scale + offset)
    })
}

fn ndvi_pixels<D: Numeric, T: Real, F: Fn(D) -> f64>(
    red: &RasterGrid<D>,
    nir: &RasterGrid<D>,
    reflect: F,
) -> RasterGrid<T> {
    let t = *red.transform();
    let (w, h) = (red.width(), red.height());
    RasterGrid::from_fn(w, h, t, T::zero(), |c, r| {
        let (rv, nv) = (red.get(c, r)?, nir.get(c, r)?);
        ndvi_value(reflect(rv), reflect(nv)).map(T::from_f64_lossy)
    })
}

/// Median of `samples` (reordered in place). Even counts average the two
/// central values in `f64`. Sorting uses the IEEE total order, so `-0.0`
/// precedes `0.0` and the result never depends on input order.
pub fn median_of<T: Real>(samples: &mut [T]) -> Option<T> {
    let n = samples.len();
    if n == 0 {
        return None;
    }
    samples.sort_unstable_by(|a, b| a.to_f64_lossless().total_cmp(&b.to_f64_lossless()));
    Some(if n % 2 == 1 {
        samples[n / 2]
    } else {
        let lo = samples[n / 2 - 1].to_f64_lossless();
        let hi = samples[n / 2].to_f64_lossless();
        T::from_f64_lossy((lo + hi) / 2.0)
    })
}

/// Per-pixel median over the valid samples of a co-registered stack.
pub fn median_composite<T: Real>(stack: &[RasterGrid<T>]) -> Result<RasterGrid<T>> {
    median_composite_with(stack, &Tiling::untiled())
}

/// [`median_composite`] split into row blocks according to `tiling`.
pub fn median_composite_with<T: Real>(
    stack: &[RasterGrid<T>],
    tiling: &Tiling,
) -> Result<RasterGrid<T>> {
    let first = stack.first().ok_or(Error::EmptyStack)?;
    for g in &stack[1..] {
        first.ensure_aligned(g)?;
    }
    let (w, h) = (first.width(), first.height());
    let pixels: Vec<Option<T>> = tiling.map_rows(w, h, |rows| {
        let mut buf = Vec::with_capacity(stack.len());
        let mut out = Vec::with_capacity(rows.len() * w);
        for row in rows {
            for col in 0..w {
                buf.clear();
                buf.extend(
                    stack
                        .iter()
                        .filter_map(|g| g.get(col, row))
                        .filter(|v| !v.is_nan()),
                );
                out.push(median_of(&mut buf));
            }
        }
        out
    });
    let valid = pixels.iter().map(Option::is_some).collect();
    let values = pixels
        .into_iter()
        .map(|v| v.unwrap_or_else(T::nan))
        .collect();
    RasterGrid::new(w, h, *first.transform(), values, valid)
}

/// Median NDVI over an analysis window.
#[derive(Clone, Debug, PartialEq)]
pub struct NdviComposite<T: Real = f32> {
    pub grid: RasterGrid<T>,
    pub scene_count: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub sensor_id: SensorId,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositeMeta {
    pub scene_count: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub sensor_id: SensorId,
}

impl<T: Real> NdviComposite<T> {
    pub fn from_stack(
        stack: &[RasterGrid<T>],
        meta: CompositeMeta,
        tiling: &Tiling,
    ) -> Result<Self> {
        if meta.scene_count != stack.len() {
            return Err(Error::InvalidData(format!(
                "scene_count {} does not match stack of {}",
                meta.scene_count,
                stack.len()
            )));
        }
        Ok(NdviComposite {
            grid: median_composite_with(stack, tiling)?,
            scene_count: meta.scene_count,
            start_date: meta.start_date,
            end_date: meta.end_date,
            sensor_id: meta.sensor_id,
        })
    }
}

/// Self-masked classification: value 1 where retained, invalid elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdMask {
    pub grid: RasterGrid<u8>,
    pub ndvi_min: f64,
    pub ndvi_max: f64,
}

impl ThresholdMask {
    pub fn retained_count(&self) -> usize {
        self.grid.valid_count()
    }
}

/// Retains composite pixels with `ndvi_min ≤ value ≤ ndvi_max`. Bounds are
/// compared in the composite's own precision.
pub fn threshold_mask<T: Real>(
    composite: &RasterGrid<T>,
    ndvi_min: f64,
    ndvi_max: f64,
) -> Result<ThresholdMask> {
    if !((-1.0..=1.0).contains(&ndvi_min)
        && (-1.0..=1.0).contains(&ndvi_max)
        && ndvi_min < ndvi_max)
    {
        return Err(Error::InvalidData(format!(
            "threshold interval [{ndvi_min}, {ndvi_max}] must satisfy -1 <= min < max <= 1"
        )));
    }
    let (lo, hi) = (T::from_f64_lossy(ndvi_min), T::from_f64_lossy(ndvi_max));
    let grid = composite.filter_map(0u8, |v| (v >= lo && v <= hi).then_some(1));
    Ok(ThresholdMask {
        grid,
        ndvi_min,
        ndvi_max,
    })
}
