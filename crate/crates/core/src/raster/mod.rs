//! Georeferenced grid model.
//!
//! A [`RasterGrid`] pairs a row-major value array with an explicit validity
//! mask and an axis-aligned [`GeoTransform`]. Invalid pixels never take part
//! in statistics, composites or area sums; the value stored under an invalid
//! pixel is unspecified and ignored by equality.

mod geotiff;
pub mod tile;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Sample;

pub use geotiff::{read_geotiff, read_geotiff_as, write_geotiff, DynGrid, GeoTiffSample};

/// Coordinate reference system of a grid or geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Crs {
    /// Longitude/latitude degrees on WGS84 (EPSG:4326).
    Geographic,
    /// Metric projected CRS identified by its EPSG code.
    Projected { epsg: u16 },
}

impl Crs {
    pub const WGS84_EPSG: u16 = 4326;

    pub fn from_epsg(code: u16) -> Self {
        if code == Self::WGS84_EPSG {
            Crs::Geographic
        } else {
            Crs::Projected { epsg: code }
        }
    }

    pub fn epsg(&self) -> u16 {
        match self {
            Crs::Geographic => Self::WGS84_EPSG,
            Crs::Projected { epsg } => *epsg,
        }
    }

    pub fn is_geographic(&self) -> bool {
        matches!(self, Crs::Geographic)
    }
}

impl fmt::Display for Crs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EPSG:{}", self.epsg())
    }
}

impl FromStr for Crs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tail = s.trim().rsplit(':').next().unwrap_or_default().trim();
        if tail.eq_ignore_ascii_case("CRS84") {
            return Ok(Crs::Geographic);
        }
        tail.parse::<u16>()
            .map(Crs::from_epsg)
            .map_err(|_| Error::InvalidData(format!("unrecognized CRS `{s}`")))
    }
}

impl TryFrom<String> for Crs {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Crs> for String {
    fn from(c: Crs) -> String {
        c.to_string()
    }
}

/// Axis-aligned rectangle in CRS units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bbox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        if !(min_x.is_finite() && min_y.is_finite() && max_x.is_finite() && max_y.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite bbox".into()));
        }
        if min_x > max_x || min_y > max_y {
            return Err(Error::DegenerateGeometry(format!(
                "bbox min exceeds max: [{min_x}, {min_y}, {max_x}, {max_y}]"
            )));
        }
        Ok(Bbox {
            min_x,
            min_y,
            max_x,
            max_y,
        })
    }

    /// Bbox spanning the whole globe in geographic degrees.
    pub fn world() -> Self {
        Bbox {
            min_x: -180.0,
            min_y: -90.0,
            max_x: 180.0,
            max_y: 90.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.min_x, self.min_y, self.max_x, self.max_y]
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    /// Closed-interval intersection test (touching edges count).
    pub fn intersects(&self, other: &Bbox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn union(&self, other: &Bbox) -> Bbox {
        Bbox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn from_points<I: IntoIterator<Item = (f64, f64)>>(points: I) -> Option<Bbox> {
        let mut it = points.into_iter();
        let (x0, y0) = it.next()?;
        let mut b = Bbox {
            min_x: x0,
            min_y: y0,
            max_x: x0,
            max_y: y0,
        };
        for (x, y) in it {
            b.min_x = b.min_x.min(x);
            b.min_y = b.min_y.min(y);
            b.max_x = b.max_x.max(x);
            b.max_y = b.max_y.max(y);
        }
        Some(b)
    }
}

/// Affine, axis-aligned mapping from pixel indices to CRS coordinates.
///
/// Pixel `(col, row)` covers `[origin_x + col·pw, origin_x + (col+1)·pw]`
/// horizontally and `origin_y + row·ph` to `origin_y + (row+1)·ph`
/// vertically; `ph < 0` for north-up grids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_width: f64,
    pub pixel_height: f64,
    pub crs: Crs,
}

impl GeoTransform {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        pixel_width: f64,
        pixel_height: f64,
        crs: Crs,
    ) -> Result<Self> {
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::UnsupportedGeometry("non-finite origin".into()));
        }
        if !(pixel_width.is_finite() && pixel_width > 0.0) {
            return Err(Error::UnsupportedGeometry(format!(
                "pixel width must be positive, got {pixel_width}"
            )));
        }
        if !(pixel_height.is_finite() && pixel_height != 0.0) {
            return Err(Error::UnsupportedGeometry(format!(
                "pixel height must be non-zero, got {pixel_height}"
            )));
        }
        Ok(GeoTransform {
            origin_x,
            origin_y,
            pixel_width,
            pixel_height,
            crs,
        })
    }

    /// North-up transform with square pixels of `scale` CRS units.
    pub fn north_up(origin_x: f64, origin_y: f64, scale: f64, crs: Crs) -> Result<Self> {
        Self::new(origin_x, origin_y, scale, -scale, crs)
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_width,
            self.origin_y + (row as f64 + 0.5) * self.pixel_height,
        )
    }

    pub fn center_x(&self, col: usize) -> f64 {
        self.origin_x + (col as f64 + 0.5) * self.pixel_width
    }

    pub fn center_y(&self, row: usize) -> f64 {
        self.origin_y + (row as f64 + 0.5) * self.pixel_height
    }

    pub fn extent(&self, width: usize, height: usize) -> Bbox {
        let x1 = self.origin_x + width as f64 * self.pixel_width;
        let y1 = self.origin_y + height as f64 * self.pixel_height;
        Bbox {
            min_x: self.origin_x.min(x1),
            min_y: self.origin_y.min(y1),
            max_x: self.origin_x.max(x1),
            max_y: self.origin_y.max(y1),
        }
    }

    /// Transform of the sub-grid starting at `(col, row)`.
    pub fn shifted(&self, col: usize, row: usize) -> GeoTransform {
        GeoTransform {
            origin_x: self.origin_x + col as f64 * self.pixel_width,
            origin_y: self.origin_y + row as f64 * self.pixel_height,
            ..*self
        }
    }

    /// Mean absolute pixel edge length in CRS units.
    pub fn scale(&self) -> f64 {
        (self.pixel_width.abs() + self.pixel_height.abs()) / 2.0
    }
}

/// Fractional pixel index with near-integers snapped, so bboxes built from
/// pixel edges map back onto whole indices.
fn fractional_index(coord: f64, origin: f64, step: f64) -> f64 {
    let f = (coord - origin) / step;
    let r = f.round();
    if (f - r).abs() < 1e-9 {
        r
    } else {
        f
    }
}

/// Row-major grid of values with a validity mask and georeferencing.
#[derive(Clone, Debug)]
pub struct RasterGrid<T> {
    width: usize,
    height: usize,
    transform: GeoTransform,
    values: Vec<T>,
    valid: Vec<bool>,
}

impl<T: Sample> RasterGrid<T> {
    pub fn new(
        width: usize,
        height: usize,
        transform: GeoTransform,
        values: Vec<T>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidData("grid dimensions overflow".into()))?;
        if values.len() != n || valid.len() != n {
            return Err(Error::GridMismatch(format!(
                "{width}x{height} grid needs {n} values and flags, got {} and {}",
                values.len(),
                valid.len()
            )));
        }
        Ok(RasterGrid {
            width,
            height,
            transform,
            values,
            valid,
        })
    }

    /// Fully valid grid.
    pub fn from_values(
        width: usize,
        height: usize,
        transform: GeoTransform,
        values: Vec<T>,
    ) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::new(width, height, transform, values, valid)
    }

    pub fn filled(width: usize, height: usize, transform: GeoTransform, value: T) -> Self {
        let n = width * height;
        RasterGrid {
            width,
            height,
            transform,
            values: vec![value; n],
            valid: vec![true; n],
        }
    }

    /// Builds a grid from a per-pixel function returning `None` for invalid
    /// pixels. `fill` is stored under invalid pixels.
    pub fn from_fn<F>(
        width: usize,
        height: usize,
        transform: GeoTransform,
        fill: T,
        mut f: F,
    ) -> Self
    where
        F: FnMut(usize, usize) -> Option<T>,
    {
        let n = width * height;
        let mut values = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for row in 0..height {
            for col in 0..width {
                match f(col, row) {
                    Some(v) => {
                        values.push(v);
                        valid.push(true);
                    }
                    None => {
                        values.push(fill);
                        valid.push(false);
                    }
                }
            }
        }
        RasterGrid {
            width,
            height,
            transform,
            values,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn crs(&self) -> Crs {
        self.transform.crs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn extent(&self) -> Bbox {
        self.transform.extent(self.width, self.height)
    }

    fn index(&self, col: usize, row: usize) -> usize {
        debug_assert!(col < self.width && row < self.height);
        row * self.width + col
    }

    /// Value of a valid pixel, `None` when masked or out of bounds.
    pub fn get(&self, col: usize, row: usize) -> Option<T> {
        if col >= self.width || row >= self.height {
            return None;
        }
        let i = self.index(col, row);
        self.valid[i].then(|| self.values[i])
    }

    pub fn is_valid(&self, col: usize, row: usize) -> bool {
        col < self.width && row < self.height && self.valid[self.index(col, row)]
    }

    /// Raw stored value regardless of validity.
    pub fn raw(&self, col: usize, row: usize) -> T {
        self.values[self.index(col, row)]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Iterator over `Some(value)` for valid pixels and `None` otherwise.
    pub fn iter(&self) -> impl Iterator<Item = Option<T>> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .map(|(v, ok)| ok.then_some(*v))
    }

    /// Row slice of values and validity flags.
    pub fn row(&self, row: usize) -> (&[T], &[bool]) {
        let s = row * self.width;
        (
            &self.values[s..s + self.width],
            &self.valid[s..s + self.width],
        )
    }

    pub fn same_grid<U: Sample>(&self, other: &RasterGrid<U>) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.transform == other.transform
    }

    pub fn ensure_aligned<U: Sample>(&self, other: &RasterGrid<U>) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} {:?} vs {}x{} {:?}",
                self.width, self.height, self.transform, other.width, other.height, other.transform
            )))
        }
    }

    /// Pixelwise map preserving validity.
    pub fn map<U: Sample, F: Fn(T) -> U>(&self, f: F) -> RasterGrid<U> {
        RasterGrid {
            width: self.width,
            height: self.height,
            transform: self.transform,
            values: self.values.iter().map(|v| f(*v)).collect(),
            valid: self.valid.clone(),
        }
    }

    /// Pixelwise map that may invalidate pixels.
    pub fn filter_map<U: Sample, F: Fn(T) -> Option<U>>(&self, fill: U, f: F) -> RasterGrid<U> {
        let mut valid = self.valid.clone();
        let values = self
            .values
            .iter()
            .zip(valid.iter_mut())
            .map(|(v, ok)| {
                if !*ok {
                    return fill;
                }
                match f(*v) {
                    Some(u) => u,
                    None => {
                        *ok = false;
                        fill
                    }
                }
            })
            .collect();
        RasterGrid {
            width: self.width,
            height: self.height,
            transform: self.transform,
            values,
            valid,
        }
    }

    /// Same values with a replacement validity mask.
    pub fn with_validity(&self, valid: Vec<bool>) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.transform,
            self.values.clone(),
            valid,
        )
    }

    /// Cuts out the pixels whose footprint overlaps `bbox`.
    ///
    /// The result's origin is shifted by whole pixels; values are never
    /// resampled.
    pub fn crop(&self, bbox: &Bbox) -> Result<Self> {
        let t = &self.transform;
        if !(bbox.min_x.is_finite()
            && bbox.max_x.is_finite()
            && bbox.min_y.is_finite()
            && bbox.max_y.is_finite())
        {
            return Err(Error::EmptyRegion);
        }
        let (c_lo, c_hi) = {
            let a = fractional_index(bbox.min_x, t.origin_x, t.pixel_width);
            let b = fractional_index(bbox.max_x, t.origin_x, t.pixel_width);
            (a.min(b), a.max(b))
        };
        let (r_lo, r_hi) = {
            let a = fractional_index(bbox.min_y, t.origin_y, t.pixel_height);
            let b = fractional_index(bbox.max_y, t.origin_y, t.pixel_height);
            (a.min(b), a.max(b))
        };
        let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64) as usize;
        let c0 = clamp(c_lo.floor(), self.width);
        let c1 = clamp(c_hi.ceil(), self.width);
        let r0 = clamp(r_lo.floor(), self.height);
        let r1 = clamp(r_hi.ceil(), self.height);
        if c1 <= c0 || r1 <= r0 {
            return Err(Error::EmptyRegion);
        }
        Ok(self.window(c0, r0, c1 - c0, r1 - r0))
    }

    /// Sub-grid of `w × h` pixels starting at `(col, row)`. Panics when the
    /// window exceeds the grid.
    pub fn window(&self, col: usize, row: usize, w: usize, h: usize) -> Self {
        assert!(col + w <= self.width && row + h <= self.height);
        let mut values = Vec::with_capacity(w * h);
        let mut valid = Vec::with_capacity(w * h);
        for r in row..row + h {
            let s = r * self.width + col;
            values.extend_from_slice(&self.values[s..s + w]);
            valid.extend_from_slice(&self.valid[s..s + w]);
        }
        RasterGrid {
            width: w,
            height: h,
            transform: self.transform.shifted(col, row),
            values,
            valid,
        }
    }

    /// Nearest-neighbour resampling onto another grid in the same CRS: each
    /// target pixel takes the source pixel containing its center. Targets
    /// outside the source are invalid.
    pub fn resample_nearest(
        &self,
        target: &GeoTransform,
        width: usize,
        height: usize,
    ) -> Result<RasterGrid<T>> {
        let t = &self.transform;
        if t.crs != target.crs {
            return Err(Error::CrsMismatch {
                roi: target.crs.to_string(),
                grid: t.crs.to_string(),
            });
        }
        let index = |v: f64, origin: f64, step: f64, n: usize| {
            let i = ((v - origin) / step).floor();
            (i >= 0.0 && i < n as f64).then_some(i as usize)
        };
        let cols: Vec<Option<usize>> = (0..width)
            .map(|c| index(target.center_x(c), t.origin_x, t.pixel_width, self.width))
            .collect();
        let Some(&fill) = self.values.first() else {
            return Err(Error::EmptyRegion);
        };
        Ok(RasterGrid::from_fn(width, height, *target, fill, |c, r| {
            let row = index(target.center_y(r), t.origin_y, t.pixel_height, self.height)?;
            self.get(cols[c]?, row)
        }))
    }

    pub fn into_parts(self) -> (usize, usize, GeoTransform, Vec<T>, Vec<bool>) {
        (
            self.width,
            self.height,
            self.transform,
            self.values,
            self.valid,
        )
    }
}

impl<T: Sample> PartialEq for RasterGrid<T> {
    /// Equal when dimensions, transform and validity match and every valid
    /// pixel holds the same value. Values under invalid pixels are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other)
            && self.valid == other.valid
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.valid)
                .all(|((a, b), ok)| !*ok || a == b)
    }
}
