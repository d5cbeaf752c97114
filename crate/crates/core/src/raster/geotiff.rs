//! Minimal GeoTIFF support: single- and multi-band grayscale rasters with an
//! axis-aligned transform, an EPSG-coded CRS and a GDAL nodata tag.

use std::fs::File;
use std::io::{BufReader, BufWriter, Seek, Write};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::colortype::{self, ColorType};
use tiff::encoder::{TiffEncoder, TiffValue};
use tiff::tags::{PlanarConfiguration, Tag};

use super::{Crs, GeoTransform, RasterGrid};
use crate::error::{Error, Result};
use crate::scalar::Numeric;

const KEY_MODEL_TYPE: u16 = 1024;
const KEY_RASTER_TYPE: u16 = 1025;
const KEY_GEOGRAPHIC_TYPE: u16 = 2048;
const KEY_PROJECTED_CS_TYPE: u16 = 3072;

const MODEL_PROJECTED: u16 = 1;
const MODEL_GEOGRAPHIC: u16 = 2;
const RASTER_PIXEL_IS_AREA: u16 = 1;
const RASTER_PIXEL_IS_POINT: u16 = 2;

/// Pixel types that can be written to GeoTIFF.
pub trait GeoTiffSample: Numeric {
    /// Value written under invalid pixels.
    const NODATA: Self;

    /// Whether the nodata tag is written even when every pixel is valid.
    const ALWAYS_DECLARE_NODATA: bool;

    /// Textual form stored in the GDAL nodata tag.
    fn nodata_text() -> String;

    /// True when `v` would be read back as nodata.
    fn is_nodata(v: Self) -> bool;

    #[doc(hidden)]
    fn encode<W: Write + Seek>(
        enc: &mut TiffEncoder<W>,
        width: u32,
        height: u32,
        data: &[Self],
        tags: &GeoTags,
    ) -> Result<()>;
}

#[doc(hidden)]
pub struct GeoTags {
    pixel_scale: Option<[f64; 3]>,
    tiepoint: Option<[f64; 6]>,
    transformation: Option<[f64; 16]>,
    geokeys: Vec<u16>,
    nodata: Option<String>,
}

fn encode_with<C, W>(
    enc: &mut TiffEncoder<W>,
    width: u32,
    height: u32,
    data: &[C::Inner],
    tags: &GeoTags,
) -> Result<()>
where
    C: ColorType,
    W: Write + Seek,
    [C::Inner]: TiffValue,
{
    let mut image = enc.new_image::<C>(width, height)?;
    {
        let dir = image.encoder();
        if let Some(s) = &tags.pixel_scale {
            dir.write_tag(Tag::ModelPixelScaleTag, &s[..])?;
        }
        if let Some(t) = &tags.tiepoint {
            dir.write_tag(Tag::ModelTiepointTag, &t[..])?;
        }
        if let Some(m) = &tags.transformation {
            dir.write_tag(Tag::ModelTransformationTag, &m[..])?;
        }
        dir.write_tag(Tag::GeoKeyDirectoryTag, &tags.geokeys[..])?;
        if let Some(nd) = &tags.nodata {
            dir.write_tag(Tag::GdalNodata, nd.as_str())?;
        }
    }
    image.write_data(data)?;
    Ok(())
}

macro_rules! integer_sample {
    ($t:ty, $color:ty, $nodata:expr) => {
        impl GeoTiffSample for $t {
            const NODATA: $t = $nodata;
            const ALWAYS_DECLARE_NODATA: bool = false;

            fn nodata_text() -> String {
                Self::NODATA.to_string()
            }

            fn is_nodata(v: $t) -> bool {
                v == Self::NODATA
            }

            fn encode<W: Write + Seek>(
                enc: &mut TiffEncoder<W>,
                width: u32,
                height: u32,
                data: &[$t],
                tags: &GeoTags,
            ) -> Result<()> {
                encode_with::<$color, W>(enc, width, height, data, tags)
            }
        }
    };
}

macro_rules! float_sample {
    ($t:ty, $color:ty) => {
        impl GeoTiffSample for $t {
            const NODATA: $t = <$t>::NAN;
            const ALWAYS_DECLARE_NODATA: bool = true;

            fn nodata_text() -> String {
                "nan".to_string()
            }

            fn is_nodata(v: $t) -> bool {
                v.is_nan()
            }

            fn encode<W: Write + Seek>(
                enc: &mut TiffEncoder<W>,
                width: u32,
                height: u32,
                data: &[$t],
                tags: &GeoTags,
            ) -> Result<()> {
                encode_with::<$color, W>(enc, width, height, data, tags)
            }
        }
    };
}

integer_sample!(u8, colortype::Gray8, u8::MAX);
integer_sample!(u16, colortype::Gray16, u16::MAX);
integer_sample!(i16, colortype::GrayI16, i16::MIN);
integer_sample!(u32, colortype::Gray32, u32::MAX);
integer_sample!(i32, colortype::GrayI32, i32::MIN);
float_sample!(f32, colortype::Gray32Float);
float_sample!(f64, colortype::Gray64Float);

fn geo_tags(t: &GeoTransform) -> GeoTags {
    let (model, crs_key) = match t.crs {
        Crs::Geographic => (MODEL_GEOGRAPHIC, KEY_GEOGRAPHIC_TYPE),
        Crs::Projected { .. } => (MODEL_PROJECTED, KEY_PROJECTED_CS_TYPE),
    };
    let geokeys = vec![
        1,
        1,
        0,
        3,
        KEY_MODEL_TYPE,
        0,
        1,
        model,
        KEY_RASTER_TYPE,
        0,
        1,
        RASTER_PIXEL_IS_AREA,
        crs_key,
        0,
        1,
        t.crs.epsg(),
    ];
    if t.pixel_height < 0.0 {
        GeoTags {
            pixel_scale: Some([t.pixel_width, -t.pixel_height, 0.0]),
            tiepoint: Some([0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0]),
            transformation: None,
            geokeys,
            nodata: None,
        }
    } else {
        #[rustfmt::skip]
        let m = [
            t.pixel_width, 0.0, 0.0, t.origin_x,
            0.0, t.pixel_height, 0.0, t.origin_y,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        GeoTags {
            pixel_scale: None,
            tiepoint: None,
            transformation: Some(m),
            geokeys,
            nodata: None,
        }
    }
}

/// Writes `grid` as a single-band GeoTIFF. Invalid pixels are stored as the
/// type's nodata sentinel (`255` for `u8`, NaN for floats).
pub fn write_geotiff<T: GeoTiffSample>(grid: &RasterGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if grid.is_empty() {
        return Err(Error::InvalidData("cannot write an empty grid".into()));
    }
    let mut has_invalid = false;
    let mut data = Vec::with_capacity(grid.len());
    for (v, ok) in grid.values().iter().zip(grid.validity()) {
        if *ok {
            if T::is_nodata(*v) {
                return Err(Error::InvalidData(format!(
                    "valid pixel holds the nodata value {}",
                    T::nodata_text()
                )));
            }
            data.push(*v);
        } else {
            has_invalid = true;
            data.push(T::NODATA);
        }
    }
    let mut tags = geo_tags(grid.transform());
    // Float grids always declare NaN so masked values stay masked after
    // any external edit; integer grids only when a sentinel was used.
    if has_invalid || T::ALWAYS_DECLARE_NODATA {
        tags.nodata = Some(T::nodata_text());
    }
    let width =
        u32::try_from(grid.width()).map_err(|_| Error::InvalidData("grid too wide".into()))?;
    let height =
        u32::try_from(grid.height()).map_err(|_| Error::InvalidData("grid too tall".into()))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(|e| with_path(e.into(), path))?;
    T::encode(&mut enc, width, height, &data, &tags).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

/// Grid read from disk in its stored sample type.
#[derive(Clone, Debug, PartialEq)]
pub enum DynGrid {
    U8(RasterGrid<u8>),
    U16(RasterGrid<u16>),
    I16(RasterGrid<i16>),
    U32(RasterGrid<u32>),
    I32(RasterGrid<i32>),
    F32(RasterGrid<f32>),
    F64(RasterGrid<f64>),
}

macro_rules! dyn_dispatch {
    ($self:expr, $g:ident => $body:expr) => {
        match $self {
            DynGrid::U8($g) => $body,
            DynGrid::U16($g) => $body,
            DynGrid::I16($g) => $body,
            DynGrid::U32($g) => $body,
            DynGrid::I32($g) => $body,
            DynGrid::F32($g) => $body,
            DynGrid::F64($g) => $body,
        }
    };
}

impl DynGrid {
    pub fn width(&self) -> usize {
        dyn_dispatch!(self, g => g.width())
    }

    pub fn height(&self) -> usize {
        dyn_dispatch!(self, g => g.height())
    }

    pub fn transform(&self) -> GeoTransform {
        dyn_dispatch!(self, g => *g.transform())
    }

    pub fn valid_count(&self) -> usize {
        dyn_dispatch!(self, g => g.valid_count())
    }

    pub fn sample_name(&self) -> &'static str {
        match self {
            DynGrid::U8(_) => "u8",
            DynGrid::U16(_) => "u16",
            DynGrid::I16(_) => "i16",
            DynGrid::U32(_) => "u32",
            DynGrid::I32(_) => "i32",
            DynGrid::F32(_) => "f32",
            DynGrid::F64(_) => "f64",
        }
    }

    /// Converts every valid value into `T`; fails if any does not fit.
    pub fn convert<T: Numeric>(&self) -> Result<RasterGrid<T>> {
        dyn_dispatch!(self, g => convert_grid(g))
    }
}

fn convert_grid<S: Numeric, T: Numeric>(g: &RasterGrid<S>) -> Result<RasterGrid<T>> {
    let mut values = Vec::with_capacity(g.len());
    let mut fill = None;
    for (v, ok) in g.values().iter().zip(g.validity()) {
        if *ok {
            let t: T = num_traits::cast(*v).ok_or_else(|| {
                Error::InvalidData(format!(
                    "value {v:?} does not fit the requested sample type"
                ))
            })?;
            fill.get_or_insert(t);
            values.push(Some(t));
        } else {
            values.push(None);
        }
    }
    let fill = match fill.or_else(|| num_traits::cast(0u8)) {
        Some(f) => f,
        None => return Err(Error::InvalidData("sample type has no zero".into())),
    };
    RasterGrid::new(
        g.width(),
        g.height(),
        *g.transform(),
        values.iter().map(|v| v.unwrap_or(fill)).collect(),
        g.validity().to_vec(),
    )
}

/// Reads band `band` (1-based) of the GeoTIFF at `path`.
///
/// Bands are either interleaved samples of one image or successive images
/// in the file. Pixels equal to the declared nodata value, and NaN pixels of
/// float rasters, are marked invalid.
pub fn read_geotiff(path: impl AsRef<Path>, band: usize) -> Result<DynGrid> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(BufReader::new(file), band).map_err(|e| with_path(e, path))
}

/// Reads a band and converts it into `T`.
pub fn read_geotiff_as<T: Numeric>(path: impl AsRef<Path>, band: usize) -> Result<RasterGrid<T>> {
    read_geotiff(path, band)?.convert()
}

fn read_from<R: std::io::Read + Seek>(reader: R, band: usize) -> Result<DynGrid> {
    if band == 0 {
        return Err(Error::BandNotFound("0 (bands are 1-based)".into()));
    }
    let mut dec = Decoder::new(reader)?.with_limits(Limits::unlimited());
    let samples = dec
        .find_tag_unsigned::<u16>(Tag::SamplesPerPixel)?
        .unwrap_or(1) as usize;

    let sample_index = if samples > 1 {
        if band > samples {
            return Err(Error::BandNotFound(format!(
                "{band} (image has {samples} samples)"
            )));
        }
        band - 1
    } else {
        for _ in 1..band {
            if !dec.more_images() {
                return Err(Error::BandNotFound(band.to_string()));
            }
            dec.next_image()?;
        }
        0
    };

    let (w, h) = dec.dimensions()?;
    let (width, height) = (w as usize, h as usize);
    let transform = read_transform(&mut dec)?;
    let nodata = match dec.find_tag(Tag::GdalNodata)? {
        Some(v) => {
            let text = v.into_string()?;
            let t = text.trim_matches(|c: char| c == '\0' || c.is_whitespace());
            Some(
                t.parse::<f64>()
                    .map_err(|_| Error::InvalidData(format!("unparseable nodata value `{t}`")))?,
            )
        }
        None => None,
    };
    let planar = dec
        .find_tag_unsigned::<u16>(Tag::PlanarConfiguration)?
        .map(PlanarConfiguration::from_u16)
        .unwrap_or(Some(PlanarConfiguration::Chunky));

    let mut buf = DecodingResult::U8(Vec::new());
    dec.read_image_to_buffer(&mut buf)?;
    let n = width * height;
    let pick = |len: usize| -> Result<Box<dyn Fn(usize) -> usize>> {
        if samples == 1 {
            return Ok(Box::new(|i| i));
        }
        if len < n * samples {
            return Err(Error::Tiff(format!(
                "decoded {len} samples, expected {}",
                n * samples
            )));
        }
        Ok(match planar {
            Some(PlanarConfiguration::Planar) => Box::new(move |i| sample_index * n + i),
            _ => Box::new(move |i| i * samples + sample_index),
        })
    };

    macro_rules! build {
        ($data:expr, $variant:ident, $is_float:expr) => {{
            let data = $data;
            let idx = pick(data.len())?;
            if samples == 1 && data.len() < n {
                return Err(Error::Tiff(format!(
                    "decoded {} samples, expected {n}",
                    data.len()
                )));
            }
            let mut values = Vec::with_capacity(n);
            let mut valid = Vec::with_capacity(n);
            for i in 0..n {
                let v = data[idx(i)];
                let f = v as f64;
                let bad = ($is_float && f.is_nan())
                    || nodata.is_some_and(|nd| if nd.is_nan() { f.is_nan() } else { f == nd });
                values.push(v);
                valid.push(!bad);
            }
            DynGrid::$variant(RasterGrid::new(width, height, transform, values, valid)?)
        }};
    }

    Ok(match buf {
        DecodingResult::U8(d) => build!(d, U8, false),
        DecodingResult::U16(d) => build!(d, U16, false),
        DecodingResult::I16(d) => build!(d, I16, false),
        DecodingResult::U32(d) => build!(d, U32, false),
        DecodingResult::I32(d) => build!(d, I32, false),
        DecodingResult::F32(d) => build!(d, F32, true),
        DecodingResult::F64(d) => build!(d, F64, true),
        DecodingResult::I8(d) => {
            let d: Vec<i16> = d.into_iter().map(i16::from).collect();
            build!(d, I16, false)
        }
        other => {
            return Err(Error::Tiff(format!(
                "unsupported sample format {:?}",
                std::mem::discriminant(&other)
            )))
        }
    })
}

fn read_transform<R: std::io::Read + Seek>(dec: &mut Decoder<R>) -> Result<GeoTransform> {
    let keys = dec
        .find_tag(Tag::GeoKeyDirectoryTag)?
        .map(|v| v.into_u16_vec())
        .transpose()?
        .unwrap_or_default();
    let mut model = None;
    let mut raster_type = RASTER_PIXEL_IS_AREA;
    let mut epsg = None;
    for entry in keys.chunks_exact(4).skip(1) {
        let (id, location, value) = (entry[0], entry[1], entry[3]);
        if location != 0 {
            continue;
        }
        match id {
            KEY_MODEL_TYPE => model = Some(value),
            KEY_RASTER_TYPE => raster_type = value,
            KEY_GEOGRAPHIC_TYPE if model != Some(MODEL_PROJECTED) => epsg = epsg.or(Some(value)),
            KEY_PROJECTED_CS_TYPE => epsg = Some(value),
            _ => {}
        }
    }
    let crs = match (model, epsg) {
        (Some(MODEL_GEOGRAPHIC), Some(code)) => {
            if code != Crs::WGS84_EPSG {
                log::warn!("geographic EPSG:{code} treated as WGS84");
            }
            Crs::Geographic
        }
        (_, Some(code)) if code != 32767 => Crs::from_epsg(code),
        _ => {
            return Err(Error::UnsupportedGeometry(
                "missing or user-defined CRS in GeoKeyDirectory".into(),
            ))
        }
    };

    let (mut t, pw, ph) = if let Some(m) = dec.find_tag(Tag::ModelTransformationTag)? {
        let m = m.into_f64_vec()?;
        if m.len() < 16 {
            return Err(Error::UnsupportedGeometry(
                "short ModelTransformation".into(),
            ));
        }
        if m[1] != 0.0 || m[4] != 0.0 {
            return Err(Error::UnsupportedGeometry("rotated transform".into()));
        }
        let t = GeoTransform::new(m[3], m[7], m[0], m[5], crs)?;
        (t, m[0], m[5])
    } else {
        let scale = dec
            .find_tag(Tag::ModelPixelScaleTag)?
            .ok_or_else(|| Error::UnsupportedGeometry("missing ModelPixelScale".into()))?
            .into_f64_vec()?;
        let tie = dec
            .find_tag(Tag::ModelTiepointTag)?
            .ok_or_else(|| Error::UnsupportedGeometry("missing ModelTiepoint".into()))?
            .into_f64_vec()?;
        if scale.len() < 2 || tie.len() < 6 {
            return Err(Error::UnsupportedGeometry(
                "short georeferencing tags".into(),
            ));
        }
        if tie.len() > 6 {
            return Err(Error::UnsupportedGeometry(
                "multiple tiepoints (warped grid)".into(),
            ));
        }
        let (sx, sy) = (scale[0], scale[1]);
        let ox = tie[3] - tie[0] * sx;
        let oy = tie[4] + tie[1] * sy;
        let t = GeoTransform::new(ox, oy, sx, -sy, crs)?;
        (t, sx, -sy)
    };
    if raster_type == RASTER_PIXEL_IS_POINT {
        t.origin_x -= pw / 2.0;
        t.origin_y -= ph / 2.0;
    }
    Ok(t)
}
