//! Regions of interest: validated polygon geometry and rasterization.
//!
//! Rasterization uses the pixel-center even-odd rule. A center lying exactly
//! on an edge is inside when the edge is the polygon's left or lower
//! boundary, so polygons sharing an edge partition the pixels between them.

mod dataset;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Bbox, Crs, GeoTransform, RasterGrid};

pub use dataset::{roi_from_vector_file, DatasetSchema, Feature, VectorDataset};

pub type Point = (f64, f64);

/// Closed, simple ring. The first vertex is repeated at the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Ring {
    points: Vec<Point>,
}

impl Ring {
    /// Closes the ring if needed and checks it: at least three distinct,
    /// non-collinear vertices, no self-intersection, nonzero area.
    pub fn new(mut points: Vec<Point>) -> Result<Self> {
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite vertex".into()));
        }
        points.dedup();
        if points.len() > 1 && points.first() == points.last() {
            points.pop();
        }
        if points.len() < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "ring needs at least 3 distinct vertices, got {}",
                points.len()
            )));
        }
        points.push(points[0]);
        let ring = Ring { points };
        let (p0, p1) = (ring.points[0], ring.points[1]);
        if ring.points.iter().all(|&q| orient(p0, p1, q) == 0.0) {
            return Err(Error::DegenerateGeometry("vertices are collinear".into()));
        }
        if let Some((i, j)) = ring.self_intersection() {
            return Err(Error::InvalidRing(format!("edges {i} and {j} intersect")));
        }
        if ring.signed_area() == 0.0 {
            return Err(Error::DegenerateGeometry("ring has zero area".into()));
        }
        Ok(ring)
    }

    /// Vertices including the closing repeat.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Shoelace area, positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        self.edges()
            .map(|((x0, y0), (x1, y1))| x0 * y1 - x1 * y0)
            .sum::<f64>()
            / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bbox(&self) -> Bbox {
        Bbox::from_points(self.points.iter().copied()).expect("ring has vertices")
    }

    fn self_intersection(&self) -> Option<(usize, usize)> {
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Shared vertex is fine; collinear overlap (a spike) is not.
                    let shared = if j == i + 1 { b } else { a };
                    let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                    if orient(p, shared, q) == 0.0 && dot(p, shared, q) > 0.0 {
                        return Some((i, j));
                    }
                } else if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

impl TryFrom<Vec<Point>> for Ring {
    type Error = Error;

    fn try_from(points: Vec<Point>) -> Result<Self> {
        Ring::new(points)
    }
}

impl From<Ring> for Vec<Point> {
    fn from(r: Ring) -> Self {
        r.points
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Dot product of (p − s) and (q − s): positive when p and q lie on the same
/// side of the shared vertex s.
fn dot(p: Point, s: Point, q: Point) -> f64 {
    (p.0 - s.0) * (q.0 - s.0) + (p.1 - s.1) * (q.1 - s.1)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Closed-segment intersection, including touching and collinear overlap.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (o1, o2, o3, o4) = (
        orient(a, b, c),
        orient(a, b, d),
        orient(c, d, a),
        orient(c, d, b),
    );
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Exterior ring with optional holes; even-odd over all its rings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Ring,
    #[serde(default)]
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Self {
        Polygon { exterior, holes }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(&self.holes)
    }

    pub fn area(&self) -> f64 {
        self.exterior.area() - self.holes.iter().map(Ring::area).sum::<f64>()
    }

    pub fn from_bbox(b: &Bbox) -> Result<Self> {
        let ring = Ring::new(vec![
            (b.min_x, b.min_y),
            (b.max_x, b.min_y),
            (b.max_x, b.max_y),
            (b.min_x, b.max_y),
        ])?;
        Ok(Polygon::new(ring, Vec::new()))
    }

    /// Even-odd point test (left and lower boundaries inclusive).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for ring in self.rings() {
            for (a, b) in ring.edges() {
                if (a.1 > y) != (b.1 > y) && x < edge_x_at(a, b, y) {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// X coordinate where edge `a→b` crosses the horizontal line at `y`.
/// Independent of edge direction, so shared edges of adjacent polygons
/// give bit-identical crossings.
fn edge_x_at(a: Point, b: Point, y: f64) -> f64 {
    let (a, b) = if (a.1, a.0) <= (b.1, b.0) {
        (a, b)
    } else {
        (b, a)
    };
    (b.0 - a.0) * (y - a.1) / (b.1 - a.1) + a.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiGeometry {
    /// Union of polygons.
    Polygons(Vec<Polygon>),
    Bbox(Bbox),
}

/// Region of interest with provenance label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub geometry: RoiGeometry,
    pub crs: Crs,
    pub label: String,
}

impl Roi {
    pub fn new(geometry: RoiGeometry, crs: Crs, label: impl Into<String>) -> Result<Self> {
        match &geometry {
            RoiGeometry::Polygons(p) if p.is_empty() => {
                return Err(Error::DegenerateGeometry("ROI has no polygons".into()))
            }
            RoiGeometry::Polygons(p) if p.iter().any(|p| p.area().is_nan() || p.area() <= 0.0) => {
                return Err(Error::DegenerateGeometry(
                    "polygon with non-positive area".into(),
                ))
            }
            RoiGeometry::Bbox(b) if !(b.width() > 0.0 && b.height() > 0.0) => {
                return Err(Error::DegenerateGeometry("bbox with zero area".into()))
            }
            _ => {}
        }
        Ok(Roi {
            geometry,
            crs,
            label: label.into(),
        })
    }

    pub fn polygons(&self) -> Result<Vec<Polygon>> {
        match &self.geometry {
            RoiGeometry::Polygons(p) => Ok(p.clone()),
            RoiGeometry::Bbox(b) => Ok(vec![Polygon::from_bbox(b)?]),
        }
    }

    pub fn bbox(&self) -> Bbox {
        match &self.geometry {
            RoiGeometry::Bbox(b) => *b,
            RoiGeometry::Polygons(ps) => ps
                .iter()
                .map(|p| p.exterior.bbox())
                .reduce(|a, b| a.union(&b))
                .expect("non-empty by construction"),
        }
    }

    /// Planar area in CRS units², summing component polygons.
    pub fn area(&self) -> f64 {
        match &self.geometry {
            RoiGeometry::Bbox(b) => b.width() * b.height(),
            RoiGeometry::Polygons(ps) => ps.iter().map(Polygon::area).sum(),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match &self.geometry {
            RoiGeometry::Bbox(b) => x >= b.min_x && x < b.max_x && y >= b.min_y && y < b.max_y,
            RoiGeometry::Polygons(ps) => ps.iter().any(|p| p.contains(x, y)),
        }
    }
}

/// ROI from drawn vertices (closing vertex optional).
pub fn roi_from_polygon(vertices: Vec<Point>, crs: Crs) -> Result<Roi> {
    let ring = Ring::new(vertices)?;
    Roi::new(
        RoiGeometry::Polygons(vec![Polygon::new(ring, Vec::new())]),
        crs,
        "drawn polygon",
    )
}

pub fn roi_from_bbox(bbox: Bbox, crs: Crs) -> Result<Roi> {
    Roi::new(RoiGeometry::Bbox(bbox), crs, "bounding box")
}

/// Boolean grid, true where the pixel center lies inside the ROI. Every
/// output pixel is valid.
pub fn rasterize_roi(
    roi: &Roi,
    transform: &GeoTransform,
    width: usize,
    height: usize,
) -> Result<RasterGrid<bool>> {
    if roi.crs != transform.crs {
        return Err(Error::CrsMismatch {
            roi: roi.crs.to_string(),
            grid: transform.crs.to_string(),
        });
    }
    let mut inside = vec![false; width * height];
    let polygons = roi.polygons()?;
    let mut xs = Vec::new();
    for row in 0..height {
        let y = transform.center_y(row);
        let line = &mut inside[row * width..(row + 1) * width];
        for poly in &polygons {
            xs.clear();
            for ring in poly.rings() {
                for (a, b) in ring.edges() {
                    if (a.1 > y) != (b.1 > y) {
                        xs.push(edge_x_at(a, b, y));
                    }
                }
            }
            xs.sort_unstable_by(f64::total_cmp);
            for span in xs.chunks_exact(2) {
                let (c0, c1) = center_span(transform, width, span[0], span[1]);
                for v in &mut line[c0..c1] {
                    *v = true;
                }
            }
        }
    }
    RasterGrid::from_values(width, height, *transform, inside)
}

/// Column range whose centers satisfy `lo ≤ x < hi`.
fn center_span(t: &GeoTransform, width: usize, lo: f64, hi: f64) -> (usize, usize) {
    let first_at_or_after = |x: f64| {
        let guess = ((x - t.origin_x) / t.pixel_width - 0.5).ceil();
        let mut c = guess.clamp(0.0, width as f64) as usize;
        while c > 0 && t.center_x(c - 1) >= x {
            c -= 1;
        }
        while c < width && t.center_x(c) < x {
            c += 1;
        }
        c
    };
    let c0 = first_at_or_after(lo);
    let c1 = first_at_or_after(hi).max(c0);
    (c0, c1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point> {
        vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    }

    #[test]
    fn unit_square_area() {
        let roi = roi_from_polygon(unit_square(), Crs::from_epsg(32630)).unwrap();
        assert_eq!(roi.area(), 1.0);
        if let RoiGeometry::Polygons(p) = &roi.geometry {
            assert_eq!(p[0].exterior.points().len(), 5);
            assert_eq!(p[0].exterior.points()[0], p[0].exterior.points()[4]);
        }
    }

    #[test]
    fn degenerate_and_bowtie() {
        let crs = Crs::Geographic;
        assert!(matches!(
            roi_from_polygon(vec![(0.0, 0.0), (1.0, 1.0)], crs),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(matches!(
            roi_from_polygon(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], crs),
            Err(Error::DegenerateGeometry(_))
        ));
        let bowtie = vec![(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)];
        assert!(matches!(
            roi_from_polygon(bowtie, crs),
            Err(Error::InvalidRing(_))
        ));
        let spike = vec![(0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (1.0, 1.0)];
        assert!(matches!(
            roi_from_polygon(spike, crs),
            Err(Error::InvalidRing(_))
        ));
    }

    fn grid(n: usize) -> GeoTransform {
        GeoTransform::north_up(0.0, n as f64, 1.0, Crs::from_epsg(32630)).unwrap()
    }

    #[test]
    fn square_over_two_by_two_block() {
        let roi = roi_from_polygon(
            vec![(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)],
            Crs::from_epsg(32630),
        )
        .unwrap();
        let m = rasterize_roi(&roi, &grid(4), 4, 4).unwrap();
        assert_eq!(m.iter().filter(|v| *v == Some(true)).count(), 4);
    }

    #[test]
    fn sub_pixel_polygon_hits_nothing() {
        let roi = roi_from_polygon(
            vec![(1.1, 1.1), (1.3, 1.1), (1.3, 1.3)],
            Crs::from_epsg(32630),
        )
        .unwrap();
        let m = rasterize_roi(&roi, &grid(4), 4, 4).unwrap();
        assert!(m.iter().all(|v| v == Some(false)));
    }

    #[test]
    fn crs_mismatch() {
        let roi = roi_from_polygon(unit_square(), Crs::Geographic).unwrap();
        assert!(matches!(
            rasterize_roi(&roi, &grid(4), 4, 4),
            Err(Error::CrsMismatch { .. })
        ));
    }

    #[test]
    fn adjacent_polygons_partition_centers() {
        // Shared edge runs exactly through a column of pixel centers.
        let crs = Crs::from_epsg(32630);
        let left =
            roi_from_polygon(vec![(0.0, 0.0), (2.5, 0.0), (2.5, 6.0), (0.0, 6.0)], crs).unwrap();
        let right =
            roi_from_polygon(vec![(2.5, 0.0), (6.0, 0.0), (6.0, 6.0), (2.5, 6.0)], crs).unwrap();
        let t = grid(6);
        let a = rasterize_roi(&left, &t, 6, 6).unwrap();
        let b = rasterize_roi(&right, &t, 6, 6).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(x.unwrap() ^ y.unwrap());
        }
    }

    #[test]
    fn hole_is_excluded() {
        let crs = Crs::from_epsg(32630);
        let outer = Ring::new(vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]).unwrap();
        let hole = Ring::new(vec![(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)]).unwrap();
        let roi = Roi::new(
            RoiGeometry::Polygons(vec![Polygon::new(outer, vec![hole])]),
            crs,
            "donut",
        )
        .unwrap();
        assert_eq!(roi.area(), 12.0);
        let m = rasterize_roi(&roi, &grid(4), 4, 4).unwrap();
        assert_eq!(m.iter().filter(|v| *v == Some(true)).count(), 12);
    }

    #[test]
    fn bbox_roi_rasterizes_like_polygon() {
        let crs = Crs::from_epsg(32630);
        let b = Bbox::new(0.5, 0.5, 3.2, 2.7).unwrap();
        let r1 = roi_from_bbox(b, crs).unwrap();
        let r2 = Roi::new(
            RoiGeometry::Polygons(vec![Polygon::from_bbox(&b).unwrap()]),
            crs,
            "p",
        )
        .unwrap();
        assert_eq!(
            rasterize_roi(&r1, &grid(4), 4, 4).unwrap(),
            rasterize_roi(&r2, &grid(4), 4, 4).unwrap()
        );
    }
}
