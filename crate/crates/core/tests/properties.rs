use ndvi_core::analytics::{masked_area_km2_with, pixel_area_grid, spherical_band_area};
use ndvi_core::masking::{qa_word_kept, MaskScheme};
use ndvi_core::ndvi::{
    median_composite_with, median_of, ndvi_value, threshold_mask, ThresholdMask,
};
use ndvi_core::raster::tile::Tiling;
use ndvi_core::roi::{rasterize_roi, roi_from_polygon, Point};
use ndvi_core::{Crs, GeoTransform, RasterGrid};
use proptest::prelude::*;

const GRID: usize = 32;

fn unit_transform() -> GeoTransform {
    GeoTransform::north_up(0.0, GRID as f64, 1.0, Crs::from_epsg(32633)).unwrap()
}

fn sorted_median(v: &[f32]) -> Option<f32> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(s[n / 2]),
        _ => Some(((s[n / 2 - 1] as f64 + s[n / 2] as f64) / 2.0) as f32),
    }
}

fn grid_from(values: Vec<Option<f32>>, w: usize, h: usize) -> RasterGrid<f32> {
    let valid = values.iter().map(Option::is_some).collect();
    let vals = values.into_iter().map(|v| v.unwrap_or(f32::NAN)).collect();
    let t = GeoTransform::north_up(0.0, h as f64, 1.0, Crs::from_epsg(32633)).unwrap();
    RasterGrid::new(w, h, t, vals, valid).unwrap()
}

fn cells(g: &RasterGrid<f32>) -> Vec<Option<u32>> {
    g.iter().map(|v| v.map(f32::to_bits)).collect()
}

fn inside_count(vertices: Vec<Point>) -> Vec<bool> {
    let roi = roi_from_polygon(vertices, Crs::from_epsg(32633)).unwrap();
    rasterize_roi(&roi, &unit_transform(), GRID, GRID)
        .unwrap()
        .values()
        .to_vec()
}

fn ndvi_sample() -> impl Strategy<Value = Option<f32>> {
    prop_oneof![1 => Just(None), 4 => (-1.0f32..=1.0).prop_map(Some)]
}

proptest! {
    #[test]
    fn median_matches_sorted_oracle(v in prop::collection::vec(-1.0f32..=1.0, 0..16)) {
        let mut buf = v.clone();
        prop_assert_eq!(median_of(&mut buf), sorted_median(&v));
    }

    #[test]
    fn median_ignores_permutation(mut v in prop::collection::vec(-1.0f32..=1.0, 1..16), seed in any::<u64>()) {
        let want = sorted_median(&v);
        let n = v.len();
        v.rotate_left((seed as usize) % n);
        prop_assert_eq!(median_of(&mut v), want);
    }

    #[test]
    fn ndvi_antisymmetric_and_bounded(red in 0.0f64..2.0, nir in 0.0f64..2.0) {
        match (ndvi_value(red, nir), ndvi_value(nir, red)) {
            (Some(a), Some(b)) => {
                prop_assert_eq!(a, -b);
                prop_assert!((-1.0..=1.0).contains(&a));
            }
            (None, None) => prop_assert_eq!(red + nir, 0.0),
            other => prop_assert!(false, "asymmetric validity {:?}", other),
        }
    }

    #[test]
    fn ndvi_invariant_under_power_of_two_scaling(red in 1e-4f64..2.0, nir in 1e-4f64..2.0, k in -20i32..20) {
        let s = 2f64.powi(k);
        prop_assert_eq!(ndvi_value(red * s, nir * s), ndvi_value(red, nir));
    }

    #[test]
    fn qa_masking_nested(word in any::<u16>()) {
        let l89 = qa_word_kept(word, MaskScheme::QaL89);
        let l57 = qa_word_kept(word, MaskScheme::QaL57);
        prop_assert_eq!(l89.is_none(), word & 1 == 1);
        prop_assert_eq!(l57.is_none(), word & 1 == 1);
        if l89 == Some(true) {
            prop_assert_eq!(l57, Some(true));
        }
    }

    #[test]
    fn composite_independent_of_tiling(
        stack in prop::collection::vec(prop::collection::vec(ndvi_sample(), 13 * 11), 1..7),
        tile in 1usize..200,
        threads in 1usize..4,
    ) {
        let grids: Vec<_> = stack.into_iter().map(|v| grid_from(v, 13, 11)).collect();
        let base = median_composite_with(&grids, &Tiling::untiled()).unwrap();
        let tiled = median_composite_with(&grids, &Tiling::with_tile_pixels(tile).with_threads(threads).unwrap()).unwrap();
        prop_assert_eq!(cells(&base), cells(&tiled));
        for i in 0..base.len() {
            let px: Vec<f32> = grids.iter().filter_map(|g| g.iter().nth(i).flatten()).collect();
            prop_assert_eq!(base.iter().nth(i).flatten(), sorted_median(&px));
        }
    }

    #[test]
    fn widening_interval_never_shrinks_area(
        values in prop::collection::vec(ndvi_sample(), GRID * GRID),
        a in -1.0f64..1.0, b in -1.0f64..1.0, widen_lo in 0.0f64..1.0, widen_hi in 0.0f64..1.0,
    ) {
        prop_assume!(a < b);
        let g = grid_from(values, GRID, GRID);
        let roi = RasterGrid::filled(GRID, GRID, *g.transform(), true);
        let areas = pixel_area_grid::<f64>(g.transform(), GRID, GRID);
        let area = |m: &ThresholdMask| masked_area_km2_with(m, &roi, &areas, &Tiling::untiled()).unwrap();
        let narrow = threshold_mask(&g, a, b).unwrap();
        let wide = threshold_mask(&g, (a - widen_lo).max(-1.0), (b + widen_hi).min(1.0)).unwrap();
        prop_assert!(narrow.retained_count() <= wide.retained_count());
        prop_assert!(area(&narrow).area_km2 <= area(&wide).area_km2);
        let full = threshold_mask(&g, -1.0, 1.0).unwrap();
        prop_assert_eq!(full.retained_count(), g.valid_count());
    }

    #[test]
    fn adjacent_polygons_partition_pixels(
        x0 in 0u32..30, y0 in 0u32..30, dx in 2u32..34, dy in 2u32..34, split in 1u32..64,
    ) {
        // Half-unit lattice, so edges pass exactly through pixel centers.
        let h = |v: u32| v as f64 * 0.5;
        let (x0, y0) = (x0 * 2, y0 * 2);
        let (x1, y1) = (x0 + dx, y0 + dy);
        let sx = x0 + 1 + split % (dx - 1);
        let whole = inside_count(vec![(h(x0), h(y0)), (h(x1), h(y0)), (h(x1), h(y1)), (h(x0), h(y1))]);

        let left = inside_count(vec![(h(x0), h(y0)), (h(sx), h(y0)), (h(sx), h(y1)), (h(x0), h(y1))]);
        let right = inside_count(vec![(h(sx), h(y0)), (h(x1), h(y0)), (h(x1), h(y1)), (h(sx), h(y1))]);
        let lower = inside_count(vec![(h(x0), h(y0)), (h(x1), h(y0)), (h(x1), h(y1))]);
        let upper = inside_count(vec![(h(x0), h(y0)), (h(x1), h(y1)), (h(x0), h(y1))]);
        for (a, b) in [(&left, &right), (&lower, &upper)] {
            for i in 0..whole.len() {
                prop_assert!(!(a[i] && b[i]), "pixel {} in both parts", i);
                prop_assert_eq!(a[i] || b[i], whole[i], "pixel {}", i);
            }
        }
    }

    #[test]
    fn geographic_rows_sum_to_band(lat0 in -89.0f64..89.0, rows in 1usize..64, step in 0.01f64..1.0, lon_px in 0.01f64..1.0) {
        prop_assume!(lat0 - rows as f64 * step >= -90.0);
        let t = GeoTransform::new(10.0, lat0, lon_px, -step, Crs::Geographic).unwrap();
        let g = pixel_area_grid::<f64>(&t, 3, rows);
        let total: f64 = g.iter().map(Option::unwrap).sum();
        let want = 3.0 * spherical_band_area(lat0, lat0 - rows as f64 * step, lon_px);
        prop_assert!((total - want).abs() <= 1e-9 * want);
    }
}
