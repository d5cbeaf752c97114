use std::path::Path;
use std::process::{Command, Output};

use ndvi_core::fixtures;

fn ndvi(args: &[&str], exports: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndvi"))
        .args(args)
        .env_remove("NDVI_CATALOG")
        .env("NDVI_EXPORT_DIR", exports)
        .output()
        .unwrap()
}

fn base_args<'a>(roi: &'a str, manifest: &'a str) -> Vec<&'a str> {
    vec![
        "--sensor",
        "sentinel-2",
        "--start",
        "2021-01-01",
        "--end",
        "2021-03-31",
        "--roi",
        roi,
        "--manifest",
        manifest,
    ]
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let set = fixtures::write_sentinel2_fixtures(tmp.path().join("fx")).unwrap();
    let exports = tmp.path().join("exports");
    let roi = set.roi.to_str().unwrap();
    let manifest = set.manifest.to_str().unwrap();

    let mut args = vec!["analyze", "--min", "0.6", "--max", "0.9", "--json"];
    args.extend(base_args(roi, manifest));
    let out = ndvi(&args, &exports);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["area"]["pixel_count"], 300);

    let mut args = vec!["analyze", "--min", "0.9", "--max", "0.6"];
    args.extend(base_args(roi, manifest));
    let out = ndvi(&args, &exports);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NDVI_ORDER"));

    let args = [
        "validate",
        "--sensor",
        "sentinel-2",
        "--start",
        "2016-01-01",
        "--end",
        "2021-03-31",
        "--roi",
        roi,
        "--manifest",
        manifest,
    ];
    let out = ndvi(&args, &exports);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("DATE_BEFORE_SENSOR"));

    let mut args = vec!["analyze", "--max-cloud", "0"];
    args.extend(base_args(roi, manifest));
    assert_eq!(ndvi(&args, &exports).status.code(), Some(3));

    let mut args = vec!["analyze"];
    args.extend(base_args(roi, "/nonexistent/manifest.json"));
    assert_eq!(ndvi(&args, &exports).status.code(), Some(1));
}

#[test]
fn export_and_series_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let set = fixtures::write_sentinel2_fixtures(tmp.path().join("fx")).unwrap();
    let exports = tmp.path().join("exports");
    let out_dir = tmp.path().join("out");
    let csv = tmp.path().join("series.csv");
    let (roi, manifest) = (set.roi.to_str().unwrap(), set.manifest.to_str().unwrap());

    let mut args = vec!["export", "--out", out_dir.to_str().unwrap()];
    args.extend(base_args(roi, manifest));
    let out = ndvi(&args, &exports);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let names: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 2);
    assert!(names.iter().any(|n| n.ends_with("_composite.tif")));
    assert!(names.iter().any(|n| n.ends_with("_mask.tif")));

    let mut args = vec!["analyze", "--series-csv", csv.to_str().unwrap()];
    args.extend(base_args(roi, manifest));
    assert!(ndvi(&args, &exports).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().starts_with("2021-01-05"));
}
