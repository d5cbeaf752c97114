use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ndvi_core::fixtures::{self, FixtureSet};
use ndvi_core::pipeline::{Analyzer, AnalyzerConfig, DatasetCatalog};
use ndvi_core::raster::read_geotiff;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Env {
    tmp: tempfile::TempDir,
    set: FixtureSet,
    app: Router,
}

fn env_with(budget: Option<usize>) -> Env {
    let tmp = tempfile::tempdir().unwrap();
    let set = fixtures::write_sentinel2_fixtures(tmp.path().join("fx")).unwrap();
    let mut cfg = AnalyzerConfig::new(tmp.path().join("exports"));
    cfg.today = Some("2025-01-01".parse().unwrap());
    if let Some(b) = budget {
        cfg.pixel_budget = b;
    }
    let analyzer = Analyzer::new(cfg, DatasetCatalog::load(&set.catalog).unwrap());
    Env {
        app: ndvi_gateway::router(Arc::new(analyzer)),
        set,
        tmp,
    }
}

fn env() -> Env {
    env_with(None)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (
        status,
        res.into_body().collect().await.unwrap().to_bytes().to_vec(),
    )
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn post(app: &Router, uri: &str, body: String) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let (s, b) = send(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn request(set: &FixtureSet, min: f64, max: f64) -> Value {
    serde_json::to_value(set.request(min, max, 10.0)).unwrap()
}

#[tokio::test]
async fn sensors_lists_registry() {
    let e = env();
    let (s, v) = get(&e.app, "/sensors").await;
    assert_eq!(s, StatusCode::OK);
    let list = v["sensors"].as_array().unwrap();
    assert_eq!(list.len(), 5);
    assert_eq!(list[0]["sensor_id"], "Sentinel-2");
    assert_eq!(list[0]["availability_start"], "2017-03-28");
    assert_eq!(list[0]["availability_end"], Value::Null);
    let l7 = list.iter().find(|s| s["sensor_id"] == "Landsat 7").unwrap();
    assert_eq!(l7["availability_end"], "2022-03-30");
    assert_eq!(l7["red_band"], "SR_B3");
}

#[tokio::test]
async fn validate_reports_violations_as_data() {
    let e = env();
    let mut req = request(&e.set, 0.6, 0.9);
    let (s, v) = post(&e.app, "/validate", req.to_string()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["violations"], json!([]));

    req["start_date"] = json!("2016-06-01");
    let (s, v) = post(&e.app, "/validate", req.to_string()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["violations"][0]["code"], "DATE_BEFORE_SENSOR");
    assert_eq!(v["violations"][0]["field"], "start_date");
    assert_eq!(v["violations"].as_array().unwrap().len(), 1);

    let (s, v) = post(&e.app, "/validate", "not json".into()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "MALFORMED_REQUEST");
}

#[tokio::test]
async fn analyze_areas() {
    let e = env();
    let (s, full) = post(&e.app, "/analyze", request(&e.set, -1.0, 1.0).to_string()).await;
    assert_eq!(s, StatusCode::OK, "{full}");
    assert_eq!(full["status"], "completed");
    assert_eq!(full["area"]["pixel_count"], 900);
    assert_eq!(full["area"]["area_km2"], full["roi_area_km2"]);
    assert_eq!(full["area"]["pixel_area_basis"], "projected-constant");

    let (_, dense) = post(&e.app, "/analyze", request(&e.set, 0.6, 0.9).to_string()).await;
    assert_eq!(dense["area"]["pixel_count"], 300);
    assert!((dense["area"]["area_km2"].as_f64().unwrap() - 0.03).abs() < 1e-12);
    assert_eq!(dense["scene_count"], 4);
    let id = dense["analysis_id"].as_str().unwrap();
    assert_eq!(id.len(), 16);
    assert_eq!(dense["composite_ref"], format!("/export/{id}/composite"));

    let (_, stats) = get(&e.app, "/cache/stats").await;
    assert_eq!(stats["composite_cache"]["hits"], 1);
    assert_eq!(stats["composite_cache"]["misses"], 1);
}

#[tokio::test]
async fn analyze_error_envelopes() {
    let e = env();
    let mut req = request(&e.set, 0.6, 0.9);
    req["start_date"] = json!("2022-01-01");
    req["end_date"] = json!("2022-02-01");
    let (s, v) = post(&e.app, "/analyze", req.to_string()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "no_scenes");

    let mut req = request(&e.set, 0.9, 0.6);
    req["roi"] = Value::Null;
    let (s, v) = post(&e.app, "/analyze", req.to_string()).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "VALIDATION_FAILED");
    let codes: Vec<_> = v["violations"]["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["code"].as_str().unwrap())
        .collect();
    assert_eq!(codes, ["NDVI_ORDER", "ROI_MISSING"]);

    let mut req = request(&e.set, 0.6, 0.9);
    req["roi"] = json!({"admin": {"dataset": "admin", "path": ["Atlantis", "Nowhere"]}});
    let (s, v) = post(&e.app, "/analyze", req.to_string()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "NO_SUCH_UNIT");
    assert_eq!(v["field"], "roi");

    let mut req = request(&e.set, 0.6, 0.9);
    req["roi"] = json!({"polygon": {"vertices": [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]}});
    let (s, v) = post(&e.app, "/analyze", req.to_string()).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "DEGENERATE_GEOMETRY");
}

#[tokio::test]
async fn analyze_pixel_budget() {
    let e = env_with(Some(1000));
    let (s, v) = post(&e.app, "/analyze", request(&e.set, 0.6, 0.9).to_string()).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(v["code"], "PIXEL_BUDGET_EXCEEDED");
    assert!(v["message"].as_str().unwrap().contains("1000"));
}

#[tokio::test]
async fn unreachable_catalog_is_bad_gateway() {
    let e = env();
    // Bind then drop a listener to get a port with nothing behind it.
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut req = request(&e.set, 0.6, 0.9);
    req["roi"] = json!({"bbox": {"bbox": [91.7, 24.3, 91.8, 24.4]}});
    req["source"] = json!({"stac": {"endpoint": format!("http://127.0.0.1:{port}")}});
    let (s, v) = post(&e.app, "/analyze", req.to_string()).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY, "{v}");
    assert_eq!(v["code"], "UPSTREAM_TRANSPORT");
    assert_eq!(v["field"], "source");
}

#[tokio::test]
async fn dataset_children() {
    let e = env();
    let (s, v) = get(&e.app, "/datasets").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["datasets"].as_array().unwrap().len(), 2);

    let (s, v) = get(&e.app, "/datasets/admin/children").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["children"], json!(["Atlantis", "Lemuria"]));
    let (_, v) = get(&e.app, "/datasets/admin/children?path=Atlantis").await;
    assert_eq!(v["children"], json!(["Central", "North", "South"]));
    let (_, v) = get(&e.app, "/datasets/protected/children?path=BGD").await;
    assert_eq!(v["children"].as_array().unwrap().len(), 2);

    let (s, v) = get(&e.app, "/datasets/nope/children").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "NO_SUCH_UNIT");
    let (s, _) = get(&e.app, "/datasets/admin/children?path=Atlantis/Nowhere").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn exports_are_geotiffs() {
    let e = env();
    let (_, r) = post(&e.app, "/analyze", request(&e.set, 0.6, 0.9).to_string()).await;
    for (kind, sample, valid) in [("composite", "f32", 900), ("mask", "u8", 300)] {
        let uri = r[format!("{kind}_ref")].as_str().unwrap().to_string();
        let (s, bytes) = send(&e.app, Request::get(&uri).body(Body::empty()).unwrap()).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(&bytes[..2], b"II");
        let path = e.tmp.path().join(format!("{kind}.tif"));
        std::fs::write(&path, &bytes).unwrap();
        let g = read_geotiff(&path, 1).unwrap();
        assert_eq!(g.sample_name(), sample);
        assert_eq!((g.width(), g.height()), (30, 30));
        assert_eq!(g.transform().scale(), 10.0);
        assert_eq!(g.valid_count(), valid);
        if kind == "mask" {
            let m = g.convert::<u8>().unwrap();
            assert!(m.iter().all(|v| v.is_none() || v == Some(1)));
        }
    }

    let (s, v) = get(&e.app, "/export/0000000000000000/composite").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "NO_SUCH_EXPORT");
    assert!(v["hint"].as_str().unwrap().contains("/analyze"));
    let (s, _) = get(&e.app, "/export/0000000000000000/thumbnail").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn spec_document() {
    let e = env();
    let (s, v) = get(&e.app, "/spec").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["openapi"], "3.0.3");
    for p in [
        "/sensors",
        "/analyze",
        "/validate",
        "/datasets/{dataset}/children",
        "/export/{analysis_id}/{kind}",
    ] {
        assert!(v["paths"].get(p).is_some(), "{p}");
    }
}
