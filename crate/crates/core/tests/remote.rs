//! STAC search and asset download against an in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use ndvi_core::fixtures;
use ndvi_core::ingest::{AssetFetcher, RetryPolicy, StacClient, StacQuery};
use ndvi_core::pipeline::{AnalysisOutcome, Analyzer, AnalyzerConfig, DatasetCatalog, SourceSpec};
use ndvi_core::sensor::SensorId;
use ndvi_core::{Bbox, Error};
use serde_json::{json, Value};

#[derive(Clone, Debug)]
struct Hit {
    method: String,
    path: String,
    body: Value,
}

struct Reply {
    status: u16,
    body: Vec<u8>,
}

impl Reply {
    fn json(v: Value) -> Self {
        Reply {
            status: 200,
            body: v.to_string().into_bytes(),
        }
    }

    fn status(status: u16) -> Self {
        Reply {
            status,
            body: b"{}".to_vec(),
        }
    }
}

type Handler = dyn Fn(&Hit, usize, &str) -> Reply + Send + Sync;

/// Serves `handler` on a loopback port. The handler gets the request, the
/// number of earlier requests to the same method and path, and the server's
/// base URL.
struct MockServer {
    url: String,
    hits: Arc<Mutex<Vec<Hit>>>,
}

impl MockServer {
    fn start(handler: impl Fn(&Hit, usize, &str) -> Reply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(Mutex::new(Vec::new()));
        let log = hits.clone();
        let handler: Arc<Handler> = Arc::new(handler);
        let base = url.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).is_err() || line.is_empty() {
                    continue;
                }
                let mut parts = line.split_whitespace();
                let method = parts.next().unwrap_or("").to_string();
                let path = parts.next().unwrap_or("").to_string();
                let mut len = 0usize;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    if h.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let hit = Hit {
                    method,
                    path,
                    body: serde_json::from_slice(&body).unwrap_or(Value::Null),
                };
                let seen = {
                    let mut log = log.lock().unwrap();
                    let n = log
                        .iter()
                        .filter(|h: &&Hit| h.method == hit.method && h.path == hit.path)
                        .count();
                    log.push(hit.clone());
                    n
                };
                let reply = handler(&hit, seen, &base);
                let head = format!(
                    "HTTP/1.1 {} X\r\nContent-Length: {}\r\nContent-Type: application/json\r\nConnection: close\r\n\r\n",
                    reply.status,
                    reply.body.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(&reply.body);
            }
        });
        MockServer { url, hits }
    }

    fn hits(&self) -> Vec<Hit> {
        self.hits.lock().unwrap().clone()
    }
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        attempts: 3,
        base_delay: Duration::from_millis(1),
    }
}

fn item(id: &str, date: &str, base: &str) -> Value {
    json!({
        "type": "Feature",
        "id": id,
        "bbox": [91.0, 24.0, 92.0, 25.0],
        "properties": {"datetime": format!("{date}T04:30:00Z"), "eo:cloud_cover": 4.0},
        "assets": {
            "B04": {"href": format!("{base}/{id}_B4.tif")},
            "B08": {"href": format!("{base}/{id}_B8.tif")},
            "SCL": {"href": format!("{base}/{id}_SCL.tif")}
        }
    })
}

fn query() -> StacQuery {
    StacQuery {
        sensor_id: SensorId::Sentinel2,
        bbox: Bbox::new(91.7, 24.3, 91.8, 24.4).unwrap(),
        start_date: "2021-01-01".parse().unwrap(),
        end_date: "2021-03-31".parse().unwrap(),
        max_cloud_pct: 10.0,
        collection: None,
    }
}

fn today() -> chrono::NaiveDate {
    "2025-01-01".parse().unwrap()
}

#[test]
fn search_follows_pages_and_retries_server_errors() {
    let server = MockServer::start(|hit, seen, base| {
        match (hit.method.as_str(), hit.path.as_str()) {
            ("POST", "/search") if hit.body.get("token").is_none() => Reply::json(json!({
                "features": [item("A", "2021-01-05", base), item("B", "2021-01-20", base)],
                "links": [{"rel": "next", "href": format!("{base}/search"), "method": "POST", "merge": true, "body": {"token": "p2"}}]
            })),
            ("POST", "/search") => Reply::json(json!({
                "features": [item("B", "2021-01-20", base), item("C", "2021-02-09", base)],
                "links": [{"rel": "next", "href": format!("{base}/page3")}]
            })),
            ("GET", "/page3") if seen == 0 => Reply::status(503),
            ("GET", "/page3") => {
                Reply::json(json!({"features": [item("D", "2021-03-10", base)], "links": []}))
            }
            _ => Reply::status(404),
        }
    });
    let client = StacClient::new(&server.url)
        .unwrap()
        .retry(fast_retry())
        .page_limit(2);
    let manifest = client.search(&query(), today()).unwrap();
    let ids: Vec<_> = manifest
        .entries
        .iter()
        .map(|e| e.scene_id.as_str())
        .collect();
    assert_eq!(ids, ["A", "B", "C", "D"]);
    assert_eq!(
        manifest.entries[0].band_paths["B4"],
        format!("{}/A_B4.tif", server.url)
    );

    let hits = server.hits();
    let routes: Vec<_> = hits
        .iter()
        .map(|h| format!("{} {}", h.method, h.path))
        .collect();
    assert_eq!(
        routes,
        ["POST /search", "POST /search", "GET /page3", "GET /page3"]
    );
    let first = &hits[0].body;
    assert_eq!(first["collections"], json!(["sentinel-2-l2a"]));
    assert_eq!(first["limit"], 2);
    assert_eq!(first["query"]["eo:cloud_cover"]["lte"], 10.0);
    // The merged second body keeps the original filters.
    assert_eq!(hits[1].body["token"], "p2");
    assert_eq!(hits[1].body["bbox"], first["bbox"]);
}

#[test]
fn repeated_next_link_stops_paging() {
    let server = MockServer::start(|_, _, base| {
        Reply::json(json!({
            "features": [item("A", "2021-01-05", base)],
            "links": [{"rel": "next", "href": format!("{base}/same")}]
        }))
    });
    let client = StacClient::new(&server.url).unwrap().retry(fast_retry());
    assert_eq!(client.search(&query(), today()).unwrap().entries.len(), 1);
    assert_eq!(server.hits().len(), 2);
}

#[test]
fn upstream_failures_are_classified() {
    let always_503 = MockServer::start(|_, _, _| Reply::status(503));
    let client = StacClient::new(&always_503.url)
        .unwrap()
        .retry(fast_retry());
    assert!(matches!(
        client.search(&query(), today()),
        Err(Error::Transport(_))
    ));
    assert_eq!(always_503.hits().len(), 3);

    let not_found = MockServer::start(|_, _, _| Reply::status(404));
    let client = StacClient::new(&not_found.url).unwrap().retry(fast_retry());
    assert!(matches!(
        client.search(&query(), today()),
        Err(Error::Protocol(_))
    ));
    assert_eq!(not_found.hits().len(), 1);

    let garbage = MockServer::start(|_, _, _| Reply {
        status: 200,
        body: b"<html>not json</html>".to_vec(),
    });
    let client = StacClient::new(&garbage.url).unwrap().retry(fast_retry());
    assert!(matches!(
        client.search(&query(), today()),
        Err(Error::Protocol(_))
    ));
    assert_eq!(garbage.hits().len(), 1);

    let no_cloud = MockServer::start(|_, _, base| {
        let mut it = item("A", "2021-01-05", base);
        it["properties"]
            .as_object_mut()
            .unwrap()
            .remove("eo:cloud_cover");
        Reply::json(json!({ "features": [it] }))
    });
    let client = StacClient::new(&no_cloud.url).unwrap().retry(fast_retry());
    assert!(matches!(
        client.search(&query(), today()),
        Err(Error::Protocol(_))
    ));
}

#[test]
fn downloads_are_cached_by_url() {
    let server = MockServer::start(|hit, _, _| Reply {
        status: if hit.path == "/a.tif" { 200 } else { 404 },
        body: b"tiff bytes".to_vec(),
    });
    let cache = tempfile::tempdir().unwrap();
    let fetcher = AssetFetcher::with_cache(cache.path()).retry(fast_retry());
    let url = format!("{}/a.tif", server.url);
    let p = fetcher.localize(&url).unwrap();
    assert_eq!(p, fetcher.cache_path(&url).unwrap());
    assert_eq!(std::fs::read(&p).unwrap(), b"tiff bytes");
    assert_eq!(fetcher.localize(&url).unwrap(), p);
    assert_eq!(server.hits().len(), 1);
    assert!(matches!(
        fetcher.localize(&format!("{}/b.tif", server.url)),
        Err(Error::Protocol(_))
    ));

    let local_only = AssetFetcher::local_only();
    assert!(local_only.localize(&url).is_err());
    assert_eq!(
        local_only.localize("file:///tmp/x.tif").unwrap(),
        std::path::Path::new("/tmp/x.tif")
    );
}

#[test]
fn cache_evicts_oldest_files_beyond_budget() {
    let server = MockServer::start(|_, _, _| Reply {
        status: 200,
        body: vec![0u8; 100],
    });
    let cache = tempfile::tempdir().unwrap();
    let fetcher = AssetFetcher::with_cache(cache.path())
        .max_bytes(250)
        .retry(fast_retry());
    let urls: Vec<_> = (0..4).map(|i| format!("{}/{i}.tif", server.url)).collect();
    for u in &urls {
        fetcher.localize(u).unwrap();
        std::thread::sleep(Duration::from_millis(20));
    }
    let present: Vec<bool> = urls
        .iter()
        .map(|u| fetcher.cache_path(u).unwrap().exists())
        .collect();
    assert_eq!(present, [false, false, true, true]);
}

#[test]
fn analysis_over_remote_catalog() {
    let tmp = tempfile::tempdir().unwrap();
    let set = fixtures::write_sentinel2_fixtures(tmp.path().join("fx")).unwrap();
    let scenes_dir = tmp.path().join("fx/scenes");
    let listing: Vec<(String, String, f64)> = set
        .scenes
        .iter()
        .map(|s| (s.scene_id.to_string(), s.date().to_string(), s.cloud_pct))
        .collect();
    let server = MockServer::start(move |hit, _, base| {
        if hit.method == "POST" && hit.path == "/search" {
            let lte = hit.body["query"]["eo:cloud_cover"]["lte"].as_f64().unwrap();
            let features: Vec<Value> = listing
                .iter()
                .filter(|(_, _, c)| *c <= lte)
                .map(|(id, date, c)| {
                    let mut it = item(id, date, base);
                    it["properties"]["eo:cloud_cover"] = json!(c);
                    it
                })
                .collect();
            return Reply::json(json!({ "features": features }));
        }
        match std::fs::read(scenes_dir.join(hit.path.trim_start_matches('/'))) {
            Ok(body) => Reply { status: 200, body },
            Err(_) => Reply::status(404),
        }
    });

    let mut cfg = AnalyzerConfig::new(tmp.path().join("exports"));
    cfg.today = Some(today());
    cfg.asset_cache_dir = Some(tmp.path().join("assets"));
    let analyzer = Analyzer::new(cfg, DatasetCatalog::new());
    let mut req = set.request(0.6, 0.9, 10.0);
    req.source = SourceSpec::Stac {
        endpoint: server.url.clone(),
        collection: None,
        search_bbox: Some([91.7, 24.3, 91.8, 24.4]),
    };
    let AnalysisOutcome::Completed(r) = analyzer.analyze(&req).unwrap() else {
        panic!("expected a result")
    };
    assert_eq!(r.scene_count, 4);
    assert_eq!(r.area.pixel_count, 300);
    let downloads = server.hits().iter().filter(|h| h.method == "GET").count();
    assert_eq!(downloads, 12);
}
