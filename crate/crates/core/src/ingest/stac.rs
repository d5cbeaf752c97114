use std::collections::{BTreeMap, HashSet};
use std::time::Duration;

use chrono::NaiveDate;
use serde_json::{json, Map, Value};

use super::manifest::{parse_date, ManifestEntry, SceneManifest};
use super::{http_error, RetryPolicy};
use crate::error::{Error, Result};
use crate::raster::{Bbox, Crs};
use crate::sensor::{SensorId, SensorSpec};

const MAX_PAGES: usize = 100;

/// Scene search parameters. `bbox` is longitude/latitude.
#[derive(Clone, Debug, PartialEq)]
pub struct StacQuery {
    pub sensor_id: SensorId,
    pub bbox: Bbox,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub max_cloud_pct: f64,
    /// Overrides the sensor's default collection id.
    pub collection: Option<String>,
}

impl StacQuery {
    /// Rejects intervals outside the sensor's availability before any
    /// request is made.
    pub fn check(&self, today: NaiveDate) -> Result<()> {
        let spec = self.sensor_id.spec();
        let last = spec.effective_end(today);
        if self.start_date > self.end_date {
            return Err(Error::InvalidData(format!(
                "start date {} after end date {}",
                self.start_date, self.end_date
            )));
        }
        if self.start_date < spec.availability_start || self.end_date > last {
            return Err(Error::InvalidData(format!(
                "{}..{} outside {} availability {}..{last}",
                self.start_date, self.end_date, self.sensor_id, spec.availability_start
            )));
        }
        if !(0.0..=100.0).contains(&self.max_cloud_pct) {
            return Err(Error::InvalidData(format!(
                "cloud cap {} outside [0, 100]",
                self.max_cloud_pct
            )));
        }
        Ok(())
    }

    pub fn collection(&self) -> &str {
        self.collection
            .as_deref()
            .unwrap_or(self.sensor_id.spec().stac_collection)
    }

    /// Request body for `POST /search`.
    pub fn body(&self, limit: usize) -> Value {
        let spec = self.sensor_id.spec();
        let mut query = Map::new();
        query.insert(
            "eo:cloud_cover".into(),
            json!({ "lte": self.max_cloud_pct }),
        );
        if let Some(p) = spec.stac_platform {
            query.insert("platform".into(), json!({ "eq": p }));
        }
        json!({
            "collections": [self.collection()],
            "bbox": self.bbox.as_array(),
            "datetime": format!("{}T00:00:00Z/{}T23:59:59Z", self.start_date, self.end_date),
            "limit": limit,
            "query": query,
        })
    }
}

/// Client for a STAC API item search endpoint.
#[derive(Clone, Debug)]
pub struct StacClient {
    endpoint: String,
    retry: RetryPolicy,
    page_limit: usize,
    client: reqwest::blocking::Client,
}

impl StacClient {
    /// `endpoint` is the API root; `/search` is appended.
    pub fn new(endpoint: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(StacClient {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            retry: RetryPolicy::default(),
            page_limit: 100,
            client,
        })
    }

    pub fn retry(mut self, policy: RetryPolicy) -> Self {
        self.retry = policy;
        self
    }

    pub fn page_limit(mut self, limit: usize) -> Self {
        self.page_limit = limit.max(1);
        self
    }

    /// Every matching item across all pages, as manifest entries with
    /// remote band locations.
    pub fn search(&self, query: &StacQuery, today: NaiveDate) -> Result<SceneManifest> {
        query.check(today)?;
        let spec = query.sensor_id.spec();
        let mut request = Request::Post {
            url: format!("{}/search", self.endpoint),
            body: query.body(self.page_limit),
        };
        let mut entries = Vec::new();
        let mut seen_ids = HashSet::new();
        let mut seen_pages = HashSet::new();
        for _ in 0..MAX_PAGES {
            if !seen_pages.insert(request.fingerprint()) {
                break;
            }
            let page = self.retry.run(|| self.send(&request))?;
            let features = page
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Protocol("search response lacks a features array".into()))?;
            for f in features {
                let Some(e) = item_to_entry(f, spec)? else {
                    continue;
                };
                if seen_ids.insert(e.scene_id.clone()) {
                    entries.push(e);
                }
            }
            match (features.is_empty(), next_request(&page, &request)?) {
                (false, Some(next)) => request = next,
                _ => break,
            }
        }
        SceneManifest::new(entries, None)
    }

    fn send(&self, req: &Request) -> Result<Value> {
        let builder = match req {
            Request::Post { url, body } => self.client.post(url).json(body),
            Request::Get { url } => self.client.get(url),
        };
        let resp = builder.send().map_err(http_error)?;
        let resp = resp.error_for_status().map_err(http_error)?;
        let text = resp.text().map_err(http_error)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Protocol(format!("malformed search response: {e}")))
    }
}

#[derive(Clone, Debug)]
enum Request {
    Post { url: String, body: Value },
    Get { url: String },
}

impl Request {
    fn fingerprint(&self) -> String {
        match self {
            Request::Post { url, body } => format!("POST {url} {body}"),
            Request::Get { url } => format!("GET {url}"),
        }
    }
}

/// Follows the `next` link. POST links carry a body that is merged into the
/// previous one when `merge` is set, or replaces it otherwise.
fn next_request(page: &Value, prev: &Request) -> Result<Option<Request>> {
    let Some(links) = page.get("links").and_then(Value::as_array) else {
        return Ok(None);
    };
    let Some(next) = links
        .iter()
        .find(|l| l.get("rel").and_then(Value::as_str) == Some("next"))
    else {
        return Ok(None);
    };
    let url = next
        .get("href")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Protocol("next link lacks href".into()))?
        .to_string();
    let method = next.get("method").and_then(Value::as_str).unwrap_or("GET");
    if !method.eq_ignore_ascii_case("POST") {
        return Ok(Some(Request::Get { url }));
    }
    let mut body = match (next.get("merge").and_then(Value::as_bool), prev) {
        (Some(true), Request::Post { body, .. }) => body.clone(),
        _ => Value::Object(Map::new()),
    };
    if let (Some(obj), Some(Value::Object(extra))) = (body.as_object_mut(), next.get("body")) {
        for (k, v) in extra {
            obj.insert(k.clone(), v.clone());
        }
    }
    Ok(Some(Request::Post { url, body }))
}

/// Asset keys tried for a band label, most specific first.
fn asset_keys(label: &str, spec: &SensorSpec) -> Vec<String> {
    let mut keys = vec![label.to_string()];
    if let Some(n) = label.strip_prefix('B').and_then(|n| n.parse::<u32>().ok()) {
        keys.push(format!("B{n:02}"));
    }
    let aliases: &[&str] = if label == spec.red_band {
        &["red"]
    } else if label == spec.nir_band {
        &["nir", "nir08"]
    } else if label == "SCL" {
        &["scl"]
    } else if label == "QA_PIXEL" {
        &["qa_pixel"]
    } else {
        &[]
    };
    keys.extend(aliases.iter().map(|s| s.to_string()));
    keys
}

fn normalize_platform(s: &str) -> String {
    s.to_ascii_lowercase().replace(['_', ' '], "-")
}

/// `None` for items of another platform within a shared collection.
fn item_to_entry(item: &Value, spec: &SensorSpec) -> Result<Option<ManifestEntry>> {
    let bad = |what: &str| Error::Protocol(format!("STAC item {what}"));
    let id = item
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("lacks id"))?;
    let props = item
        .get("properties")
        .and_then(Value::as_object)
        .ok_or_else(|| bad(&format!("{id} lacks properties")))?;
    if let (Some(want), Some(have)) = (
        spec.stac_platform,
        props.get("platform").and_then(Value::as_str),
    ) {
        if normalize_platform(have) != normalize_platform(want) {
            return Ok(None);
        }
    }
    let when = props
        .get("datetime")
        .and_then(Value::as_str)
        .or_else(|| props.get("start_datetime").and_then(Value::as_str))
        .ok_or_else(|| bad(&format!("{id} lacks datetime")))?;
    let timestamp = parse_date(when).map_err(|e| bad(&format!("{id}: {e}")))?;
    let cloud = props
        .get("eo:cloud_cover")
        .and_then(Value::as_f64)
        .ok_or_else(|| bad(&format!("{id} lacks eo:cloud_cover")))?;
    let bbox: [f64; 4] = item
        .get("bbox")
        .and_then(Value::as_array)
        .filter(|b| b.len() == 4)
        .and_then(|b| {
            let v: Vec<f64> = b.iter().filter_map(Value::as_f64).collect();
            v.try_into().ok()
        })
        .ok_or_else(|| bad(&format!("{id} lacks a 2-D bbox")))?;
    let assets = item
        .get("assets")
        .and_then(Value::as_object)
        .ok_or_else(|| bad(&format!("{id} lacks assets")))?;
    let mut band_paths = BTreeMap::new();
    for label in [spec.red_band, spec.nir_band, spec.qa_band] {
        let href = asset_keys(label, spec)
            .iter()
            .find_map(|k| {
                assets
                    .get(k)
                    .and_then(|a| a.get("href"))
                    .and_then(Value::as_str)
            })
            .ok_or_else(|| bad(&format!("{id} has no asset for band {label}")))?;
        band_paths.insert(label.to_string(), href.to_string());
    }
    let mut properties = BTreeMap::new();
    properties.insert(spec.cloud_metadata_key.to_string(), json!(cloud));
    Ok(Some(ManifestEntry {
        scene_id: id.to_string(),
        sensor_id: spec.sensor_id,
        timestamp,
        cloud_cover_pct: Some(cloud),
        properties,
        bbox,
        crs: Some(Crs::Geographic),
        band_paths,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query() -> StacQuery {
        StacQuery {
            sensor_id: SensorId::Landsat8,
            bbox: Bbox::new(91.7, 24.3, 91.8, 24.4).unwrap(),
            start_date: "2021-01-01".parse().unwrap(),
            end_date: "2021-03-31".parse().unwrap(),
            max_cloud_pct: 20.0,
            collection: None,
        }
    }

    #[test]
    fn body_carries_filters() {
        let b = query().body(50);
        assert_eq!(b["collections"][0], "landsat-c2-l2");
        assert_eq!(b["query"]["eo:cloud_cover"]["lte"], 20.0);
        assert_eq!(b["query"]["platform"]["eq"], "landsat-8");
        assert_eq!(b["datetime"], "2021-01-01T00:00:00Z/2021-03-31T23:59:59Z");
    }

    #[test]
    fn availability_checked_before_network() {
        let mut q = query();
        q.start_date = "2012-01-01".parse().unwrap();
        let today = "2025-01-01".parse().unwrap();
        assert!(q.check(today).is_err());
        let client = StacClient::new("http://127.0.0.1:9").unwrap();
        assert!(matches!(
            client.search(&q, today),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn item_mapping() {
        let spec = SensorId::Landsat8.spec();
        let item = json!({
            "id": "LC08_X",
            "bbox": [91.0, 24.0, 92.0, 25.0],
            "properties": {"datetime": "2021-01-05T04:30:00.123Z", "eo:cloud_cover": 3.5, "platform": "LANDSAT_8"},
            "assets": {"red": {"href": "https://x/red.tif"}, "nir08": {"href": "https://x/nir.tif"},
                       "qa_pixel": {"href": "https://x/qa.tif"}}
        });
        let e = item_to_entry(&item, spec).unwrap().unwrap();
        assert_eq!(e.band_paths["SR_B5"], "https://x/nir.tif");
        assert_eq!(e.cloud_cover(), Some(3.5));
        assert_eq!(e.timestamp, "2021-01-05".parse::<NaiveDate>().unwrap());

        let mut other = item.clone();
        other["properties"]["platform"] = "landsat-9".into();
        assert!(item_to_entry(&other, spec).unwrap().is_none());

        let mut broken = item;
        broken["properties"]
            .as_object_mut()
            .unwrap()
            .remove("eo:cloud_cover");
        assert!(matches!(
            item_to_entry(&broken, spec),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn sentinel_asset_keys() {
        let keys = asset_keys("B8", SensorId::Sentinel2.spec());
        assert_eq!(keys, ["B8", "B08", "nir", "nir08"]);
    }

    #[test]
    fn next_link_merge() {
        let prev = Request::Post {
            url: "u".into(),
            body: json!({"limit": 10, "bbox": [0, 0, 1, 1]}),
        };
        let page = json!({"links": [{"rel": "next", "href": "u2", "method": "POST", "merge": true,
                                      "body": {"token": "abc"}}]});
        let Some(Request::Post { url, body }) = next_request(&page, &prev).unwrap() else {
            panic!("expected POST")
        };
        assert_eq!(url, "u2");
        assert_eq!(body["token"], "abc");
        assert_eq!(body["limit"], 10);
        let get = json!({"links": [{"rel": "next", "href": "u3?page=2"}]});
        assert!(matches!(
            next_request(&get, &prev).unwrap(),
            Some(Request::Get { .. })
        ));
    }
}
