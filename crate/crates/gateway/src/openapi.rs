use serde_json::{json, Value};

fn error_ref() -> Value {
    json!({"content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}})
}

/// OpenAPI 3.0 description of the HTTP API.
pub fn api_description() -> Value {
    let request_body = json!({"required": true, "content": {"application/json": {"schema":
        {"$ref": "#/components/schemas/AnalysisRequest"}}}});
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "NDVI analysis gateway",
            "version": env!("CARGO_PKG_VERSION"),
            "description": "Cloud-masked NDVI median composites, threshold area and mean-NDVI time series for a region of interest."
        },
        "paths": {
            "/sensors": {"get": {
                "summary": "Sensor registry: bands, availability windows, native scale, mask scheme",
                "responses": {"200": {"description": "registry document"}}
            }},
            "/validate": {"post": {
                "summary": "Check parameters; violations are data, so the status is 200 either way",
                "requestBody": request_body.clone(),
                "responses": {
                    "200": {"description": "report",
                            "content": {"application/json": {"schema": {"$ref": "#/components/schemas/ValidationReport"}}}},
                    "400": {"description": "body is not a parseable request"}
                }
            }},
            "/analyze": {"post": {
                "summary": "Run the full pipeline; threshold-only changes reuse the cached composite",
                "requestBody": request_body,
                "responses": {
                    "200": {"description": "completed result or no_scenes outcome",
                            "content": {"application/json": {"schema": {"$ref": "#/components/schemas/AnalysisOutcome"}}}},
                    "400": {"description": "malformed body"},
                    "404": {"description": "unknown dataset or administrative unit"},
                    "413": {"description": "pixel budget exceeded; the message states the budget"},
                    "422": {"description": "validation failure (with violations) or unusable geometry/source"},
                    "502": {"description": "scene catalog or asset host failed"}
                }
            }},
            "/datasets": {"get": {
                "summary": "Loaded vector datasets",
                "responses": {"200": {"description": "dataset ids and kinds"}}
            }},
            "/datasets/{dataset}/children": {"get": {
                "summary": "Names one level below `path` (slash-separated selections)",
                "parameters": [
                    {"name": "dataset", "in": "path", "required": true, "schema": {"type": "string"}},
                    {"name": "path", "in": "query", "required": false, "schema": {"type": "string"}, "example": "Atlantis"}
                ],
                "responses": {"200": {"description": "sorted child names"}, "404": error_ref()}
            }},
            "/export/{analysis_id}/{kind}": {"get": {
                "summary": "GeoTIFF of the clipped composite (float32) or threshold mask (uint8, 1 or nodata)",
                "parameters": [
                    {"name": "analysis_id", "in": "path", "required": true, "schema": {"type": "string"}},
                    {"name": "kind", "in": "path", "required": true, "schema": {"type": "string", "enum": ["composite", "mask"]}}
                ],
                "responses": {"200": {"description": "image/tiff"}, "404": error_ref()}
            }},
            "/cache/stats": {"get": {
                "summary": "Composite cache hit and miss counters",
                "responses": {"200": {"description": "counters"}}
            }},
            "/spec": {"get": {"summary": "This document", "responses": {"200": {"description": "OpenAPI document"}}}}
        },
        "components": {"schemas": {
            "Error": {"type": "object", "required": ["code", "message"], "properties": {
                "code": {"type": "string"}, "message": {"type": "string"}, "field": {"type": "string"},
                "violations": {"$ref": "#/components/schemas/ValidationReport"}, "hint": {"type": "string"}
            }},
            "AnalysisRequest": {"type": "object", "required": ["sensor_id", "start_date", "end_date", "ndvi_min", "ndvi_max", "max_cloud_pct", "source"],
                "properties": {
                    "sensor_id": {"type": "string", "enum": ["Sentinel-2", "Landsat 9", "Landsat 8", "Landsat 7", "Landsat 5"]},
                    "start_date": {"type": "string", "format": "date"},
                    "end_date": {"type": "string", "format": "date"},
                    "ndvi_min": {"type": "number", "minimum": -1, "maximum": 1},
                    "ndvi_max": {"type": "number", "minimum": -1, "maximum": 1},
                    "max_cloud_pct": {"type": "number", "minimum": 0, "maximum": 100},
                    "roi": {"description": "exactly one of the keys below", "oneOf": [
                        {"type": "object", "properties": {"polygon": {"type": "object", "properties": {
                            "vertices": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
                            "crs": {"type": "string", "default": "EPSG:4326"}}}}},
                        {"type": "object", "properties": {"bbox": {"type": "object", "properties": {
                            "bbox": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
                            "crs": {"type": "string", "default": "EPSG:4326"}}}}},
                        {"type": "object", "properties": {"admin": {"type": "object", "properties": {
                            "dataset": {"type": "string"}, "path": {"type": "array", "items": {"type": "string"}}}}}},
                        {"type": "object", "properties": {"protected_area": {"type": "object", "properties": {
                            "dataset": {"type": "string"}, "iso3": {"type": "string"}, "name": {"type": "string"}}}}},
                        {"type": "object", "properties": {"vector_file": {"type": "object", "properties": {"path": {"type": "string"}}}}}
                    ]},
                    "source": {"oneOf": [
                        {"type": "object", "properties": {"manifest": {"type": "object", "properties": {"path": {"type": "string"}}}}},
                        {"type": "object", "properties": {"stac": {"type": "object", "properties": {
                            "endpoint": {"type": "string"}, "collection": {"type": "string"},
                            "search_bbox": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}}}}}
                    ]}
                }},
            "ValidationReport": {"type": "object", "properties": {"violations": {"type": "array", "items": {
                "type": "object", "properties": {
                    "code": {"type": "string", "enum": ["DATE_BEFORE_SENSOR", "DATE_AFTER_SENSOR", "DATE_ORDER", "NDVI_ORDER", "NDVI_RANGE", "CLOUD_RANGE", "ROI_MISSING"]},
                    "field": {"type": "string", "enum": ["sensor_id", "start_date", "end_date", "ndvi_min", "ndvi_max", "max_cloud_pct", "roi"]},
                    "message": {"type": "string"}
                }}}}},
            "AnalysisOutcome": {"type": "object", "required": ["status"], "properties": {
                "status": {"type": "string", "enum": ["completed", "no_scenes"]},
                "analysis_id": {"type": "string", "description": "digest of the canonical request"},
                "area": {"type": "object", "properties": {
                    "area_km2": {"type": "number"}, "pixel_count": {"type": "integer"},
                    "pixel_area_basis": {"type": "string", "enum": ["projected-constant", "spherical-per-row"]},
                    "crs": {"type": "string"}}},
                "roi_area_km2": {"type": "number"},
                "scene_count": {"type": "integer"},
                "series": {"type": "array", "items": {"type": "object", "properties": {
                    "timestamp": {"type": "string", "format": "date"},
                    "mean_ndvi": {"type": "number", "nullable": true},
                    "valid_pixel_count": {"type": "integer"},
                    "scene_id": {"type": "string"}}}},
                "composite_ref": {"type": "string"},
                "mask_ref": {"type": "string"},
                "warnings": {"type": "array", "items": {"type": "string"}}
            }}
        }}
    })
}
