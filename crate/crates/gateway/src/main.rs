use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use ndvi_core::analytics::time_series_csv;
use ndvi_core::ingest::ExportKind;
use ndvi_core::pipeline::{
    AnalysisOutcome, AnalysisRequest, AnalysisResult, AnalyzeError, Analyzer, RoiSpec, SourceSpec,
};
use ndvi_core::sensor::{availability_table, registry, AnalysisParams, SensorId};
use ndvi_core::Crs;
use ndvi_gateway::EngineArgs;

const EXIT_INVALID: u8 = 2;
const EXIT_NO_SCENES: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ndvi",
    version,
    about = "NDVI composites, vegetated area and time series for a region"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an analysis and print the area and time series.
    Analyze {
        #[command(flatten)]
        request: RequestArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Print the full result as JSON.
        #[arg(long)]
        json: bool,
        /// Also write the time series as CSV.
        #[arg(long)]
        series_csv: Option<PathBuf>,
    },
    /// Check parameters without running anything.
    Validate {
        #[command(flatten)]
        request: RequestArgs,
    },
    /// List supported platforms and their availability.
    Sensors {
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run an analysis and copy its GeoTIFFs into a directory.
    Export {
        #[command(flatten)]
        request: RequestArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Either a request file or flags mirroring its fields.
#[derive(clap::Args)]
struct RequestArgs {
    /// Complete request as JSON; other request flags are ignored.
    #[arg(long)]
    request: Option<PathBuf>,
    #[arg(long)]
    sensor: Option<String>,
    #[arg(long)]
    start: Option<NaiveDate>,
    #[arg(long)]
    end: Option<NaiveDate>,
    /// Lower NDVI bound.
    #[arg(long = "min", allow_hyphen_values = true, default_value_t = -1.0)]
    ndvi_min: f64,
    /// Upper NDVI bound.
    #[arg(long = "max", allow_hyphen_values = true, default_value_t = 1.0)]
    ndvi_max: f64,
    /// Maximum scene cloud cover, percent.
    #[arg(long, allow_hyphen_values = true, default_value_t = 10.0)]
    max_cloud: f64,
    /// ROI from a GeoJSON file (all features dissolved).
    #[arg(long, group = "roi_source")]
    roi: Option<PathBuf>,
    /// ROI rectangle `min_x,min_y,max_x,max_y` in `--crs`.
    #[arg(long, group = "roi_source", allow_hyphen_values = true)]
    bbox: Option<String>,
    /// Administrative unit `dataset:Level1/Level2/...`.
    #[arg(long, group = "roi_source")]
    admin: Option<String>,
    /// Protected area `dataset:ISO3/Name`.
    #[arg(long, group = "roi_source")]
    protected_area: Option<String>,
    /// CRS of `--bbox`.
    #[arg(long, default_value = "EPSG:4326")]
    crs: Crs,
    /// Scene manifest (JSON).
    #[arg(long, group = "scene_source")]
    manifest: Option<PathBuf>,
    /// STAC API root URL.
    #[arg(long, group = "scene_source")]
    stac: Option<String>,
    #[arg(long, requires = "stac")]
    collection: Option<String>,
    /// Longitude/latitude box for STAC search when the ROI is projected.
    #[arg(long, requires = "stac", allow_hyphen_values = true)]
    search_bbox: Option<String>,
}

fn parse_bbox(s: &str) -> anyhow::Result<[f64; 4]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad bbox `{s}`"))?;
    v.try_into()
        .map_err(|_| anyhow!("bbox needs four numbers, got `{s}`"))
}

fn split_selector(s: &str) -> anyhow::Result<(String, Vec<String>)> {
    let (ds, path) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("expected `dataset:path`, got `{s}`"))?;
    Ok((
        ds.to_string(),
        path.split('/')
            .filter(|p| !p.is_empty())
            .map(String::from)
            .collect(),
    ))
}

impl RequestArgs {
    fn build(&self) -> anyhow::Result<AnalysisRequest> {
        if let Some(p) = &self.request {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            return serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()));
        }
        let sensor_id: SensorId = self
            .sensor
            .as_deref()
            .ok_or_else(|| anyhow!("--sensor is required without --request"))?
            .parse()?;
        let params = AnalysisParams {
            sensor_id,
            start_date: self.start.ok_or_else(|| anyhow!("--start is required"))?,
            end_date: self.end.ok_or_else(|| anyhow!("--end is required"))?,
            ndvi_min: self.ndvi_min,
            ndvi_max: self.ndvi_max,
            max_cloud_pct: self.max_cloud,
        };
        let roi = if let Some(p) = &self.roi {
            Some(RoiSpec::VectorFile { path: p.clone() })
        } else if let Some(b) = &self.bbox {
            Some(RoiSpec::Bbox {
                bbox: parse_bbox(b)?,
                crs: self.crs,
            })
        } else if let Some(a) = &self.admin {
            let (dataset, path) = split_selector(a)?;
            Some(RoiSpec::Admin { dataset, path })
        } else if let Some(pa) = &self.protected_area {
            let (dataset, path) = split_selector(pa)?;
            let [iso3, name]: [String; 2] = path
                .try_into()
                .map_err(|_| anyhow!("expected `dataset:ISO3/Name`, got `{pa}`"))?;
            Some(RoiSpec::ProtectedArea {
                dataset,
                iso3,
                name,
            })
        } else {
            None
        };
        let source = match (&self.manifest, &self.stac) {
            (Some(path), _) => SourceSpec::Manifest { path: path.clone() },
            (None, Some(endpoint)) => SourceSpec::Stac {
                endpoint: endpoint.clone(),
                collection: self.collection.clone(),
                search_bbox: self.search_bbox.as_deref().map(parse_bbox).transpose()?,
            },
            (None, None) => bail!("one of --manifest or --stac is required"),
        };
        Ok(AnalysisRequest {
            params,
            roi,
            source,
        })
    }
}

fn print_result(r: &AnalysisResult) {
    let p = &r.params_echo.params;
    println!(
        "analysis {}: {} {}..{}, ROI {}",
        r.analysis_id, r.sensor_id, r.start_date, r.end_date, r.roi_label
    );
    println!("scenes: {}", r.scene_count);
    println!(
        "area with NDVI in [{}, {}]: {:.6} km² ({} pixels, {}, {})",
        p.ndvi_min,
        p.ndvi_max,
        r.area.area_km2,
        r.area.pixel_count,
        r.area.crs,
        r.area.pixel_area_basis.as_str()
    );
    println!(
        "ROI area: {:.6} km² ({} pixels)",
        r.roi_area_km2, r.roi_pixel_count
    );
    println!("time series:");
    for pt in &r.series {
        let mean = pt
            .mean_ndvi
            .map(|m| format!("{m:.4}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "  {}  {:>7}  {:>8}  {}",
            pt.timestamp, mean, pt.valid_pixel_count, pt.scene_id
        );
    }
    for w in &r.warnings {
        println!("note: {w}");
    }
}

/// Runs the analysis; `Err(code)` carries the exit code already reported.
fn run_analysis(
    request: &RequestArgs,
    engine: &EngineArgs,
) -> anyhow::Result<Result<(Analyzer, AnalysisResult), u8>> {
    let req = request.build()?;
    let analyzer = engine.build()?;
    match analyzer.analyze(&req) {
        Ok(AnalysisOutcome::Completed(r)) => Ok(Ok((analyzer, *r))),
        Ok(AnalysisOutcome::NoScenes { message, .. }) => {
            eprintln!("no scenes: {message}");
            Ok(Err(EXIT_NO_SCENES))
        }
        Err(AnalyzeError::Invalid(report)) => {
            eprintln!("{}", serde_json::to_string_pretty(&report)?);
            Ok(Err(EXIT_INVALID))
        }
        Err(e) => Err(e.into()),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Sensors { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(registry())?);
            } else {
                print!("{}", availability_table());
            }
        }
        Command::Validate { request } => {
            let req = request.build()?;
            let p = &req.params;
            let report =
                ndvi_core::sensor::validate_params(p, p.sensor_id.spec(), req.roi.is_some());
            if !report.is_empty() {
                eprintln!("{}", serde_json::to_string_pretty(&report)?);
                return Ok(ExitCode::from(EXIT_INVALID));
            }
            println!("valid");
        }
        Command::Analyze {
            request,
            engine,
            json,
            series_csv,
        } => {
            let (_, r) = match run_analysis(&request, &engine)? {
                Ok(v) => v,
                Err(code) => return Ok(ExitCode::from(code)),
            };
            if let Some(path) = series_csv {
                std::fs::write(&path, time_series_csv(&r.series)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print_result(&r);
            }
        }
        Command::Export {
            request,
            engine,
            out,
        } => {
            let (analyzer, r) = match run_analysis(&request, &engine)? {
                Ok(v) => v,
                Err(code) => return Ok(ExitCode::from(code)),
            };
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for kind in [ExportKind::Composite, ExportKind::Mask] {
                let src = analyzer
                    .exports()
                    .get(&r.analysis_id, kind)
                    .ok_or_else(|| anyhow!("{kind} export missing"))?;
                let dest = out.join(kind.file_name(&r.analysis_id));
                std::fs::copy(&src, &dest)
                    .with_context(|| format!("copying to {}", dest.display()))?;
                println!("{}", dest.display());
            }
        }
        Command::Serve { addr, engine } => {
            let analyzer = Arc::new(engine.build()?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on http://{addr}");
                eprintln!("listening on http://{addr}");
                axum::serve(listener, ndvi_gateway::router(analyzer))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
