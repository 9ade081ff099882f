//! Pipeline stages. Each reads the previous stage's artifacts from the run
//! directory, writes its own, and records itself in the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};
use valuemap::catalog::{load_catalog, load_unvalidated, shipped_catalog, validate_catalog, ValidationReport};
use valuemap::codec::{encode, EncodedResponse};
use valuemap::compare::{compare, load_benchmark, Comparison, DIMENSIONS};
use valuemap::gateway::{
    BackendConfig, BackendKind, BatchOutcome, CacheHandle, FailureMode, Gateway, RawResponse,
    ReplayFixture,
};
use valuemap::index::{aggregate_all, build_map, FactorLoadingTable, MissingItems};
use valuemap::prompt::{build_batch, PromptJob};
use valuemap::viz::{
    emit_choropleth, emit_lollipop, emit_scatter_map, load_geometry, ChoroplethMode, PlotBundle,
};
use valuemap::{Catalog, CulturalMap, IndexPoint};

use crate::config::{BackendChoice, Settings};
use crate::error::{CliError, Result};
use crate::manifest::{stage_record, write_atomic, RunManifest, StageStatus};

pub const BUILTIN_FIXTURE: &str = include_str!("../fixtures/replay_gpt-4.jsonl");

pub const STAGES: [&str; 5] = ["simulate", "encode", "index", "compare", "render"];

pub const RAW_RESPONSES: &str = "raw_responses.jsonl";
pub const RAW_ERRORS: &str = "raw_errors.jsonl";
pub const ENCODED_JSONL: &str = "encoded.jsonl";
pub const ENCODED_CSV: &str = "encoded.csv";
pub const INDEX_CSV: &str = "index.csv";
pub const INDEX_AUDIT: &str = "index_audit.jsonl";
pub const DIFFS_CSV: &str = "diffs.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const JOIN_REPORT: &str = "join_report.json";
pub const PLOTS_DIR: &str = "plots";

/// Resolved settings plus the loaded, validated and filtered catalog.
pub struct Context {
    pub settings: Settings,
    pub catalog: Catalog,
    pub catalog_hash: String,
}

fn catalog_hash(catalog: &Catalog) -> String {
    let canonical = serde_json::json!({
        "entities": catalog.entities,
        "items": catalog.items,
        "loadings": catalog.loadings,
    });
    hex::encode(&Sha256::digest(canonical.to_string().as_bytes())[..16])
}

fn base_catalog(settings: &Settings, validated: bool) -> Result<Catalog> {
    let mut catalog = match (&settings.catalog, validated) {
        (Some(path), true) => load_catalog(path)?,
        (Some(path), false) => load_unvalidated(path)?,
        (None, _) => shipped_catalog(),
    };
    if let Some(path) = &settings.loadings {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let table = FactorLoadingTable::parse(&text, &path.display().to_string())?;
        catalog.loadings = catalog.loadings.clone().merged(&table);
    }
    Ok(catalog)
}

impl Context {
    pub fn new(settings: Settings) -> Result<Self> {
        let catalog = base_catalog(&settings, true)?;
        let report = validate_catalog(&catalog);
        if !report.is_valid() {
            return Err(CliError::Violations(report.violations));
        }
        let catalog = match &settings.entities {
            Some(names) => catalog.restrict_entities(names)?,
            None => catalog,
        };
        let catalog_hash = catalog_hash(&catalog);
        Ok(Context {
            settings,
            catalog,
            catalog_hash,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.settings.out_dir
    }

    pub fn run_id(&self) -> String {
        let s = &self.settings;
        let key = serde_json::json!([
            self.catalog_hash,
            s.model,
            s.sampling,
            s.backend_summary(),
        ]);
        hex::encode(&Sha256::digest(key.to_string().as_bytes())[..6])
    }

    fn manifest(&self) -> Result<RunManifest> {
        match RunManifest::load(self.out_dir())? {
            Some(m) if m.catalog_hash == self.catalog_hash => Ok(m),
            Some(_) => Err(CliError::Invalid(format!(
                "{} was produced from a different catalog or entity selection; \
                 rerun simulate or use another --out-dir",
                self.out_dir().display()
            ))),
            None => Err(CliError::UpstreamMissing {
                stage: "simulate".into(),
                dir: self.out_dir().to_path_buf(),
            }),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    pub fn backend_config(&self) -> Result<BackendConfig> {
        let b = &self.settings.backend;
        let kind = match b.kind {
            BackendChoice::Replay => {
                let fixture = match &b.fixture {
                    Some(path) => {
                        if !path.is_file() {
                            return Err(CliError::io(
                                path,
                                std::io::Error::new(std::io::ErrorKind::NotFound, "fixture not found"),
                            ));
                        }
                        ReplayFixture::load(path)?
                    }
                    None => ReplayFixture::parse(BUILTIN_FIXTURE)?,
                };
                BackendKind::Replay(Arc::new(fixture))
            }
            BackendChoice::HttpChat => BackendKind::HttpChat {
                endpoint: b.endpoint.clone(),
                model: self.settings.model.clone(),
                api_key_env: b.api_key_env.clone(),
                timeout: b.timeout,
            },
        };
        Ok(BackendConfig {
            kind,
            retry: b.retry,
            rate_limit: b.rate_limit,
            parallelism: b.parallelism,
        })
    }
}

/// Checks a catalog file without loading it into a run.
pub fn cmd_validate(settings: &Settings) -> Result<ValidationReport> {
    if let Some(path) = &settings.catalog {
        if !path.exists() {
            return Err(valuemap::catalog::CatalogError::MissingFile(path.clone()).into());
        }
    }
    let catalog = base_catalog(settings, false)?;
    Ok(validate_catalog(&catalog))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| {
                CliError::Invalid(format!("{}:{}: {e}", path.display(), n + 1))
            })
        })
        .collect()
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub jobs: usize,
    pub responses: usize,
    pub failed: usize,
    pub backend_calls: usize,
    pub cache_hits: usize,
}

#[derive(Serialize)]
struct ErrorRow<'a> {
    index: usize,
    job_id: &'a str,
    entity: &'a str,
    item_code: &'a str,
    error: String,
}

pub fn cmd_simulate(ctx: &Context) -> Result<SimulateSummary> {
    let settings = &ctx.settings;
    let dir = ctx.out_dir();
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let jobs: Vec<PromptJob> = build_batch(&ctx.catalog, &settings.model, &settings.sampling);
    let backend = ctx.backend_config()?;
    let cache_root = settings.cache_root();
    let cache = CacheHandle::open(&cache_root, ctx.run_id())?;
    let gateway = Gateway::new(&backend, &cache)?;
    let mode = if settings.fail_fast {
        FailureMode::FailFast
    } else {
        FailureMode::Continue
    };
    log::info!("simulate: {} jobs via {}", jobs.len(), settings.backend_summary());

    let mut manifest = RunManifest::new(
        &ctx.run_id(),
        &ctx.catalog_hash,
        &settings.backend_summary(),
        &settings.model,
    );
    if let Some(old) = RunManifest::load(dir)? {
        if old.catalog_hash == ctx.catalog_hash && old.run_id == manifest.run_id {
            manifest.created_at = old.created_at;
        }
    }

    let outcome: BatchOutcome = match gateway.execute_batch(&jobs, mode) {
        Ok(o) => o,
        Err(e) => {
            manifest.save(dir)?;
            return Err(e.into());
        }
    };
    let responses: Vec<&RawResponse> = outcome.successes().collect();
    let errors: Vec<ErrorRow> = outcome
        .failures()
        .map(|(i, e)| ErrorRow {
            index: i,
            job_id: &jobs[i].job_id,
            entity: &jobs[i].entity,
            item_code: &jobs[i].item_code,
            error: e.to_string(),
        })
        .collect();
    write_jsonl(&ctx.path(RAW_RESPONSES), &responses)?;
    write_jsonl(&ctx.path(RAW_ERRORS), &errors)?;
    let summary = SimulateSummary {
        jobs: jobs.len(),
        responses: responses.len(),
        failed: errors.len(),
        backend_calls: outcome.stats.backend_calls,
        cache_hits: outcome.stats.cache_hits,
    };
    manifest.record(
        "simulate",
        stage_record(
            &[RAW_RESPONSES, RAW_ERRORS],
            responses.len(),
            errors.len(),
            vec![format!(
                "backend calls {}, cache hits {}, peak in flight {}",
                outcome.stats.backend_calls, outcome.stats.cache_hits, outcome.stats.max_in_flight
            )],
        ),
    );
    manifest.save(dir)?;
    if let Some(first) = errors.first() {
        return Err(CliError::JobsFailed {
            failed: errors.len(),
            total: jobs.len(),
            first: format!("{} {}: {}", first.entity, first.item_code, first.error),
        });
    }
    Ok(summary)
}

#[derive(Serialize)]
struct EncodedRow<'a> {
    entity: &'a str,
    item_code: &'a str,
    value: f64,
    method: &'a str,
    raw_text: &'a str,
}

pub fn cmd_encode(ctx: &Context) -> Result<usize> {
    let dir = ctx.out_dir();
    let mut manifest = ctx.manifest()?;
    manifest.require("simulate", dir, ctx.settings.allow_partial)?;
    let raw: Vec<RawResponse> = read_jsonl(&ctx.path(RAW_RESPONSES))?;
    let mut encoded = Vec::with_capacity(raw.len());
    for r in &raw {
        let item = ctx
            .catalog
            .item(&r.item_code)
            .ok_or_else(|| CliError::Invalid(format!("raw response for unknown item {}", r.item_code)))?;
        encoded.push(encode(r, item));
    }
    write_jsonl(&ctx.path(ENCODED_JSONL), &encoded)?;
    let rows: Vec<EncodedRow> = encoded
        .iter()
        .map(|e| EncodedRow {
            entity: &e.entity,
            item_code: &e.item_code,
            value: e.value,
            method: e.method.as_str(),
            raw_text: &e.raw_text,
        })
        .collect();
    write_csv(&ctx.path(ENCODED_CSV), &rows)?;
    let imputed = encoded
        .iter()
        .filter(|e| e.method == valuemap::codec::EncodingMethod::ImputedMidrange)
        .count();
    manifest.invalidate(&STAGES[1..]);
    manifest.record(
        "encode",
        stage_record(
            &[ENCODED_JSONL, ENCODED_CSV],
            encoded.len(),
            0,
            vec![format!("{imputed} ambiguous answer(s) imputed at midrange")],
        ),
    );
    manifest.save(dir)?;
    Ok(encoded.len())
}

#[derive(Serialize)]
struct IndexRow<'a> {
    entity: &'a str,
    region: &'a str,
    trad_sec: f64,
    surv_self: f64,
    items: usize,
}

pub fn cmd_index(ctx: &Context) -> Result<usize> {
    let dir = ctx.out_dir();
    let mut manifest = ctx.manifest()?;
    manifest.require("encode", dir, ctx.settings.allow_partial)?;
    let allow_partial = ctx.settings.allow_partial
        || manifest
            .stages
            .get("simulate")
            .is_some_and(|s| s.status == StageStatus::Partial && ctx.settings.allow_partial);
    let encoded: Vec<EncodedResponse> = read_jsonl(&ctx.path(ENCODED_JSONL))?;
    let missing = if allow_partial {
        MissingItems::Renormalize
    } else {
        MissingItems::Fail
    };
    let points: Vec<IndexPoint> = aggregate_all(&encoded, &ctx.catalog, missing)?;
    let map: CulturalMap = build_map(points, ctx.settings.projection)?;
    let rows: Vec<IndexRow> = map
        .points
        .iter()
        .map(|p| IndexRow {
            entity: &p.entity,
            region: ctx.catalog.region_of(&p.entity).map(|r| r.name()).unwrap_or(""),
            trad_sec: p.trad_sec,
            surv_self: p.surv_self,
            items: p.contributions.len(),
        })
        .collect();
    write_csv(&ctx.path(INDEX_CSV), &rows)?;
    write_jsonl(&ctx.path(INDEX_AUDIT), &map.points)?;
    manifest.invalidate(&STAGES[2..]);
    manifest.record("index", stage_record(&[INDEX_CSV, INDEX_AUDIT], map.points.len(), 0, vec![]));
    manifest.save(dir)?;
    Ok(map.points.len())
}

fn load_map(ctx: &Context) -> Result<CulturalMap> {
    let points: Vec<IndexPoint> = read_jsonl(&ctx.path(INDEX_AUDIT))?;
    Ok(CulturalMap {
        points,
        projection: ctx.settings.projection,
    })
}

#[derive(Serialize)]
struct DiffRow<'a> {
    entity: &'a str,
    region: &'a str,
    dimension: &'a str,
    model: f64,
    survey: f64,
    signed: f64,
    absolute: f64,
}

#[derive(Serialize)]
struct MetricRow<'a> {
    region: &'a str,
    dimension: &'a str,
    mse: f64,
    mae: f64,
    n: usize,
    flagged: bool,
    threshold: f64,
    label: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    pub joined: usize,
    pub metric_rows: usize,
    pub thresholds: Vec<(String, f64)>,
    pub flagged: Vec<String>,
}

pub fn cmd_compare(ctx: &Context) -> Result<CompareSummary> {
    let dir = ctx.out_dir();
    let mut manifest = ctx.manifest()?;
    manifest.require("index", dir, ctx.settings.allow_partial)?;
    let path = ctx
        .settings
        .benchmark
        .as_ref()
        .ok_or_else(|| CliError::Config("compare needs --benchmark <csv>".into()))?;
    let (bench, join) = load_benchmark::<f64>(path, &ctx.catalog)?;
    let map = load_map(ctx)?;
    let cmp: Comparison<f64> = compare(&map, &bench, &ctx.catalog, ctx.settings.threshold_ranks)?;

    let region_name = |e: &str| ctx.catalog.region_of(e).map(|r| r.name()).unwrap_or("");
    let diff_rows: Vec<DiffRow> = cmp
        .diffs
        .iter()
        .map(|d| {
            let model = map.point(&d.entity).map_or(f64::NAN, |p| p.coordinate(d.dimension));
            let survey = bench.point(&d.entity).map_or(f64::NAN, |p| p.coordinate(d.dimension));
            DiffRow {
                entity: &d.entity,
                region: region_name(&d.entity),
                dimension: d.dimension.key(),
                model,
                survey,
                signed: d.signed,
                absolute: d.absolute,
            }
        })
        .collect();
    let mut metric_rows = Vec::new();
    for dc in &cmp.dimensions {
        for m in &dc.metrics {
            metric_rows.push(MetricRow {
                region: m.region.name(),
                dimension: m.dimension.key(),
                mse: m.mse,
                mae: m.mae,
                n: m.n,
                flagged: m.flagged,
                threshold: dc.threshold,
                label: ctx.settings.labels.label(m.mse, dc.threshold),
            });
        }
    }
    write_csv(&ctx.path(DIFFS_CSV), &diff_rows)?;
    write_csv(&ctx.path(METRICS_CSV), &metric_rows)?;
    let comparison_doc = serde_json::json!({
        "benchmark_source": bench.source,
        "threshold_ranks": [ctx.settings.threshold_ranks.0, ctx.settings.threshold_ranks.1],
        "comparison": cmp,
    });
    write_atomic(
        &ctx.path(COMPARISON_JSON),
        (serde_json::to_string_pretty(&comparison_doc).expect("serializes") + "\n").as_bytes(),
    )?;
    write_atomic(
        &ctx.path(JOIN_REPORT),
        (serde_json::to_string_pretty(&join).expect("serializes") + "\n").as_bytes(),
    )?;

    let mut notes = Vec::new();
    if !join.unmatched_rows.is_empty() {
        notes.push(format!("{} benchmark row(s) unmatched", join.unmatched_rows.len()));
    }
    if !join.missing_entities.is_empty() {
        notes.push(format!("{} entit(ies) missing from benchmark", join.missing_entities.len()));
    }
    for (region, dim) in &cmp.empty_regions {
        notes.push(format!("no joined entities for {region} / {}", dim.key()));
    }
    let summary = CompareSummary {
        joined: cmp.diffs.len() / DIMENSIONS.len(),
        metric_rows: metric_rows.len(),
        thresholds: cmp
            .dimensions
            .iter()
            .map(|d| (d.dimension.key().to_string(), d.threshold))
            .collect(),
        flagged: metric_rows
            .iter()
            .filter(|m| m.flagged)
            .map(|m| format!("{} / {}", m.region, m.dimension))
            .collect(),
    };
    manifest.invalidate(&STAGES[3..]);
    manifest.record(
        "compare",
        stage_record(
            &[DIFFS_CSV, METRICS_CSV, COMPARISON_JSON, JOIN_REPORT],
            metric_rows.len(),
            0,
            notes,
        ),
    );
    manifest.save(dir)?;
    Ok(summary)
}

fn load_comparison(ctx: &Context) -> Result<Comparison<f64>> {
    let path = ctx.path(COMPARISON_JSON);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_value(doc["comparison"].take())
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_bundle(ctx: &Context, name: &str, bundle: &PlotBundle, written: &mut Vec<String>) -> Result<()> {
    let svg = format!("{PLOTS_DIR}/{name}.svg");
    let json = format!("{PLOTS_DIR}/{name}.json");
    write_atomic(&ctx.path(&svg), bundle.svg.as_bytes())?;
    write_atomic(&ctx.path(&json), (bundle.data_json() + "\n").as_bytes())?;
    written.push(svg);
    written.push(json);
    Ok(())
}

/// Writes the scatter map, and when a comparison exists, lollipops and (with
/// `--geometry`) signed and absolute choropleths. Returns paths relative to the run dir.
pub fn cmd_render(ctx: &Context) -> Result<Vec<String>> {
    let dir = ctx.out_dir();
    let mut manifest = ctx.manifest()?;
    manifest.require("index", dir, ctx.settings.allow_partial)?;
    let map = load_map(ctx)?;
    let mut written = Vec::new();
    let mut notes = Vec::new();
    write_bundle(ctx, "scatter_map", &emit_scatter_map(&map, &ctx.catalog), &mut written)?;

    if manifest.require("compare", dir, ctx.settings.allow_partial).is_ok() {
        let cmp = load_comparison(ctx)?;
        for dc in &cmp.dimensions {
            let bundle = emit_lollipop(&dc.metrics, dc.threshold, dc.dimension);
            write_bundle(ctx, &format!("lollipop_{}", dc.dimension.key()), &bundle, &mut written)?;
        }
        match &ctx.settings.geometry {
            Some(path) => {
                let geometry = load_geometry(path, &ctx.catalog)?;
                for mode in [ChoroplethMode::Signed, ChoroplethMode::Absolute] {
                    for dimension in DIMENSIONS {
                        let bundle = emit_choropleth(&cmp.diffs, mode, dimension, &geometry, &ctx.catalog);
                        if !bundle.data.unjoined.is_empty() {
                            notes.push(format!(
                                "choropleth {} {}: no geometry for {}",
                                mode.name(),
                                dimension.key(),
                                bundle.data.unjoined.join(", ")
                            ));
                        }
                        let name = format!("choropleth_{}_{}", mode.name(), dimension.key());
                        write_bundle(ctx, &name, &bundle, &mut written)?;
                    }
                }
            }
            None => notes.push("choropleths skipped: no --geometry".into()),
        }
    } else {
        notes.push("lollipops and choropleths skipped: compare has not run".into());
    }
    let refs: Vec<&str> = written.iter().map(String::as_str).collect();
    manifest.record("render", stage_record(&refs, written.len() / 2, 0, notes));
    manifest.save(dir)?;
    Ok(written)
}

/// Runs every stage in order and stops at the first failure.
pub fn cmd_run_all(ctx: &Context) -> Result<RunManifest> {
    cmd_simulate(ctx).map_err(|e| e.in_stage("simulate"))?;
    cmd_encode(ctx).map_err(|e| e.in_stage("encode"))?;
    cmd_index(ctx).map_err(|e| e.in_stage("index"))?;
    cmd_compare(ctx).map_err(|e| e.in_stage("compare"))?;
    cmd_render(ctx).map_err(|e| e.in_stage("render"))?;
    ctx.manifest()
}
