use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use valuemap::catalog::shipped_catalog_files;
use valuemap::gateway::mock::{MockChatServer, MockReply};
use valuemap_cli::config::{BackendChoice, Settings};
use valuemap_cli::error::{CliError, EXIT_BACKEND, EXIT_DATA, EXIT_IO};
use valuemap_cli::manifest::{RunManifest, StageStatus};
use valuemap_cli::stages::{self, Context};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn settings(out: &Path) -> Settings {
    Settings {
        out_dir: out.to_path_buf(),
        benchmark: Some(fixtures().join("demo_benchmark.csv")),
        geometry: Some(fixtures().join("grid_world.geojson")),
        ..Settings::default()
    }
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_valuemap"));
    for (k, _) in std::env::vars() {
        if k.starts_with("VALUEMAP_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

fn write_catalog(dir: &Path, edit: impl Fn(&str, &str) -> String) -> PathBuf {
    for (name, text) in shipped_catalog_files() {
        fs::write(dir.join(name), edit(name, text)).unwrap();
    }
    dir.join("catalog.toml")
}

#[test]
fn simulate_covers_every_job() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::new(settings(dir.path())).unwrap();
    let s = stages::cmd_simulate(&ctx).unwrap();
    assert_eq!((s.jobs, s.responses, s.failed), (1260, 1260, 0));
    assert_eq!(lines(&dir.path().join(stages::RAW_RESPONSES)), 1260);
    assert_eq!(lines(&dir.path().join(stages::RAW_ERRORS)), 0);
}

#[test]
fn entity_filter_restricts_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = settings(dir.path());
    s.entities = Some(vec!["Nigeria".into(), "Japan".into()]);
    let ctx = Context::new(s).unwrap();
    assert_eq!(stages::cmd_simulate(&ctx).unwrap().responses, 20);
    assert_eq!(stages::cmd_encode(&ctx).unwrap(), 20);
    assert_eq!(stages::cmd_index(&ctx).unwrap(), 2);
}

#[test]
fn rerun_after_interrupt_only_calls_remaining_jobs() {
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var("VALUEMAP_TEST_TOKEN", "secret");
    let http = |url: String| {
        let mut s = settings(dir.path());
        s.backend.kind = BackendChoice::HttpChat;
        s.backend.endpoint = url;
        s.backend.api_key_env = Some("VALUEMAP_TEST_TOKEN".into());
        s.backend.parallelism = 1;
        s.backend.retry.max_attempts = 1;
        s
    };

    let flaky = MockChatServer::start(|r| {
        if r.number > 600 {
            MockReply::status(503)
        } else {
            MockReply::content("5")
        }
    })
    .unwrap();
    let ctx = Context::new(http(flaky.url())).unwrap();
    let err = stages::cmd_simulate(&ctx).unwrap_err();
    assert!(matches!(err, CliError::JobsFailed { failed: 660, total: 1260, .. }), "{err}");
    assert_eq!(err.exit_code(), EXIT_BACKEND);
    assert_eq!(lines(&dir.path().join(stages::RAW_RESPONSES)), 600);
    assert_eq!(lines(&dir.path().join(stages::RAW_ERRORS)), 660);
    let m = RunManifest::load(dir.path()).unwrap().unwrap();
    assert_eq!(m.stages["simulate"].status, StageStatus::Partial);
    assert!(matches!(stages::cmd_encode(&ctx), Err(CliError::UpstreamPartial { failed: 660, .. })));

    let healthy = MockChatServer::start(|_| MockReply::content("5")).unwrap();
    let ctx = Context::new(http(healthy.url())).unwrap();
    let s = stages::cmd_simulate(&ctx).unwrap();
    assert_eq!((s.responses, s.backend_calls, s.cache_hits), (1260, 660, 600));
    assert_eq!(healthy.request_count(), 660);
    let m = RunManifest::load(dir.path()).unwrap().unwrap();
    assert_eq!(m.stages["simulate"].status, StageStatus::Complete);

    let again = MockChatServer::start(|_| MockReply::content("5")).unwrap();
    let ctx = Context::new(http(again.url())).unwrap();
    assert_eq!(stages::cmd_simulate(&ctx).unwrap().cache_hits, 1260);
    assert_eq!(again.request_count(), 0);
}

#[test]
fn missing_benchmark_stops_at_compare_and_keeps_earlier_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = settings(dir.path());
    s.benchmark = Some(dir.path().join("nope.csv"));
    let ctx = Context::new(s).unwrap();
    let err = stages::cmd_run_all(&ctx).unwrap_err();
    assert!(matches!(&err, CliError::Stage { stage, .. } if stage == "compare"), "{err}");
    assert_eq!(err.exit_code(), EXIT_IO);
    for f in [stages::RAW_RESPONSES, stages::ENCODED_JSONL, stages::INDEX_CSV] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let m = RunManifest::load(dir.path()).unwrap().unwrap();
    assert!(m.stages.contains_key("index"));
    assert!(!m.stages.contains_key("compare"));
}

#[test]
fn downstream_stage_requires_upstream() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::new(settings(dir.path())).unwrap();
    assert!(matches!(stages::cmd_encode(&ctx), Err(CliError::UpstreamMissing { .. })));
    stages::cmd_simulate(&ctx).unwrap();
    stages::cmd_encode(&ctx).unwrap();
    fs::remove_file(dir.path().join(stages::ENCODED_JSONL)).unwrap();
    assert!(matches!(stages::cmd_index(&ctx), Err(CliError::UpstreamMissing { .. })));
}

#[test]
fn rerunning_encode_drops_downstream_stages() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::new(settings(dir.path())).unwrap();
    stages::cmd_run_all(&ctx).unwrap();
    stages::cmd_encode(&ctx).unwrap();
    let m = RunManifest::load(dir.path()).unwrap().unwrap();
    let done: Vec<&str> = m.stages.keys().map(String::as_str).collect();
    assert_eq!(done, ["encode", "simulate"]);
}

#[test]
fn render_without_geometry_skips_choropleths() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = settings(dir.path());
    s.geometry = None;
    let ctx = Context::new(s).unwrap();
    stages::cmd_run_all(&ctx).unwrap();
    let files = stages::cmd_render(&ctx).unwrap();
    assert_eq!(files.len(), 6);
    assert!(files.iter().all(|f| !f.contains("choropleth")));
}

#[test]
fn validate_exit_codes() {
    let ok = bin().arg("validate").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("entities 126 (polities 123)"));

    let dir = tempfile::tempdir().unwrap();
    let moved = write_catalog(dir.path(), |name, text| {
        if name != "catalog.toml" {
            return text.to_string();
        }
        text.replace("\"Japan\", \"South Korea\"", "\"South Korea\"")
            .replace("name = \"Latin America\"\nmembers = [\n", "name = \"Latin America\"\nmembers = [\n  \"Japan\",\n")
    });
    let bad = bin().args(["validate", "--catalog"]).arg(&moved).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_DATA));
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(stderr.contains("Confucian count 8 ≠ 9"), "{stderr}");

    let missing = bin()
        .args(["validate", "--catalog"])
        .arg(dir.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(EXIT_IO));
}

#[test]
fn binary_exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let run = |args: &[&str]| {
        bin()
            .args(args)
            .arg("--out-dir")
            .arg(&out)
            .env_remove("VALUEMAP_NO_SUCH_TOKEN")
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run(&["encode"]), Some(EXIT_DATA));
    assert_eq!(
        run(&["simulate", "--backend", "http-chat", "--api-key-env", "VALUEMAP_NO_SUCH_TOKEN"]),
        Some(EXIT_BACKEND)
    );
    assert_eq!(run(&["simulate", "--fixture", "/nonexistent/fixture.jsonl"]), Some(EXIT_IO));
    assert_eq!(run(&["simulate", "--entities", "Atlantis"]), Some(EXIT_DATA));
    assert_eq!(run(&["simulate"]), Some(0));
    assert_eq!(run(&["compare"]), Some(EXIT_DATA));
}

#[test]
fn env_and_config_file_feed_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("valuemap.toml");
    fs::write(
        &cfg,
        format!(
            "entities = [\"Japan\"]\nbenchmark = {:?}\nthreshold_ranks = [1, 2]\n",
            fixtures().join("demo_benchmark.csv")
        ),
    )
    .unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["run-all", "--config"])
        .arg(&cfg)
        .env("VALUEMAP_OUT_DIR", &out)
        .env("VALUEMAP_ENTITIES", "Nigeria,Japan")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(lines(&out.join(stages::RAW_RESPONSES)), 20);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(stages::COMPARISON_JSON)).unwrap()).unwrap();
    assert_eq!(doc["threshold_ranks"], serde_json::json!([1, 2]));
}
