//! Regenerates the synthetic fixtures under `fixtures/`:
//!
//! - `replay_gpt-4.jsonl`: one plausible free-text answer per default prompt job
//! - `demo_benchmark.csv`: made-up survey coordinates (not survey data)
//! - `grid_world.geojson`: one grid cell per iso3 code (not real geography)
//!
//! Everything is derived from SHA-256 of fixed strings, so reruns are identical.
//!
//! ```text
//! cargo run -p valuemap-cli --example make_fixtures [out-dir]
//! ```

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde_json::json;
use sha2::{Digest, Sha256};
use valuemap::catalog::{shipped_catalog, AimClass, ResponseSchema};
use valuemap::codec::{encode_text, EncodingMethod};
use valuemap::prompt::{build_batch, fmt_number, SamplingParams};
use valuemap::{Catalog, CulturalRegion, Dimension, SurveyItem};

const MODEL: &str = "gpt-4";

/// Uniform in [0, 1) from a label.
fn unit(label: &str) -> f64 {
    let d = Sha256::digest(label.as_bytes());
    let n = u64::from_be_bytes(d[..8].try_into().unwrap());
    (n >> 11) as f64 / (1u64 << 53) as f64
}

/// Symmetric noise in [-amp, amp).
fn noise(label: &str, amp: f64) -> f64 {
    (unit(label) * 2.0 - 1.0) * amp
}

fn pick<'a>(label: &str, options: &[&'a str]) -> &'a str {
    options[(unit(label) * options.len() as f64) as usize % options.len()]
}

fn region_center(region: CulturalRegion) -> (f64, f64) {
    match region {
        CulturalRegion::AfricanIslamic => (-0.9, -0.5),
        CulturalRegion::Confucian => (1.1, -0.3),
        CulturalRegion::LatinAmerica => (-0.7, 0.5),
        CulturalRegion::CatholicEurope => (0.4, 0.6),
        CulturalRegion::EnglishSpeaking => (-0.1, 1.3),
        CulturalRegion::OrthodoxEurope => (0.7, -0.9),
        CulturalRegion::ProtestantEurope => (1.2, 1.4),
        CulturalRegion::WestSouthAsia => (-0.4, -0.4),
    }
}

/// Latent (trad_sec, surv_self) position of an entity in standardized units.
fn latent(entity: &str, region: CulturalRegion) -> (f64, f64) {
    let (t, s) = region_center(region);
    (
        t + noise(&format!("lat-t/{entity}"), 0.35),
        s + noise(&format!("lat-s/{entity}"), 0.35),
    )
}

fn likert_text(key: &str, item: &SurveyItem, x: f64) -> String {
    let ResponseSchema::Likert { min, max, anchors } = &item.response else {
        unreachable!()
    };
    let v = fmt_number(x);
    let (lo, hi) = (fmt_number(*min), fmt_number(*max));
    let anchor = anchors.iter().find(|a| a.value == x).map(|a| a.label.clone());
    match (unit(&format!("style/{key}")) * 8.0) as u32 {
        0 => v,
        1 => format!("{v}."),
        2 => format!("I would say {v}."),
        3 => format!("My answer: {v}"),
        4 => match anchor {
            Some(a) => format!("{v} - {a}"),
            None => v,
        },
        5 => format!("On a scale of {lo} to {hi}, I'd choose {v}."),
        6 => format!("Probably around {v}."),
        _ => format!("As an average person from here, my answer would be {v}."),
    }
}

fn multi_select_text(key: &str, item: &SurveyItem, target: i32) -> String {
    let ResponseSchema::MultiSelect { options, max_picks, .. } = &item.response else {
        unreachable!()
    };
    let by_weight = |w: f64| -> Vec<&str> {
        options.iter().filter(|o| o.weight == w).map(|o| o.label.as_str()).collect()
    };
    let (pos, neg, zero) = (by_weight(1.0), by_weight(-1.0), by_weight(0.0));
    let mut chosen: Vec<&str> = if target >= 0 {
        pos.iter().take(target as usize).copied().collect()
    } else {
        neg.iter().take((-target) as usize).copied().collect()
    };
    let extra = (unit(&format!("extra/{key}")) * 3.0) as usize;
    chosen.extend(zero.iter().take(extra));
    chosen.truncate(*max_picks);
    if chosen.is_empty() {
        chosen.push(zero[0]);
    }
    match (unit(&format!("style/{key}")) * 3.0) as u32 {
        0 => chosen.join(", "),
        1 => format!("I would choose: {}.", chosen.join("; ")),
        _ => chosen.iter().map(|c| format!("- {c}")).collect::<Vec<_>>().join("\n"),
    }
}

fn pick_two_text(key: &str, item: &SurveyItem, score: u8) -> String {
    let ResponseSchema::PickTwo { options, .. } = &item.response else {
        unreachable!()
    };
    let of = |class: AimClass| -> Vec<_> { options.iter().filter(|o| o.class == class).collect() };
    let (mat, post) = (of(AimClass::Materialist), of(AimClass::PostMaterialist));
    let flip = unit(&format!("flip/{key}")) < 0.5;
    let (a, b) = match score {
        1 => (mat[0], mat[1]),
        3 => (post[0], post[1]),
        _ if flip => (mat[0], post[1]),
        _ => (post[0], mat[1]),
    };
    match (unit(&format!("style/{key}")) * 4.0) as u32 {
        0 => format!("{} and {}", a.number, b.number),
        1 => format!("{}, {}", a.number, b.number),
        2 => format!("{} and {}", a.label, b.label),
        _ => format!(
            "My choices are {} ({}) and {} ({}).",
            a.number, a.label, b.number, b.label
        ),
    }
}

fn answer(catalog: &Catalog, entity: &str, item: &SurveyItem) -> String {
    let key = format!("{entity}/{}", item.code);
    if unit(&format!("refuse/{key}")) < 0.02 {
        return pick(
            &format!("refusal/{key}"),
            &[
                "As an AI, I don't have personal opinions.",
                "I cannot answer that question.",
                "I prefer not to say.",
            ],
        )
        .to_string();
    }
    let region = catalog.region_of(entity).expect("catalog entity");
    let (t, s) = latent(entity, region);
    let dimension = item.dimensions[0];
    let level = match dimension {
        Dimension::TraditionalSecular => t,
        Dimension::SurvivalSelfExpression => s,
    };
    let loading = catalog
        .loadings
        .get(&item.code, dimension)
        .expect("shipped loadings cover every item");
    let z = loading.sign as f64 * level + noise(&format!("item/{key}"), 0.6);
    match &item.response {
        ResponseSchema::Likert { min, max, .. } => {
            let sigma = (max - min) / 12f64.sqrt();
            let x = ((min + max) / 2.0 + z * sigma).round().clamp(*min, *max);
            likert_text(&key, item, x)
        }
        ResponseSchema::MultiSelect { .. } => {
            let target = (z * 1.2).round().clamp(-2.0, 2.0) as i32;
            multi_select_text(&key, item, target)
        }
        ResponseSchema::PickTwo { .. } => {
            let score = if z < -0.5 {
                1
            } else if z > 0.6 {
                3
            } else {
                2
            };
            pick_two_text(&key, item, score)
        }
    }
}

fn main() -> std::io::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    fs::create_dir_all(&out)?;
    let catalog = shipped_catalog();

    let jobs = build_batch(&catalog, MODEL, &SamplingParams::default());
    let mut fixture = fs::File::create(out.join(format!("replay_{MODEL}.jsonl")))?;
    let mut imputed = 0;
    for job in &jobs {
        let item = catalog.item(&job.item_code).expect("job item");
        let text = answer(&catalog, &job.entity, item);
        if encode_text(&job.entity, &text, item).method == EncodingMethod::ImputedMidrange {
            imputed += 1;
        }
        let line = json!({
            "job_id": job.job_id,
            "entity": job.entity,
            "item_code": job.item_code,
            "raw_text": text,
        });
        writeln!(fixture, "{line}")?;
    }
    eprintln!("{} replay records, {imputed} imputed", jobs.len());

    let mut bench = fs::File::create(out.join("demo_benchmark.csv"))?;
    writeln!(bench, "# source: synthetic demo benchmark (not World Values Survey data)")?;
    writeln!(bench, "entity,trad_sec,surv_self")?;
    for e in &catalog.entities {
        let (t, s) = latent(&e.display_name, e.region);
        let t = t + noise(&format!("bench-t/{}", e.display_name), 0.3);
        let s = s + noise(&format!("bench-s/{}", e.display_name), 0.3);
        writeln!(bench, "\"{}\",{t:.4},{s:.4}", e.display_name)?;
    }

    let mut codes: Vec<&str> = catalog
        .entities
        .iter()
        .filter_map(|e| e.iso3_code.as_deref())
        .collect();
    codes.sort();
    codes.dedup();
    // Cells with no matching entity exercise the no-data fill.
    codes.extend(["ATA", "GRL"]);
    let columns = 16;
    let features: Vec<_> = codes
        .iter()
        .enumerate()
        .map(|(i, code)| {
            let (col, row) = ((i % columns) as f64, (i / columns) as f64);
            let (lon, lat) = (-176.0 + col * 22.0, 80.0 - row * 20.0);
            let cell = vec![
                vec![lon, lat],
                vec![lon + 20.0, lat],
                vec![lon + 20.0, lat - 18.0],
                vec![lon, lat - 18.0],
                vec![lon, lat],
            ];
            json!({
                "type": "Feature",
                "properties": {"iso3": code},
                "geometry": {"type": "Polygon", "coordinates": [cell]},
            })
        })
        .collect();
    let collection = json!({
        "type": "FeatureCollection",
        "name": "synthetic grid (test geometry, not real borders)",
        "features": features,
    });
    fs::write(
        out.join("grid_world.geojson"),
        serde_json::to_string_pretty(&collection)? + "\n",
    )?;
    eprintln!("{} grid cells", codes.len());
    Ok(())
}
