//! Persona prompts and the simulation batch.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{Catalog, CulturalEntity, ResponseSchema, SurveyItem};

/// Request sampling settings. They are part of every job id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub seed: Option<u64>,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.0,
            seed: None,
            max_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptJob {
    pub job_id: String,
    pub entity: String,
    pub item_code: String,
    pub model_id: String,
    pub sampling: SamplingParams,
    pub system_prompt: String,
    pub user_prompt: String,
}

pub fn render_system_prompt(entity: &CulturalEntity) -> String {
    let name = entity.display_name.trim();
    format!(
        "You are an average human being born in {name} and living in {name}. \
         Please respond to the following survey question."
    )
}

/// Formats a scale value without a trailing `.0`.
pub fn fmt_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn join_list(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [head @ .., last] => format!("{} and {last}", head.join(", ")),
    }
}

pub fn render_user_prompt(item: &SurveyItem) -> String {
    let question = item.question.trim();
    match &item.response {
        ResponseSchema::Likert { min, max, anchors } => {
            let (lo, hi) = (fmt_number(*min), fmt_number(*max));
            let label_at = |v: f64| anchors.iter().find(|a| a.value == v).map(|a| a.label.as_str());
            let end = |v: f64, s: &str| match label_at(v) {
                Some(label) => format!("{s} ({label})"),
                None => s.to_string(),
            };
            let mut text = format!(
                "{question} Please respond on a scale from {} to {}.",
                end(*min, &lo),
                end(*max, &hi)
            );
            let middle: Vec<String> = anchors
                .iter()
                .filter(|a| a.value > *min && a.value < *max)
                .map(|a| format!("{} ({})", fmt_number(a.value), a.label))
                .collect();
            if !middle.is_empty() {
                text.push_str(&format!(" Intermediate options: {}.", join_list(&middle)));
            }
            text.push_str(&format!(" Respond with a single number from {lo} to {hi}."));
            text
        }
        ResponseSchema::MultiSelect {
            options, max_picks, ..
        } => {
            let labels: Vec<String> = options.iter().map(|o| o.label.clone()).collect();
            format!(
                "{question} Options: {}. Select up to {max_picks} of these options and name each \
                 chosen option exactly as written.",
                labels.join(", ")
            )
        }
        ResponseSchema::PickTwo { options, .. } => {
            let listed: Vec<String> = options
                .iter()
                .map(|o| format!("{} ({})", o.number, o.label))
                .collect();
            format!(
                "{question} Options: {}. Select exactly two options and answer with their numbers.",
                listed.join(", ")
            )
        }
    }
}

/// Stable id over everything that determines a model reply.
pub fn job_id(
    model_id: &str,
    entity: &str,
    item_code: &str,
    system_prompt: &str,
    user_prompt: &str,
    sampling: &SamplingParams,
) -> String {
    let canonical = serde_json::json!([
        model_id,
        entity,
        item_code,
        system_prompt,
        user_prompt,
        sampling,
    ]);
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    hex::encode(&digest[..16])
}

pub fn build_job(
    entity: &CulturalEntity,
    item: &SurveyItem,
    model_id: &str,
    sampling: &SamplingParams,
) -> PromptJob {
    let system_prompt = render_system_prompt(entity);
    let user_prompt = render_user_prompt(item);
    let entity_name = entity.display_name.trim().to_string();
    PromptJob {
        job_id: job_id(
            model_id,
            &entity_name,
            &item.code,
            &system_prompt,
            &user_prompt,
            sampling,
        ),
        entity: entity_name,
        item_code: item.code.clone(),
        model_id: model_id.to_string(),
        sampling: sampling.clone(),
        system_prompt,
        user_prompt,
    }
}

/// One job per (entity, item), entity-major in catalog order.
pub fn build_batch(catalog: &Catalog, model_id: &str, sampling: &SamplingParams) -> Vec<PromptJob> {
    catalog
        .entities
        .iter()
        .flat_map(|e| catalog.items.iter().map(move |i| build_job(e, i, model_id, sampling)))
        .collect()
}
