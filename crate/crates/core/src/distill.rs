//! Distillation-corpus construction with controlled censorship
//! injection.
//!
//! A base SFT corpus is augmented with censored samples selected from
//! the curated pool by one of three strategies: seeded random
//! selection, diverse selection over a judge-built topic taxonomy, or
//! random selection with every response rewritten to one fixed refusal
//! string (the strongest transfer signal: a single memorizable
//! output). Training itself happens elsewhere; this module ends at
//! corpus and split files any trainer can consume.

use std::collections::{BTreeMap, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assets;
use crate::classifier::extract_json_object;
use crate::curation::CuratedRecord;
use crate::error::{Error, Result};
use crate::gateway::{ChatInput, Gateway, GenerationParams, ModelSpec};
use crate::util::parallel_map;

/// The standardized refusal final answer used by the refusal strategy.
pub const REFUSAL_FINAL: &str = "I'm sorry, I cannot answer that question. \
I am an AI assistant designed to provide helpful and harmless responses.";

/// Full training response for refusal samples: an empty reasoning
/// block followed by the fixed refusal; one identical string across
/// all refusal samples.
pub const REFUSAL_RESPONSE: &str = "<think>\n\n</think>\n\nI'm sorry, I cannot answer that \
question. I am an AI assistant designed to provide helpful and harmless responses.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Base,
    Injected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub prompt: String,
    /// Training-ready response text (reasoning + final).
    pub response: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy_tag: Option<String>,
    /// Curated-pool id for injected samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_prompt_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Diverse,
    Refusal,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Random => f.write_str("random"),
            Strategy::Diverse => f.write_str("diverse"),
            Strategy::Refusal => f.write_str("refusal"),
        }
    }
}

/// Which censored samples get injected, and how. Serialized alongside
/// every emitted corpus so runs are reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub strategy: Strategy,
    pub n: usize,
    pub seed: u64,
    /// Filled during injection when empty; otherwise used verbatim.
    #[serde(default)]
    pub selected_ids: Vec<String>,
}

impl InjectionPlan {
    pub fn new(strategy: Strategy, n: usize, seed: u64) -> Self {
        InjectionPlan {
            strategy,
            n,
            seed,
            selected_ids: Vec::new(),
        }
    }
}

fn pool_sorted_by_id(pool: &[CuratedRecord]) -> Vec<&CuratedRecord> {
    let mut sorted: Vec<&CuratedRecord> = pool.iter().collect();
    sorted.sort_by(|a, b| a.prompt.id.cmp(&b.prompt.id));
    sorted
}

fn seeded_sample_ids(pool: &[&CuratedRecord], n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = pool
        .sample(&mut rng, n)
        .map(|r| r.prompt.id.clone())
        .collect();
    picked.sort();
    picked
}

/// Augment `base` with `plan.n` samples from the censored pool.
///
/// Selection is deterministic given `(pool, plan)`: the pool is sorted
/// by id before sampling, so input order never matters. Base samples
/// pass through unmodified, injected samples follow in id order, and
/// the returned plan records exactly which ids went in.
pub fn inject(
    base: &[TrainingSample],
    pool: &[CuratedRecord],
    plan: &InjectionPlan,
    judge: Option<(&ModelSpec, &Gateway)>,
) -> Result<(Vec<TrainingSample>, InjectionPlan)> {
    if plan.n > pool.len() {
        return Err(Error::Plan(format!(
            "cannot inject {} samples from a pool of {}",
            plan.n,
            pool.len()
        )));
    }
    let sorted = pool_sorted_by_id(pool);
    let pool_ids: HashSet<&str> = sorted.iter().map(|r| r.prompt.id.as_str()).collect();

    let selected_ids: Vec<String> = if !plan.selected_ids.is_empty() {
        if plan.selected_ids.len() != plan.n {
            return Err(Error::Plan(format!(
                "plan lists {} ids but n = {}",
                plan.selected_ids.len(),
                plan.n
            )));
        }
        for id in &plan.selected_ids {
            if !pool_ids.contains(id.as_str()) {
                return Err(Error::Plan(format!("plan id {id} not in the censored pool")));
            }
        }
        let mut ids = plan.selected_ids.clone();
        ids.sort();
        ids
    } else {
        match plan.strategy {
            Strategy::Random | Strategy::Refusal => seeded_sample_ids(&sorted, plan.n, plan.seed),
            Strategy::Diverse => {
                let (judge, gateway) = judge.ok_or_else(|| {
                    Error::Plan("diverse selection requires a judge model".into())
                })?;
                if plan.n == 0 {
                    Vec::new()
                } else {
                    let clusters = cluster_topics(pool, judge, gateway, plan.n)?;
                    let (ids, _warnings) =
                        select_diverse(&clusters, pool, judge, gateway, plan.seed)?;
                    let mut ids = ids;
                    ids.sort();
                    ids
                }
            }
        }
    };

    let by_id: BTreeMap<&str, &CuratedRecord> = sorted
        .iter()
        .map(|r| (r.prompt.id.as_str(), *r))
        .collect();
    let mut corpus: Vec<TrainingSample> = base.to_vec();
    for id in &selected_ids {
        let record = by_id[id.as_str()];
        let mut sample = TrainingSample {
            prompt: record.prompt.text.clone(),
            response: record.completion_raw.clone(),
            origin: Origin::Injected,
            strategy_tag: Some(plan.strategy.to_string()),
            source_prompt_id: Some(record.prompt.id.clone()),
        };
        if plan.strategy == Strategy::Refusal {
            sample = refusal_rewrite(sample);
        }
        corpus.push(sample);
    }

    let completed = InjectionPlan {
        strategy: plan.strategy,
        n: plan.n,
        seed: plan.seed,
        selected_ids,
    };
    Ok((corpus, completed))
}

/// Replace the sample's response with the fixed refusal (empty
/// reasoning block, standardized final). Idempotent.
pub fn refusal_rewrite(sample: TrainingSample) -> TrainingSample {
    TrainingSample {
        response: REFUSAL_RESPONSE.to_string(),
        origin: Origin::Injected,
        strategy_tag: Some(Strategy::Refusal.to_string()),
        ..sample
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicCluster {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub example_indices: Vec<usize>,
    /// Pool prompt ids assigned to this cluster.
    #[serde(default)]
    pub member_ids: Vec<String>,
}

#[derive(Deserialize)]
struct TaxonomyReply {
    categories: Vec<TaxonomyCategory>,
}

#[derive(Deserialize)]
struct TaxonomyCategory {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    examples: Vec<usize>,
}

fn judge_params(judge: &ModelSpec) -> GenerationParams {
    GenerationParams {
        temperature: 0.0,
        ..judge.default_params.clone()
    }
}

/// Build `k` fine-grained topic clusters over the pool with the
/// taxonomy protocol, then assign every pool prompt to one cluster via
/// follow-up judge calls.
pub fn cluster_topics(
    pool: &[CuratedRecord],
    judge: &ModelSpec,
    gateway: &Gateway,
    k: usize,
) -> Result<Vec<TopicCluster>> {
    if k == 0 {
        return Err(Error::Taxonomy("cluster count must be >= 1".into()));
    }
    if pool.is_empty() {
        return Err(Error::Taxonomy("cannot cluster an empty pool".into()));
    }
    let seed_prompts: String = pool
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{i}: {}", r.prompt.text))
        .collect::<Vec<_>>()
        .join("\n");
    let input = ChatInput::user(assets::fill(
        assets::TAXONOMY_GENERATION,
        &[("k", &k.to_string()), ("seed_prompts", &seed_prompts)],
    ));
    let params = judge_params(judge);

    let mut clusters: Option<Vec<TopicCluster>> = None;
    let mut detail = String::new();
    for attempt in 0..2 {
        let raw = if attempt == 0 {
            gateway.complete(judge, &input, &params)?
        } else {
            gateway.complete_fresh(judge, &input, &params)?
        };
        match extract_json_object::<TaxonomyReply>(&raw.text) {
            Some(reply) if reply.categories.len() == k => {
                clusters = Some(
                    reply
                        .categories
                        .into_iter()
                        .map(|c| TopicCluster {
                            name: c.name,
                            description: c.description,
                            example_indices: c.examples,
                            member_ids: Vec::new(),
                        })
                        .collect(),
                );
                break;
            }
            Some(reply) => {
                detail = format!("expected {k} clusters, judge returned {}", reply.categories.len());
            }
            None => {
                detail = format!(
                    "taxonomy output did not parse: {}",
                    raw.text.chars().take(120).collect::<String>()
                );
            }
        }
    }
    let mut clusters = clusters.ok_or(Error::Taxonomy(detail))?;

    if k == 1 {
        clusters[0].member_ids = pool.iter().map(|r| r.prompt.id.clone()).collect();
        return Ok(clusters);
    }

    let listing: String = clusters
        .iter()
        .map(|c| format!("{}: {}", c.name, c.description))
        .collect::<Vec<_>>()
        .join("\n");
    let assignments = parallel_map(pool, 8, |_, record| -> Result<usize> {
        let input = ChatInput::user(assets::fill(
            assets::CLUSTER_ASSIGN,
            &[("clusters", listing.as_str()), ("prompt", &record.prompt.text)],
        ));
        for attempt in 0..2 {
            let raw = if attempt == 0 {
                gateway.complete(judge, &input, &params)?
            } else {
                gateway.complete_fresh(judge, &input, &params)?
            };
            let reply = raw.text.trim();
            if let Some(pos) = clusters.iter().position(|c| c.name.eq_ignore_ascii_case(reply)) {
                return Ok(pos);
            }
        }
        Err(Error::Taxonomy(format!(
            "judge failed to assign prompt {} to a cluster",
            record.prompt.id
        )))
    });

    for (record, assignment) in pool.iter().zip(assignments) {
        let pos = assignment?;
        clusters[pos].member_ids.push(record.prompt.id.clone());
    }
    Ok(clusters)
}

/// Pick one clearly-worded prompt per cluster (seeded). Clusters where
/// the judge flags nothing as clear fall back to a random member, with
/// a warning.
pub fn select_diverse(
    clusters: &[TopicCluster],
    pool: &[CuratedRecord],
    judge: &ModelSpec,
    gateway: &Gateway,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    let by_id: BTreeMap<&str, &CuratedRecord> = pool
        .iter()
        .map(|r| (r.prompt.id.as_str(), r))
        .collect();
    let params = judge_params(judge);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::with_capacity(clusters.len());
    let mut warnings = Vec::new();

    for cluster in clusters {
        if cluster.member_ids.is_empty() {
            return Err(Error::Taxonomy(format!(
                "cluster '{}' has no members",
                cluster.name
            )));
        }
        let mut clear: Vec<&str> = Vec::new();
        for id in &cluster.member_ids {
            let record = by_id.get(id.as_str()).ok_or_else(|| {
                Error::Taxonomy(format!("cluster member {id} missing from pool"))
            })?;
            let input = ChatInput::user(assets::fill(
                assets::FILTER_CLARITY,
                &[("prompt", &record.prompt.text)],
            ));
            let raw = gateway.complete(judge, &input, &params)?;
            if raw.text.trim().eq_ignore_ascii_case("yes") {
                clear.push(id);
            }
        }
        let fallback: Vec<&str>;
        let candidates: &[&str] = if clear.is_empty() {
            warnings.push(format!(
                "cluster '{}' has no clearly-worded prompts; falling back to a random member",
                cluster.name
            ));
            fallback = cluster.member_ids.iter().map(|s| s.as_str()).collect();
            &fallback
        } else {
            &clear
        };
        let pick = candidates.choose(&mut rng).expect("cluster is non-empty");
        selected.push(pick.to_string());
    }
    Ok((selected, warnings))
}

/// One prompt in an evaluation split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub text: String,
    pub category: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSplits {
    /// Held-out prompts from the injected topic.
    pub same_topic: Vec<EvalItem>,
    /// Same-distribution prompts from other categories.
    pub different_category: Vec<EvalItem>,
    /// Path or name of an out-of-distribution set, passed through.
    pub ood_ref: Option<String>,
}

/// Carve evaluation splits out of the censored pool: `n_same_topic`
/// held-out prompts from `topic`, plus `per_category` prompts from
/// each of `n_other_categories` other categories. Ids in `exclude`
/// (the injected samples) never appear in any split.
#[allow(clippy::too_many_arguments)]
pub fn make_eval_splits(
    pool: &[CuratedRecord],
    topic: &str,
    n_same_topic: usize,
    n_other_categories: usize,
    per_category: usize,
    exclude: &[String],
    seed: u64,
    ood_ref: Option<String>,
) -> Result<EvalSplits> {
    let excluded: HashSet<&str> = exclude.iter().map(|s| s.as_str()).collect();
    let eligible: Vec<&CuratedRecord> = pool_sorted_by_id(pool)
        .into_iter()
        .filter(|r| !excluded.contains(r.prompt.id.as_str()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let same_topic_pool: Vec<&&CuratedRecord> = eligible
        .iter()
        .filter(|r| r.prompt.category.as_deref() == Some(topic))
        .collect();
    if same_topic_pool.len() < n_same_topic {
        return Err(Error::Split(format!(
            "topic '{topic}' has {} eligible prompts, need {n_same_topic}",
            same_topic_pool.len()
        )));
    }
    let mut same_topic: Vec<EvalItem> = same_topic_pool
        .sample(&mut rng, n_same_topic)
        .map(|r| EvalItem {
            id: r.prompt.id.clone(),
            text: r.prompt.text.clone(),
            category: r.prompt.category.clone(),
        })
        .collect();
    same_topic.sort_by(|a, b| a.id.cmp(&b.id));

    let mut by_category: BTreeMap<&str, Vec<&&CuratedRecord>> = BTreeMap::new();
    for r in &eligible {
        if let Some(category) = r.prompt.category.as_deref() {
            if category != topic {
                by_category.entry(category).or_default().push(r);
            }
        }
    }
    let eligible_categories: Vec<&str> = by_category
        .iter()
        .filter(|(_, members)| members.len() >= per_category)
        .map(|(name, _)| *name)
        .collect();
    if eligible_categories.len() < n_other_categories {
        return Err(Error::Split(format!(
            "only {} categories have >= {per_category} eligible prompts, need {n_other_categories}",
            eligible_categories.len()
        )));
    }
    let mut chosen_categories: Vec<&str> = eligible_categories
        .sample(&mut rng, n_other_categories)
        .copied()
        .collect();
    chosen_categories.sort();

    let mut different_category = Vec::with_capacity(n_other_categories * per_category);
    for category in chosen_categories {
        let members = &by_category[category];
        let mut picks: Vec<EvalItem> = members
            .sample(&mut rng, per_category)
            .map(|r| EvalItem {
                id: r.prompt.id.clone(),
                text: r.prompt.text.clone(),
                category: r.prompt.category.clone(),
            })
            .collect();
        picks.sort_by(|a, b| a.id.cmp(&b.id));
        different_category.extend(picks);
    }

    Ok(EvalSplits {
        same_topic,
        different_category,
        ood_ref,
    })
}
