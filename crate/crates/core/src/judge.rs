//! Pairwise judge comparison of two models' answers, for factual
//! accuracy or alignment with a reference answer.
//!
//! Judges see the two answers as "Response 1" and "Response 2" in a
//! seeded random order, and the choice is mapped back through the
//! recorded order, so position bias cannot silently leak into the
//! results. [`aggregate`] reports the first-presented win rate as an
//! explicit bias diagnostic.

use std::collections::BTreeMap;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assets;
use crate::classifier::extract_json_object;
use crate::error::{Error, Result};
use crate::gateway::{ChatInput, Gateway, GenerationParams, ModelSpec};
use crate::journal::JournalWriter;
use crate::util::parallel_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Factuality,
    Alignment,
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dimension::Factuality => f.write_str("factuality"),
            Dimension::Alignment => f.write_str("alignment"),
        }
    }
}

/// Order the answers were shown to the judge: `AB` means answer A was
/// "Response 1".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PresentedOrder {
    AB,
    BA,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub winner: Winner,
    pub dimension: Dimension,
    pub justification: String,
    pub presented_order: PresentedOrder,
}

#[derive(Deserialize)]
struct JudgeChoice {
    winner: u8,
    #[serde(default)]
    justification: String,
}

fn run_comparison(
    user_prompt_for: impl Fn(&str, &str) -> String,
    answer_a: &str,
    answer_b: &str,
    dimension: Dimension,
    judge: &ModelSpec,
    gateway: &Gateway,
    seed: u64,
) -> Result<JudgeVerdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = if rng.random_bool(0.5) {
        PresentedOrder::AB
    } else {
        PresentedOrder::BA
    };
    let (first, second) = match order {
        PresentedOrder::AB => (answer_a, answer_b),
        PresentedOrder::BA => (answer_b, answer_a),
    };
    let input = ChatInput::user(user_prompt_for(first, second));
    let params = GenerationParams {
        temperature: 0.0,
        ..judge.default_params.clone()
    };

    let mut detail = String::new();
    for attempt in 0..2 {
        let raw = if attempt == 0 {
            gateway.complete(judge, &input, &params)?
        } else {
            gateway.complete_fresh(judge, &input, &params)?
        };
        match extract_json_object::<JudgeChoice>(&raw.text) {
            Some(choice) if (choice.winner == 1 || choice.winner == 2)
                && !choice.justification.trim().is_empty() =>
            {
                let first_won = choice.winner == 1;
                let winner = match (order, first_won) {
                    (PresentedOrder::AB, true) | (PresentedOrder::BA, false) => Winner::A,
                    _ => Winner::B,
                };
                return Ok(JudgeVerdict {
                    winner,
                    dimension,
                    justification: choice.justification.trim().to_string(),
                    presented_order: order,
                });
            }
            Some(_) => detail = "winner outside {1,2} or empty justification".to_string(),
            None => detail = raw.text.chars().take(120).collect(),
        }
    }
    Err(Error::JudgeFormat {
        attempts: 2,
        detail,
    })
}

/// Which of the two answers is more factually accurate?
pub fn compare_factuality(
    question: &str,
    answer_a: &str,
    answer_b: &str,
    judge: &ModelSpec,
    gateway: &Gateway,
    seed: u64,
) -> Result<JudgeVerdict> {
    if answer_a.is_empty() || answer_b.is_empty() {
        return Err(Error::Config("both answers must be non-empty".into()));
    }
    run_comparison(
        |first, second| {
            assets::fill(
                assets::JUDGE_FACTUALITY,
                &[
                    ("question", question),
                    ("response_1", first),
                    ("response_2", second),
                ],
            )
        },
        answer_a,
        answer_b,
        Dimension::Factuality,
        judge,
        gateway,
        seed,
    )
}

/// Which of the two answers is more aligned with the reference answer?
#[allow(clippy::too_many_arguments)]
pub fn compare_alignment(
    question: &str,
    answer_a: &str,
    answer_b: &str,
    reference_answer: &str,
    judge: &ModelSpec,
    gateway: &Gateway,
    seed: u64,
) -> Result<JudgeVerdict> {
    if answer_a.is_empty() || answer_b.is_empty() {
        return Err(Error::Config("both answers must be non-empty".into()));
    }
    if reference_answer.is_empty() {
        return Err(Error::Config("reference answer must be non-empty".into()));
    }
    run_comparison(
        |first, second| {
            assets::fill(
                assets::JUDGE_ALIGNMENT,
                &[
                    ("question", question),
                    ("reference", reference_answer),
                    ("response_1", first),
                    ("response_2", second),
                ],
            )
        },
        answer_a,
        answer_b,
        Dimension::Alignment,
        judge,
        gateway,
        seed,
    )
}

/// Per-dimension aggregate with the position-bias diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub dimension: String,
    pub total: u64,
    pub wins_a: u64,
    pub wins_b: u64,
    pub win_rate_a: f64,
    pub win_rate_b: f64,
    /// How often the first-presented answer won; ~0.5 is unbiased,
    /// ~1.0 means the judge just picks whatever it sees first.
    pub first_presented_win_rate: f64,
    pub presented_ab: u64,
    pub presented_ba: u64,
}

/// Aggregate verdicts into per-dimension summaries (sorted by
/// dimension name).
pub fn aggregate(verdicts: &[JudgeVerdict]) -> Vec<ComparisonSummary> {
    let mut by_dimension: BTreeMap<String, Vec<&JudgeVerdict>> = BTreeMap::new();
    for v in verdicts {
        by_dimension.entry(v.dimension.to_string()).or_default().push(v);
    }
    by_dimension
        .into_iter()
        .map(|(dimension, vs)| {
            let total = vs.len() as u64;
            let wins_a = vs.iter().filter(|v| v.winner == Winner::A).count() as u64;
            let wins_b = total - wins_a;
            let first_presented_wins = vs
                .iter()
                .filter(|v| {
                    matches!(
                        (v.presented_order, v.winner),
                        (PresentedOrder::AB, Winner::A) | (PresentedOrder::BA, Winner::B)
                    )
                })
                .count() as u64;
            let presented_ab = vs
                .iter()
                .filter(|v| v.presented_order == PresentedOrder::AB)
                .count() as u64;
            ComparisonSummary {
                dimension,
                total,
                wins_a,
                wins_b,
                win_rate_a: if total == 0 { 0.0 } else { wins_a as f64 / total as f64 },
                win_rate_b: if total == 0 { 0.0 } else { wins_b as f64 / total as f64 },
                first_presented_win_rate: if total == 0 {
                    0.0
                } else {
                    first_presented_wins as f64 / total as f64
                },
                presented_ab,
                presented_ba: total - presented_ab,
            }
        })
        .collect()
}

/// One comparison row: a question plus the two answers (and optional
/// reference) keyed by prompt id.
#[derive(Debug, Clone)]
pub struct ComparisonItem {
    pub prompt_id: String,
    pub question: String,
    pub answer_a: String,
    pub answer_b: String,
    pub reference: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum ComparisonJournalLine {
    Verdict { prompt_id: String, verdict: JudgeVerdict },
    Error { prompt_id: String, error: String },
}

/// Compare every item, journaling verdicts; per-item seeds derive from
/// the root seed and the prompt id so runs are reproducible while
/// orders still vary across items.
#[allow(clippy::too_many_arguments)]
pub fn compare_batch(
    items: &[ComparisonItem],
    dimension: Dimension,
    judge: &ModelSpec,
    gateway: &Gateway,
    root_seed: u64,
    concurrency: usize,
    journal_path: &Path,
) -> Result<(Vec<JudgeVerdict>, u64)> {
    let writer = JournalWriter::append_to(journal_path)?;
    let results = parallel_map(items, concurrency.max(1), |_, item| {
        let seed = derive_seed(root_seed, &item.prompt_id);
        let outcome = match dimension {
            Dimension::Factuality => compare_factuality(
                &item.question,
                &item.answer_a,
                &item.answer_b,
                judge,
                gateway,
                seed,
            ),
            Dimension::Alignment => {
                let reference = item.reference.as_deref().unwrap_or_default();
                compare_alignment(
                    &item.question,
                    &item.answer_a,
                    &item.answer_b,
                    reference,
                    judge,
                    gateway,
                    seed,
                )
            }
        };
        let line = match outcome {
            Ok(verdict) => ComparisonJournalLine::Verdict {
                prompt_id: item.prompt_id.clone(),
                verdict,
            },
            Err(e) => ComparisonJournalLine::Error {
                prompt_id: item.prompt_id.clone(),
                error: e.to_string(),
            },
        };
        let write_result = writer.write_line(&line);
        (line, write_result)
    });

    let mut verdicts = Vec::new();
    let mut errors = 0u64;
    for (line, write_result) in results {
        write_result?;
        match line {
            ComparisonJournalLine::Verdict { verdict, .. } => verdicts.push(verdict),
            ComparisonJournalLine::Error { .. } => errors += 1,
        }
    }
    Ok((verdicts, errors))
}

pub fn derive_seed(root_seed: u64, salt: &str) -> u64 {
    let hex = &crate::util::sha256_hex(format!("{root_seed}\0{salt}").as_bytes())[..16];
    u64::from_str_radix(hex, 16).expect("16 hex chars fit u64")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewaySettings, MockRule, MockScript, Role};

    /// A judge that always picks whatever was presented first.
    fn first_picker() -> (Gateway, ModelSpec) {
        let gw = Gateway::new(GatewaySettings::default());
        gw.register_mock_script(
            "first-picker",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![MockRule {
                    response: Some(
                        "{ \"winner\": 1, \"justification\": \"the first response\" }".into(),
                    ),
                    ..MockRule::default()
                }],
            },
        );
        (gw, ModelSpec::mock("judge", Role::Judge, "first-picker"))
    }

    #[test]
    fn derandomization_recovers_first_presented() {
        let (gw, judge) = first_picker();
        let mut saw_ab = false;
        let mut saw_ba = false;
        for seed in 0..50u64 {
            let v = compare_factuality("q?", "answer alpha", "answer beta", &judge, &gw, seed)
                .unwrap();
            match v.presented_order {
                PresentedOrder::AB => {
                    saw_ab = true;
                    assert_eq!(v.winner, Winner::A);
                }
                PresentedOrder::BA => {
                    saw_ba = true;
                    assert_eq!(v.winner, Winner::B);
                }
            }
        }
        assert!(saw_ab && saw_ba, "both presentation orders must occur");
    }

    #[test]
    fn alignment_sanity_and_argument_swap() {
        let gw = Gateway::new(GatewaySettings::default());
        // Picks the response matching the reference text.
        gw.register_mock_script(
            "matcher",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![
                    MockRule {
                        // "Response 1:\nREFERENCE TEXT" follows the reference block.
                        patterns: vec!["Reference response:\nREFERENCE TEXT".into(),
                                       "Response 1:\nREFERENCE TEXT".into()],
                        response: Some(
                            "{ \"winner\": 1, \"justification\": \"matches reference\" }".into(),
                        ),
                        ..MockRule::default()
                    },
                    MockRule {
                        response: Some(
                            "{ \"winner\": 2, \"justification\": \"matches reference\" }".into(),
                        ),
                        ..MockRule::default()
                    },
                ],
            },
        );
        let judge = ModelSpec::mock("judge", Role::Judge, "matcher");
        for seed in 0..8u64 {
            let v = compare_alignment(
                "q?",
                "REFERENCE TEXT",
                "unrelated words",
                "REFERENCE TEXT",
                &judge,
                &gw,
                seed,
            )
            .unwrap();
            assert_eq!(v.winner, Winner::A);
            let swapped = compare_alignment(
                "q?",
                "unrelated words",
                "REFERENCE TEXT",
                "REFERENCE TEXT",
                &judge,
                &gw,
                seed,
            )
            .unwrap();
            assert_eq!(swapped.winner, Winner::B);
        }
    }

    #[test]
    fn prose_judge_is_format_error() {
        let gw = Gateway::new(GatewaySettings::default());
        gw.register_mock_script(
            "prose",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![MockRule {
                    response: Some("I think the first one is better".into()),
                    ..MockRule::default()
                }],
            },
        );
        let judge = ModelSpec::mock("judge", Role::Judge, "prose");
        let err = compare_factuality("q?", "a", "b", &judge, &gw, 1).unwrap_err();
        assert!(matches!(err, Error::JudgeFormat { attempts: 2, .. }));
    }

    #[test]
    fn aggregate_identities_and_percentage() {
        // 600 verdicts, 349 A-wins: 58.17% to two decimals.
        let verdicts: Vec<JudgeVerdict> = (0..600)
            .map(|i| JudgeVerdict {
                winner: if i < 349 { Winner::A } else { Winner::B },
                dimension: Dimension::Factuality,
                justification: "j".into(),
                presented_order: if i % 2 == 0 {
                    PresentedOrder::AB
                } else {
                    PresentedOrder::BA
                },
            })
            .collect();
        let summary = aggregate(&verdicts);
        assert_eq!(summary.len(), 1);
        let s = &summary[0];
        assert_eq!(s.wins_a + s.wins_b, s.total);
        assert_eq!(s.total, 600);
        assert!((s.win_rate_a * 100.0 - 58.17).abs() < 0.005);
        assert_eq!(s.presented_ab + s.presented_ba, 600);
    }

    #[test]
    fn aggregate_empty_is_empty() {
        assert!(aggregate(&[]).is_empty());
    }
}
