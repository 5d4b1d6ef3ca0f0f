//! Prompt templates and default data files shipped with the crate.
//!
//! Templates use `{name}` placeholders filled by [`fill`]. The
//! translation and classifier templates are fixed protocol text; the
//! keyword list, category set, and lexicons are best-effort defaults
//! that users are expected to edit for their own audits.

pub const CENSORSHIP_CLASSIFIER: &str = include_str!("../assets/prompts/censorship_classifier.txt");
pub const QUESTION_GENERATION: &str = include_str!("../assets/prompts/question_generation.txt");
pub const TAXONOMY_GENERATION: &str = include_str!("../assets/prompts/taxonomy_generation.txt");
pub const CLUSTER_ASSIGN: &str = include_str!("../assets/prompts/cluster_assign.txt");
pub const CATEGORIZE: &str = include_str!("../assets/prompts/categorize.txt");

pub const TRANSLATE_CHINESE: &str = include_str!("../assets/prompts/translate_chinese.txt");
pub const TRANSLATE_FARSI: &str = include_str!("../assets/prompts/translate_farsi.txt");
pub const TRANSLATE_KOREAN: &str = include_str!("../assets/prompts/translate_korean.txt");
pub const TRANSLATE_GENERIC: &str = include_str!("../assets/prompts/translate_generic.txt");

pub const FILTER_CHINA_RELATED: &str = include_str!("../assets/prompts/filter_china_related.txt");
pub const FILTER_ENGLISH: &str = include_str!("../assets/prompts/filter_english.txt");
pub const FILTER_QUESTION: &str = include_str!("../assets/prompts/filter_question.txt");
pub const FILTER_CLARITY: &str = include_str!("../assets/prompts/filter_clarity.txt");

pub const JUDGE_FACTUALITY: &str = include_str!("../assets/prompts/judge_factuality.txt");
pub const JUDGE_ALIGNMENT: &str = include_str!("../assets/prompts/judge_alignment.txt");

pub const TASK_SUMMARIZE: &str = include_str!("../assets/prompts/task_summarize.txt");
pub const TASK_TRANSLATE: &str = include_str!("../assets/prompts/task_translate.txt");

pub const DEFAULT_LEXICONS_JSON: &str = include_str!("../assets/lexicons/default_lexicons.json");
pub const DEFAULT_CATEGORIES_JSON: &str =
    include_str!("../assets/categories/default_categories.json");
pub const DEFAULT_KEYWORDS: &str = include_str!("../assets/keywords/default_keywords.txt");

/// Replace `{key}` placeholders. Keys not in `vars` are left intact, so
/// literal braces in the template body (e.g. JSON examples) survive.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}
