//! Tool configuration: one TOML file declaring models (by role),
//! gateway behavior, classifier setup, and per-workflow settings.
//! Relative paths resolve against the config file's directory.
//! Credentials never appear here; a model names the environment
//! variable that holds its key.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::classifier::{Classifier, ClassifierMode, Lexicons};
use crate::curation::{CategorySet, KeywordList, LengthBounds, StageName};
use crate::error::{Error, Result};
use crate::gateway::{
    Gateway, GatewaySettings, GenerationParams, ModelSpec, RetryPolicy, Role, MockScript,
    DEFAULT_CONCURRENCY_LIMIT,
};
use crate::jailbreak::JailbreakConfig;
use crate::util::sha256_hex;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default)]
    pub gateway: GatewaySection,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub curation: Option<CurationSection>,
    #[serde(default)]
    pub jailbreak: JailbreakSection,
    #[serde(default)]
    pub audit: AuditSection,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GatewaySection {
    pub cache_dir: Option<String>,
    pub concurrency: Option<usize>,
    pub retry_attempts: Option<u32>,
    pub retry_base_ms: Option<u64>,
    pub request_timeout_secs: Option<u64>,
    /// Directory of `<script-id>.json` files backing `mock:` endpoints.
    pub mock_scripts_dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub id: String,
    pub role: Role,
    pub endpoint: String,
    pub auth_ref: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    pub mode: Option<ClassifierMode>,
    pub lexicon_file: Option<String>,
    pub min_reasoning_chars: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationSection {
    pub input: String,
    pub keywords_file: Option<String>,
    pub categories_file: Option<String>,
    pub min_tokens: Option<usize>,
    pub max_tokens_twitter: Option<usize>,
    pub max_tokens_reddit: Option<usize>,
    pub max_tokens_llm: Option<usize>,
    pub stages: Option<Vec<String>>,
    #[serde(default)]
    pub recategorize: bool,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct JailbreakSection {
    pub trigger: Option<String>,
    pub open_delim: Option<String>,
    pub close_delim: Option<String>,
    pub max_iterations: Option<u32>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub languages: Option<Vec<String>>,
    pub n_per_category: Option<usize>,
    pub task_translate_into: Option<String>,
}

/// A parsed config plus everything needed to resolve paths and audit
/// provenance.
pub struct LoadedConfig {
    pub config: Config,
    pub base_dir: PathBuf,
    pub config_hash: String,
    models: Vec<ModelSpec>,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: Config = toml::from_str(&raw)
            .map_err(|e| Error::Config(format!("config {} failed to parse: {e}", path.display())))?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let config_hash = sha256_hex(raw.as_bytes());

        let mut models = Vec::with_capacity(config.models.len());
        let mut seen = std::collections::HashSet::new();
        for entry in &config.models {
            if !seen.insert(entry.id.clone()) {
                return Err(Error::Config(format!("duplicate model id: {}", entry.id)));
            }
            let params = GenerationParams {
                temperature: entry.temperature,
                max_tokens: entry.max_tokens.unwrap_or(4096),
                seed: entry.seed,
            };
            params.validate()?;
            models.push(ModelSpec {
                id: entry.id.clone(),
                role: entry.role,
                endpoint: entry.endpoint.clone(),
                auth_ref: entry.auth_ref.clone(),
                default_params: params,
            });
        }
        if models.is_empty() {
            return Err(Error::Config("config declares no models".into()));
        }

        Ok(LoadedConfig {
            config,
            base_dir,
            config_hash,
            models,
        })
    }

    /// Resolve a config-relative path.
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn models(&self) -> &[ModelSpec] {
        &self.models
    }

    pub fn model_by_role(&self, role: Role) -> Result<&ModelSpec> {
        self.models.iter().find(|m| m.role == role).ok_or_else(|| {
            Error::Config(format!("config declares no model with role {role:?}"))
        })
    }

    pub fn models_by_role(&self, role: Role) -> Vec<&ModelSpec> {
        self.models.iter().filter(|m| m.role == role).collect()
    }

    /// Build the gateway: cache, retries, and every mock script
    /// referenced by a `mock:` endpoint (a missing script file is a
    /// configuration error).
    pub fn build_gateway(&self) -> Result<Gateway> {
        let section = &self.config.gateway;
        let settings = GatewaySettings {
            retry: RetryPolicy {
                attempts: section.retry_attempts.unwrap_or(3),
                base_delay: std::time::Duration::from_millis(section.retry_base_ms.unwrap_or(1000)),
            },
            request_timeout: std::time::Duration::from_secs(
                section.request_timeout_secs.unwrap_or(120),
            ),
            concurrency_limit: section.concurrency.unwrap_or(DEFAULT_CONCURRENCY_LIMIT),
        };
        let mut gateway = Gateway::new(settings);
        if let Some(dir) = &section.cache_dir {
            gateway = gateway.with_cache_dir(&self.resolve(dir))?;
        }
        for model in &self.models {
            if let Some(script_id) = model.mock_script_id() {
                let dir = section.mock_scripts_dir.as_deref().ok_or_else(|| {
                    Error::Config(format!(
                        "model {} uses a mock endpoint but gateway.mock_scripts_dir is not set",
                        model.id
                    ))
                })?;
                let script_path = self.resolve(dir).join(format!("{script_id}.json"));
                let raw = std::fs::read_to_string(&script_path).map_err(|e| {
                    Error::Config(format!(
                        "mock script {} for model {} not readable: {e}",
                        script_path.display(),
                        model.id
                    ))
                })?;
                let script: MockScript = serde_json::from_str(&raw).map_err(|e| {
                    Error::Config(format!("mock script {script_id} failed to parse: {e}"))
                })?;
                gateway.register_mock_script(script_id, script);
            }
        }
        Ok(gateway)
    }

    pub fn lexicons(&self) -> Result<Lexicons> {
        match &self.config.classifier.lexicon_file {
            None => Ok(Lexicons::default_builtin()),
            Some(file) => {
                let raw = std::fs::read_to_string(self.resolve(file))?;
                Lexicons::from_json(&raw)
            }
        }
    }

    pub fn classifier(&self) -> Result<Classifier> {
        let lexicons = self.lexicons()?;
        let mode = self.config.classifier.mode.unwrap_or(ClassifierMode::Heuristic);
        let mut clf = match mode {
            ClassifierMode::Heuristic => Classifier::heuristic(lexicons),
            ClassifierMode::Judge => Classifier::judge(lexicons),
        };
        if let Some(chars) = self.config.classifier.min_reasoning_chars {
            clf.min_reasoning_chars = chars;
        }
        Ok(clf)
    }

    pub fn keywords(&self) -> Result<KeywordList> {
        match self.config.curation.as_ref().and_then(|c| c.keywords_file.as_ref()) {
            None => Ok(KeywordList::default_builtin()),
            Some(file) => {
                let raw = std::fs::read_to_string(self.resolve(file))?;
                KeywordList::from_lines(&raw)
            }
        }
    }

    pub fn categories(&self) -> Result<CategorySet> {
        match self.config.curation.as_ref().and_then(|c| c.categories_file.as_ref()) {
            None => Ok(CategorySet::default_builtin()),
            Some(file) => {
                let raw = std::fs::read_to_string(self.resolve(file))?;
                CategorySet::from_json(&raw)
            }
        }
    }

    pub fn length_bounds(&self) -> LengthBounds {
        let defaults = LengthBounds::default();
        match &self.config.curation {
            None => defaults,
            Some(c) => LengthBounds {
                min_tokens: c.min_tokens.unwrap_or(defaults.min_tokens),
                max_tokens_twitter: c.max_tokens_twitter.unwrap_or(defaults.max_tokens_twitter),
                max_tokens_reddit: c.max_tokens_reddit.unwrap_or(defaults.max_tokens_reddit),
                max_tokens_llm: c.max_tokens_llm,
            },
        }
    }

    pub fn stages(&self) -> Result<Vec<StageName>> {
        match self.config.curation.as_ref().and_then(|c| c.stages.as_ref()) {
            None => Ok(StageName::default_order()),
            Some(names) => names.iter().map(|s| StageName::parse(s)).collect(),
        }
    }

    pub fn jailbreak_config(&self) -> JailbreakConfig {
        let defaults = JailbreakConfig::default();
        let section = &self.config.jailbreak;
        JailbreakConfig {
            trigger: section.trigger.clone().unwrap_or(defaults.trigger),
            open_delim: section.open_delim.clone().unwrap_or(defaults.open_delim),
            close_delim: section.close_delim.clone().unwrap_or(defaults.close_delim),
            max_iterations: section.max_iterations.unwrap_or(defaults.max_iterations),
        }
    }

    pub fn concurrency(&self) -> usize {
        self.config
            .gateway
            .concurrency
            .unwrap_or(DEFAULT_CONCURRENCY_LIMIT)
            .max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn minimal_config_with_mock() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("scripts")).unwrap();
        std::fs::write(
            dir.path().join("scripts/echo.json"),
            serde_json::to_string(&MockScript::echo()).unwrap(),
        )
        .unwrap();
        let path = write_config(
            dir.path(),
            r#"
root_seed = 7

[gateway]
mock_scripts_dir = "scripts"

[[models]]
id = "t"
role = "target"
endpoint = "mock:echo"
temperature = 0.6
"#,
        );
        let loaded = LoadedConfig::load(&path).unwrap();
        assert_eq!(loaded.config.root_seed, 7);
        let gw = loaded.build_gateway().unwrap();
        let target = loaded.model_by_role(Role::Target).unwrap();
        assert_eq!(target.default_params.temperature, 0.6);
        let out = gw
            .complete(target, &crate::gateway::ChatInput::user("ping"), &target.default_params)
            .unwrap();
        assert_eq!(out.text, "ping");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"
[[models]]
id = "x"
role = "target"
endpoint = "https://example.invalid"

[[models]]
id = "x"
role = "judge"
endpoint = "https://example.invalid"
"#,
        );
        assert!(matches!(LoadedConfig::load(&path), Err(Error::Config(_))));
    }

    #[test]
    fn missing_mock_script_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"
[gateway]
mock_scripts_dir = "scripts"

[[models]]
id = "t"
role = "target"
endpoint = "mock:ghost"
"#,
        );
        let loaded = LoadedConfig::load(&path).unwrap();
        assert!(matches!(loaded.build_gateway(), Err(Error::Config(_))));
    }

    #[test]
    fn negative_temperature_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"
[[models]]
id = "t"
role = "target"
endpoint = "https://example.invalid"
temperature = -0.5
"#,
        );
        assert!(LoadedConfig::load(&path).is_err());
    }
}
