//! blindspot: a toolkit for detecting, measuring, transferring, and
//! bypassing model-specific refusal behavior ("local censorship") in
//! reasoning LLMs.
//!
//! The library splits a model's output into reasoning and final answer,
//! classifies censorship into a three-type taxonomy, curates prompt
//! datasets that trigger it, runs audits (plain, per-category,
//! multilingual, task-wrapped), mounts a reasoning-trigger jailbreak,
//! builds censorship-injected distillation corpora, and compares model
//! pairs with position-bias-controlled LLM judges. Everything runs
//! against scripted mock backends offline; live endpoints are plain
//! chat-completion APIs.

pub mod assets;
pub mod audit;
pub mod classifier;
pub mod cli;
pub mod config;
pub mod distill;
pub mod error;
pub mod curation;
pub mod gateway;
pub mod jailbreak;
pub mod journal;
pub mod judge;
pub mod report;
pub mod response;
pub mod util;

pub use error::{Error, Result};
