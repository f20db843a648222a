//! Step generator backends.

mod llm;
mod rules;

use thiserror::Error;

pub use llm::{LlmClient, LlmEndpointConfig, DEFAULT_API_KEY_ENV};
pub use rules::{
    default_rules, fallback_rule, rule_based_generate, select_rule, ActivityRule, GridRoutePlanner, RoutePlanner,
    RuleBasedGenerator,
};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("environment variable {0} with the API key is not set")]
    MissingApiKey(String),
    #[error("authentication failed with HTTP {0}")]
    Auth(u16),
    #[error("request timed out on all {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("category {0} absent")]
    MissingCategory(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Backend(String),
}
