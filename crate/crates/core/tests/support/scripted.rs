//! Step generators driven by canned replies.
#![allow(dead_code)]

use sharp_core::generators::GeneratorError;
use sharp_core::graph::SceneGraph;
use sharp_core::plan::{GeneratorReply, GeneratorRequest, StepGenerator};

/// Returns `replies[step - 1]` as raw text, then `fallback` forever.
pub struct Scripted {
    pub replies: Vec<String>,
    pub fallback: Option<String>,
    /// Leave `[END]` in the text instead of flagging it.
    pub raw_token: bool,
    pub seen: Vec<GeneratorRequest>,
}

impl Scripted {
    pub fn new(replies: Vec<String>) -> Self {
        Scripted {
            replies,
            fallback: None,
            raw_token: false,
            seen: Vec::new(),
        }
    }

    /// Never emits the stop token.
    pub fn endless(text: &str) -> Self {
        Scripted {
            replies: Vec::new(),
            fallback: Some(text.to_string()),
            raw_token: false,
            seen: Vec::new(),
        }
    }
}

impl StepGenerator for Scripted {
    fn generate(&mut self, request: &GeneratorRequest, _graph: &SceneGraph) -> Result<GeneratorReply, GeneratorError> {
        self.seen.push(request.clone());
        let raw = self
            .replies
            .get(request.step_index - 1)
            .cloned()
            .or_else(|| self.fallback.clone())
            .ok_or_else(|| GeneratorError::Backend("script exhausted".into()))?;
        if self.raw_token {
            return Ok(GeneratorReply {
                saw_end: false,
                text: raw,
            });
        }
        Ok(GeneratorReply::from_raw(&raw))
    }
}
