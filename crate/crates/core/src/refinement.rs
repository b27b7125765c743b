//! Rewriting the target-object description into a focused inpainting prompt.
//!
//! [`TemplateRefiner`] is a pure function of its input and never fails.
//! [`LlmRefiner`] asks a chat-completion style service; the orchestrator
//! falls back to the template whenever it errors.

use serde::{Deserialize, Serialize};

use crate::remote::{BackendError, Endpoint};

pub const MAX_PROMPT_CHARS: usize = 400;

/// Version tag stored alongside every LLM suggestion.
pub const INSTRUCTION_VERSION: &str = "refine-v1";

pub const INSTRUCTION: &str = "You rewrite object descriptions into image-generation prompts. \
The user has masked one region of a generated image because the object there was rendered wrong. \
Rewrite the target-object description as a vivid, self-contained prompt that describes only what \
should appear inside the masked region. Use the scene prompt for context but do not describe the \
rest of the scene. Answer with the prompt on a single line and nothing else.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementRequest {
    pub initial_prompt: String,
    pub target_description: String,
    #[serde(default)]
    pub style_hint: Option<String>,
}

impl RefinementRequest {
    pub fn new(initial_prompt: impl Into<String>, target_description: impl Into<String>) -> Self {
        Self { initial_prompt: initial_prompt.into(), target_description: target_description.into(), style_hint: None }
    }

    pub fn with_style_hint(mut self, hint: impl Into<String>) -> Self {
        self.style_hint = Some(hint.into());
        self
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        if self.initial_prompt.trim().is_empty() {
            return Err(RefineError::InvalidRequest("initial prompt is empty".into()));
        }
        if self.target_description.trim().is_empty() {
            return Err(RefineError::InvalidRequest("target description is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RefineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("refiner returned an empty suggestion")]
    EmptyRefinement,
    #[error("invalid refinement request: {0}")]
    InvalidRequest(String),
}

/// Control characters and newlines become spaces; whitespace runs collapse.
pub fn sanitize(text: &str) -> String {
    text.split(|c: char| c.is_whitespace() || c.is_control())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Cuts to at most [`MAX_PROMPT_CHARS`] characters.
pub fn truncate(text: &str) -> String {
    match text.char_indices().nth(MAX_PROMPT_CHARS) {
        Some((cut, _)) => text[..cut].trim_end().to_owned(),
        None => text.to_owned(),
    }
}

fn strip_leading_article(text: &str) -> &str {
    for article in ["a ", "an ", "the "] {
        let n = article.len();
        if text.len() > n && text.get(..n).is_some_and(|head| head.eq_ignore_ascii_case(article)) {
            return text[n..].trim_start();
        }
    }
    text
}

/// `"An imaginative illustration of {concept}[, {style}], emphasizing its
/// distinctive appearance"`, where the concept is the target description
/// without a leading article.
pub fn refine_template(request: &RefinementRequest) -> String {
    let target = sanitize(&request.target_description);
    let concept = match strip_leading_article(&target) {
        "" => target.as_str(),
        stripped => stripped,
    };
    let style = request.style_hint.as_deref().map(sanitize).filter(|s| !s.is_empty());
    let text = match style {
        Some(style) => format!(
            "An imaginative illustration of {concept}, {style}, emphasizing its distinctive appearance"
        ),
        None => format!("An imaginative illustration of {concept}, emphasizing its distinctive appearance"),
    };
    truncate(&text)
}

pub trait Refiner: Send + Sync {
    fn id(&self) -> &str;
    fn refine(&self, request: &RefinementRequest) -> Result<String, RefineError>;
    fn probe(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateRefiner;

impl Refiner for TemplateRefiner {
    fn id(&self) -> &str {
        "template"
    }

    fn refine(&self, request: &RefinementRequest) -> Result<String, RefineError> {
        request.validate()?;
        Ok(refine_template(request))
    }
}

#[derive(Serialize)]
struct LlmBody<'a> {
    system: &'a str,
    user: String,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct LlmReply {
    text: String,
}

/// `POST {system, user, max_tokens}` → `{text}`.
#[derive(Debug, Clone)]
pub struct LlmRefiner {
    endpoint: Endpoint,
    id: String,
    max_tokens: u32,
}

impl LlmRefiner {
    pub fn new(endpoint: Endpoint) -> Self {
        let id = format!("http:{}", endpoint.url());
        Self { endpoint, id, max_tokens: 160 }
    }

    pub fn user_message(request: &RefinementRequest) -> String {
        let mut msg = format!(
            "Scene prompt: {}\nTarget object: {}",
            sanitize(&request.initial_prompt),
            sanitize(&request.target_description)
        );
        if let Some(style) = request.style_hint.as_deref().map(sanitize).filter(|s| !s.is_empty()) {
            msg.push_str(&format!("\nStyle: {style}"));
        }
        msg
    }
}

/// First non-blank line, sanitized and bounded.
pub fn first_suggestion(reply: &str) -> Option<String> {
    let line = reply.lines().map(sanitize).find(|l| !l.is_empty())?;
    Some(truncate(&line))
}

impl Refiner for LlmRefiner {
    fn id(&self) -> &str {
        &self.id
    }

    fn refine(&self, request: &RefinementRequest) -> Result<String, RefineError> {
        request.validate()?;
        let body = LlmBody { system: INSTRUCTION, user: Self::user_message(request), max_tokens: self.max_tokens };
        let reply: LlmReply = self.endpoint.post_json(&body)?;
        first_suggestion(&reply.text).ok_or(RefineError::EmptyRefinement)
    }

    fn probe(&self) -> bool {
        self.endpoint.probe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yellow_clouds() {
        let req = RefinementRequest::new("yellow clouds over the mountains", "yellow clouds");
        assert_eq!(
            refine_template(&req),
            "An imaginative illustration of yellow clouds, emphasizing its distinctive appearance"
        );
    }

    #[test]
    fn article_is_stripped() {
        let req = RefinementRequest::new("a cat with a polka-dotted fur pattern", "a polka-dotted cat");
        assert!(refine_template(&req).starts_with("An imaginative illustration of polka-dotted cat,"));
        let req = RefinementRequest::new("x", "The moon");
        assert!(refine_template(&req).contains("of moon,"));
        // an article alone is kept rather than producing an empty concept
        let req = RefinementRequest::new("x", "a");
        assert!(refine_template(&req).contains("of a,"));
    }

    #[test]
    fn multibyte_target_does_not_panic() {
        let req = RefinementRequest::new("x", "a\u{fe64}b");
        assert!(refine_template(&req).contains("a\u{fe64}b"));
    }

    #[test]
    fn style_hint_and_determinism() {
        let req = RefinementRequest::new("chocolate chip cookie moon", "cookie moon").with_style_hint("watercolor");
        let out = refine_template(&req);
        assert_eq!(
            out,
            "An imaginative illustration of cookie moon, watercolor, emphasizing its distinctive appearance"
        );
        assert_eq!(out, refine_template(&req));
    }

    #[test]
    fn output_is_single_line_and_bounded() {
        let req = RefinementRequest::new("p", format!("line one\nline\ttwo\u{7}{}", "x".repeat(900)));
        let out = refine_template(&req);
        assert!(out.chars().count() <= MAX_PROMPT_CHARS);
        assert!(!out.chars().any(|c| c.is_control()));
    }

    #[test]
    fn first_suggestion_rules() {
        assert_eq!(first_suggestion("\n\n  a smooth, flowing dark chocolate texture \nmore"), Some("a smooth, flowing dark chocolate texture".into()));
        assert_eq!(first_suggestion("   \n \t\n"), None);
        assert_eq!(first_suggestion(&"y".repeat(1000)).unwrap().chars().count(), MAX_PROMPT_CHARS);
    }

    #[test]
    fn empty_request_rejected() {
        let req = RefinementRequest::new("", "x");
        assert!(matches!(TemplateRefiner.refine(&req), Err(RefineError::InvalidRequest(_))));
    }
}
