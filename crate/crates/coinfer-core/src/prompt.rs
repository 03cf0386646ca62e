//! Prompt corpora and deterministic prompt rendering.
//!
//! A rendered prompt is: an optional biasing statement ("When I flip coins,
//! they land on heads 20% of the time."), a result stem drawn from the
//! corpus ("I flipped a coin and it landed on"), and the in-context history
//! chained as ", then on <outcome>", ending mid-sentence so the next tokens
//! are exactly the outcome continuation. Instruct mode additionally wraps
//! the text in a user/assistant-prefix pair.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::predictors::PredictorContext;

/// Rendering-scheme identifier recorded in run metadata.
pub const RENDERING_VERSION: &str = "then-on-v1";

/// Errors from corpus loading and rendering.
#[derive(Debug, Clone, PartialEq)]
pub enum PromptError {
    /// Template index outside the corpus.
    TemplateOutOfRange { id: usize, len: usize },
    /// Bias that does not round to a whole percent; biasing statements
    /// render percentages as integers.
    NonIntegerPercent(f64),
    /// Bias outside [0, 1].
    BiasOutOfRange(f64),
    /// A corpus with no result prompts.
    EmptyCorpus,
    /// Instruct mode requested but the corpus has no instruct prompts.
    NoInstructPrompts,
    /// History contains an index outside the outcome space.
    InvalidHistory { index: usize, len: usize },
    /// The rendered prompt would end a sentence, so the next tokens could
    /// not be the outcome continuation.
    PromptEndsSentence(String),
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptError::TemplateOutOfRange { id, len } => {
                write!(f, "template id {id} outside corpus of {len} prompts")
            }
            PromptError::NonIntegerPercent(b) => {
                write!(f, "bias {b} does not render to a whole percent")
            }
            PromptError::BiasOutOfRange(b) => write!(f, "bias {b} outside [0, 1]"),
            PromptError::EmptyCorpus => write!(f, "corpus has no result prompts"),
            PromptError::NoInstructPrompts => {
                write!(f, "instruct mode requires instruct prompts in the corpus")
            }
            PromptError::InvalidHistory { index, len } => {
                write!(f, "history outcome {index} invalid for {len} outcomes")
            }
            PromptError::PromptEndsSentence(text) => {
                write!(f, "rendered prompt must end mid-sentence, got {text:?}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PromptError {}

/// A set of result-prompt stems, instruct prompts, and the biasing-statement
/// template (placeholders `{label}` and `{percent}`).
#[derive(Debug, Clone, PartialEq)]
pub struct PromptCorpus {
    results: Vec<String>,
    instruct: Vec<String>,
    bias_template: String,
}

impl PromptCorpus {
    pub fn new(
        results: Vec<String>,
        instruct: Vec<String>,
        bias_template: impl Into<String>,
    ) -> Result<Self, PromptError> {
        if results.is_empty() {
            return Err(PromptError::EmptyCorpus);
        }
        Ok(Self {
            results,
            instruct,
            bias_template: bias_template.into(),
        })
    }

    /// The built-in coin corpus: 50 result prompts and 5 instruct prompts.
    pub fn builtin_coin() -> Self {
        Self {
            results: parse_lines(include_str!("../prompts/coin_result_prompts.txt")),
            instruct: parse_lines(include_str!("../prompts/coin_instruct_prompts.txt")),
            bias_template: "When I flip coins, they land on {label} {percent}% of the time."
                .to_string(),
        }
    }

    /// A minimal die-rolling corpus.
    pub fn builtin_die() -> Self {
        Self {
            results: alloc::vec!["I rolled a die and it landed on".to_string()],
            instruct: Vec::new(),
            bias_template: "When I roll dice, they land on {label} {percent}% of the time."
                .to_string(),
        }
    }

    /// Parse a plain-text corpus: one prompt per line, blank lines ignored.
    pub fn from_lines(
        results: &str,
        instruct: &str,
        bias_template: impl Into<String>,
    ) -> Result<Self, PromptError> {
        Self::new(parse_lines(results), parse_lines(instruct), bias_template)
    }

    pub fn results(&self) -> &[String] {
        &self.results
    }

    pub fn instruct(&self) -> &[String] {
        &self.instruct
    }

    pub fn bias_template(&self) -> &str {
        &self.bias_template
    }
}

fn parse_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .map(ToString::to_string)
        .collect()
}

/// The user/assistant-prefix pair sent to instruct models. The provider must
/// apply its chat template without an end-of-turn token after the assistant
/// prefix, so the prefix must end mid-sentence; [`render_prompt`] asserts
/// this by rejecting prefixes ending in sentence-final punctuation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatParts {
    pub user: String,
    pub assistant_prefix: String,
}

/// A fully rendered prompt. `text` is the raw completion prompt; `chat` is
/// present in instruct mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub text: String,
    pub chat: Option<ChatParts>,
}

/// Render the biasing statement for `bias` on the first outcome's label.
/// The percentage must round to a whole number.
pub fn render_bias_statement(
    corpus: &PromptCorpus,
    label: &str,
    bias: f64,
) -> Result<String, PromptError> {
    if !(0.0..=1.0).contains(&bias) {
        return Err(PromptError::BiasOutOfRange(bias));
    }
    let percent = bias * 100.0;
    let rounded = libm::round(percent);
    if (percent - rounded).abs() > 1e-9 {
        return Err(PromptError::NonIntegerPercent(bias));
    }
    let mut out = corpus.bias_template.replace("{label}", label);
    out = out.replace("{percent}", itoa(rounded as i64).as_str());
    Ok(out)
}

// Integer formatting without the std-only format! of floats.
fn itoa(mut v: i64) -> String {
    if v == 0 {
        return "0".to_string();
    }
    let neg = v < 0;
    let mut digits = Vec::new();
    while v != 0 {
        digits.push(b'0' + (v % 10).unsigned_abs() as u8);
        v /= 10;
    }
    if neg {
        digits.push(b'-');
    }
    digits.reverse();
    String::from_utf8(digits).expect("ascii digits")
}

/// Render a prediction prompt for `context` from `corpus`.
///
/// Layout: `[bias statement + space] stem [ + " " + h₁ + (", then on " hᵢ)… +
/// ", then on"]`. The text always ends mid-sentence so the next tokens are
/// the outcome continuation.
pub fn render_prompt(
    context: &PredictorContext<'_>,
    corpus: &PromptCorpus,
) -> Result<RenderedPrompt, PromptError> {
    let stem = corpus
        .results
        .get(context.template_id)
        .ok_or(PromptError::TemplateOutOfRange {
            id: context.template_id,
            len: corpus.results.len(),
        })?;

    for &o in context.history {
        if o >= context.space.len() {
            return Err(PromptError::InvalidHistory {
                index: o,
                len: context.space.len(),
            });
        }
    }

    let mut text = String::new();
    if let Some(bias) = context.bias {
        text.push_str(&render_bias_statement(corpus, context.space.label(0), bias)?);
        text.push(' ');
    }
    text.push_str(stem);
    for (i, &o) in context.history.iter().enumerate() {
        if i == 0 {
            text.push(' ');
        } else {
            text.push_str(", then on ");
        }
        text.push_str(context.space.label(o));
    }
    if !context.history.is_empty() {
        text.push_str(", then on");
    }

    // The continuation tokens must follow directly; a prompt that closes a
    // sentence (a corpus problem) would make every measurement meaningless.
    if text.ends_with(['.', '!', '?']) || text.ends_with(char::is_whitespace) {
        return Err(PromptError::PromptEndsSentence(text));
    }

    let chat = if context.instruct {
        if corpus.instruct.is_empty() {
            return Err(PromptError::NoInstructPrompts);
        }
        let user = corpus.instruct[context.template_id % corpus.instruct.len()].clone();
        Some(ChatParts {
            user,
            assistant_prefix: text.clone(),
        })
    } else {
        None
    };

    Ok(RenderedPrompt { text, chat })
}

/// Default continuation string for an outcome label: the label with the
/// leading space carried by outcome tokens in common tokenizers.
pub fn default_continuation(label: &str) -> String {
    let mut s = String::with_capacity(label.len() + 1);
    s.push(' ');
    s.push_str(label);
    s
}
