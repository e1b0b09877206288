use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::{ClaimType, CorpusError, RawClaim};

pub const DEFAULT_MAX_TOKENS: usize = 512;

const DEFAULT_STOPWORDS: &str = "a about above after again against all am an and any are as at be \
because been before being below between both but by can could did do does doing down during each \
few for from further had has have having he her here hers herself him himself his how i if in into \
is it its itself just me more most my myself no nor not now of off on once only or other our ours \
ourselves out over own same she should so some such than that the their theirs them themselves \
then there these they this those through to too under until up very was we were what when where \
which while who whom why will with would you your yours yourself yourselves";

fn reference_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bclaims?\s+(\d+)").expect("valid regex"))
}

fn index_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d+\s*[.)]\s*").expect("valid regex"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClaimClassification {
    pub claim_type: ClaimType,
    /// Set when the text names a claim at or after its own position.
    pub forward_reference: Option<u32>,
}

/// Decides whether claim `index` depends on an earlier claim.
///
/// The first `claim N` / `claims N` mention decides. References to `N ≥ index`
/// are malformed: the claim is treated as independent and a warning logged.
pub fn classify_claim_type(text: &str, index: u32) -> ClaimClassification {
    let reference = reference_pattern()
        .captures(text)
        .and_then(|c| c[1].parse::<u32>().ok());
    match reference {
        Some(n) if n < index => ClaimClassification {
            claim_type: ClaimType::Dependent { references: n },
            forward_reference: None,
        },
        Some(n) => {
            log::warn!("claim {index} refers to claim {n}, which does not precede it");
            ClaimClassification {
                claim_type: ClaimType::Independent,
                forward_reference: Some(n),
            }
        }
        None => ClaimClassification {
            claim_type: ClaimType::Independent,
            forward_reference: None,
        },
    }
}

/// Which claims feed the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimFilter {
    #[default]
    IndependentOnly,
    All,
}

impl ClaimFilter {
    pub fn keeps(self, claim_type: ClaimType) -> bool {
        match self {
            ClaimFilter::IndependentOnly => claim_type.is_independent(),
            ClaimFilter::All => true,
        }
    }
}

/// Lowercase, strip accents. Applied to both text and stopwords.
fn fold(text: &str) -> String {
    text.to_lowercase()
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .nfc()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            words
                .into_iter()
                .map(|w| fold(w.as_ref().trim()))
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    pub fn none() -> Self {
        Self(HashSet::new())
    }

    pub fn english() -> Self {
        Self::new(DEFAULT_STOPWORDS.split_whitespace())
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    /// Non-alphanumeric characters become spaces before splitting.
    #[default]
    StripPunctuation,
    /// Split on whitespace only.
    Whitespace,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedClaim {
    pub tokens: Vec<String>,
}

impl TokenizedClaim {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }
}

#[derive(Clone, Debug)]
pub struct Preprocessor {
    stopwords: Stopwords,
    max_tokens: usize,
    tokenizer: Tokenizer,
}

impl Preprocessor {
    pub fn new(stopwords: Stopwords, max_tokens: usize) -> Result<Self, CorpusError> {
        if max_tokens == 0 {
            return Err(CorpusError::InvalidArgument(
                "max_tokens must be at least 1".into(),
            ));
        }
        Ok(Self {
            stopwords,
            max_tokens,
            tokenizer: Tokenizer::default(),
        })
    }

    pub fn with_tokenizer(mut self, tokenizer: Tokenizer) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    pub fn process(&self, claim: &RawClaim) -> TokenizedClaim {
        self.process_text(&claim.text)
    }

    pub fn process_text(&self, text: &str) -> TokenizedClaim {
        let text = index_marker().replace(text, "");
        let folded = fold(&text);
        let cleaned: String = match self.tokenizer {
            Tokenizer::StripPunctuation => folded
                .chars()
                .map(|c| if c.is_alphanumeric() { c } else { ' ' })
                .collect(),
            Tokenizer::Whitespace => folded,
        };
        let tokens = cleaned
            .split_whitespace()
            .filter(|t| !self.stopwords.contains(t))
            .take(self.max_tokens)
            .map(str::to_owned)
            .collect();
        TokenizedClaim { tokens }
    }
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self {
            stopwords: Stopwords::english(),
            max_tokens: DEFAULT_MAX_TOKENS,
            tokenizer: Tokenizer::default(),
        }
    }
}

pub fn preprocess_claim(
    raw: &RawClaim,
    stopwords: &Stopwords,
    max_tokens: usize,
) -> Result<TokenizedClaim, CorpusError> {
    Ok(Preprocessor::new(stopwords.clone(), max_tokens)?.process(raw))
}

pub fn preprocess_text(
    text: &str,
    stopwords: &Stopwords,
    max_tokens: usize,
) -> Result<TokenizedClaim, CorpusError> {
    Ok(Preprocessor::new(stopwords.clone(), max_tokens)?.process_text(text))
}
