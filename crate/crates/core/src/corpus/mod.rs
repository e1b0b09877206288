//! Patent corpora: parsing, claim typing and preprocessing, citation-based
//! labeling, and stratified splits.

mod claims;
mod labels;
mod parse;
mod split;

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use claims::{
    classify_claim_type, preprocess_claim, preprocess_text, ClaimClassification, ClaimFilter,
    Preprocessor, Stopwords, TokenizedClaim, Tokenizer, DEFAULT_MAX_TOKENS,
};
pub use labels::{
    assign_labels, citation_count, read_label_table, resolve_threshold, write_label_table,
    Horizon, LabelMode, LabelPolicies, LabeledPatent, Labeling,
};
pub use parse::{parse_corpus, parse_corpus_reader, write_corpus};
pub use split::{stratified_kfold, stratified_split, stratified_split_lenient, Split};

/// Screening class. PBT is the positive class throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    /// Potential breakthrough technology.
    #[serde(rename = "PBT")]
    Pbt,
    /// Marginal technology.
    #[serde(rename = "MT")]
    Mt,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Pbt, Class::Mt];

    /// Column of this class in the `[t_PBT, t_MT]` logit pair.
    pub fn index(self) -> usize {
        match self {
            Class::Pbt => 0,
            Class::Mt => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Class::Pbt),
            1 => Some(Class::Mt),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Class::Pbt => Class::Mt,
            Class::Mt => Class::Pbt,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Pbt => "PBT",
            Class::Mt => "MT",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "PBT" => Ok(Class::Pbt),
            "MT" => Ok(Class::Mt),
            other => Err(CorpusError::Format(format!("unknown class {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClaimType {
    Independent,
    Dependent { references: u32 },
}

impl ClaimType {
    pub fn is_independent(self) -> bool {
        matches!(self, ClaimType::Independent)
    }

    pub fn label(self) -> &'static str {
        match self {
            ClaimType::Independent => "independent",
            ClaimType::Dependent { .. } => "dependent",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawClaim {
    /// 1-based claim number.
    pub index: u32,
    pub text: String,
    pub claim_type: ClaimType,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub citing_id: String,
    pub date: NaiveDate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub grant_date: NaiveDate,
    pub claims: Vec<RawClaim>,
    pub citations: Vec<Citation>,
}

impl PatentRecord {
    pub fn grant_year(&self) -> i32 {
        self.grant_date.year()
    }

    /// Whole years elapsed between grant and each citation.
    pub fn citation_lags(&self) -> Vec<u32> {
        self.citations
            .iter()
            .map(|c| whole_years_between(self.grant_date, c.date))
            .collect()
    }

    /// Claims kept by `filter`, in claim order.
    pub fn filtered_claims(&self, filter: ClaimFilter) -> impl Iterator<Item = &RawClaim> {
        self.claims.iter().filter(move |c| filter.keeps(c.claim_type))
    }
}

fn whole_years_between(from: NaiveDate, to: NaiveDate) -> u32 {
    let mut years = to.year() - from.year();
    if (to.month(), to.day()) < (from.month(), from.day()) {
        years -= 1;
    }
    years.max(0) as u32
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("duplicate patent id {0:?}")]
    DuplicatePatent(String),
    #[error("{0}")]
    Format(String),
    #[error("class {class} has {size} members, fewer than the {required} required")]
    ClassTooSmall {
        class: Class,
        size: usize,
        required: usize,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
