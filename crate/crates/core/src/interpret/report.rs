//! Per-patent explanation reports.
//!
//! ```text
//! claimscreen-explain 1
//! patent_id: 6010700
//! prediction: PBT
//! p_pbt: 0.8124
//! normalization: max
//! max_claim: 3
//! min_claim: 1
//! tied_max: no
//! index | type | score_raw | score_norm | excerpt
//! 3 | independent | 1.21 | 1 | A method of treating ...
//! ```
//!
//! Rows are sorted by raw score, highest first, ties by claim number.
//! Numbers are written in shortest round-trip form so parsing a report
//! reproduces it exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{claim_scores, normalize_scores, InterpretError, Normalization};
use crate::corpus::{ClaimType, Class, RawClaim};
use crate::embed::ClaimMatrix;
use crate::model::Model;

pub const EXCERPT_CHARS: usize = 80;
const HEADER: &str = "claimscreen-explain 1";
const COLUMNS: &str = "index | type | score_raw | score_norm | excerpt";
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainRow {
    pub claim_index: u32,
    pub claim_type: ClaimType,
    pub raw: f64,
    pub normalized: f64,
    pub excerpt: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub patent_id: String,
    pub prediction: Class,
    pub p_pbt: f64,
    pub normalization: Normalization,
    /// Claim number with the highest score (lowest number on ties).
    pub max_claim: u32,
    pub min_claim: u32,
    /// More than one claim shares the highest score.
    pub tied_max: bool,
    pub rows: Vec<ExplainRow>,
}

fn excerpt(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.chars().count() <= EXCERPT_CHARS {
        return collapsed;
    }
    let cut: String = collapsed.chars().take(EXCERPT_CHARS).collect();
    format!("{}...", cut.trim_end())
}

/// Scores the claims that make up `matrix`. `claims[i]` must be the claim
/// embedded in row `i`; claims past the active count are ignored.
pub fn explain(
    patent_id: &str,
    claims: &[RawClaim],
    matrix: &ClaimMatrix,
    model: &Model,
    normalization: Normalization,
) -> Result<ExplainReport, InterpretError> {
    let active = matrix.active();
    if claims.len() < active {
        return Err(InterpretError::ClaimCount {
            claims: claims.len(),
            active,
        });
    }
    let (prediction, attention) = model.predict(matrix)?;
    let raw = claim_scores(&attention);
    let normalized = normalize_scores(&raw, normalization)?;

    let top = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bottom = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let first_near = |target: f64| {
        raw.iter()
            .position(|&v| (v - target).abs() <= TIE_TOLERANCE)
            .expect("extremum is attained")
    };
    let max_pos = first_near(top);
    let min_pos = first_near(bottom);
    let tied_max = raw.iter().filter(|&&v| (v - top).abs() <= TIE_TOLERANCE).count() > 1;

    let mut rows: Vec<ExplainRow> = claims[..active]
        .iter()
        .zip(raw.iter().zip(&normalized))
        .map(|(c, (&r, &n))| ExplainRow {
            claim_index: c.index,
            claim_type: c.claim_type,
            raw: r,
            normalized: n,
            excerpt: excerpt(&c.text),
        })
        .collect();
    rows.sort_by(|a, b| b.raw.total_cmp(&a.raw).then(a.claim_index.cmp(&b.claim_index)));

    Ok(ExplainReport {
        patent_id: patent_id.to_string(),
        prediction: prediction.class,
        p_pbt: prediction.p_pbt,
        normalization,
        max_claim: claims[max_pos].index,
        min_claim: claims[min_pos].index,
        tied_max,
        rows,
    })
}

fn type_label(t: ClaimType) -> String {
    match t {
        ClaimType::Independent => "independent".into(),
        ClaimType::Dependent { references } => format!("dependent->{references}"),
    }
}

fn parse_type(s: &str) -> Option<ClaimType> {
    if s == "independent" {
        return Some(ClaimType::Independent);
    }
    let references = s.strip_prefix("dependent->")?.parse().ok()?;
    Some(ClaimType::Dependent { references })
}

impl ExplainReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let norm = match self.normalization {
            Normalization::Max => "max",
            Normalization::Mean => "mean",
        };
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "patent_id: {}", self.patent_id);
        let _ = writeln!(out, "prediction: {}", self.prediction);
        let _ = writeln!(out, "p_pbt: {}", self.p_pbt);
        let _ = writeln!(out, "normalization: {norm}");
        let _ = writeln!(out, "max_claim: {}", self.max_claim);
        let _ = writeln!(out, "min_claim: {}", self.min_claim);
        let _ = writeln!(out, "tied_max: {}", if self.tied_max { "yes" } else { "no" });
        let _ = writeln!(out, "{COLUMNS}");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{} | {} | {} | {} | {}",
                r.claim_index,
                type_label(r.claim_type),
                r.raw,
                r.normalized,
                r.excerpt
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, InterpretError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| InterpretError::Report { line, message };
        let mut next = |expect: &str| -> Result<(usize, String), InterpretError> {
            let (n, l) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing {expect}")))?;
            Ok((n, l.to_string()))
        };

        let (n, l) = next("header")?;
        if l != HEADER {
            return Err(err(n, format!("expected {HEADER:?}")));
        }
        let mut field = |key: &str| -> Result<(usize, String), InterpretError> {
            let (n, l) = next(key)?;
            let v = l
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(": "))
                .ok_or_else(|| err(n, format!("expected field {key:?}")))?;
            Ok((n, v.to_string()))
        };
        let bad = |n: usize, what: &str, v: &str| err(n, format!("invalid {what} {v:?}"));

        let (_, patent_id) = field("patent_id")?;
        let (n, v) = field("prediction")?;
        let prediction: Class = v.parse().map_err(|_| bad(n, "prediction", &v))?;
        let (n, v) = field("p_pbt")?;
        let p_pbt: f64 = v.parse().map_err(|_| bad(n, "p_pbt", &v))?;
        let (n, v) = field("normalization")?;
        let normalization: Normalization = v.parse().map_err(|_| bad(n, "normalization", &v))?;
        let (n, v) = field("max_claim")?;
        let max_claim: u32 = v.parse().map_err(|_| bad(n, "max_claim", &v))?;
        let (n, v) = field("min_claim")?;
        let min_claim: u32 = v.parse().map_err(|_| bad(n, "min_claim", &v))?;
        let (n, v) = field("tied_max")?;
        let tied_max = match v.as_str() {
            "yes" => true,
            "no" => false,
            _ => return Err(bad(n, "tied_max", &v)),
        };
        let (n, l) = next("column header")?;
        if l != COLUMNS {
            return Err(err(n, "expected column header".into()));
        }

        let mut rows = Vec::new();
        for (n, l) in lines {
            let parts: Vec<&str> = l.splitn(5, " | ").collect();
            if parts.len() != 5 {
                return Err(err(n, "expected 5 columns".into()));
            }
            rows.push(ExplainRow {
                claim_index: parts[0].parse().map_err(|_| bad(n, "claim index", parts[0]))?,
                claim_type: parse_type(parts[1]).ok_or_else(|| bad(n, "claim type", parts[1]))?,
                raw: parts[2].parse().map_err(|_| bad(n, "raw score", parts[2]))?,
                normalized: parts[3].parse().map_err(|_| bad(n, "normalized score", parts[3]))?,
                excerpt: parts[4].to_string(),
            });
        }
        Ok(Self {
            patent_id,
            prediction,
            p_pbt,
            normalization,
            max_claim,
            min_claim,
            tied_max,
            rows,
        })
    }
}
