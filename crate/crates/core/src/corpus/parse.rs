//! Line-delimited JSON corpus format.
//!
//! Each line holds one patent:
//!
//! ```text
//! {"patent_id": "6010700", "grant_date": "2000-01-04",
//!  "claims": [{"index": 1, "text": "A method ..."}, {"text": "The method of claim 1 ..."}],
//!  "citations": [{"citing_id": "6100001", "date": "2001-05-02"}]}
//! ```
//!
//! Claim `index` is optional; missing indices take the claim's 1-based position.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{classify_claim_type, Citation, CorpusError, PatentRecord, RawClaim};

#[derive(Serialize, Deserialize)]
struct PatentLine {
    patent_id: String,
    grant_date: NaiveDate,
    claims: Vec<ClaimLine>,
    #[serde(default)]
    citations: Vec<CitationLine>,
}

#[derive(Serialize, Deserialize)]
struct ClaimLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<u32>,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct CitationLine {
    citing_id: String,
    date: NaiveDate,
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<PatentRecord>, CorpusError> {
    let file = std::fs::File::open(path)?;
    parse_corpus_reader(BufReader::new(file))
}

pub fn parse_corpus_reader(reader: impl BufRead) -> Result<Vec<PatentRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PatentLine = serde_json::from_str(&line).map_err(|e| CorpusError::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        let record = into_record(parsed).map_err(|message| CorpusError::Line {
            line: line_no,
            message,
        })?;
        if !seen.insert(record.patent_id.clone()) {
            return Err(CorpusError::DuplicatePatent(record.patent_id));
        }
        records.push(record);
    }
    Ok(records)
}

fn into_record(line: PatentLine) -> Result<PatentRecord, String> {
    if line.patent_id.trim().is_empty() {
        return Err("empty patent_id".into());
    }
    if line.claims.is_empty() {
        return Err("patent has no claims".into());
    }
    let mut indices = HashSet::new();
    let mut claims = Vec::with_capacity(line.claims.len());
    for (pos, claim) in line.claims.into_iter().enumerate() {
        let index = claim.index.unwrap_or(pos as u32 + 1);
        if index == 0 {
            return Err("claim index must be 1-based".into());
        }
        if !indices.insert(index) {
            return Err(format!("claim index {index} repeated"));
        }
        if claim.text.trim().is_empty() {
            return Err(format!("claim {index} has empty text"));
        }
        let claim_type = classify_claim_type(&claim.text, index).claim_type;
        claims.push(RawClaim {
            index,
            text: claim.text,
            claim_type,
        });
    }
    let mut citations = Vec::with_capacity(line.citations.len());
    for c in line.citations {
        if c.date < line.grant_date {
            return Err(format!(
                "citation from {} dated {} precedes grant {}",
                c.citing_id, c.date, line.grant_date
            ));
        }
        citations.push(Citation {
            citing_id: c.citing_id,
            date: c.date,
        });
    }
    Ok(PatentRecord {
        patent_id: line.patent_id,
        grant_date: line.grant_date,
        claims,
        citations,
    })
}

/// Writes records in the line format, one patent per line.
pub fn write_corpus(mut out: impl Write, records: &[PatentRecord]) -> Result<(), CorpusError> {
    for r in records {
        let line = PatentLine {
            patent_id: r.patent_id.clone(),
            grant_date: r.grant_date,
            claims: r
                .claims
                .iter()
                .map(|c| ClaimLine {
                    index: Some(c.index),
                    text: c.text.clone(),
                })
                .collect(),
            citations: r
                .citations
                .iter()
                .map(|c| CitationLine {
                    citing_id: c.citing_id.clone(),
                    date: c.date,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| CorpusError::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
