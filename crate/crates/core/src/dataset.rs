//! Labeled claim matrices ready for training and inference.

use std::collections::HashMap;

use crate::corpus::{ClaimFilter, Class, PatentRecord, Preprocessor, RawClaim, TokenizedClaim};
use crate::embed::{build_claim_matrix, CembFile, ClaimMatrix, EmbedError, EmbeddingProvider};

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub patent_id: String,
    pub claims: ClaimMatrix,
    pub label: Class,
}

/// One patent's embedded claims together with the claim records behind
/// each active row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedPatent {
    pub patent_id: String,
    pub claims: Vec<RawClaim>,
    pub matrix: ClaimMatrix,
}

/// Embeds every record with at least one claim kept by `filter`. Records
/// left without claims are skipped with a warning.
pub fn embed_records(
    records: &[PatentRecord],
    filter: ClaimFilter,
    preprocessor: &Preprocessor,
    provider: &dyn EmbeddingProvider,
    max_claims: usize,
) -> Result<Vec<EmbeddedPatent>, EmbedError> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let kept: Vec<RawClaim> = r.filtered_claims(filter).take(max_claims).cloned().collect();
        if kept.is_empty() {
            log::warn!("patent {} has no claims under the {filter:?} filter; skipped", r.patent_id);
            continue;
        }
        let tokens: Vec<TokenizedClaim> = kept.iter().map(|c| preprocessor.process(c)).collect();
        let matrix = build_claim_matrix(&tokens, provider, max_claims)?;
        out.push(EmbeddedPatent {
            patent_id: r.patent_id.clone(),
            claims: kept,
            matrix,
        });
    }
    Ok(out)
}

/// Pairs records with precomputed CEMB vectors. The stored claim count must
/// equal the number of claims kept by `filter`.
pub fn attach_embeddings(
    records: &[PatentRecord],
    filter: ClaimFilter,
    cemb: &CembFile,
    expected_dim: usize,
    max_claims: usize,
) -> Result<Vec<EmbeddedPatent>, EmbedError> {
    let index = cemb.index();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let entry = index
            .get(r.patent_id.as_str())
            .ok_or_else(|| EmbedError::MissingPatent(r.patent_id.clone()))?;
        let kept: Vec<RawClaim> = r.filtered_claims(filter).cloned().collect();
        if kept.len() != entry.claims.len() {
            return Err(EmbedError::InvalidArgument(format!(
                "patent {} has {} claims under the {filter:?} filter but {} stored vectors",
                r.patent_id,
                kept.len(),
                entry.claims.len()
            )));
        }
        if kept.is_empty() {
            log::warn!("patent {} has no claims under the {filter:?} filter; skipped", r.patent_id);
            continue;
        }
        let matrix = CembFile::claim_matrix(entry, cemb.dim, expected_dim, max_claims)?;
        out.push(EmbeddedPatent {
            patent_id: r.patent_id.clone(),
            claims: kept.into_iter().take(max_claims).collect(),
            matrix,
        });
    }
    Ok(out)
}

/// Joins embedded patents with labels by id; unlabeled patents are skipped.
pub fn label_examples(patents: &[EmbeddedPatent], labels: &HashMap<String, Class>) -> Vec<Example> {
    patents
        .iter()
        .filter_map(|p| {
            let label = *labels.get(&p.patent_id)?;
            Some(Example {
                patent_id: p.patent_id.clone(),
                claims: p.matrix.clone(),
                label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ClaimType, Stopwords};
    use crate::embed::{CembEntry, HashedEmbedder};
    use chrono::NaiveDate;

    fn record(id: &str, types: &[bool]) -> PatentRecord {
        PatentRecord {
            patent_id: id.into(),
            grant_date: NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(),
            claims: types
                .iter()
                .enumerate()
                .map(|(i, &ind)| RawClaim {
                    index: i as u32 + 1,
                    text: format!("widget number w{i}"),
                    claim_type: if ind {
                        ClaimType::Independent
                    } else {
                        ClaimType::Dependent { references: 1 }
                    },
                })
                .collect(),
            citations: vec![],
        }
    }

    #[test]
    fn filter_and_skip() {
        let records = [record("a", &[true, false, true]), record("b", &[false])];
        let pre = Preprocessor::new(Stopwords::english(), 512).unwrap();
        let e = HashedEmbedder::new(8, 0);
        let out = embed_records(&records, ClaimFilter::IndependentOnly, &pre, &e, 4).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].matrix.active(), 2);
        assert_eq!(out[0].claims.iter().map(|c| c.index).collect::<Vec<_>>(), [1, 3]);
        let all = embed_records(&records, ClaimFilter::All, &pre, &e, 2).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].claims.len(), 2);
    }

    #[test]
    fn cemb_counts_must_match() {
        let records = [record("a", &[true, false, true])];
        let cemb = CembFile::new(
            2,
            vec![CembEntry {
                patent_id: "a".into(),
                claims: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            }],
        )
        .unwrap();
        let ok = attach_embeddings(&records, ClaimFilter::IndependentOnly, &cemb, 2, 4).unwrap();
        assert_eq!(ok[0].matrix.active(), 2);
        assert!(attach_embeddings(&records, ClaimFilter::All, &cemb, 2, 4).is_err());
        assert!(matches!(
            attach_embeddings(&records, ClaimFilter::IndependentOnly, &cemb, 3, 4),
            Err(EmbedError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            attach_embeddings(&[record("z", &[true])], ClaimFilter::All, &cemb, 2, 4),
            Err(EmbedError::MissingPatent(_))
        ));
    }
}
