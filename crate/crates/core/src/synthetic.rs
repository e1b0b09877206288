//! Planted-token corpora with known labels.
//!
//! Every PBT patent repeats the tokens in [`PLANTED_TOKENS`] three times
//! inside one independent claim, enough to dominate that claim's mean
//! embedding; MT patents never contain them. Citations are drawn per window
//! (grant to 3 years, 3 to 5, 5 to 10) so that the default 3/7/18 thresholds
//! label every patent with its key class at all three horizons.

use std::io::Write;

use chrono::{Months, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    classify_claim_type, Citation, Class, CorpusError, PatentRecord, RawClaim,
};

pub const PLANTED_TOKENS: [&str; 3] = ["zeolite", "catalyst", "scaffold"];

const SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vi", "so", "pe", "du", "ho", "gi",
];

// Citations per window (years 0-3, 3-5, 5-10), inclusive ranges.
const PBT_WINDOWS: [(u32, u32); 3] = [(3, 5), (4, 6), (11, 15)];
const MT_WINDOWS: [(u32, u32); 3] = [(0, 2), (0, 3), (0, 8)];
const WINDOW_YEARS: [(u32, u32); 3] = [(0, 3), (3, 5), (5, 10)];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<PatentRecord>,
    /// Ground-truth class of each record, in record order.
    pub key: Vec<(String, Class)>,
}

impl SyntheticCorpus {
    /// `patent_id,class` rows with a header.
    pub fn write_key(&self, out: impl Write) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["patent_id", "class"])?;
        for (id, class) in &self.key {
            w.write_record([id.as_str(), class.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn filler_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("nonempty")).collect()
}

fn filler(rng: &mut ChaCha8Rng, words: std::ops::RangeInclusive<usize>) -> String {
    let n = rng.gen_range(words);
    (0..n).map(|_| filler_word(rng)).collect::<Vec<_>>().join(" ")
}

fn citations(
    rng: &mut ChaCha8Rng,
    patent: usize,
    grant: NaiveDate,
    windows: &[(u32, u32); 3],
) -> Vec<Citation> {
    let mut out = Vec::new();
    for (w, &(lo, hi)) in windows.iter().enumerate() {
        let (from_y, to_y) = WINDOW_YEARS[w];
        let start = grant + Months::new(12 * from_y);
        let end = grant + Months::new(12 * to_y);
        let span = (end - start).num_days();
        for _ in 0..rng.gen_range(lo..=hi) {
            let date = start + chrono::Days::new(rng.gen_range(0..span) as u64);
            out.push(Citation {
                citing_id: format!("C{patent:05}-{}", out.len() + 1),
                date,
            });
        }
    }
    out.sort_by(|a, b| a.date.cmp(&b.date).then(a.citing_id.cmp(&b.citing_id)));
    out
}

fn claims(rng: &mut ChaCha8Rng, planted: bool) -> Vec<RawClaim> {
    let n = rng.gen_range(2..=6);
    let mut texts = Vec::with_capacity(n);
    let mut independent = vec![0usize];
    texts.push(format!("A composition comprising {}.", filler(rng, 6..=10)));
    for i in 1..n {
        // at most two independent claims per patent
        if independent.len() < 2 && rng.gen_bool(0.3) {
            independent.push(i);
            texts.push(format!("A method comprising {}.", filler(rng, 6..=10)));
        } else {
            let parent = rng.gen_range(1..=i);
            texts.push(format!(
                "The composition of claim {parent}, wherein {}.",
                filler(rng, 4..=8)
            ));
        }
    }
    if planted {
        let at = *independent.choose(rng).expect("claim 1 is independent");
        let trio = PLANTED_TOKENS.join(" ");
        texts[at] = format!(
            "A composition comprising a {trio}, wherein the {trio} holds a {trio} and {}.",
            filler(rng, 1..=2)
        );
    }
    texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            let index = i as u32 + 1;
            let claim_type = classify_claim_type(&text, index).claim_type;
            RawClaim {
                index,
                text,
                claim_type,
            }
        })
        .collect()
}

/// `round(n × pbt_fraction)` PBT patents at random positions.
pub fn generate_synthetic_corpus(
    n_patents: usize,
    pbt_fraction: f64,
    seed: u64,
) -> Result<SyntheticCorpus, CorpusError> {
    if n_patents < 10 {
        return Err(CorpusError::InvalidArgument(format!(
            "synthetic corpus needs at least 10 patents, got {n_patents}"
        )));
    }
    if !(pbt_fraction > 0.0 && pbt_fraction < 1.0) {
        return Err(CorpusError::InvalidArgument(format!(
            "PBT fraction must lie in (0, 1), got {pbt_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pbt = ((n_patents as f64 * pbt_fraction).round() as usize).clamp(1, n_patents - 1);
    let mut order: Vec<usize> = (0..n_patents).collect();
    order.shuffle(&mut rng);
    let mut is_pbt = vec![false; n_patents];
    order[..n_pbt].iter().for_each(|&i| is_pbt[i] = true);

    let base = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let mut records = Vec::with_capacity(n_patents);
    let mut key = Vec::with_capacity(n_patents);
    for (i, &pbt) in is_pbt.iter().enumerate() {
        let patent_id = format!("S{:06}", i + 1);
        let grant = base + chrono::Days::new(rng.gen_range(0..3650));
        let windows = if pbt { &PBT_WINDOWS } else { &MT_WINDOWS };
        records.push(PatentRecord {
            patent_id: patent_id.clone(),
            grant_date: grant,
            claims: claims(&mut rng, pbt),
            citations: citations(&mut rng, i, grant, windows),
        });
        key.push((patent_id, if pbt { Class::Pbt } else { Class::Mt }));
    }
    Ok(SyntheticCorpus { records, key })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{assign_labels, parse_corpus_reader, write_corpus, Horizon, LabelPolicies};

    #[test]
    fn exact_pbt_count() {
        let c = generate_synthetic_corpus(200, 0.1, 1).unwrap();
        assert_eq!(c.key.iter().filter(|(_, k)| *k == Class::Pbt).count(), 20);
        assert_eq!(c.records.len(), 200);
    }

    #[test]
    fn deterministic_files() {
        let write = |seed| {
            let c = generate_synthetic_corpus(50, 0.2, seed).unwrap();
            let mut a = Vec::new();
            write_corpus(&mut a, &c.records).unwrap();
            c.write_key(&mut a).unwrap();
            a
        };
        assert_eq!(write(4), write(4));
        assert_ne!(write(4), write(5));
    }

    #[test]
    fn recomputed_labels_match_key() {
        for seed in 0..5 {
            let c = generate_synthetic_corpus(120, 0.15, seed).unwrap();
            let mut buf = Vec::new();
            write_corpus(&mut buf, &c.records).unwrap();
            let parsed = parse_corpus_reader(&buf[..]).unwrap();
            let labels = assign_labels(&parsed, &LabelPolicies::default()).unwrap();
            for (p, (id, class)) in labels.patents.iter().zip(&c.key) {
                assert_eq!(&p.patent_id, id);
                for h in Horizon::ALL {
                    assert_eq!(p.class(h), *class, "{id} {h}");
                }
            }
        }
    }

    #[test]
    fn plant_only_in_pbt_independent_claims() {
        let c = generate_synthetic_corpus(100, 0.3, 2).unwrap();
        for (r, (_, class)) in c.records.iter().zip(&c.key) {
            let planted: Vec<&RawClaim> = r
                .claims
                .iter()
                .filter(|cl| cl.text.contains(PLANTED_TOKENS[0]))
                .collect();
            match class {
                Class::Pbt => {
                    assert_eq!(planted.len(), 1);
                    assert!(planted[0].claim_type.is_independent());
                }
                Class::Mt => assert!(planted.is_empty()),
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_synthetic_corpus(9, 0.1, 0).is_err());
        assert!(generate_synthetic_corpus(10, 0.0, 0).is_err());
        assert!(generate_synthetic_corpus(10, 1.0, 0).is_err());
    }
}
