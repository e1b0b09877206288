//! Forward-citation windows and PBT/MT labeling.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::Months;
use serde::{Deserialize, Serialize};

use super::{Class, CorpusError, PatentRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Short,
    Mid,
    Long,
}

impl Horizon {
    pub const ALL: [Horizon; 3] = [Horizon::Short, Horizon::Mid, Horizon::Long];

    pub fn years(self) -> u32 {
        match self {
            Horizon::Short => 3,
            Horizon::Mid => 5,
            Horizon::Long => 10,
        }
    }

    fn slot(self) -> usize {
        match self {
            Horizon::Short => 0,
            Horizon::Mid => 1,
            Horizon::Long => 2,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Horizon::Short => "short",
            Horizon::Mid => "mid",
            Horizon::Long => "long",
        })
    }
}

impl FromStr for Horizon {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "short" | "3" => Ok(Horizon::Short),
            "mid" | "5" => Ok(Horizon::Mid),
            "long" | "10" => Ok(Horizon::Long),
            other => Err(CorpusError::InvalidArgument(format!(
                "unknown horizon {other:?} (expected short, mid or long)"
            ))),
        }
    }
}

/// How the PBT threshold of one horizon is chosen. `count ≥ threshold` ⇒ PBT.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    FixedThreshold(u32),
    /// Smallest integer threshold whose PBT share is at most `1 − q`.
    Quantile(f64),
}

impl LabelMode {
    fn validate(self) -> Result<(), CorpusError> {
        match self {
            LabelMode::Quantile(q) if !(q > 0.0 && q < 1.0) => Err(CorpusError::InvalidArgument(
                format!("quantile must lie in (0, 1), got {q}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelPolicies {
    pub short: LabelMode,
    pub mid: LabelMode,
    pub long: LabelMode,
}

impl LabelPolicies {
    pub fn get(&self, horizon: Horizon) -> LabelMode {
        match horizon {
            Horizon::Short => self.short,
            Horizon::Mid => self.mid,
            Horizon::Long => self.long,
        }
    }

    pub fn fixed(short: u32, mid: u32, long: u32) -> Self {
        Self {
            short: LabelMode::FixedThreshold(short),
            mid: LabelMode::FixedThreshold(mid),
            long: LabelMode::FixedThreshold(long),
        }
    }
}

impl Default for LabelPolicies {
    /// Top-decile thresholds of the pharmaceutical case study: 3, 7 and 18.
    fn default() -> Self {
        Self::fixed(3, 7, 18)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPatent {
    pub patent_id: String,
    /// Citation counts within 3, 5 and 10 years.
    pub counts: [u32; 3],
    pub classes: [Class; 3],
}

impl LabeledPatent {
    pub fn count(&self, horizon: Horizon) -> u32 {
        self.counts[horizon.slot()]
    }

    pub fn class(&self, horizon: Horizon) -> Class {
        self.classes[horizon.slot()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    /// Resolved thresholds for short, mid and long horizons.
    pub thresholds: [u32; 3],
    pub patents: Vec<LabeledPatent>,
}

impl Labeling {
    pub fn threshold(&self, horizon: Horizon) -> u32 {
        self.thresholds[horizon.slot()]
    }

    pub fn classes(&self, horizon: Horizon) -> Vec<Class> {
        self.patents.iter().map(|p| p.class(horizon)).collect()
    }
}

/// Citations dated strictly before the `horizon`-year anniversary of grant.
pub fn citation_count(record: &PatentRecord, horizon: Horizon) -> u32 {
    let end = record
        .grant_date
        .checked_add_months(Months::new(12 * horizon.years()));
    record
        .citations
        .iter()
        .filter(|c| end.is_none_or(|end| c.date < end))
        .count() as u32
}

pub fn resolve_threshold(counts: &[u32], mode: LabelMode) -> Result<u32, CorpusError> {
    mode.validate()?;
    match mode {
        LabelMode::FixedThreshold(t) => Ok(t),
        LabelMode::Quantile(q) => {
            if counts.is_empty() {
                return Err(CorpusError::InvalidArgument(
                    "quantile labeling needs a nonempty corpus".into(),
                ));
            }
            let max = counts.iter().copied().max().unwrap_or(0);
            let n = counts.len() as f64;
            // slack absorbs rounding in 1 − q (0.1 is not representable)
            let limit = (1.0 - q) * n + 1e-9;
            (0..=max + 1)
                .find(|&t| counts.iter().filter(|&&c| c >= t).count() as f64 <= limit)
                .ok_or_else(|| CorpusError::InvalidArgument("no feasible threshold".into()))
        }
    }
}

pub fn assign_labels(
    records: &[PatentRecord],
    policies: &LabelPolicies,
) -> Result<Labeling, CorpusError> {
    let counts: Vec<[u32; 3]> = records
        .iter()
        .map(|r| Horizon::ALL.map(|h| citation_count(r, h)))
        .collect();
    let mut thresholds = [0u32; 3];
    for h in Horizon::ALL {
        let column: Vec<u32> = counts.iter().map(|c| c[h.slot()]).collect();
        thresholds[h.slot()] = resolve_threshold(&column, policies.get(h))?;
    }
    let patents = records
        .iter()
        .zip(&counts)
        .map(|(r, c)| LabeledPatent {
            patent_id: r.patent_id.clone(),
            counts: *c,
            classes: Horizon::ALL.map(|h| {
                if c[h.slot()] >= thresholds[h.slot()] {
                    Class::Pbt
                } else {
                    Class::Mt
                }
            }),
        })
        .collect();
    Ok(Labeling {
        thresholds,
        patents,
    })
}

const HEADER: [&str; 7] = [
    "patent_id", "count3", "count5", "count10", "class3", "class5", "class10",
];

/// Comma-delimited table: `patent_id,count3,count5,count10,class3,class5,class10`.
pub fn write_label_table(out: impl Write, patents: &[LabeledPatent]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for p in patents {
        w.write_record([
            p.patent_id.clone(),
            p.counts[0].to_string(),
            p.counts[1].to_string(),
            p.counts[2].to_string(),
            p.classes[0].to_string(),
            p.classes[1].to_string(),
            p.classes[2].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_label_table(input: impl Read) -> Result<Vec<LabeledPatent>, CorpusError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(CorpusError::Format(format!(
            "unexpected label table header {header:?}"
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| CorpusError::Line { line, message };
        let count = |j: usize| {
            rec[j]
                .parse::<u32>()
                .map_err(|e| bad(format!("{}: {e}", HEADER[j])))
        };
        let class = |j: usize| rec[j].parse::<Class>().map_err(|e| bad(e.to_string()));
        out.push(LabeledPatent {
            patent_id: rec[0].to_string(),
            counts: [count(1)?, count(2)?, count(3)?],
            classes: [class(4)?, class(5)?, class(6)?],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Citation, ClaimType, RawClaim};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn record_with_lag_days(id: &str, lags: &[i64]) -> PatentRecord {
        let grant = NaiveDate::from_ymd_opt(2000, 3, 1).unwrap();
        PatentRecord {
            patent_id: id.into(),
            grant_date: grant,
            claims: vec![RawClaim {
                index: 1,
                text: "x".into(),
                claim_type: ClaimType::Independent,
            }],
            citations: lags
                .iter()
                .enumerate()
                .map(|(i, d)| Citation {
                    citing_id: format!("c{i}"),
                    date: grant + chrono::Duration::days(*d),
                })
                .collect(),
        }
    }

    fn classes_for(counts: [u32; 3], policies: &LabelPolicies) -> [Class; 3] {
        // one citation per year slot reproduces the requested counts
        let mut lags = Vec::new();
        lags.extend(std::iter::repeat_n(100, counts[0] as usize));
        lags.extend(std::iter::repeat_n(365 * 4, (counts[1] - counts[0]) as usize));
        lags.extend(std::iter::repeat_n(365 * 7, (counts[2] - counts[1]) as usize));
        let r = record_with_lag_days("p", &lags);
        let l = assign_labels(&[r], policies).unwrap();
        assert_eq!(l.patents[0].counts, counts);
        l.patents[0].classes
    }

    #[test]
    fn reference_rows_label_as_reported() {
        let p = LabelPolicies::default();
        assert_eq!(classes_for([3, 5, 11], &p), [Class::Pbt, Class::Mt, Class::Mt]);
        assert_eq!(classes_for([2, 6, 21], &p), [Class::Mt, Class::Mt, Class::Pbt]);
        assert_eq!(classes_for([0, 0, 0], &LabelPolicies::fixed(1, 1, 1)), [Class::Mt; 3]);
    }

    #[test]
    fn window_is_exclusive_of_anniversary() {
        let grant = NaiveDate::from_ymd_opt(2000, 3, 1).unwrap();
        let before = (NaiveDate::from_ymd_opt(2003, 2, 28).unwrap() - grant).num_days();
        let on = (NaiveDate::from_ymd_opt(2003, 3, 1).unwrap() - grant).num_days();
        let r = record_with_lag_days("p", &[before, on]);
        assert_eq!(citation_count(&r, Horizon::Short), 1);
        assert_eq!(citation_count(&r, Horizon::Mid), 2);
    }

    #[test]
    fn quantile_threshold_picks_smallest_feasible() {
        // counts 0..=9, one patent each; q = 0.9 → at most 10% PBT → t = 9
        let counts: Vec<u32> = (0..10).collect();
        assert_eq!(resolve_threshold(&counts, LabelMode::Quantile(0.9)).unwrap(), 9);
        // heavy tie at zero
        let counts = [0, 0, 0, 0, 0, 0, 0, 0, 5, 5];
        assert_eq!(resolve_threshold(&counts, LabelMode::Quantile(0.9)).unwrap(), 6);
        assert!(resolve_threshold(&[], LabelMode::Quantile(0.9)).is_err());
        assert!(resolve_threshold(&[1], LabelMode::Quantile(1.0)).is_err());
    }

    #[test]
    fn table_round_trip() {
        let l = LabeledPatent {
            patent_id: "6010700".into(),
            counts: [3, 5, 11],
            classes: [Class::Pbt, Class::Mt, Class::Mt],
        };
        let mut buf = Vec::new();
        write_label_table(&mut buf, std::slice::from_ref(&l)).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "patent_id,count3,count5,count10,class3,class5,class10\n6010700,3,5,11,PBT,MT,MT\n"
        );
        assert_eq!(read_label_table(buf.as_slice()).unwrap(), vec![l]);
    }

    proptest! {
        #[test]
        fn windows_nest_and_labels_are_monotone(
            lags in proptest::collection::vec(0i64..5000, 0..40),
            extra in 0i64..5000,
            t in 0u32..10,
        ) {
            let p = LabelPolicies::fixed(t, t, t);
            let base = record_with_lag_days("p", &lags);
            let l = assign_labels(std::slice::from_ref(&base), &p).unwrap();
            let c = l.patents[0].counts;
            prop_assert!(c[0] <= c[1] && c[1] <= c[2]);

            let mut more = lags.clone();
            more.push(extra);
            let l2 = assign_labels(&[record_with_lag_days("p", &more)], &p).unwrap();
            for h in 0..3 {
                if l.patents[0].classes[h] == Class::Pbt {
                    prop_assert_eq!(l2.patents[0].classes[h], Class::Pbt);
                }
            }
        }

        #[test]
        fn quantile_share_is_maximal_feasible(
            counts in proptest::collection::vec(0u32..30, 1..80),
            q in 0.05f64..0.95,
        ) {
            let t = resolve_threshold(&counts, LabelMode::Quantile(q)).unwrap();
            let share = |t: u32| counts.iter().filter(|&&c| c >= t).count() as f64 / counts.len() as f64;
            prop_assert!(share(t) <= 1.0 - q);
            if t > 0 {
                prop_assert!(share(t - 1) > 1.0 - q);
            }
        }
    }
}
