//! Stratified train/test splits and k-fold partitions over class labels.
//!
//! Both functions work on a slice of labels and return positions into it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Class, CorpusError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn shuffled_members(labels: &[Class], class: Class, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
    members.shuffle(rng);
    members
}

fn check_fraction(train_fraction: f64) -> Result<(), CorpusError> {
    if train_fraction > 0.0 && train_fraction < 1.0 {
        Ok(())
    } else {
        Err(CorpusError::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )))
    }
}

/// Per class, `round(size × train_fraction)` members go to train.
/// Every class must be present.
pub fn stratified_split(
    labels: &[Class],
    train_fraction: f64,
    seed: u64,
) -> Result<Split, CorpusError> {
    check_fraction(train_fraction)?;
    for class in Class::ALL {
        if !labels.contains(&class) {
            return Err(CorpusError::ClassTooSmall {
                class,
                size: 0,
                required: 1,
            });
        }
    }
    stratified_split_lenient(labels, train_fraction, seed)
}

/// As [`stratified_split`], but absent classes are skipped.
pub fn stratified_split_lenient(
    labels: &[Class],
    train_fraction: f64,
    seed: u64,
) -> Result<Split, CorpusError> {
    check_fraction(train_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for class in Class::ALL {
        let members = shuffled_members(labels, class, &mut rng);
        let n_train = (members.len() as f64 * train_fraction).round() as usize;
        split.train.extend_from_slice(&members[..n_train]);
        split.test.extend_from_slice(&members[n_train..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// `k` disjoint folds covering every position. Within each class, fold sizes
/// differ by at most one; leftovers rotate across folds so total fold sizes
/// stay balanced too.
pub fn stratified_kfold(
    labels: &[Class],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, CorpusError> {
    if k < 2 {
        return Err(CorpusError::InvalidArgument(format!(
            "k-fold needs k >= 2, got {k}"
        )));
    }
    for class in Class::ALL {
        let size = labels.iter().filter(|&&c| c == class).count();
        if size > 0 && size < k {
            return Err(CorpusError::ClassTooSmall {
                class,
                size,
                required: k,
            });
        }
    }
    if labels.is_empty() {
        return Err(CorpusError::InvalidArgument("no labels to fold".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for class in Class::ALL {
        for i in shuffled_members(labels, class, &mut rng) {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(mt: usize, pbt: usize) -> Vec<Class> {
        let mut v = vec![Class::Mt; mt];
        v.extend(std::iter::repeat_n(Class::Pbt, pbt));
        v
    }

    fn count(ls: &[Class], idx: &[usize], c: Class) -> usize {
        idx.iter().filter(|&&i| ls[i] == c).count()
    }

    #[test]
    fn split_counts_follow_rounding() {
        let ls = labels(90, 10);
        let s = stratified_split(&ls, 0.8, 11).unwrap();
        assert_eq!(count(&ls, &s.train, Class::Mt), 72);
        assert_eq!(count(&ls, &s.train, Class::Pbt), 8);
        assert_eq!(s.train.len() + s.test.len(), 100);
        assert_eq!(s, stratified_split(&ls, 0.8, 11).unwrap());
    }

    #[test]
    fn split_preconditions() {
        let ls = labels(90, 10);
        assert!(stratified_split(&ls, 1.0, 0).is_err());
        assert!(stratified_split(&ls, 0.0, 0).is_err());
        assert!(stratified_split(&labels(5, 0), 0.5, 0).is_err());
        assert!(stratified_split_lenient(&labels(5, 0), 0.5, 0).is_ok());
    }

    #[test]
    fn kfold_exact_divisibility() {
        let ls = labels(90, 10);
        let folds = stratified_kfold(&ls, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(count(&ls, f, Class::Mt), 18);
            assert_eq!(count(&ls, f, Class::Pbt), 2);
        }
    }

    #[test]
    fn kfold_uneven_class() {
        let ls = labels(92, 10);
        let folds = stratified_kfold(&ls, 5, 3).unwrap();
        let mt: Vec<usize> = folds.iter().map(|f| count(&ls, f, Class::Mt)).collect();
        assert!(mt.iter().all(|&n| n == 18 || n == 19), "{mt:?}");
        assert_eq!(mt.iter().sum::<usize>(), 92);
        assert!(folds.iter().all(|f| count(&ls, f, Class::Pbt) == 2));
    }

    #[test]
    fn kfold_preconditions() {
        assert!(stratified_kfold(&labels(5, 1), 2, 0).is_err());
        assert!(stratified_kfold(&labels(5, 5), 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(mt in 5usize..60, pbt in 5usize..30, k in 2usize..6, seed: u64) {
            let ls = labels(mt, pbt);
            let folds = stratified_kfold(&ls, k, seed).unwrap();
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..ls.len()).collect::<Vec<_>>());
            for c in Class::ALL {
                let size = count(&ls, &(0..ls.len()).collect::<Vec<_>>(), c) as f64;
                for f in &folds {
                    prop_assert!((count(&ls, f, c) as f64 - size / k as f64).abs() < 1.0);
                }
            }
            prop_assert_eq!(folds, stratified_kfold(&ls, k, seed).unwrap());
        }

        #[test]
        fn split_is_disjoint_cover(mt in 1usize..60, pbt in 1usize..30, f in 0.05f64..0.95, seed: u64) {
            let ls = labels(mt, pbt);
            let s = stratified_split(&ls, f, seed).unwrap();
            let mut all = [s.train.clone(), s.test.clone()].concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..ls.len()).collect::<Vec<_>>());
        }
    }
}
