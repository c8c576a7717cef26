use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Domain, ProcessedDataset, Split};

/// Split fractions. The target domain gets train/valid/test, the source
/// domain train/valid only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub target: Domain,
    pub target_train_frac: f64,
    pub target_valid_frac: f64,
    pub target_test_frac: f64,
    pub source_train_frac: f64,
    pub source_valid_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            target: Domain::A,
            target_train_frac: 0.6,
            target_valid_frac: 0.2,
            target_test_frac: 0.2,
            source_train_frac: 0.8,
            source_valid_frac: 0.2,
            seed: 2024,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let groups = [
            (
                "target",
                vec![
                    self.target_train_frac,
                    self.target_valid_frac,
                    self.target_test_frac,
                ],
            ),
            (
                "source",
                vec![self.source_train_frac, self.source_valid_frac],
            ),
        ];
        for (name, fracs) in groups {
            if fracs.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
                return Err(CorpusError::InvalidSplit(format!(
                    "{name} fractions must lie in (0, 1)"
                )));
            }
            let total: f64 = fracs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(CorpusError::InvalidSplit(format!(
                    "{name} fractions sum to {total}"
                )));
            }
        }
        Ok(())
    }

    /// Same spec with the roles of the domains swapped.
    pub fn with_target(&self, target: Domain) -> Self {
        Self {
            target,
            ..self.clone()
        }
    }
}

/// Labels every interaction by a seeded uniform shuffle.
///
/// Bucket sizes are `round(n·valid)`, `round(n·test)` and the remainder for
/// train. A repair pass then guarantees that every user and every item keeps
/// at least one train interaction in each domain: a stranded interaction
/// swaps labels with a train interaction whose user and item both have
/// another train interaction, so bucket sizes are unchanged.
pub fn split_dataset(
    ds: &ProcessedDataset,
    spec: &SplitSpec,
) -> Result<ProcessedDataset, CorpusError> {
    spec.validate()?;
    let mut out = ds.clone();
    for d in Domain::BOTH {
        let is_target = d == spec.target;
        let (valid, test) = if is_target {
            (spec.target_valid_frac, spec.target_test_frac)
        } else {
            (spec.source_valid_frac, 0.0)
        };
        out.splits[d.index()] = split_domain(ds, d, valid, test, is_target, spec.seed)?;
    }
    out.target = Some(spec.target);
    Ok(out)
}

fn split_domain(
    ds: &ProcessedDataset,
    d: Domain,
    valid_frac: f64,
    test_frac: f64,
    needs_test: bool,
    seed: u64,
) -> Result<Vec<Split>, CorpusError> {
    let pairs = ds.interactions(d);
    let n = pairs.len();
    let n_valid = (n as f64 * valid_frac).round() as usize;
    let n_test = (n as f64 * test_frac).round() as usize;
    if n_valid + n_test >= n || n_valid == 0 || (needs_test && n_test == 0) {
        return Err(CorpusError::TooFewInteractions(format!(
            "domain {d} has {n} interactions, buckets would be {}/{n_valid}/{n_test}",
            n.saturating_sub(n_valid + n_test)
        )));
    }
    let n_train = n - n_valid - n_test;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(d.index() as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut rank = vec![0; n];
    let mut labels = vec![Split::Train; n];
    for (pos, &k) in order.iter().enumerate() {
        rank[k] = pos;
        labels[k] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
    }

    let mut user_train = vec![0usize; ds.n_users()];
    let mut item_train = vec![0usize; ds.n_items(d)];
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); ds.n_users()];
    let mut by_item: Vec<Vec<usize>> = vec![Vec::new(); ds.n_items(d)];
    for (k, &(u, i)) in pairs.iter().enumerate() {
        by_user[u].push(k);
        by_item[i].push(k);
        if labels[k] == Split::Train {
            user_train[u] += 1;
            item_train[i] += 1;
        }
    }

    let mut cursor = n;
    let mut repair = |stranded: usize,
                      labels: &mut Vec<Split>,
                      user_train: &mut Vec<usize>,
                      item_train: &mut Vec<usize>| {
        for _ in 0..n {
            cursor = if cursor == 0 { n - 1 } else { cursor - 1 };
            let y = order[cursor];
            let (uy, iy) = pairs[y];
            if labels[y] == Split::Train && user_train[uy] >= 2 && item_train[iy] >= 2 {
                let (ux, ix) = pairs[stranded];
                labels[y] = labels[stranded];
                labels[stranded] = Split::Train;
                user_train[uy] -= 1;
                item_train[iy] -= 1;
                user_train[ux] += 1;
                item_train[ix] += 1;
                return Ok(());
            }
        }
        Err(CorpusError::TooFewInteractions(format!(
            "domain {d}: no train interaction can be moved to cover interaction {stranded}"
        )))
    };

    for u in 0..ds.n_users() {
        if user_train[u] == 0 && !by_user[u].is_empty() {
            let x = *by_user[u]
                .iter()
                .min_by_key(|&&k| rank[k])
                .expect("non-empty");
            repair(x, &mut labels, &mut user_train, &mut item_train)?;
        }
    }
    for i in 0..ds.n_items(d) {
        if item_train[i] == 0 && !by_item[i].is_empty() {
            let x = *by_item[i]
                .iter()
                .min_by_key(|&&k| rank[k])
                .expect("non-empty");
            repair(x, &mut labels, &mut user_train, &mut item_train)?;
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(pairs_a: Vec<(usize, usize)>, pairs_b: Vec<(usize, usize)>) -> ProcessedDataset {
        let n_users = pairs_a
            .iter()
            .chain(&pairs_b)
            .map(|p| p.0 + 1)
            .max()
            .unwrap();
        let items = |p: &[(usize, usize)]| {
            (0..p.iter().map(|x| x.1 + 1).max().unwrap())
                .map(|i| format!("i{i}"))
                .collect()
        };
        ProcessedDataset {
            users: (0..n_users).map(|u| format!("u{u}")).collect(),
            items: [items(&pairs_a), items(&pairs_b)],
            inter: [pairs_a, pairs_b],
            splits: Default::default(),
            n_core: 1,
            target: None,
        }
    }

    fn count(labels: &[Split], s: Split) -> usize {
        labels.iter().filter(|&&l| l == s).count()
    }

    #[test]
    fn ten_interactions_split_six_two_two() {
        // Two users over five items: any six train labels leave an item with
        // two train rows, so a donor always exists.
        let pairs: Vec<_> = (0..10).map(|k| (k % 2, k / 2)).collect();
        let ds = dataset(pairs.clone(), pairs);
        for seed in 0..20 {
            let out = split_dataset(
                &ds,
                &SplitSpec {
                    seed,
                    ..SplitSpec::default()
                },
            )
            .unwrap();
            let a = out.labels(Domain::A);
            assert_eq!(
                (
                    count(a, Split::Train),
                    count(a, Split::Valid),
                    count(a, Split::Test)
                ),
                (6, 2, 2)
            );
            let b = out.labels(Domain::B);
            assert_eq!(
                (
                    count(b, Split::Train),
                    count(b, Split::Valid),
                    count(b, Split::Test)
                ),
                (8, 2, 0)
            );
            for d in Domain::BOTH {
                let train = out.pairs(d, Split::Train);
                assert!((0..2).all(|u| train.iter().any(|p| p.0 == u)));
                assert!((0..5).all(|i| train.iter().any(|p| p.1 == i)));
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let pairs: Vec<_> = (0..60)
            .map(|k| (k % 6, (k * 7) % 10))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let ds = dataset(pairs.clone(), pairs);
        let spec = SplitSpec::default();
        let a = split_dataset(&ds, &spec).unwrap();
        let b = split_dataset(&ds, &spec).unwrap();
        assert_eq!(a.splits, b.splits);
        let other = split_dataset(&ds, &SplitSpec { seed: 99, ..spec }).unwrap();
        assert_ne!(a.splits, other.splits);
    }

    #[test]
    fn invalid_fractions() {
        let spec = SplitSpec {
            target_train_frac: 0.5,
            ..SplitSpec::default()
        };
        assert!(matches!(spec.validate(), Err(CorpusError::InvalidSplit(_))));
        let spec = SplitSpec {
            source_valid_frac: 0.0,
            source_train_frac: 1.0,
            ..SplitSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn tiny_domain_is_rejected() {
        let ds = dataset(vec![(0, 0), (0, 1)], vec![(0, 0), (0, 1)]);
        assert!(matches!(
            split_dataset(&ds, &SplitSpec::default()),
            Err(CorpusError::TooFewInteractions(_))
        ));
    }
}
