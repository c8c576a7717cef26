//! Top-K ranking evaluation: candidate ranking with deterministic ties,
//! Recall/HR/MRR/NDCG, and mean/std aggregation across seeds.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Domain, DomainIndex, Split};
use crate::diff::Matrix;
use crate::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("user {0} has no held-out items")]
    NoTestItems(usize),
    #[error("relevant set is empty")]
    EmptyRelevantSet,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("no user of domain {domain} has {split} items")]
    NoEvaluableUsers { domain: Domain, split: Split },
    #[error("score table shapes {users:?} and {items:?} do not match")]
    ShapeMismatch {
        users: (usize, usize),
        items: (usize, usize),
    },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("cannot evaluate the train split")]
    TrainSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Recall,
    Hr,
    Mrr,
    Ndcg,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Recall, Metric::Hr, Metric::Mrr, Metric::Ndcg];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Hr => "hr",
            Metric::Mrr => "mrr",
            Metric::Ndcg => "ndcg",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "recall" => Ok(Metric::Recall),
            "hr" | "hit" => Ok(Metric::Hr),
            "mrr" => Ok(Metric::Mrr),
            "ndcg" => Ok(Metric::Ndcg),
            other => Err(EvalError::UnknownMetric(other.into())),
        }
    }
}

/// Candidate set for each ranked user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Candidates {
    /// Every item except the user's excluded ones.
    #[default]
    Full,
    /// The relevant items plus `size` uniformly drawn non-interacted items.
    Sampled { size: usize, seed: u64 },
}

/// Items in descending score order, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub user: usize,
    pub items: Vec<usize>,
    /// Sorted ascending.
    pub relevant: Vec<usize>,
}

impl RankedList {
    pub fn is_relevant(&self, item: usize) -> bool {
        self.relevant.binary_search(&item).is_ok()
    }

    /// 1-based ranks of relevant items within the first `k` positions.
    fn hit_ranks(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.items
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, &i)| self.is_relevant(i))
            .map(|(r, _)| r + 1)
    }
}

fn by_score(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Sorts `candidates` by descending score with ascending-id tie-break.
pub fn rank_items(
    user: usize,
    scores: &[f64],
    mut candidates: Vec<usize>,
    relevant: &[usize],
) -> RankedList {
    candidates.sort_unstable_by(by_score(scores));
    let mut relevant = relevant.to_vec();
    relevant.sort_unstable();
    relevant.dedup();
    RankedList {
        user,
        items: candidates,
        relevant,
    }
}

/// Items held out for `split` and the items excluded from its ranking:
/// validation excludes train items, test excludes train and validation items.
fn held_out<'a>(
    index: &'a DomainIndex,
    user: usize,
    split: Split,
) -> Result<(&'a [usize], Vec<usize>), EvalError> {
    let excluded = match split {
        Split::Train => return Err(EvalError::TrainSplit),
        Split::Valid => index.items(user, Split::Train).to_vec(),
        Split::Test => {
            let mut e = index.items(user, Split::Train).to_vec();
            e.extend_from_slice(index.items(user, Split::Valid));
            e.sort_unstable();
            e
        }
    };
    Ok((index.items(user, split), excluded))
}

fn candidate_items(
    index: &DomainIndex,
    user: usize,
    relevant: &[usize],
    excluded: &[usize],
    protocol: Candidates,
) -> Vec<usize> {
    match protocol {
        Candidates::Full => (0..index.n_items)
            .filter(|i| excluded.binary_search(i).is_err())
            .collect(),
        Candidates::Sampled { size, seed } => {
            let pool: Vec<usize> = (0..index.n_items)
                .filter(|&i| !index.has_interaction(user, i))
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(user as u64);
            let take = size.min(pool.len());
            let mut out: Vec<usize> = sample(&mut rng, pool.len(), take)
                .into_iter()
                .map(|k| pool[k])
                .collect();
            out.extend_from_slice(relevant);
            out
        }
    }
}

/// Ranks the candidates of `user` for `split` under `protocol`.
pub fn rank_candidates(
    scores: &[f64],
    index: &DomainIndex,
    user: usize,
    split: Split,
    protocol: Candidates,
) -> Result<RankedList, EvalError> {
    let (relevant, excluded) = held_out(index, user, split)?;
    if relevant.is_empty() {
        return Err(EvalError::NoTestItems(user));
    }
    let cands = candidate_items(index, user, relevant, &excluded, protocol);
    Ok(rank_items(user, scores, cands, relevant))
}

fn check(r: &RankedList, k: usize) -> Result<(), EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if r.relevant.is_empty() {
        return Err(EvalError::EmptyRelevantSet);
    }
    Ok(())
}

pub fn recall_at_k(r: &RankedList, k: usize) -> Result<f64, EvalError> {
    check(r, k)?;
    Ok(r.hit_ranks(k).count() as f64 / r.relevant.len() as f64)
}

pub fn hr_at_k(r: &RankedList, k: usize) -> Result<f64, EvalError> {
    check(r, k)?;
    Ok(if r.hit_ranks(k).next().is_some() {
        1.0
    } else {
        0.0
    })
}

pub fn mrr_at_k(r: &RankedList, k: usize) -> Result<f64, EvalError> {
    check(r, k)?;
    Ok(r.hit_ranks(k).next().map_or(0.0, |rank| 1.0 / rank as f64))
}

/// Binary gain, discount `1/log₂(rank+1)`.
pub fn ndcg_at_k(r: &RankedList, k: usize) -> Result<f64, EvalError> {
    check(r, k)?;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = r.hit_ranks(k).map(discount).sum();
    let idcg: f64 = (1..=r.relevant.len().min(k)).map(discount).sum();
    Ok(dcg / idcg)
}

pub fn metric_at_k(metric: Metric, r: &RankedList, k: usize) -> Result<f64, EvalError> {
    match metric {
        Metric::Recall => recall_at_k(r, k),
        Metric::Hr => hr_at_k(r, k),
        Metric::Mrr => mrr_at_k(r, k),
        Metric::Ndcg => ndcg_at_k(r, k),
    }
}

/// Metrics averaged over the users that have held-out items.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitMetrics {
    pub values: BTreeMap<(Metric, usize), f64>,
    pub users: usize,
}

impl SplitMetrics {
    pub fn get(&self, metric: Metric, k: usize) -> Option<f64> {
        self.values.get(&(metric, k)).copied()
    }
}

/// Scores every user against every item with the inner product and averages
/// the four metrics at each `k` over users with held-out items in `split`.
///
/// Only the top `max(ks)` positions are materialised; the comparator is a
/// total order, so the result equals a full sort.
pub fn evaluate_split<T: Scalar>(
    users: &Matrix<T>,
    items: &Matrix<T>,
    index: &DomainIndex,
    split: Split,
    ks: &[usize],
    protocol: Candidates,
) -> Result<SplitMetrics, EvalError> {
    if users.cols() != items.cols()
        || users.rows() != index.n_users()
        || items.rows() != index.n_items
    {
        return Err(EvalError::ShapeMismatch {
            users: users.shape(),
            items: items.shape(),
        });
    }
    if ks.contains(&0) || ks.is_empty() {
        return Err(EvalError::InvalidK);
    }
    let k_max = *ks.iter().max().expect("non-empty");
    let mut sums: BTreeMap<(Metric, usize), f64> = BTreeMap::new();
    let mut n_users = 0;
    let mut scores = vec![0.0; index.n_items];
    for u in 0..index.n_users() {
        let (relevant, excluded) = held_out(index, u, split)?;
        if relevant.is_empty() {
            continue;
        }
        let row = users.row(u);
        for (i, s) in scores.iter_mut().enumerate() {
            *s = row
                .iter()
                .zip(items.row(i))
                .map(|(&a, &b)| a * b)
                .sum::<T>()
                .as_f64();
        }
        let mut cands = candidate_items(index, u, relevant, &excluded, protocol);
        let cmp = by_score(&scores);
        if cands.len() > k_max {
            cands.select_nth_unstable_by(k_max, &cmp);
            cands.truncate(k_max);
        }
        cands.sort_unstable_by(&cmp);
        let ranked = RankedList {
            user: u,
            items: cands,
            relevant: relevant.to_vec(),
        };
        for &k in ks {
            for m in Metric::ALL {
                *sums.entry((m, k)).or_default() += metric_at_k(m, &ranked, k)?;
            }
        }
        n_users += 1;
    }
    if n_users == 0 {
        return Err(EvalError::NoEvaluableUsers {
            domain: index.domain,
            split,
        });
    }
    let values = sums
        .into_iter()
        .map(|(key, s)| (key, s / n_users as f64))
        .collect();
    Ok(SplitMetrics {
        values,
        users: n_users,
    })
}

/// Per-seed metrics of one domain with cross-seed aggregates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub domain: Option<Domain>,
    pub per_seed: Vec<(u64, SplitMetrics)>,
}

impl MetricsReport {
    pub fn new(domain: Domain) -> Self {
        Self {
            domain: Some(domain),
            per_seed: Vec::new(),
        }
    }

    pub fn push(&mut self, seed: u64, m: SplitMetrics) {
        self.per_seed.push((seed, m));
    }

    pub fn keys(&self) -> Vec<(Metric, usize)> {
        let mut keys: Vec<_> = self
            .per_seed
            .iter()
            .flat_map(|(_, m)| m.values.keys().copied())
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    fn samples(&self, metric: Metric, k: usize) -> Vec<f64> {
        self.per_seed
            .iter()
            .filter_map(|(_, m)| m.get(metric, k))
            .collect()
    }

    pub fn mean(&self, metric: Metric, k: usize) -> Option<f64> {
        let s = self.samples(metric, k);
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }

    /// Sample standard deviation (`n − 1` denominator); `0` for one seed.
    pub fn std(&self, metric: Metric, k: usize) -> Option<f64> {
        let s = self.samples(metric, k);
        let mean = self.mean(metric, k)?;
        if s.len() < 2 {
            return Some(0.0);
        }
        let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (s.len() - 1) as f64;
        Some(var.sqrt())
    }
}
