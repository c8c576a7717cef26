use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::corpus::{Domain, DomainIndex, ProcessedDataset, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletBatch {
    pub domain: Domain,
    pub entries: Vec<Triplet>,
}

/// One training step: a set of users shared by both domains and the
/// triplets drawn for them in each domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointBatch {
    /// Distinct users in first-appearance order.
    pub users: Vec<usize>,
    pub triplets: [TripletBatch; 2],
}

/// One item drawn uniformly from those `user` never interacted with in any split.
pub fn sample_negative<R: Rng + ?Sized>(
    index: &DomainIndex,
    user: usize,
    rng: &mut R,
) -> Result<usize, ModelError> {
    let seen = index.all_items(user);
    let n = index.n_items;
    if seen.len() >= n {
        return Err(ModelError::NoNegativeAvailable {
            user,
            domain: index.domain,
        });
    }
    if 2 * seen.len() > n {
        // Dense user: draw from the explicit complement.
        let k = rng.random_range(0..n - seen.len());
        let mut skipped = 0;
        for i in 0..n {
            if seen.binary_search(&i).is_ok() {
                continue;
            }
            if skipped == k {
                return Ok(i);
            }
            skipped += 1;
        }
        unreachable!("complement has n - |seen| items");
    }
    loop {
        let i = rng.random_range(0..n);
        if seen.binary_search(&i).is_err() {
            return Ok(i);
        }
    }
}

/// One negative per entry of `users`, deterministic per seed.
pub fn sample_negatives(
    ds: &ProcessedDataset,
    domain: Domain,
    users: &[usize],
    seed: u64,
) -> Result<Vec<usize>, ModelError> {
    let index = ds.index(domain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    users
        .iter()
        .map(|&u| sample_negative(&index, u, &mut rng))
        .collect()
}

/// Mini-batches of one epoch.
///
/// Each user appears `max(|train_A(u)|, |train_B(u)|)` times in a shuffled
/// entry list. Every entry pops one not-yet-used train positive per domain,
/// so each train interaction is visited exactly once per epoch; a user whose
/// positives in one domain are exhausted only contributes to the other.
pub fn epoch_batches<R: Rng + ?Sized>(
    indices: &[DomainIndex; 2],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<JointBatch>, ModelError> {
    let n_users = indices[0].n_users();
    let mut queues: [Vec<Vec<usize>>; 2] = Default::default();
    for (k, index) in indices.iter().enumerate() {
        queues[k] = (0..n_users)
            .map(|u| index.items(u, Split::Train).to_vec())
            .collect();
    }
    let mut entries = Vec::new();
    for u in 0..n_users {
        let reps = queues[0][u].len().max(queues[1][u].len());
        entries.extend(std::iter::repeat_n(u, reps));
    }
    entries.shuffle(rng);
    for q in queues.iter_mut() {
        for items in q.iter_mut() {
            items.shuffle(rng);
        }
    }

    let mut batches = Vec::with_capacity(entries.len().div_ceil(batch_size.max(1)));
    for chunk in entries.chunks(batch_size.max(1)) {
        let mut seen = HashSet::new();
        let users: Vec<usize> = chunk.iter().copied().filter(|u| seen.insert(*u)).collect();
        let mut triplets = [
            TripletBatch {
                domain: Domain::A,
                entries: Vec::new(),
            },
            TripletBatch {
                domain: Domain::B,
                entries: Vec::new(),
            },
        ];
        for &u in chunk {
            for (k, index) in indices.iter().enumerate() {
                if let Some(pos) = queues[k][u].pop() {
                    let neg = sample_negative(index, u, rng)?;
                    triplets[k].entries.push(Triplet { user: u, pos, neg });
                }
            }
        }
        batches.push(JointBatch { users, triplets });
    }
    Ok(batches)
}
