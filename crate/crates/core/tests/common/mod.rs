#![allow(dead_code)]

use dualrec::corpus::{Domain, ProcessedDataset, Split};
use dualrec::model::{sample_negative, JointBatch, Triplet, TripletBatch};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 8 users, 12 items per domain, every node connected, all pairs in train.
pub fn toy_dataset() -> ProcessedDataset {
    let pairs = |offset: usize, step: usize| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..8 {
            let mut items = vec![u % 12, (u + 8) % 12, (step * u + offset) % 12];
            items.sort_unstable();
            items.dedup();
            out.extend(items.into_iter().map(|i| (u, i)));
        }
        out
    };
    let a = pairs(3, 2);
    let b = pairs(5, 5);
    ProcessedDataset {
        users: (0..8).map(|u| format!("u{u}")).collect(),
        items: [
            (0..12).map(|i| format!("a{i}")).collect(),
            (0..12).map(|i| format!("b{i}")).collect(),
        ],
        splits: [vec![Split::Train; a.len()], vec![Split::Train; b.len()]],
        inter: [a, b],
        n_core: 1,
        target: Some(Domain::A),
    }
}

/// Every train pair once, with a seeded negative.
pub fn full_batch(ds: &ProcessedDataset, seed: u64) -> JointBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triplets = Domain::BOTH.map(|d| {
        let index = ds.index(d);
        let entries = ds
            .pairs(d, Split::Train)
            .into_iter()
            .map(|(user, pos)| Triplet {
                user,
                pos,
                neg: sample_negative(&index, user, &mut rng).unwrap(),
            })
            .collect();
        TripletBatch { domain: d, entries }
    });
    JointBatch {
        users: (0..ds.n_users()).collect(),
        triplets,
    }
}
