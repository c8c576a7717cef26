use std::collections::{HashMap, HashSet};

use super::{CorpusError, Domain, RawInteraction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutput {
    pub a: Vec<RawInteraction>,
    pub b: Vec<RawInteraction>,
    /// Users present in both domains, in first-appearance order (A, then B).
    pub overlap_users: Vec<String>,
}

struct Side {
    users: Vec<usize>,
    items: Vec<usize>,
    n_items: usize,
    alive: Vec<bool>,
}

impl Side {
    fn user_degrees(&self, n_users: usize) -> Vec<usize> {
        let mut deg = vec![0; n_users];
        for (k, &u) in self.users.iter().enumerate() {
            if self.alive[k] {
                deg[u] += 1;
            }
        }
        deg
    }

    fn item_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_items];
        for (k, &i) in self.items.iter().enumerate() {
            if self.alive[k] {
                deg[i] += 1;
            }
        }
        deg
    }

    /// Drops every alive interaction matching `dead`; returns whether any was dropped.
    fn drop_where(&mut self, dead: impl Fn(usize) -> bool) -> bool {
        let mut changed = false;
        for k in 0..self.alive.len() {
            if self.alive[k] && dead(k) {
                self.alive[k] = false;
                changed = true;
            }
        }
        changed
    }

    /// Alternates user and item removal until every survivor has degree ≥ n.
    fn core(&mut self, n: usize, n_users: usize) -> bool {
        let mut any = false;
        loop {
            let ud = self.user_degrees(n_users);
            let users = self.users.clone();
            let dropped_users = self.drop_where(|k| ud[users[k]] < n);
            let id = self.item_degrees();
            let items = self.items.clone();
            let dropped_items = self.drop_where(|k| id[items[k]] < n);
            if !dropped_users && !dropped_items {
                return any;
            }
            any = true;
        }
    }
}

/// Iterative N-core sampling over a pair of domains.
///
/// Keeps users present in both domains, alternately removes users and items
/// with fewer than `n` interactions inside each domain until nothing changes,
/// then re-extracts the overlap users. The overlap/core cycle repeats until the
/// whole procedure is a fixed point, so applying the filter to its own output
/// returns it unchanged. Surviving rows keep their input order.
pub fn iterative_ncore_filter(
    inter_a: &[RawInteraction],
    inter_b: &[RawInteraction],
    n: usize,
) -> Result<FilterOutput, CorpusError> {
    if n == 0 {
        return Err(CorpusError::InvalidInput("n must be at least 1".into()));
    }
    let mut user_ids: HashMap<&str, usize> = HashMap::new();
    let mut sides = Vec::with_capacity(2);
    let mut kept_rows: Vec<Vec<&RawInteraction>> = Vec::with_capacity(2);
    for rows in [inter_a, inter_b] {
        let mut item_ids: HashMap<&str, usize> = HashMap::new();
        let mut seen: HashSet<(&str, &str)> = HashSet::new();
        let mut side = Side {
            users: Vec::new(),
            items: Vec::new(),
            n_items: 0,
            alive: Vec::new(),
        };
        let mut kept = Vec::new();
        for r in rows {
            if !seen.insert((r.user_key.as_str(), r.item_key.as_str())) {
                continue;
            }
            let next = user_ids.len();
            let u = *user_ids.entry(r.user_key.as_str()).or_insert(next);
            let next = item_ids.len();
            let i = *item_ids.entry(r.item_key.as_str()).or_insert(next);
            side.users.push(u);
            side.items.push(i);
            side.alive.push(true);
            kept.push(r);
        }
        side.n_items = item_ids.len();
        sides.push(side);
        kept_rows.push(kept);
    }
    let n_users = user_ids.len();

    loop {
        let da = sides[0].user_degrees(n_users);
        let db = sides[1].user_degrees(n_users);
        let in_both = |u: usize| da[u] > 0 && db[u] > 0;
        let mut changed = false;
        for side in sides.iter_mut() {
            let users = side.users.clone();
            changed |= side.drop_where(|k| !in_both(users[k]));
        }
        for side in sides.iter_mut() {
            changed |= side.core(n, n_users);
        }
        if !changed {
            break;
        }
    }

    let collect = |s: usize| -> Vec<RawInteraction> {
        kept_rows[s]
            .iter()
            .zip(&sides[s].alive)
            .filter(|(_, &alive)| alive)
            .map(|(r, _)| (*r).clone())
            .collect()
    };
    let (a, b) = (collect(0), collect(1));
    if a.is_empty() {
        return Err(CorpusError::ExhaustedDataset(Domain::A));
    }
    if b.is_empty() {
        return Err(CorpusError::ExhaustedDataset(Domain::B));
    }
    let mut seen = HashSet::new();
    let overlap_users = a
        .iter()
        .chain(&b)
        .filter(|r| seen.insert(r.user_key.as_str()))
        .map(|r| r.user_key.clone())
        .collect();
    Ok(FilterOutput {
        a,
        b,
        overlap_users,
    })
}
