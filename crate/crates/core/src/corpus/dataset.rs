use std::collections::HashMap;

use super::{CorpusError, Domain, FilterOutput, Split};

/// Dual-domain interactions over dense ids, with optional split labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedDataset {
    /// Dense user id → key. Users are shared by both domains.
    pub users: Vec<String>,
    /// Dense item id → key, per domain.
    pub items: [Vec<String>; 2],
    /// `(user_id, item_id)` pairs per domain.
    pub inter: [Vec<(usize, usize)>; 2],
    /// One label per interaction, or empty before splitting.
    pub splits: [Vec<Split>; 2],
    pub n_core: usize,
    /// Domain that received the three-way split.
    pub target: Option<Domain>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    /// `1 − interactions / (users · items)`.
    pub sparsity: f64,
}

impl ProcessedDataset {
    /// Assigns dense ids in first-appearance order.
    pub fn from_filtered(f: &FilterOutput, n_core: usize) -> Self {
        let user_id: HashMap<&str, usize> = f
            .overlap_users
            .iter()
            .enumerate()
            .map(|(k, u)| (u.as_str(), k))
            .collect();
        let mut items: [Vec<String>; 2] = Default::default();
        let mut inter: [Vec<(usize, usize)>; 2] = Default::default();
        for (d, rows) in [(Domain::A, &f.a), (Domain::B, &f.b)] {
            let mut item_id: HashMap<&str, usize> = HashMap::new();
            for r in rows.iter() {
                let next = item_id.len();
                let i = *item_id.entry(r.item_key.as_str()).or_insert_with(|| {
                    items[d.index()].push(r.item_key.clone());
                    next
                });
                inter[d.index()].push((user_id[r.user_key.as_str()], i));
            }
        }
        Self {
            users: f.overlap_users.clone(),
            items,
            inter,
            splits: Default::default(),
            n_core,
            target: None,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self, d: Domain) -> usize {
        self.items[d.index()].len()
    }

    pub fn interactions(&self, d: Domain) -> &[(usize, usize)] {
        &self.inter[d.index()]
    }

    pub fn labels(&self, d: Domain) -> &[Split] {
        &self.splits[d.index()]
    }

    pub fn is_split(&self) -> bool {
        Domain::BOTH.iter().all(|&d| {
            !self.inter[d.index()].is_empty()
                && self.splits[d.index()].len() == self.inter[d.index()].len()
        })
    }

    /// Interactions of one split.
    pub fn pairs(&self, d: Domain, split: Split) -> Vec<(usize, usize)> {
        self.inter[d.index()]
            .iter()
            .zip(&self.splits[d.index()])
            .filter(|(_, &s)| s == split)
            .map(|(&p, _)| p)
            .collect()
    }

    pub fn index(&self, d: Domain) -> DomainIndex {
        DomainIndex::new(self, d)
    }

    pub fn stats(&self, d: Domain) -> DatasetStats {
        let users = self.inter[d.index()]
            .iter()
            .map(|p| p.0)
            .collect::<std::collections::HashSet<_>>()
            .len();
        let items = self.n_items(d);
        let interactions = self.inter[d.index()].len();
        let cells = users as f64 * items as f64;
        DatasetStats {
            users,
            items,
            interactions,
            sparsity: if cells > 0.0 {
                1.0 - interactions as f64 / cells
            } else {
                1.0
            },
        }
    }

    /// Checks the structural invariants: full user overlap, minimum degree
    /// `n_core`, no duplicate pairs, and labels covering every interaction.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidInput(m));
        for d in Domain::BOTH {
            let mut user_deg = vec![0usize; self.n_users()];
            let mut item_deg = vec![0usize; self.n_items(d)];
            let mut seen = std::collections::HashSet::new();
            for &(u, i) in &self.inter[d.index()] {
                if u >= self.n_users() || i >= self.n_items(d) {
                    return bad(format!("id out of range in domain {d}"));
                }
                if !seen.insert((u, i)) {
                    return bad(format!("duplicate pair ({u}, {i}) in domain {d}"));
                }
                user_deg[u] += 1;
                item_deg[i] += 1;
            }
            if let Some(u) = user_deg.iter().position(|&k| k < self.n_core.max(1)) {
                return bad(format!(
                    "user {u} has degree {} < {} in domain {d}",
                    user_deg[u], self.n_core
                ));
            }
            if let Some(i) = item_deg.iter().position(|&k| k < self.n_core.max(1)) {
                return bad(format!(
                    "item {i} has degree {} < {} in domain {d}",
                    item_deg[i], self.n_core
                ));
            }
            let labels = &self.splits[d.index()];
            if !labels.is_empty() && labels.len() != self.inter[d.index()].len() {
                return bad(format!("split labels do not cover domain {d}"));
            }
        }
        Ok(())
    }
}

/// Per-user item lists of one domain, sorted ascending.
#[derive(Debug, Clone)]
pub struct DomainIndex {
    pub domain: Domain,
    pub n_items: usize,
    all: Vec<Vec<usize>>,
    by_split: [Vec<Vec<usize>>; 3],
}

fn slot(s: Split) -> usize {
    match s {
        Split::Train => 0,
        Split::Valid => 1,
        Split::Test => 2,
    }
}

impl DomainIndex {
    fn new(ds: &ProcessedDataset, d: Domain) -> Self {
        let n = ds.n_users();
        let mut all = vec![Vec::new(); n];
        let mut by_split: [Vec<Vec<usize>>; 3] = [
            vec![Vec::new(); n],
            vec![Vec::new(); n],
            vec![Vec::new(); n],
        ];
        let labels = &ds.splits[d.index()];
        for (k, &(u, i)) in ds.inter[d.index()].iter().enumerate() {
            all[u].push(i);
            if let Some(&s) = labels.get(k) {
                by_split[slot(s)][u].push(i);
            }
        }
        all.iter_mut().for_each(|v| v.sort_unstable());
        for lists in by_split.iter_mut() {
            lists.iter_mut().for_each(|v| v.sort_unstable());
        }
        Self {
            domain: d,
            n_items: ds.n_items(d),
            all,
            by_split,
        }
    }

    pub fn n_users(&self) -> usize {
        self.all.len()
    }

    /// Every item of the user across all splits.
    pub fn all_items(&self, user: usize) -> &[usize] {
        &self.all[user]
    }

    pub fn items(&self, user: usize, split: Split) -> &[usize] {
        &self.by_split[slot(split)][user]
    }

    pub fn has_interaction(&self, user: usize, item: usize) -> bool {
        self.all[user].binary_search(&item).is_ok()
    }
}
