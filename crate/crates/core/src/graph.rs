//! Per-domain user-item bipartite graph over train interactions.

use thiserror::Error;

use crate::corpus::{Domain, ProcessedDataset, Split};
use crate::diff::SparseMatrix;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    User,
    Item,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("{kind:?} {id} has no train neighbours in domain {domain}")]
    IsolatedNode {
        kind: NodeKind,
        id: usize,
        domain: Domain,
    },
    #[error("dataset has no split labels for domain {0}")]
    Unsplit(Domain),
    #[error("edge ({0}, {1}) is out of range")]
    EdgeOutOfRange(usize, usize),
}

/// Neighbour lists sorted by id, with `1/√(|N_u|·|N_i|)` stored per edge on
/// both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub domain: Domain,
    user_neighbors: Vec<Vec<usize>>,
    item_neighbors: Vec<Vec<usize>>,
    user_norms: Vec<Vec<f64>>,
    item_norms: Vec<Vec<f64>>,
}

/// Graph over the train split of one domain.
pub fn build_graph(ds: &ProcessedDataset, domain: Domain) -> Result<BipartiteGraph, GraphError> {
    if ds.labels(domain).len() != ds.interactions(domain).len()
        || ds.interactions(domain).is_empty()
    {
        return Err(GraphError::Unsplit(domain));
    }
    BipartiteGraph::from_edges(
        domain,
        ds.n_users(),
        ds.n_items(domain),
        &ds.pairs(domain, Split::Train),
    )
}

impl BipartiteGraph {
    pub fn from_edges(
        domain: Domain,
        n_users: usize,
        n_items: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let g = Self::from_edges_allow_isolated(domain, n_users, n_items, edges)?;
        let isolated = |lists: &[Vec<usize>]| lists.iter().position(Vec::is_empty);
        if let Some(id) = isolated(&g.user_neighbors) {
            return Err(GraphError::IsolatedNode {
                kind: NodeKind::User,
                id,
                domain,
            });
        }
        if let Some(id) = isolated(&g.item_neighbors) {
            return Err(GraphError::IsolatedNode {
                kind: NodeKind::Item,
                id,
                domain,
            });
        }
        Ok(g)
    }

    /// Like [`from_edges`](Self::from_edges) but keeps zero-degree nodes,
    /// which propagation leaves unchanged at every layer.
    pub fn from_edges_allow_isolated(
        domain: Domain,
        n_users: usize,
        n_items: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let mut user_neighbors = vec![Vec::new(); n_users];
        let mut item_neighbors = vec![Vec::new(); n_items];
        for &(u, i) in edges {
            if u >= n_users || i >= n_items {
                return Err(GraphError::EdgeOutOfRange(u, i));
            }
            user_neighbors[u].push(i);
            item_neighbors[i].push(u);
        }
        for list in user_neighbors.iter_mut().chain(item_neighbors.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let coef = |a: usize, b: usize| 1.0 / ((a * b) as f64).sqrt();
        let user_norms = user_neighbors
            .iter()
            .map(|items| {
                items
                    .iter()
                    .map(|&i| coef(items.len(), item_neighbors[i].len()))
                    .collect()
            })
            .collect();
        let item_norms = item_neighbors
            .iter()
            .map(|users| {
                users
                    .iter()
                    .map(|&u| coef(user_neighbors[u].len(), users.len()))
                    .collect()
            })
            .collect();
        Ok(Self {
            domain,
            user_neighbors,
            item_neighbors,
            user_norms,
            item_norms,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_neighbors.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_neighbors.len()
    }

    pub fn n_edges(&self) -> usize {
        self.user_neighbors.iter().map(Vec::len).sum()
    }

    pub fn user_neighbors(&self, u: usize) -> &[usize] {
        &self.user_neighbors[u]
    }

    pub fn item_neighbors(&self, i: usize) -> &[usize] {
        &self.item_neighbors[i]
    }

    /// Coefficients aligned with [`Self::user_neighbors`].
    pub fn user_norms(&self, u: usize) -> &[f64] {
        &self.user_norms[u]
    }

    pub fn item_norms(&self, i: usize) -> &[f64] {
        &self.item_norms[i]
    }

    pub fn norm(&self, u: usize, i: usize) -> Option<f64> {
        let k = self.user_neighbors.get(u)?.binary_search(&i).ok()?;
        Some(self.user_norms[u][k])
    }

    /// Normalised `users × items` adjacency.
    pub fn adjacency<T: Scalar>(&self) -> SparseMatrix<T> {
        let triplets = self
            .user_neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, items)| {
                items
                    .iter()
                    .zip(&self.user_norms[u])
                    .map(move |(&i, &w)| (u, i, T::of(w)))
            });
        SparseMatrix::from_triplets(self.n_users(), self.n_items(), triplets)
            .expect("edges are in range")
    }
}
