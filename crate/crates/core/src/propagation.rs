//! Collaborative-filtering propagation over one domain's graph.
//!
//! One layer maps `(E_u, E_i)` to
//!
//! ```text
//! E_u' = E_u + A·E_i + (A·E_i) ⊙ E_u
//! E_i' = E_i + Aᵀ·E_u + (Aᵀ·E_u) ⊙ E_i
//! ```
//!
//! where `A` is the normalised adjacency. The interaction term
//! `Σ_i w_ui (e_i ⊙ e_u)` factors as `e_u ⊙ Σ_i w_ui e_i`, so one sparse
//! product per side suffices.

use crate::diff::{DiffError, SparseMatrix, Tape, Var};
use crate::graph::BipartiteGraph;
use crate::Scalar;

/// Normalised adjacency in both orientations.
#[derive(Debug, Clone)]
pub struct Propagator<T> {
    user_to_item: SparseMatrix<T>,
    item_to_user: SparseMatrix<T>,
}

/// Concatenated layer outputs, width `d·(H+1)`.
#[derive(Debug, Clone, Copy)]
pub struct GnnEmbedding {
    pub users: Var,
    pub items: Var,
}

impl<T: Scalar> Propagator<T> {
    pub fn new(graph: &BipartiteGraph) -> Self {
        let adj = graph.adjacency::<T>();
        Self {
            item_to_user: adj.transpose(),
            user_to_item: adj,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_to_item.shape().0
    }

    pub fn n_items(&self) -> usize {
        self.user_to_item.shape().1
    }

    pub fn propagate_layer(
        &self,
        tape: &mut Tape<T>,
        eu: Var,
        ei: Var,
    ) -> Result<(Var, Var), DiffError> {
        let from_items = tape.spmm(&self.user_to_item, ei)?;
        let from_users = tape.spmm(&self.item_to_user, eu)?;
        let u_inter = tape.mul(from_items, eu)?;
        let i_inter = tape.mul(from_users, ei)?;
        let u_next = tape.add(eu, from_items)?;
        let u_next = tape.add(u_next, u_inter)?;
        let i_next = tape.add(ei, from_users)?;
        let i_next = tape.add(i_next, i_inter)?;
        Ok((u_next, i_next))
    }

    pub fn multi_layer_embed(
        &self,
        tape: &mut Tape<T>,
        eu: Var,
        ei: Var,
        layers: usize,
    ) -> Result<GnnEmbedding, DiffError> {
        let mut users = vec![eu];
        let mut items = vec![ei];
        for _ in 0..layers {
            let (u, i) =
                self.propagate_layer(tape, *users.last().unwrap(), *items.last().unwrap())?;
            users.push(u);
            items.push(i);
        }
        if layers == 0 {
            return Ok(GnnEmbedding {
                users: eu,
                items: ei,
            });
        }
        Ok(GnnEmbedding {
            users: tape.concat_cols(&users)?,
            items: tape.concat_cols(&items)?,
        })
    }
}
