//! Anchor-based contrastive decoder.
//!
//! The mapping network of one domain carries that domain's user features
//! into the other: `Φ_B` turns `e^{·,B}` into `ê^{·,A}`, which are then
//! ordered against the anchor `e^{g,A}` as `ê^c ≻ ê^g ≻ ê^s`.

use crate::diff::{DiffError, Matrix, ParameterStore, Tape, Var};
use crate::encoder::{DisentangledFeatures, Dropout, GateNetwork};
use crate::Scalar;

/// Transformed user features landing in one domain.
#[derive(Debug, Clone, Copy)]
pub struct TransformedFeatures {
    pub shared: Var,
    pub gnn: Var,
    pub specific: Var,
}

/// `e ⊙ MLP(e; Φ)`.
pub fn map_transfer<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParameterStore<T>,
    e: Var,
    phi: &GateNetwork,
    dropout: Option<Dropout<'_>>,
) -> Result<Var, DiffError> {
    phi.gate(tape, store, e, dropout)
}

/// Passes the source domain's `e^g`, `e^c`, `e^s` through the source
/// domain's mapping network.
pub fn transform_features<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParameterStore<T>,
    source_gnn: Var,
    source: &DisentangledFeatures,
    phi: &GateNetwork,
    dropout: [Option<Dropout<'_>>; 3],
) -> Result<TransformedFeatures, DiffError> {
    let [dc, dg, ds] = dropout;
    Ok(TransformedFeatures {
        shared: map_transfer(tape, store, source.shared, phi, dc)?,
        gnn: map_transfer(tape, store, source_gnn, phi, dg)?,
        specific: map_transfer(tape, store, source.specific, phi, ds)?,
    })
}

/// Mean over rows of `−log( e^{f(a,p)/τ} / (e^{f(a,p)/τ} + e^{f(a,n)/τ}) )`
/// with `f` the inner product.
pub fn pairwise_contrastive<T: Scalar>(
    tape: &mut Tape<T>,
    anchor: Var,
    pos: Var,
    neg: Var,
    tau: T,
) -> Result<Var, DiffError> {
    if !(tau > T::zero()) {
        return Err(DiffError::NonFiniteParameter(format!("temperature {tau}")));
    }
    let fp = tape.row_dot(anchor, pos)?;
    let fn_ = tape.row_dot(anchor, neg)?;
    // Equal to ln(1 + e^{(f(a,n) − f(a,p))/τ}), kept in that form so a wide
    // gap does not cancel to zero.
    let diff = tape.sub(fn_, fp)?;
    let diff = tape.scale(diff, T::one() / tau);
    let zeros = tape.constant(Matrix::zeros(tape.value(diff).rows(), 1));
    let logits = tape.concat_cols(&[zeros, diff])?;
    let per_row = tape.logsumexp_rows(logits);
    Ok(tape.mean(per_row))
}

/// `(L_{c→g}, L_{g→s})` for one anchor domain.
pub fn decoder_terms<T: Scalar>(
    tape: &mut Tape<T>,
    anchor: Var,
    t: &TransformedFeatures,
    tau: T,
) -> Result<(Var, Var), DiffError> {
    let cg = pairwise_contrastive(tape, anchor, t.shared, t.gnn, tau)?;
    let gs = pairwise_contrastive(tape, anchor, t.gnn, t.specific, tau)?;
    Ok((cg, gs))
}

/// Sum of the four hierarchical terms over both anchor domains.
pub fn decoder_loss<T: Scalar>(
    tape: &mut Tape<T>,
    anchor_a: Var,
    anchor_b: Var,
    into_a: &TransformedFeatures,
    into_b: &TransformedFeatures,
    tau: T,
) -> Result<Var, DiffError> {
    let (a1, a2) = decoder_terms(tape, anchor_a, into_a, tau)?;
    let (b1, b2) = decoder_terms(tape, anchor_b, into_b, tau)?;
    let s = tape.add(a1, a2)?;
    let s = tape.add(s, b1)?;
    tape.add(s, b2)
}
