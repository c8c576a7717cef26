use std::collections::HashMap;

use super::{JointBatch, Mode, Model, ModelError};
use crate::corpus::Domain;
use crate::decoder::{decoder_loss, pairwise_contrastive};
use crate::diff::{l2_penalty, DiffError, Matrix, Tape, Var};
use crate::encoder::encoder_loss;
use crate::Scalar;

/// Inner product of two fused embeddings.
pub fn predict_score<T: Scalar>(user: &[T], item: &[T]) -> Result<T, DiffError> {
    if user.len() != item.len() {
        return Err(DiffError::ShapeMismatch {
            op: "predict_score",
            left: (1, user.len()),
            right: (1, item.len()),
        });
    }
    Ok(user.iter().zip(item).map(|(&a, &b)| a * b).sum())
}

/// Mean of `−ln σ(r⁺ − r⁻)` over aligned `n×1` score columns, evaluated as
/// `logsumexp(0, r⁻ − r⁺)`.
pub fn bpr_loss<T: Scalar>(tape: &mut Tape<T>, pos: Var, neg: Var) -> Result<Var, DiffError> {
    let diff = tape.sub(neg, pos)?;
    let zeros = tape.constant(Matrix::zeros(tape.value(diff).rows(), 1));
    let logits = tape.concat_cols(&[zeros, diff])?;
    let per_row = tape.logsumexp_rows(logits);
    Ok(tape.mean(per_row))
}

/// Scalar values of every objective term for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub rec: f64,
    pub en: f64,
    pub de: f64,
    pub item: f64,
    /// Already multiplied by `lambda_reg`.
    pub reg: f64,
    pub total: f64,
    pub lambda_en: f64,
    pub lambda_de: f64,
    pub lambda_item: f64,
    pub lambda_reg: f64,
}

impl LossBreakdown {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rec: f64,
        en: f64,
        de: f64,
        item: f64,
        reg: f64,
        lambda_en: f64,
        lambda_de: f64,
        lambda_item: f64,
        lambda_reg: f64,
    ) -> Self {
        let mut b = Self {
            rec,
            en,
            de,
            item,
            reg,
            total: 0.0,
            lambda_en,
            lambda_de,
            lambda_item,
            lambda_reg,
        };
        b.total = b.recomputed_total();
        b
    }

    /// `rec + λ_en·en + λ_de·de + λ_item·item + reg`.
    pub fn recomputed_total(&self) -> f64 {
        self.rec
            + self.lambda_en * self.en
            + self.lambda_de * self.de
            + self.lambda_item * self.item
            + self.reg
    }
}

/// Tape handles of the objective terms. Ablated terms are `None`.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub rec: Var,
    pub en: Option<Var>,
    pub de: Option<Var>,
    pub item: Option<Var>,
    pub reg: Var,
    pub total: Var,
}

impl<T: Scalar> Model<T> {
    /// Builds the full objective for one joint batch.
    pub fn total_loss(
        &self,
        tape: &mut Tape<T>,
        batch: &JointBatch,
        mode: Mode,
    ) -> Result<(LossTerms, LossBreakdown), ModelError> {
        let slot: HashMap<usize, usize> = batch
            .users
            .iter()
            .enumerate()
            .map(|(k, &u)| (u, k))
            .collect();
        let mut item_rows: [Vec<usize>; 2] = Default::default();
        let mut user_slots: [Vec<usize>; 2] = Default::default();
        for d in Domain::BOTH {
            let entries = &batch.triplets[d.index()].entries;
            item_rows[d.index()] = entries
                .iter()
                .map(|t| t.pos)
                .chain(entries.iter().map(|t| t.neg))
                .collect();
            user_slots[d.index()] = entries
                .iter()
                .map(|t| {
                    slot.get(&t.user).copied().ok_or_else(|| {
                        ModelError::InvalidConfig(format!(
                            "triplet user {} is not in the batch",
                            t.user
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        let bundles = self.forward(tape, &batch.users, [&item_rows[0], &item_rows[1]], mode)?;
        let cfg = &self.cfg;
        let tau = T::of(cfg.tau);

        let mut rec = tape.constant(Matrix::scalar(T::zero()));
        let mut item = None;
        for d in Domain::BOTH {
            let k = d.index();
            let n = user_slots[k].len();
            if n == 0 {
                continue;
            }
            let b = &bundles[k];
            let users = tape.gather_rows(b.user_fused, &user_slots[k])?;
            let pos_idx: Vec<usize> = (0..n).collect();
            let neg_idx: Vec<usize> = (n..2 * n).collect();
            let pos_items = tape.gather_rows(b.item_fused, &pos_idx)?;
            let neg_items = tape.gather_rows(b.item_fused, &neg_idx)?;
            let pos = tape.row_dot(users, pos_items)?;
            let neg = tape.row_dot(users, neg_items)?;
            let r = bpr_loss(tape, pos, neg)?;
            rec = tape.add(rec, r)?;

            if cfg.ablation.uses_item_loss() {
                let own = bundles[k].user_feats.expect("disentangled").specific;
                let other = bundles[d.other().index()]
                    .user_feats
                    .expect("disentangled")
                    .specific;
                let own = tape.gather_rows(own, &user_slots[k])?;
                let other = tape.gather_rows(other, &user_slots[k])?;
                let l = pairwise_contrastive(tape, pos_items, own, other, tau)?;
                item = Some(match item {
                    Some(acc) => tape.add(acc, l)?,
                    None => l,
                });
            }
        }

        let en = if cfg.ablation.uses_encoder_loss() {
            let fa = bundles[0].user_feats.expect("disentangled");
            let fb = bundles[1].user_feats.expect("disentangled");
            Some(encoder_loss(tape, &fa, &fb)?)
        } else {
            None
        };

        let de = match (
            self.transform(tape, &bundles[1], mode)?,
            self.transform(tape, &bundles[0], mode)?,
        ) {
            (Some(into_a), Some(into_b)) => Some(decoder_loss(
                tape,
                bundles[0].user_g,
                bundles[1].user_g,
                &into_a,
                &into_b,
                tau,
            )?),
            _ => None,
        };

        let reg = l2_penalty(tape, &self.store, T::of(cfg.l2))?;
        let mut total = tape.add(rec, reg)?;
        for (term, lambda) in [
            (en, cfg.lambda_en),
            (de, cfg.lambda_de),
            (item, cfg.lambda_item),
        ] {
            if let Some(v) = term {
                let w = tape.scale(v, T::of(lambda));
                total = tape.add(total, w)?;
            }
        }

        let val = |v: Option<Var>| v.map_or(0.0, |v| tape.scalar(v).as_f64());
        let mut breakdown = LossBreakdown::new(
            tape.scalar(rec).as_f64(),
            val(en),
            val(de),
            val(item),
            tape.scalar(reg).as_f64(),
            cfg.lambda_en,
            cfg.lambda_de,
            cfg.lambda_item,
            cfg.l2,
        );
        breakdown.total = tape.scalar(total).as_f64();
        Ok((
            LossTerms {
                rec,
                en,
                de,
                item,
                reg,
                total,
            },
            breakdown,
        ))
    }
}
