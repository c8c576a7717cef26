use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{epoch_batches, Mode, Model, ModelError, TrainConfig};
use crate::corpus::{Domain, ProcessedDataset, Split};
use crate::diff::{AdamState, DiffError, Tape};
use crate::eval::{evaluate_split, Candidates, Metric};
use crate::Scalar;

/// Per-epoch means of the loss terms and the validation monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub rec: f64,
    pub en: f64,
    pub de: f64,
    pub item: f64,
    pub reg: f64,
    pub total: f64,
    pub valid_metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Stops once `patience` epochs pass without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> StopDecision {
        match self.best {
            Some((_, b)) if !(metric > b) => {}
            _ => {
                self.best = Some((epoch, metric));
                return StopDecision::Improved;
            }
        }
        let (best_epoch, _) = self.best.expect("set above");
        if epoch - best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Wait
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters of the best validation epoch.
    pub model: Model<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
}

pub fn train<T: Scalar>(
    ds: &ProcessedDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, ModelError> {
    train_with_observer(ds, cfg, |_, _| {})
}

/// Recall@`monitor_k` on the validation split of `domain`.
pub(crate) fn validation_metric<T: Scalar>(
    model: &Model<T>,
    ds: &ProcessedDataset,
    domain: Domain,
) -> Result<f64, ModelError> {
    let emb = model.embed_all()?;
    let e = &emb[domain.index()];
    let k = model.cfg.monitor_k;
    let m = evaluate_split(
        &e.user_fused,
        &e.item_fused,
        &ds.index(domain),
        Split::Valid,
        &[k],
        Candidates::Full,
    )?;
    Ok(m.get(Metric::Recall, k).expect("requested"))
}

/// Joint dual-domain training with early stopping on the target domain.
/// `observe` sees every epoch record together with the current parameters.
pub fn train_with_observer<T: Scalar, F: FnMut(&EpochRecord, &Model<T>)>(
    ds: &ProcessedDataset,
    cfg: &TrainConfig,
    mut observe: F,
) -> Result<TrainOutcome<T>, ModelError> {
    let mut model = Model::<T>::new(ds, cfg)?;
    let mut adam = AdamState::new(T::of(cfg.lr))?;
    let indices = [ds.index(Domain::A), ds.index(Domain::B)];
    let mut sampler = ChaCha8Rng::seed_from_u64(cfg.seed);
    sampler.set_stream(1);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_store = model.store.clone();
    let mut history = Vec::new();
    let mut step = 0u64;

    for epoch in 1..=cfg.max_epochs {
        let batches = epoch_batches(&indices, cfg.batch_size, &mut sampler)?;
        let mut sums = [0.0f64; 6];
        for batch in &batches {
            let mut tape = Tape::new();
            let (terms, b) = model.total_loss(&mut tape, batch, Mode::Train { step })?;
            if !b.total.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    reason: format!("loss is {} at step {step}", b.total),
                });
            }
            let grads = tape.backward(terms.total)?;
            grads.accumulate_into(&mut model.store);
            adam.step(&mut model.store).map_err(|e| match e {
                DiffError::NonFiniteGradient(p) => ModelError::Diverged {
                    epoch,
                    reason: format!("non-finite gradient for `{p}` at step {step}"),
                },
                other => other.into(),
            })?;
            step += 1;
            for (s, v) in sums
                .iter_mut()
                .zip([b.rec, b.en, b.de, b.item, b.reg, b.total])
            {
                *s += v;
            }
        }
        let n = batches.len().max(1) as f64;
        let valid_metric = validation_metric(&model, ds, cfg.target)?;
        let record = EpochRecord {
            epoch,
            rec: sums[0] / n,
            en: sums[1] / n,
            de: sums[2] / n,
            item: sums[3] / n,
            reg: sums[4] / n,
            total: sums[5] / n,
            valid_metric,
        };
        history.push(record);
        observe(&record, &model);
        match stopper.observe(epoch, valid_metric) {
            StopDecision::Improved => best_store = model.store.clone(),
            StopDecision::Wait => {}
            StopDecision::Stop => break,
        }
    }
    let (best_epoch, best_metric) = stopper.best().expect("at least one epoch");
    model.store = best_store;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_metric,
    })
}
