use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DiffError, ParamId, ParameterStore, Tape, Var};
use crate::Scalar;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Number of parameter entries to check; all of them when the store is smaller.
    pub samples: usize,
    pub seed: u64,
    /// Lower bound on the relative-error denominator, so entries whose true
    /// gradient is ~0 are judged by absolute error.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            samples: 200,
            seed: 0,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
}

/// Compares reverse-mode gradients of `loss` against central finite
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε` on a sample of parameter entries.
///
/// `loss` must build the same deterministic scalar on every call.
pub fn grad_check<T, E, F>(
    store: &mut ParameterStore<T>,
    cfg: &GradCheckConfig,
    mut loss: F,
) -> Result<GradCheckReport, E>
where
    T: Scalar,
    E: From<DiffError>,
    F: FnMut(&mut Tape<T>, &ParameterStore<T>) -> Result<Var, E>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let root = loss(&mut tape, store)?;
    tape.backward(root)?.accumulate_into(store);
    let analytic: Vec<_> = store.iter().map(|p| p.grad.clone()).collect();
    store.zero_grad();

    let mut entries: Vec<(ParamId, usize)> = Vec::new();
    for id in store.ids() {
        entries.extend((0..store.value(id).len()).map(|i| (id, i)));
    }
    let chosen: Vec<(ParamId, usize)> = if entries.len() <= cfg.samples {
        entries
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut picked = rand::seq::index::sample(&mut rng, entries.len(), cfg.samples).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|k| entries[k]).collect()
    };

    let mut eval = |store: &ParameterStore<T>| -> Result<f64, E> {
        let mut tape = Tape::new();
        let root = loss(&mut tape, store)?;
        Ok(tape.scalar(root).as_f64())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: None,
    };
    for (id, i) in chosen {
        let original = store.value(id).data()[i];
        store.value_mut(id).data_mut()[i] = T::of(original.as_f64() + cfg.eps);
        let plus = eval(store)?;
        store.value_mut(id).data_mut()[i] = T::of(original.as_f64() - cfg.eps);
        let minus = eval(store);
        store.value_mut(id).data_mut()[i] = original;
        let numeric = (plus - minus?) / (2.0 * cfg.eps);
        let a = analytic[id.index()].data()[i].as_f64();
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = rel.max(report.max_rel_error);
            report.worst = Some((store.name(id).to_string(), i));
        }
        report.checked += 1;
    }
    Ok(report)
}
