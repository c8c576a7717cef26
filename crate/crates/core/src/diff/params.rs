use std::collections::HashMap;

use super::{DiffError, Matrix, Tape, Var};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named trainable matrix with its gradient accumulator and Adam moments.
#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
    pub(crate) first_moment: Matrix<T>,
    pub(crate) second_moment: Matrix<T>,
}

impl<T: Scalar> Parameter<T> {
    fn new(name: String, value: Matrix<T>) -> Self {
        let (r, c) = value.shape();
        Self {
            name,
            value,
            grad: Matrix::zeros(r, c),
            first_moment: Matrix::zeros(r, c),
            second_moment: Matrix::zeros(r, c),
        }
    }
}

/// All learnable matrices of a model, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore<T> {
    params: Vec<Parameter<T>>,
    by_name: HashMap<String, ParamId>,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix<T>) -> Result<ParamId, DiffError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(DiffError::DuplicateParameter(name));
        }
        if !value.is_finite() {
            return Err(DiffError::NonFiniteParameter(name));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter::new(name, value));
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId, DiffError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| DiffError::UnknownParameter(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Matrix<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix<T> {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        &mut self.params[id.0].grad
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Total number of scalar entries.
    pub fn num_entries(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Copies values from another store with identical layout.
    pub fn copy_values_from(&mut self, other: &Self) -> Result<(), DiffError> {
        if other.params.len() != self.params.len() {
            return Err(DiffError::MalformedCheckpoint(format!(
                "expected {} parameters, found {}",
                self.params.len(),
                other.params.len()
            )));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(DiffError::MalformedCheckpoint(format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    dst.name,
                    dst.value.shape(),
                    src.name,
                    src.value.shape()
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }
}

/// `λ · Σ θ²` over every parameter in the store.
pub fn l2_penalty<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParameterStore<T>,
    lambda: T,
) -> Result<Var, DiffError> {
    let mut total = tape.constant(Matrix::scalar(T::zero()));
    for id in store.ids() {
        let p = tape.param(store, id);
        let sq = tape.sum_squares(p);
        total = tape.add(total, sq)?;
    }
    Ok(tape.scale(total, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_penalty_values() {
        let mut store = ParameterStore::new();
        store
            .add("w", Matrix::from_rows(&[[3.0, 4.0]]).unwrap())
            .unwrap();
        for (lambda, expected) in [(0.0f64, 0.0f64), (1.0, 25.0), (0.1, 2.5)] {
            let mut t = Tape::new();
            let l = l2_penalty(&mut t, &store, lambda).unwrap();
            assert!((t.scalar(l) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_gradient_reaches_store() {
        let mut store = ParameterStore::new();
        let id = store
            .add("w", Matrix::from_rows(&[[3.0, 4.0]]).unwrap())
            .unwrap();
        let mut t = Tape::new();
        let l = l2_penalty(&mut t, &store, 0.5).unwrap();
        t.backward(l).unwrap().accumulate_into(&mut store);
        assert_eq!(store.grad(id).data(), &[3.0, 4.0]);
    }

    #[test]
    fn rejects_duplicates_and_non_finite() {
        let mut store = ParameterStore::<f64>::new();
        store.add("a", Matrix::zeros(1, 1)).unwrap();
        assert!(matches!(
            store.add("a", Matrix::zeros(1, 1)),
            Err(DiffError::DuplicateParameter(_))
        ));
        assert!(matches!(
            store.add("b", Matrix::scalar(f64::NAN)),
            Err(DiffError::NonFiniteParameter(_))
        ));
        assert!(store.id("zzz").is_err());
    }
}
