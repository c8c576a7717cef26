use super::{DiffError, ParameterStore};
use crate::Scalar;

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step_count: u64,
}

impl<T: Scalar> AdamState<T> {
    /// `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(lr: T) -> Result<Self, DiffError> {
        Self::with_betas(lr, T::of(0.9), T::of(0.999), T::of(1e-8))
    }

    pub fn with_betas(lr: T, beta1: T, beta2: T, eps: T) -> Result<Self, DiffError> {
        if !(lr > T::zero()) || !lr.is_finite() {
            return Err(DiffError::InvalidOptimizer(format!(
                "lr must be positive, got {lr}"
            )));
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(b > T::zero() && b < T::one()) {
                return Err(DiffError::InvalidOptimizer(format!(
                    "{name} must lie in (0, 1), got {b}"
                )));
            }
        }
        if !(eps > T::zero()) {
            return Err(DiffError::InvalidOptimizer(format!(
                "eps must be positive, got {eps}"
            )));
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            eps,
            step_count: 0,
        })
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    /// Nothing is modified when any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParameterStore<T>) -> Result<(), DiffError> {
        if let Some(bad) = store.iter().find(|p| !p.grad.is_finite()) {
            return Err(DiffError::NonFiniteGradient(bad.name.clone()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = T::one() - self.beta1.powi(t);
        let bias2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for p in store.iter_mut() {
            let grads = p.grad.data();
            let m = p.first_moment.data_mut();
            for (m, &g) in m.iter_mut().zip(grads) {
                *m = b1 * *m + (T::one() - b1) * g;
            }
            let v = p.second_moment.data_mut();
            for (v, &g) in v.iter_mut().zip(grads) {
                *v = b2 * *v + (T::one() - b2) * g * g;
            }
            let (m, v) = (p.first_moment.data(), p.second_moment.data());
            for ((theta, &m), &v) in p.value.data_mut().iter_mut().zip(m).zip(v) {
                let m_hat = m / bias1;
                let v_hat = v / bias2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        store.zero_grad();
        Ok(())
    }
}
