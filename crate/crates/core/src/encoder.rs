//! Disentangling encoder: gate networks that split `e^g` into shared and
//! specific parts, the alignment/orthogonality loss, attention fusion and the
//! item contrastive loss.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::decoder::pairwise_contrastive;
use crate::diff::{xavier_normal, DiffError, Matrix, ParamId, ParameterStore, Tape, Var};
use crate::Scalar;

/// Dropout applied between the two layers of a [`GateNetwork`].
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

/// `linear(D→D) → ReLU → dropout → linear(D→D) → sigmoid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateNetwork {
    pub width: usize,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl GateNetwork {
    /// Adds `{prefix}.w1`, `{prefix}.b1`, `{prefix}.w2`, `{prefix}.b2`. Weights
    /// are Xavier-normal, biases zero.
    pub fn register<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParameterStore<T>,
        prefix: &str,
        width: usize,
        rng: &mut R,
    ) -> Result<Self, DiffError> {
        let w1 = store.add(format!("{prefix}.w1"), xavier_normal(rng, width, width)?)?;
        let b1 = store.add(format!("{prefix}.b1"), Matrix::zeros(1, width))?;
        let w2 = store.add(format!("{prefix}.w2"), xavier_normal(rng, width, width)?)?;
        let b2 = store.add(format!("{prefix}.b2"), Matrix::zeros(1, width))?;
        Ok(Self {
            width,
            w1,
            b1,
            w2,
            b2,
        })
    }

    /// Sigmoid gate values in `(0, 1)`, same shape as `x`.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParameterStore<T>,
        x: Var,
        dropout: Option<Dropout<'_>>,
    ) -> Result<Var, DiffError> {
        let w1 = tape.param(store, self.w1);
        let b1 = tape.param(store, self.b1);
        let w2 = tape.param(store, self.w2);
        let b2 = tape.param(store, self.b2);
        let h = tape.matmul(x, w1)?;
        let h = tape.add_row(h, b1)?;
        let mut h = tape.relu(h);
        if let Some(d) = dropout {
            h = tape.dropout(h, d.rate, d.rng)?;
        }
        let o = tape.matmul(h, w2)?;
        let o = tape.add_row(o, b2)?;
        Ok(tape.sigmoid(o))
    }

    /// `x ⊙ forward(x)`.
    pub fn gate<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParameterStore<T>,
        x: Var,
        dropout: Option<Dropout<'_>>,
    ) -> Result<Var, DiffError> {
        let g = self.forward(tape, store, x, dropout)?;
        tape.mul(x, g)
    }
}

/// Shared and specific features of one entity set.
#[derive(Debug, Clone, Copy)]
pub struct DisentangledFeatures {
    pub shared: Var,
    pub specific: Var,
}

pub fn disentangle_project<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParameterStore<T>,
    eg: Var,
    gate_c: &GateNetwork,
    gate_s: &GateNetwork,
    dropout: [Option<Dropout<'_>>; 2],
) -> Result<DisentangledFeatures, DiffError> {
    let [dc, ds] = dropout;
    Ok(DisentangledFeatures {
        shared: gate_c.gate(tape, store, eg, dc)?,
        specific: gate_s.gate(tape, store, eg, ds)?,
    })
}

/// `1 − h1·h2 / (‖h1‖‖h2‖)`.
pub fn cosine_distance<T: Scalar>(h1: &[T], h2: &[T]) -> Result<T, DiffError> {
    if h1.len() != h2.len() {
        return Err(DiffError::ShapeMismatch {
            op: "cosine_distance",
            left: (1, h1.len()),
            right: (1, h2.len()),
        });
    }
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();
    let (n1, n2) = (dot(h1, h1).sqrt(), dot(h2, h2).sqrt());
    if n1 == T::zero() || n2 == T::zero() {
        return Err(DiffError::ZeroVector(0));
    }
    Ok(T::one() - dot(h1, h2) / (n1 * n2))
}

/// Mean over users of
/// `dis(c_A, c_B) + (c_A·s_A)² + (c_B·s_B)²`.
pub fn encoder_loss<T: Scalar>(
    tape: &mut Tape<T>,
    a: &DisentangledFeatures,
    b: &DisentangledFeatures,
) -> Result<Var, DiffError> {
    let n = tape.value(a.shared).rows();
    let cos = tape.cosine_rows(a.shared, b.shared)?;
    let ones = tape.constant(Matrix::filled(n, 1, T::one()));
    let dist = tape.sub(ones, cos)?;
    let dot_a = tape.row_dot(a.shared, a.specific)?;
    let dot_b = tape.row_dot(b.shared, b.specific)?;
    let sq_a = tape.mul(dot_a, dot_a)?;
    let sq_b = tape.mul(dot_b, dot_b)?;
    let per_user = tape.add(dist, sq_a)?;
    let per_user = tape.add(per_user, sq_b)?;
    Ok(tape.mean(per_user))
}

/// `n×2` softmax of `(e^g·e^c, e^g·e^s)/√D`: column 0 is the shared weight.
pub fn attention_weights<T: Scalar>(
    tape: &mut Tape<T>,
    eg: Var,
    ec: Var,
    es: Var,
) -> Result<Var, DiffError> {
    let width = tape.value(eg).cols();
    let sc = tape.row_dot(eg, ec)?;
    let ss = tape.row_dot(eg, es)?;
    let scores = tape.concat_cols(&[sc, ss])?;
    let scores = tape.scale(scores, T::one() / T::of(width as f64).sqrt());
    Ok(tape.softmax_rows(scores))
}

/// `e^g + a^c·e^c + a^s·e^s`.
pub fn fuse_features<T: Scalar>(
    tape: &mut Tape<T>,
    eg: Var,
    ec: Var,
    es: Var,
    weights: Var,
) -> Result<Var, DiffError> {
    let ac = tape.slice_cols(weights, 0, 1)?;
    let as_ = tape.slice_cols(weights, 1, 2)?;
    let wc = tape.mul_col(ec, ac)?;
    let ws = tape.mul_col(es, as_)?;
    let out = tape.add(eg, wc)?;
    tape.add(out, ws)
}

/// Mean over observed `(u, i)` rows of
/// `−log softmax([f(s_u^own, e_i), f(s_u^other, e_i)]/τ)[0]`.
///
/// Rows of the three inputs are aligned: row `k` holds the user features and
/// the fused item embedding of the `k`-th observed pair.
pub fn item_contrastive_loss<T: Scalar>(
    tape: &mut Tape<T>,
    specific_own: Var,
    specific_other: Var,
    items: Var,
    tau: T,
) -> Result<Var, DiffError> {
    pairwise_contrastive(tape, items, specific_own, specific_other, tau)
}
