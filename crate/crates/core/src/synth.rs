//! Synthetic dual-domain interactions with a planted shared/specific split.
//!
//! Each user has a shared latent block used in both domains and one specific
//! block per domain. Item `k` of either domain carries the same shared item
//! latent and an independent specific latent, so with the specific weight at
//! zero both domains have the same score matrix. Interactions are Bernoulli
//! draws from `σ(score + bias_d)`, with `bias_d` chosen by bisection to hit
//! the target density, followed by a top-up that gives every user and item
//! at least `n_core` interactions.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    iterative_ncore_filter, write_interactions, CorpusError, Domain, RawInteraction,
};
use crate::diff::Matrix;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("target density is unreachable: {0}")]
    DensityUnreachable(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_items_a: usize,
    pub n_items_b: usize,
    pub shared_dim: usize,
    pub specific_dim: usize,
    pub shared_weight: f64,
    pub specific_weight: f64,
    /// Expected fraction of user-item cells that are interactions.
    pub density: f64,
    pub n_core: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items_a: 300,
            n_items_b: 300,
            shared_dim: 4,
            specific_dim: 4,
            shared_weight: 4.0,
            specific_weight: 0.5,
            density: 0.04,
            n_core: 3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub a: Vec<RawInteraction>,
    pub b: Vec<RawInteraction>,
    /// Planted `n_users × n_items` score matrices (before the density bias).
    pub scores: [Matrix<f64>; 2],
}

impl SynthSpec {
    fn n_items(&self, d: Domain) -> usize {
        match d {
            Domain::A => self.n_items_a,
            Domain::B => self.n_items_b,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.into()));
        if self.n_users == 0 || self.n_items_a == 0 || self.n_items_b == 0 {
            return bad("entity counts must be positive");
        }
        if self.shared_dim == 0 || self.specific_dim == 0 {
            return bad("latent blocks must be non-empty");
        }
        if !(self.shared_weight >= 0.0 && self.specific_weight >= 0.0) {
            return bad("block weights must be non-negative");
        }
        if self.n_core == 0 {
            return bad("n_core must be at least 1");
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(SynthError::DensityUnreachable(format!(
                "density {} is outside (0, 1)",
                self.density
            )));
        }
        for d in Domain::BOTH {
            let n_items = self.n_items(d);
            if self.n_core > n_items || self.n_core > self.n_users {
                return Err(SynthError::DensityUnreachable(format!(
                    "{}-core needs at least {} users and items, domain {d} has {}×{n_items}",
                    self.n_core, self.n_core, self.n_users
                )));
            }
            let floor =
                (self.n_core as f64 / n_items as f64).max(self.n_core as f64 / self.n_users as f64);
            if self.density < floor {
                return Err(SynthError::DensityUnreachable(format!(
                    "density {} is below the {}-core minimum {floor:.4} in domain {d}",
                    self.density, self.n_core
                )));
            }
        }
        Ok(())
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bias `b` with `mean σ(s + b) = density`.
fn density_bias(scores: &Matrix<f64>, density: f64) -> f64 {
    let mean_p =
        |b: f64| scores.data().iter().map(|&s| sigmoid(s + b)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < density {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let max_items = spec.n_items_a.max(spec.n_items_b);
    let z_shared = normal_matrix(&mut rng, spec.n_users, spec.shared_dim);
    let w_shared = normal_matrix(&mut rng, max_items, spec.shared_dim);
    let sh = spec.shared_weight / (spec.shared_dim as f64).sqrt();
    let sp = spec.specific_weight / (spec.specific_dim as f64).sqrt();

    let mut scores = Vec::with_capacity(2);
    for d in Domain::BOTH {
        let z_spec = normal_matrix(&mut rng, spec.n_users, spec.specific_dim);
        let w_spec = normal_matrix(&mut rng, spec.n_items(d), spec.specific_dim);
        let n_items = spec.n_items(d);
        let mut s = Matrix::zeros(spec.n_users, n_items);
        for u in 0..spec.n_users {
            for i in 0..n_items {
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                let v = sh * dot(z_shared.row(u), w_shared.row(i))
                    + sp * dot(z_spec.row(u), w_spec.row(i));
                s.set(u, i, v);
            }
        }
        scores.push(s);
    }

    let mut rows: Vec<Vec<RawInteraction>> = Vec::with_capacity(2);
    for d in Domain::BOTH {
        let s = &scores[d.index()];
        let n_items = s.cols();
        let bias = density_bias(s, spec.density);
        let mut hit = vec![false; spec.n_users * n_items];
        for u in 0..spec.n_users {
            for i in 0..n_items {
                hit[u * n_items + i] = rng.random::<f64>() < sigmoid(s.get(u, i) + bias);
            }
        }
        top_up(&mut hit, s, spec.n_core);
        let prefix = if d == Domain::A { "a" } else { "b" };
        let mut out = Vec::new();
        for u in 0..spec.n_users {
            for i in 0..n_items {
                if hit[u * n_items + i] {
                    out.push(RawInteraction::new(
                        format!("u{u}"),
                        format!("{prefix}{i}"),
                        d,
                    ));
                }
            }
        }
        rows.push(out);
    }
    let b = rows.pop().expect("two domains");
    let a = rows.pop().expect("two domains");

    let filtered = iterative_ncore_filter(&a, &b, spec.n_core)?;
    if filtered.a.len() != a.len() || filtered.b.len() != b.len() {
        return Err(SynthError::DensityUnreachable(
            "generated data is not a fixed point of the N-core filter".into(),
        ));
    }
    let b_scores = scores.pop().expect("two domains");
    let a_scores = scores.pop().expect("two domains");
    Ok(SynthData {
        a,
        b,
        scores: [a_scores, b_scores],
    })
}

/// Adds the highest-scoring missing cells until every row and column has
/// at least `n` hits. Rows first; adding cells never lowers a degree.
fn top_up(hit: &mut [bool], s: &Matrix<f64>, n: usize) {
    let (rows, cols) = s.shape();
    for u in 0..rows {
        let deg = (0..cols).filter(|&i| hit[u * cols + i]).count();
        if deg < n {
            let mut missing: Vec<usize> = (0..cols).filter(|&i| !hit[u * cols + i]).collect();
            missing.sort_by(|&x, &y| s.get(u, y).total_cmp(&s.get(u, x)).then(x.cmp(&y)));
            for &i in missing.iter().take(n - deg) {
                hit[u * cols + i] = true;
            }
        }
    }
    for i in 0..cols {
        let deg = (0..rows).filter(|&u| hit[u * cols + i]).count();
        if deg < n {
            let mut missing: Vec<usize> = (0..rows).filter(|&u| !hit[u * cols + i]).collect();
            missing.sort_by(|&x, &y| s.get(y, i).total_cmp(&s.get(x, i)).then(x.cmp(&y)));
            for &u in missing.iter().take(n - deg) {
                hit[u * cols + i] = true;
            }
        }
    }
}

/// Writes `A.tsv` and `B.tsv` in the interaction-file format.
pub fn write_synth(data: &SynthData, dir: impl AsRef<Path>) -> Result<(), SynthError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (name, rows) in [("A.tsv", &data.a), ("B.tsv", &data.b)] {
        write_interactions(rows, BufWriter::new(File::create(dir.join(name))?))?;
    }
    Ok(())
}
