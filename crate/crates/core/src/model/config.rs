use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::Domain;

pub const LR_GRID: [f64; 2] = [1e-3, 1e-4];
pub const L2_GRID: [f64; 3] = [1e-3, 1e-4, 1e-5];
pub const DROPOUT_GRID: [f64; 3] = [0.1, 0.2, 0.3];
pub const TAU_GRID: [f64; 6] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];
pub const LAMBDA_GRID: [f64; 3] = [0.01, 0.1, 1.0];

/// Which parts of the model are switched off.
/// Serialised as its name, e.g. `"full"`, `"gcn"` or `"no-dec+no-enc"`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ablation {
    /// Predict from `e^g` directly; no encoder, decoder or fusion.
    pub gcn_only: bool,
    pub no_dec: bool,
    pub no_enc: bool,
    pub no_itdis: bool,
    /// Concatenate `[e^g‖e^c‖e^s]` and project back to width `D` instead of
    /// attention fusion.
    pub no_pers: bool,
}

impl Ablation {
    pub const NAMES: [&'static str; 6] = ["full", "gcn", "no-dec", "no-enc", "no-itdis", "no-pers"];

    pub fn uses_disentanglement(&self) -> bool {
        !self.gcn_only
    }

    pub fn uses_encoder_loss(&self) -> bool {
        !self.gcn_only && !self.no_enc
    }

    pub fn uses_decoder(&self) -> bool {
        !self.gcn_only && !self.no_dec
    }

    pub fn uses_item_loss(&self) -> bool {
        !self.gcn_only && !self.no_itdis
    }

    pub fn uses_attention(&self) -> bool {
        !self.gcn_only && !self.no_pers
    }

    pub fn name(&self) -> String {
        let parts: Vec<&str> = [
            (self.gcn_only, "gcn"),
            (self.no_dec, "no-dec"),
            (self.no_enc, "no-enc"),
            (self.no_itdis, "no-itdis"),
            (self.no_pers, "no-pers"),
        ]
        .into_iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| n)
        .collect();
        if parts.is_empty() {
            "full".into()
        } else {
            parts.join("+")
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl TryFrom<String> for Ablation {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Ablation> for String {
    fn from(a: Ablation) -> String {
        a.name()
    }
}

impl FromStr for Ablation {
    type Err = ModelError;

    /// Accepts `full`, `gcn`, `no-dec`, `no-enc`, `no-itdis`, `no-pers`, the
    /// short forms `-dec` etc., and `+`-joined combinations.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Ablation::default();
        for part in s.split('+') {
            let key = part.trim().to_ascii_lowercase().replace('_', "-");
            match key.trim_start_matches("no").trim_start_matches('-') {
                "full" | "dgcdr" | "" if key != "no" => {}
                "gcn" | "gcn-only" => out.gcn_only = true,
                "dec" => out.no_dec = true,
                "enc" => out.no_enc = true,
                "itdis" => out.no_itdis = true,
                "pers" => out.no_pers = true,
                _ => {
                    return Err(ModelError::InvalidConfig(format!(
                        "unknown ablation `{part}`"
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Per-layer embedding width `d`.
    pub dim: usize,
    /// Propagation depth `H`.
    pub gcn_layers: usize,
    pub lr: f64,
    pub l2: f64,
    pub dropout: f64,
    pub tau: f64,
    pub lambda_en: f64,
    pub lambda_de: f64,
    pub lambda_item: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Domain whose validation split drives early stopping.
    pub target: Domain,
    /// K of the Recall@K monitor.
    pub monitor_k: usize,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            gcn_layers: 3,
            lr: 1e-3,
            l2: 1e-4,
            dropout: 0.1,
            tau: 0.2,
            lambda_en: 0.1,
            lambda_de: 0.1,
            lambda_item: 0.1,
            batch_size: 1024,
            patience: 10,
            max_epochs: 300,
            seed: 2024,
            target: Domain::A,
            monitor_k: 10,
            ablation: Ablation::default(),
        }
    }
}

fn on_grid(value: f64, grid: &[f64]) -> bool {
    grid.iter()
        .any(|&g| (g - value).abs() <= 1e-12 * g.abs().max(1.0))
}

impl TrainConfig {
    /// Width of the concatenated propagation output, `d·(H+1)`.
    pub fn width(&self) -> usize {
        self.dim * (self.gcn_layers + 1)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        for l in [self.lambda_en, self.lambda_de, self.lambda_item] {
            if !(l >= 0.0 && l.is_finite()) {
                return bad("loss weights must be non-negative");
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.monitor_k == 0 {
            return bad("monitor_k must be positive");
        }
        Ok(())
    }

    /// Names of hyperparameters that lie outside the published search grids.
    pub fn off_grid(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let checks: [(&str, f64, &[f64]); 7] = [
            ("lr", self.lr, &LR_GRID),
            ("l2", self.l2, &L2_GRID),
            ("dropout", self.dropout, &DROPOUT_GRID),
            ("tau", self.tau, &TAU_GRID),
            ("lambda_en", self.lambda_en, &LAMBDA_GRID),
            ("lambda_de", self.lambda_de, &LAMBDA_GRID),
            ("lambda_item", self.lambda_item, &LAMBDA_GRID),
        ];
        for (name, v, grid) in checks {
            if !on_grid(v, grid) {
                out.push(name);
            }
        }
        out
    }
}
