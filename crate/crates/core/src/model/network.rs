use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelError, TrainConfig};
use crate::corpus::{Domain, ProcessedDataset};
use crate::decoder::{transform_features, TransformedFeatures};
use crate::diff::{xavier_normal, Matrix, ParamId, ParameterStore, Tape, Var};
use crate::encoder::{
    attention_weights, disentangle_project, fuse_features, DisentangledFeatures, Dropout,
    GateNetwork,
};
use crate::graph::build_graph;
use crate::propagation::Propagator;
use crate::Scalar;

/// Forward-pass mode. Dropout masks in training mode are a pure function of
/// `(seed, step, network call)`, so switching one network off never perturbs
/// the masks drawn for another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train { step: u64 },
    Eval,
}

/// Parameter handles. Which groups exist depends on the ablation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub user_emb: [ParamId; 2],
    pub item_emb: [ParamId; 2],
    /// `[domain][shared, specific]`.
    pub gates: Option<[[GateNetwork; 2]; 2]>,
    /// `[Φ_A, Φ_B]`; `Φ_d` maps domain-`d` features into the other domain.
    pub maps: Option<[GateNetwork; 2]>,
    /// Concatenation projection `(W: 3D×D, b: 1×D)` per domain.
    pub pers: Option<[(ParamId, ParamId); 2]>,
}

/// Trainable state plus the fixed propagation graphs.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub cfg: TrainConfig,
    pub layout: Layout,
    pub store: ParameterStore<T>,
    props: [Propagator<T>; 2],
}

/// Forward values of one domain for a set of users and items.
#[derive(Debug, Clone)]
pub struct ForwardBundle {
    pub domain: Domain,
    pub user_g: Var,
    pub user_feats: Option<DisentangledFeatures>,
    pub user_attention: Option<Var>,
    pub user_fused: Var,
    pub item_g: Var,
    pub item_feats: Option<DisentangledFeatures>,
    pub item_fused: Var,
}

/// Evaluation-mode tables for every user and item of one domain.
#[derive(Debug, Clone)]
pub struct DomainEmbeddings<T> {
    pub user_g: Matrix<T>,
    pub user_c: Option<Matrix<T>>,
    pub user_s: Option<Matrix<T>>,
    pub user_fused: Matrix<T>,
    /// `n×2` (shared, specific) attention weights.
    pub user_attention: Option<Matrix<T>>,
    pub item_fused: Matrix<T>,
}

const STREAM_INIT: u64 = 1 << 32;
const STREAM_DROPOUT: u64 = 2 << 32;

fn init_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_INIT + tag);
    rng
}

fn dropout_rng(seed: u64, step: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(STREAM_DROPOUT + tag);
    rng
}

// Dropout call tags within a domain.
const TAG_USER_C: u64 = 0;
const TAG_USER_S: u64 = 1;
const TAG_ITEM_C: u64 = 2;
const TAG_ITEM_S: u64 = 3;
const TAG_MAP_C: u64 = 4;
const TAG_MAP_G: u64 = 5;
const TAG_MAP_S: u64 = 6;

impl<T: Scalar> Model<T> {
    /// Fresh model over the train graphs of `ds`. Every parameter group
    /// draws from its own seeded stream.
    pub fn new(ds: &ProcessedDataset, cfg: &TrainConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        if !ds.is_split() {
            return Err(ModelError::Unsplit);
        }
        let props = [
            Propagator::new(&build_graph(ds, Domain::A)?),
            Propagator::new(&build_graph(ds, Domain::B)?),
        ];
        let (d, width) = (cfg.dim, cfg.width());
        let ab = cfg.ablation;
        let mut store = ParameterStore::new();
        let table = |store: &mut ParameterStore<T>, name: String, rows: usize, tag: u64| {
            store.add(name, xavier_normal(&mut init_rng(cfg.seed, tag), rows, d)?)
        };
        let user_emb = [
            table(&mut store, "user_emb.A".into(), ds.n_users(), 0)?,
            table(&mut store, "user_emb.B".into(), ds.n_users(), 1)?,
        ];
        let item_emb = [
            table(&mut store, "item_emb.A".into(), ds.n_items(Domain::A), 2)?,
            table(&mut store, "item_emb.B".into(), ds.n_items(Domain::B), 3)?,
        ];
        let gates = if ab.uses_disentanglement() {
            let mut g = |dom: Domain, kind: &str, tag: u64| {
                GateNetwork::register(
                    &mut store,
                    &format!("gate_{kind}.{dom}"),
                    width,
                    &mut init_rng(cfg.seed, tag),
                )
            };
            Some([
                [g(Domain::A, "c", 4)?, g(Domain::A, "s", 5)?],
                [g(Domain::B, "c", 6)?, g(Domain::B, "s", 7)?],
            ])
        } else {
            None
        };
        let maps = if ab.uses_decoder() {
            let mut m = |dom: Domain, tag: u64| {
                GateNetwork::register(
                    &mut store,
                    &format!("map.{dom}"),
                    width,
                    &mut init_rng(cfg.seed, tag),
                )
            };
            Some([m(Domain::A, 8)?, m(Domain::B, 9)?])
        } else {
            None
        };
        let pers = if !ab.gcn_only && ab.no_pers {
            let mut p = |dom: Domain, tag: u64| -> Result<(ParamId, ParamId), ModelError> {
                let w = xavier_normal(&mut init_rng(cfg.seed, tag), 3 * width, width)?;
                Ok((
                    store.add(format!("pers.{dom}.w"), w)?,
                    store.add(format!("pers.{dom}.b"), Matrix::zeros(1, width))?,
                ))
            };
            Some([p(Domain::A, 10)?, p(Domain::B, 11)?])
        } else {
            None
        };
        Ok(Self {
            cfg: cfg.clone(),
            layout: Layout {
                user_emb,
                item_emb,
                gates,
                maps,
                pers,
            },
            store,
            props,
        })
    }

    /// Replaces parameter values with those of `other` (names and shapes must match).
    pub fn load_values(&mut self, other: &ParameterStore<T>) -> Result<(), ModelError> {
        self.store.copy_values_from(other)?;
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.props[0].n_users()
    }

    pub fn n_items(&self, d: Domain) -> usize {
        self.props[d.index()].n_items()
    }

    fn dropout_for(&self, mode: Mode, d: Domain, kind: u64) -> Option<ChaCha8Rng> {
        match mode {
            Mode::Train { step } if self.cfg.dropout > 0.0 => Some(dropout_rng(
                self.cfg.seed,
                step,
                8 * d.index() as u64 + kind,
            )),
            _ => None,
        }
    }

    /// Disentangles and fuses one entity set; returns (features, attention, fused).
    fn encode(
        &self,
        tape: &mut Tape<T>,
        d: Domain,
        g: Var,
        mode: Mode,
        tags: [u64; 2],
    ) -> Result<(Option<DisentangledFeatures>, Option<Var>, Var), ModelError> {
        let Some(gates) = &self.layout.gates else {
            return Ok((None, None, g));
        };
        let [gc, gs] = &gates[d.index()];
        let mut rc = self.dropout_for(mode, d, tags[0]);
        let mut rs = self.dropout_for(mode, d, tags[1]);
        let rate = self.cfg.dropout;
        let feats = disentangle_project(
            tape,
            &self.store,
            g,
            gc,
            gs,
            [
                rc.as_mut().map(|rng| Dropout { rate, rng }),
                rs.as_mut().map(|rng| Dropout { rate, rng }),
            ],
        )?;
        if let Some(pers) = &self.layout.pers {
            let (w, b) = pers[d.index()];
            let cat = tape.concat_cols(&[g, feats.shared, feats.specific])?;
            let w = tape.param(&self.store, w);
            let b = tape.param(&self.store, b);
            let out = tape.matmul(cat, w)?;
            let out = tape.add_row(out, b)?;
            return Ok((Some(feats), None, out));
        }
        let attn = attention_weights(tape, g, feats.shared, feats.specific)?;
        let fused = fuse_features(tape, g, feats.shared, feats.specific, attn)?;
        Ok((Some(feats), Some(attn), fused))
    }

    /// Propagates both domains over their full graphs, then encodes the
    /// requested user rows (shared by both domains) and item rows per domain.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        users: &[usize],
        items: [&[usize]; 2],
        mode: Mode,
    ) -> Result<[ForwardBundle; 2], ModelError> {
        let mut out = Vec::with_capacity(2);
        for d in Domain::BOTH {
            let k = d.index();
            let eu = tape.param(&self.store, self.layout.user_emb[k]);
            let ei = tape.param(&self.store, self.layout.item_emb[k]);
            let emb = self.props[k].multi_layer_embed(tape, eu, ei, self.cfg.gcn_layers)?;
            let user_g = tape.gather_rows(emb.users, users)?;
            let item_g = tape.gather_rows(emb.items, items[k])?;
            let (user_feats, user_attention, user_fused) =
                self.encode(tape, d, user_g, mode, [TAG_USER_C, TAG_USER_S])?;
            let (item_feats, _, item_fused) =
                self.encode(tape, d, item_g, mode, [TAG_ITEM_C, TAG_ITEM_S])?;
            out.push(ForwardBundle {
                domain: d,
                user_g,
                user_feats,
                user_attention,
                user_fused,
                item_g,
                item_feats,
                item_fused,
            });
        }
        let b = out.pop().expect("two domains");
        let a = out.pop().expect("two domains");
        Ok([a, b])
    }

    /// Maps the user features of `source` into the other domain through the
    /// source domain's mapping network. `None` when the decoder is ablated.
    pub fn transform(
        &self,
        tape: &mut Tape<T>,
        source: &ForwardBundle,
        mode: Mode,
    ) -> Result<Option<TransformedFeatures>, ModelError> {
        let (Some(maps), Some(feats)) = (&self.layout.maps, &source.user_feats) else {
            return Ok(None);
        };
        let d = source.domain;
        let rate = self.cfg.dropout;
        let mut r = [TAG_MAP_C, TAG_MAP_G, TAG_MAP_S].map(|t| self.dropout_for(mode, d, t));
        let [rc, rg, rs] = &mut r;
        let t = transform_features(
            tape,
            &self.store,
            source.user_g,
            feats,
            &maps[d.index()],
            [
                rc.as_mut().map(|rng| Dropout { rate, rng }),
                rg.as_mut().map(|rng| Dropout { rate, rng }),
                rs.as_mut().map(|rng| Dropout { rate, rng }),
            ],
        )?;
        Ok(Some(t))
    }

    /// Evaluation-mode embeddings of every user and item in both domains.
    pub fn embed_all(&self) -> Result<[DomainEmbeddings<T>; 2], ModelError> {
        let mut tape = Tape::new();
        let users: Vec<usize> = (0..self.n_users()).collect();
        let items_a: Vec<usize> = (0..self.n_items(Domain::A)).collect();
        let items_b: Vec<usize> = (0..self.n_items(Domain::B)).collect();
        let bundles = self.forward(&mut tape, &users, [&items_a, &items_b], Mode::Eval)?;
        Ok(bundles.map(|b| DomainEmbeddings {
            user_g: tape.value(b.user_g).clone(),
            user_c: b.user_feats.map(|f| tape.value(f.shared).clone()),
            user_s: b.user_feats.map(|f| tape.value(f.specific).clone()),
            user_fused: tape.value(b.user_fused).clone(),
            user_attention: b.user_attention.map(|a| tape.value(a).clone()),
            item_fused: tape.value(b.item_fused).clone(),
        }))
    }
}
