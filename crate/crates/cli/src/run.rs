//! The `preprocess`, `train`, `evaluate`, `sweep`, `export` and `synth` commands.
//!
//! Layout of an output directory:
//!
//! ```text
//! config.toml  manifest.toml  metrics.tsv  [sweep.tsv  sweep_matrix_{A,B}.tsv]
//! seed-{s}/target-{d}/checkpoint.bin  history.tsv  [attention.tsv  embeddings/]
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use dualrec::corpus::{
    load_interactions, read_dataset, split_dataset, write_dataset, CorpusError, DatasetStats,
    Domain, ProcessedDataset, Split,
};
use dualrec::diff::{load_checkpoint, save_checkpoint};
use dualrec::eval::{evaluate_split, Candidates, Metric, MetricsReport, SplitMetrics};
use dualrec::model::{train, EpochRecord, Model, TrainConfig};
use dualrec::synth::{generate, write_synth};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::export::{attention_shares, write_attention, write_embeddings};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::io(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessReport {
    pub stats: [DatasetStats; 2],
    pub overlap_users: usize,
    pub out_dir: PathBuf,
}

impl fmt::Display for PreprocessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "overlapping users: {}", self.overlap_users)?;
        writeln!(f, "domain\tusers\titems\tinteractions\tsparsity")?;
        for (d, s) in Domain::BOTH.iter().zip(&self.stats) {
            writeln!(
                f,
                "{d}\t{}\t{}\t{}\t{:.4}%",
                s.users,
                s.items,
                s.interactions,
                100.0 * s.sparsity
            )?;
        }
        write!(f, "written to {}", self.out_dir.display())
    }
}

/// Load, N-core filter, split and write the processed dataset.
pub fn preprocess(cfg: &ExperimentConfig) -> Result<PreprocessReport, CliError> {
    cfg.validate()?;
    let path = |p: &Option<PathBuf>, key: &str| {
        p.clone()
            .ok_or_else(|| CliError::Config(format!("data.{key} is required for preprocessing")))
    };
    let (pa, pb) = (
        path(&cfg.data.domain_a, "domain_a")?,
        path(&cfg.data.domain_b, "domain_b")?,
    );
    let load = |p: &Path, d| match load_interactions(p, d) {
        Err(CorpusError::Io(source)) => Err(CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        other => Ok(other?),
    };
    let (raw_a, raw_b) = (load(&pa, Domain::A)?, load(&pb, Domain::B)?);
    let filtered = dualrec::corpus::iterative_ncore_filter(&raw_a, &raw_b, cfg.data.n_core)?;
    let ds = split_dataset(
        &ProcessedDataset::from_filtered(&filtered, cfg.data.n_core),
        &cfg.split,
    )?;
    write_dataset(&ds, &cfg.data.processed)?;
    Ok(PreprocessReport {
        stats: [ds.stats(Domain::A), ds.stats(Domain::B)],
        overlap_users: ds.n_users(),
        out_dir: cfg.data.processed.clone(),
    })
}

/// The processed dataset re-split with `target` in the target role.
pub fn dataset_for_target(
    cfg: &ExperimentConfig,
    base: &ProcessedDataset,
    target: Domain,
) -> Result<ProcessedDataset, CliError> {
    Ok(split_dataset(base, &cfg.split.with_target(target))?)
}

pub fn train_config(cfg: &ExperimentConfig, seed: u64, target: Domain) -> TrainConfig {
    TrainConfig {
        seed,
        target,
        ..cfg.train.clone()
    }
}

pub fn candidates(cfg: &ExperimentConfig, seed: u64) -> Candidates {
    match cfg.run.sampled_candidates {
        0 => Candidates::Full,
        size => Candidates::Sampled { size, seed },
    }
}

pub fn run_dir(out: &Path, seed: u64, target: Domain) -> PathBuf {
    out.join(format!("seed-{seed}"))
        .join(format!("target-{target}"))
}

/// Test-split metrics of `target` for a model.
pub fn evaluate_model(
    cfg: &ExperimentConfig,
    model: &Model<f64>,
    ds: &ProcessedDataset,
    target: Domain,
    seed: u64,
) -> Result<SplitMetrics, CliError> {
    let emb = model.embed_all()?;
    let e = &emb[target.index()];
    Ok(evaluate_split(
        &e.user_fused,
        &e.item_fused,
        &ds.index(target),
        Split::Test,
        &cfg.run.ks,
        candidates(cfg, seed),
    )?)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub target: Domain,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub metrics: SplitMetrics,
}

pub fn history_tsv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch\trec\ten\tde\titem\treg\ttotal\tvalid_recall\n");
    for r in history {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.epoch, r.rec, r.en, r.de, r.item, r.reg, r.total, r.valid_metric
        );
    }
    s
}

/// Per-seed rows `domain metric k seed value`, then `mean` and `std` rows.
pub fn metrics_tsv(reports: &[MetricsReport]) -> String {
    let mut s = String::from("domain\tmetric\tk\tseed\tvalue\n");
    for rep in reports {
        let d = rep.domain.map_or("-", Domain::as_str);
        for (metric, k) in rep.keys() {
            for (seed, m) in &rep.per_seed {
                if let Some(v) = m.get(metric, k) {
                    let _ = writeln!(s, "{d}\t{}\t{k}\t{seed}\t{v}", metric.as_str());
                }
            }
        }
    }
    for rep in reports {
        let d = rep.domain.map_or("-", Domain::as_str);
        for (metric, k) in rep.keys() {
            let (mean, std) = (
                rep.mean(metric, k).unwrap_or(f64::NAN),
                rep.std(metric, k).unwrap_or(f64::NAN),
            );
            let _ = writeln!(s, "{d}\t{}\t{k}\tmean\t{mean}", metric.as_str());
            let _ = writeln!(s, "{d}\t{}\t{k}\tstd\t{std}", metric.as_str());
        }
    }
    s
}

fn reports(cfg: &ExperimentConfig, results: &[RunResult]) -> Vec<MetricsReport> {
    cfg.run
        .targets
        .iter()
        .map(|&d| {
            let mut rep = MetricsReport::new(d);
            for r in results.iter().filter(|r| r.target == d) {
                rep.push(r.seed, r.metrics.clone());
            }
            rep
        })
        .collect()
}

/// Git-style object hash (`blob <len>\0<content>`, SHA-256 object format).
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'a str,
    seeds: Vec<u64>,
    /// Input file name → content hash.
    inputs: BTreeMap<String, String>,
    config: &'a ExperimentConfig,
}

fn write_manifest(cfg: &ExperimentConfig, command: &str) -> Result<(), CliError> {
    let dir = &cfg.data.processed;
    let mut inputs = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(CliError::io(dir))?;
    for entry in entries {
        let path = entry.map_err(CliError::io(dir))?.path();
        if path.is_file() {
            let bytes = fs::read(&path).map_err(CliError::io(&path))?;
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            inputs.insert(name, blob_hash(&bytes));
        }
    }
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        seeds: cfg.seeds(),
        inputs,
        config: cfg,
    };
    let text = toml::to_string(&m).expect("manifest is serialisable");
    write_text(&cfg.run.out_dir.join("manifest.toml"), &text)?;
    write_text(&cfg.run.out_dir.join("config.toml"), &cfg.to_toml_string())
}

fn load_base(cfg: &ExperimentConfig) -> Result<ProcessedDataset, CliError> {
    Ok(read_dataset(&cfg.data.processed)?)
}

fn jobs(cfg: &ExperimentConfig) -> Vec<(u64, Domain)> {
    cfg.seeds()
        .into_iter()
        .flat_map(|s| cfg.run.targets.iter().map(move |&d| (s, d)))
        .collect()
}

fn export_run(
    cfg: &ExperimentConfig,
    model: &Model<f64>,
    ds: &ProcessedDataset,
    dir: &Path,
) -> Result<(), CliError> {
    if !cfg.export.attention && !cfg.export.embeddings {
        return Ok(());
    }
    let emb = model.embed_all()?;
    if cfg.export.attention {
        if let Some(shares) = attention_shares(&emb) {
            write_attention(&shares, &dir.join("attention.tsv"))?;
        }
    }
    if cfg.export.embeddings {
        write_embeddings(&emb, ds, &dir.join("embeddings"))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub runs: Vec<RunResult>,
    pub reports: Vec<MetricsReport>,
    pub out_dir: PathBuf,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.runs {
            let best = r
                .history
                .get(r.best_epoch.wrapping_sub(1))
                .map_or(f64::NAN, |h| h.valid_metric);
            writeln!(
                f,
                "seed {} target {}: {} epochs, best epoch {} (valid recall {best:.4})",
                r.seed,
                r.target,
                r.history.len(),
                r.best_epoch
            )?;
        }
        writeln!(f, "domain\tmetric\tk\tmean\tstd")?;
        for rep in &self.reports {
            let d = rep.domain.map_or("-", Domain::as_str);
            for (m, k) in rep.keys() {
                writeln!(
                    f,
                    "{d}\t{}\t{k}\t{:.4}\t{:.4}",
                    m.as_str(),
                    rep.mean(m, k).unwrap_or(f64::NAN),
                    rep.std(m, k).unwrap_or(f64::NAN)
                )?;
            }
        }
        write!(f, "written to {}", self.out_dir.display())
    }
}

/// Trains one model per (seed, target) in parallel and writes every output.
pub fn train_all(cfg: &ExperimentConfig) -> Result<TrainReport, CliError> {
    cfg.validate()?;
    let base = load_base(cfg)?;
    let out = &cfg.run.out_dir;
    create_dir(out)?;
    let runs = jobs(cfg)
        .into_par_iter()
        .map(|(seed, target)| {
            let ds = dataset_for_target(cfg, &base, target)?;
            let outcome = train::<f64>(&ds, &train_config(cfg, seed, target))?;
            let metrics = evaluate_model(cfg, &outcome.model, &ds, target, seed)?;
            let dir = run_dir(out, seed, target);
            create_dir(&dir)?;
            save_checkpoint(&outcome.model.store, dir.join("checkpoint.bin"))?;
            write_text(&dir.join("history.tsv"), &history_tsv(&outcome.history))?;
            export_run(cfg, &outcome.model, &ds, &dir)?;
            Ok(RunResult {
                seed,
                target,
                history: outcome.history,
                best_epoch: outcome.best_epoch,
                metrics,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let reports = reports(cfg, &runs);
    write_text(&out.join("metrics.tsv"), &metrics_tsv(&reports))?;
    write_manifest(cfg, "train")?;
    Ok(TrainReport {
        runs,
        reports,
        out_dir: out.clone(),
    })
}

/// Rebuilds the model of one finished run from its checkpoint.
pub fn load_run(
    cfg: &ExperimentConfig,
    ds: &ProcessedDataset,
    seed: u64,
    target: Domain,
) -> Result<Model<f64>, CliError> {
    let mut model = Model::<f64>::new(ds, &train_config(cfg, seed, target))?;
    let store =
        load_checkpoint::<f64>(run_dir(&cfg.run.out_dir, seed, target).join("checkpoint.bin"))?;
    model.load_values(&store)?;
    Ok(model)
}

/// Re-evaluates saved checkpoints and rewrites `metrics.tsv`.
pub fn evaluate_all(cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>, CliError> {
    cfg.validate()?;
    let base = load_base(cfg)?;
    let runs = jobs(cfg)
        .into_par_iter()
        .map(|(seed, target)| {
            let ds = dataset_for_target(cfg, &base, target)?;
            let model = load_run(cfg, &ds, seed, target)?;
            let metrics = evaluate_model(cfg, &model, &ds, target, seed)?;
            Ok(RunResult {
                seed,
                target,
                history: Vec::new(),
                best_epoch: 0,
                metrics,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let reports = reports(cfg, &runs);
    write_text(&cfg.run.out_dir.join("metrics.tsv"), &metrics_tsv(&reports))?;
    Ok(reports)
}

/// Writes attention and embedding exports for every saved run.
/// Writes attention shares and embeddings for every trained run. The export
/// toggles only govern what `train` writes on its own; this always writes both.
pub fn export_all(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.export.attention = true;
    cfg.export.embeddings = true;
    let cfg = &cfg;
    let base = load_base(cfg)?;
    let mut dirs = Vec::new();
    for (seed, target) in jobs(cfg) {
        let ds = dataset_for_target(cfg, &base, target)?;
        let model = load_run(cfg, &ds, seed, target)?;
        let dir = run_dir(&cfg.run.out_dir, seed, target);
        export_run(cfg, &model, &ds, &dir)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// One point of a sweep grid, with the value of each swept axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub values: Vec<(&'static str, f64)>,
    pub target: Domain,
    /// Mean over seeds of the best validation monitor.
    pub valid: f64,
    /// Mean over seeds of test Recall at the first configured cut-off.
    pub test: f64,
}

fn apply_axis(tc: &mut TrainConfig, name: &str, v: f64) {
    match name {
        "lr" => tc.lr = v,
        "l2" => tc.l2 = v,
        "dropout" => tc.dropout = v,
        "tau" => tc.tau = v,
        "lambda_en" => tc.lambda_en = v,
        "lambda_de" => tc.lambda_de = v,
        "lambda_item" => tc.lambda_item = v,
        other => unreachable!("unknown sweep axis {other}"),
    }
}

/// Cartesian product of the non-empty axes; the last axis varies fastest.
pub fn sweep_grid(cfg: &ExperimentConfig) -> Vec<Vec<(&'static str, f64)>> {
    let mut cells: Vec<Vec<(&'static str, f64)>> = vec![Vec::new()];
    for (name, values, _) in cfg.sweep.axes() {
        if values.is_empty() {
            continue;
        }
        cells = cells
            .into_iter()
            .flat_map(|c| {
                values
                    .iter()
                    .map(move |&v| c.iter().copied().chain([(name, v)]).collect())
            })
            .collect();
    }
    cells
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepCell>, CliError> {
    cfg.validate()?;
    let base = load_base(cfg)?;
    let datasets = cfg
        .run
        .targets
        .iter()
        .map(|&d| dataset_for_target(cfg, &base, d))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = sweep_grid(cfg);
    let seeds = cfg.seeds();
    let k0 = cfg.run.ks[0];
    let mut work: Vec<(usize, usize, u64)> = Vec::new();
    for c in 0..grid.len() {
        for t in 0..datasets.len() {
            work.extend(seeds.iter().map(|&s| (c, t, s)));
        }
    }
    let results = work
        .par_iter()
        .map(|&(c, t, seed)| {
            let target = cfg.run.targets[t];
            let mut tc = train_config(cfg, seed, target);
            for &(name, v) in &grid[c] {
                apply_axis(&mut tc, name, v);
            }
            let outcome = train::<f64>(&datasets[t], &tc)?;
            let m = evaluate_model(cfg, &outcome.model, &datasets[t], target, seed)?;
            Ok((
                outcome.best_metric,
                m.get(Metric::Recall, k0).unwrap_or(f64::NAN),
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let n = seeds.len() as f64;
    let cells: Vec<SweepCell> = results
        .chunks(seeds.len())
        .enumerate()
        .map(|(j, chunk)| {
            let (c, t) = (j / datasets.len(), j % datasets.len());
            SweepCell {
                values: grid[c].clone(),
                target: cfg.run.targets[t],
                valid: chunk.iter().map(|r| r.0).sum::<f64>() / n,
                test: chunk.iter().map(|r| r.1).sum::<f64>() / n,
            }
        })
        .collect();
    write_sweep(cfg, &cells)?;
    Ok(cells)
}

fn write_sweep(cfg: &ExperimentConfig, cells: &[SweepCell]) -> Result<(), CliError> {
    let out = &cfg.run.out_dir;
    create_dir(out)?;
    let k0 = cfg.run.ks[0];
    let names: Vec<&str> = cells
        .first()
        .map(|c| c.values.iter().map(|v| v.0).collect())
        .unwrap_or_default();
    let mut s = String::new();
    for n in &names {
        let _ = write!(s, "{n}\t");
    }
    let _ = writeln!(
        s,
        "domain\tvalid_recall@{}\ttest_recall@{k0}",
        cfg.train.monitor_k
    );
    for c in cells {
        for (_, v) in &c.values {
            let _ = write!(s, "{v}\t");
        }
        let _ = writeln!(s, "{}\t{}\t{}", c.target, c.valid, c.test);
    }
    write_text(&out.join("sweep.tsv"), &s)?;
    if names.len() == 2 {
        let axes: Vec<&[f64]> = cfg
            .sweep
            .axes()
            .into_iter()
            .filter(|a| !a.1.is_empty())
            .map(|a| a.1)
            .collect();
        for &d in &cfg.run.targets {
            let mut m = format!("{}\\{}", names[0], names[1]);
            for v in axes[1] {
                let _ = write!(m, "\t{v}");
            }
            m.push('\n');
            for (r, v0) in axes[0].iter().enumerate() {
                let _ = write!(m, "{v0}");
                for col in 0..axes[1].len() {
                    let cell = cells
                        .iter()
                        .filter(|c| c.target == d)
                        .nth(r * axes[1].len() + col)
                        .expect("full grid");
                    let _ = write!(m, "\t{}", cell.test);
                }
                m.push('\n');
            }
            write_text(&out.join(format!("sweep_matrix_{d}.tsv")), &m)?;
        }
    }
    Ok(())
}

/// Writes `A.tsv` and `B.tsv` generated from `[synth]` into `dir`.
pub fn synth(cfg: &ExperimentConfig, dir: &Path) -> Result<[DatasetStats; 2], CliError> {
    let data = generate(&cfg.synth)?;
    create_dir(dir)?;
    write_synth(&data, dir)?;
    let filtered = dualrec::corpus::iterative_ncore_filter(&data.a, &data.b, 1)?;
    let ds = ProcessedDataset::from_filtered(&filtered, 1);
    Ok([ds.stats(Domain::A), ds.stats(Domain::B)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_sha256_objects() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            blob_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn grid_order_is_row_major() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.lambda_en = vec![0.01, 0.1];
        cfg.sweep.lambda_de = vec![0.01, 0.1, 1.0];
        let g = sweep_grid(&cfg);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], vec![("lambda_en", 0.01), ("lambda_de", 0.1)]);
        assert_eq!(g[3], vec![("lambda_en", 0.1), ("lambda_de", 0.01)]);
        assert_eq!(sweep_grid(&ExperimentConfig::default()), vec![Vec::new()]);
    }
}
