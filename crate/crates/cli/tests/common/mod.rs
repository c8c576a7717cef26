#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dualrec_cli::ExperimentConfig;

/// Raw files in the public-corpus layout: header, four columns, float
/// timestamps, one duplicate row, a non-overlapping user and an item below
/// the 2-core threshold.
///
/// After 2-core filtering both domains keep users u1..u4, three items and
/// ten interactions.
pub const TOY_A: &str = "user_id\titem_id\trating\ttimestamp\n\
u1\ta1\t5.0\t1262304000.0\n\
u1\ta2\t4.0\t1262304001.5\n\
u1\ta3\t3.0\t1262304002\n\
u1\ta4\t5.0\t1262304003\n\
u2\ta1\t5.0\t1.2623e9\n\
u2\ta2\t2.0\t1262304005\n\
u2\ta3\t1.0\t1262304006\n\
u3\ta1\t5.0\t1262304007\n\
u3\ta2\t4.0\t1262304008\n\
u3\ta2\t4.0\t1262304009\n\
u4\ta1\t3.0\t1262304010\n\
u4\ta2\t3.0\t1262304011\n\
u5\ta1\t3.0\t1262304012\n\
u5\ta2\t3.0\t1262304013\n";

pub const TOY_B: &str = "user_id\titem_id\trating\ttimestamp\n\
u1\tb1\t5.0\t1262304000.25\n\
u1\tb2\t4.0\t1262304001\n\
u1\tb3\t3.0\t1262304002\n\
u2\tb1\t5.0\t1262304004\n\
u2\tb2\t2.0\t1262304005\n\
u2\tb3\t1.0\t1262304006\n\
u3\tb1\t5.0\t1262304007\n\
u3\tb2\t4.0\t1262304008\n\
u4\tb1\t3.0\t1262304010\n\
u4\tb2\t3.0\t1262304011\n";

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dualrec")
}

pub fn dualrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dualrec(dir, args);
    assert!(
        out.status.success(),
        "dualrec {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Small experiment: synthetic raw files, 40 users, short training.
pub const SMALL_CONFIG: &str = r#"
[data]
domain_a = "raw/A.tsv"
domain_b = "raw/B.tsv"
n_core = 3

[train]
dim = 8
gcn_layers = 2
batch_size = 64
max_epochs = 4
patience = 2

[run]
out_dir = "runs"
seeds = [1]
targets = ["A"]

[synth]
n_users = 40
n_items_a = 50
n_items_b = 50
density = 0.12
"#;

/// Writes `exp.toml` from `SMALL_CONFIG` after `edit`, generates the raw
/// files and preprocesses them.
pub fn small_experiment(dir: &Path, edit: impl FnOnce(&mut ExperimentConfig)) -> PathBuf {
    let mut cfg = ExperimentConfig::from_toml_str(SMALL_CONFIG).unwrap();
    edit(&mut cfg);
    let path = dir.join("exp.toml");
    fs::write(&path, cfg.to_toml_string()).unwrap();
    ok(dir, &["synth", "--config", "exp.toml", "--out", "raw"]);
    ok(dir, &["preprocess", "--config", "exp.toml"]);
    path
}

/// `(domain, metric, k, seed, value)` rows of a metrics file.
pub fn metric_rows(text: &str) -> Vec<(String, String, usize, String, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (
                f[0].into(),
                f[1].into(),
                f[2].parse().unwrap(),
                f[3].into(),
                f[4].parse().unwrap(),
            )
        })
        .collect()
}
