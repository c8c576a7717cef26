mod common;

use std::fs;
use std::path::Path;

use common::{dualrec, metric_rows, ok, small_experiment, TOY_A, TOY_B};
use dualrec::corpus::{prepare_dataset, read_dataset, Domain, SplitSpec};
use dualrec::model::{Model, TrainConfig};
use dualrec::synth::{generate, SynthSpec};
use dualrec_cli::export::{attention_shares, read_embedding, write_embeddings};
use dualrec_cli::run::{train_all, PreprocessReport};
use dualrec_cli::ExperimentConfig;

fn toy_dir(n_core: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("A.tsv"), TOY_A).unwrap();
    fs::write(dir.path().join("B.tsv"), TOY_B).unwrap();
    let cfg = format!("[data]\ndomain_a = \"A.tsv\"\ndomain_b = \"B.tsv\"\nn_core = {n_core}\n");
    fs::write(dir.path().join("exp.toml"), cfg).unwrap();
    dir
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn preprocess_reports_hand_computed_statistics() {
    let dir = toy_dir(2);
    let stdout = ok(dir.path(), &["preprocess", "--config", "exp.toml"]);
    // 4 users x 3 items, 10 interactions: sparsity 1 - 10/12.
    assert!(stdout.contains("A\t4\t3\t10\t16.6667%"), "{stdout}");
    assert!(stdout.contains("B\t4\t3\t10\t16.6667%"), "{stdout}");
    let cfg = ExperimentConfig::load(dir.path().join("exp.toml")).unwrap();
    let report: PreprocessReport = dualrec_cli::run::preprocess(&cfg).unwrap();
    for s in report.stats {
        assert!((s.sparsity - 1.0 / 6.0).abs() < 1e-12);
    }
    let ds = read_dataset(dir.path().join("processed")).unwrap();
    assert_eq!(ds.users, ["u1", "u2", "u3", "u4"]);
    assert_eq!(ds.items[0], ["a1", "a2", "a3"]);
}

#[test]
fn preprocess_is_byte_identical_on_rerun() {
    let dir = toy_dir(2);
    ok(dir.path(), &["preprocess", "--config", "exp.toml"]);
    let first = read_all(&dir.path().join("processed"));
    ok(dir.path(), &["preprocess", "--config", "exp.toml"]);
    assert_eq!(first, read_all(&dir.path().join("processed")));
}

#[test]
fn oversized_core_is_a_data_error() {
    let dir = toy_dir(50);
    let out = dualrec(dir.path(), &["preprocess", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty after N-core filtering"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dualrec(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        dualrec(dir.path(), &["train", "--seed", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(
        dualrec(dir.path(), &["train", "--ablation", "bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        dualrec(dir.path(), &["train", "--config", "nope.toml"])
            .status
            .code(),
        Some(1)
    );
    fs::write(dir.path().join("bad.toml"), "[train]\nlearning_rate = 1\n").unwrap();
    assert_eq!(
        dualrec(dir.path(), &["train", "--config", "bad.toml"])
            .status
            .code(),
        Some(1)
    );
    fs::write(dir.path().join("bad.toml"), "[sweep]\nlambda_en = [0.5]\n").unwrap();
    assert_eq!(
        dualrec(dir.path(), &["sweep", "--config", "bad.toml"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn missing_dataset_directory_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualrec(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("dataset directory") && err.contains("does not exist"),
        "{err}"
    );
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    small_experiment(dir.path(), |c| c.train.lr = 1e200);
    let out = dualrec(dir.path(), &["train", "--config", "exp.toml"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the published search grid"));
}

#[test]
fn gcn_history_has_only_rec_and_reg() {
    let dir = tempfile::tempdir().unwrap();
    small_experiment(dir.path(), |_| {});
    ok(
        dir.path(),
        &["train", "--config", "exp.toml", "--ablation", "gcn"],
    );
    let history = fs::read_to_string(dir.path().join("runs/seed-1/target-A/history.tsv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch\trec\ten\tde\titem\treg\ttotal\tvalid_recall"
    );
    for line in lines {
        let f: Vec<f64> = line.split('\t').map(|x| x.parse().unwrap()).collect();
        assert!(f[1] > 0.0 && f[5] > 0.0);
        assert_eq!(&f[2..5], &[0.0, 0.0, 0.0]);
    }
    assert!(!dir
        .path()
        .join("runs/seed-1/target-A/attention.tsv")
        .exists());
}

#[test]
fn five_seed_run_writes_per_seed_rows_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    small_experiment(dir.path(), |c| {
        c.run.seeds = vec![0, 1, 2, 3, 4];
        c.train.max_epochs = 2;
        c.export.embeddings = false;
    });
    ok(
        dir.path(),
        &["train", "--config", "exp.toml", "--k", "5,10"],
    );
    let rows = metric_rows(&fs::read_to_string(dir.path().join("runs/metrics.tsv")).unwrap());
    assert_eq!(rows.len(), 4 * 2 * 7);
    for metric in ["recall", "hr", "mrr", "ndcg"] {
        for k in [5, 10] {
            let sel: Vec<_> = rows
                .iter()
                .filter(|r| r.0 == "A" && r.1 == metric && r.2 == k)
                .collect();
            let seeds: Vec<&str> = sel.iter().map(|r| r.3.as_str()).collect();
            assert_eq!(seeds, ["0", "1", "2", "3", "4", "mean", "std"]);
            let v: Vec<f64> = sel[..5].iter().map(|r| r.4).collect();
            let mean = v.iter().sum::<f64>() / 5.0;
            let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
            assert!((sel[5].4 - mean).abs() < 1e-12 && (sel[6].4 - std).abs() < 1e-12);
        }
    }
    let manifest = fs::read_to_string(dir.path().join("runs/manifest.toml")).unwrap();
    assert!(manifest.contains("seeds = [0, 1, 2, 3, 4]"));
    assert!(manifest.contains("\"inter_A.tsv\" = \""));
    let reloaded = ExperimentConfig::from_toml_str(
        &fs::read_to_string(dir.path().join("runs/config.toml")).unwrap(),
    )
    .unwrap();
    assert_eq!(reloaded.run.ks, [5, 10]);
}

#[test]
fn evaluate_reproduces_training_metrics() {
    let dir = tempfile::tempdir().unwrap();
    small_experiment(dir.path(), |c| c.run.targets = vec![Domain::A, Domain::B]);
    ok(dir.path(), &["train", "--config", "exp.toml"]);
    let trained = fs::read(dir.path().join("runs/metrics.tsv")).unwrap();
    ok(dir.path(), &["evaluate", "--config", "exp.toml"]);
    assert_eq!(
        trained,
        fs::read(dir.path().join("runs/metrics.tsv")).unwrap()
    );
    let rows = metric_rows(&String::from_utf8(trained).unwrap());
    assert!(rows.iter().any(|r| r.0 == "B"));
}

#[test]
fn lambda_grid_sweep_gives_nine_cells_in_stable_order() {
    let dir = tempfile::tempdir().unwrap();
    small_experiment(dir.path(), |c| {
        c.train.max_epochs = 1;
        c.sweep.lambda_en = vec![0.01, 0.1, 1.0];
        c.sweep.lambda_de = vec![0.01, 0.1, 1.0];
    });
    ok(dir.path(), &["sweep", "--config", "exp.toml"]);
    let table = fs::read_to_string(dir.path().join("runs/sweep.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[0].starts_with("lambda_en\tlambda_de\tdomain"));
    assert!(lines[2].starts_with("0.01\t0.1\tA\t"));
    let matrix = fs::read_to_string(dir.path().join("runs/sweep_matrix_A.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = matrix.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 4));
    assert_eq!(rows[0][1..], ["0.01", "0.1", "1"]);
    // Cell (λ_en=1, λ_de=0.01) of the matrix is row 7 of the table.
    assert_eq!(rows[3][1], lines[7].split('\t').last().unwrap());

    ok(dir.path(), &["sweep", "--config", "exp.toml"]);
    assert_eq!(
        table,
        fs::read_to_string(dir.path().join("runs/sweep.tsv")).unwrap()
    );
}

#[test]
fn single_cell_sweep_equals_train() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_experiment(dir.path(), |c| c.sweep.lambda_en = vec![0.1]);
    let cfg = ExperimentConfig::load(&path).unwrap();
    let cells = dualrec_cli::run::sweep(&cfg).unwrap();
    let trained = train_all(&cfg).unwrap();
    assert_eq!(cells.len(), 1);
    let r = &trained.runs[0];
    assert_eq!(
        cells[0].test,
        r.metrics.get(dualrec::eval::Metric::Recall, 10).unwrap()
    );
    assert_eq!(cells[0].valid, r.history[r.best_epoch - 1].valid_metric);
}

#[test]
fn export_writes_attention_simplex_and_reloadable_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    small_experiment(dir.path(), |c| c.export.embeddings = false);
    ok(dir.path(), &["train", "--config", "exp.toml"]);
    let run = dir.path().join("runs/seed-1/target-A");
    assert!(!run.join("embeddings").exists());
    fs::remove_file(run.join("attention.tsv")).unwrap();
    ok(
        dir.path(),
        &["export", "--config", "exp.toml", "--seed", "1"],
    );
    let att = fs::read_to_string(run.join("attention.tsv")).unwrap();
    for line in att.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let (c, s): (f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        assert!((c + s - 100.0).abs() < 1e-6, "{line}");
    }
    let users = fs::read_to_string(run.join("embeddings/users.tsv")).unwrap();
    let m = read_embedding(&run.join("embeddings/fused_B.f32")).unwrap();
    assert_eq!(users.lines().count() - 1, m.rows());
    assert_eq!(m.cols(), 8 * 3);
}

fn ten_user_model() -> (dualrec::corpus::ProcessedDataset, Model<f64>) {
    let spec = SynthSpec {
        n_users: 10,
        n_items_a: 12,
        n_items_b: 12,
        density: 0.4,
        n_core: 2,
        ..SynthSpec::default()
    };
    let data = generate(&spec).unwrap();
    let ds = prepare_dataset(&data.a, &data.b, 2, &SplitSpec::default()).unwrap();
    let cfg = TrainConfig {
        dim: 4,
        gcn_layers: 1,
        ..TrainConfig::default()
    };
    let model = Model::new(&ds, &cfg).unwrap();
    (ds, model)
}

#[test]
fn embedding_export_has_eight_files_of_the_right_shape() {
    let (ds, model) = ten_user_model();
    assert_eq!(ds.n_users(), 10);
    let emb = model.embed_all().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_embeddings(&emb, &ds, dir.path()).unwrap();
    assert_eq!(files.len(), 8);
    for name in &files {
        let m = read_embedding(&dir.path().join(name)).unwrap();
        assert_eq!(m.shape(), (10, 8));
        let (kind, dom) = name.trim_end_matches(".f32").split_once('_').unwrap();
        let e = &emb[if dom == "A" { 0 } else { 1 }];
        let want = match kind {
            "g" => &e.user_g,
            "c" => e.user_c.as_ref().unwrap(),
            "s" => e.user_s.as_ref().unwrap(),
            _ => &e.user_fused,
        };
        for (a, b) in want.data().iter().zip(m.data()) {
            assert_eq!(*a as f32, *b);
        }
    }
    let ids = fs::read_to_string(dir.path().join("users.tsv")).unwrap();
    assert_eq!(ids.lines().count() - 1, 10);
}

#[test]
fn identical_gates_split_attention_evenly() {
    let (_, mut model) = ten_user_model();
    let names: Vec<String> = model
        .store
        .iter()
        .map(|p| p.name.clone())
        .filter(|n| n.starts_with("gate_c."))
        .collect();
    for name in names {
        let value = model.store.value(model.store.id(&name).unwrap()).clone();
        let twin = model
            .store
            .id(&name.replacen("gate_c.", "gate_s.", 1))
            .unwrap();
        *model.store.value_mut(twin) = value;
    }
    let shares = attention_shares(&model.embed_all().unwrap()).unwrap();
    for s in shares {
        assert!(
            (s.shared - 50.0).abs() < 1e-12 && (s.specific - 50.0).abs() < 1e-12,
            "{s:?}"
        );
    }
}
