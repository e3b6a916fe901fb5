use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nodeselect::graph::save_graph;
use nodeselect::{DenseMatrix, Graph};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nodeselect"));
    c.env_remove("NS_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn nodeselect")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(o: &Output, key: &str) -> String {
    let prefix = format!("{key}=");
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key}= line in {:?}", stdout(o)))
}

/// Two 10-node rings with one-hot class features.
fn write_toy(dir: &Path, feat_dim: usize) {
    let n = 20;
    let mut edges = Vec::new();
    for block in 0..2 {
        for k in 0..10 {
            edges.push((block * 10 + k, block * 10 + (k + 1) % 10));
        }
    }
    let labels: Vec<usize> = (0..n).map(|i| i / 10).collect();
    let x = DenseMatrix::from_fn(n, feat_dim, |i, j| if j == labels[i] { 1.0 } else { 0.0 });
    let g = Graph::from_edges(n, &edges, x, labels, 2).unwrap();
    save_graph(&g, dir).unwrap();
}

fn write_config(path: &Path) {
    fs::write(
        path,
        "activation=elu\ndropout=0\nepochs=200\npatience=200\n",
    )
    .unwrap();
}

struct Fixture {
    tmp: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        write_toy(&tmp.path().join("toy"), 2);
        write_config(&tmp.path().join("toy.cfg"));
        Self { tmp }
    }

    fn path(&self, name: &str) -> String {
        self.tmp.path().join(name).display().to_string()
    }

    fn train(&self, out: &str) -> Output {
        run(&[
            "train",
            "--data",
            &self.path("toy"),
            "--config",
            &self.path("toy.cfg"),
            "--seed",
            "3",
            "--out",
            &self.path(out),
        ])
    }
}

#[test]
fn missing_config_exits_2() {
    let f = Fixture::new();
    let o = run(&[
        "train",
        "--data",
        &f.path("toy"),
        "--config",
        &f.path("absent.cfg"),
        "--out",
        &f.path("run"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_config_key_exits_2() {
    let f = Fixture::new();
    fs::write(f.path("bad.cfg"), "learning_rate=0.1\n").unwrap();
    let o = run(&[
        "train",
        "--data",
        &f.path("toy"),
        "--config",
        &f.path("bad.cfg"),
        "--out",
        &f.path("run"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_3() {
    let f = Fixture::new();
    let o = run(&[
        "train",
        "--data",
        &f.path("nowhere"),
        "--config",
        &f.path("toy.cfg"),
        "--out",
        &f.path("run"),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn toy_run_fits_and_writes_artifacts() {
    let f = Fixture::new();
    let o = f.train("run");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&o, "test_acc"), "1");
    assert_eq!(stdout(&o).lines().count(), 1);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f.path("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "train");
    assert_eq!(manifest["seeds"][0], 3);
    assert_eq!(manifest["config"]["activation"], "elu");
    assert_eq!(manifest["dataset"]["sha256"].as_str().unwrap().len(), 64);
    assert!(fs::read_to_string(f.path("run/metrics.csv"))
        .unwrap()
        .starts_with("epoch,"));

    let e = run(&[
        "eval",
        "--checkpoint",
        &f.path("run/model.ckpt"),
        "--data",
        &f.path("toy"),
        "--split",
        "test",
    ]);
    assert!(e.status.success());
    assert_eq!(value(&e, "test_acc"), value(&o, "test_acc"));

    let e = run(&[
        "eval",
        "--checkpoint",
        &f.path("run/model.ckpt"),
        "--data",
        &f.path("toy"),
        "--split",
        "train",
    ]);
    assert_eq!(value(&e, "train_acc"), "1");
}

#[test]
fn repeated_train_is_byte_identical() {
    let f = Fixture::new();
    assert!(f.train("a").status.success());
    assert!(f.train("b").status.success());
    for file in ["metrics.csv", "model.ckpt"] {
        assert_eq!(
            fs::read(f.path(&format!("a/{file}"))).unwrap(),
            fs::read(f.path(&format!("b/{file}"))).unwrap(),
            "{file}"
        );
    }
    let hash = |run: &str| {
        let m: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(f.path(&format!("{run}/manifest.json"))).unwrap(),
        )
        .unwrap();
        m["dataset"]["sha256"].clone()
    };
    assert_eq!(hash("a"), hash("b"));
}

#[test]
fn eval_dimension_mismatch_exits_3() {
    let f = Fixture::new();
    assert!(f.train("run").status.success());
    write_toy(&f.tmp.path().join("wide"), 5);
    let o = run(&[
        "eval",
        "--checkpoint",
        &f.path("run/model.ckpt"),
        "--data",
        &f.path("wide"),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_experiment_exits_2() {
    let f = Fixture::new();
    let o = run(&["bench", "--experiment", "bogus", "--out", &f.path("b")]);
    assert_eq!(o.status.code(), Some(2));
}

fn data_rows(path: &str) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn noise_bench_row_accounting() {
    let f = Fixture::new();
    let o = run(&[
        "bench",
        "--experiment",
        "noise",
        "--fractions",
        "0.1,0.25",
        "--seeds",
        "5",
        "--jobs",
        "4",
        "--out",
        &f.path("noise"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&f.path("noise/rows.csv"));
    let clean = rows.iter().filter(|r| r[1] == "clean").count();
    let noisy = rows.iter().filter(|r| r[1].starts_with("noise=")).count();
    assert_eq!((clean, noisy), (10, 20));
    assert_eq!(value(&o, "rows"), "30");
}

#[test]
fn scale_bench_has_one_row_per_size_and_model() {
    let f = Fixture::new();
    let o = run(&[
        "bench",
        "--experiment",
        "scale",
        "--sizes",
        "1000,2000",
        "--out",
        &f.path("scale"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&f.path("scale/rows.csv"));
    assert_eq!(rows.len(), 4);
    assert!(Path::new(&f.path("scale/scale.csv")).exists());
}

#[test]
fn diag_after_train_writes_layer_series() {
    let f = Fixture::new();
    assert!(f.train("run").status.success());
    let o = run(&[
        "bench",
        "--experiment",
        "diag",
        "--data",
        &f.path("toy"),
        "--config",
        &f.path("toy.cfg"),
        "--checkpoint",
        &f.path("run/model.ckpt"),
        "--seeds",
        "1",
        "--out",
        &f.path("diag"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = fs::read_dir(f.path("diag"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(names.iter().any(|n| n.starts_with("diag_")), "{names:?}");
}

#[test]
fn ns_threads_must_parse() {
    let f = Fixture::new();
    let o = bin()
        .args(["bench", "--experiment", "noise", "--out", &f.path("b")])
        .env("NS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_in_both_modes() {
    for mode in ["soft", "hard-frozen"] {
        let o = run(&[
            "gradcheck",
            "--mode",
            mode,
            "--nodes",
            "6",
            "--trials",
            "20",
        ]);
        assert!(
            o.status.success(),
            "{mode}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let err: f64 = value(&o, "max_rel_err").parse().unwrap();
        assert!(err <= 1e-4);
    }
}

#[test]
fn corrupted_gradient_fails_with_coordinate() {
    let o = run(&[
        "gradcheck",
        "--nodes",
        "6",
        "--trials",
        "4",
        "--corrupt",
        "1.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("W["), "{err}");
}

#[test]
fn too_many_gradcheck_nodes_exits_2() {
    let o = run(&["gradcheck", "--nodes", "40"]);
    assert_eq!(o.status.code(), Some(2));
}
