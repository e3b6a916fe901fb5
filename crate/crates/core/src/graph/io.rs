use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;

pub const EDGES_FILE: &str = "edges.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const META_FILE: &str = "meta.csv";

fn read(dir: &Path, name: &str) -> Result<(std::path::PathBuf, String)> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, text))
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

struct Meta {
    num_nodes: usize,
    num_classes: usize,
    feat_dim: usize,
}

fn parse_meta(path: &Path, text: &str) -> Result<Meta> {
    let (mut n, mut c, mut f) = (None, None, None);
    for (ln, line) in lines(text) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, ln, "expected key=value"))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| parse_err(path, ln, format!("bad count {value:?}")))?;
        match key.trim() {
            "num_nodes" => n = Some(value),
            "num_classes" => c = Some(value),
            "feat_dim" => f = Some(value),
            other => return Err(parse_err(path, ln, format!("unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| parse_err(path, 0, format!("missing {k}"));
    Ok(Meta {
        num_nodes: n.ok_or_else(|| missing("num_nodes"))?,
        num_classes: c.ok_or_else(|| missing("num_classes"))?,
        feat_dim: f.ok_or_else(|| missing("feat_dim"))?,
    })
}

/// Loads a dataset container directory (`edges.csv`, `features.csv`,
/// `labels.csv`, `meta.csv`).
pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let (meta_path, meta_text) = read(dir, META_FILE)?;
    let (edges_path, edges_text) = read(dir, EDGES_FILE)?;
    let (feat_path, feat_text) = read(dir, FEATURES_FILE)?;
    let (label_path, label_text) = read(dir, LABELS_FILE)?;
    let meta = parse_meta(&meta_path, &meta_text)?;

    let mut edges = Vec::new();
    for (ln, line) in lines(&edges_text) {
        let (s, d) = line
            .split_once(',')
            .ok_or_else(|| parse_err(&edges_path, ln, "expected src,dst"))?;
        let s: usize = s
            .trim()
            .parse()
            .map_err(|_| parse_err(&edges_path, ln, format!("bad node id {s:?}")))?;
        let d: usize = d
            .trim()
            .parse()
            .map_err(|_| parse_err(&edges_path, ln, format!("bad node id {d:?}")))?;
        if s >= meta.num_nodes || d >= meta.num_nodes {
            return Err(parse_err(
                &edges_path,
                ln,
                format!("node id >= num_nodes={}", meta.num_nodes),
            ));
        }
        edges.push((s, d));
    }

    let mut data = Vec::with_capacity(meta.num_nodes * meta.feat_dim);
    let mut rows = 0usize;
    for (ln, line) in lines(&feat_text) {
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(&feat_path, ln, format!("bad real {tok:?}")))?;
            data.push(v);
        }
        if data.len() - before != meta.feat_dim {
            return Err(parse_err(
                &feat_path,
                ln,
                format!(
                    "ragged row: {} values, feat_dim={}",
                    data.len() - before,
                    meta.feat_dim
                ),
            ));
        }
        rows += 1;
    }
    if rows != meta.num_nodes {
        return Err(Error::Dataset(format!(
            "{}: {rows} rows, num_nodes={}",
            feat_path.display(),
            meta.num_nodes
        )));
    }

    let mut labels = Vec::with_capacity(meta.num_nodes);
    for (ln, line) in lines(&label_text) {
        let l: usize = line
            .parse()
            .map_err(|_| parse_err(&label_path, ln, format!("bad label {line:?}")))?;
        if l >= meta.num_classes {
            return Err(parse_err(
                &label_path,
                ln,
                format!("label {l} out of range (num_classes={})", meta.num_classes),
            ));
        }
        labels.push(l);
    }
    if labels.len() != meta.num_nodes {
        return Err(Error::Dataset(format!(
            "{}: {} labels, num_nodes={}",
            label_path.display(),
            labels.len(),
            meta.num_nodes
        )));
    }

    let features = DenseMatrix::from_vec(meta.num_nodes, meta.feat_dim, data)?;
    Graph::from_edges(meta.num_nodes, &edges, features, labels, meta.num_classes)
}

/// Writes `g` as a dataset container directory. Reals use the shortest
/// representation that parses back to the same bits.
pub fn save_graph(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut edges = String::new();
    for (s, d) in g.edge_list() {
        writeln!(edges, "{s},{d}").unwrap();
    }
    let mut feats = String::new();
    for i in 0..g.num_nodes() {
        let row = g.features().row(i);
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                feats.push(',');
            }
            write!(feats, "{v:?}").unwrap();
        }
        feats.push('\n');
    }
    let mut labels = String::new();
    for l in g.labels() {
        writeln!(labels, "{l}").unwrap();
    }
    let meta = format!(
        "num_nodes={}\nnum_classes={}\nfeat_dim={}\n",
        g.num_nodes(),
        g.num_classes(),
        g.feat_dim()
    );

    for (name, body) in [
        (EDGES_FILE, edges),
        (FEATURES_FILE, feats),
        (LABELS_FILE, labels),
        (META_FILE, meta),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
