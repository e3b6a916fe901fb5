//! Plain-text checkpoints: a header, the dimensions, the config as
//! `key=value` lines and every parameter as a row of `{:?}`-formatted
//! reals, which parse back bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::config::ModelConfig;
use super::network::{init_model, Model};
use crate::error::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "nodeselect-checkpoint 1";

pub fn checkpoint_to_string(m: &Model) -> String {
    let mut s = String::new();
    writeln!(s, "{CHECKPOINT_HEADER}").unwrap();
    writeln!(s, "dims {} {}", m.in_dim(), m.num_classes()).unwrap();
    s.push_str(&m.config.to_kv_string());
    for p in m.params() {
        let (r, c) = p.shape();
        let vals: Vec<String> = p.value.data().iter().map(|v| format!("{v:?}")).collect();
        writeln!(s, "param {r} {c} {}", vals.join(" ")).unwrap();
    }
    s
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn checkpoint_from_str(text: &str) -> Result<Model> {
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_HEADER) {
        return Err(bad("missing or unsupported header"));
    }
    let dims: Vec<usize> = lines
        .next()
        .and_then(|l| l.strip_prefix("dims "))
        .ok_or_else(|| bad("missing dims line"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let [in_dim, num_classes] = dims[..] else {
        return Err(bad("dims line needs two values"));
    };
    let mut cfg = ModelConfig::default();
    let mut params = Vec::new();
    for line in lines {
        if let Some(rest) = line.strip_prefix("param ") {
            let mut toks = rest.split_whitespace();
            let mut dim = || -> Result<usize> {
                toks.next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("bad param shape"))
            };
            let (r, c) = (dim()?, dim()?);
            let vals: Vec<f64> = toks
                .map(|t| t.parse().map_err(|_| bad(format!("bad value {t:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != r * c {
                return Err(bad(format!(
                    "param {} has {} values for {r}x{c}",
                    params.len(),
                    vals.len()
                )));
            }
            params.push(((r, c), vals));
        } else if let Some((k, v)) = line.split_once('=') {
            cfg.set(k, v)?;
        } else if !line.trim().is_empty() {
            return Err(bad(format!("unexpected line {line:?}")));
        }
    }
    let mut model = init_model(&cfg, in_dim, num_classes)?;
    let mut slots = model.params_mut();
    if slots.len() != params.len() {
        return Err(bad(format!(
            "expected {} params, found {}",
            slots.len(),
            params.len()
        )));
    }
    for (slot, (shape, vals)) in slots.iter_mut().zip(params) {
        if slot.shape() != shape {
            return Err(bad(format!(
                "param shape {shape:?} does not match {:?}",
                slot.shape()
            )));
        }
        slot.value.data_mut().copy_from_slice(&vals);
    }
    Ok(model)
}

pub fn save_checkpoint(m: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_string(m)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Stacking;

    #[test]
    fn round_trip_is_exact() {
        for (depth, stacking) in [(1, Stacking::Parallel), (2, Stacking::Sequential)] {
            let cfg = ModelConfig {
                depth,
                stacking,
                seed: 11,
                threshold: 0.3,
                ..ModelConfig::default()
            };
            let m = init_model(&cfg, 5, 3).unwrap();
            let back = checkpoint_from_str(&checkpoint_to_string(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let m = init_model(&ModelConfig::default(), 4, 2).unwrap();
        let text = checkpoint_to_string(&m);
        assert!(checkpoint_from_str("garbage").is_err());
        assert!(checkpoint_from_str(&text.replace("dims 4 2", "dims 5 2")).is_err());
        let truncated: String = text
            .lines()
            .take(text.lines().count() - 1)
            .collect::<Vec<_>>()
            .join("\n");
        assert!(checkpoint_from_str(&truncated).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = init_model(&ModelConfig::default(), 3, 3).unwrap();
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), m);
        assert!(load_checkpoint(dir.path().join("nope")).is_err());
    }
}
