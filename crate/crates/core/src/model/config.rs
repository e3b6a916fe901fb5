use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::Activation;
use crate::layers::GateMode;

/// How the layers of a model are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stacking {
    /// Every layer reads the input features; outputs are summed.
    #[default]
    Parallel,
    /// Each layer reads the previous layer's output.
    Sequential,
}

impl fmt::Display for Stacking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stacking::Parallel => "parallel",
            Stacking::Sequential => "sequential",
        })
    }
}

impl FromStr for Stacking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Stacking::Parallel),
            "sequential" => Ok(Stacking::Sequential),
            _ => Err(Error::Config(format!(
                "stacking must be parallel|sequential, got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    /// Embedding width F′; `None` means the number of classes.
    pub out_dim: Option<usize>,
    pub threshold: f64,
    pub gate_mode: GateMode,
    /// Hop depth Q; 1 selects the one-hop layer.
    pub depth: usize,
    pub stacking: Stacking,
    pub activation: Activation,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 3,
            out_dim: None,
            threshold: 0.4,
            gate_mode: GateMode::Hard,
            depth: 1,
            stacking: Stacking::Parallel,
            activation: Activation::Relu,
            dropout: 0.5,
            lr: 0.005,
            weight_decay: 5e-4,
            epochs: 500,
            patience: 50,
            seed: 0,
        }
    }
}

pub const CONFIG_KEYS: [&str; 13] = [
    "num_layers",
    "out_dim",
    "threshold",
    "gate_mode",
    "depth",
    "stacking",
    "activation",
    "dropout",
    "lr",
    "weight_decay",
    "epochs",
    "patience",
    "seed",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be >= 1".into()));
        }
        if self.out_dim == Some(0) {
            return Err(Error::Config("out_dim must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be >= 0, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }

    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "num_layers" => self.num_layers = parse(key, value)?,
            "out_dim" => {
                self.out_dim = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "threshold" => self.threshold = parse(key, value)?,
            "gate_mode" => self.gate_mode = value.parse()?,
            "depth" => self.depth = parse(key, value)?,
            "stacking" => self.stacking = value.parse()?,
            "activation" => self.activation = value.parse()?,
            "dropout" => self.dropout = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses flat `key=value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored; unknown keys are an error.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", ln + 1)))?;
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", ln + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("num_layers", self.num_layers.to_string()),
            (
                "out_dim",
                self.out_dim
                    .map_or_else(|| "auto".to_string(), |d| d.to_string()),
            ),
            ("threshold", format!("{:?}", self.threshold)),
            ("gate_mode", self.gate_mode.to_string()),
            ("depth", self.depth.to_string()),
            ("stacking", self.stacking.to_string()),
            ("activation", self.activation.to_string()),
            ("dropout", format!("{:?}", self.dropout)),
            ("lr", format!("{:?}", self.lr)),
            ("weight_decay", format!("{:?}", self.weight_decay)),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = ModelConfig {
            num_layers: 7,
            out_dim: Some(5),
            threshold: 0.33,
            gate_mode: GateMode::Soft,
            depth: 2,
            stacking: Stacking::Sequential,
            activation: Activation::Elu,
            dropout: 0.25,
            lr: 0.01,
            weight_decay: 0.0,
            epochs: 9,
            patience: 3,
            seed: 123,
        };
        assert_eq!(ModelConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
        assert_eq!(cfg.entries().len(), CONFIG_KEYS.len());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            ModelConfig::from_kv_str("num_layers=2\nhidden=16\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            "num_layers=0",
            "threshold=1.5",
            "dropout=1",
            "gate_mode=fuzzy",
            "lr=abc",
        ] {
            assert!(ModelConfig::from_kv_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn comments_and_defaults() {
        let cfg = ModelConfig::from_kv_str("# comment\n\nlr = 0.1\n").unwrap();
        assert_eq!(cfg.lr, 0.1);
        assert_eq!(cfg.num_layers, 3);
    }
}
