use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const ROW_HEADER: &str =
    "experiment,condition,model,seed,clean_acc,noisy_acc,selection_frac,params,peak_bytes,epoch_ms";

/// One `(condition, model, seed)` cell. Fields that do not apply are NaN
/// and are written as empty CSV fields.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub experiment: String,
    pub condition: String,
    pub model: String,
    pub seed: u64,
    pub clean_acc: f64,
    pub noisy_acc: f64,
    pub selection_frac: f64,
    pub params: usize,
    pub peak_bytes: usize,
    pub epoch_ms: f64,
}

impl BenchRow {
    /// `clean_acc − noisy_acc`.
    pub fn degradation(&self) -> f64 {
        self.clean_acc - self.noisy_acc
    }

    /// The row with the wall-clock column cleared; everything else is a
    /// deterministic function of the cell.
    pub fn without_timing(&self) -> Self {
        Self {
            epoch_ms: f64::NAN,
            ..self.clone()
        }
    }
}

pub(crate) fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub experiment: String,
    pub condition: String,
    pub model: String,
    pub seeds: usize,
    pub clean_mean: f64,
    pub clean_std: f64,
    pub noisy_mean: f64,
    pub noisy_std: f64,
    pub degradation_mean: f64,
    pub degradation_std: f64,
    pub selection_mean: f64,
    pub epoch_ms_mean: f64,
}

/// Mean and sample standard deviation (0 for a single value), ignoring NaN.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Additional CSV series keyed by file name.
    pub series: BTreeMap<String, String>,
}

impl BenchReport {
    pub fn rows_csv(&self) -> String {
        let mut s = format!("{ROW_HEADER}\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.condition,
                r.model,
                r.seed,
                num(r.clean_acc),
                num(r.noisy_acc),
                num(r.selection_frac),
                r.params,
                r.peak_bytes,
                num(r.epoch_ms)
            )
            .unwrap();
        }
        s
    }

    /// Rows grouped by `(experiment, condition, model)` in first-seen order,
    /// with statistics over seeds.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut keys: Vec<(String, String, String)> = Vec::new();
        for r in &self.rows {
            let k = (r.experiment.clone(), r.condition.clone(), r.model.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(experiment, condition, model)| {
                let group: Vec<&BenchRow> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        r.experiment == experiment && r.condition == condition && r.model == model
                    })
                    .collect();
                let col = |f: fn(&BenchRow) -> f64| group.iter().map(|r| f(r)).collect::<Vec<_>>();
                let (clean_mean, clean_std) = mean_std(&col(|r| r.clean_acc));
                let (noisy_mean, noisy_std) = mean_std(&col(|r| r.noisy_acc));
                let (degradation_mean, degradation_std) = mean_std(&col(BenchRow::degradation));
                AggregateRow {
                    seeds: group.len(),
                    clean_mean,
                    clean_std,
                    noisy_mean,
                    noisy_std,
                    degradation_mean,
                    degradation_std,
                    selection_mean: mean_std(&col(|r| r.selection_frac)).0,
                    epoch_ms_mean: mean_std(&col(|r| r.epoch_ms)).0,
                    experiment,
                    condition,
                    model,
                }
            })
            .collect()
    }

    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from(
            "experiment,condition,model,seeds,clean_mean,clean_std,noisy_mean,noisy_std,\
             degradation_mean,degradation_std,selection_mean,epoch_ms_mean\n",
        );
        for a in self.aggregate() {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                a.experiment,
                a.condition,
                a.model,
                a.seeds,
                num(a.clean_mean),
                num(a.clean_std),
                num(a.noisy_mean),
                num(a.noisy_std),
                num(a.degradation_mean),
                num(a.degradation_std),
                num(a.selection_mean),
                num(a.epoch_ms_mean)
            )
            .unwrap();
        }
        s
    }

    pub fn find(&self, condition: &str, model: &str) -> Vec<&BenchRow> {
        self.rows
            .iter()
            .filter(|r| r.condition == condition && r.model == model)
            .collect()
    }

    /// Writes `rows.csv`, `aggregate.csv` and every extra series into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            ("rows.csv".to_string(), self.rows_csv()),
            ("aggregate.csv".to_string(), self.aggregate_csv()),
        ];
        files.extend(self.series.iter().map(|(k, v)| (k.clone(), v.clone())));
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(condition: &str, seed: u64, clean: f64, noisy: f64) -> BenchRow {
        BenchRow {
            experiment: "noise".into(),
            condition: condition.into(),
            model: "m".into(),
            seed,
            clean_acc: clean,
            noisy_acc: noisy,
            selection_frac: f64::NAN,
            params: 4,
            peak_bytes: 8,
            epoch_ms: 1.0,
        }
    }

    #[test]
    fn mean_and_sample_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
        assert!(mean_std(&[f64::NAN]).0.is_nan());
    }

    #[test]
    fn aggregate_groups_by_condition() {
        let report = BenchReport {
            rows: vec![
                row("a", 0, 0.9, 0.8),
                row("b", 0, 0.5, f64::NAN),
                row("a", 1, 0.7, 0.6),
            ],
            series: BTreeMap::new(),
        };
        let agg = report.aggregate();
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].condition, "a");
        assert_eq!(agg[0].seeds, 2);
        assert!((agg[0].degradation_mean - 0.1).abs() < 1e-12);
        assert!(agg[1].noisy_mean.is_nan());
        let csv = report.rows_csv();
        assert!(csv.starts_with(ROW_HEADER));
        assert!(csv.contains("noise,b,m,0,0.5,,,4,8,1\n"));
    }
}
