use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::diagnostics::{layer_diagnostics, trace_csv};
use super::report::{num, BenchReport, BenchRow};
use super::{map_cells, BenchSpec, DatasetSource, Experiment};
use crate::error::{Error, Result};
use crate::graph::{
    augment_with_noise, load_graph, make_splits, Graph, SbmRecipe, SplitMasks, DEFAULT_RATIOS,
};
use crate::layers::selection_fraction;
use crate::model::{
    fit, init_model, layer_report, train_traced, FitOptions, GcnConfig, GcnModel, Model,
    ModelConfig, Stacking, TrainReport,
};

const NODESELECT: &str = "nodeselect";
const GCN: &str = "gcn";

/// A resolved graph.
pub struct Dataset;

impl Dataset {
    pub fn resolve(src: &DatasetSource) -> Result<Graph> {
        match src {
            DatasetSource::Synthetic(r) => r.build(),
            DatasetSource::Dir(dir) => load_graph(dir),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

struct Run {
    acc: f64,
    selection: f64,
    params: usize,
    peak_bytes: usize,
    epoch_ms: f64,
}

fn run_nodeselect(
    cfg: &ModelConfig,
    g: &Graph,
    masks: &SplitMasks,
    seed: u64,
) -> Result<(Run, Model, TrainReport)> {
    let cfg = ModelConfig {
        seed,
        ..cfg.clone()
    };
    let mut model = init_model(&cfg, g.feat_dim(), g.num_classes())?;
    let report = train_traced(&mut model, g, masks, &[])?;
    let run = Run {
        acc: report.test_acc,
        selection: mean(&report.layer_selection),
        params: model.num_parameters(),
        peak_bytes: report.peak_bytes,
        epoch_ms: report.mean_epoch_ms(),
    };
    Ok((run, model, report))
}

fn run_gcn(cfg: &GcnConfig, g: &Graph, masks: &SplitMasks, seed: u64) -> Result<Run> {
    let cfg = GcnConfig {
        seed,
        ..cfg.clone()
    };
    let mut model = GcnModel::new(&cfg, g.feat_dim(), g.num_classes())?;
    let opts = FitOptions {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        epochs: cfg.epochs,
        patience: cfg.patience,
        trace_nodes: Vec::new(),
    };
    let report = fit(&mut model, g, masks, &opts)?;
    Ok(Run {
        acc: report.test_acc,
        selection: f64::NAN,
        params: model.num_parameters(),
        peak_bytes: report.peak_bytes,
        epoch_ms: report.mean_epoch_ms(),
    })
}

fn row(
    exp: Experiment,
    condition: &str,
    model: &str,
    seed: u64,
    clean: f64,
    noisy: f64,
    run: &Run,
) -> BenchRow {
    BenchRow {
        experiment: exp.to_string(),
        condition: condition.to_string(),
        model: model.to_string(),
        seed,
        clean_acc: clean,
        noisy_acc: noisy,
        selection_frac: run.selection,
        params: run.params,
        peak_bytes: run.peak_bytes,
        epoch_ms: run.epoch_ms,
    }
}

fn noise_condition(f: f64) -> String {
    format!("noise={f}")
}

/// Clean and pseudo-vertex-augmented training of both models.
///
/// Per seed, one `clean` row per model uses a plain 20-20-60 split. Per
/// `(fraction, seed)` each model is trained on the augmented graph
/// (`noisy_acc`) and on the clean graph with the same masks restricted to
/// the original nodes (`clean_acc`), so both accuracies score the same test
/// nodes. Fraction 0 reuses the clean graph and split.
pub fn noise_bench(spec: &BenchSpec) -> Result<BenchReport> {
    let g = Dataset::resolve(&spec.dataset)?;
    let exp = Experiment::Noise;
    let mut cells: Vec<(Option<f64>, u64)> = spec.seeds.iter().map(|&s| (None, s)).collect();
    for &f in &spec.fractions {
        cells.extend(spec.seeds.iter().map(|&s| (Some(f), s)));
    }
    let rows = map_cells(spec.jobs, &cells, |&(fraction, seed)| {
        let Some(f) = fraction else {
            let masks = make_splits(&g, DEFAULT_RATIOS, seed)?;
            let (ns, _, _) = run_nodeselect(&spec.model, &g, &masks, seed)?;
            let gcn = run_gcn(&spec.gcn, &g, &masks, seed)?;
            return Ok(vec![
                row(exp, "clean", NODESELECT, seed, ns.acc, f64::NAN, &ns),
                row(exp, "clean", GCN, seed, gcn.acc, f64::NAN, &gcn),
            ]);
        };
        let (noisy_g, noisy_masks) = if f == 0.0 {
            (g.clone(), make_splits(&g, DEFAULT_RATIOS, seed)?)
        } else {
            augment_with_noise(&g, f, seed)?
        };
        let clean_masks = noisy_masks.truncate(g.num_nodes());
        let cond = noise_condition(f);
        let (ns_clean, _, _) = run_nodeselect(&spec.model, &g, &clean_masks, seed)?;
        let (ns_noisy, _, _) = run_nodeselect(&spec.model, &noisy_g, &noisy_masks, seed)?;
        let gcn_clean = run_gcn(&spec.gcn, &g, &clean_masks, seed)?;
        let gcn_noisy = run_gcn(&spec.gcn, &noisy_g, &noisy_masks, seed)?;
        Ok(vec![
            row(
                exp,
                &cond,
                NODESELECT,
                seed,
                ns_clean.acc,
                ns_noisy.acc,
                &ns_noisy,
            ),
            row(
                exp,
                &cond,
                GCN,
                seed,
                gcn_clean.acc,
                gcn_noisy.acc,
                &gcn_noisy,
            ),
        ])
    })?;
    Ok(BenchReport {
        rows: rows.into_iter().flatten().collect(),
        series: BTreeMap::new(),
    })
}

/// Five-epoch runs of both models on synthetic graphs of increasing size
/// with fixed expected degrees, recording parameters, peak matrix bytes
/// and time per epoch. Uses the first seed only.
pub fn scale_bench(spec: &BenchSpec) -> Result<BenchReport> {
    let recipe = match &spec.dataset {
        DatasetSource::Synthetic(r) => *r,
        DatasetSource::Dir(_) => SbmRecipe::default(),
    };
    let seed = spec.seeds[0];
    let exp = Experiment::Scale;
    let cfg = ModelConfig {
        epochs: 5,
        patience: usize::MAX,
        ..spec.model.clone()
    };
    let gcn_cfg = GcnConfig {
        epochs: 5,
        patience: usize::MAX,
        ..spec.gcn.clone()
    };
    let results = map_cells(spec.jobs, &spec.sizes, |&n| {
        let g = recipe.rescaled(n).build()?;
        let masks = make_splits(&g, DEFAULT_RATIOS, seed)?;
        let (ns, _, _) = run_nodeselect(&cfg, &g, &masks, seed)?;
        let gcn = run_gcn(&gcn_cfg, &g, &masks, seed)?;
        Ok((g.num_nodes(), g.num_edges(), ns, gcn))
    })?;
    let mut report = BenchReport::default();
    let mut series = String::from("n,edges,model,params,peak_bytes,epoch_ms\n");
    for (n, edges, ns, gcn) in &results {
        let cond = format!("n={n}");
        for (name, run) in [(NODESELECT, ns), (GCN, gcn)] {
            report
                .rows
                .push(row(exp, &cond, name, seed, run.acc, f64::NAN, run));
            writeln!(
                series,
                "{n},{edges},{name},{},{},{}",
                run.params,
                run.peak_bytes,
                num(run.epoch_ms)
            )
            .unwrap();
        }
    }
    report.series.insert("scale.csv".into(), series);
    Ok(report)
}

/// Mean selection fraction over layers for every threshold in `grid`,
/// with the weights of `model` held fixed.
pub fn threshold_audit(model: &Model, g: &Graph, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let pass = model.forward(g, false, 0)?;
    Ok(grid
        .iter()
        .map(|&t| {
            let fr: Vec<f64> = pass
                .layers
                .iter()
                .map(|l| selection_fraction(l.phat(), t))
                .collect();
            (t, mean(&fr))
        })
        .collect())
}

/// Training at every threshold of the grid, plus an audit of one trained
/// checkpoint (first seed, configured threshold) across the grid.
pub fn sweep_threshold(spec: &BenchSpec) -> Result<BenchReport> {
    let g = Dataset::resolve(&spec.dataset)?;
    let exp = Experiment::SweepThreshold;
    let cells: Vec<(f64, u64)> = spec
        .t_grid
        .iter()
        .flat_map(|&t| spec.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let rows = map_cells(spec.jobs, &cells, |&(t, seed)| {
        let masks = make_splits(&g, DEFAULT_RATIOS, seed)?;
        let cfg = ModelConfig {
            threshold: t,
            ..spec.model.clone()
        };
        let (run, _, _) = run_nodeselect(&cfg, &g, &masks, seed)?;
        Ok(row(
            exp,
            &format!("T={t}"),
            NODESELECT,
            seed,
            run.acc,
            f64::NAN,
            &run,
        ))
    })?;

    let seed = spec.seeds[0];
    let masks = make_splits(&g, DEFAULT_RATIOS, seed)?;
    let (_, model, _) = run_nodeselect(&spec.model, &g, &masks, seed)?;
    let audit = threshold_audit(&model, &g, &spec.t_grid)?;
    let mut series = String::from("threshold,selection_frac\n");
    for (t, s) in &audit {
        writeln!(series, "{t},{s}").unwrap();
    }
    Ok(BenchReport {
        rows,
        series: BTreeMap::from([("threshold_audit.csv".to_string(), series)]),
    })
}

/// Model accuracy, mean standalone layer accuracy and mean selection for
/// every layer count of the grid.
pub fn sweep_layers(spec: &BenchSpec) -> Result<BenchReport> {
    let g = Dataset::resolve(&spec.dataset)?;
    let exp = Experiment::SweepLayers;
    let cells: Vec<(usize, u64)> = spec
        .l_grid
        .iter()
        .flat_map(|&l| spec.seeds.iter().map(move |&s| (l, s)))
        .collect();
    let results = map_cells(spec.jobs, &cells, |&(l, seed)| {
        let masks = make_splits(&g, DEFAULT_RATIOS, seed)?;
        let cfg = ModelConfig {
            num_layers: l,
            stacking: Stacking::Parallel,
            ..spec.model.clone()
        };
        let (run, _, report) = run_nodeselect(&cfg, &g, &masks, seed)?;
        Ok((l, seed, run, mean(&report.layer_accuracy)))
    })?;
    let mut report = BenchReport::default();
    let mut series = String::from("layers,seed,model_acc,layer_mean_acc,selection_frac\n");
    for (l, seed, run, layer_mean) in &results {
        report.rows.push(row(
            exp,
            &format!("L={l}"),
            NODESELECT,
            *seed,
            run.acc,
            f64::NAN,
            run,
        ));
        writeln!(
            series,
            "{l},{seed},{},{},{}",
            run.acc,
            num(*layer_mean),
            num(run.selection)
        )
        .unwrap();
    }
    report.series.insert("layers.csv".into(), series);
    Ok(report)
}

/// Matched parallel and sequential models per seed.
pub fn stacking_compare(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.seeds.len() < 5 {
        log::warn!("stacking comparison with only {} seeds", spec.seeds.len());
    }
    let g = Dataset::resolve(&spec.dataset)?;
    let exp = Experiment::Stacking;
    let cells: Vec<(u64, Stacking)> = spec
        .seeds
        .iter()
        .flat_map(|&s| [(s, Stacking::Parallel), (s, Stacking::Sequential)])
        .collect();
    let rows = map_cells(spec.jobs, &cells, |&(seed, stacking)| {
        let masks = make_splits(&g, DEFAULT_RATIOS, seed)?;
        let cfg = ModelConfig {
            stacking,
            ..spec.model.clone()
        };
        let (run, _, _) = run_nodeselect(&cfg, &g, &masks, seed)?;
        Ok(row(
            exp,
            &stacking.to_string(),
            NODESELECT,
            seed,
            run.acc,
            f64::NAN,
            &run,
        ))
    })?;
    Ok(BenchReport {
        rows,
        series: BTreeMap::new(),
    })
}

/// Trains one model per seed with p̂ tracing and reports per-layer
/// diagnostics; the series files describe the first seed. With
/// `checkpoint` set, that model is diagnosed instead and nothing is
/// trained.
pub fn diagnostics_bench(spec: &BenchSpec, checkpoint: Option<&Model>) -> Result<BenchReport> {
    let g = Dataset::resolve(&spec.dataset)?;
    let exp = Experiment::Diagnostics;
    let trace: Vec<usize> = spec
        .trace_nodes
        .iter()
        .copied()
        .filter(|&v| v < g.num_nodes())
        .collect();
    let mut report = BenchReport::default();
    if let Some(model) = checkpoint {
        let seed = spec.seeds[0];
        let masks = make_splits(&g, DEFAULT_RATIOS, seed)?;
        let diag = layer_diagnostics(model, &g, &masks.test)?;
        let (selection, _) = layer_report(model, &g, &masks.test)?;
        let run = Run {
            acc: crate::model::evaluate(model, &g, &masks.test)?,
            selection: mean(&selection),
            params: model.num_parameters(),
            peak_bytes: model.param_bytes() + model.forward(&g, false, 0)?.nbytes(),
            epoch_ms: f64::NAN,
        };
        report.rows.push(row(
            exp,
            "checkpoint",
            NODESELECT,
            seed,
            run.acc,
            f64::NAN,
            &run,
        ));
        report.series.extend(diag.series("diag_"));
        return Ok(report);
    }
    let results = map_cells(spec.jobs, &spec.seeds, |&seed| {
        let masks = make_splits(&g, DEFAULT_RATIOS, seed)?;
        let cfg = ModelConfig {
            seed,
            ..spec.model.clone()
        };
        let mut model = init_model(&cfg, g.feat_dim(), g.num_classes())?;
        let tr = train_traced(&mut model, &g, &masks, &trace)?;
        let diag = layer_diagnostics(&model, &g, &masks.test)?;
        Ok((seed, model.num_parameters(), tr, diag))
    })?;
    for (k, (seed, params, tr, diag)) in results.iter().enumerate() {
        let run = Run {
            acc: tr.test_acc,
            selection: mean(&tr.layer_selection),
            params: *params,
            peak_bytes: tr.peak_bytes,
            epoch_ms: tr.mean_epoch_ms(),
        };
        report.rows.push(row(
            exp,
            "trained",
            NODESELECT,
            *seed,
            run.acc,
            f64::NAN,
            &run,
        ));
        if k == 0 {
            report.series.extend(diag.series("diag_"));
            report
                .series
                .insert("diag_phat_trace.csv".into(), trace_csv(&tr.phat_trace));
        }
    }
    Ok(report)
}

/// Dispatches on `spec.experiment`.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    spec.validate()?;
    match spec.experiment {
        Experiment::Noise => noise_bench(spec),
        Experiment::Scale => scale_bench(spec),
        Experiment::SweepThreshold => sweep_threshold(spec),
        Experiment::SweepLayers => sweep_layers(spec),
        Experiment::Stacking => stacking_compare(spec),
        Experiment::Diagnostics => diagnostics_bench(spec, None),
    }
    .map_err(|e| match e {
        Error::Io { .. } | Error::Parse { .. } => Error::Dataset(e.to_string()),
        other => other,
    })
}
