use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use watchlab_core::correction::{read_labels_csv, write_corrected_csv};
use watchlab_core::data::{compute_stats, ingest_csv_with, split_indices_chronological};
use watchlab_core::estimator::{fit_all_groups, read_curves_csv, smooth_curves, write_curves_csv, MissingGroup};
use watchlab_core::eval::{gauc, oracle_labels};
use watchlab_core::synth::{generate as synth_generate, read_sidecar, write_sidecar};
use watchlab_core::trainer::{fm_score, save_checkpoint, train, TrainOutcome, Validation};
use watchlab_core::{
    apply_method, correction::error_decomposition, BiasNoiseCurves, CorrectionParams, Dataset, EvalReport, Method,
    TrainConfig,
};

use crate::config::PipelineConfig;
use crate::error::ConfigError;
use crate::manifest::{record_stage, StageRecord};
use crate::seeds::{sub_seed, GENERATE, TRAIN};

pub const DATASET_FILE: &str = "dataset.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const CURVES_VS_TRUTH_FILE: &str = "curves_vs_truth.csv";
pub const REPORTS_FILE: &str = "reports.json";
pub const OVERALL_FILE: &str = "overall.csv";
pub const BY_DURATION_FILE: &str = "by_duration.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const ALPHA_FILE: &str = "alpha_selection.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const ERROR_CURVES_FILE: &str = "error_curves.csv";
pub const GRID_FILE: &str = "gauc_grid.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// One labelled training set: a method and, for d2co_s, its alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelJob {
    pub method: Method,
    pub alpha: Option<f64>,
}

impl LabelJob {
    pub fn file_name(&self) -> String {
        match self.alpha {
            Some(a) => format!("labels_{}_{a}.csv", self.method.id()),
            None => format!("labels_{}.csv", self.method.id()),
        }
    }
}

/// Watch time first, the configured methods in order, the oracle last; d2co_s
/// expands to one job per alpha.
pub fn label_jobs(config: &PipelineConfig) -> Result<Vec<LabelJob>, ConfigError> {
    let mut jobs = vec![LabelJob {
        method: Method::WatchTime,
        alpha: None,
    }];
    for m in config.methods()? {
        match m {
            Method::WatchTime | Method::Oracle => {}
            Method::D2coS => jobs.extend(config.alphas().into_iter().map(|a| LabelJob {
                method: m,
                alpha: Some(a),
            })),
            _ => jobs.push(LabelJob { method: m, alpha: None }),
        }
    }
    jobs.push(LabelJob {
        method: Method::Oracle,
        alpha: None,
    });
    Ok(jobs)
}

fn input_path(config: &PipelineConfig) -> PathBuf {
    config
        .paths
        .input
        .clone()
        .unwrap_or_else(|| config.paths.out.join(DATASET_FILE))
}

fn truth_path(config: &PipelineConfig) -> Result<Option<PathBuf>, ConfigError> {
    match &config.paths.truth {
        Some(p) if p.exists() => Ok(Some(p.clone())),
        Some(p) => Err(ConfigError::MissingInput {
            what: "ground-truth sidecar",
            path: p.clone(),
        }),
        None => {
            let p = config.paths.out.join(TRUTH_FILE);
            Ok(p.exists().then_some(p))
        }
    }
}

fn require(path: &Path, what: &'static str) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(ConfigError::MissingInput {
            what,
            path: path.to_path_buf(),
        })
    }
}

fn load_dataset(config: &PipelineConfig) -> Result<(Dataset, PathBuf)> {
    let path = input_path(config);
    require(&path, "input dataset")?;
    let dataset = ingest_csv_with(&path, &config.schema, config.ingest)?;
    Ok((dataset, path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn csv_out(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_file(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(header)?;
        for r in rows {
            wtr.write_record(r)?;
        }
        wtr.flush()?;
        Ok(())
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Synthesizes a dataset and its ground-truth sidecar.
pub fn generate(config: &PipelineConfig) -> Result<()> {
    let out = &config.paths.out;
    ensure_dir(out)?;
    let mut synth = config.synth.clone();
    synth.seed = sub_seed(config.seed, GENERATE);
    let (dataset, truth) = synth_generate(&synth).context("generating synthetic data")?;

    let data_path = out.join(DATASET_FILE);
    let truth_path = out.join(TRUTH_FILE);
    write_file(&data_path, |w| Ok(watchlab_core::data::write_csv(&dataset, w)?))?;
    write_file(&truth_path, |w| Ok(write_sidecar(&truth, w)?))?;

    let mut record = StageRecord::new(config)?;
    record.output(&data_path)?;
    record.output(&truth_path)?;
    record.note("rows", dataset.len())?;
    record.note("synth_seed", synth.seed)?;
    record_stage(out, "generate", record)?;
    eprintln!("generate: {} rows -> {}", dataset.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct CurveError {
    durations_compared: usize,
    max_rel_err_w_plus: f64,
    max_rel_err_w_minus: f64,
    fitted_within_10pct: f64,
}

/// Compares smoothed curves with the generator's curves at every key.
fn compare_with_truth(
    curves: &BiasNoiseCurves,
    dataset: &Dataset,
    truth_file: &Path,
    out_file: &Path,
) -> Result<CurveError> {
    let truth = read_sidecar(File::open(truth_file).with_context(|| format!("opening {}", truth_file.display()))?)?;
    if truth.len() != dataset.len() {
        bail!(
            "sidecar {} has {} rows but the dataset has {}",
            truth_file.display(),
            truth.len(),
            dataset.len()
        );
    }
    let mut by_d: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for (row, t) in dataset.rows.iter().zip(&truth) {
        by_d.entry(row.duration_s).or_insert((t.w_plus_d, t.w_minus_d));
    }
    let rel = |est: f64, tru: f64| (est - tru).abs() / tru.abs().max(f64::MIN_POSITIVE);
    let mut rows = Vec::new();
    let (mut max_p, mut max_m) = (0.0f64, 0.0f64);
    let (mut fitted, mut close) = (0usize, 0usize);
    for p in &curves.points {
        let Some(&(tp, tm)) = by_d.get(&p.d) else { continue };
        max_p = max_p.max(rel(p.w_plus_smooth, tp));
        max_m = max_m.max(rel(p.w_minus_smooth, tm));
        if p.weight_plus.is_some() {
            fitted += 1;
            if rel(p.w_plus_raw, tp) < 0.1 {
                close += 1;
            }
        }
        rows.push(vec![
            p.d.to_string(),
            p.w_plus_smooth.to_string(),
            tp.to_string(),
            p.w_minus_smooth.to_string(),
            tm.to_string(),
        ]);
    }
    csv_out(
        out_file,
        &["d", "w_plus_est", "w_plus_true", "w_minus_est", "w_minus_true"],
        &rows,
    )?;
    Ok(CurveError {
        durations_compared: rows.len(),
        max_rel_err_w_plus: max_p,
        max_rel_err_w_minus: max_m,
        fitted_within_10pct: if fitted > 0 { close as f64 / fitted as f64 } else { 0.0 },
    })
}

fn correction_params(config: &PipelineConfig, job: LabelJob, curves: &BiasNoiseCurves) -> CorrectionParams {
    let c = &config.correction;
    let mut params = CorrectionParams::new(job.method);
    params.bins = c.bins;
    params.denoise_threshold_s = c.denoise_threshold_s;
    params.clip = c.clip;
    params.alpha = job.alpha;
    if job.method.needs_curves() {
        params.curves = Some(curves.clone());
    }
    params
}

/// Estimates bias/noise curves and writes one labelled CSV per method.
pub fn correct(config: &PipelineConfig) -> Result<()> {
    let out = &config.paths.out;
    ensure_dir(out)?;
    let jobs = label_jobs(config)?;
    let (dataset, input) = load_dataset(config)?;
    let truth = truth_path(config)?;

    let fits = fit_all_groups(&dataset, &config.estimator.gmm()).context("fitting duration groups")?;
    let curves = smooth_curves(&fits, config.estimator.window)?;
    let curves_path = out.join(CURVES_FILE);
    write_file(&curves_path, |w| Ok(write_curves_csv(&curves, w)?))?;

    let mut record = StageRecord::new(config)?;
    record.input(&input)?;
    record.output(&curves_path)?;
    for job in &jobs {
        let labelled = apply_method(&dataset, &correction_params(config, *job, &curves))
            .with_context(|| format!("labelling with {}", job.method))?;
        let path = out.join(job.file_name());
        write_file(&path, |w| Ok(write_corrected_csv(&dataset, &labelled, w)?))?;
        record.output(&path)?;
    }

    let (too_small, degenerate): (Vec<_>, Vec<_>) = fits
        .missing
        .iter()
        .partition(|(_, m)| matches!(m, MissingGroup::TooSmall { .. }));
    record.note("groups_fitted", fits.fitted.len())?;
    record.note(
        "groups_too_small",
        too_small.iter().map(|(d, _)| **d).collect::<Vec<_>>(),
    )?;
    record.note(
        "groups_degenerate",
        degenerate.iter().map(|(d, _)| **d).collect::<Vec<_>>(),
    )?;
    record.note(
        "groups_not_converged",
        fits.fitted
            .values()
            .filter(|e| !e.converged)
            .map(|e| e.d)
            .collect::<Vec<_>>(),
    )?;
    record.note(
        "repaired_keys",
        curves
            .points
            .iter()
            .filter(|p| p.repaired)
            .map(|p| p.d)
            .collect::<Vec<_>>(),
    )?;
    if let Some(truth_file) = truth {
        record.input(&truth_file)?;
        let cmp_path = out.join(CURVES_VS_TRUTH_FILE);
        let summary = compare_with_truth(&curves, &dataset, &truth_file, &cmp_path)?;
        record.output(&cmp_path)?;
        record.note("curve_error", summary)?;
    }
    record_stage(out, "correct", record)?;
    eprintln!(
        "correct: {} groups fitted, {} label files -> {}",
        fits.fitted.len(),
        jobs.len(),
        out.display()
    );
    Ok(())
}

fn best_val_gauc(outcome: &TrainOutcome) -> f64 {
    outcome
        .history
        .get(outcome.best_epoch.saturating_sub(1))
        .and_then(|h| h.val_gauc)
        .unwrap_or(f64::NEG_INFINITY)
}

fn scores(outcome: &TrainOutcome, data: &Dataset) -> Vec<f64> {
    data.rows.iter().map(|r| fm_score(&outcome.model, r)).collect()
}

struct Splits {
    train_idx: Vec<usize>,
    train: Dataset,
    val: Dataset,
    test: Dataset,
    val_truth: Vec<bool>,
    test_truth: Vec<bool>,
}

impl Splits {
    fn new(config: &PipelineConfig, dataset: &Dataset) -> Result<Self> {
        let [tr, va, te] = split_indices_chronological(dataset, config.split())?;
        let (val, test) = (dataset.subset(&va), dataset.subset(&te));
        let gt = config.evaluation.ground_truth;
        Ok(Splits {
            train: dataset.subset(&tr),
            val_truth: oracle_labels(&val, gt)?,
            test_truth: oracle_labels(&test, gt)?,
            train_idx: tr,
            val,
            test,
        })
    }

    fn train_labels(&self, labels: &[f64]) -> Vec<f64> {
        self.train_idx.iter().map(|&i| labels[i]).collect()
    }

    fn fit(&self, labels: &[f64], config: &TrainConfig) -> Result<TrainOutcome> {
        let validation = Validation {
            dataset: &self.val,
            interest: &self.val_truth,
        };
        Ok(train(
            &self.train,
            &self.train_labels(labels),
            Some(validation),
            config,
        )?)
    }

    fn test_gauc(&self, outcome: &TrainOutcome) -> Result<f64> {
        let s = scores(outcome, &self.test);
        Ok(gauc(&s, &self.test_truth, &self.test.user_ids())?.value)
    }
}

fn trainer_config(config: &PipelineConfig, run_seed: u64) -> TrainConfig {
    let mut tc = config.trainer.clone();
    tc.seed = sub_seed(run_seed, TRAIN);
    tc
}

fn read_label_file(path: &Path, job: &LabelJob, n_rows: usize) -> Result<Vec<f64>> {
    require(path, "label file (run `correct` first)")?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (method, labels) = read_labels_csv(file).with_context(|| format!("reading {}", path.display()))?;
    if method != job.method {
        bail!("{} holds {} labels, expected {}", path.display(), method, job.method);
    }
    if labels.len() != n_rows {
        bail!("{} has {} labels for {} rows", path.display(), labels.len(), n_rows);
    }
    Ok(labels)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains one model per method and seed, picks alpha on validation and
/// writes the test reports.
pub fn train_eval(config: &PipelineConfig) -> Result<()> {
    let out = &config.paths.out;
    ensure_dir(out)?;
    let jobs = label_jobs(config)?;
    let (dataset, input) = load_dataset(config)?;
    let mut record = StageRecord::new(config)?;
    record.input(&input)?;

    let mut labels = Vec::with_capacity(jobs.len());
    for job in &jobs {
        let path = out.join(job.file_name());
        labels.push(read_label_file(&path, job, dataset.len())?);
        record.input(&path)?;
    }
    let splits = Splits::new(config, &dataset)?;
    record.note("split_rows", [splits.train.len(), splits.val.len(), splits.test.len()])?;

    let ks = &config.evaluation.ks;
    let n_ranges = config.evaluation.n_ranges;
    let mut reports: Vec<EvalReport> = Vec::new();
    let mut alpha_rows = Vec::new();
    let mut chosen_alpha: BTreeMap<u64, f64> = BTreeMap::new();
    for seed in config.run_seeds() {
        let tc = trainer_config(config, seed);
        let outcomes: Vec<TrainOutcome> = jobs
            .par_iter()
            .zip(&labels)
            .map(|(job, l)| {
                splits
                    .fit(l, &tc)
                    .with_context(|| format!("training on {} labels", job.method))
            })
            .collect::<Result<_>>()?;

        // among alpha variants keep the best validation GAUC; earlier wins ties
        let mut picked: Vec<usize> = Vec::new();
        for (i, job) in jobs.iter().enumerate() {
            match picked.iter_mut().find(|p| jobs[**p].method == job.method) {
                Some(p) if best_val_gauc(&outcomes[i]) > best_val_gauc(&outcomes[*p]) => *p = i,
                Some(_) => {}
                None => picked.push(i),
            }
        }
        for (i, job) in jobs.iter().enumerate() {
            if let Some(a) = job.alpha {
                let selected = picked.contains(&i);
                if selected {
                    chosen_alpha.insert(seed, a);
                }
                alpha_rows.push(vec![
                    seed.to_string(),
                    a.to_string(),
                    best_val_gauc(&outcomes[i]).to_string(),
                    u8::from(selected).to_string(),
                ]);
            }
        }

        if config.evaluation.save_checkpoints {
            let dir = out.join(CHECKPOINT_DIR);
            ensure_dir(&dir)?;
            for &i in &picked {
                let path = dir.join(format!("{}_seed{seed}.json", jobs[i].method));
                write_file(&path, |w| Ok(save_checkpoint(&outcomes[i].model, w)?))?;
                record.output(&path)?;
            }
        }

        let mut seed_reports = picked
            .iter()
            .map(|&i| {
                let s = scores(&outcomes[i], &splits.test);
                Ok(EvalReport::evaluate(
                    jobs[i].method.id(),
                    seed,
                    &s,
                    &splits.test_truth,
                    &splits.test,
                    ks,
                    n_ranges,
                )?)
            })
            .collect::<Result<Vec<_>>>()?;
        let wt = seed_reports.first().cloned().expect("watch time job");
        let oracle = seed_reports.last().cloned().expect("oracle job");
        for r in &mut seed_reports {
            r.set_improvement(&wt, &oracle);
        }
        reports.extend(seed_reports);
    }

    let reports_path = out.join(REPORTS_FILE);
    write_file(&reports_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &reports)?;
        writeln!(w)?;
        Ok(())
    })?;
    let t2 = write_overall(out, &reports, ks)?;
    let t3 = write_by_duration(out, &reports, ks)?;
    let summary = write_summary(out, &reports, ks)?;
    for p in [&reports_path, &t2, &t3, &summary] {
        record.output(p)?;
    }
    if !alpha_rows.is_empty() {
        let path = out.join(ALPHA_FILE);
        csv_out(&path, &["seed", "alpha", "val_gauc", "selected"], &alpha_rows)?;
        record.output(&path)?;
        record.note("selected_alpha", &chosen_alpha)?;
    }
    if config.sweep.is_some() {
        let path = run_sweep(config, &dataset, &splits)?;
        record.output(&path)?;
    }
    record_stage(out, "train_eval", record)?;
    eprintln!("train-eval: {} reports -> {}", reports.len(), out.display());
    Ok(())
}

fn write_overall(out: &Path, reports: &[EvalReport], ks: &[usize]) -> Result<PathBuf> {
    let mut header = vec!["seed".to_string(), "method".into(), "gauc".into()];
    header.extend(ks.iter().map(|k| format!("ndcg@{k}")));
    header.extend(["n_users_evaluated".into(), "n_users_skipped".into()]);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.seed.to_string(), r.method.clone(), r.gauc.to_string()];
            row.extend(ks.iter().map(|k| opt(r.ndcg_at.get(k).copied())));
            row.extend([r.n_users_evaluated.to_string(), r.n_users_skipped.to_string()]);
            row
        })
        .collect();
    let path = out.join(OVERALL_FILE);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_out(&path, &header, &rows)?;
    Ok(path)
}

fn write_by_duration(out: &Path, reports: &[EvalReport], ks: &[usize]) -> Result<PathBuf> {
    let mut header: Vec<String> = ["seed", "method", "range", "lo", "hi", "n_rows", "gauc"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(ks.iter().map(|k| format!("ndcg@{k}")));
    header.push("improve_pct".into());
    let mut rows = Vec::new();
    for r in reports {
        for (i, range) in r.ranges.iter().enumerate() {
            let mut row = vec![
                r.seed.to_string(),
                r.method.clone(),
                i.to_string(),
                range.lo.to_string(),
                range.hi.to_string(),
                range.n_rows.to_string(),
                opt(range.gauc),
            ];
            row.extend(ks.iter().map(|k| opt(range.ndcg.get(k).copied().flatten())));
            row.push(opt(r.improve_pct.get(i).copied().flatten()));
            rows.push(row);
        }
    }
    let path = out.join(BY_DURATION_FILE);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_out(&path, &header, &rows)?;
    Ok(path)
}

fn write_summary(out: &Path, reports: &[EvalReport], ks: &[usize]) -> Result<PathBuf> {
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut rows = Vec::new();
    for m in methods {
        let of: Vec<&EvalReport> = reports.iter().filter(|r| r.method == m).collect();
        let mut metrics: Vec<(String, Vec<f64>)> = vec![("gauc".into(), of.iter().map(|r| r.gauc).collect())];
        for k in ks {
            metrics.push((
                format!("ndcg@{k}"),
                of.iter().filter_map(|r| r.ndcg_at.get(k).copied()).collect(),
            ));
        }
        for (name, values) in metrics {
            let (mean, std) = mean_std(&values);
            rows.push(vec![
                m.to_string(),
                name,
                mean.to_string(),
                std.to_string(),
                values.len().to_string(),
            ]);
        }
    }
    let path = out.join(SUMMARY_FILE);
    csv_out(&path, &["method", "metric", "mean", "std", "n_seeds"], &rows)?;
    Ok(path)
}

/// Window by alpha grid for d2co_s: validation and test GAUC per seed.
fn run_sweep(config: &PipelineConfig, dataset: &Dataset, splits: &Splits) -> Result<PathBuf> {
    let sweep = config.sweep.as_ref().expect("caller checked");
    let out = &config.paths.out;
    let curves_path = out.join(CURVES_FILE);
    require(&curves_path, "curves file (run `correct` first)")?;
    let base = read_curves_csv(File::open(&curves_path)?, config.estimator.window)?;
    let cells: Vec<(usize, f64)> = sweep
        .windows
        .iter()
        .flat_map(|&w| sweep.alphas.iter().map(move |&a| (w, a)))
        .collect();
    let mut rows = Vec::new();
    for seed in config.run_seeds() {
        let tc = trainer_config(config, seed);
        let results: Vec<(f64, f64)> = cells
            .par_iter()
            .map(|&(window, alpha)| {
                let curves = base.resmooth(window);
                let job = LabelJob {
                    method: Method::D2coS,
                    alpha: Some(alpha),
                };
                let labels = apply_method(dataset, &correction_params(config, job, &curves))?.labels;
                let outcome = splits.fit(&labels, &tc)?;
                Ok((best_val_gauc(&outcome), splits.test_gauc(&outcome)?))
            })
            .collect::<Result<_>>()?;
        for (&(window, alpha), (val, test)) in cells.iter().zip(results) {
            rows.push(vec![
                seed.to_string(),
                window.to_string(),
                alpha.to_string(),
                val.to_string(),
                test.to_string(),
            ]);
        }
    }
    let path = out.join(SWEEP_FILE);
    csv_out(&path, &["seed", "window", "alpha", "val_gauc", "test_gauc"], &rows)?;
    Ok(path)
}

/// Writes plot data: error-decomposition curves and, after a sweep, the
/// window by alpha GAUC grid.
pub fn report(config: &PipelineConfig) -> Result<()> {
    let out = &config.paths.out;
    let curves_path = out.join(CURVES_FILE);
    require(&curves_path, "curves file (run `correct` first)")?;
    let (dataset, input) = load_dataset(config)?;
    let curves = read_curves_csv(File::open(&curves_path)?, config.estimator.window)?;
    let stats = compute_stats(&dataset)?;
    let points = error_decomposition(&curves, stats.w_max)?;

    let mut record = StageRecord::new(config)?;
    record.input(&input)?;
    record.input(&curves_path)?;
    let err_path = out.join(ERROR_CURVES_FILE);
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.d.to_string(), p.bias_err.to_string(), p.noise_err.to_string()])
        .collect();
    csv_out(&err_path, &["d", "bias_err", "noise_err"], &rows)?;
    record.output(&err_path)?;

    let sweep_path = out.join(SWEEP_FILE);
    if sweep_path.exists() {
        record.input(&sweep_path)?;
        let grid_path = out.join(GRID_FILE);
        write_grid(&sweep_path, &grid_path)?;
        record.output(&grid_path)?;
    } else {
        record.note("gauc_grid", "omitted: no sweep data")?;
    }
    record_stage(out, "report", record)?;
    eprintln!("report: plot data -> {}", out.display());
    Ok(())
}

fn write_grid(sweep_path: &Path, grid_path: &Path) -> Result<()> {
    let mut rdr = csv::Reader::from_path(sweep_path)?;
    // keyed by the cell text so the grid keeps the sweep's row order
    let mut cells: Vec<((String, String), Vec<f64>, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let key = (rec[1].to_string(), rec[2].to_string());
        let val: f64 = rec[3].parse().context("sweep val_gauc")?;
        let test: f64 = rec[4].parse().context("sweep test_gauc")?;
        match cells.iter_mut().find(|c| c.0 == key) {
            Some(c) => {
                c.1.push(val);
                c.2.push(test);
            }
            None => cells.push((key, vec![val], vec![test])),
        }
    }
    let rows: Vec<Vec<String>> = cells
        .into_iter()
        .map(|((w, a), val, test)| {
            vec![
                w,
                a,
                mean_std(&val).0.to_string(),
                mean_std(&test).0.to_string(),
                test.len().to_string(),
            ]
        })
        .collect();
    csv_out(
        grid_path,
        &["window", "alpha", "val_gauc_mean", "test_gauc_mean", "n_seeds"],
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jobs_bracket_methods_with_watch_time_and_oracle() {
        let c = PipelineConfig::from_toml(
            "[correction]\nmethods = [\"oracle\", \"d2co_a\", \"d2co_s\"]\nalpha = [-0.01, -0.02]",
        )
        .unwrap();
        let ids: Vec<String> = label_jobs(&c).unwrap().iter().map(LabelJob::file_name).collect();
        assert_eq!(
            ids,
            [
                "labels_watch_time.csv",
                "labels_d2co_a.csv",
                "labels_d2co_s_-0.01.csv",
                "labels_d2co_s_-0.02.csv",
                "labels_oracle.csv"
            ]
        );
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
