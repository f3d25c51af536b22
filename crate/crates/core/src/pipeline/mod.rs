//! Configuration, end-to-end runs, parameter sweeps and file artifacts.
//!
//! Trial `t` of a run uses seed `seed + t`, both for synthetic data and for
//! clustering. Run and sweep functions are pure; `write_*` persist them.

mod config;
mod files;
mod sweep;

use std::path::Path;

use serde::Serialize;

pub use config::{format_pairs, generator_from_pairs, generator_pairs, merge_pairs, parse_pairs, Input, Pairs, RunConfig, GENERATOR_KEYS, RUN_KEYS};
pub use files::{
    export_plot_data, labels_csv, points_csv, read_labels_csv, read_points_csv, read_points_csv_with_header,
    read_scores_csv, scores_csv, write_atomic, write_points_csv,
};
pub use sweep::{run_sweep, write_sweep, GridPoint, SweepConfig, SweepReport};

use crate::error::{Error, Result};
use crate::evaluation::{outlier_f_measure, rand_index, rand_index_on_inliers, MetricReport};
use crate::geometry::PointCloud;
use crate::spectral::{cluster, cluster_prepared, ClusterConfig, ClusterResult, LocalStructure};

/// Ground truth for scoring; `labels[i] < 0` marks an outlier.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub labels: Vec<i64>,
}

impl Truth {
    pub fn outlier_flags(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l < 0).collect()
    }

    pub fn has_outliers(&self) -> bool {
        self.labels.iter().any(|&l| l < 0)
    }
}

/// Points of one trial plus optional ground truth.
pub fn load_input(input: &Input, seed: u64) -> Result<(PointCloud, Option<Truth>)> {
    match input {
        Input::Generator(g) => {
            let lc = g.generate(seed)?;
            let labels = lc
                .labels
                .iter()
                .zip(&lc.outlier_flags)
                .map(|(&l, &out)| if out { -1 } else { l as i64 })
                .collect();
            Ok((lc.cloud, Some(Truth { labels })))
        }
        Input::Csv {
            path,
            has_labels,
            header,
        } => {
            let (cloud, labels) = read_points_csv(path, *has_labels, *header)?;
            Ok((cloud, labels.map(|labels| Truth { labels })))
        }
    }
}

/// Scores of one finished trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Against ground truth: over truth inliers kept by the filter when
    /// outlier filtering ran, over all points (outliers as their own class)
    /// otherwise.
    pub rand_index: Option<f64>,
    /// Present when filtering ran and the truth contains outliers.
    pub f_measure: Option<f64>,
    pub outliers_removed: usize,
    pub eigenvalues: Vec<f64>,
    pub kmeans_inertia: f64,
}

/// Rand index and F-measure of a clustering against the truth.
pub fn score(result: &ClusterResult, truth: &Truth, filtered: bool) -> Result<(f64, Option<f64>)> {
    let flags = truth.outlier_flags();
    if filtered {
        // Outliers get a label beyond every manifold so they never count.
        let truth_ids: Vec<usize> = truth.labels.iter().map(|&l| l.max(0) as usize).collect();
        let rand = rand_index_on_inliers(&result.labels, &truth_ids, &flags)?;
        let f = if truth.has_outliers() {
            let predicted: Vec<bool> = result.inlier_mask.iter().map(|&m| !m).collect();
            Some(outlier_f_measure(&predicted, &flags)?)
        } else {
            None
        };
        Ok((rand, f))
    } else {
        let predicted: Vec<i64> = result.labels_or(-1);
        Ok((rand_index(&predicted, &truth.labels)?, None))
    }
}

pub(crate) fn record(trial: usize, seed: u64, result: &ClusterResult, truth: Option<&Truth>, cfg: &ClusterConfig) -> Result<TrialRecord> {
    let (rand, f) = match truth {
        Some(t) => {
            let (r, f) = score(result, t, cfg.outlier.is_some())?;
            (Some(r), f)
        }
        None => (None, None),
    };
    Ok(TrialRecord {
        trial,
        seed,
        rand_index: rand,
        f_measure: f,
        outliers_removed: result.inlier_mask.iter().filter(|&&m| !m).count(),
        eigenvalues: result.embedding.eigenvalues.clone(),
        kmeans_inertia: result.kmeans_inertia,
    })
}

/// Everything one trial produced.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub record: TrialRecord,
    pub cloud: PointCloud,
    pub truth: Option<Truth>,
    pub result: ClusterResult,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub trials: Vec<TrialOutput>,
}

impl RunOutput {
    /// Summary over trials; `None` without ground truth.
    pub fn metrics(&self) -> Option<MetricReport> {
        metric_report(self.trials.iter().map(|t| &t.record))
    }
}

pub(crate) fn metric_report<'a>(records: impl Iterator<Item = &'a TrialRecord>) -> Option<MetricReport> {
    let records: Vec<&TrialRecord> = records.collect();
    let rand: Option<Vec<f64>> = records.iter().map(|r| r.rand_index).collect();
    let f: Option<Vec<f64>> = records.iter().map(|r| r.f_measure).collect();
    rand.filter(|r| !r.is_empty()).map(|r| MetricReport::new(r, f.filter(|f| !f.is_empty())))
}

/// Runs `config.trials` independent trials.
pub fn run_cluster(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut trials = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        trials.push(run_trial(config, t, config.seed + t as u64)?);
    }
    Ok(RunOutput {
        config: config.clone(),
        trials,
    })
}

pub(crate) fn run_trial(config: &RunConfig, trial: usize, seed: u64) -> Result<TrialOutput> {
    let (cloud, truth) = load_input(&config.input, seed)?;
    let cfg = config.cluster_config(seed);
    let result = cluster(&cloud, &cfg)?;
    let record = record(trial, seed, &result, truth.as_ref(), &cfg)?;
    Ok(TrialOutput {
        record,
        cloud,
        truth,
        result,
    })
}

/// Clusters prepared local structure and scores it.
pub(crate) fn run_prepared(local: &LocalStructure, cfg: &ClusterConfig, truth: Option<&Truth>, trial: usize) -> Result<TrialRecord> {
    let result = cluster_prepared(local, cfg)?;
    record(trial, cfg.seed, &result, truth, cfg)
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    config: &'a RunConfig,
    trials: Vec<&'a TrialRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<MetricReport>,
}

#[derive(Serialize)]
struct TimingEntry {
    trial: usize,
    stages: Vec<(&'static str, f64)>,
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report types serialize");
    out.push(b'\n');
    out
}

/// Artifacts of a run:
///
/// - `config.txt`: the resolved configuration, accepted by `--config`
/// - `metrics.json`: config, per-trial records and the summary
/// - `timings.json`: wall-clock seconds per stage and trial
/// - `points_TTT.csv`, `labels_TTT.csv` and, with filtering,
///   `scores_TTT.csv` for every trial `TTT`
///
/// Everything except `timings.json` is a deterministic function of the config.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("config.txt"), run.config.to_text().as_bytes())?;
    let metrics = MetricsFile {
        config: &run.config,
        trials: run.trials.iter().map(|t| &t.record).collect(),
        summary: run.metrics(),
    };
    write_atomic(&dir.join("metrics.json"), &to_json(&metrics))?;
    let timings: Vec<TimingEntry> = run
        .trials
        .iter()
        .map(|t| TimingEntry {
            trial: t.record.trial,
            stages: t.result.timings.iter().map(|(s, d)| (*s, d.as_secs_f64())).collect(),
        })
        .collect();
    write_atomic(&dir.join("timings.json"), &to_json(&timings))?;
    for t in &run.trials {
        let id = t.record.trial;
        let truth = t.truth.as_ref().map(|tr| tr.labels.as_slice());
        write_atomic(&dir.join(format!("points_{id:03}.csv")), points_csv(&t.cloud, truth).as_bytes())?;
        write_atomic(&dir.join(format!("labels_{id:03}.csv")), labels_csv(&t.result.labels_or(-1)).as_bytes())?;
        if let Some(report) = &t.result.outliers {
            write_atomic(&dir.join(format!("scores_{id:03}.csv")), scores_csv(&report.scores).as_bytes())?;
        }
    }
    Ok(())
}

/// Reads trial `trial` of a run directory and writes its plot tables to `out`.
pub fn export_run(run_dir: &Path, trial: usize, out: &Path) -> Result<Vec<std::path::PathBuf>> {
    let (cloud, _) = read_points_csv_with_header(&run_dir.join(format!("points_{trial:03}.csv")))?;
    let labels = read_labels_csv(&run_dir.join(format!("labels_{trial:03}.csv")))?;
    let scores_path = run_dir.join(format!("scores_{trial:03}.csv"));
    let scores = if scores_path.exists() {
        Some(read_scores_csv(&scores_path)?)
    } else {
        None
    };
    export_plot_data(out, &cloud, &labels, scores.as_deref())
}
