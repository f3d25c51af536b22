//! Grid search over `k` and `σ_c`: select on a few trials, then report on
//! fresh seeds.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::MetricReport;
use crate::spectral::LocalStructure;

use super::config::{fmt_f64, format_pairs, parse_pairs, parse_value, Pairs, RunConfig};
use super::{load_input, metric_report, run_prepared, run_trial, to_json, write_atomic, TrialRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Everything except `k`, `sigma_c` and `trials`.
    pub base: RunConfig,
    pub ks: Vec<usize>,
    pub sigma_cs: Vec<f64>,
    pub selection_trials: usize,
    pub evaluation_trials: usize,
}

impl SweepConfig {
    pub const DEFAULT_KS: [usize; 7] = [5, 10, 15, 20, 30, 50, 100];
    pub const DEFAULT_SIGMA_CS: [f64; 5] = [0.2, 0.5, 1.0, 1.5, 2.0];

    /// Like [`RunConfig::from_pairs`], except that `k` and `sigma_c` take
    /// comma-separated lists and `selection_trials` / `evaluation_trials`
    /// replace `trials`.
    pub fn from_pairs(pairs: &Pairs) -> Result<Self> {
        let mut run_pairs = Pairs::new();
        let mut ks: Vec<usize> = Self::DEFAULT_KS.to_vec();
        let mut sigma_cs: Vec<f64> = Self::DEFAULT_SIGMA_CS.to_vec();
        let mut selection_trials = 5;
        let mut evaluation_trials = 50;
        for (k, v) in pairs {
            match k.as_str() {
                "k" => ks = list(k, v)?,
                "sigma_c" => sigma_cs = list(k, v)?,
                "selection_trials" => selection_trials = parse_value(k, v)?,
                "evaluation_trials" => evaluation_trials = parse_value(k, v)?,
                "trials" => {
                    return Err(Error::Config(
                        "a sweep takes selection_trials and evaluation_trials instead of trials".into(),
                    ))
                }
                _ => run_pairs.push((k.clone(), v.clone())),
            }
        }
        ks.sort_unstable();
        ks.dedup();
        sigma_cs.sort_by(f64::total_cmp);
        sigma_cs.dedup();
        if ks.is_empty() || sigma_cs.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if selection_trials == 0 || evaluation_trials == 0 {
            return Err(Error::Config("selection_trials and evaluation_trials must be >= 1".into()));
        }
        let base = RunConfig::from_pairs(&run_pairs)?;
        let cfg = Self {
            base,
            ks,
            sigma_cs,
            selection_trials,
            evaluation_trials,
        };
        for &k in &cfg.ks {
            for &s in &cfg.sigma_cs {
                cfg.point(k, s).validate()?;
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn to_text(&self) -> String {
        let mut pairs: Pairs = self
            .base
            .to_pairs()
            .into_iter()
            .filter(|(k, _)| !matches!(k.as_str(), "k" | "sigma_c" | "trials"))
            .collect();
        let join = |items: Vec<String>| items.join(",");
        pairs.push(("k".into(), join(self.ks.iter().map(|k| k.to_string()).collect())));
        pairs.push(("sigma_c".into(), join(self.sigma_cs.iter().map(|s| fmt_f64(*s)).collect())));
        pairs.push(("selection_trials".into(), self.selection_trials.to_string()));
        pairs.push(("evaluation_trials".into(), self.evaluation_trials.to_string()));
        format_pairs(&pairs)
    }

    /// Run configuration of one grid point (with the evaluation trial count).
    pub fn point(&self, k: usize, sigma_c: f64) -> RunConfig {
        RunConfig {
            k,
            sigma_c,
            trials: self.evaluation_trials,
            ..self.base.clone()
        }
    }

    /// Seed of the first evaluation trial.
    pub fn evaluation_seed(&self) -> u64 {
        self.base.seed + self.selection_trials as u64
    }
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub k: usize,
    pub sigma_c: f64,
    pub selection_rand: Vec<f64>,
    pub mean_rand: Option<f64>,
    /// First failure; the remaining selection trials of this point are skipped.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub selection_seeds: Vec<u64>,
    pub grid: Vec<GridPoint>,
    pub chosen: Option<(usize, f64)>,
    pub evaluation_seeds: Vec<u64>,
    pub evaluation: Vec<TrialRecord>,
    pub evaluation_summary: Option<MetricReport>,
    pub evaluation_error: Option<String>,
}

/// Selection: mean Rand over `selection_trials` seeds `seed..`, ties to the
/// smaller `k`, then the smaller `σ_c`. Evaluation: the chosen point on
/// `evaluation_trials` fresh seeds following the selection seeds. Graphs and
/// tangent frames are shared by every `σ_c` of a `k`.
pub fn run_sweep(sweep: &SweepConfig) -> Result<SweepReport> {
    let mut grid: Vec<GridPoint> = sweep
        .ks
        .iter()
        .flat_map(|&k| {
            sweep.sigma_cs.iter().map(move |&sigma_c| GridPoint {
                k,
                sigma_c,
                selection_rand: Vec::new(),
                mean_rand: None,
                error: None,
            })
        })
        .collect();
    let selection_seeds: Vec<u64> = (0..sweep.selection_trials).map(|t| sweep.base.seed + t as u64).collect();

    for (t, &seed) in selection_seeds.iter().enumerate() {
        let (cloud, truth) = load_input(&sweep.base.input, seed)?;
        let truth = truth.ok_or_else(|| Error::Config("a sweep needs ground-truth labels".into()))?;
        for (ki, &k) in sweep.ks.iter().enumerate() {
            let row = ki * sweep.sigma_cs.len()..(ki + 1) * sweep.sigma_cs.len();
            if grid[row.clone()].iter().all(|p| p.error.is_some()) {
                continue;
            }
            let cfg = sweep.point(k, sweep.sigma_cs[0]).cluster_config(seed);
            let local = match LocalStructure::build(cloud.clone(), &cfg) {
                Ok(l) => l,
                Err(e) => {
                    for p in &mut grid[row] {
                        p.error.get_or_insert_with(|| format!("selection trial {t}: {e}"));
                    }
                    continue;
                }
            };
            for p in &mut grid[row] {
                if p.error.is_some() {
                    continue;
                }
                let cfg = sweep.point(k, p.sigma_c).cluster_config(seed);
                match run_prepared(&local, &cfg, Some(&truth), t) {
                    Ok(rec) => p.selection_rand.push(rec.rand_index.expect("truth present")),
                    Err(e) => p.error = Some(format!("selection trial {t}: {e}")),
                }
            }
        }
    }

    let mut chosen: Option<(usize, f64, f64)> = None;
    for p in &mut grid {
        if p.error.is_some() {
            continue;
        }
        let mean = p.selection_rand.iter().sum::<f64>() / p.selection_rand.len() as f64;
        p.mean_rand = Some(mean);
        // Grid order is ascending in (k, σ_c), so a strict improvement keeps ties small.
        if chosen.is_none_or(|(_, _, best)| mean > best) {
            chosen = Some((p.k, p.sigma_c, mean));
        }
    }

    let evaluation_seeds: Vec<u64> = (0..sweep.evaluation_trials)
        .map(|t| sweep.evaluation_seed() + t as u64)
        .collect();
    let mut evaluation = Vec::new();
    let mut evaluation_error = None;
    if let Some((k, sigma_c, _)) = chosen {
        let config = sweep.point(k, sigma_c);
        for (t, &seed) in evaluation_seeds.iter().enumerate() {
            match run_trial(&config, t, seed) {
                Ok(out) => evaluation.push(out.record),
                Err(e) => {
                    evaluation_error = Some(format!("evaluation trial {t}: {e}"));
                    break;
                }
            }
        }
    }
    let evaluation_summary = if evaluation_error.is_none() {
        metric_report(evaluation.iter())
    } else {
        None
    };
    Ok(SweepReport {
        selection_seeds,
        grid,
        chosen: chosen.map(|(k, s, _)| (k, s)),
        evaluation_seeds,
        evaluation,
        evaluation_summary,
        evaluation_error,
    })
}

/// `sweep.txt` (the grid), `sweep.json` (both phases) and, when a point was
/// chosen, `chosen.txt`: a run config reproducing the evaluation phase.
pub fn write_sweep(dir: &Path, sweep: &SweepConfig, report: &SweepReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("sweep.txt"), sweep.to_text().as_bytes())?;
    write_atomic(&dir.join("sweep.json"), &to_json(report))?;
    if let Some((k, s)) = report.chosen {
        let chosen = RunConfig {
            seed: sweep.evaluation_seed(),
            ..sweep.point(k, s)
        };
        write_atomic(&dir.join("chosen.txt"), chosen.to_text().as_bytes())?;
    }
    Ok(())
}
