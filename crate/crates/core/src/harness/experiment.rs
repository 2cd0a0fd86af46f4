//! Batched trials and the hitting-time scaling study.
//!
//! Trials are independent: each owns its archive and its random stream, so a
//! batch is a plain data-parallel map. With the `parallel` feature (default)
//! batches fan out over a worker pool; without it they run sequentially.
//! Either way results come back in spec order, so every aggregate is
//! independent of completion order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::harness::runner::{run_trial, run_trial_traced, RunMode, RunResult, TrialSpec};
use crate::harness::HarnessError;
use crate::trace::{TraceLevel, TraceWriter};

/// A whole experiment: the sizes, the trial count per size and the seeding.
/// Serializes to/from a TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub mode: RunMode,
    pub max_iters: u64,
    pub seed: u64,
    #[serde(default)]
    pub trace: TraceLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_list.is_empty() {
            return Err(HarnessError::BadConfig("n_list is empty".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::BadConfig("trials must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(HarnessError::BadConfig("max_iters must be positive".into()));
        }
        if self.mode == RunMode::LastStage {
            if let Some(&n) = self.n_list.iter().find(|&&n| n % 2 == 0 || n < 3) {
                return Err(HarnessError::BadConfig(format!(
                    "last-stage mode needs odd n >= 3, got {n}"
                )));
            }
        }
        Ok(())
    }

    /// Per-trial seeds are `seed + trial`; together with the per-size stream
    /// split this makes every `(n, trial)` pair an independent stream.
    pub fn specs(&self) -> Vec<TrialSpec> {
        self.n_list
            .iter()
            .flat_map(|&n| {
                (0..self.trials).map(move |k| TrialSpec {
                    n,
                    seed: self.seed.wrapping_add(k as u64),
                    mode: self.mode,
                    max_iters: self.max_iters,
                })
            })
            .collect()
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Runs every trial; parallel when the `parallel` feature is enabled.
pub fn run_batch(specs: &[TrialSpec]) -> Vec<RunResult> {
    #[cfg(feature = "parallel")]
    {
        specs.par_iter().map(run_trial).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_serial(specs)
    }
}

/// Sequential reference path; the benchmarks compare against this.
pub fn run_batch_serial(specs: &[TrialSpec]) -> Vec<RunResult> {
    specs.iter().map(run_trial).collect()
}

fn run_batch_traced(
    specs: &[TrialSpec],
    out_dir: &Path,
    level: TraceLevel,
) -> Result<Vec<RunResult>, HarnessError> {
    let run_one = |spec: &TrialSpec| -> Result<RunResult, HarnessError> {
        let path = out_dir.join(format!("trace_n{}_s{}.jsonl", spec.n, spec.seed));
        let mut writer = TraceWriter::create(&path, level)?;
        let result = run_trial_traced(spec, &mut writer)?;
        writer.finish()?;
        Ok(result)
    };
    #[cfg(feature = "parallel")]
    {
        specs.par_iter().map(run_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        specs.iter().map(run_one).collect()
    }
}

/// Per-size aggregate of the measured hitting times.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub completed: usize,
    pub truncated: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingStudy {
    pub mode: RunMode,
    /// Which hitting time the study aggregates.
    pub metric: &'static str,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln(mean)` against `ln(n)`.
    pub slope: f64,
    pub intercept: f64,
    pub truncated_total: usize,
    #[serde(skip)]
    pub results: Vec<RunResult>,
}

/// Runs the configured trials and fits the log-log scaling of the mean
/// hitting time (time to optimal diversity for last-stage mode, time to
/// front coverage for full runs). Truncated trials are excluded from the
/// aggregates and reported.
pub fn scaling_study(cfg: &ExperimentConfig) -> Result<ScalingStudy, HarnessError> {
    cfg.validate()?;
    let mut distinct = cfg.n_list.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(HarnessError::NeedTwoSizes);
    }

    let specs = cfg.specs();
    let results = match (&cfg.out_dir, cfg.trace) {
        (Some(dir), level) if level != TraceLevel::Silent => {
            fs::create_dir_all(dir)?;
            run_batch_traced(&specs, dir, level)?
        }
        _ => run_batch(&specs),
    };

    let metric = match cfg.mode {
        RunMode::LastStage => "iterations_to_optimal",
        RunMode::FullRun => "iterations_to_cover",
    };
    let metric_of = |r: &RunResult| match cfg.mode {
        RunMode::LastStage => r.iterations_to_optimal,
        RunMode::FullRun => r.iterations_to_cover,
    };

    let mut rows = Vec::new();
    let mut truncated_total = 0;
    for &n in &distinct {
        let mut values: Vec<u64> = Vec::new();
        let mut truncated = 0;
        for r in results.iter().filter(|r| r.n == n) {
            match metric_of(r) {
                Some(v) => values.push(v),
                None => truncated += 1,
            }
        }
        truncated_total += truncated;
        if values.is_empty() {
            return Err(HarnessError::AllTruncated { n });
        }
        values.sort_unstable();
        let k = values.len();
        let mean = values.iter().sum::<u64>() as f64 / k as f64;
        let median = if k % 2 == 1 {
            values[k / 2] as f64
        } else {
            (values[k / 2 - 1] + values[k / 2]) as f64 / 2.0
        };
        let var = values
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / k as f64;
        let sd = var.sqrt();
        let half = 1.96 * sd / (k as f64).sqrt();
        rows.push(ScalingRow {
            n,
            completed: k,
            truncated,
            mean,
            median,
            sd,
            ci95_low: mean - half,
            ci95_high: mean + half,
        });
    }

    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mean)).collect();
    let (slope, intercept) = log_log_fit(&points);

    Ok(ScalingStudy {
        mode: cfg.mode,
        metric,
        rows,
        slope,
        intercept,
        truncated_total,
        results,
    })
}

/// Least-squares line through `(ln x, ln y)`; returns (slope, intercept).
pub fn log_log_fit(points: &[(f64, f64)]) -> (f64, f64) {
    assert!(points.len() >= 2, "fit needs at least two points");
    let k = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    let intercept = (sy - slope * sx) / k;
    (slope, intercept)
}

impl ScalingStudy {
    /// Writes `results.csv`, `scaling.tsv`, `fit.toml` and `config.toml`
    /// into `out_dir`. Reruns with the same configuration rewrite identical
    /// bytes.
    pub fn write_files(&self, cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(out_dir)?;
        write_results_csv(&out_dir.join("results.csv"), &self.results)?;

        let mut plot = String::new();
        for row in &self.rows {
            plot.push_str(&format!("{} {:.6}\n", row.n, row.mean));
        }
        fs::write(out_dir.join("scaling.tsv"), plot)?;

        #[derive(Serialize)]
        struct FitSidecar<'a> {
            metric: &'a str,
            mode: RunMode,
            slope: f64,
            intercept: f64,
            trials_per_n: usize,
            truncated_total: usize,
            rows: &'a [ScalingRow],
        }
        let sidecar = FitSidecar {
            metric: self.metric,
            mode: self.mode,
            slope: self.slope,
            intercept: self.intercept,
            trials_per_n: cfg.trials,
            truncated_total: self.truncated_total,
            rows: &self.rows,
        };
        fs::write(
            out_dir.join("fit.toml"),
            toml::to_string_pretty(&sidecar).expect("sidecar serializes"),
        )?;
        fs::write(out_dir.join("config.toml"), cfg.to_toml())?;
        Ok(())
    }
}

/// One CSV row per trial, in `(n, seed)` order.
pub fn write_results_csv(path: &Path, results: &[RunResult]) -> Result<(), HarnessError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "{}", RunResult::CSV_HEADER)?;
    for r in results {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ExperimentConfig {
        ExperimentConfig {
            n_list: vec![5, 7],
            trials: 8,
            mode: RunMode::LastStage,
            max_iters: 1_000_000,
            seed: 1,
            trace: TraceLevel::Silent,
            out_dir: None,
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_cfg();
        assert!(cfg.validate().is_ok());
        cfg.n_list = vec![4, 5];
        assert!(cfg.validate().is_err());
        cfg.n_list = vec![];
        assert!(cfg.validate().is_err());

        let single = ExperimentConfig {
            n_list: vec![15],
            ..tiny_cfg()
        };
        assert!(matches!(
            scaling_study(&single),
            Err(HarnessError::NeedTwoSizes)
        ));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = tiny_cfg();
        let text = cfg.to_toml();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn study_aggregates_and_fits() {
        let cfg = tiny_cfg();
        let study = scaling_study(&cfg).unwrap();
        assert_eq!(study.rows.len(), 2);
        assert_eq!(study.results.len(), 16);
        assert_eq!(study.truncated_total, 0);
        for row in &study.rows {
            assert_eq!(row.completed, 8);
            assert!(row.mean > 0.0);
            assert!(row.ci95_low <= row.median + row.sd);
        }
        assert!(study.slope.is_finite());
    }

    #[test]
    fn batch_order_matches_spec_order() {
        let cfg = tiny_cfg();
        let specs = cfg.specs();
        let results = run_batch(&specs);
        for (spec, r) in specs.iter().zip(&results) {
            assert_eq!((spec.n, spec.seed), (r.n, r.seed));
        }
        let serial = run_batch_serial(&specs);
        assert_eq!(
            serde_json::to_string(&results).unwrap(),
            serde_json::to_string(&serial).unwrap()
        );
    }

    #[test]
    fn fit_recovers_a_power_law() {
        let points: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * x.powf(2.0)))
            .collect();
        let (slope, intercept) = log_log_fit(&points);
        assert!((slope - 2.0).abs() < 1e-9);
        assert!((intercept - 3.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn files_are_written_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            out_dir: Some(dir.path().to_path_buf()),
            ..tiny_cfg()
        };
        let study = scaling_study(&cfg).unwrap();
        study.write_files(&cfg, dir.path()).unwrap();
        let csv1 = fs::read(dir.path().join("results.csv")).unwrap();
        assert_eq!(
            csv1.iter().filter(|&&b| b == b'\n').count(),
            1 + cfg.trials * 2
        );

        let study2 = scaling_study(&cfg).unwrap();
        study2.write_files(&cfg, dir.path()).unwrap();
        for file in ["results.csv", "scaling.tsv", "fit.toml", "config.toml"] {
            let a = fs::read(dir.path().join(file)).unwrap();
            let b = fs::read(dir.path().join(file)).unwrap();
            assert_eq!(a, b, "{file}");
        }
        assert_eq!(csv1, fs::read(dir.path().join("results.csv")).unwrap());
    }
}
