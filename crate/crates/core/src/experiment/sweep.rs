use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::{run_trial, TrialResult};
use crate::error::{Error, Result};
use crate::hermite::ActivationKind;
use crate::rng::GENERATOR;
use crate::stats::{mean_stderr, spearman, Spearman};

/// Configuration field varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    KOverM,
    Alpha,
    Beta,
    MixtureRatio,
    Alignment,
    Rank,
    Lambda,
    EtaOverride,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 8] = [
        SweepAxis::KOverM,
        SweepAxis::Alpha,
        SweepAxis::Beta,
        SweepAxis::MixtureRatio,
        SweepAxis::Alignment,
        SweepAxis::Rank,
        SweepAxis::Lambda,
        SweepAxis::EtaOverride,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::KOverM => "k_over_m",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
            SweepAxis::MixtureRatio => "mixture_ratio",
            SweepAxis::Alignment => "alignment",
            SweepAxis::Rank => "rank",
            SweepAxis::Lambda => "lambda",
            SweepAxis::EtaOverride => "eta_override",
        }
    }

    /// `cfg` with this field set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        if !value.is_finite() {
            return Err(Error::invalid("values", "sweep values must be finite"));
        }
        let mut c = cfg.clone();
        match self {
            SweepAxis::KOverM => {
                let k = (value * cfg.m as f64).round();
                if k < 1.0 {
                    return Err(Error::invalid(
                        "values",
                        format!("k/m = {value} gives no hidden units"),
                    ));
                }
                c.k = k as usize;
            }
            SweepAxis::Alpha => c.alpha = value,
            SweepAxis::Beta => c.beta = value,
            SweepAxis::MixtureRatio => {
                if cfg.mixture.components != 2 {
                    return Err(Error::invalid(
                        "axis",
                        "mixture_ratio sweeps need two components",
                    ));
                }
                if !(value > 0.0 && value < 1.0) {
                    return Err(Error::invalid(
                        "values",
                        format!("mixture ratio must lie in (0, 1), got {value}"),
                    ));
                }
                c.mixture.weights = vec![value, 1.0 - value];
            }
            SweepAxis::Alignment => c.mixture.alignment = Some(value),
            SweepAxis::Rank => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(
                        "values",
                        format!("rank must be a non-negative integer, got {value}"),
                    ));
                }
                c.mixture.ranks = vec![value as usize];
            }
            SweepAxis::Lambda => c.lambda = value,
            SweepAxis::EtaOverride => c.eta_override = Some(value),
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let key = match key.as_str() {
            "koverm" | "k/m" => "k_over_m",
            "mixtureratio" | "rho" => "mixture_ratio",
            "etaoverride" | "eta" => "eta_override",
            other => other,
        }
        .to_string();
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::invalid("axis", format!("unknown sweep axis `{s}`")))
    }
}

/// Metrics recorded per cell, in emission order.
pub const METRICS: [&str; 5] = ["g_nn", "g_hermite", "t_nn", "t_hermite", "rel_gap_g"];

fn metric_value(r: &TrialResult, metric: &str) -> f64 {
    match metric {
        "g_nn" => r.g_nn,
        "g_hermite" => r.g_hermite,
        "t_nn" => r.t_nn,
        "t_hermite" => r.t_hermite,
        "rel_gap_g" => r.relative_gap(),
        _ => f64::NAN,
    }
}

/// One aggregated row: `axis,value,activation,metric,mean,stderr,trials`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub axis: String,
    pub value: f64,
    pub activation: String,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub value: f64,
    pub activation: String,
    pub trial: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub axis: String,
    pub values: Vec<f64>,
    pub activations: Vec<String>,
    pub trials: usize,
    pub base_seed: u64,
    pub generator: String,
    /// Axis values whose implied strength exponent exceeds 1.
    pub no_equivalence_guarantee: Vec<f64>,
    pub warnings: Vec<String>,
    pub failures: Vec<TrialFailure>,
}

/// Per-trial outcome of a sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialCell {
    pub value: f64,
    pub activation: String,
    pub trial: u64,
    pub result: std::result::Result<TrialResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub metadata: SweepMetadata,
    pub records: Vec<SweepRecord>,
    #[serde(skip)]
    pub cells: Vec<TrialCell>,
}

impl SweepTable {
    /// Table with no records.
    pub fn empty(axis: &str) -> Self {
        SweepTable {
            metadata: SweepMetadata {
                axis: axis.to_string(),
                values: Vec::new(),
                activations: Vec::new(),
                trials: 0,
                base_seed: 0,
                generator: GENERATOR.to_string(),
                no_equivalence_guarantee: Vec::new(),
                warnings: Vec::new(),
                failures: Vec::new(),
            },
            records: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn record(&self, value: f64, activation: &str, metric: &str) -> Option<&SweepRecord> {
        self.records
            .iter()
            .find(|r| r.value == value && r.activation == activation && r.metric == metric)
    }

    /// Means of `metric` for `activation` in axis order.
    pub fn means(&self, activation: &str, metric: &str) -> Vec<f64> {
        self.metadata
            .values
            .iter()
            .map(|&v| {
                self.record(v, activation, metric)
                    .map_or(f64::NAN, |r| r.mean)
            })
            .collect()
    }

    /// Spearman correlation between the axis value and `metric` over all
    /// successful trials of `activation`.
    pub fn trend(&self, activation: &str, metric: &str) -> Result<Spearman> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .cells
            .iter()
            .filter(|c| c.activation == activation)
            .filter_map(|c| {
                c.result
                    .as_ref()
                    .ok()
                    .map(|r| (c.value, metric_value(r, metric)))
            })
            .unzip();
        spearman(&xs, &ys)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,value,activation,metric,mean,stderr,trials\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:?},{},{},{:?},{:?},{}",
                r.axis, r.value, r.activation, r.metric, r.mean, r.stderr, r.trials
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(
                "format",
                format!("unknown output format `{other}`"),
            )),
        }
    }
}

/// Writes `table` to `path`.
pub fn emit(table: &SweepTable, format: OutputFormat, path: &Path) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => table.to_json(),
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-value configurations of a sweep, validated up front.
pub fn sweep_configs(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<ExperimentConfig>> {
    if values.is_empty() {
        return Err(Error::invalid("values", "sweep needs at least one value"));
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::invalid(
            "values",
            "sweep values must be strictly monotone",
        ));
    }
    values.iter().map(|&v| axis.apply(cfg, v)).collect()
}

/// Runs `cfg.trials` trials per axis value per activation. Trial `t` of every
/// cell uses seed `trial_seed(base_seed, t)`, so cells differ only in the
/// swept setting and the activation. Trials run on the current rayon pool and
/// are merged in (value, activation, trial) order.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    activations: &[ActivationKind],
) -> Result<SweepTable> {
    cfg.validate()?;
    let configs = sweep_configs(cfg, axis, values)?;
    tabulate(axis, values, &configs, activations, run_trial)
}

/// Runs `trial(config, t)` for every (value, activation, trial) cell with the
/// activation substituted into the value's config, then aggregates.
pub(crate) fn tabulate<F>(
    axis: SweepAxis,
    values: &[f64],
    configs: &[ExperimentConfig],
    activations: &[ActivationKind],
    trial: F,
) -> Result<SweepTable>
where
    F: Fn(&ExperimentConfig, u64) -> Result<TrialResult> + Sync,
{
    if activations.is_empty() {
        return Err(Error::invalid(
            "activations",
            "need at least one activation",
        ));
    }
    let trials = configs.first().map_or(0, |c| c.trials);
    let jobs: Vec<(usize, usize, u64)> = (0..values.len())
        .flat_map(|vi| {
            (0..activations.len()).flat_map(move |ai| (0..trials as u64).map(move |t| (vi, ai, t)))
        })
        .collect();
    let results: Vec<Result<TrialResult>> = jobs
        .par_iter()
        .map(|&(vi, ai, t)| {
            let mut c = configs[vi].clone();
            c.activation = activations[ai].clone();
            trial(&c, t)
        })
        .collect();

    let mut cells = Vec::with_capacity(jobs.len());
    let mut failures = Vec::new();
    for (&(vi, ai, t), r) in jobs.iter().zip(results) {
        let activation = activations[ai].name().to_string();
        let result = r.map_err(|e| e.to_string());
        if let Err(e) = &result {
            log::warn!(
                "{axis} = {} ({activation}) trial {t} failed: {e}",
                values[vi]
            );
            failures.push(TrialFailure {
                value: values[vi],
                activation: activation.clone(),
                trial: t,
                error: e.clone(),
            });
        }
        cells.push(TrialCell {
            value: values[vi],
            activation,
            trial: t,
            result,
        });
    }

    let mut records = Vec::new();
    for &v in values {
        for act in activations {
            let ok: Vec<&TrialResult> = cells
                .iter()
                .filter(|c| c.value == v && c.activation == act.name())
                .filter_map(|c| c.result.as_ref().ok())
                .collect();
            for metric in METRICS {
                let xs: Vec<f64> = ok.iter().map(|r| metric_value(r, metric)).collect();
                let (mean, stderr) = mean_stderr(&xs);
                records.push(SweepRecord {
                    axis: axis.name().to_string(),
                    value: v,
                    activation: act.name().to_string(),
                    metric: metric.to_string(),
                    mean,
                    stderr,
                    trials: xs.len(),
                });
            }
        }
    }

    let mut warnings: Vec<String> = Vec::new();
    for c in configs {
        for w in c.warnings() {
            if !warnings.contains(&w) {
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    let no_equivalence_guarantee = values
        .iter()
        .zip(configs)
        .filter(|(_, c)| !c.equivalence_guaranteed())
        .map(|(&v, _)| v)
        .collect();
    let first = &configs[0];
    let metadata = SweepMetadata {
        axis: axis.name().to_string(),
        values: values.to_vec(),
        activations: activations.iter().map(|a| a.name().to_string()).collect(),
        trials,
        base_seed: first.base_seed,
        generator: first.generator.clone(),
        no_equivalence_guarantee,
        warnings,
        failures,
    };
    Ok(SweepTable {
        metadata,
        records,
        cells,
    })
}

/// Rayon pool sized by `HERMITE_EQUIV_THREADS` (all cores when unset or 0).
pub fn thread_pool_from_env() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("HERMITE_EQUIV_THREADS") {
        Ok(s) => s.trim().parse::<usize>().map_err(|_| {
            Error::invalid(
                "HERMITE_EQUIV_THREADS",
                format!("not a worker count: `{s}`"),
            )
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("HERMITE_EQUIV_THREADS", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::baseline(24);
        cfg.m = 30;
        cfg.k = 20;
        cfg.l_degree = 4;
        cfg.trials = 3;
        cfg
    }

    #[test]
    fn axis_names_round_trip() {
        for a in SweepAxis::ALL {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert_eq!("k-over-m".parse::<SweepAxis>().unwrap(), SweepAxis::KOverM);
        assert!("gamma".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn axis_application() {
        let cfg = small();
        assert_eq!(SweepAxis::KOverM.apply(&cfg, 2.0).unwrap().k, 60);
        assert_eq!(
            SweepAxis::MixtureRatio
                .apply(&cfg, 0.3)
                .unwrap()
                .mixture
                .weights,
            vec![0.3, 0.7]
        );
        assert_eq!(
            SweepAxis::Rank.apply(&cfg, 3.0).unwrap().mixture.ranks,
            vec![3]
        );
        assert!(SweepAxis::Rank.apply(&cfg, 1.5).is_err());
        assert!(SweepAxis::Alpha.apply(&cfg, 1.5).is_err());
        assert!(SweepAxis::MixtureRatio.apply(&cfg, 1.0).is_err());
        assert_eq!(SweepAxis::EtaOverride.apply(&cfg, 7.0).unwrap().eta(), 7.0);
    }

    #[test]
    fn values_must_be_monotone() {
        let cfg = small();
        assert!(sweep_configs(&cfg, SweepAxis::Alpha, &[]).is_err());
        assert!(sweep_configs(&cfg, SweepAxis::Alpha, &[0.1, 0.5, 0.2]).is_err());
        assert!(sweep_configs(&cfg, SweepAxis::Alpha, &[0.5, 0.1]).is_ok());
    }

    #[test]
    fn table_shape_and_determinism() {
        let cfg = small();
        let acts = ActivationKind::standard_set();
        let a = run_sweep(&cfg, SweepAxis::Alpha, &[0.0, 1.0], &acts).unwrap();
        assert_eq!(a.records.len(), 2 * acts.len() * METRICS.len());
        assert!(a.records.iter().all(|r| r.trials == 3));
        assert!(a.metadata.failures.is_empty());
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = single.install(|| run_sweep(&cfg, SweepAxis::Alpha, &[0.0, 1.0], &acts).unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.trend("relu", "g_nn").is_ok());
    }

    #[test]
    fn eta_override_beyond_one_is_flagged() {
        let mut cfg = small();
        cfg.trials = 1;
        let t = run_sweep(
            &cfg,
            SweepAxis::EtaOverride,
            &[1.0, 1e4],
            &[ActivationKind::Relu],
        )
        .unwrap();
        assert_eq!(t.metadata.no_equivalence_guarantee, vec![1e4]);
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = small();
        cfg.trials = 1;
        // Rank 30 does not fit in n = 24; the trial fails when the mixture is drawn.
        let t = run_sweep(&cfg, SweepAxis::Rank, &[1.0, 30.0], &[ActivationKind::Relu]).unwrap();
        assert_eq!(t.metadata.failures.len(), 1);
        assert_eq!(t.metadata.failures[0].value, 30.0);
        assert_eq!(t.record(30.0, "relu", "g_nn").unwrap().trials, 0);
        assert_eq!(t.record(1.0, "relu", "g_nn").unwrap().trials, 1);
    }

    #[test]
    fn emit_formats() {
        let dir = tempfile::tempdir().unwrap();
        let empty = SweepTable::empty("alpha");
        let p = dir.path().join("e.csv");
        emit(&empty, OutputFormat::Csv, &p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "axis,value,activation,metric,mean,stderr,trials\n"
        );
        let mut one = empty.clone();
        one.records.push(SweepRecord {
            axis: "alpha".into(),
            value: 0.5,
            activation: "relu".into(),
            metric: "g_nn".into(),
            mean: 0.25,
            stderr: 0.01,
            trials: 20,
        });
        emit(&one, OutputFormat::Csv, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "alpha,0.5,relu,g_nn,0.25,0.01,20"
        );
        let j = dir.path().join("o.json");
        emit(&one, OutputFormat::Json, &j).unwrap();
        let first = std::fs::read(&j).unwrap();
        emit(&one, OutputFormat::Json, &j).unwrap();
        assert_eq!(first, std::fs::read(&j).unwrap());
        let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
        assert_eq!(v["records"][0]["metric"], "g_nn");
    }
}
