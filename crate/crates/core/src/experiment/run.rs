use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::trial::{run_trial, TrialResult};
use crate::error::Result;
use crate::stats::mean_stderr;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<TrialResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// All trials of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub trials: Vec<TrialOutcome>,
}

impl RunReport {
    pub fn successes(&self) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter_map(|t| t.result.as_ref())
    }

    pub fn failures(&self) -> usize {
        self.trials.iter().filter(|t| t.error.is_some()).count()
    }

    /// Mean and standard error of `f` over successful trials.
    pub fn summary(&self, f: impl Fn(&TrialResult) -> f64) -> (f64, f64) {
        let xs: Vec<f64> = self.successes().map(f).collect();
        mean_stderr(&xs)
    }

    /// `trial,seed,t_nn,g_nn,t_hermite,g_hermite,rel_gap_g,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,seed,t_nn,g_nn,t_hermite,g_hermite,rel_gap_g,error\n");
        for t in &self.trials {
            match (&t.result, &t.error) {
                (Some(r), _) => {
                    let _ = writeln!(
                        out,
                        "{},{},{:?},{:?},{:?},{:?},{:?},",
                        t.trial,
                        t.seed,
                        r.t_nn,
                        r.g_nn,
                        r.t_hermite,
                        r.g_hermite,
                        r.relative_gap()
                    );
                }
                (None, e) => {
                    let msg = e.as_deref().unwrap_or("").replace([',', '\n'], ";");
                    let _ = writeln!(out, "{},{},,,,,,{}", t.trial, t.seed, msg);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Runs trials `0..cfg.trials` on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let warnings = cfg.warnings();
    for w in &warnings {
        log::warn!("{w}");
    }
    let results: Vec<Result<TrialResult>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect();
    let trials = results
        .into_iter()
        .enumerate()
        .map(|(t, r)| {
            let seed = crate::rng::trial_seed(cfg.base_seed, t as u64);
            match r {
                Ok(r) => TrialOutcome {
                    trial: t as u64,
                    seed,
                    result: Some(r),
                    error: None,
                },
                Err(e) => {
                    log::warn!("trial {t} failed: {e}");
                    TrialOutcome {
                        trial: t as u64,
                        seed,
                        result: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    Ok(RunReport {
        config: cfg.clone(),
        warnings,
        trials,
    })
}
