use std::fmt::Write as _;

use ndarray::Axis;
use rayon::prelude::*;
use serde::Serialize;

use super::decompose::{spike_bulk_decompose, split_with_basis, StructureBasis};
use crate::error::{Error, Result};
use crate::hermite::ActivationKind;
use crate::mixture::{
    build_mixture, build_xi, label_dataset, mixture_covariance, sample_batch, LabelKind,
    MixtureDescriptor, ScalingSpec, TargetSpec, XiMode,
};
use crate::network::{gradient_step, init_network};
use crate::rng::{trial_seed, Stream};
use crate::stats::{loglog_fit, mean_stderr, LineFit};

/// Measured quantities, in report order.
pub const QUANTITIES: [&str; 6] = [
    "delta_norm",
    "v_norm",
    "u_norm",
    "max_abs_a",
    "max_offdiag_gram",
    "max_diag_gram_dev",
];

/// Two equal-weight rank-one components with spikes at `n^{β(1−α)}`,
/// `m = k = n`, a ReLU target and ReLU network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingConfig {
    pub grid: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
    pub xi_mode: XiMode,
    pub activation: ActivationKind,
    pub target: ActivationKind,
}

impl ScalingConfig {
    pub fn new(grid: Vec<usize>, alpha: f64, beta: f64, trials: usize, seed: u64) -> Self {
        ScalingConfig {
            grid,
            alpha,
            beta,
            trials,
            seed,
            xi_mode: XiMode::SpikeAligned,
            activation: ActivationKind::Relu,
            target: ActivationKind::Relu,
        }
    }

    /// `t = 1 − β(1−α)`.
    pub fn t(&self) -> f64 {
        1.0 - self.beta * (1.0 - self.alpha)
    }

    fn validate(&self) -> Result<()> {
        if self.grid.len() < 3 {
            return Err(Error::invalid("grid", "needs at least three sizes"));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid", "sizes must be strictly increasing"));
        }
        if self.grid[0] < 4 {
            return Err(Error::invalid("grid", "sizes must be at least 4"));
        }
        let ratios: Vec<f64> = self
            .grid
            .windows(2)
            .map(|w| w[1] as f64 / w[0] as f64)
            .collect();
        if ratios.iter().any(|r| (r / ratios[0] - 1.0).abs() > 0.05) {
            log::warn!("diagnostic grid is not geometrically spaced");
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be positive"));
        }
        ScalingSpec::new(self.alpha, self.beta, self.grid[0])?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub quantity: &'static str,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub quantity: &'static str,
    pub fit: LineFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub config: ScalingConfig,
    pub rows: Vec<ScalingRow>,
    pub slopes: Vec<SlopeRow>,
}

impl ScalingReport {
    pub fn slope(&self, quantity: &str) -> Option<LineFit> {
        self.slopes
            .iter()
            .find(|s| s.quantity == quantity)
            .map(|s| s.fit)
    }

    /// Trial means of `quantity` in grid order.
    pub fn means(&self, quantity: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.quantity == quantity)
            .map(|r| r.mean)
            .collect()
    }

    /// `n,quantity,mean,stderr` rows, a blank line, then `slopes` and
    /// `quantity,slope,stderr,intercept` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,quantity,mean,stderr\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:?},{:?}", r.n, r.quantity, r.mean, r.stderr);
        }
        out.push_str("\nslopes\nquantity,slope,stderr,intercept\n");
        for s in &self.slopes {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?}",
                s.quantity, s.fit.slope, s.fit.stderr, s.fit.intercept
            );
        }
        out
    }
}

/// One trial at size `n`, returning the values of [`QUANTITIES`].
pub fn scaling_trial(cfg: &ScalingConfig, n: usize, seed: u64) -> Result<[f64; 6]> {
    let scaling = ScalingSpec::new(cfg.alpha, cfg.beta, n)?;
    let mut s0 = Stream::with_id(seed, 0);
    let spec = build_mixture(&MixtureDescriptor::default(), &scaling, &mut s0)?;
    let xi = build_xi(&spec, cfg.xi_mode, 1.0, &mut s0)?;
    let target = TargetSpec {
        xi,
        kind: LabelKind::SingleIndex(cfg.target.clone()),
    };
    let trace = mixture_covariance(&spec)?.trace;
    let init = init_network(n, n, trace, &mut Stream::with_id(seed, 1))?;
    let mut batch = sample_batch(&spec, n, &mut Stream::with_id(seed, 2))?;
    label_dataset(&target, &mut batch)?;
    let eta = scaling.eta();
    let (g, f_hat) = gradient_step(&init, batch.x.view(), batch.y.view(), eta, &cfg.activation)?;
    let d = spike_bulk_decompose(
        g.view(),
        init.w.view(),
        batch.x.view(),
        batch.y.view(),
        &cfg.activation,
    )?;
    drop(g);
    let cov = &spec.components()[0].cov;
    let basis = StructureBasis::new(d.v.view(), cov)?;
    let f_perp = &init.f + &(&d.delta * eta);
    let z = Stream::with_id(seed, 3).normal_vec(n);
    let split = split_with_basis(&basis, f_hat.view(), f_perp.view(), cov, z.view())?;
    let max_a = split.a_struct.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let f_tilde = basis.project_out_rows(f_perp.view());
    let gram = f_tilde.dot(&f_tilde.t());
    let b2 = n as f64 / trace;
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for (i, row) in gram.axis_iter(Axis(0)).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i == j {
                diag = diag.max((v - b2).abs());
            } else {
                off = off.max(v.abs());
            }
        }
    }
    let out = [d.norms.delta.value, d.norms.v, d.norms.u, max_a, off, diag];
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "scaling diagnostic",
        });
    }
    Ok(out)
}

/// Trial means and log-log slopes of [`QUANTITIES`] over the grid. Trial `t`
/// at size `n` uses seed `trial_seed(trial_seed(seed, n), t)`.
pub fn scaling_diagnostic(cfg: &ScalingConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, u64)> = cfg
        .grid
        .iter()
        .flat_map(|&n| (0..cfg.trials as u64).map(move |t| (n, t)))
        .collect();
    let results: Vec<Result<[f64; 6]>> = jobs
        .par_iter()
        .map(|&(n, t)| scaling_trial(cfg, n, trial_seed(trial_seed(cfg.seed, n as u64), t)))
        .collect();
    let mut values = vec![vec![Vec::with_capacity(cfg.trials); QUANTITIES.len()]; cfg.grid.len()];
    for ((n, _), r) in jobs.iter().zip(results) {
        let gi = cfg.grid.iter().position(|g| g == n).expect("grid entry");
        for (q, v) in r?.into_iter().enumerate() {
            values[gi][q].push(v);
        }
    }
    let mut rows = Vec::new();
    for (gi, &n) in cfg.grid.iter().enumerate() {
        for (q, name) in QUANTITIES.iter().enumerate() {
            let (mean, stderr) = mean_stderr(&values[gi][q]);
            rows.push(ScalingRow {
                n,
                quantity: name,
                mean,
                stderr,
            });
        }
    }
    let xs: Vec<f64> = cfg.grid.iter().map(|&n| n as f64).collect();
    let mut slopes = Vec::new();
    for (q, name) in QUANTITIES.iter().enumerate() {
        let ys: Vec<f64> = (0..cfg.grid.len())
            .map(|gi| mean_stderr(&values[gi][q]).0)
            .collect();
        match loglog_fit(&xs, &ys) {
            Ok(fit) => slopes.push(SlopeRow {
                quantity: name,
                fit,
            }),
            Err(e) => log::warn!("no slope for {name}: {e}"),
        }
    }
    Ok(ScalingReport {
        config: cfg.clone(),
        rows,
        slopes,
    })
}

/// Whether `fit.slope ± 2·stderr` meets `target ± tol`.
pub fn slope_within(fit: &LineFit, target: f64, tol: f64) -> bool {
    (fit.slope - target).abs() <= tol + 2.0 * fit.stderr
}
