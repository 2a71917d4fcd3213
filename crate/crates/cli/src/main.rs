use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hermite_equiv::error::Error;
use hermite_equiv::experiment::{
    emit, run_experiment, run_external, run_sweep, thread_pool_from_env, ExperimentConfig,
    ExternalPool, OutputFormat, SweepAxis,
};
use hermite_equiv::hermite::{
    activation_second_moment, hermite_coefficients, residual_coefficient, ActivationKind,
    QuadratureRule,
};
use hermite_equiv::lab::{moment_equivalence, scaling_diagnostic, MomentConfig, ScalingConfig};
use hermite_equiv::mixture::{io, preprocess_external, XiMode};
use hermite_equiv::rng::Stream;

#[derive(Parser)]
#[command(
    name = "hermite-equiv",
    version,
    about = "Two-layer networks after one gradient step versus their Hermite equivalents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials of one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Sweep one configuration field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// k_over_m, alpha, beta, mixture_ratio, alignment, rank, lambda or eta_override.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "relu,tanh,sigmoid")]
        activations: Vec<ActivationKind>,
        #[command(flatten)]
        out: Output,
    },
    /// k/m sweep on two externally supplied classes.
    External {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        class_a: PathBuf,
        #[arg(long)]
        class_b: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,3")]
        k_over_m: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "relu,tanh,sigmoid")]
        activations: Vec<ActivationKind>,
        #[command(flatten)]
        out: Output,
    },
    /// Hermite coefficients and residual of an activation.
    HermiteCoeffs {
        #[arg(long)]
        activation: ActivationKind,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 200)]
        order: usize,
        /// Use Gauss-Hermite nodes instead of the split Gauss-Legendre rule.
        #[arg(long)]
        gauss_hermite: bool,
    },
    /// Size scaling of the gradient and bulk quantities.
    Diagnose {
        #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
        grid: Vec<usize>,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw the target direction at random instead of along the spikes.
        #[arg(long)]
        random_xi: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional moments of the network features against the Hermite model.
    Moments {
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Width; defaults to n.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.6)]
        beta: f64,
        #[arg(long, default_value_t = 3)]
        l: usize,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "relu")]
        activation: ActivationKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Demean, rescale and add noise to two classes of raw vectors.
    Preprocess {
        #[arg(long)]
        class_a: PathBuf,
        #[arg(long)]
        class_b: PathBuf,
        /// Output matrix with the label in the last column (.csv for CSV, GMIX otherwise).
        #[arg(long)]
        out: PathBuf,
        /// Demean both classes jointly.
        #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
        nonzero_means: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

/// Some trials failed; their output was still written.
#[derive(Debug)]
struct TrialsFailed(usize);

impl std::fmt::Display for TrialsFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} trial(s) failed", self.0)
    }
}

impl std::error::Error for TrialsFailed {}

fn check_failures(count: usize) -> Result<()> {
    if count > 0 {
        return Err(TrialsFailed(count).into());
    }
    Ok(())
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(path).with_context(|| format!("loading config {}", path.display()))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let report = thread_pool_from_env()?.install(|| run_experiment(&cfg))?;
            let text = match out.format {
                OutputFormat::Csv => report.to_csv(),
                OutputFormat::Json => report.to_json(),
            };
            write_text(out.out.as_deref(), &text)?;
            let (g, se) = report.summary(|t| t.g_nn);
            let (h, sh) = report.summary(|t| t.g_hermite);
            log::info!(
                "G_nn = {g:.6} ± {se:.6}, G_hermite = {h:.6} ± {sh:.6}, failures = {}",
                report.failures()
            );
            check_failures(report.failures())?;
        }
        Command::Sweep {
            config,
            axis,
            values,
            activations,
            out,
        } => {
            let cfg = load_config(&config)?;
            let table =
                thread_pool_from_env()?.install(|| run_sweep(&cfg, axis, &values, &activations))?;
            match out.out {
                Some(p) => emit(&table, out.format, &p)?,
                None => print!(
                    "{}",
                    if out.format == OutputFormat::Csv {
                        table.to_csv()
                    } else {
                        table.to_json()
                    }
                ),
            }
            check_failures(table.metadata.failures.len())?;
        }
        Command::External {
            config,
            class_a,
            class_b,
            k_over_m,
            activations,
            out,
        } => {
            let cfg = load_config(&config)?;
            let pool = ExternalPool::from_paths(
                &class_a,
                &class_b,
                cfg.mixture.nonzero_means,
                cfg.base_seed,
            )?;
            log::info!(
                "preprocessed {} + {} samples in dimension {}",
                pool.report.rows_a,
                pool.report.rows_b,
                pool.report.n
            );
            let table = thread_pool_from_env()?
                .install(|| run_external(&cfg, &pool, &k_over_m, &activations))?;
            match out.out {
                Some(p) => emit(&table, out.format, &p)?,
                None => print!(
                    "{}",
                    if out.format == OutputFormat::Csv {
                        table.to_csv()
                    } else {
                        table.to_json()
                    }
                ),
            }
            check_failures(table.metadata.failures.len())?;
        }
        Command::HermiteCoeffs {
            activation,
            b,
            l,
            order,
            gauss_hermite,
        } => {
            let rule = if gauss_hermite {
                QuadratureRule::gauss_hermite(order)?
            } else {
                QuadratureRule::split_gauss_legendre(order)?
            };
            let coeffs = hermite_coefficients(&activation, b, l, &rule)?;
            let residual = residual_coefficient(&activation, b, &coeffs, &rule)?;
            let mut text = String::from("j,h_j\n");
            for (j, h) in coeffs.iter().enumerate() {
                let _ = writeln!(text, "{j},{h:?}");
            }
            let _ = writeln!(text, "residual,{residual:?}");
            print!("{text}");
            log::info!(
                "E[sigma(bz)^2] = {:?}",
                activation_second_moment(&activation, b, &rule)?
            );
        }
        Command::Diagnose {
            grid,
            alpha,
            beta,
            trials,
            seed,
            random_xi,
            out,
        } => {
            let mut cfg = ScalingConfig::new(grid, alpha, beta, trials, seed);
            if random_xi {
                cfg.xi_mode = XiMode::RandomDirection;
            }
            let report = thread_pool_from_env()?.install(|| scaling_diagnostic(&cfg))?;
            write_text(out.as_deref(), &report.to_csv())?;
        }
        Command::Moments {
            n,
            k,
            alpha,
            beta,
            l,
            samples,
            seed,
            activation,
            out,
        } => {
            let mut cfg = MomentConfig::new(n, beta, l, samples, seed);
            cfg.k = k.unwrap_or(n);
            cfg.alpha = alpha;
            cfg.activation = activation;
            let r = thread_pool_from_env()?.install(|| moment_equivalence(&cfg))?;
            let mut text = String::from("quantity,value\n");
            for (name, v) in [
                ("hermite_scale", r.hermite_scale),
                ("mean_gap", r.mean_gap),
                ("second_moment_gap", r.second_moment_gap),
                ("phi_gap", r.phi_gap),
                ("psd_change_sigma", r.psd_change_sigma),
                ("psd_change_hermite", r.psd_change_hermite),
            ] {
                let _ = writeln!(text, "{name},{v:?}");
            }
            write_text(out.as_deref(), &text)?;
        }
        Command::Preprocess {
            class_a,
            class_b,
            out,
            nonzero_means,
            seed,
        } => {
            let a = io::read_matrix(&class_a)?;
            let b = io::read_matrix(&class_b)?;
            let (ds, report) =
                preprocess_external(a.view(), b.view(), nonzero_means, &mut Stream::new(seed))?;
            let mut m = ndarray::Array2::zeros((ds.len(), ds.dim() + 1));
            m.slice_mut(ndarray::s![.., ..ds.dim()]).assign(&ds.x);
            m.column_mut(ds.dim()).assign(&ds.y);
            if out
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
            {
                io::write_csv(&out, m.view())?;
            } else {
                io::write_gmix(&out, m.view())?;
            }
            log::info!("{}", serde_json::to_string(&report)?);
        }
    }
    Ok(())
}

/// 2 for configuration errors, 3 for numerical failures, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<TrialsFailed>().is_some() {
        return 3;
    }
    if let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) {
        if e.is_numerical() {
            return 3;
        }
        return match e {
            Error::Io(_) => 1,
            _ => 2,
        };
    }
    1
}

/// Cause chain without sources already embedded in their parent's message.
fn describe(err: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !parts.last().is_some_and(|p| p.ends_with(&msg)) {
            parts.push(msg);
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
