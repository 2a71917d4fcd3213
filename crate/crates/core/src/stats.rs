//! Small statistics helpers: means with standard errors, log-log slopes and
//! Spearman rank correlation.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Mean and standard error of the mean (zero below two values).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Least-squares line with the standard error of its slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "regression",
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("grid", "a slope needs at least two points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("grid", "regression abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        stderr,
    })
}

/// Fit of `log y` against `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid(
            "regression",
            "log-log fit needs positive values",
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            out[p] = r;
        }
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spearman {
    pub rho: f64,
    /// One-sided p-value against `ρ ≤ 0`.
    pub p_positive: f64,
    /// One-sided p-value against `ρ ≥ 0`.
    pub p_negative: f64,
    pub n: usize,
}

/// Spearman correlation with the Student-t approximation
/// `t = ρ √((n − 2)/(1 − ρ²))` on `n − 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "spearman",
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("spearman", "needs at least three pairs"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let nf = n as f64;
    let m = (nf + 1.0) / 2.0;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - m).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - m).powi(2)).sum();
    let rho = if sxx > 0.0 && syy > 0.0 {
        sxy / (sxx * syy).sqrt()
    } else {
        0.0
    };
    let dof = nf - 2.0;
    let (p_positive, p_negative) = if rho.abs() >= 1.0 {
        if rho > 0.0 {
            (0.0, 1.0)
        } else {
            (1.0, 0.0)
        }
    } else {
        let t = rho * (dof / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
        (1.0 - dist.cdf(t), dist.cdf(t))
    };
    Ok(Spearman {
        rho,
        p_positive,
        p_negative,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn exact_power_law() {
        let x = [256.0, 512.0, 1024.0, 2048.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.75)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        assert!((fit.slope + 0.75).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn rank_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap();
        assert_eq!(up.rho, 1.0);
        assert_eq!(up.p_positive, 0.0);
        let down = spearman(&x, &[5.0, 3.0, 2.0, 1.0, 0.0]).unwrap();
        assert_eq!(down.rho, -1.0);
    }

    #[test]
    fn spearman_p_value_matches_t_approximation() {
        // ρ = 0.8 at n = 10: t = 0.8·√(8/0.36) ≈ 3.771, one-sided p ≈ 0.00273.
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = [0.0, 2.0, 1.0, 3.0, 6.0, 4.0, 5.0, 9.0, 7.0, 8.0];
        let s = spearman(&x, &y).unwrap();
        let d2: f64 = ranks(&x)
            .iter()
            .zip(ranks(&y))
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        assert!((s.rho - (1.0 - 6.0 * d2 / (10.0 * 99.0))).abs() < 1e-12);
        let t = s.rho * (8.0 / (1.0 - s.rho * s.rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, 8.0).unwrap();
        assert!((s.p_positive - (1.0 - dist.cdf(t))).abs() < 1e-15);
        assert!(s.p_positive < 0.01);
    }
}
