use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use serde::Serialize;

use super::spec::Dataset;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Scalings applied by [`preprocess_external`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreprocessReport {
    pub n: usize,
    pub rows_a: usize,
    pub rows_b: usize,
    pub trace_a: f64,
    pub trace_b: f64,
    /// `t = √(Tr Σ₁ / Tr Σ₂)`, applied to the second class.
    pub t: f64,
    /// `√(n / Tr Σ₁)`, applied to both classes before the noise.
    pub snr_scale: f64,
    pub nonzero_means: bool,
}

/// Sum of per-column sample variances (denominator `N − 1`).
fn trace_estimate(x: ArrayView2<f64>, mean: &Array1<f64>) -> f64 {
    let centered = &x - mean;
    let ss: f64 = centered.iter().map(|v| v * v).sum();
    ss / (x.nrows() as f64 - 1.0)
}

/// Demeans both classes (separately, or jointly with `nonzero_means`), scales
/// the second class by `t`, maps every sample to `√(n/Tr Σ₁) x̄ + ε` and
/// labels the first class `+1`, the second `−1`.
pub fn preprocess_external(
    class_a: ArrayView2<f64>,
    class_b: ArrayView2<f64>,
    nonzero_means: bool,
    noise: &mut Stream,
) -> Result<(Dataset, PreprocessReport)> {
    let n = class_a.ncols();
    if class_b.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "second class columns",
            expected: n,
            actual: class_b.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("classes", "need at least one column"));
    }
    for (rows, name) in [
        (class_a.nrows(), "first class"),
        (class_b.nrows(), "second class"),
    ] {
        if rows < 2 {
            return Err(Error::invalid(
                "classes",
                format!("{name} needs at least two samples, got {rows}"),
            ));
        }
    }
    let mean_a = class_a.mean_axis(Axis(0)).expect("non-empty");
    let mean_b = class_b.mean_axis(Axis(0)).expect("non-empty");
    let trace_a = trace_estimate(class_a, &mean_a);
    let trace_b = trace_estimate(class_b, &mean_b);
    if !(trace_a > 0.0) {
        return Err(Error::ZeroTrace("first class"));
    }
    if !(trace_b > 0.0) {
        return Err(Error::ZeroTrace("second class"));
    }
    let t = (trace_a / trace_b).sqrt();
    let snr_scale = (n as f64 / trace_a).sqrt();

    let (shift_a, shift_b) = if nonzero_means {
        let joint = concatenate(Axis(0), &[class_a, class_b]).expect("equal column counts");
        let g = joint.mean_axis(Axis(0)).expect("non-empty");
        (g.clone(), g)
    } else {
        (mean_a, mean_b)
    };
    let a = (&class_a - &shift_a) * snr_scale;
    let b = (&class_b - &shift_b) * (t * snr_scale);
    let mut x: Array2<f64> =
        concatenate(Axis(0), &[a.view(), b.view()]).expect("equal column counts");
    for v in x.iter_mut() {
        *v += noise.normal();
    }
    let (ra, rb) = (class_a.nrows(), class_b.nrows());
    let y = Array1::from_iter((0..ra + rb).map(|i| if i < ra { 1.0 } else { -1.0 }));
    let comp = (0..ra + rb).map(|i| if i < ra { 1 } else { 2 }).collect();
    let report = PreprocessReport {
        n,
        rows_a: ra,
        rows_b: rb,
        trace_a,
        trace_b,
        t,
        snr_scale,
        nonzero_means,
    };
    Ok((Dataset { x, y, comp }, report))
}
