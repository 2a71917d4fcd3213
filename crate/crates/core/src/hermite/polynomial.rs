use crate::error::{Error, Result};

/// Largest degree accepted by [`hermite_eval`].
pub const MAX_DEGREE: usize = 64;

/// Probabilists' Hermite polynomial `H_j(x)` via
/// `H_{j+1} = x H_j − j H_{j−1}`, `H_0 = 1`, `H_1 = x`.
pub fn hermite_eval(j: usize, x: f64) -> Result<f64> {
    if j > MAX_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: j,
            max: MAX_DEGREE,
        });
    }
    Ok(hermite_value_unchecked(j, x))
}

#[inline]
fn hermite_value_unchecked(j: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if j == 0 {
        return prev;
    }
    let mut cur = x;
    for i in 1..j {
        let next = x * cur - i as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[j] = H_j(x)` for every `j < out.len()`.
pub fn hermite_values(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for j in 1..out.len().saturating_sub(1) {
        out[j + 1] = x * out[j] - j as f64 * out[j - 1];
    }
}

/// `Σ_j c_j H_j(x)` by Clenshaw's recurrence.
#[inline]
pub fn hermite_series(coeffs: &[f64], x: f64) -> f64 {
    // b_j = c_j + x b_{j+1} − (j+1) b_{j+2}; result is b_0.
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for j in (0..coeffs.len()).rev() {
        let b0 = coeffs[j] + x * b1 - (j + 1) as f64 * b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}
