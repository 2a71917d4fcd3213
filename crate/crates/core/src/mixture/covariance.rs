use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{norm, symmetric_eigen};

/// Tolerance on `|γ_iᵀγ_j − δ_ij|` for spike directions.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

/// One rank-one term `θ γ γᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spike {
    pub theta: f64,
    pub direction: Array1<f64>,
}

/// Identity plus low rank: `Σ_c = I_n + Σ_i θ_i γ_i γ_iᵀ` with orthonormal `γ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    dim: usize,
    spikes: Vec<Spike>,
}

impl CovarianceSpec {
    pub fn identity(dim: usize) -> Self {
        CovarianceSpec {
            dim,
            spikes: Vec::new(),
        }
    }

    pub fn new(dim: usize, spikes: Vec<Spike>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim_n", "must be positive"));
        }
        for s in &spikes {
            if s.direction.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "spike direction",
                    expected: dim,
                    actual: s.direction.len(),
                });
            }
            if !(s.theta > 0.0 && s.theta.is_finite()) {
                return Err(Error::invalid(
                    "theta",
                    format!("spike strengths must be positive, got {}", s.theta),
                ));
            }
        }
        for (i, a) in spikes.iter().enumerate() {
            for (j, b) in spikes.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                let g = a.direction.dot(&b.direction);
                if (g - target).abs() > ORTHONORMALITY_TOLERANCE {
                    return Err(Error::invalid(
                        "spikes",
                        format!("directions {i} and {j} are not orthonormal (inner product {g:e})"),
                    ));
                }
            }
        }
        Ok(CovarianceSpec { dim, spikes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn rank(&self) -> usize {
        self.spikes.len()
    }

    /// `n + Σ θ_i`.
    pub fn trace(&self) -> f64 {
        self.dim as f64 + self.spikes.iter().map(|s| s.theta).sum::<f64>()
    }

    /// `1 + max θ_i`.
    pub fn spectral_norm(&self) -> f64 {
        1.0 + self.spikes.iter().map(|s| s.theta).fold(0.0, f64::max)
    }

    /// `Σ_c^{1/2} z = z + Σ_i (√(1+θ_i) − 1)(γ_iᵀz) γ_i`, in `O(n·d_c)`.
    pub fn sqrt_apply(&self, z: ArrayView1<f64>) -> Array1<f64> {
        let mut out = z.to_owned();
        for s in &self.spikes {
            let c = ((1.0 + s.theta).sqrt() - 1.0) * s.direction.dot(&z);
            out.scaled_add(c, &s.direction);
        }
        out
    }

    /// Applies `Σ_c^{1/2}` to every row of `rows` in place.
    pub fn sqrt_apply_rows(&self, mut rows: ArrayViewMut2<f64>) {
        for s in &self.spikes {
            let factor = (1.0 + s.theta).sqrt() - 1.0;
            let proj = rows.dot(&s.direction) * factor;
            for (mut row, c) in rows.axis_iter_mut(Axis(0)).zip(proj.iter()) {
                row.scaled_add(*c, &s.direction);
            }
        }
    }

    /// Dense `Σ_c`.
    pub fn dense(&self) -> Array2<f64> {
        let mut m = Array2::eye(self.dim);
        for s in &self.spikes {
            let g = s.direction.view().insert_axis(Axis(1));
            m = m + s.theta * g.dot(&g.t());
        }
        m
    }

    /// Dense `Σ_c^{1/2}` from a full eigendecomposition. Reference path for tests.
    pub fn dense_sqrt_by_eigen(&self) -> Array2<f64> {
        let (vals, vecs) = symmetric_eigen(self.dense().view());
        let roots = vals.mapv(|v| v.max(0.0).sqrt());
        vecs.dot(&Array2::from_diag(&roots)).dot(&vecs.t())
    }

    /// Normalized `γ` check used by callers that build directions themselves.
    pub fn is_unit(v: ArrayView1<f64>) -> bool {
        (norm(v) - 1.0).abs() <= ORTHONORMALITY_TOLERANCE
    }
}
