use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::hermite::ActivationKind;
use crate::rng::Stream;

/// First layer `F` (k×n) and second layer `w` at initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInit {
    pub f: Array2<f64>,
    pub w: Array1<f64>,
    pub trace_sigma: f64,
}

impl NetworkInit {
    pub fn width(&self) -> usize {
        self.f.nrows()
    }

    pub fn dim(&self) -> usize {
        self.f.ncols()
    }
}

/// `f_i ∼ N(0, I_n / Tr Σ)`, `w ∼ N(0, I_k / k)`; `F` is filled row-major,
/// then `w`.
pub fn init_network(
    n: usize,
    k: usize,
    trace_sigma: f64,
    stream: &mut Stream,
) -> Result<NetworkInit> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("n, k", "must be positive"));
    }
    if !(trace_sigma > 0.0 && trace_sigma.is_finite()) {
        return Err(Error::invalid(
            "trace_sigma",
            format!("must be positive, got {trace_sigma}"),
        ));
    }
    let f = stream.normal_matrix(k, n) / trace_sigma.sqrt();
    let w = stream.normal_vec(k) / (k as f64).sqrt();
    Ok(NetworkInit { f, w, trace_sigma })
}

/// One gradient step on the first layer. Returns `(G, F̂ = F + ηG)` with
/// `G = (1/m) [(1/√k)(w ỹᵀ − (1/√k) w wᵀσ(FX̃ᵀ)) ⊙ σ′(FX̃ᵀ)] X̃`.
pub fn gradient_step(
    init: &NetworkInit,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    eta: f64,
    act: &ActivationKind,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let g = gradient(init.f.view(), init.w.view(), x, y, act)?;
    if !eta.is_finite() {
        return Err(Error::invalid("eta", "must be finite"));
    }
    let f_hat = &init.f + &(&g * eta);
    if f_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "first-layer update",
        });
    }
    Ok((g, f_hat))
}

/// The gradient matrix alone.
pub fn gradient(
    f: ArrayView2<f64>,
    w: ArrayView1<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    act: &ActivationKind,
) -> Result<Array2<f64>> {
    let (k, n) = f.dim();
    let m = x.nrows();
    if x.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "gradient inputs",
            expected: n,
            actual: x.ncols(),
        });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            context: "gradient labels",
            expected: m,
            actual: y.len(),
        });
    }
    if w.len() != k {
        return Err(Error::DimensionMismatch {
            context: "second layer",
            expected: k,
            actual: w.len(),
        });
    }
    if m == 0 {
        return Err(Error::invalid("m", "gradient batch is empty"));
    }
    let z = f.dot(&x.t());
    check(&z, "preactivations")?;
    let s = z.mapv(|v| act.value(v));
    check(&s, "activation")?;
    let sk = (k as f64).sqrt();
    // Residual of the network output per sample: ỹ_j − wᵀσ(z_j)/√k.
    let resid = &y - &(w.dot(&s) / sk);
    let mut r = z;
    Zip::indexed(&mut r).for_each(|(i, j), v| {
        *v = w[i] / sk * resid[j] * act.derivative(*v);
    });
    check(&r, "backpropagated residual")?;
    let g = r.dot(&x) / m as f64;
    check(&g, "gradient")?;
    Ok(g)
}

fn check(a: &Array2<f64>, stage: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { stage })
    }
}
