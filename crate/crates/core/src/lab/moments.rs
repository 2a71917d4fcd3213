use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use super::decompose::StructureBasis;
use crate::error::{Error, Result};
use crate::linalg::psd_project;
use crate::mixture::CovarianceSpec;
use crate::network::FeatureMap;
use crate::rng::Stream;

/// Largest width for which the dense k×k covariance is formed.
pub const MAX_WIDTH: usize = 512;
pub const MIN_SAMPLES: usize = 10_000;
/// Rows per Monte Carlo batch.
pub const BATCH: usize = 4096;
/// Relative Frobenius change of `Φ` above which the PSD projection is flagged.
pub const PSD_FLAG_THRESHOLD: f64 = 0.01;

/// Conditional moments of `σ(F̂x)` given `(c, κ_c)`.
#[derive(Debug, Clone)]
pub struct ConditionalMoments {
    /// `ν = E[s]`.
    pub nu: Array1<f64>,
    /// `Ψ = E[s z⊥ᵀ]`, k × n.
    pub psi: Array2<f64>,
    /// `Φ = Cov(s) − ΨΨᵀ`, projected onto the PSD cone.
    pub phi: Array2<f64>,
    pub phi_sqrt: Array2<f64>,
    /// `E[s_i²]`.
    pub second_moment: Array1<f64>,
    pub sample_count: usize,
    /// Relative Frobenius change caused by the PSD projection.
    pub psd_change: f64,
    pub psd_flagged: bool,
    pub min_eigenvalue: f64,
}

struct Partial {
    sum: Array1<f64>,
    sum_sq: Array2<f64>,
    sum_cross: Array2<f64>,
}

/// Monte Carlo estimate over `z⊥` (standard normal projected off `span Γ_c`)
/// of the moments of `s = act(a + F̂ z⊥)`, `a = F̂ Σ_c^{1/2} Γ_c κ_c`.
///
/// One seed is drawn from `stream`; batch `b` uses stream id `2b` of that seed
/// for `z` and `2b + 1` for activation noise, and the batch sums are combined
/// in batch order. Two calls from the same stream state therefore share their
/// `z⊥` draws whatever the activation.
pub fn conditional_moments_mc(
    f_hat: ArrayView2<f64>,
    cov: &CovarianceSpec,
    basis: &StructureBasis,
    kappa: ArrayView1<f64>,
    act: &FeatureMap,
    n_mc: usize,
    stream: &mut Stream,
) -> Result<ConditionalMoments> {
    let (k, n) = f_hat.dim();
    if k > MAX_WIDTH {
        return Err(Error::invalid(
            "k",
            format!("conditional moments need k <= {MAX_WIDTH}, got {k}"),
        ));
    }
    if n_mc < MIN_SAMPLES {
        return Err(Error::invalid(
            "n_mc",
            format!("need at least {MIN_SAMPLES} samples, got {n_mc}"),
        ));
    }
    if basis.dim() != n || cov.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "conditional moments",
            expected: n,
            actual: basis.dim(),
        });
    }
    if kappa.len() != basis.rank() {
        return Err(Error::DimensionMismatch {
            context: "structure coordinates",
            expected: basis.rank(),
            actual: kappa.len(),
        });
    }
    let a = f_hat.dot(&cov.sqrt_apply(basis.embed(kappa).view()));
    let seed = stream.next_u64();
    let batches = n_mc.div_ceil(BATCH);
    let partials: Vec<Result<Partial>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let rows = BATCH.min(n_mc - b * BATCH);
            let mut zs = Stream::with_id(seed, 2 * b as u64);
            let mut noise = Stream::with_id(seed, 2 * b as u64 + 1);
            let z = zs.normal_matrix(rows, n);
            let zp = basis.project_out_rows(z.view());
            let pre = zp.dot(&f_hat.t()) + &a;
            let s = act.apply(pre.view(), Some(&mut noise))?;
            Ok(Partial {
                sum: s.sum_axis(Axis(0)),
                sum_sq: s.t().dot(&s),
                sum_cross: s.t().dot(&zp),
            })
        })
        .collect();
    let mut sum = Array1::<f64>::zeros(k);
    let mut sum_sq = Array2::<f64>::zeros((k, k));
    let mut sum_cross = Array2::<f64>::zeros((k, n));
    for p in partials {
        let p = p?;
        sum += &p.sum;
        sum_sq += &p.sum_sq;
        sum_cross += &p.sum_cross;
    }
    let count = n_mc as f64;
    let nu = sum / count;
    let psi = sum_cross / count;
    let second = sum_sq / count;
    let second_moment = second.diag().to_owned();
    let nu_col = nu.view().insert_axis(Axis(1));
    let cov_s = &second - &nu_col.dot(&nu_col.t());
    let raw_phi = &cov_s - &psi.dot(&psi.t());
    let proj = psd_project(raw_phi.view());
    if proj.relative_change > PSD_FLAG_THRESHOLD {
        log::warn!(
            "PSD projection changed the conditional covariance by {:.2}%",
            100.0 * proj.relative_change
        );
    }
    Ok(ConditionalMoments {
        nu,
        psi,
        phi: proj.projected,
        phi_sqrt: proj.sqrt,
        second_moment,
        sample_count: n_mc,
        psd_change: proj.relative_change,
        psd_flagged: proj.relative_change > PSD_FLAG_THRESHOLD,
        min_eigenvalue: proj.min_eigenvalue,
    })
}

/// `ν + Ψ z⊥ + Φ^{1/2} g`, `g ∼ N(0, I_k)`.
pub fn conditional_feature_sample(
    moments: &ConditionalMoments,
    z_perp: ArrayView1<f64>,
    stream: &mut Stream,
) -> Result<Array1<f64>> {
    let n = moments.psi.ncols();
    if z_perp.len() != n {
        return Err(Error::DimensionMismatch {
            context: "bulk input",
            expected: n,
            actual: z_perp.len(),
        });
    }
    let g = stream.normal_vec(moments.nu.len());
    Ok(&moments.nu + &moments.psi.dot(&z_perp) + &moments.phi_sqrt.dot(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::ActivationKind;
    use crate::linalg::norm;
    use crate::mixture::Spike;

    fn instance(seed: u64) -> (Array2<f64>, CovarianceSpec, StructureBasis) {
        let n = 12;
        let mut s = Stream::new(seed);
        let g = s.normal_vec(n);
        let cov = CovarianceSpec::new(
            n,
            vec![Spike {
                theta: 3.0,
                direction: &g / norm(g.view()),
            }],
        )
        .unwrap();
        let v = s.normal_vec(n) * 0.2;
        let basis = StructureBasis::new(v.view(), &cov).unwrap();
        let f = s.normal_matrix(6, n) / (n as f64).sqrt();
        (f, cov, basis)
    }

    #[test]
    fn identity_mean_is_the_structure_term() {
        let (f, cov, basis) = instance(1);
        let kappa = Array1::from(vec![0.7, -1.2]);
        let n_mc = 20_000;
        let m = conditional_moments_mc(
            f.view(),
            &cov,
            &basis,
            kappa.view(),
            &FeatureMap::Plain(ActivationKind::Identity),
            n_mc,
            &mut Stream::new(2),
        )
        .unwrap();
        let a = f.dot(&cov.sqrt_apply(basis.embed(kappa.view()).view()));
        for i in 0..f.nrows() {
            let sd = norm(basis.project_out(f.row(i)).view());
            assert!((m.nu[i] - a[i]).abs() < 4.0 * sd / (n_mc as f64).sqrt());
        }
        // For a linear map all randomness is explained by z⊥, so Φ is pure
        // sampling error of relative size about √(n/N).
        let scale = crate::linalg::frobenius(f.dot(&f.t()).view());
        let rel = crate::linalg::frobenius(m.phi.view()) / scale;
        assert!(rel < 3.0 * (12.0 / n_mc as f64).sqrt(), "{rel}");
    }

    #[test]
    fn odd_activation_has_zero_mean_at_zero_structure() {
        let (f, cov, basis) = instance(3);
        let kappa = Array1::zeros(2);
        let n_mc = 20_000;
        let m = conditional_moments_mc(
            f.view(),
            &cov,
            &basis,
            kappa.view(),
            &FeatureMap::Plain(ActivationKind::Tanh),
            n_mc,
            &mut Stream::new(4),
        )
        .unwrap();
        for i in 0..f.nrows() {
            let sd = (m.second_moment[i] - m.nu[i] * m.nu[i]).sqrt();
            assert!(m.nu[i].abs() < 4.0 * sd / (n_mc as f64).sqrt());
        }
        let asym = (&m.phi - &m.phi.t())
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(asym < 1e-8);
        assert!(m.min_eigenvalue > -1e-6);
    }

    #[test]
    fn feature_samples() {
        let k = 3;
        let n = 4;
        let base = ConditionalMoments {
            nu: Array1::from(vec![1.0, 2.0, 3.0]),
            psi: Array2::ones((k, n)),
            phi: Array2::zeros((k, k)),
            phi_sqrt: Array2::zeros((k, k)),
            second_moment: Array1::zeros(k),
            sample_count: 0,
            psd_change: 0.0,
            psd_flagged: false,
            min_eigenvalue: 0.0,
        };
        let z = Array1::from(vec![0.5, 0.5, 0.0, 1.0]);
        let a = conditional_feature_sample(&base, z.view(), &mut Stream::new(1)).unwrap();
        let b = conditional_feature_sample(&base, z.view(), &mut Stream::new(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, Array1::from(vec![3.0, 4.0, 5.0]));

        let white = ConditionalMoments {
            nu: Array1::zeros(k),
            psi: Array2::zeros((k, n)),
            phi: Array2::eye(k),
            phi_sqrt: Array2::eye(k),
            ..base
        };
        let draws = 50_000;
        let mut s = Stream::new(3);
        let mut acc = Array2::<f64>::zeros((k, k));
        for _ in 0..draws {
            let x = conditional_feature_sample(&white, z.view(), &mut s).unwrap();
            let c = x.view().insert_axis(Axis(1));
            acc += &c.dot(&c.t());
        }
        acc /= draws as f64;
        let se = (2.0 / draws as f64).sqrt();
        for i in 0..k {
            for j in 0..k {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((acc[[i, j]] - t).abs() < 4.0 * se);
            }
        }
    }

    #[test]
    fn preconditions() {
        let (f, cov, basis) = instance(5);
        let kappa = Array1::zeros(2);
        let act = FeatureMap::Plain(ActivationKind::Relu);
        assert!(conditional_moments_mc(
            f.view(),
            &cov,
            &basis,
            kappa.view(),
            &act,
            100,
            &mut Stream::new(0)
        )
        .is_err());
        let wide = Array2::zeros((513, 12));
        assert!(conditional_moments_mc(
            wide.view(),
            &cov,
            &basis,
            kappa.view(),
            &act,
            20_000,
            &mut Stream::new(0)
        )
        .is_err());
    }
}
