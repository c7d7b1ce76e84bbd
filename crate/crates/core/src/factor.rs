//! Eigen-based factor reduction of high-dimensional covariance series.
//!
//! The loading estimate `F̂` holds the top-`r` eigenvectors of
//! `S̄ = (1/T) Σ (Y_t - Ȳ)²`; the factor series is `F̂' Y_t F̂` and the static
//! remainder is `Ȳ - F̂F̂' Ȳ F̂F̂'`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimate::{fit_mle, fit_vt, FitOptions, FitResult, Orders, VtFitResult};
use crate::matalg::{sym_eigen_desc, symmetrize, Mat, MatrixSeries, SpdMatrix};
use crate::model::{Family, Structure};

/// Relative gap below which two eigenvalues count as tied.
pub const TIE_TOL: f64 = 1e-10;

/// Spectrum of `S̄` and adjacent ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDiagnostics {
    /// Descending, nonnegative.
    pub eigenvalues: Vec<f64>,
    /// `λ_i / λ_{i+1}` for `i = 1..n-1`; `x/0 = ∞`, `0/0 = 1`.
    pub ratios: Vec<f64>,
    pub suggested_r: usize,
}

/// Output of [`extract_factors`].
#[derive(Debug, Clone)]
pub struct FactorDecomp {
    /// `n x r`, orthonormal columns.
    pub loadings: Mat,
    pub factor_series: MatrixSeries,
    /// Static part `Ȳ - F̂F̂'ȲF̂F̂'`.
    pub static_part: Mat,
    pub r: usize,
    pub eigenvalues: Vec<f64>,
}

/// Result of fitting a CBF model on the factor series.
#[derive(Debug, Clone)]
pub enum FactorFit {
    Mle(FitResult),
    Vt(VtFitResult),
}

fn spread(series: &MatrixSeries) -> Result<Mat> {
    let t = series.len();
    if t < 2 {
        return Err(Error::InvalidArgument("factor analysis needs T >= 2".into()));
    }
    let mean = series.mean();
    let n = series.n();
    let mut acc = Mat::zeros(n, n);
    for y in series.iter() {
        let d = y.as_mat() - mean.as_mat();
        acc += &d * &d;
    }
    Ok(symmetrize(acc / t as f64))
}

fn spectrum(series: &MatrixSeries) -> Result<(Vec<f64>, Mat)> {
    let s = spread(series)?;
    let (mut vals, vecs) = sym_eigen_desc(&s);
    if vals.first().is_none_or(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate("series is constant (zero spread matrix)".into()));
    }
    // S̄ is PSD; anything at rounding level of the top value is zero
    let floor = 1e-12 * vals[0];
    vals.iter_mut().for_each(|v| {
        if *v <= floor {
            *v = 0.0
        }
    });
    Ok((vals, vecs))
}

/// Eigenvalues of `S̄`, adjacent ratios and the ratio-maximizing rank over
/// `1..=max(1, ⌊n/2⌋)`.
pub fn eigen_ratios(series: &MatrixSeries) -> Result<RankDiagnostics> {
    let (eigenvalues, _) = spectrum(series)?;
    let ratios: Vec<f64> = eigenvalues
        .windows(2)
        .map(|w| match (w[0] > 0.0, w[1] > 0.0) {
            (_, true) => w[0] / w[1],
            (true, false) => f64::INFINITY,
            (false, false) => 1.0,
        })
        .collect();
    let limit = (eigenvalues.len() / 2).max(1).min(ratios.len());
    let mut suggested_r = 1;
    for i in 0..limit {
        if ratios[i] > ratios[suggested_r - 1] {
            suggested_r = i + 1;
        }
    }
    Ok(RankDiagnostics { eigenvalues, ratios, suggested_r })
}

/// Top-`r` factor decomposition. Each loading column has its largest-magnitude
/// entry positive.
pub fn extract_factors(series: &MatrixSeries, r: usize) -> Result<FactorDecomp> {
    let n = series.n();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(alloc::format!("rank {r} outside 1..={n}")));
    }
    let (vals, vecs) = spectrum(series)?;
    if r < n && (vals[r - 1] - vals[r]).abs() <= TIE_TOL * vals[0] {
        return Err(Error::TiedEigenvalues(alloc::vec![vals[r - 1], vals[r]]));
    }
    let mut f = vecs.columns(0, r).into_owned();
    for mut col in f.column_iter_mut() {
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
    let ft = f.transpose();
    let factor_series =
        MatrixSeries::new(series.iter().map(|y| SpdMatrix::new(&ft * y.as_mat() * &f)).collect::<Result<Vec<_>>>()?)?;
    let proj = &f * &ft;
    let mean = series.mean();
    let static_part = symmetrize(mean.as_mat() - &proj * mean.as_mat() * &proj);
    Ok(FactorDecomp { loadings: f, factor_series, static_part, r, eigenvalues: vals })
}

/// Full-dimension prediction `F̂ Σ_f F̂' + Ŷ₀*` (not necessarily PSD).
pub fn reconstruct(decomp: &FactorDecomp, sigma_f: &SpdMatrix) -> Result<Mat> {
    if sigma_f.dim() != decomp.r {
        return Err(Error::DimensionMismatch { expected: decomp.r, actual: sigma_f.dim() });
    }
    let f = &decomp.loadings;
    Ok(symmetrize(f * sigma_f.as_mat() * f.transpose() + &decomp.static_part))
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues set to zero).
pub fn project_psd(m: &Mat) -> Mat {
    let (vals, vecs) = sym_eigen_desc(&symmetrize(m.clone()));
    let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0))));
    symmetrize(&vecs * d * vecs.transpose())
}

/// Fits CBF (or its two-step version) to the factor series.
pub fn fit_f_cbf(
    decomp: &FactorDecomp,
    orders: Orders,
    structure: Structure,
    vt: bool,
    family: Family,
    opts: &FitOptions,
) -> Result<FactorFit> {
    if vt {
        fit_vt(&decomp.factor_series, orders, structure, family, opts).map(FactorFit::Vt)
    } else {
        fit_mle(&decomp.factor_series, orders, structure, family, opts).map(FactorFit::Mle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::vec_of;
    use crate::model::{simulate, CbfSpec, Innovation};
    use crate::rng;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn orthonormal(n: usize, r: usize, seed: u64) -> Mat {
        let mut rng = rng::stream(seed, 0);
        let m = Mat::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
        m.qr().q().columns(0, r).into_owned()
    }

    fn random_spd(k: usize, rng: &mut rng::Stream) -> Mat {
        let a = Mat::from_fn(k, k, |_, _| StandardNormal.sample(rng));
        &a * a.transpose() + Mat::identity(k, k) * 0.5
    }

    /// `Y_t = F G_t F' + Y0` with `Y0 = c (I - FF')` so every `Y_t` is SPD.
    fn factor_series(f: &Mat, t: usize, seed: u64) -> MatrixSeries {
        let n = f.nrows();
        let r = f.ncols();
        let mut rng = rng::stream(seed, 1);
        let y0 = (Mat::identity(n, n) - f * f.transpose()) * 0.3;
        MatrixSeries::new(
            (0..t).map(|_| SpdMatrix::new(f * random_spd(r, &mut rng) * f.transpose() + &y0).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_recovery() {
        let f = orthonormal(30, 3, 1);
        let series = factor_series(&f, 300, 2);
        let d = extract_factors(&series, 3).unwrap();
        let err = (&d.loadings * d.loadings.transpose() - &f * f.transpose()).abs().max();
        assert!(err < 1e-8, "{err}");
        assert_relative_eq!(d.loadings.transpose() * &d.loadings, Mat::identity(3, 3), epsilon = 1e-10);
        assert_eq!(eigen_ratios(&series).unwrap().suggested_r, 3);
        let p = &d.loadings * d.loadings.transpose();
        let inner = &p * series.mean().as_mat() * &p;
        assert_relative_eq!(&p * &inner * &p, inner, epsilon = 1e-10);
        for col in d.loadings.column_iter() {
            let m = col.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(m > 0.0);
        }
    }

    #[test]
    fn rotation_of_generator_is_invisible() {
        let f = orthonormal(8, 2, 3);
        let q = orthonormal(2, 2, 4);
        let fq = &f * &q;
        // same Y_t through either generator: F G F' = (FQ)(Q'GQ)(FQ)'
        let series = factor_series(&f, 80, 5);
        let rotated = MatrixSeries::new(
            series
                .iter()
                .map(|y| {
                    SpdMatrix::new(
                        fq.clone() * (fq.transpose() * y.as_mat() * &fq) * fq.transpose()
                            + (y.as_mat() - &f * f.transpose() * y.as_mat() * &f * f.transpose()),
                    )
                })
                .collect::<Result<Vec<_>>>()
                .unwrap(),
        )
        .unwrap();
        let a = extract_factors(&series, 2).unwrap();
        let b = extract_factors(&rotated, 2).unwrap();
        assert_relative_eq!(a.loadings, b.loadings, epsilon = 1e-10);
        assert_relative_eq!(a.static_part, b.static_part, epsilon = 1e-10);
    }

    #[test]
    fn one_factor_and_isotropic_noise() {
        let n = 6;
        let f = orthonormal(n, 1, 6);
        let mut rng = rng::stream(7, 0);
        let series = MatrixSeries::new(
            (0..200)
                .map(|_| {
                    let g: f64 = rng.random_range(0.5..3.0);
                    SpdMatrix::new(&f * f.transpose() * g + Mat::identity(n, n) * 0.2).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let d = eigen_ratios(&series).unwrap();
        assert_eq!(d.suggested_r, 1);
        assert!(d.ratios[0] > 1e6);

        // Wishart noise around I: no dominant spike
        let spec = CbfSpec::bekk11(
            SpdMatrix::identity(n),
            Mat::zeros(n, n),
            Mat::zeros(n, n),
            Innovation::Wishart { df: 200.0 },
            Structure::Full,
        )
        .unwrap();
        let noise = simulate(&spec, 3000, 0, &mut rng::stream(8, 0)).unwrap();
        let d = eigen_ratios(&noise).unwrap();
        assert!(d.ratios.iter().all(|&r| (1.0..1.5).contains(&r)), "{:?}", d.ratios);
        assert!(d.eigenvalues.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn degenerate_and_edge_cases() {
        let one = MatrixSeries::new(vec![
            SpdMatrix::from_diagonal(&[1.0]).unwrap(),
            SpdMatrix::from_diagonal(&[2.0]).unwrap(),
        ])
        .unwrap();
        let d = eigen_ratios(&one).unwrap();
        assert!(d.ratios.is_empty());
        assert_eq!(d.suggested_r, 1);
        let constant = MatrixSeries::new(vec![SpdMatrix::identity(3); 5]).unwrap();
        assert!(matches!(eigen_ratios(&constant), Err(Error::Degenerate(_))));
        let f = orthonormal(5, 2, 9);
        let series = factor_series(&f, 40, 10);
        assert!(extract_factors(&series, 0).is_err());
        assert!(extract_factors(&series, 6).is_err());
        // rank 2 data: λ3 = λ4 = 0 is a tie at r = 3
        assert!(matches!(extract_factors(&series, 3), Err(Error::TiedEigenvalues(_))));
    }

    #[test]
    fn full_rank_case() {
        let spec = CbfSpec::bekk11(
            SpdMatrix::identity(3),
            Mat::identity(3, 3) * 0.3,
            Mat::identity(3, 3) * 0.5,
            Innovation::MatrixF { nu1: 12.0, nu2: 10.0 },
            Structure::Diagonal,
        )
        .unwrap();
        let series = simulate(&spec, 200, 50, &mut rng::stream(11, 0)).unwrap();
        let d = extract_factors(&series, 3).unwrap();
        assert_relative_eq!(&d.loadings * d.loadings.transpose(), Mat::identity(3, 3), epsilon = 1e-10);
        assert!(d.static_part.abs().max() < 1e-10);
        let back = reconstruct(&d, &d.factor_series.get(4).clone()).unwrap();
        assert_relative_eq!(back, series.get(4).as_mat().clone(), epsilon = 1e-10);
        assert!(reconstruct(&d, &SpdMatrix::identity(2)).is_err());
    }

    #[test]
    fn reconstruction_beats_mean_on_factor_data() {
        let f = orthonormal(10, 2, 12);
        let series = factor_series(&f, 200, 13);
        let d = extract_factors(&series, 2).unwrap();
        let mean = series.mean();
        let (mut ours, mut base) = (0.0, 0.0);
        for t in 0..200 {
            let y = series.get(t).as_mat();
            // the factor path itself is the best r x r predictor here
            let pred = reconstruct(&d, d.factor_series.get(t)).unwrap();
            ours += (&pred - y).norm();
            base += (mean.as_mat() - y).norm();
        }
        assert!(ours <= base);
        assert!(ours / 200.0 < 1e-10);
    }

    #[test]
    fn factor_fit_targets_factor_mean() {
        let f = orthonormal(6, 1, 14);
        let spec = CbfSpec::bekk11(
            SpdMatrix::from_diagonal(&[0.5]).unwrap(),
            Mat::from_element(1, 1, 0.4),
            Mat::from_element(1, 1, 0.5),
            Innovation::MatrixF { nu1: 12.0, nu2: 10.0 },
            Structure::Diagonal,
        )
        .unwrap();
        let g = simulate(&spec, 600, 100, &mut rng::stream(15, 0)).unwrap();
        let y0 = (Mat::identity(6, 6) - &f * f.transpose()) * 0.1;
        let series = MatrixSeries::new(
            g.iter().map(|x| SpdMatrix::new(&f * x.as_mat() * f.transpose() + &y0).unwrap()).collect(),
        )
        .unwrap();
        let d = extract_factors(&series, 1).unwrap();
        let fit = fit_f_cbf(
            &d,
            Orders::Bekk { p: 1, q: 1, k: 1 },
            Structure::Diagonal,
            true,
            Family::MatrixF,
            &FitOptions::default(),
        )
        .unwrap();
        let FactorFit::Vt(vt) = fit else { panic!("expected two-step fit") };
        assert_eq!(vt.s_hat, vec_of(d.factor_series.mean().as_mat()));
        let se = vt.zeta_std_errors();
        assert!((vt.zeta_hat[0] - 0.4).abs() < 3.0 * se[0]);
        assert!((vt.zeta_hat[1] - 0.5).abs() < 3.0 * se[1]);
    }
}
