use super::*;
use crate::matdist::{logpdf_matrix_f, logpdf_wishart, MatrixFParams, WishartParams};
use crate::model::{sigma_path, simulate, CbfSpec, HarSpec, Innovation};
use approx::assert_relative_eq;
use proptest::prelude::*;

fn diag(d: &[f64]) -> Mat {
    Mat::from_diagonal(&DVector::from_column_slice(d))
}

fn design_omega() -> SpdMatrix {
    SpdMatrix::new(Mat::from_row_slice(3, 3, &[0.5, 0.2, 0.3, 0.2, 0.5, 0.25, 0.3, 0.25, 0.5])).unwrap()
}

fn design(innovation: Innovation, structure: Structure) -> CbfSpec {
    CbfSpec::bekk11(design_omega(), diag(&[0.4, 0.55, 0.5]), diag(&[0.4, 0.3, 0.5]), innovation, structure).unwrap()
}

fn sim(spec: &AnySpec, t: usize, seed: u64) -> MatrixSeries {
    simulate(spec, t, 200, &mut rng::stream(seed, 0)).unwrap()
}

fn mf() -> Innovation {
    Innovation::MatrixF { nu1: 10.0, nu2: 8.0 }
}

#[test]
fn zero_dynamics_match_density() {
    let spec = CbfSpec::bekk11(design_omega(), Mat::zeros(3, 3), Mat::zeros(3, 3), mf(), Structure::Full).unwrap();
    let series = sim(&design(mf(), Structure::Full).into(), 150, 1);
    let pv = ParamVector::from_spec(&spec.into());
    let init = InitState::from_series_mean(&series, 1);
    let got = neg_loglik(&pv, &series, &init).unwrap();
    let scale = design_omega().scaled((8.0 - 4.0) / 10.0).unwrap();
    let p = MatrixFParams::new(10.0, 8.0, scale).unwrap();
    let want = -series.iter().map(|y| logpdf_matrix_f(y, &p).unwrap()).sum::<f64>() / 150.0;
    assert_relative_eq!(got, want, max_relative = 1e-12);

    // averaging identity: the series concatenated with itself
    let mut doubled = series.as_slice().to_vec();
    doubled.extend_from_slice(series.as_slice());
    let doubled = MatrixSeries::new(doubled).unwrap();
    assert_relative_eq!(neg_loglik(&pv, &doubled, &init).unwrap(), got, max_relative = 1e-12);
}

#[test]
fn wishart_family_matches_density() {
    let spec = design(Innovation::Wishart { df: 9.0 }, Structure::Diagonal);
    let series = sim(&spec.clone().into(), 120, 2);
    let init = InitState::from_series_mean(&series, 1);
    let pv = ParamVector::from_spec(&spec.clone().into());
    assert_eq!(pv.as_slice().len(), 6 + 6 + 1);
    let got = neg_loglik(&pv, &series, &init).unwrap();
    let path = sigma_path(&spec, &series, &init).unwrap();
    let want = -series
        .iter()
        .zip(&path)
        .map(|(y, s)| logpdf_wishart(y, &WishartParams::new(9.0, s.scaled(1.0 / 9.0).unwrap()).unwrap()).unwrap())
        .sum::<f64>()
        / 120.0;
    assert_relative_eq!(got, want, max_relative = 1e-12);
}

#[test]
fn matrix_f_matches_density_with_dynamics() {
    let spec = design(mf(), Structure::Full);
    let series = sim(&spec.clone().into(), 100, 3);
    let init = InitState::from_series_mean(&series, 1);
    let got = neg_loglik(&ParamVector::from_spec(&spec.clone().into()), &series, &init).unwrap();
    let path = sigma_path(&spec, &series, &init).unwrap();
    let want = -series
        .iter()
        .zip(&path)
        .map(|(y, s)| logpdf_matrix_f(y, &MatrixFParams::with_mean(10.0, 8.0, s).unwrap()).unwrap())
        .sum::<f64>()
        / 100.0;
    assert_relative_eq!(got, want, max_relative = 1e-12);
}

fn specs_for_gradients() -> Vec<AnySpec> {
    let off = Mat::from_row_slice(3, 3, &[0.4, 0.05, -0.03, 0.02, 0.5, 0.04, -0.05, 0.03, 0.45]);
    let mut out: Vec<AnySpec> = vec![
        design(mf(), Structure::Full).into(),
        design(mf(), Structure::Diagonal).into(),
        design(Innovation::Wishart { df: 7.0 }, Structure::Diagonal).into(),
        CbfSpec::bekk11(design_omega(), off.clone(), diag(&[0.3, 0.35, 0.4]), mf(), Structure::Full).unwrap().into(),
    ];
    let small = |s: f64| diag(&[s, s * 1.1, s * 0.9]);
    out.push(
        CbfSpec::new(
            design_omega(),
            vec![vec![small(0.3), small(0.2)], vec![small(0.15), small(0.1)]],
            vec![vec![small(0.4)], vec![small(0.3)]],
            mf(),
            Structure::Diagonal,
        )
        .unwrap()
        .into(),
    );
    out.push(
        HarSpec::new(
            design_omega(),
            small(0.4),
            small(0.35),
            small(0.3),
            Innovation::MatrixF { nu1: 20.0, nu2: 10.0 },
            Structure::Diagonal,
        )
        .unwrap()
        .into(),
    );
    out
}

#[test]
fn analytic_gradient_matches_differences() {
    for (k, spec) in specs_for_gradients().into_iter().enumerate() {
        let series = sim(&spec, 200, 10 + k as u64);
        let shape = ModelShape::of_spec(&spec);
        let init = InitState::from_series_mean(&series, shape.max_lag());
        // perturb away from the truth so the gradient is not ~0
        let mut theta = ParamVector::from_spec(&spec).into_vec();
        let o = shape.omega_len();
        for v in &mut theta[o..o + shape.coef_total()] {
            *v *= 0.9;
        }
        let pv = ParamVector::new(shape, theta).unwrap();
        let err = grad_check(&pv, &series, &init).unwrap();
        assert!(err < 1e-5, "case {k}: {err}");
    }
}

#[test]
fn scores_sum_to_gradient() {
    for (k, spec) in specs_for_gradients().into_iter().enumerate() {
        let series = sim(&spec, 150, 30 + k as u64);
        let shape = ModelShape::of_spec(&spec);
        let init = InitState::from_series_mean(&series, shape.max_lag());
        let pv = ParamVector::from_spec(&spec);
        let (_, g) = neg_loglik_grad(&pv, &series, &init).unwrap();
        let sc = scores(&pv, &series, &init).unwrap();
        for p in 0..g.len() {
            let s: f64 = sc.column(p).sum() / 150.0;
            assert_relative_eq!(s, g[p], epsilon = 1e-10, max_relative = 1e-9);
        }
    }
}

#[test]
fn targeted_gradient_and_scores() {
    for (k, spec) in specs_for_gradients().into_iter().enumerate() {
        let series = sim(&spec, 150, 50 + k as u64);
        let shape = ModelShape::of_spec(&spec);
        let init = InitState::from_series_mean(&series, shape.max_lag());
        let data = Data::new(&shape, &series, &init).unwrap();
        let s = vec_of(series.mean().as_mat());
        let zeta: Vec<f64> = ParamVector::from_spec(&spec).as_slice()[shape.omega_len()..].to_vec();
        let (_, g) = engine::evaluate(&shape, &data, &zeta, Drift::Target(&s), true).unwrap();
        let fd = central_gradient(&shape, &data, &zeta, Drift::Target(&s)).unwrap();
        let sc = engine::scores(&shape, &data, &zeta, Drift::Target(&s)).unwrap();
        for p in 0..g.len() {
            assert!((g[p] - fd[p]).abs() / (1.0 + fd[p].abs()) < 1e-5, "case {k} p {p}: {} vs {}", g[p], fd[p]);
            let total: f64 = sc.iter().map(|r| r[p]).sum::<f64>() / 150.0;
            assert_relative_eq!(total, g[p], epsilon = 1e-10, max_relative = 1e-9);
        }
    }
}

#[test]
fn barrier_gradient_matches_differences() {
    // push the implied intercept inside the barrier margin
    let spec = design(mf(), Structure::Diagonal);
    let series = sim(&spec.into(), 150, 70);
    let shape = ModelShape::new(3, Orders::Bekk { p: 1, q: 1, k: 1 }, Structure::Diagonal, Family::MatrixF).unwrap();
    let init = InitState::from_series_mean(&series, 1);
    let data = Data::new(&shape, &series, &init).unwrap();
    let s = vec_of(series.mean().as_mat());
    let mut lo = 0.0;
    let mut hi = 2.0;
    let base = [0.4, 0.55, 0.5, 0.4, 0.3, 0.5];
    let feasible = |c: f64| {
        let mut z: Vec<f64> = base.iter().map(|v| v * c).collect();
        z.extend([10.0, 8.0]);
        implied_omega(&shape, &s, &z).is_ok()
    };
    for _ in 0..60 {
        let mid = (lo + hi) / 2.0;
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut z: Vec<f64> = base.iter().map(|v| v * lo * (1.0 - 1e-6)).collect();
    z.extend([10.0, 8.0]);
    let (f, g) = engine::evaluate(&shape, &data, &z, Drift::Target(&s), true).unwrap();
    let (f0, _) = engine::evaluate(&shape, &data, &z, Drift::Target(&s), false).unwrap();
    assert_eq!(f, f0);
    for p in 0..6 {
        let h = 1e-9;
        let mut zp = z.clone();
        zp[p] -= h;
        let mut zm = z.clone();
        zm[p] -= 2.0 * h;
        // one-sided towards the interior
        let fp = engine::evaluate(&shape, &data, &zp, Drift::Target(&s), false).unwrap().0;
        let fm = engine::evaluate(&shape, &data, &zm, Drift::Target(&s), false).unwrap().0;
        let fd = (3.0 * f - 4.0 * fp + fm) / (2.0 * h);
        assert!((g[p] - fd).abs() / (1.0 + fd.abs()) < 1e-3, "p {p}: {} vs {fd}", g[p]);
    }
    let mut bad: Vec<f64> = base.iter().map(|v| v * hi * 1.01).collect();
    bad.extend([10.0, 8.0]);
    assert!(engine::evaluate(&shape, &data, &bad, Drift::Target(&s), false).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn sign_flip_leaves_likelihood(flip_a in any::<bool>(), flip_b in any::<bool>(), seed in 0u64..1000) {
        let spec = design(mf(), Structure::Full);
        let series = sim(&spec.clone().into(), 60, seed);
        let init = InitState::from_series_mean(&series, 1);
        let pv = ParamVector::from_spec(&spec.into());
        let mut theta = pv.as_slice().to_vec();
        if flip_a { theta[6..15].iter_mut().for_each(|v| *v = -*v); }
        if flip_b { theta[15..24].iter_mut().for_each(|v| *v = -*v); }
        let flipped = ParamVector::new(*pv.shape(), theta).unwrap();
        let a = neg_loglik(&pv, &series, &init).unwrap();
        let b = neg_loglik(&flipped, &series, &init).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
        prop_assert_eq!(flipped.canonical(), pv);
    }
}

#[test]
fn mle_recovers_design() {
    let spec: AnySpec = design(mf(), Structure::Diagonal).into();
    let series = sim(&spec, 1000, 99);
    let fit = fit_mle(
        &series,
        Orders::Bekk { p: 1, q: 1, k: 1 },
        Structure::Diagonal,
        Family::MatrixF,
        &FitOptions::default(),
    )
    .unwrap();
    assert!(fit.converged);
    assert!(fit.grad_norm <= 1e-6 * fit.neg_loglik.abs().max(1.0));
    let truth = ParamVector::from_spec(&spec);
    for (k, (est, t)) in fit.theta_hat.as_slice().iter().zip(truth.as_slice()).enumerate() {
        assert!((est - t).abs() < 4.0 * fit.std_errors[k], "param {k}: {est} vs {t} (se {})", fit.std_errors[k]);
    }
    // Hessian at the optimum has no materially negative eigenvalue
    let eig = SymmetricEigen::new(fit.hessian.clone());
    let scale = fit.hessian.trace().abs();
    assert!(eig.eigenvalues.iter().all(|&v| v > -1e-6 * scale));
    assert!(!fit.cov_flagged);
    assert_relative_eq!(fit.cov.clone(), fit.cov.transpose(), epsilon = 0.0);
    let init = InitState::from_series_mean(&series, 1);
    let again = asymp_cov_mle(&fit.theta_hat, &series, &init).unwrap();
    assert_relative_eq!(again.cov, fit.cov, max_relative = 1e-12);
}

#[test]
fn finite_difference_mode_agrees() {
    let spec: AnySpec = design(mf(), Structure::Diagonal).into();
    let series = sim(&spec, 400, 5);
    let orders = Orders::Bekk { p: 1, q: 1, k: 1 };
    let opts = FitOptions { skip_covariance: true, ..FitOptions::default() };
    let a = fit_mle(&series, orders, Structure::Diagonal, Family::MatrixF, &opts).unwrap();
    let fd = FitOptions { gradient: GradientMode::FiniteDifference, ..opts };
    let b = fit_mle(&series, orders, Structure::Diagonal, Family::MatrixF, &fd).unwrap();
    assert!(a.converged);
    for (x, y) in a.theta_hat.as_slice().iter().zip(b.theta_hat.as_slice()) {
        assert!((x - y).abs() < 1e-3 * (1.0 + x.abs()), "{x} vs {y}");
    }
}

#[test]
fn short_series_rejected() {
    let spec: AnySpec = design(mf(), Structure::Full).into();
    let series = sim(&spec, 100, 6);
    let r =
        fit_mle(&series, Orders::Bekk { p: 1, q: 1, k: 1 }, Structure::Full, Family::MatrixF, &FitOptions::default());
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn vt_target_is_sample_mean() {
    let spec: AnySpec = design(mf(), Structure::Diagonal).into();
    let series = sim(&spec, 600, 7);
    let fit = fit_vt(
        &series,
        Orders::Bekk { p: 1, q: 1, k: 1 },
        Structure::Diagonal,
        Family::MatrixF,
        &FitOptions::default(),
    )
    .unwrap();
    let mut acc = Mat::zeros(3, 3);
    for y in series.iter() {
        acc += y.as_mat();
    }
    acc /= 600.0;
    assert_eq!(fit.s_hat, vec_of(&symmetrize(acc)));
    assert!(fit.converged);
    let d = 9 + fit.zeta_hat.len();
    assert_eq!(fit.cov.shape(), (d, d));
    assert_relative_eq!(fit.cov.clone(), fit.cov.transpose(), epsilon = 1e-15);
    assert!(SymmetricEigen::new(fit.cov.clone()).eigenvalues.iter().all(|&v| v > -1e-12));
    // estimates near the truth
    let truth = [0.4, 0.55, 0.5, 0.4, 0.3, 0.5, 10.0, 8.0];
    for (k, (e, t)) in fit.zeta_hat.iter().zip(truth).enumerate() {
        assert!((e - t).abs() < 4.0 * fit.zeta_std_errors()[k], "param {k}: {e} vs {t}");
    }
}

#[test]
fn vt_degenerate_truth() {
    let spec: AnySpec = CbfSpec::bekk11(
        design_omega(),
        Mat::zeros(3, 3),
        Mat::zeros(3, 3),
        Innovation::MatrixF { nu1: 40.0, nu2: 40.0 },
        Structure::Diagonal,
    )
    .unwrap()
    .into();
    let series = sim(&spec, 1500, 8);
    let opts = FitOptions { skip_covariance: true, ..FitOptions::default() };
    let fit = fit_vt(&series, Orders::Bekk { p: 1, q: 1, k: 1 }, Structure::Diagonal, Family::MatrixF, &opts).unwrap();
    let u = &fit.zeta_hat[..6];
    // ARCH loadings near zero; a GARCH loading is unidentified when A = 0
    assert!(u[..3].iter().all(|v| v.abs() < 0.2), "{u:?}");
    // with A = 0 the GARCH loading is unidentified, but the fitted path is
    // flat at the sample mean
    let init = InitState::from_series_mean(&series, 1);
    let path = fitted_sigma(&fit.to_param_vector().unwrap(), &series, &init).unwrap();
    let target = fit.target();
    let worst = path.iter().map(|s| (s - target.as_mat()).abs().max()).fold(0.0, f64::max);
    assert!(worst < 0.1 * target.as_mat().max(), "{worst}");
}
