//! Packed parameter layout and the map to the unconstrained search space.
//!
//! Natural order: `vech(Ω)`, then every ARCH coefficient, then every GARCH
//! coefficient, then the degrees of freedom. Full coefficients are stored as
//! `vec(C)` (column-major), diagonal ones as their diagonal. BEKK blocks run
//! component-major: `A[1][1..P], A[2][1..P], …`. The variance-targeted
//! parameter `ζ` is the same vector without the leading `vech(Ω)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matalg::{vech_unchecked, Mat, SpdMatrix};
use crate::model::{
    har_patterns, AnySpec, CbfSpec, Coef, Family, HarSpec, Innovation, Recursion, Specification, Structure,
};
#[allow(unused_imports)]
use crate::num::Real;

/// Lag structure of the conditional mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orders {
    /// `P` ARCH lags, `Q` GARCH lags, `K` components.
    Bekk { p: usize, q: usize, k: usize },
    /// Daily / weekly / monthly averages.
    Har,
}

/// Everything about a model except the parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelShape {
    pub n: usize,
    pub orders: Orders,
    pub structure: Structure,
    pub family: Family,
}

pub(crate) const ETA_CLAMP: f64 = 20.0;

impl ModelShape {
    pub fn new(n: usize, orders: Orders, structure: Structure, family: Family) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if let Orders::Bekk { p, q, k } = orders {
            if k == 0 || p + q == 0 {
                return Err(Error::InvalidArgument("BEKK orders need K >= 1 and P + Q >= 1".into()));
            }
        }
        Ok(ModelShape { n, orders, structure, family })
    }

    /// Shape of an existing specification.
    pub fn of_spec(spec: &AnySpec) -> Self {
        let orders = match spec {
            AnySpec::Cbf(s) => {
                let (p, q, k) = s.orders();
                Orders::Bekk { p, q, k }
            }
            AnySpec::Har(_) => Orders::Har,
        };
        ModelShape { n: spec.n(), orders, structure: spec.structure(), family: spec.innovation().family() }
    }

    /// Entries per coefficient.
    pub fn coef_len(&self) -> usize {
        match self.structure {
            Structure::Full => self.n * self.n,
            Structure::Diagonal => self.n,
        }
    }

    pub(crate) fn patterns(&self) -> Vec<Vec<(usize, f64)>> {
        match self.orders {
            Orders::Bekk { p, .. } => (1..=p).map(|i| vec![(i, 1.0)]).collect(),
            Orders::Har => har_patterns(),
        }
    }

    /// Pattern index of each ARCH term.
    pub(crate) fn arch_patterns(&self) -> Vec<usize> {
        match self.orders {
            Orders::Bekk { p, k, .. } => (0..k).flat_map(|_| 0..p).collect(),
            Orders::Har => vec![0, 1, 2],
        }
    }

    /// Lag of each GARCH term.
    pub(crate) fn garch_lags(&self) -> Vec<usize> {
        match self.orders {
            Orders::Bekk { q, k, .. } => (0..k).flat_map(|_| 1..=q).collect(),
            Orders::Har => Vec::new(),
        }
    }

    pub fn n_arch(&self) -> usize {
        match self.orders {
            Orders::Bekk { p, k, .. } => p * k,
            Orders::Har => 3,
        }
    }

    pub fn n_garch(&self) -> usize {
        match self.orders {
            Orders::Bekk { q, k, .. } => q * k,
            Orders::Har => 0,
        }
    }

    pub fn max_lag(&self) -> usize {
        match self.orders {
            Orders::Bekk { p, q, .. } => p.max(q),
            Orders::Har => 22,
        }
    }

    pub fn omega_len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn nu_len(&self) -> usize {
        match self.family {
            Family::MatrixF => 2,
            Family::Wishart => 1,
        }
    }

    /// Number of dynamic coefficients (the paper's `u`).
    pub fn coef_total(&self) -> usize {
        (self.n_arch() + self.n_garch()) * self.coef_len()
    }

    /// Length of the full parameter vector.
    pub fn dim(&self) -> usize {
        self.omega_len() + self.coef_total() + self.nu_len()
    }

    /// Length of the variance-targeted parameter `ζ`.
    pub fn zeta_dim(&self) -> usize {
        self.coef_total() + self.nu_len()
    }

    /// Lower bound of the degrees-of-freedom domain.
    pub(crate) fn nu_floor(&self) -> f64 {
        match self.family {
            Family::MatrixF => self.n as f64 + 1.0,
            Family::Wishart => self.n as f64 - 1.0,
        }
    }

    /// Human-readable names in natural order (1-based indices).
    pub fn names(&self, targeted: bool) -> Vec<String> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.dim());
        if !targeted {
            for j in 0..n {
                for i in j..n {
                    out.push(format!("omega[{},{}]", i + 1, j + 1));
                }
            }
        }
        let coef_names = |label: String, out: &mut Vec<String>| match self.structure {
            Structure::Full => {
                for c in 0..n {
                    for r in 0..n {
                        out.push(format!("{label}[{},{}]", r + 1, c + 1));
                    }
                }
            }
            Structure::Diagonal => {
                for r in 0..n {
                    out.push(format!("{label}[{},{}]", r + 1, r + 1));
                }
            }
        };
        match self.orders {
            Orders::Bekk { p, q, k } => {
                for kk in 0..k {
                    for i in 0..p {
                        coef_names(format!("A{}_{}", kk + 1, i + 1), &mut out);
                    }
                }
                for kk in 0..k {
                    for j in 0..q {
                        coef_names(format!("B{}_{}", kk + 1, j + 1), &mut out);
                    }
                }
            }
            Orders::Har => {
                for label in ["A_d", "A_w", "A_m"] {
                    coef_names(label.into(), &mut out);
                }
            }
        }
        out.push("nu1".into());
        if self.family == Family::MatrixF {
            out.push("nu2".into());
        }
        out
    }

    pub(crate) fn coef_from_slice(&self, v: &[f64]) -> Coef {
        match self.structure {
            Structure::Full => Coef::Full(Mat::from_column_slice(self.n, self.n, v)),
            Structure::Diagonal => Coef::Diag(v.to_vec()),
        }
    }

    pub(crate) fn recursion(&self, omega: Mat, coefs: &[f64]) -> Recursion {
        let cl = self.coef_len();
        let arch = self
            .arch_patterns()
            .into_iter()
            .enumerate()
            .map(|(a, p)| (self.coef_from_slice(&coefs[a * cl..(a + 1) * cl]), p))
            .collect();
        let off = self.n_arch() * cl;
        let garch = self
            .garch_lags()
            .into_iter()
            .enumerate()
            .map(|(g, lag)| (self.coef_from_slice(&coefs[off + g * cl..off + (g + 1) * cl]), lag))
            .collect();
        Recursion { n: self.n, omega, patterns: self.patterns(), arch, garch }
    }

    pub(crate) fn innovation(&self, nu: &[f64]) -> Innovation {
        match self.family {
            Family::MatrixF => Innovation::MatrixF { nu1: nu[0], nu2: nu[1] },
            Family::Wishart => Innovation::Wishart { df: nu[0] },
        }
    }

    /// Builds a specification from `Ω`, packed coefficients and `ν`.
    pub(crate) fn build_spec(&self, omega: SpdMatrix, coefs: &[f64], nu: &[f64]) -> Result<AnySpec> {
        let cl = self.coef_len();
        let to_mat = |v: &[f64]| self.coef_from_slice(v).to_mat();
        let innovation = self.innovation(nu);
        match self.orders {
            Orders::Bekk { p, q, k } => {
                let mut arch = vec![Vec::with_capacity(p); k];
                let mut garch = vec![Vec::with_capacity(q); k];
                let mut idx = 0;
                for row in arch.iter_mut() {
                    for _ in 0..p {
                        row.push(to_mat(&coefs[idx..idx + cl]));
                        idx += cl;
                    }
                }
                for row in garch.iter_mut() {
                    for _ in 0..q {
                        row.push(to_mat(&coefs[idx..idx + cl]));
                        idx += cl;
                    }
                }
                Ok(AnySpec::Cbf(CbfSpec::new(omega, arch, garch, innovation, self.structure)?))
            }
            Orders::Har => Ok(AnySpec::Har(HarSpec::new(
                omega,
                to_mat(&coefs[0..cl]),
                to_mat(&coefs[cl..2 * cl]),
                to_mat(&coefs[2 * cl..3 * cl]),
                innovation,
                self.structure,
            )?)),
        }
    }

    pub(crate) fn check_nu(&self, nu: &[f64]) -> Result<()> {
        self.innovation(nu).validate(self.n)
    }

    /// Flips each coefficient so its first diagonal element is nonnegative.
    pub(crate) fn canonicalize_coefs(&self, coefs: &mut [f64]) {
        let cl = self.coef_len();
        for c in coefs.chunks_mut(cl) {
            if c[0] < 0.0 {
                c.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    /// Packs the coefficients of a specification with this shape.
    pub(crate) fn pack_coefs(&self, spec: &AnySpec) -> Vec<f64> {
        let rec = spec.recursion();
        let mut out = Vec::with_capacity(self.coef_total());
        for (c, _) in rec.arch.iter().chain(rec.garch.iter()) {
            match c {
                Coef::Full(m) => out.extend_from_slice(m.as_slice()),
                Coef::Diag(d) => out.extend_from_slice(d),
            }
        }
        out
    }
}

/// Flat `θ = (vech(Ω)', u', ν')'` tied to a [`ModelShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    shape: ModelShape,
    theta: Vec<f64>,
}

impl ParamVector {
    /// Checks length and domain (`Ω` positive definite, `ν` admissible).
    pub fn new(shape: ModelShape, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != shape.dim() {
            return Err(Error::DimensionMismatch { expected: shape.dim(), actual: theta.len() });
        }
        let pv = ParamVector { shape, theta };
        pv.omega()?;
        shape.check_nu(pv.nu())?;
        Ok(pv)
    }

    pub fn from_spec(spec: &AnySpec) -> Self {
        let shape = ModelShape::of_spec(spec);
        let mut theta = Vec::with_capacity(shape.dim());
        let omega = match spec {
            AnySpec::Cbf(s) => s.omega(),
            AnySpec::Har(s) => s.omega(),
        };
        theta.extend(vech_unchecked(omega.as_mat()));
        theta.extend(shape.pack_coefs(spec));
        match spec.innovation() {
            Innovation::MatrixF { nu1, nu2 } => theta.extend([nu1, nu2]),
            Innovation::Wishart { df } => theta.push(df),
        }
        ParamVector { shape, theta }
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn omega(&self) -> Result<SpdMatrix> {
        SpdMatrix::from_vech(&self.theta[..self.shape.omega_len()], self.shape.n)
    }

    /// Packed coefficients `u`.
    pub fn coefs(&self) -> &[f64] {
        let o = self.shape.omega_len();
        &self.theta[o..o + self.shape.coef_total()]
    }

    pub fn nu(&self) -> &[f64] {
        &self.theta[self.shape.dim() - self.shape.nu_len()..]
    }

    pub fn to_spec(&self) -> Result<AnySpec> {
        self.shape.build_spec(self.omega()?, self.coefs(), self.nu())
    }

    /// Same parameters with every coefficient sign-normalized.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        let o = self.shape.omega_len();
        let c = self.shape.coef_total();
        self.shape.canonicalize_coefs(&mut out.theta[o..o + c]);
        out
    }
}

/// Natural `θ` → unconstrained `η` (full model when `targeted` is false).
pub(crate) fn to_eta(shape: &ModelShape, natural: &[f64], targeted: bool) -> Result<Vec<f64>> {
    let n = shape.n;
    let mut eta = Vec::with_capacity(natural.len());
    let mut rest = natural;
    if !targeted {
        let omega = SpdMatrix::from_vech(&natural[..shape.omega_len()], n)?;
        let l = omega.into_inner().cholesky().expect("SPD").unpack();
        for j in 0..n {
            for i in j..n {
                eta.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
            }
        }
        rest = &natural[shape.omega_len()..];
    }
    let c = shape.coef_total();
    eta.extend_from_slice(&rest[..c]);
    let floor = shape.nu_floor();
    for &nu in &rest[c..] {
        if !(nu > floor) {
            return Err(Error::InvalidDof(format!("nu = {nu} must exceed {floor}")));
        }
        eta.push((nu - floor).ln().clamp(-ETA_CLAMP, ETA_CLAMP));
    }
    Ok(eta)
}

fn omega_factor(shape: &ModelShape, eta: &[f64]) -> Mat {
    let n = shape.n;
    let mut l = Mat::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            l[(i, j)] = if i == j { eta[idx].clamp(-ETA_CLAMP * 5.0, ETA_CLAMP * 5.0).exp() } else { eta[idx] };
            idx += 1;
        }
    }
    l
}

/// Unconstrained `η` → natural `θ`.
pub(crate) fn from_eta(shape: &ModelShape, eta: &[f64], targeted: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(eta.len());
    let mut rest = eta;
    if !targeted {
        let l = omega_factor(shape, eta);
        out.extend(vech_unchecked(&(&l * l.transpose())));
        rest = &eta[shape.omega_len()..];
    }
    let c = shape.coef_total();
    out.extend_from_slice(&rest[..c]);
    let floor = shape.nu_floor();
    for &e in &rest[c..] {
        out.push(floor + e.clamp(-ETA_CLAMP, ETA_CLAMP).exp());
    }
    out
}

/// Chain rule: gradient in natural coordinates → gradient in `η`.
pub(crate) fn grad_to_eta(shape: &ModelShape, eta: &[f64], grad: &[f64], targeted: bool) -> Vec<f64> {
    let n = shape.n;
    let mut out = Vec::with_capacity(grad.len());
    let mut g_rest = grad;
    let mut e_rest = eta;
    if !targeted {
        let l = omega_factor(shape, eta);
        // symmetric matrix gradient H with ∂F/∂w_ij = 2 H_ij off the diagonal
        let mut h = Mat::zeros(n, n);
        let mut idx = 0;
        for j in 0..n {
            for i in j..n {
                let g = grad[idx];
                if i == j {
                    h[(i, i)] = g;
                } else {
                    h[(i, j)] = g / 2.0;
                    h[(j, i)] = g / 2.0;
                }
                idx += 1;
            }
        }
        let gl = h * &l * 2.0;
        for j in 0..n {
            for i in j..n {
                out.push(if i == j { gl[(i, i)] * l[(i, i)] } else { gl[(i, j)] });
            }
        }
        g_rest = &grad[shape.omega_len()..];
        e_rest = &eta[shape.omega_len()..];
    }
    let c = shape.coef_total();
    out.extend_from_slice(&g_rest[..c]);
    for (g, e) in g_rest[c..].iter().zip(&e_rest[c..]) {
        let inside = e.abs() < ETA_CLAMP;
        out.push(if inside { g * e.exp() } else { 0.0 });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn shapes() -> Vec<ModelShape> {
        let mut out = Vec::new();
        for structure in [Structure::Full, Structure::Diagonal] {
            for family in [Family::MatrixF, Family::Wishart] {
                out.push(ModelShape::new(3, Orders::Bekk { p: 1, q: 1, k: 1 }, structure, family).unwrap());
                out.push(ModelShape::new(2, Orders::Bekk { p: 2, q: 1, k: 2 }, structure, family).unwrap());
                out.push(ModelShape::new(2, Orders::Har, structure, family).unwrap());
            }
        }
        out
    }

    #[test]
    fn dimension_counts() {
        // τ1 = n/2 + [(P+Q)K + 1/2] n², plus ν
        let s = ModelShape::new(3, Orders::Bekk { p: 1, q: 1, k: 1 }, Structure::Full, Family::MatrixF).unwrap();
        assert_eq!(s.dim(), 6 + 18 + 2);
        let d = ModelShape::new(3, Orders::Bekk { p: 1, q: 1, k: 1 }, Structure::Diagonal, Family::MatrixF).unwrap();
        assert_eq!(d.dim(), 14);
        assert_eq!(d.names(false).len(), 14);
        assert_eq!(d.names(true).len(), d.zeta_dim());
        let w = ModelShape::new(3, Orders::Har, Structure::Diagonal, Family::Wishart).unwrap();
        assert_eq!(w.dim(), 6 + 9 + 1);
        assert!(!w.names(false).iter().any(|x| x == "nu2"));
    }

    fn sample_theta(shape: &ModelShape, seed: &[f64]) -> Vec<f64> {
        let n = shape.n;
        let a = Mat::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()]);
        let omega = &a * a.transpose() + Mat::identity(n, n);
        let mut theta = vech_unchecked(&omega);
        for i in 0..shape.coef_total() {
            theta.push(seed[(i + 3) % seed.len()] * 0.5);
        }
        theta.push(shape.nu_floor() + 3.0 + seed[0].abs());
        if shape.family == Family::MatrixF {
            theta.push(shape.nu_floor() + 1.5 + seed[1].abs());
        }
        theta
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(seed in proptest::collection::vec(-1.0f64..1.0, 12)) {
            for shape in shapes() {
                let theta = sample_theta(&shape, &seed);
                let pv = ParamVector::new(shape, theta).unwrap().canonical();
                let spec = pv.to_spec().unwrap();
                let back = ParamVector::from_spec(&spec);
                prop_assert_eq!(back.as_slice(), pv.as_slice());
            }
        }

        #[test]
        fn eta_round_trip(seed in proptest::collection::vec(-1.0f64..1.0, 12)) {
            for shape in shapes() {
                let theta = sample_theta(&shape, &seed);
                let eta = to_eta(&shape, &theta, false).unwrap();
                let back = from_eta(&shape, &eta, false);
                for (a, b) in theta.iter().zip(&back) {
                    prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
                }
            }
        }
    }

    #[test]
    fn eta_gradient_chain() {
        // F(θ) = Σ c_i θ_i, so ∂F/∂η is checked against differences of from_eta
        for shape in shapes() {
            let theta = sample_theta(&shape, &[0.3, -0.7, 0.2, 0.9, -0.1]);
            let coeffs: Vec<f64> = (0..theta.len()).map(|i| 0.1 * i as f64 - 0.4).collect();
            let eta = to_eta(&shape, &theta, false).unwrap();
            let g = grad_to_eta(&shape, &eta, &coeffs, false);
            for k in 0..eta.len() {
                let h = 1e-6;
                let mut ep = eta.clone();
                ep[k] += h;
                let mut em = eta.clone();
                em[k] -= h;
                let f = |e: &[f64]| from_eta(&shape, e, false).iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>();
                assert_relative_eq!(g[k], (f(&ep) - f(&em)) / (2.0 * h), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn bad_vectors_rejected() {
        let s = ModelShape::new(2, Orders::Bekk { p: 1, q: 1, k: 1 }, Structure::Diagonal, Family::MatrixF).unwrap();
        assert!(ParamVector::new(s, vec![1.0; 3]).is_err());
        // Ω not PD
        assert!(ParamVector::new(s, vec![1.0, 2.0, 1.0, 0.1, 0.1, 0.1, 0.1, 6.0, 6.0]).is_err());
        // ν2 outside domain
        assert!(ParamVector::new(s, vec![1.0, 0.0, 1.0, 0.1, 0.1, 0.1, 0.1, 6.0, 2.5]).is_err());
        assert!(ParamVector::new(s, vec![1.0, 0.0, 1.0, 0.1, 0.1, 0.1, 0.1, 6.0, 3.5]).is_ok());
        assert!(ModelShape::new(2, Orders::Bekk { p: 0, q: 0, k: 1 }, Structure::Full, Family::MatrixF).is_err());
    }
}
