//! Flat likelihood loops: value, reverse-mode gradient and per-period scores.
//!
//! `θ` here is always in natural coordinates. With a free intercept it is
//! the full vector; under variance targeting it is `ζ` and `Ω` is implied by
//! the target `S` as `S - Σ_a A_a S A_a' - Σ_g B_g S B_g'`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use super::layout::ModelShape;
use crate::error::{Error, Result};
use crate::matalg::small::{add_sandwich_diag, add_sandwich_full, chol_inverse, chol_logdet, cholesky, dot, mul};
use crate::matalg::{Mat, MatrixSeries};
use crate::matdist::ln_norm_const;
use crate::model::{Family, InitState, Structure};
#[allow(unused_imports)]
use crate::num::Real;
use crate::special::{ln_multigamma_unchecked, multi_digamma};

/// How the intercept is obtained.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Drift<'a> {
    Free,
    /// Column-major `n x n` target.
    Target(&'a [f64]),
}

/// Barrier weight for the implied intercept under targeting.
const BARRIER_WEIGHT: f64 = 1.0;
/// Barrier margin relative to the average target variance.
const BARRIER_MARGIN: f64 = 1e-4;

/// Observations flattened once per fit.
#[derive(Debug, Clone)]
pub(crate) struct Data {
    pub n: usize,
    pub t: usize,
    pub y: Vec<f64>,
    pub ld_y: Vec<f64>,
    /// One `T x n²` block per input pattern.
    pub inputs: Vec<Vec<f64>>,
    /// `sig_init[k]` is `Σ_{-k}`.
    pub sig_init: Vec<Vec<f64>>,
}

impl Data {
    pub fn new(shape: &ModelShape, series: &MatrixSeries, init: &InitState) -> Result<Self> {
        let n = shape.n;
        if series.n() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: series.n() });
        }
        let lags = shape.max_lag();
        if init.lags() < lags {
            return Err(Error::InvalidArgument(alloc::format!(
                "initial state holds {} matrices but the model needs {lags}",
                init.lags()
            )));
        }
        if let Some(bad) = init.y_init.iter().chain(init.sigma_init.iter()).find(|m| m.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: bad.dim() });
        }
        let nn = n * n;
        let t = series.len();
        let mut y = Vec::with_capacity(t * nn);
        let mut ld_y = Vec::with_capacity(t);
        for m in series.iter() {
            y.extend_from_slice(m.as_slice());
            ld_y.push(m.log_det());
        }
        let y_at = |t0: usize, lag: usize| -> &[f64] {
            if t0 >= lag {
                &y[(t0 - lag) * nn..(t0 - lag + 1) * nn]
            } else {
                init.y_init[lag - t0 - 1].as_slice()
            }
        };
        let inputs = shape
            .patterns()
            .iter()
            .map(|pat| {
                let mut x = vec![0.0; t * nn];
                for t0 in 0..t {
                    let dst = &mut x[t0 * nn..(t0 + 1) * nn];
                    for &(lag, w) in pat {
                        for (d, s) in dst.iter_mut().zip(y_at(t0, lag)) {
                            *d += w * s;
                        }
                    }
                }
                x
            })
            .collect();
        let sig_init = init.sigma_init.iter().map(|m| m.as_slice().to_vec()).collect();
        Ok(Data { n, t, y, ld_y, inputs, sig_init })
    }

    #[inline]
    fn y(&self, t0: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.y[t0 * nn..(t0 + 1) * nn]
    }
}

#[inline]
fn lagged<'a>(sigma: &'a [f64], init: &'a [Vec<f64>], nn: usize, t0: usize, lag: usize) -> &'a [f64] {
    if t0 >= lag {
        &sigma[(t0 - lag) * nn..(t0 - lag + 1) * nn]
    } else {
        &init[lag - t0 - 1]
    }
}

/// `acc += C X C'`.
fn sandwich(structure: Structure, n: usize, c: &[f64], x: &[f64], tmp: &mut [f64], acc: &mut [f64]) {
    match structure {
        Structure::Full => add_sandwich_full(n, 1.0, c, x, tmp, acc),
        Structure::Diagonal => add_sandwich_diag(n, 1.0, c, x, acc),
    }
}

/// `out += f · ∂ tr(Λ C X C')/∂C = f · 2 Λ C X` in packed form.
fn coef_grad(
    structure: Structure,
    n: usize,
    lam: &[f64],
    c: &[f64],
    x: &[f64],
    f: f64,
    t1: &mut [f64],
    t2: &mut [f64],
    out: &mut [f64],
) {
    match structure {
        Structure::Full => {
            mul(n, lam, c, t1);
            mul(n, t1, x, t2);
            for (o, v) in out.iter_mut().zip(t2.iter()) {
                *o += 2.0 * f * v;
            }
        }
        Structure::Diagonal => {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += lam[j * n + i] * c[j] * x[i * n + j];
                }
                out[i] += 2.0 * f * s;
            }
        }
    }
}

/// Parameter-dependent constants of the per-period loss.
struct Law {
    family: Family,
    n: usize,
    nu1: f64,
    nu2: f64,
    /// `(ν2-n-1)/ν1`.
    c: f64,
    l0: f64,
    d1: f64,
    d2: f64,
}

impl Law {
    fn new(family: Family, n: usize, nu: &[f64]) -> Self {
        let nf = n as f64;
        match family {
            Family::MatrixF => {
                let (nu1, nu2) = (nu[0], nu[1]);
                let c = (nu2 - nf - 1.0) / nu1;
                let h = (nu1 + nu2) / 2.0;
                Law {
                    family,
                    n,
                    nu1,
                    nu2,
                    c,
                    l0: nf * nu1 / 2.0 * c.ln() - ln_norm_const(n, nu1, nu2),
                    d1: nf / 2.0 * (c.ln() - 1.0) - multi_digamma(n, h) / 2.0 + multi_digamma(n, nu1 / 2.0) / 2.0,
                    d2: nf * nu1 / (2.0 * (nu2 - nf - 1.0)) - multi_digamma(n, h) / 2.0
                        + multi_digamma(n, nu2 / 2.0) / 2.0,
                }
            }
            Family::Wishart => {
                let nu1 = nu[0];
                let ln2 = core::f64::consts::LN_2;
                Law {
                    family,
                    n,
                    nu1,
                    nu2: f64::INFINITY,
                    c: 1.0,
                    l0: nf * nu1 / 2.0 * (ln2 - nu1.ln()) + ln_multigamma_unchecked(n, nu1 / 2.0),
                    d1: nf / 2.0 * (ln2 - nu1.ln()) - nf / 2.0 + multi_digamma(n, nu1 / 2.0) / 2.0,
                    d2: 0.0,
                }
            }
        }
    }

    /// Loss at one period; writes `∂l/∂Σ` into `g` and returns
    /// `(l, ∂l/∂ν1, ∂l/∂ν2)`. `None` if `Σ` is not positive definite.
    fn period(&self, sigma: &[f64], y: &[f64], ld_y: f64, w: &mut Scratch, g: &mut [f64]) -> Option<(f64, f64, f64)> {
        let n = self.n;
        let nn = n * n;
        let nf = n as f64;
        w.a[..nn].copy_from_slice(sigma);
        if !cholesky(n, &mut w.a) {
            return None;
        }
        let ld_s = chol_logdet(n, &w.a);
        chol_inverse(n, &w.a, &mut w.b, &mut w.s_inv);
        match self.family {
            Family::MatrixF => {
                let inv_c = 1.0 / self.c;
                for i in 0..nn {
                    w.a[i] = sigma[i] + y[i] * inv_c;
                }
                if !cholesky(n, &mut w.a) {
                    return None;
                }
                let ld_m = chol_logdet(n, &w.a);
                chol_inverse(n, &w.a, &mut w.b, &mut w.m_inv);
                let h = (self.nu1 + self.nu2) / 2.0;
                for i in 0..nn {
                    g[i] = -self.nu2 / 2.0 * w.s_inv[i] + h * w.m_inv[i];
                }
                let tr_my = dot(&w.m_inv, y);
                let r = self.nu2 - nf - 1.0;
                let l = self.l0 - self.nu2 / 2.0 * ld_s + h * ld_m - (self.nu1 - nf - 1.0) / 2.0 * ld_y;
                let d1 = self.d1 + ld_m / 2.0 + h * tr_my / r - ld_y / 2.0;
                let d2 = self.d2 - ld_s / 2.0 + ld_m / 2.0 - h * tr_my * self.nu1 / (r * r);
                Some((l, d1, d2))
            }
            Family::Wishart => {
                let tr_sy = dot(&w.s_inv, y);
                // Σ⁻¹ Y Σ⁻¹
                mul(n, &w.s_inv, y, &mut w.b);
                mul(n, &w.b, &w.s_inv, &mut w.m_inv);
                let k = self.nu1 / 2.0;
                for i in 0..nn {
                    g[i] = k * (w.s_inv[i] - w.m_inv[i]);
                }
                let l = self.l0 - (self.nu1 - nf - 1.0) / 2.0 * ld_y + k * tr_sy + k * ld_s;
                let d1 = self.d1 - ld_y / 2.0 + tr_sy / 2.0 + ld_s / 2.0;
                Some((l, d1, 0.0))
            }
        }
    }
}

struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    s_inv: Vec<f64>,
    m_inv: Vec<f64>,
}

impl Scratch {
    fn new(nn: usize) -> Self {
        Scratch { a: vec![0.0; nn], b: vec![0.0; nn], s_inv: vec![0.0; nn], m_inv: vec![0.0; nn] }
    }
}

/// Intercept plus the targeting barrier and its gradient in `Ω`.
struct Intercept {
    omega: Vec<f64>,
    penalty: f64,
    penalty_grad: Vec<f64>,
}

fn intercept(shape: &ModelShape, theta: &[f64], drift: Drift) -> Option<Intercept> {
    let n = shape.n;
    let nn = n * n;
    match drift {
        Drift::Free => {
            let mut omega = vec![0.0; nn];
            let mut idx = 0;
            for j in 0..n {
                for i in j..n {
                    omega[j * n + i] = theta[idx];
                    omega[i * n + j] = theta[idx];
                    idx += 1;
                }
            }
            Some(Intercept { omega, penalty: 0.0, penalty_grad: vec![0.0; nn] })
        }
        Drift::Target(s) => {
            let cl = shape.coef_len();
            let mut tmp = vec![0.0; nn];
            let mut implied = vec![0.0; nn];
            for c in theta[..shape.coef_total()].chunks(cl) {
                sandwich(shape.structure, n, c, s, &mut tmp, &mut implied);
            }
            let omega: Vec<f64> = s.iter().zip(&implied).map(|(a, b)| a - b).collect();
            let m = Mat::from_column_slice(n, n, &omega);
            let m = (&m + m.transpose()) * 0.5;
            let eig = SymmetricEigen::new(m);
            let trace: f64 = (0..n).map(|i| s[i * n + i]).sum();
            let margin = BARRIER_MARGIN * trace / n as f64;
            let mut penalty = 0.0;
            let mut grad = Mat::zeros(n, n);
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                if !(lam > 0.0) {
                    return None;
                }
                if lam < margin {
                    let r = (lam / margin).ln();
                    penalty += BARRIER_WEIGHT * r * r;
                    let v = eig.eigenvectors.column(k);
                    grad += v * v.transpose() * (2.0 * BARRIER_WEIGHT * r / lam);
                }
            }
            Some(Intercept { omega, penalty, penalty_grad: grad.as_slice().to_vec() })
        }
    }
}

/// Mean loss `(1/T) Σ l_t` (plus barrier) and optionally its gradient.
pub(crate) fn evaluate(
    shape: &ModelShape,
    data: &Data,
    theta: &[f64],
    drift: Drift,
    want_grad: bool,
) -> Option<(f64, Vec<f64>)> {
    let n = shape.n;
    let nn = n * n;
    let t_len = data.t;
    let targeted = matches!(drift, Drift::Target(_));
    let ic = intercept(shape, theta, drift)?;
    let off = if targeted { 0 } else { shape.omega_len() };
    let cl = shape.coef_len();
    let coefs = &theta[off..off + shape.coef_total()];
    let nu = &theta[off + shape.coef_total()..];
    let law = Law::new(shape.family, n, nu);
    let arch_pat = shape.arch_patterns();
    let garch_lags = shape.garch_lags();
    let na = arch_pat.len();
    let arch = |a: usize| &coefs[a * cl..(a + 1) * cl];
    let garch = |g: usize| &coefs[(na + g) * cl..(na + g + 1) * cl];

    let mut sigma = vec![0.0; t_len * nn];
    let mut gbuf = if want_grad { vec![0.0; t_len * nn] } else { vec![0.0; nn] };
    let mut scratch = Scratch::new(nn);
    let mut tmp = vec![0.0; nn];
    let mut total = 0.0;
    let (mut dn1, mut dn2) = (0.0, 0.0);
    for t0 in 0..t_len {
        let (done, rest) = sigma.split_at_mut(t0 * nn);
        let cur = &mut rest[..nn];
        cur.copy_from_slice(&ic.omega);
        for (a, &p) in arch_pat.iter().enumerate() {
            sandwich(shape.structure, n, arch(a), &data.inputs[p][t0 * nn..(t0 + 1) * nn], &mut tmp, cur);
        }
        for (g, &lag) in garch_lags.iter().enumerate() {
            let prev = lagged(done, &data.sig_init, nn, t0, lag);
            sandwich(shape.structure, n, garch(g), prev, &mut tmp, cur);
        }
        let g = if want_grad { &mut gbuf[t0 * nn..(t0 + 1) * nn] } else { &mut gbuf[..] };
        let (l, d1, d2) = law.period(cur, data.y(t0), data.ld_y[t0], &mut scratch, g)?;
        total += l;
        dn1 += d1;
        dn2 += d2;
    }
    let tf = t_len as f64;
    let value = total / tf + ic.penalty;
    if !value.is_finite() {
        return None;
    }
    if !want_grad {
        return Some((value, Vec::new()));
    }

    // reverse sweep: Λ_t = G_t/T + Σ_g B_g' Λ_{t+lag} B_g
    let mut lam = gbuf;
    lam.iter_mut().for_each(|v| *v /= tf);
    let mut grad = vec![0.0; theta.len()];
    let mut lbar = vec![0.0; nn];
    let garch_t: Vec<Vec<f64>> = (0..garch_lags.len())
        .map(|g| match shape.structure {
            Structure::Full => Mat::from_column_slice(n, n, garch(g)).transpose().as_slice().to_vec(),
            Structure::Diagonal => garch(g).to_vec(),
        })
        .collect();
    let mut t1 = vec![0.0; nn];
    let mut t2 = vec![0.0; nn];
    for t0 in (0..t_len).rev() {
        let (before, rest) = lam.split_at_mut(t0 * nn);
        let lt = &rest[..nn];
        for (l, v) in lbar.iter_mut().zip(lt) {
            *l += v;
        }
        for (a, &p) in arch_pat.iter().enumerate() {
            let x = &data.inputs[p][t0 * nn..(t0 + 1) * nn];
            let o = off + a * cl;
            coef_grad(shape.structure, n, lt, arch(a), x, 1.0, &mut t1, &mut t2, &mut grad[o..o + cl]);
        }
        for (g, &lag) in garch_lags.iter().enumerate() {
            let x = lagged(&sigma, &data.sig_init, nn, t0, lag);
            let o = off + (na + g) * cl;
            coef_grad(shape.structure, n, lt, garch(g), x, 1.0, &mut t1, &mut t2, &mut grad[o..o + cl]);
            if t0 >= lag {
                let dst = &mut before[(t0 - lag) * nn..(t0 - lag + 1) * nn];
                sandwich(shape.structure, n, &garch_t[g], lt, &mut t1, dst);
            }
        }
    }
    for (l, p) in lbar.iter_mut().zip(&ic.penalty_grad) {
        *l += p;
    }
    match drift {
        Drift::Free => {
            let mut idx = 0;
            for j in 0..n {
                for i in j..n {
                    grad[idx] = if i == j { lbar[j * n + i] } else { lbar[j * n + i] + lbar[i * n + j] };
                    idx += 1;
                }
            }
        }
        Drift::Target(s) => {
            // Ω depends on every coefficient through -C S C'
            for (k, c) in coefs.chunks(cl).enumerate() {
                coef_grad(shape.structure, n, &lbar, c, s, -1.0, &mut t1, &mut t2, &mut grad[k * cl..(k + 1) * cl]);
            }
        }
    }
    let nu_off = off + shape.coef_total();
    grad[nu_off] = dn1 / tf;
    if shape.family == Family::MatrixF {
        grad[nu_off + 1] = dn2 / tf;
    }
    Some((value, grad))
}

/// Per-period scores `∂l_t/∂θ` (rows are periods), barrier excluded.
pub(crate) fn scores(shape: &ModelShape, data: &Data, theta: &[f64], drift: Drift) -> Option<Vec<Vec<f64>>> {
    let n = shape.n;
    let nn = n * n;
    let t_len = data.t;
    let targeted = matches!(drift, Drift::Target(_));
    let ic = intercept(shape, theta, drift)?;
    let off = if targeted { 0 } else { shape.omega_len() };
    let cl = shape.coef_len();
    let coefs = &theta[off..off + shape.coef_total()];
    let nu = &theta[off + shape.coef_total()..];
    let law = Law::new(shape.family, n, nu);
    let arch_pat = shape.arch_patterns();
    let garch_lags = shape.garch_lags();
    let na = arch_pat.len();
    let ng = garch_lags.len();
    let coef = |k: usize| &coefs[k * cl..(k + 1) * cl];

    let mut sigma = vec![0.0; t_len * nn];
    let mut gbuf = vec![0.0; t_len * nn];
    let mut scratch = Scratch::new(nn);
    let mut tmp = vec![0.0; nn];
    let mut out = vec![vec![0.0; theta.len()]; t_len];
    let nu_off = off + shape.coef_total();
    for t0 in 0..t_len {
        let (done, rest) = sigma.split_at_mut(t0 * nn);
        let cur = &mut rest[..nn];
        cur.copy_from_slice(&ic.omega);
        for (a, &p) in arch_pat.iter().enumerate() {
            sandwich(shape.structure, n, coef(a), &data.inputs[p][t0 * nn..(t0 + 1) * nn], &mut tmp, cur);
        }
        for (g, &lag) in garch_lags.iter().enumerate() {
            sandwich(shape.structure, n, coef(na + g), lagged(done, &data.sig_init, nn, t0, lag), &mut tmp, cur);
        }
        let (_, d1, d2) =
            law.period(cur, data.y(t0), data.ld_y[t0], &mut scratch, &mut gbuf[t0 * nn..(t0 + 1) * nn])?;
        out[t0][nu_off] = d1;
        if shape.family == Family::MatrixF {
            out[t0][nu_off + 1] = d2;
        }
    }

    // (X_t - S) C' for every term and period; rows feed the direct derivative
    let target = match drift {
        Drift::Target(s) => Some(s),
        Drift::Free => None,
    };
    let mut xc: Vec<Vec<f64>> = Vec::with_capacity(na + ng);
    for k in 0..na + ng {
        let mut buf = vec![0.0; t_len * nn];
        let ct = shape.coef_from_slice(coef(k)).to_mat().transpose();
        for t0 in 0..t_len {
            let x = if k < na {
                &data.inputs[arch_pat[k]][t0 * nn..(t0 + 1) * nn]
            } else {
                lagged(&sigma, &data.sig_init, nn, t0, garch_lags[k - na])
            };
            let mut xs = x.to_vec();
            if let Some(s) = target {
                xs.iter_mut().zip(s).for_each(|(a, b)| *a -= b);
            }
            mul(n, &xs, ct.as_slice(), &mut buf[t0 * nn..(t0 + 1) * nn]);
        }
        xc.push(buf);
    }

    let mut d = vec![0.0; t_len * nn];
    let mut direct = vec![0.0; nn];
    let n_omega = off;
    for p in 0..nu_off {
        d.iter_mut().for_each(|v| *v = 0.0);
        for t0 in 0..t_len {
            direct.iter_mut().for_each(|v| *v = 0.0);
            if p < n_omega {
                let (i, j) = vech_pos(n, p);
                direct[j * n + i] += 1.0;
                if i != j {
                    direct[i * n + j] += 1.0;
                }
            } else {
                let q = p - n_omega;
                let (k, e) = (q / cl, q % cl);
                let (r, c) = match shape.structure {
                    Structure::Full => (e % n, e / n),
                    Structure::Diagonal => (e, e),
                };
                // R = E_rc (X C'): row r of R is row c of X C'
                let src = &xc[k][t0 * nn..(t0 + 1) * nn];
                for v in 0..n {
                    let val = src[v * n + c];
                    direct[v * n + r] += val;
                    direct[r * n + v] += val;
                }
            }
            let (before, rest) = d.split_at_mut(t0 * nn);
            let cur = &mut rest[..nn];
            cur.copy_from_slice(&direct);
            for (g, &lag) in garch_lags.iter().enumerate() {
                if t0 >= lag {
                    let prev = &before[(t0 - lag) * nn..(t0 - lag + 1) * nn];
                    sandwich(shape.structure, n, coef(na + g), prev, &mut tmp, cur);
                }
            }
            out[t0][p] = dot(&gbuf[t0 * nn..(t0 + 1) * nn], cur);
        }
    }
    Some(out)
}

/// `(row, col)` of the `k`-th `vech` entry.
pub(crate) fn vech_pos(n: usize, k: usize) -> (usize, usize) {
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            if idx == k {
                return (i, j);
            }
            idx += 1;
        }
    }
    unreachable!("vech index out of range")
}

/// Conditional means `Σ_t` as flat blocks.
pub(crate) fn sigma_flat(shape: &ModelShape, data: &Data, theta: &[f64], drift: Drift) -> Option<Vec<f64>> {
    let n = shape.n;
    let nn = n * n;
    let ic = intercept(shape, theta, drift)?;
    let off = if matches!(drift, Drift::Target(_)) { 0 } else { shape.omega_len() };
    let cl = shape.coef_len();
    let coefs = &theta[off..off + shape.coef_total()];
    let arch_pat = shape.arch_patterns();
    let na = arch_pat.len();
    let mut sigma = vec![0.0; data.t * nn];
    let mut tmp = vec![0.0; nn];
    for t0 in 0..data.t {
        let (done, rest) = sigma.split_at_mut(t0 * nn);
        let cur = &mut rest[..nn];
        cur.copy_from_slice(&ic.omega);
        for (a, &p) in arch_pat.iter().enumerate() {
            sandwich(
                shape.structure,
                n,
                &coefs[a * cl..(a + 1) * cl],
                &data.inputs[p][t0 * nn..(t0 + 1) * nn],
                &mut tmp,
                cur,
            );
        }
        for (g, &lag) in shape.garch_lags().iter().enumerate() {
            let c = &coefs[(na + g) * cl..(na + g + 1) * cl];
            sandwich(shape.structure, n, c, lagged(done, &data.sig_init, nn, t0, lag), &mut tmp, cur);
        }
    }
    Some(sigma)
}
