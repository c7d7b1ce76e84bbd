//! Allocation-free kernels on square column-major `n x n` slices, used by
//! the likelihood loops where `DMatrix` temporaries would dominate.

#[allow(unused_imports)]
use crate::num::Real;

/// `out = a * b`
pub(crate) fn mul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for j in 0..n {
        let col = &mut out[j * n..(j + 1) * n];
        col.fill(0.0);
        for k in 0..n {
            let bkj = b[j * n + k];
            if bkj == 0.0 {
                continue;
            }
            let acol = &a[k * n..(k + 1) * n];
            for i in 0..n {
                col[i] += acol[i] * bkj;
            }
        }
    }
}

/// `acc += c * a x a'` for a full coefficient; `tmp` has length `n*n`.
pub(crate) fn add_sandwich_full(n: usize, c: f64, a: &[f64], x: &[f64], tmp: &mut [f64], acc: &mut [f64]) {
    mul(n, a, x, tmp);
    for k in 0..n {
        let tcol = &tmp[k * n..(k + 1) * n];
        for j in 0..n {
            let ajk = c * a[k * n + j];
            if ajk == 0.0 {
                continue;
            }
            let col = &mut acc[j * n..(j + 1) * n];
            for i in 0..n {
                col[i] += tcol[i] * ajk;
            }
        }
    }
}

/// `acc += c * diag(d) x diag(d)`
pub(crate) fn add_sandwich_diag(n: usize, c: f64, d: &[f64], x: &[f64], acc: &mut [f64]) {
    for j in 0..n {
        let dj = c * d[j];
        for i in 0..n {
            acc[j * n + i] += d[i] * dj * x[j * n + i];
        }
    }
}

/// In-place lower Cholesky factor of a symmetric matrix (upper part zeroed).
/// Returns `false` if the matrix is not numerically positive definite.
pub(crate) fn cholesky(n: usize, a: &mut [f64]) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            let l = a[k * n + j];
            d -= l * l;
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[j * n + i];
            for k in 0..j {
                s -= a[k * n + i] * a[k * n + j];
            }
            a[j * n + i] = s / d;
        }
        for i in 0..j {
            a[j * n + i] = 0.0;
        }
    }
    true
}

/// `log |A|` from its Cholesky factor.
pub(crate) fn chol_logdet(n: usize, l: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        s += l[i * n + i].ln();
    }
    2.0 * s
}

/// `A^{-1}` from the Cholesky factor `l` of `A`, written to `out`.
/// `tmp` has length `n*n`.
pub(crate) fn chol_inverse(n: usize, l: &[f64], tmp: &mut [f64], out: &mut [f64]) {
    // tmp = L^{-1} (lower)
    tmp[..n * n].fill(0.0);
    for j in 0..n {
        tmp[j * n + j] = 1.0 / l[j * n + j];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[k * n + i] * tmp[j * n + k];
            }
            tmp[j * n + i] = s / l[i * n + i];
        }
    }
    // out = L^{-T} L^{-1}
    for j in 0..n {
        for i in j..n {
            let mut s = 0.0;
            for k in i..n {
                s += tmp[i * n + k] * tmp[j * n + k];
            }
            out[j * n + i] = s;
            out[i * n + j] = s;
        }
    }
}

/// `sum_ij a_ij b_ij`, i.e. `tr(a' b)`.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::Mat;
    use alloc::vec;

    fn sample(n: usize, seed: u64) -> Mat {
        let mut s = seed;
        Mat::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn products_match_nalgebra() {
        for n in 1..6 {
            let a = sample(n, 1);
            let b = sample(n, 2);
            let mut out = vec![0.0; n * n];
            mul(n, a.as_slice(), b.as_slice(), &mut out);
            approx::assert_relative_eq!(Mat::from_vec(n, n, out.clone()), &a * &b, epsilon = 1e-14);
            let mut acc = vec![0.0; n * n];
            let mut tmp = vec![0.0; n * n];
            add_sandwich_full(n, 2.0, a.as_slice(), b.as_slice(), &mut tmp, &mut acc);
            approx::assert_relative_eq!(Mat::from_vec(n, n, acc), &a * &b * a.transpose() * 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn cholesky_inverse_logdet() {
        for n in 1..7 {
            let a = sample(n, 7);
            let spd = &a * a.transpose() + Mat::identity(n, n);
            let mut l = spd.as_slice().to_vec();
            assert!(cholesky(n, &mut l));
            let lm = Mat::from_vec(n, n, l.clone());
            approx::assert_relative_eq!(&lm * lm.transpose(), spd, epsilon = 1e-12);
            let mut tmp = vec![0.0; n * n];
            let mut inv = vec![0.0; n * n];
            chol_inverse(n, &l, &mut tmp, &mut inv);
            approx::assert_relative_eq!(Mat::from_vec(n, n, inv) * &spd, Mat::identity(n, n), epsilon = 1e-11);
            approx::assert_relative_eq!(chol_logdet(n, &l), spd.determinant().ln(), epsilon = 1e-12);
        }
        let mut bad = vec![1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky(2, &mut bad));
    }
}
