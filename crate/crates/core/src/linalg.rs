//! Matrix-free preconditioned conjugate gradients.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` for symmetric positive definite `A` given as `apply`.
///
/// Entries with `precond_inv[k] == 0` are frozen: `x[k]` keeps its initial
/// value, and `apply` must not couple them into active rows.
pub(crate) fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    precond_inv: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut()
            .zip(precond_inv)
            .filter(|(_, &m)| m != 0.0)
            .for_each(|(v, _)| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = (0..n)
        .map(|k| {
            if precond_inv[k] != 0.0 {
                b[k] - ax[k]
            } else {
                0.0
            }
        })
        .collect();
    let mut zv: Vec<f64> = r.iter().zip(precond_inv).map(|(r, m)| r * m).collect();
    let mut p = zv.clone();
    let mut rz = dot(&r, &zv);
    let mut ap = vec![0.0; n];

    let mut res = norm2(&r) / b_norm;
    if res <= tol {
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: res,
        });
    }
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite(pap));
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = norm2(&r) / b_norm;
        if res <= tol {
            return Ok(CgOutcome {
                iterations: it,
                relative_residual: res,
            });
        }
        for k in 0..n {
            zv[k] = r[k] * precond_inv[k];
        }
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = zv[k] + beta * p[k];
        }
    }
    Err(Error::CgNotConverged {
        iterations: max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_tridiagonal_system() {
        let n = 20;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 4.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        };
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        apply(&exact, &mut b);
        let mut x = vec![0.0; n];
        let out = pcg(apply, &vec![0.25; n], &b, &mut x, 1e-13, 100).unwrap();
        assert!(out.iterations <= n);
        for (a, e) in x.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-11);
        }
    }

    #[test]
    fn detects_indefinite_operator() {
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = x[0];
            y[1] = -x[1];
        };
        let mut x = vec![0.0; 2];
        let err = pcg(apply, &[1.0, 1.0], &[0.0, 1.0], &mut x, 1e-12, 10).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite(_)));
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let mut x = vec![1.0, 2.0];
        pcg(
            |x, y| y.copy_from_slice(x),
            &[1.0, 1.0],
            &[0.0, 0.0],
            &mut x,
            1e-12,
            5,
        )
        .unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }
}
