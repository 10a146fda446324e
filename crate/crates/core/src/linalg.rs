//! Sparse symmetric storage and a Jacobi-preconditioned conjugate gradient.

use crate::error::{Error, Result};

/// Symmetric matrix stored as a diagonal plus a list of strictly
/// off-diagonal entries `(i, j, a_ij)` with `i != j`, each pair listed once.
#[derive(Clone, Debug, Default)]
pub(crate) struct SparseSym {
    pub diag: Vec<f64>,
    pub off: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(&self.diag).zip(x) {
            *yi = d * xi;
        }
        for &(i, j, a) in &self.off {
            y[i] += a * x[j];
            y[j] += a * x[i];
        }
    }

    /// Principal submatrix on the indices where `keep` is true, together
    /// with the map from reduced to full indices.
    pub fn restrict(&self, keep: &[bool]) -> (SparseSym, Vec<usize>) {
        let mut to_reduced = vec![usize::MAX; self.len()];
        let mut to_full = Vec::new();
        for (i, &k) in keep.iter().enumerate() {
            if k {
                to_reduced[i] = to_full.len();
                to_full.push(i);
            }
        }
        let diag = to_full.iter().map(|&i| self.diag[i]).collect();
        let off = self
            .off
            .iter()
            .filter(|(i, j, _)| keep[*i] && keep[*j])
            .map(|&(i, j, a)| (to_reduced[i], to_reduced[j], a))
            .collect();
        (SparseSym { diag, off }, to_full)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct CgSettings {
    pub rel_tol: f64,
    pub max_iter: usize,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled_norm(r: &[f64], scale: Option<&[f64]>) -> f64 {
    match scale {
        Some(s) => r.iter().zip(s).map(|(x, w)| (x * w).powi(2)).sum::<f64>().sqrt(),
        None => dot(r, r).sqrt(),
    }
}

fn remove_arithmetic_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Preconditioned conjugate gradient for `M x = b` with `M` symmetric;
/// returns the iteration count.
///
/// The residual is measured as `|scale . r| <= rel_tol |scale . b|`. When
/// `singular` is set, `M` is assumed to have the constants as its kernel and
/// `b` to already be orthogonal to them; preconditioned residuals are then
/// projected back onto the range so the iteration stays consistent.
pub(crate) fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    settings: CgSettings,
    scale: Option<&[f64]>,
    singular: bool,
) -> Result<usize> {
    let n = b.len();
    let b_norm = scaled_norm(b, scale);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = settings.rel_tol * b_norm;

    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if singular {
        remove_arithmetic_mean(&mut r);
    }
    let precondition = |r: &[f64], z: &mut [f64]| {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(diag) {
            *zi = if *d > 0.0 { ri / d } else { *ri };
        }
        if singular {
            remove_arithmetic_mean(z);
        }
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let mut res = scaled_norm(&r, scale);
    let mut it = 0;
    while res > target {
        if it >= settings.max_iter {
            return Err(Error::NonConvergence {
                what: "conjugate gradient",
                iterations: it,
                residual: res / b_norm,
            });
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::NonConvergence {
                what: "conjugate gradient (operator not positive definite)",
                iterations: it,
                residual: res / b_norm,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if singular {
            remove_arithmetic_mean(&mut r);
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = scaled_norm(&r, scale);
        it += 1;
    }
    Ok(it)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseSym {
        let mut m = SparseSym::zeros(n);
        for i in 0..n {
            m.diag[i] = 2.0;
            if i + 1 < n {
                m.off.push((i, i + 1, -1.0));
            }
        }
        m
    }

    #[test]
    fn cg_solves_tridiagonal() {
        let m = tridiag(20);
        let b: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; 20];
        let settings = CgSettings {
            rel_tol: 1e-13,
            max_iter: 200,
        };
        pcg(|a, y| m.matvec(a, y), &m.diag, &b, &mut x, settings, None, false).unwrap();
        let mut y = vec![0.0; 20];
        m.matvec(&x, &mut y);
        for (a, b) in y.iter().zip(&b) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn restrict_keeps_principal_block() {
        let m = tridiag(4);
        let (r, map) = m.restrict(&[true, false, true, true]);
        assert_eq!(map, vec![0, 2, 3]);
        assert_eq!(r.off, vec![(1, 2, -1.0)]);
    }

    #[test]
    fn cap_reports_nonconvergence() {
        let m = tridiag(50);
        let b = vec![1.0; 50];
        let mut x = vec![0.0; 50];
        let settings = CgSettings {
            rel_tol: 1e-14,
            max_iter: 2,
        };
        let err = pcg(|a, y| m.matvec(a, y), &m.diag, &b, &mut x, settings, None, false)
            .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }
}
