//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by the implicit QL algorithm with Wilkinson-style shifts.

use serde::{Deserialize, Serialize};

use super::{SquareMatrix, SYMMETRY_TOL};
use crate::error::{Error, Result};

/// QL iterations allowed per eigenvalue.
const MAX_ITER_PER_VALUE: usize = 60;

/// Ascending eigenvalues with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`, with its
    /// largest-magnitude entry positive.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    /// Number of eigenvalues within `1e-9 * max(1, |lambda_max|)` of zero.
    pub fn zero_multiplicity(&self) -> usize {
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        self.values.iter().filter(|v| v.abs() <= 1e-9 * scale).count()
    }

    /// `|A v_k - lambda_k v_k|_2`.
    pub fn residual(&self, a: &SquareMatrix, k: usize) -> f64 {
        let v = &self.vectors[k];
        a.mul_vec(v)
            .iter()
            .zip(v)
            .map(|(av, x)| (av - self.values[k] * x).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Full eigendecomposition of a symmetric matrix.
pub fn symmetric_eig(a: &SquareMatrix) -> Result<EigenDecomposition> {
    let n = a.n();
    for i in 0..n {
        for j in i + 1..n {
            if (a.get(i, j) - a.get(j, i)).abs() > SYMMETRY_TOL {
                return Err(Error::Matrix(format!("not symmetric at ({i},{j})")));
            }
        }
    }
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: vec![],
        });
    }
    // symmetrize exactly from the lower triangle
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            v[i * n + j] = a.get(i, j);
            v[j * n + i] = a.get(i, j);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);

    // rows of z are the accumulated transformation columns, so rotations in
    // the QL sweep touch contiguous memory
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            z[i * n + k] = v[k * n + i];
        }
    }
    tridiagonal_ql(n, &mut d, &mut e, &mut z)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]).then(x.cmp(&y)));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut col = z[i * n..(i + 1) * n].to_vec();
            fix_sign(&mut col);
            col
        })
        .collect();
    Ok(EigenDecomposition { values, vectors })
}

pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Householder reduction of the symmetric row-major `v` to tridiagonal form.
/// On return `d` holds the diagonal, `e[1..]` the subdiagonal and `v` the
/// orthogonal transformation (columns).
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let mut g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`, applying rotations to the rows
/// of `z`. Eigenvalues are left unsorted in `d`.
fn tridiagonal_ql(n: usize, d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_ITER_PER_VALUE {
                    return Err(Error::EigenNoConvergence {
                        iterations: iter - 1,
                        residual: e[l].abs(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_by_two() {
        let a = SquareMatrix::new(2, vec![1., -1., -1., 1.]).unwrap();
        let eig = symmetric_eig(&a).unwrap();
        assert_relative_eq!(eig.values[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(eig.values[1], 2.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(eig.vectors[0][0], h, epsilon = 1e-14);
        assert_relative_eq!(eig.vectors[0][1], h, epsilon = 1e-14);
        assert_relative_eq!(eig.vectors[1][0].abs(), h, epsilon = 1e-14);
        assert_relative_eq!(eig.vectors[1][0], -eig.vectors[1][1], epsilon = 1e-14);
    }

    #[test]
    fn diagonal() {
        let a = SquareMatrix::new(3, vec![3., 0., 0., 0., 1., 0., 0., 0., 2.]).unwrap();
        let eig = symmetric_eig(&a).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(eig.vectors[0], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn one_by_one_and_asymmetric() {
        let eig = symmetric_eig(&SquareMatrix::new(1, vec![4.0]).unwrap()).unwrap();
        assert_eq!(eig.values, vec![4.0]);
        assert_eq!(eig.vectors, vec![vec![1.0]]);
        assert!(symmetric_eig(&SquareMatrix::new(2, vec![0., 1., 2., 0.]).unwrap()).is_err());
    }
}
