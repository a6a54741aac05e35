//! Small dense kernels: symmetric eigenvalues (Householder reduction to
//! tridiagonal form followed by implicit QL with Wilkinson shifts) and
//! determinants by partial-pivoted elimination.

#![allow(clippy::needless_range_loop)]

/// Iteration cap per eigenvalue in the QL sweep.
pub const QL_MAX_ITER: usize = 64;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i,j)` and `(j,i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Failure of the QL iteration: index of the eigenvalue that did not
/// deflate within [`QL_MAX_ITER`] sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoConvergence {
    pub index: usize,
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// Returns `(diag, offdiag)` with `offdiag[i]` coupling rows `i` and `i+1`.
pub fn tridiagonalize(mut a: SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.dim();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a.get(i, k).abs()).sum();
            if scale == 0.0 {
                e[i] = a.get(i, l);
            } else {
                for k in 0..=l {
                    *a.at(i, k) /= scale;
                    h += a.get(i, k) * a.get(i, k);
                }
                let f = a.get(i, l);
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                *a.at(i, l) = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a.get(j, k) * a.get(i, k);
                    }
                    for k in (j + 1)..=l {
                        g += a.get(k, j) * a.get(i, k);
                    }
                    e[j] = g / h;
                    f += e[j] * a.get(i, j);
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a.get(i, j);
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let v = a.get(j, k) - (f * e[k] + g * a.get(i, k));
                        *a.at(j, k) = v;
                    }
                }
            }
        } else {
            e[i] = a.get(i, l);
        }
        d[i] = h;
    }
    for (i, di) in d.iter_mut().enumerate() {
        *di = a.get(i, i);
    }
    // e[i] currently couples i-1 and i; shift to the (i, i+1) convention.
    let off: Vec<f64> = e.into_iter().skip(1).collect();
    (d, off)
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `off` (length `n - 1`), ascending.
pub fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: &[f64]) -> Result<Vec<f64>, NoConvergence> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    assert_eq!(off.len(), n.saturating_sub(1), "off-diagonal length");
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == QL_MAX_ITER {
                return Err(NoConvergence { index: l });
            }
            iter += 1;

            // Wilkinson shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut deflated_early = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues of a dense symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: SymMatrix) -> Result<Vec<f64>, NoConvergence> {
    let (d, off) = tridiagonalize(a);
    tridiagonal_eigenvalues(d, &off)
}

/// Determinant of a square row-major matrix by partial-pivoted elimination.
pub fn determinant(n: usize, mut a: Vec<f64>) -> f64 {
    assert_eq!(a.len(), n * n);
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        let pv = a[pivot * n + col];
        if pv == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        det *= pv;
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pv;
            if factor != 0.0 {
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&[f64]]) -> SymMatrix {
        let n = rows.len();
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set_sym(i, j, rows[i][j]);
            }
        }
        m
    }

    #[test]
    fn two_by_two() {
        let ev = symmetric_eigenvalues(from_rows(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        // tridiag(-1, 2, -1): eigenvalues 2 - 2 cos(k pi / (n+1)).
        let n = 40;
        let ev = tridiagonal_eigenvalues(vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        let mut exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        exact.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn dense_matches_trace_and_frobenius() {
        let n = 12;
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 0.3 } else { 0.0 };
                m.set_sym(i, j, v);
            }
        }
        let trace: f64 = (0..n).map(|i| m.get(i, i)).sum();
        let frob: f64 = (0..n * n).map(|k| m.data[k] * m.data[k]).sum();
        let ev = symmetric_eigenvalues(m).unwrap();
        assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-10);
        assert!((ev.iter().map(|x| x * x).sum::<f64>() - frob).abs() < 1e-9);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn repeated_eigenvalues() {
        let ev = symmetric_eigenvalues(from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]])).unwrap();
        assert!(ev.iter().all(|x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn determinant_cases() {
        assert!((determinant(2, vec![1.0, 2.0, 3.0, 4.0]) + 2.0).abs() < 1e-14);
        assert_eq!(determinant(2, vec![1.0, 1.0, 1.0, 1.0]), 0.0);
        // needs a row swap
        assert!((determinant(3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 5.0]) + 5.0).abs() < 1e-14);
    }
}
