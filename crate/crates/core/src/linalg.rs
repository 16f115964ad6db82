//! Small dense complex linear algebra: pivoted Householder QR, pivoted
//! Cholesky (double and double-double), LU solves and compensated sums.
//!
//! Everything here runs in a fixed operation order so results do not depend
//! on the size of the rayon pool.

use std::sync::atomic::{AtomicU8, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dd::{ComplexDd, DoubleDouble};
use crate::error::{Error, Result};

/// Relative tolerance used to treat two pivot candidates as tied; the lower
/// index wins a tie.
pub const PIVOT_TIE_RTOL: f64 = 1e-10;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Double,
    DoubleDouble,
}

impl Precision {
    pub fn max(self, other: Precision) -> Precision {
        if self == Precision::DoubleDouble || other == Precision::DoubleDouble {
            Precision::DoubleDouble
        } else {
            Precision::Double
        }
    }
}

/// How to pick the arithmetic for factorizations.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionPolicy {
    #[default]
    Auto,
    Double,
    DoubleDouble,
}

static DEFAULT_POLICY: AtomicU8 = AtomicU8::new(0);

impl PrecisionPolicy {
    /// Process-wide policy used by [`orthonormalize`](crate::polyspace::orthonormalize)
    /// and the Gram-determinant routines.
    pub fn global() -> Self {
        match DEFAULT_POLICY.load(Ordering::Relaxed) {
            1 => PrecisionPolicy::Double,
            2 => PrecisionPolicy::DoubleDouble,
            _ => PrecisionPolicy::Auto,
        }
    }

    pub fn set_global(self) {
        let code = match self {
            PrecisionPolicy::Auto => 0,
            PrecisionPolicy::Double => 1,
            PrecisionPolicy::DoubleDouble => 2,
        };
        DEFAULT_POLICY.store(code, Ordering::Relaxed);
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(PrecisionPolicy::Auto),
            "double" => Ok(PrecisionPolicy::Double),
            "dd" => Ok(PrecisionPolicy::DoubleDouble),
            _ => Err(Error::param(format!("unknown precision '{s}' (auto, double, dd)"))),
        }
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(rows * cols, data.len());
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn transpose(&self) -> CMatrix {
        let mut t = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `x^T * self` for a row vector `x`, i.e. `sum_i x_i * row_i`.
    pub fn left_mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Neumaier compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Index of the largest score; scores within `PIVOT_TIE_RTOL` of the max are
/// tied and the lowest index wins. `None` if all scores are non-finite or
/// the slice is empty.
pub fn tie_aware_argmax(scores: &[f64]) -> Option<usize> {
    let max = scores
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let thresh = max - PIVOT_TIE_RTOL * max.abs();
    scores.iter().position(|&s| s >= thresh)
}

/// Same as [`tie_aware_argmax`] for scores that are logarithms: ties are
/// within an absolute `PIVOT_TIE_RTOL`.
pub fn tie_aware_argmax_log(scores: &[f64]) -> Option<usize> {
    let max = scores
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    scores.iter().position(|&s| s >= max - PIVOT_TIE_RTOL)
}

/// Result of a column-pivoted factorization `A P = Q R` (or `P^T G P = R^* R`).
#[derive(Clone, Debug)]
pub struct PivotedTriangular {
    /// Upper triangular, positive real diagonal.
    pub r: CMatrix,
    /// `perm[j]` is the original column placed at position `j`.
    pub perm: Vec<usize>,
    pub precision: Precision,
}

impl PivotedTriangular {
    pub fn log_abs_det_r(&self) -> f64 {
        (0..self.r.rows()).map(|i| self.r[(i, i)].re.ln()).sum()
    }

    /// `|R_00| / |R_nn|`, a cheap condition estimate of the factored matrix.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.r.rows();
        if n == 0 {
            return 1.0;
        }
        let first = self.r[(0, 0)].re;
        let last = self.r[(n - 1, n - 1)].re;
        if last > 0.0 {
            first / last
        } else {
            f64::INFINITY
        }
    }

    /// Coefficient matrix `C = P R^{-1}`: columns of `A C` are orthonormal.
    pub fn coefficient_matrix(&self) -> CMatrix {
        let rinv = upper_triangular_inverse(&self.r);
        let n = rinv.rows();
        let mut c = CMatrix::zeros(n, n);
        for (i, &pi) in self.perm.iter().enumerate() {
            c.row_mut(pi).copy_from_slice(rinv.row(i));
        }
        c
    }
}

/// Column-pivoted Householder QR of an `m x n` matrix given as rows, with
/// the rows presorted by norm.
///
/// Returns `Err(DegenerateSupport)` naming the first unresolvable column when
/// the remaining column norm falls below `rank_rtol * |R_00|`.
pub fn pivoted_qr(a: &CMatrix, rank_rtol: f64) -> Result<PivotedTriangular> {
    let m = a.rows();
    let n = a.cols();
    if m < n {
        return Err(Error::DegenerateSupport { column: m });
    }
    // Rows sorted by decreasing norm: R is unchanged, and with column
    // pivoting this keeps the factorization row-wise stable for the
    // strongly graded matrices that exponential weights produce.
    let row_norms: Vec<f64> = (0..m).map(|i| a.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| row_norms[y].total_cmp(&row_norms[x]).then(x.cmp(&y)));
    // column-major working copy
    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|j| order.iter().map(|&i| a[(i, j)]).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r = CMatrix::zeros(n, n);
    let mut r00 = 0.0f64;

    for j in 0..n {
        let norms: Vec<f64> = cols[j..]
            .iter()
            .map(|c| c[j..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let best = tie_aware_argmax(&norms).unwrap_or(0);
        let norm = norms[best];
        if best != 0 {
            cols.swap(j, j + best);
            perm.swap(j, j + best);
            for i in 0..j {
                let t = r[(i, j)];
                r[(i, j)] = r[(i, j + best)];
                r[(i, j + best)] = t;
            }
        }
        if j == 0 {
            r00 = norm;
        }
        if !(norm > rank_rtol * r00) || norm == 0.0 {
            return Err(Error::DegenerateSupport { column: perm[j] });
        }
        let x0 = cols[j][j];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        // v = x - alpha e1, stored over rows j..m
        let mut v: Vec<Complex64> = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 > 0.0 {
            let tail = &mut cols[j + 1..];
            tail.par_iter_mut().for_each(|c| {
                let mut dot = Complex64::new(0.0, 0.0);
                for (vi, ci) in v.iter().zip(&c[j..]) {
                    dot += vi.conj() * ci;
                }
                let f = dot * (2.0 / vnorm2);
                for (vi, ci) in v.iter().zip(c[j..].iter_mut()) {
                    *ci -= f * vi;
                }
            });
        }
        // R row j: alpha at the diagonal, then the updated row entries.
        // Rotate the row so the diagonal is positive real.
        let rot = alpha.conj() / alpha.norm();
        r[(j, j)] = Complex64::new(alpha.norm(), 0.0);
        for (jj, c) in cols.iter().enumerate().skip(j + 1) {
            r[(j, jj)] = c[j] * rot;
        }
    }
    Ok(PivotedTriangular {
        r,
        perm,
        precision: Precision::Double,
    })
}

/// Hermitian Gram `A^* A` accumulated in double-double.
pub fn gram_dd(a: &CMatrix) -> Vec<ComplexDd> {
    let m = a.rows();
    let n = a.cols();
    let entries: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals: Vec<ComplexDd> = entries
        .par_iter()
        .map(|&(i, j)| {
            let mut acc = ComplexDd::ZERO;
            for row in 0..m {
                acc = acc + ComplexDd::conj_mul_c64(a[(row, i)], a[(row, j)]);
            }
            acc
        })
        .collect();
    let mut g = vec![ComplexDd::ZERO; n * n];
    for (&(i, j), v) in entries.iter().zip(vals) {
        g[i * n + j] = v;
        g[j * n + i] = v.conj();
    }
    g
}

/// Diagonally pivoted Cholesky `P^T G P = R^* R` in double-double.
///
/// A pivot below `rank_rtol` times the largest initial diagonal entry is
/// reported as a degenerate column.
pub fn pivoted_cholesky_dd(g: &[ComplexDd], n: usize, rank_rtol: f64) -> Result<PivotedTriangular> {
    let mut a = g.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let dmax = (0..n).map(|i| a[i * n + i].re.to_f64()).fold(0.0, f64::max);
    let mut r = vec![ComplexDd::ZERO; n * n];
    for j in 0..n {
        let diag: Vec<f64> = (j..n).map(|i| a[i * n + i].re.to_f64()).collect();
        let best = tie_aware_argmax(&diag).unwrap_or(0) + j;
        let piv = a[best * n + best].re;
        if !(piv.to_f64() > rank_rtol * dmax) {
            return Err(Error::DegenerateSupport { column: perm[best] });
        }
        if best != j {
            perm.swap(j, best);
            // symmetric swap of rows/cols j and best
            for k in 0..n {
                a.swap(j * n + k, best * n + k);
            }
            for k in 0..n {
                a.swap(k * n + j, k * n + best);
            }
            for k in 0..j {
                r.swap(k * n + j, k * n + best);
            }
        }
        let d = a[j * n + j].re.sqrt();
        r[j * n + j] = ComplexDd {
            re: d,
            im: DoubleDouble::ZERO,
        };
        let inv_d = DoubleDouble::from_f64(1.0) / d;
        for k in j + 1..n {
            r[j * n + k] = a[j * n + k].scale(inv_d);
        }
        for p in j + 1..n {
            let rp = r[j * n + p].conj();
            for q in j + 1..n {
                let upd = rp * r[j * n + q];
                a[p * n + q] = a[p * n + q] - upd;
            }
        }
    }
    let rr = CMatrix::from_rows(n, n, r.iter().map(|z| z.to_c64()).collect());
    Ok(PivotedTriangular {
        r: rr,
        perm,
        precision: Precision::DoubleDouble,
    })
}

/// Diagonally pivoted Cholesky in double precision. Fails with
/// `Conditioning` when a pivot drops below `eps * trace`.
pub fn pivoted_cholesky(h: &CMatrix) -> Result<PivotedTriangular> {
    let n = h.rows();
    let mut a = h.clone();
    let trace: f64 = (0..n).map(|i| h[(i, i)].re).sum();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r = CMatrix::zeros(n, n);
    for j in 0..n {
        let diag: Vec<f64> = (j..n).map(|i| a[(i, i)].re).collect();
        let best = tie_aware_argmax(&diag).unwrap_or(0) + j;
        let piv = a[(best, best)].re;
        if !(piv > f64::EPSILON * trace) {
            return Err(Error::Conditioning(format!(
                "Cholesky pivot {piv:.3e} below eps*trace at step {j}"
            )));
        }
        if best != j {
            perm.swap(j, best);
            for k in 0..n {
                let t = a[(j, k)];
                a[(j, k)] = a[(best, k)];
                a[(best, k)] = t;
            }
            for k in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(k, best)];
                a[(k, best)] = t;
            }
            for k in 0..j {
                let t = r[(k, j)];
                r[(k, j)] = r[(k, best)];
                r[(k, best)] = t;
            }
        }
        let d = piv.sqrt();
        r[(j, j)] = Complex64::new(d, 0.0);
        for k in j + 1..n {
            r[(j, k)] = a[(j, k)] / d;
        }
        for p in j + 1..n {
            let rp = r[(j, p)].conj();
            for q in j + 1..n {
                let upd = rp * r[(j, q)];
                a[(p, q)] -= upd;
            }
        }
    }
    Ok(PivotedTriangular {
        r,
        perm,
        precision: Precision::Double,
    })
}

/// `log det H` for Hermitian positive definite `H`, escalating to
/// double-double when a double-precision pivot underflows `eps * trace`.
pub fn logdet_hermitian(h: &CMatrix, policy: PrecisionPolicy) -> Result<(f64, Precision)> {
    let n = h.rows();
    if policy != PrecisionPolicy::DoubleDouble {
        match pivoted_cholesky(h) {
            Ok(f) => return Ok((2.0 * f.log_abs_det_r(), Precision::Double)),
            Err(e) if policy == PrecisionPolicy::Double => return Err(e),
            Err(_) => {}
        }
    }
    crate::note_precision_escalation();
    let g: Vec<ComplexDd> = h.as_slice().iter().map(|z| ComplexDd::from_c64(*z)).collect();
    let f = pivoted_cholesky_dd(&g, n, 1e-30)?;
    Ok((2.0 * f.log_abs_det_r(), Precision::DoubleDouble))
}

/// Inverse of an upper triangular matrix by back substitution.
pub fn upper_triangular_inverse(r: &CMatrix) -> CMatrix {
    let n = r.rows();
    let mut inv = CMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = Complex64::new(1.0, 0.0) / r[(j, j)];
        for i in (0..j).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in i + 1..=j {
                s += r[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / r[(i, i)];
        }
    }
    inv
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMatrix,
    piv: Vec<usize>,
    sign_flips: usize,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Lu> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut flips = 0;
        for j in 0..n {
            let scores: Vec<f64> = (j..n).map(|i| lu[(i, j)].norm()).collect();
            let p = tie_aware_argmax(&scores).unwrap_or(0) + j;
            if lu[(p, j)].norm() == 0.0 {
                return Err(Error::Evaluation(format!("singular matrix at column {j}")));
            }
            if p != j {
                for k in 0..n {
                    let t = lu[(j, k)];
                    lu[(j, k)] = lu[(p, k)];
                    lu[(p, k)] = t;
                }
                piv.swap(j, p);
                flips += 1;
            }
            let d = lu[(j, j)];
            for i in j + 1..n {
                let f = lu[(i, j)] / d;
                lu[(i, j)] = f;
                for k in j + 1..n {
                    let u = lu[(j, k)];
                    lu[(i, k)] -= f * u;
                }
            }
        }
        Ok(Lu {
            lu,
            piv,
            sign_flips: flips,
        })
    }

    pub fn log_abs_det(&self) -> f64 {
        (0..self.lu.rows()).map(|i| self.lu[(i, i)].norm().ln()).sum()
    }

    pub fn det(&self) -> Complex64 {
        let mut d = Complex64::new(if self.sign_flips % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
        for i in 0..self.lu.rows() {
            d *= self.lu[(i, i)];
        }
        d
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows();
        let mut x: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

/// Least-squares solution of `X beta = y` for a small real design matrix.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let m = design.len();
    let n = design.first().map(|r| r.len()).unwrap_or(0);
    if m < n || n == 0 {
        return Err(Error::param("least squares needs at least as many rows as unknowns"));
    }
    let x = nalgebra::DMatrix::from_fn(m, n, |i, j| design[i][j]);
    let b = nalgebra::DVector::from_column_slice(y);
    let svd = x.svd(true, true);
    let beta = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Evaluation(format!("least squares failed: {e}")))?;
    Ok(beta.iter().copied().collect())
}
