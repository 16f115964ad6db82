//! Graded polynomial spaces and weighted orthonormalization.
//!
//! Degree-k sections of O(k) on ℙⁿ are polynomials of total degree ≤ k in
//! the affine coordinates. A [`PolyBasis`] fixes a triangular basis of that
//! space: every element is `b_α(z) = Π_i p_{α_i}((z_i − c_i)/s_i)` where
//! `p_j` is either `u^j` or the Chebyshev polynomial `T_j(u)`. Triangularity
//! with respect to the monomials means Gram determinants in different bases
//! differ by the known product of leading coefficients, which is what makes
//! log-determinants basis independent.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dd::ComplexDd;
use crate::domain::{CompactGrid, DiscreteMeasure, Point, SetKind, WeightFn};
use crate::error::{Error, Result};
use crate::linalg::{
    gram_dd, pivoted_cholesky_dd, pivoted_qr, CMatrix, PivotedTriangular, Precision, PrecisionPolicy,
};

/// Largest degree accepted for n = 1.
pub const MAX_DEGREE_1D: usize = 128;
/// Largest degree accepted for n = 2.
pub const MAX_DEGREE_2D: usize = 32;

/// Condition estimate above which `Auto` redoes the factorization in
/// double-double.
pub const ESCALATION_CONDITION: f64 = 1e12;

/// Tolerance of the identity-Gram check on the defining quadrature.
pub const GRAM_TOL: f64 = 1e-8;

const RANK_RTOL: f64 = 1e-14;
/// A new Arnoldi direction smaller than this fraction of its source vector
/// means the support cannot separate the polynomials.
const ARNOLDI_RTOL: f64 = 1e-12;
const RESCALE_AT: f64 = 1e100;

/// Basis family.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    Monomial,
    Chebyshev1d,
    /// Powers of `(z − c)/r`, i.e. Fourier modes on the circle |z − c| = r.
    TorusFourier,
}

/// Affine chart `u = (z − center)/scale` of one coordinate.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct AxisMap {
    pub center: Complex64,
    pub scale: f64,
}

impl AxisMap {
    pub const IDENTITY: AxisMap = AxisMap {
        center: Complex64 { re: 0.0, im: 0.0 },
        scale: 1.0,
    };

    #[inline]
    fn apply(&self, z: Complex64) -> Complex64 {
        (z - self.center) / self.scale
    }
}

/// `C(n + k, n)`, the dimension of degree-k polynomials in n variables.
pub fn basis_dimension(n: usize, k: usize) -> usize {
    let mut num: u128 = 1;
    for i in 1..=n as u128 {
        num = num * (k as u128 + i) / i;
    }
    num as usize
}

/// Graded polynomial basis of degree ≤ k in n ∈ {1, 2} variables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyBasis {
    dim: usize,
    degree: usize,
    family: BasisFamily,
    maps: [AxisMap; 2],
    exponents: Vec<[u32; 2]>,
}

impl PolyBasis {
    pub fn new(dim: usize, degree: usize, family: BasisFamily, maps: &[AxisMap]) -> Result<Self> {
        let cap = match dim {
            1 => MAX_DEGREE_1D,
            2 => MAX_DEGREE_2D,
            _ => return Err(Error::param(format!("dimension {dim} not in {{1, 2}}"))),
        };
        if degree > cap {
            return Err(Error::param(format!("degree {degree} exceeds the cap {cap} for n = {dim}")));
        }
        if family == BasisFamily::Chebyshev1d && dim != 1 {
            return Err(Error::param("the Chebyshev family is one-dimensional"));
        }
        if maps.len() != dim {
            return Err(Error::param("one axis map per coordinate"));
        }
        if maps.iter().any(|m| !(m.scale > 0.0) || !m.scale.is_finite()) {
            return Err(Error::param("axis scales must be positive"));
        }
        let mut m = [AxisMap::IDENTITY; 2];
        m[..dim].copy_from_slice(maps);
        let mut exponents = Vec::with_capacity(basis_dimension(dim, degree));
        for d in 0..=degree as u32 {
            if dim == 1 {
                exponents.push([d, 0]);
            } else {
                for a in (0..=d).rev() {
                    exponents.push([a, d - a]);
                }
            }
        }
        Ok(PolyBasis {
            dim,
            degree,
            family,
            maps: m,
            exponents,
        })
    }

    /// Raw monomials `z^α`.
    pub fn monomial(dim: usize, degree: usize) -> Result<Self> {
        PolyBasis::new(dim, degree, BasisFamily::Monomial, &vec![AxisMap::IDENTITY; dim])
    }

    /// The default well-conditioned family for a set: Chebyshev on
    /// intervals, Fourier modes on circles and tori, centred and scaled
    /// monomials otherwise.
    pub fn for_set(kind: &SetKind, grid: &CompactGrid, degree: usize) -> Result<Self> {
        let circle = |c: Complex64, r: f64| AxisMap { center: c, scale: r };
        match kind {
            SetKind::Interval { a, b } => PolyBasis::new(
                1,
                degree,
                BasisFamily::Chebyshev1d,
                &[circle(Complex64::new(0.5 * (a + b), 0.0), 0.5 * (b - a))],
            ),
            SetKind::Circle { .. } | SetKind::DiscBoundary { .. } => {
                let (c, r) = kind.as_circle().unwrap();
                PolyBasis::new(1, degree, BasisFamily::TorusFourier, &[circle(c, r)])
            }
            SetKind::Torus { n } => {
                PolyBasis::new(*n, degree, BasisFamily::TorusFourier, &vec![AxisMap::IDENTITY; *n])
            }
            SetKind::Product(a, b) => {
                let axis = |k: &SetKind| match k {
                    SetKind::Interval { a, b } => circle(Complex64::new(0.5 * (a + b), 0.0), 0.5 * (b - a)),
                    SetKind::Torus { .. } => AxisMap::IDENTITY,
                    other => {
                        let (c, r) = other.as_circle().unwrap_or((Complex64::new(0.0, 0.0), 1.0));
                        circle(c, r)
                    }
                };
                let fam = if a.as_circle().is_some() && b.as_circle().is_some() {
                    BasisFamily::TorusFourier
                } else {
                    BasisFamily::Monomial
                };
                PolyBasis::new(2, degree, fam, &[axis(a), axis(b)])
            }
            SetKind::Custom => PolyBasis::adapted_monomial(grid, degree),
        }
    }

    /// Monomials centred at the cloud's centroid and scaled by its radius.
    pub fn adapted_monomial(grid: &CompactGrid, degree: usize) -> Result<Self> {
        let n = grid.dim();
        let mut maps = Vec::with_capacity(n);
        for i in 0..n {
            let pts = grid.points();
            let c = pts.iter().map(|p| p.coord(i)).sum::<Complex64>() / pts.len() as f64;
            let r = pts.iter().map(|p| (p.coord(i) - c).norm()).fold(0.0, f64::max);
            maps.push(AxisMap {
                center: c,
                scale: if r > 0.0 { r } else { 1.0 },
            });
        }
        PolyBasis::new(n, degree, BasisFamily::Monomial, &maps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn maps(&self) -> &[AxisMap] {
        &self.maps[..self.dim]
    }

    pub fn exponents(&self) -> &[[u32; 2]] {
        &self.exponents
    }

    /// N_k.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn chebyshev(&self) -> bool {
        self.family == BasisFamily::Chebyshev1d
    }

    /// `log |leading coefficient|` of the one-variable factor of degree j
    /// on axis i, as a polynomial in z_i.
    fn lead_log_1d(&self, i: usize, j: u32) -> f64 {
        let s = self.maps[i].scale.ln();
        if j == 0 {
            0.0
        } else if self.chebyshev() {
            (j - 1) as f64 * std::f64::consts::LN_2 - j as f64 * s
        } else {
            -(j as f64) * s
        }
    }

    /// `Σ_α log |lead(b_α)|`: the log-determinant of the change of basis
    /// from monomials to this basis.
    pub fn lead_log_sum(&self) -> f64 {
        self.exponents
            .iter()
            .map(|a| (0..self.dim).map(|i| self.lead_log_1d(i, a[i])).sum::<f64>())
            .sum()
    }

    /// One-variable factors `p_0(u) … p_k(u)` scaled by `e^{-λ}`; returns λ.
    fn axis_values(&self, i: usize, z: Complex64, out: &mut Vec<Complex64>) -> f64 {
        let u = self.maps[i].apply(z);
        out.clear();
        let one = Complex64::new(1.0, 0.0);
        let mut log_scale = 0.0;
        out.push(one);
        if self.degree == 0 {
            return 0.0;
        }
        out.push(u);
        for j in 2..=self.degree {
            let next = if self.chebyshev() {
                2.0 * u * out[j - 1] - out[j - 2]
            } else {
                u * out[j - 1]
            };
            out.push(next);
            let m = next.norm();
            if m > RESCALE_AT {
                let f = 1.0 / m;
                out.iter_mut().for_each(|v| *v *= f);
                log_scale += m.ln();
            }
        }
        log_scale
    }

    /// Basis values at a point, scaled by `e^{-λ}`, and λ (zero unless the
    /// raw values would overflow).
    pub fn eval_scaled(&self, p: &Point) -> (Vec<Complex64>, f64) {
        let mut a = Vec::with_capacity(self.degree + 1);
        let la = self.axis_values(0, p.coord(0), &mut a);
        if self.dim == 1 {
            return (a, la);
        }
        let mut b = Vec::with_capacity(self.degree + 1);
        let lb = self.axis_values(1, p.coord(1), &mut b);
        let row = self
            .exponents
            .iter()
            .map(|e| a[e[0] as usize] * b[e[1] as usize])
            .collect();
        (row, la + lb)
    }

    /// Unscaled basis values; `None` on overflow.
    pub fn eval(&self, p: &Point) -> Option<Vec<Complex64>> {
        let (mut row, l) = self.eval_scaled(p);
        if l != 0.0 {
            let f = l.exp();
            if !f.is_finite() {
                return None;
            }
            row.iter_mut().for_each(|v| *v *= f);
        }
        row.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(row)
    }
}

/// Basis values on a grid with per-row weights.
#[derive(Clone, Debug)]
pub struct EvalMatrix {
    /// Entry (i, j) is `b_j(x_i) e^{-row_log_scale_i}`.
    pub values: CMatrix,
    pub row_log_scale: Vec<f64>,
    /// `−k·φ(x_i)`.
    pub row_log_weights: Vec<f64>,
}

impl EvalMatrix {
    /// `e^{−kφ(x_i)}`.
    pub fn row_weights(&self) -> Vec<f64> {
        self.row_log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Unscaled entry `b_j(x_i)`.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.values[(i, j)] * self.row_log_scale[i].exp()
    }
}

/// Evaluates the basis on every grid point together with `e^{-kφ}`.
///
/// Raw monomials that overflow are a conditioning error: the caller should
/// switch to a centred family. Recurrence families are rescaled per row
/// instead.
pub fn evaluate_basis(basis: &PolyBasis, grid: &CompactGrid, weight: &WeightFn, k: usize) -> Result<EvalMatrix> {
    if grid.dim() != basis.dim() {
        return Err(Error::param("basis and grid dimensions differ"));
    }
    let phi = weight.eval_grid(grid)?;
    let rows: Vec<(Vec<Complex64>, f64)> = grid.points().par_iter().map(|p| basis.eval_scaled(p)).collect();
    let n = basis.len();
    let mut values = CMatrix::zeros(grid.len(), n);
    let mut row_log_scale = Vec::with_capacity(grid.len());
    for (i, (row, l)) in rows.into_iter().enumerate() {
        let overflow = row
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm().ln() + l >= f64::MAX.ln());
        if basis.family() == BasisFamily::Monomial && l > 0.0 && overflow {
            return Err(Error::Conditioning(format!(
                "monomial values overflow at point {i}; use a centred family"
            )));
        }
        values.row_mut(i).copy_from_slice(&row);
        row_log_scale.push(l);
    }
    Ok(EvalMatrix {
        values,
        row_log_scale,
        row_log_weights: phi.iter().map(|v| -(k as f64) * v).collect(),
    })
}

/// Orthonormal basis of degree-k sections in L²(μ, kφ).
///
/// Sections are evaluated through a weighted Arnoldi recurrence; the
/// coefficients `C` in the raw basis (`s = e^{log_scale} b·C`, up to a
/// unitary change of orthonormal basis) are available on demand.
#[derive(Clone, Debug)]
pub struct OrthonormalBasis {
    base: PolyBasis,
    recurrence: Arc<Recurrence>,
    factored: Arc<OnceLock<Factored>>,
    policy: PrecisionPolicy,
    gram_residual: f64,
    k: usize,
    measure: DiscreteMeasure,
    weight: WeightFn,
}

/// Pivoted QR of the weighted evaluation matrix in the raw basis, computed
/// on first use.
#[derive(Clone, Debug)]
struct Factored {
    /// `C e^{t}`, or `None` if the factorization could not resolve the
    /// full space at the working precision.
    coeffs: Option<CMatrix>,
    log_scale: f64,
    log_gram: Option<f64>,
    condition: f64,
    precision: Precision,
}

/// Weighted Arnoldi (Stieltjes) process on the support.
///
/// Each new vector is a coordinate times an earlier one, orthogonalized
/// twice against all previous vectors in `L²(μ, kφ)`. In graded order the
/// change of basis from monomials stays triangular, so the span after the
/// last step is the full polynomial space; the recurrence coefficients let
/// the orthonormal polynomials be evaluated anywhere without ever forming
/// an ill-conditioned basis matrix.
#[derive(Clone, Debug)]
struct Recurrence {
    /// `(parent index, axis)` for every element after the first.
    parent: Vec<(usize, usize)>,
    /// Orthogonalization coefficients against the previous elements.
    coef: Vec<Vec<Complex64>>,
    /// Norms after orthogonalization; `diag[0]` is the norm of the weights.
    diag: Vec<f64>,
    /// Global weight shift: sections are the recurrence values times `e^{−shift}`.
    shift: f64,
    /// `log det` of the monomial Gram matrix, from the recurrence norms.
    log_gram: f64,
}

impl Recurrence {
    fn build(basis: &PolyBasis, mu: &DiscreteMeasure, phi: &[f64], k: usize) -> Result<Self> {
        let kf = k as f64;
        let live: Vec<usize> = (0..mu.len()).filter(|&i| mu.masses()[i] > 0.0).collect();
        let logw: Vec<f64> = live.iter().map(|&i| 0.5 * mu.masses()[i].ln() - kf * phi[i]).collect();
        let shift = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let u: Vec<[Complex64; 2]> = live
            .iter()
            .map(|&i| {
                let p = &mu.points()[i];
                let mut c = [Complex64::new(0.0, 0.0); 2];
                for (ax, slot) in c.iter_mut().enumerate().take(basis.dim) {
                    *slot = basis.maps[ax].apply(p.coord(ax));
                }
                c
            })
            .collect();
        let index: std::collections::HashMap<[u32; 2], usize> =
            basis.exponents.iter().enumerate().map(|(j, e)| (*e, j)).collect();
        let n = basis.len();
        let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        let mut parent = Vec::with_capacity(n);
        let mut coef = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        for (j, e) in basis.exponents.iter().enumerate() {
            let mut v: Vec<Complex64> = if j == 0 {
                logw.iter().map(|l| Complex64::new((l - shift).exp(), 0.0)).collect()
            } else {
                let ax = if e[0] > 0 { 0 } else { 1 };
                let mut pe = *e;
                pe[ax] -= 1;
                let p = index[&pe];
                parent.push((p, ax));
                q[p].iter().zip(&u).map(|(x, c)| x * c[ax]).collect()
            };
            let before = norm(&v);
            let mut c = vec![Complex64::new(0.0, 0.0); j];
            for _ in 0..2 {
                let proj: Vec<Complex64> = q
                    .par_iter()
                    .map(|b| b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum())
                    .collect();
                for (b, f) in q.iter().zip(&proj) {
                    for (y, x) in v.iter_mut().zip(b) {
                        *y -= f * x;
                    }
                }
                c.iter_mut().zip(&proj).for_each(|(a, b)| *a += b);
            }
            let h = norm(&v);
            if !(h > ARNOLDI_RTOL * before) || live.len() <= j {
                return Err(Error::DegenerateSupport { column: j });
            }
            v.iter_mut().for_each(|x| *x /= h);
            q.push(v);
            if j > 0 {
                coef.push(c);
            }
            diag.push(h);
        }
        // u^α = (Π of the norms along its chain) q_α + lower terms, and
        // z^α = s^α u^α + lower terms
        let mut chain = vec![0.0f64; n];
        chain[0] = diag[0].ln();
        for j in 1..n {
            chain[j] = chain[parent[j - 1].0] + diag[j].ln();
        }
        let axis_scale: f64 = basis
            .exponents
            .iter()
            .map(|e| (0..basis.dim).map(|i| e[i] as f64 * basis.maps[i].scale.ln()).sum::<f64>())
            .sum();
        let log_gram = 2.0 * n as f64 * shift + 2.0 * chain.iter().sum::<f64>() + 2.0 * axis_scale;
        Ok(Recurrence {
            parent,
            coef,
            diag,
            shift,
            log_gram,
        })
    }

    /// `(v, λ)` with orthonormal sections `s_l(x) = v_l e^{λ}`.
    fn eval(&self, basis: &PolyBasis, p: &Point) -> (Vec<Complex64>, f64) {
        let mut u = [Complex64::new(0.0, 0.0); 2];
        for (ax, slot) in u.iter_mut().enumerate().take(basis.dim) {
            *slot = basis.maps[ax].apply(p.coord(ax));
        }
        let n = self.diag.len();
        let mut v = Vec::with_capacity(n);
        v.push(Complex64::new(1.0 / self.diag[0], 0.0));
        let mut lam = -self.shift;
        for j in 1..n {
            let (par, ax) = self.parent[j - 1];
            let mut x = u[ax] * v[par];
            for (c, y) in self.coef[j - 1].iter().zip(&v) {
                x -= c * y;
            }
            x /= self.diag[j];
            v.push(x);
            let m = x.norm();
            if m > RESCALE_AT {
                let f = 1.0 / m;
                v.iter_mut().for_each(|y| *y *= f);
                lam += m.ln();
            }
        }
        (v, lam)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|z| (z / scale).norm_sqr()).sum::<f64>().sqrt()
}

/// Weighted evaluation matrix `√m_i e^{−kφ_i} b(x_i) e^{-T}` over the
/// points of positive mass; returns it with the global shift T.
fn weighted_matrix(basis: &PolyBasis, mu: &DiscreteMeasure, phi: &[f64], k: usize) -> (CMatrix, f64) {
    let kf = k as f64;
    let rows: Vec<(Vec<Complex64>, f64)> = mu
        .points()
        .par_iter()
        .zip(mu.masses().par_iter())
        .zip(phi.par_iter())
        .filter(|((_, m), _)| **m > 0.0)
        .map(|((p, m), f)| {
            let (row, l) = basis.eval_scaled(p);
            (row, 0.5 * m.ln() - kf * f + l)
        })
        .collect();
    let t = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let n = basis.len();
    let mut a = CMatrix::zeros(rows.len(), n);
    for (i, (row, l)) in rows.iter().enumerate() {
        let f = (l - t).exp();
        for (dst, v) in a.row_mut(i).iter_mut().zip(row) {
            *dst = v * f;
        }
    }
    (a, t)
}

fn factor(a: &CMatrix, policy: PrecisionPolicy) -> Result<PivotedTriangular> {
    let dd = |a: &CMatrix| -> Result<PivotedTriangular> {
        crate::note_precision_escalation();
        let g: Vec<ComplexDd> = gram_dd(a);
        pivoted_cholesky_dd(&g, a.cols(), RANK_RTOL * RANK_RTOL)
    };
    match policy {
        PrecisionPolicy::DoubleDouble => dd(a),
        PrecisionPolicy::Double => pivoted_qr(a, RANK_RTOL),
        PrecisionPolicy::Auto => match pivoted_qr(a, RANK_RTOL) {
            Ok(f) if f.condition_estimate() <= ESCALATION_CONDITION => Ok(f),
            Ok(_) | Err(Error::DegenerateSupport { .. }) => dd(a),
            Err(e) => Err(e),
        },
    }
}

/// Orthonormalizes `basis` in L²(μ, kφ).
///
/// The orthonormal sections come from a weighted Arnoldi process; the
/// coefficients in `basis`, with their condition estimate, from pivoted QR
/// of the weighted evaluation matrix under `policy`, computed on demand.
pub fn orthonormalize(basis: &PolyBasis, mu: &DiscreteMeasure, weight: &WeightFn, k: usize) -> Result<OrthonormalBasis> {
    orthonormalize_with(basis, mu, weight, k, PrecisionPolicy::global())
}

pub fn orthonormalize_with(
    basis: &PolyBasis,
    mu: &DiscreteMeasure,
    weight: &WeightFn,
    k: usize,
    policy: PrecisionPolicy,
) -> Result<OrthonormalBasis> {
    if mu.dim() != basis.dim() {
        return Err(Error::param("basis and measure dimensions differ"));
    }
    let phi = weight.eval_grid(mu.support())?;
    let n = basis.len();
    let recurrence = Recurrence::build(basis, mu, &phi, k)?;
    // the sections as evaluated downstream, weighted, on the support
    let kf = k as f64;
    let rows: Vec<Vec<Complex64>> = mu
        .points()
        .par_iter()
        .zip(mu.masses().par_iter())
        .zip(phi.par_iter())
        .filter(|((_, m), _)| **m > 0.0)
        .map(|((p, m), f)| {
            let (v, l) = recurrence.eval(basis, p);
            let s = (0.5 * m.ln() - kf * f + l).exp();
            v.into_iter().map(|z| z * s).collect()
        })
        .collect();
    let gram_residual = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut worst = 0.0f64;
            for q in p..n {
                let g: Complex64 = rows.iter().map(|r| r[p].conj() * r[q]).sum();
                let target = if p == q { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(OrthonormalBasis {
        base: basis.clone(),
        recurrence: Arc::new(recurrence),
        factored: Arc::new(OnceLock::new()),
        policy,
        gram_residual,
        k,
        measure: mu.clone(),
        weight: weight.clone(),
    })
}

fn factor_basis(basis: &PolyBasis, mu: &DiscreteMeasure, weight: &WeightFn, k: usize, policy: PrecisionPolicy) -> Factored {
    let failed = |t: f64| Factored {
        coeffs: None,
        log_scale: -t,
        log_gram: None,
        condition: f64::INFINITY,
        precision: Precision::DoubleDouble,
    };
    let Ok(phi) = weight.eval_grid(mu.support()) else {
        return failed(0.0);
    };
    let (a, t) = weighted_matrix(basis, mu, &phi, k);
    match factor(&a, policy) {
        Ok(f) => Factored {
            coeffs: Some(f.coefficient_matrix()),
            log_scale: -t,
            log_gram: Some(2.0 * f.log_abs_det_r() + 2.0 * basis.len() as f64 * t - 2.0 * basis.lead_log_sum()),
            condition: f.condition_estimate(),
            precision: f.precision,
        },
        Err(_) => failed(t),
    }
}

impl OrthonormalBasis {
    pub fn basis(&self) -> &PolyBasis {
        &self.base
    }

    fn factored(&self) -> &Factored {
        self.factored
            .get_or_init(|| factor_basis(&self.base, &self.measure, &self.weight, self.k, self.policy))
    }

    /// Coefficient matrix `C`: the columns of `(b_j(x)) · C` are the
    /// orthonormal sections. `None` when pivoted QR of the raw basis cannot
    /// resolve the space at the working precision; may overflow for
    /// extreme weights, see [`OrthonormalBasis::scaled_coeffs`].
    pub fn coeffs(&self) -> Option<CMatrix> {
        let f = self.factored();
        let c = f.coeffs.as_ref()?;
        let e = f.log_scale.exp();
        let n = c.rows();
        Some(CMatrix::from_rows(n, n, c.as_slice().iter().map(|z| z * e).collect()))
    }

    /// `C e^{−log_scale}`.
    pub fn scaled_coeffs(&self) -> Option<&CMatrix> {
        self.factored().coeffs.as_ref()
    }

    pub fn log_scale(&self) -> f64 {
        self.factored().log_scale
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn weight(&self) -> &WeightFn {
        &self.weight
    }

    /// Condition estimate of the weighted raw-basis matrix (infinite if
    /// its factorization failed).
    pub fn condition_estimate(&self) -> f64 {
        self.factored().condition
    }

    /// Precision the raw-basis factorization needed.
    pub fn precision(&self) -> Precision {
        self.factored().precision
    }

    /// Largest entry of `Gram − I` on the defining quadrature.
    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    /// Conditioning error if the identity-Gram check failed.
    pub fn check_identity(&self) -> Result<()> {
        if self.gram_residual <= GRAM_TOL {
            Ok(())
        } else {
            Err(Error::Conditioning(format!(
                "orthonormal basis has Gram residual {:.3e}",
                self.gram_residual
            )))
        }
    }

    /// `log det (∫ z^α z̄^β e^{−2kφ} dμ)` over the monomials of degree ≤ k.
    /// Basis independent; differences of this quantity are the ℒ_k
    /// differences up to the factor −1/(2kN_k). Read off the norms of
    /// the Arnoldi recurrence, which keeps full relative accuracy for
    /// strongly varying weights.
    pub fn log_gram_monomial(&self) -> f64 {
        self.recurrence.log_gram
    }

    /// The same log-determinant from the pivoted QR factorization of the
    /// raw basis, as an independent cross-check.
    pub fn log_gram_factored(&self) -> Option<f64> {
        self.factored().log_gram
    }

    /// Sections at a point as `(v, λ)` with `s_l(x) = v_l e^{λ}`.
    ///
    /// Values come from the Arnoldi recurrence, an orthonormal basis of the
    /// same space as `coeffs` (the two agree up to a unitary change of
    /// basis, so `Σ|s_l|²` is the same); it keeps full relative accuracy
    /// where the explicit coefficients lose digits to conditioning.
    pub fn sections_scaled(&self, p: &Point) -> (Vec<Complex64>, f64) {
        self.recurrence.eval(&self.base, p)
    }

    /// Section values at a point (may overflow far from the support).
    pub fn sections(&self, p: &Point) -> Vec<Complex64> {
        let (v, l) = self.sections_scaled(p);
        let f = l.exp();
        v.into_iter().map(|z| z * f).collect()
    }

    /// `log Σ_l |s_l(x)|²` (unweighted).
    pub fn log_sum_sq(&self, p: &Point) -> f64 {
        let (v, l) = self.sections_scaled(p);
        let s: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        s.ln() + 2.0 * l
    }

    /// The support as a shared grid.
    pub fn support(&self) -> &Arc<CompactGrid> {
        self.measure.support_arc()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{arcsine_measure, haar_measure, make_parametric_set};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dimensions() {
        assert_eq!(basis_dimension(1, 5), 6);
        assert_eq!(basis_dimension(2, 2), 6);
        assert_eq!(basis_dimension(2, 0), 1);
        for k in 0..=200 {
            assert_eq!(basis_dimension(1, k), k + 1);
            assert_eq!(basis_dimension(2, k), (k + 1) * (k + 2) / 2);
        }
    }

    #[test]
    fn graded_lex_order() {
        let b = PolyBasis::monomial(2, 2).unwrap();
        assert_eq!(b.exponents(), &[[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]);
        assert!(PolyBasis::monomial(1, 129).is_err());
        assert!(PolyBasis::monomial(2, 33).is_err());
        assert!(PolyBasis::new(2, 3, BasisFamily::Chebyshev1d, &[AxisMap::IDENTITY; 2]).is_err());
    }

    #[test]
    fn eval_two_points() {
        let b = PolyBasis::monomial(1, 1).unwrap();
        let g = CompactGrid::new(1, vec![Point::real(0.0), Point::real(1.0)], 0.0, SetKind::Custom).unwrap();
        let e = evaluate_basis(&b, &g, &WeightFn::zero(), 1).unwrap();
        assert_eq!(e.values.as_slice(), &[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(e.row_weights(), vec![1.0, 1.0]);
        let e = evaluate_basis(&b, &g, &WeightFn::constant(1.0), 2).unwrap();
        assert!(e.row_weights().iter().all(|w| (w - (-2f64).exp()).abs() < 1e-16));
    }

    #[test]
    fn monomial_overflow_is_a_conditioning_error() {
        let b = PolyBasis::monomial(1, 128).unwrap();
        let g = CompactGrid::new(1, vec![Point::real(1e3)], 0.0, SetKind::Custom).unwrap();
        assert!(matches!(evaluate_basis(&b, &g, &WeightFn::zero(), 1), Err(Error::Conditioning(_))));
    }

    #[test]
    fn chebyshev_values() {
        let b = PolyBasis::new(1, 4, BasisFamily::Chebyshev1d, &[AxisMap::IDENTITY]).unwrap();
        let v = b.eval(&Point::real(0.5)).unwrap();
        let expect = [1.0, 0.5, -0.5, -1.0, -0.5];
        for (a, e) in v.iter().zip(expect) {
            assert!((a.re - e).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_monomials_are_orthonormal() {
        let g = Arc::new(make_parametric_set(&SetKind::Circle { center: c(0.0, 0.0), r: 1.0 }, 64).unwrap());
        let mu = haar_measure(&g).unwrap();
        let b = PolyBasis::monomial(1, 20).unwrap();
        let onb = orthonormalize(&b, &mu, &WeightFn::zero(), 20).unwrap();
        onb.check_identity().unwrap();
        assert!(onb.condition_estimate() < 1.0 + 1e-10);
        let cm = onb.coeffs().unwrap();
        for i in 0..21 {
            for j in 0..21 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cm[(i, j)].norm() - want).abs() < 1e-12);
            }
        }
        assert!(onb.log_gram_monomial().abs() < 1e-12);
    }

    #[test]
    fn chebyshev_on_arcsine() {
        let mu = arcsine_measure(64).unwrap();
        let b = PolyBasis::new(1, 10, BasisFamily::Chebyshev1d, &[AxisMap::IDENTITY]).unwrap();
        let onb = orthonormalize(&b, &mu, &WeightFn::zero(), 10).unwrap();
        onb.check_identity().unwrap();
        let cm = onb.coeffs().unwrap();
        assert!((cm[(0, 0)].norm() - 1.0).abs() < 1e-12);
        for j in 1..11 {
            assert!((cm[(j, j)].norm() - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_points() {
        let g = Arc::new(make_parametric_set(&SetKind::Interval { a: -1.0, b: 1.0 }, 2).unwrap());
        let mu = DiscreteMeasure::uniform(g);
        let b = PolyBasis::monomial(1, 2).unwrap();
        assert_eq!(
            orthonormalize(&b, &mu, &WeightFn::zero(), 2).unwrap_err(),
            Error::DegenerateSupport { column: 2 }
        );
    }

    #[test]
    fn log_gram_is_basis_independent() {
        let mu = arcsine_measure(80).unwrap();
        let w = WeightFn::parse("poly:0,0.2").unwrap();
        let cheb = PolyBasis::new(1, 12, BasisFamily::Chebyshev1d, &[AxisMap::IDENTITY]).unwrap();
        let mono = PolyBasis::monomial(1, 12).unwrap();
        let a = orthonormalize(&cheb, &mu, &w, 12).unwrap().log_gram_monomial();
        let b = orthonormalize(&mono, &mu, &w, 12).unwrap().log_gram_monomial();
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn constant_shift_rescales_sections() {
        let mu = arcsine_measure(40).unwrap();
        let b = PolyBasis::for_set(&SetKind::Interval { a: -1.0, b: 1.0 }, mu.support(), 8).unwrap();
        let w = WeightFn::builtin("re2").unwrap();
        let o1 = orthonormalize(&b, &mu, &w, 8).unwrap();
        let o2 = orthonormalize(&b, &mu, &w.shifted(0.7), 8).unwrap();
        let p = Point::new1(c(0.3, 0.8));
        let r = o2.log_sum_sq(&p) - o1.log_sum_sq(&p);
        assert!((r - 2.0 * 8.0 * 0.7).abs() < 1e-10);
    }

    #[test]
    fn policies_agree() {
        let mu = arcsine_measure(60).unwrap();
        let b = PolyBasis::monomial(1, 16).unwrap();
        let w = WeightFn::zero();
        let d = orthonormalize_with(&b, &mu, &w, 16, PrecisionPolicy::Double).unwrap();
        let q = orthonormalize_with(&b, &mu, &w, 16, PrecisionPolicy::DoubleDouble).unwrap();
        assert_eq!(q.precision(), Precision::DoubleDouble);
        let (a, b) = (d.log_gram_factored().unwrap(), q.log_gram_factored().unwrap());
        assert!((a - b).abs() < 1e-8);
        assert!((b - q.log_gram_monomial()).abs() < 1e-8);
    }
}
