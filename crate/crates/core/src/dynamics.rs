//! Lifted polynomial endomorphisms of ℙ¹.
//!
//! A lift `F = (F₀, F₁)` is a pair of binary forms of degree d; the induced
//! map in the chart `z = Z₁/Z₀` is `f(z) = F₁(1, z)/F₀(1, z)`. Coefficients
//! are stored in ascending powers of Z₁: `F(Z₀, Z₁) = Σ_j c_j Z₀^{d−j} Z₁^j`.
//!
//! A weight φ on ℂ is the function of a log-homogeneous
//! `Φ(Z) = φ(Z₁/Z₀) + log|Z₀|`, and the pull-back `d⁻¹F*` acts by
//! `Φ ↦ d⁻¹ Φ ∘ F`. In the chart,
//!
//! ```text
//! (d⁻¹F*φ)(z) = d⁻¹ [φ(f(z)) + log|F₀(1, z)|].
//! ```

use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{CompactGrid, DiscreteMeasure, GridFunction, Point, SetKind, WeightFn};
use crate::error::{Error, Result};
use crate::fekete::transfinite_diameter_leja;
use crate::linalg::{CMatrix, Lu};

/// Largest supported degree.
pub const MAX_MAP_DEGREE: usize = 8;

/// Homogeneous lift of a rational map of ℙ¹.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapLift {
    d: usize,
    f0: Vec<Complex64>,
    f1: Vec<Complex64>,
}

fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a)
}

/// Evaluates `Σ_j c_j Z₀^{d−j} Z₁^j`.
fn form(c: &[Complex64], z0: Complex64, z1: Complex64) -> Complex64 {
    let d = c.len() - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut p1 = Complex64::new(1.0, 0.0);
    for (j, a) in c.iter().enumerate() {
        acc += a * z0.powu((d - j) as u32) * p1;
        p1 *= z1;
    }
    acc
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`).
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::param(format!("bad complex number '{s}'"));
    if t.is_empty() {
        return Err(bad());
    }
    let num = |x: &str| -> Result<f64> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse::<f64>().map_err(|_| bad()),
        }
    };
    if let Some(body) = t.strip_suffix('i') {
        // split at the last sign that is not an exponent sign
        let bytes = body.as_bytes();
        let mut split = None;
        for i in (1..bytes.len()).rev() {
            if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
                split = Some(i);
                break;
            }
        }
        match split {
            Some(i) => Ok(Complex64::new(num(&body[..i])?, num(&body[i..])?)),
            None => Ok(Complex64::new(0.0, num(body)?)),
        }
    } else {
        Ok(Complex64::new(num(&t)?, 0.0))
    }
}

impl MapLift {
    /// Checks the degree and that the resultant does not vanish.
    pub fn new(d: usize, f0: Vec<Complex64>, f1: Vec<Complex64>) -> Result<Self> {
        if !(1..=MAX_MAP_DEGREE).contains(&d) {
            return Err(Error::param(format!("map degree {d} not in 1..={MAX_MAP_DEGREE}")));
        }
        if f0.len() != d + 1 || f1.len() != d + 1 {
            return Err(Error::param(format!("each form needs {} coefficients", d + 1)));
        }
        if f0.iter().chain(&f1).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::param("coefficients must be finite"));
        }
        let lift = MapLift { d, f0, f1 };
        resultant(&lift)?;
        Ok(lift)
    }

    /// `(Z₀^d, Z₁^d)`, the lift of z ↦ z^d with resultant 1.
    pub fn power(d: usize) -> Result<Self> {
        let mut f0 = vec![Complex64::new(0.0, 0.0); d + 1];
        let mut f1 = f0.clone();
        f0[0] = Complex64::new(1.0, 0.0);
        f1[d] = Complex64::new(1.0, 0.0);
        MapLift::new(d, f0, f1)
    }

    /// `d=<int>;F0=<coeffs>;F1=<coeffs>`, coefficients comma separated in
    /// ascending powers of Z₁.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut d = None;
        let mut f0 = None;
        let mut f1 = None;
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::param(format!("expected key=value in '{part}'")))?;
            let coeffs = || -> Result<Vec<Complex64>> { val.split(',').map(parse_complex).collect() };
            match key.trim() {
                "d" => {
                    d = Some(val.trim().parse::<usize>().map_err(|_| Error::param("bad degree"))?);
                }
                "F0" => f0 = Some(coeffs()?),
                "F1" => f1 = Some(coeffs()?),
                other => return Err(Error::param(format!("unknown lift key '{other}'"))),
            }
        }
        match (d, f0, f1) {
            (Some(d), Some(a), Some(b)) => MapLift::new(d, a, b),
            _ => Err(Error::param("lift spec needs d, F0 and F1")),
        }
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn f0(&self) -> &[Complex64] {
        &self.f0
    }

    pub fn f1(&self) -> &[Complex64] {
        &self.f1
    }

    /// The lift `λF`.
    pub fn scaled(&self, lambda: Complex64) -> Result<Self> {
        MapLift::new(
            self.d,
            self.f0.iter().map(|c| c * lambda).collect(),
            self.f1.iter().map(|c| c * lambda).collect(),
        )
    }

    /// `F(Z₀, Z₁)`.
    pub fn apply(&self, z0: Complex64, z1: Complex64) -> (Complex64, Complex64) {
        (form(&self.f0, z0, z1), form(&self.f1, z0, z1))
    }

    /// `(F₀(1, z), F₁(1, z))`.
    pub fn at(&self, z: Complex64) -> (Complex64, Complex64) {
        (horner(&self.f0, z), horner(&self.f1, z))
    }

    /// `d⁻¹F*φ` as a weight on ℂ.
    pub fn pullback_weight(&self, phi: &WeightFn) -> WeightFn {
        let lift = self.clone();
        let phi2 = phi.clone();
        let d = self.d as f64;
        WeightFn::new(
            format!("pullback({})", phi.label()),
            phi.growth_class(),
            move |p| {
                let (a, b) = lift.at(p.z());
                (eval_homogeneous(&phi2, a, b)) / d
            },
        )
    }
}

/// `Φ(Z₀, Z₁) = φ(Z₁/Z₀) + log|Z₀|`, switching to the asymptotic form
/// `log|Z₁| + γ` (γ read off far out along the same ray) when Z₀ is tiny
/// relative to Z₁. Only meaningful there for weights of logarithmic growth.
fn eval_homogeneous(phi: &WeightFn, z0: Complex64, z1: Complex64) -> f64 {
    const FAR: f64 = 1e12;
    if z0.norm() * FAR >= z1.norm() && z0.norm() > 0.0 {
        phi.eval(&Point::new1(z1 / z0)) + z0.norm().ln()
    } else {
        let dir = if z1.norm() > 0.0 { z1 / z1.norm() } else { Complex64::new(1.0, 0.0) };
        let far = dir * FAR;
        phi.eval(&Point::new1(far)) - FAR.ln() + z1.norm().ln()
    }
}

fn exact_integers(c: &[Complex64]) -> Option<Vec<BigInt>> {
    c.iter()
        .map(|z| {
            if z.im == 0.0 && z.re.fract() == 0.0 && z.re.abs() < 9.0e15 {
                Some(BigInt::from(z.re as i64))
            } else {
                None
            }
        })
        .collect()
}

fn sylvester_rows(d: usize) -> usize {
    2 * d
}

/// Fraction-free Gaussian elimination (Bareiss) over the integers.
fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    let mut sign = 1i32;
    let mut prev = BigInt::from(1);
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

fn sylvester<T: Clone>(a: &[T], b: &[T], zero: T) -> Vec<Vec<T>> {
    let d = a.len() - 1;
    let n = sylvester_rows(d);
    let mut m = vec![vec![zero; n]; n];
    for i in 0..d {
        for (j, c) in a.iter().enumerate() {
            m[i][i + j] = c.clone();
        }
        for (j, c) in b.iter().enumerate() {
            m[d + i][i + j] = c.clone();
        }
    }
    m
}

/// Resultant of (F₀, F₁) as binary forms, normalized so that
/// `Res(Z₀^d, Z₁^d) = 1`. Integer coefficients are handled exactly.
pub fn resultant(lift: &MapLift) -> Result<Complex64> {
    let d = lift.d;
    if d > MAX_MAP_DEGREE {
        return Err(Error::param(format!("resultant needs d ≤ {MAX_MAP_DEGREE}")));
    }
    let value = match (exact_integers(&lift.f0), exact_integers(&lift.f1)) {
        (Some(a), Some(b)) => {
            let det = bareiss_det(sylvester(&a, &b, BigInt::zero()));
            if det.is_zero() {
                return Err(Error::DegenerateMap);
            }
            Complex64::new(det.to_f64().unwrap_or(f64::INFINITY), 0.0)
        }
        _ => {
            let rows = sylvester(&lift.f0, &lift.f1, Complex64::new(0.0, 0.0));
            let n = rows.len();
            let m = CMatrix::from_rows(n, n, rows.into_iter().flatten().collect());
            let scale = lift
                .f0
                .iter()
                .chain(&lift.f1)
                .map(|c| c.norm())
                .fold(0.0, f64::max)
                .powi(n as i32);
            let det = Lu::new(&m).map(|lu| lu.det()).unwrap_or(Complex64::new(0.0, 0.0));
            if det.norm() <= 1e-12 * scale {
                return Err(Error::DegenerateMap);
            }
            det
        }
    };
    Ok(value)
}

/// Green weight sampled on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct GreenWeight {
    pub lift: MapLift,
    pub values: GridFunction,
    pub iterations_m: usize,
    /// Sup-norm difference of the last two iterates.
    pub residual: f64,
    /// `max |d⁻¹F*g − g|` over the grid.
    pub fixed_point_residual: f64,
}

/// `d^{−m} Φ₀(F^m(Z))` for m = 0..=m_max along the normalized orbit of Z.
fn orbit_values(lift: &MapLift, phi0: &WeightFn, z0: Complex64, z1: Complex64, m_max: usize) -> Vec<f64> {
    let d = lift.d as f64;
    let mut out = Vec::with_capacity(m_max + 1);
    let (mut a, mut b) = (z0, z1);
    let mut acc = 0.0;
    let norm = a.norm().max(b.norm());
    a /= norm;
    b /= norm;
    acc += norm.ln();
    out.push(acc + eval_homogeneous(phi0, a, b));
    let mut w = 1.0;
    for _ in 0..m_max {
        let (na, nb) = lift.apply(a, b);
        let norm = na.norm().max(nb.norm());
        w /= d;
        // F(e^L Ẑ) = e^{dL} F(Ẑ): the accumulated log scale is multiplied by
        // d and immediately divided by d again
        acc += w * norm.ln();
        a = na / norm;
        b = nb / norm;
        out.push(acc + w * eval_homogeneous(phi0, a, b));
    }
    out
}

/// `g_F = lim (d⁻¹F*)^m φ₀` on the grid, by pointwise orbit iteration in
/// normalized homogeneous coordinates.
pub fn green_weight(lift: &MapLift, phi0: &WeightFn, grid: &Arc<CompactGrid>, m_max: usize, tol: f64) -> Result<GreenWeight> {
    if lift.d < 2 {
        return Err(Error::param("Green weights need degree d ≥ 2"));
    }
    if grid.dim() != 1 {
        return Err(Error::param("Green weights live on ℙ¹"));
    }
    if m_max == 0 {
        return Err(Error::param("need at least one iteration"));
    }
    let orbits: Vec<Vec<f64>> = grid
        .points()
        .par_iter()
        .map(|p| orbit_values(lift, phi0, Complex64::new(1.0, 0.0), p.z(), m_max + 1))
        .collect();
    let step = |m: usize| orbits.iter().map(|o| (o[m] - o[m - 1]).abs()).fold(0.0, f64::max);
    let mut m = 1;
    let mut residual = step(1);
    while residual >= tol && m < m_max {
        m += 1;
        residual = step(m);
    }
    // g_{m+1}(z) = d⁻¹ g_m(f(z)) + d⁻¹ log|F₀(1,z)| along the same orbit
    let fixed = step(m + 1);
    if residual >= tol {
        return Err(Error::Iteration {
            iterations: m,
            residual,
        });
    }
    let values = GridFunction::new(grid.clone(), orbits.iter().map(|o| o[m]).collect())?;
    Ok(GreenWeight {
        lift: lift.clone(),
        values,
        iterations_m: m,
        residual,
        fixed_point_residual: fixed,
    })
}

/// Pointwise Green weight with a fixed number of iterations, as a weight.
pub fn green_weight_fn(lift: &MapLift, phi0: &WeightFn, iterations: usize) -> WeightFn {
    let lift = lift.clone();
    let phi0 = phi0.clone();
    WeightFn::new(
        "green",
        crate::domain::GrowthClass::Logarithmic,
        move |p| *orbit_values(&lift, &phi0, Complex64::new(1.0, 0.0), p.z(), iterations).last().unwrap(),
    )
}

/// Roots of `Σ c_j z^j` (leading coefficient nonzero) from the companion
/// matrix, polished by two Newton steps.
pub fn poly_roots(c: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = c.len() - 1;
    if d == 0 {
        return Ok(vec![]);
    }
    let lead = c[d];
    if lead.norm() == 0.0 {
        return Err(Error::Domain("leading coefficient vanishes".into()));
    }
    let roots: Vec<Complex64> = if d == 1 {
        vec![-c[0] / lead]
    } else {
        let m = nalgebra::DMatrix::<Complex64>::from_fn(d, d, |i, j| {
            if i == 0 {
                -c[d - 1 - j] / lead
            } else if i == j + 1 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let ev = nalgebra::linalg::Schur::new(m)
            .eigenvalues()
            .ok_or_else(|| Error::Evaluation("companion eigenvalues failed".into()))?;
        ev.iter().copied().collect()
    };
    let deriv: Vec<Complex64> = c.iter().enumerate().skip(1).map(|(j, a)| a * j as f64).collect();
    Ok(roots
        .into_iter()
        .map(|mut z| {
            for _ in 0..2 {
                let dp = horner(&deriv, z);
                if dp.norm() > 0.0 {
                    z -= horner(c, z) / dp;
                }
            }
            z
        })
        .collect())
}

/// The d preimages of w under f, i.e. roots of `F₁(1,z) − w F₀(1,z)`.
pub fn preimages(lift: &MapLift, w: Complex64) -> Result<Vec<Complex64>> {
    let c: Vec<Complex64> = lift.f1.iter().zip(&lift.f0).map(|(b, a)| b - w * a).collect();
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if c[lift.d].norm() <= 1e-14 * scale {
        return Err(Error::Domain(format!("{w} is the image of ∞; its preimage leaves ℂ")));
    }
    poly_roots(&c)
}

/// `f⁻¹K` with all d preimages of every cloud point. The fill distance is
/// that of K scaled by the largest local inverse derivative.
pub fn preimage_cloud(lift: &MapLift, k: &CompactGrid) -> Result<CompactGrid> {
    if k.dim() != 1 {
        return Err(Error::param("preimages are taken in ℙ¹"));
    }
    let per: Vec<Vec<Complex64>> = k
        .points()
        .par_iter()
        .map(|p| preimages(lift, p.z()))
        .collect::<Result<_>>()?;
    let mut inv_deriv = 0.0f64;
    let d0: Vec<Complex64> = lift.f0.iter().enumerate().skip(1).map(|(j, a)| a * j as f64).collect();
    let d1: Vec<Complex64> = lift.f1.iter().enumerate().skip(1).map(|(j, a)| a * j as f64).collect();
    let mut pts = Vec::with_capacity(k.len() * lift.d);
    for z in per.iter().flatten() {
        let (a, b) = lift.at(*z);
        let fp = (horner(&d1, *z) * a - b * horner(&d0, *z)) / (a * a);
        inv_deriv = inv_deriv.max(1.0 / fp.norm());
        pts.push(Point::new1(*z));
    }
    CompactGrid::new(1, pts, k.fill_distance() * inv_deriv.min(1e6), SetKind::Custom)
}

/// `f*μ / d`: every preimage of a point of mass m receives mass m/d.
pub fn pullback_measure(lift: &MapLift, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let grid = preimage_cloud(lift, mu.support())?;
    let d = lift.d as f64;
    let masses = mu.masses().iter().flat_map(|m| std::iter::repeat(m / d).take(lift.d)).collect();
    DiscreteMeasure::new(Arc::new(grid), masses)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PullbackReport {
    /// `log d_∞(f⁻¹K, d⁻¹f*ψ)`.
    pub lhs: f64,
    /// `d⁻¹ log d_∞(K, ψ) − d⁻² log|Res F|`.
    pub rhs: f64,
    pub gap: f64,
    /// `lhs − d⁻¹ log d_∞(K, ψ)`: the log of the constant relating the two
    /// diameters, to be compared with `−d⁻² log|Res F|`.
    pub implied_log_constant: f64,
    pub resultant_log_constant: f64,
    pub log_d_inf_k: f64,
    pub pass: bool,
}

/// Compares both sides of the pull-back formula for transfinite diameters.
pub fn pullback_check(lift: &MapLift, k: &CompactGrid, psi: &WeightFn, schedule: &[usize], tol: f64) -> Result<PullbackReport> {
    let pre = preimage_cloud(lift, k)?;
    let pulled = lift.pullback_weight(psi);
    let (lhs, base) = rayon::join(
        || transfinite_diameter_leja(&pre, &pulled, schedule),
        || transfinite_diameter_leja(k, psi, schedule),
    );
    let lhs = lhs?.log_d_inf;
    let base = base?.log_d_inf;
    let d = lift.d as f64;
    let res_term = -resultant(lift)?.norm().ln() / (d * d);
    let rhs = base / d + res_term;
    let gap = (lhs - rhs).abs();
    Ok(PullbackReport {
        lhs,
        rhs,
        gap,
        implied_log_constant: lhs - base / d,
        resultant_log_constant: res_term,
        log_d_inf_k: base,
        pass: gap <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_parametric_set;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("1").unwrap(), c(1.0, 0.0));
        assert_eq!(parse_complex("-2.5").unwrap(), c(-2.5, 0.0));
        assert_eq!(parse_complex("1+2i").unwrap(), c(1.0, 2.0));
        assert_eq!(parse_complex("1-2i").unwrap(), c(1.0, -2.0));
        assert_eq!(parse_complex("2i").unwrap(), c(0.0, 2.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("1e-3+2e-1i").unwrap(), c(1e-3, 0.2));
        assert!(parse_complex("1+").is_err());
    }

    #[test]
    fn resultants() {
        for d in 1..=8 {
            assert_eq!(resultant(&MapLift::power(d).unwrap()).unwrap(), c(1.0, 0.0));
        }
        let f = MapLift::parse("d=2;F0=1,0,0;F1=0,0,1").unwrap();
        assert_eq!(resultant(&f.scaled(c(3.0, 0.0)).unwrap()).unwrap(), c(81.0, 0.0));
        let g = f.scaled(c(0.5, 0.5)).unwrap();
        let want = c(0.5, 0.5).powu(4);
        assert!((resultant(&g).unwrap() - want).norm() < 1e-14);
        assert_eq!(MapLift::parse("d=2;F0=0,1,0;F1=0,0,1"), Err(Error::DegenerateMap));
        assert_eq!(resultant(&MapLift::parse("d=2;F0=1,0,0;F1=0,0,2").unwrap()).unwrap(), c(4.0, 0.0));
    }

    #[test]
    fn squaring_green_is_log_plus() {
        let g = Arc::new(make_parametric_set(&SetKind::Circle { center: c(0.3, 0.0), r: 2.5 }, 64).unwrap());
        let f = MapLift::power(2).unwrap();
        let gw = green_weight(&f, &WeightFn::log_plus(), &g, 30, 1e-12).unwrap();
        assert_eq!(gw.iterations_m, 1);
        for (p, v) in g.points().iter().zip(gw.values.values()) {
            assert!((v - p.z().norm().ln().max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn preimages_of_circle() {
        let k = make_parametric_set(&SetKind::Circle { center: c(0.0, 0.0), r: 4.0 }, 32).unwrap();
        let pre = preimage_cloud(&MapLift::power(2).unwrap(), &k).unwrap();
        assert_eq!(pre.len(), 64);
        assert!(pre.points().iter().all(|p| (p.z().norm() - 2.0).abs() < 1e-12));
    }

    #[test]
    fn pullback_weight_of_log_plus() {
        let f = MapLift::power(2).unwrap();
        let w = f.pullback_weight(&WeightFn::log_plus());
        for z in [c(0.5, 0.1), c(3.0, -1.0), c(0.0, 0.0)] {
            assert!((w.eval(&Point::new1(z)) - z.norm().ln().max(0.0)).abs() < 1e-12);
        }
    }
}
