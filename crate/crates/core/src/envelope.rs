//! Equilibrium weights `P_Kφ`.
//!
//! The generic estimator is the Bergman (Christoffel) envelope
//!
//! ```text
//! B_k(x) = (1/2k) log Σ_i |s_i(x)|²,
//! ```
//!
//! with `(s_i)` orthonormal in L²(μ_K, kφ). On K it overshoots φ by at most
//! `(1/2k) log sup_K ρ`, which is sub-exponential exactly when μ_K has the
//! Bernstein–Markov property; off K it converges to `P_Kφ`. Closed forms are
//! available for intervals, circles, the unit torus and their products with
//! constant weights.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{arcsine_measure_on, haar_measure, make_parametric_set, CompactGrid, DiscreteMeasure, GridFunction, GrowthClass, Point, SetKind, WeightFn};
use crate::dynamics::{pullback_measure, MapLift};
use crate::error::{Error, Result};
use crate::gramvol::default_onb;
use crate::polyspace::OrthonormalBasis;

/// Defect above which a Bergman envelope is flagged as not converged.
pub const DEFECT_TOL: f64 = 0.05;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMethod {
    Bergman,
    OracleInterval,
    OracleDisc,
    OracleTorus,
    Product,
}

/// Closed-form envelope of a model set with the zero weight.
#[derive(Clone, Debug, PartialEq)]
enum Oracle {
    Interval { a: f64, b: f64 },
    Circle { center: Complex64, r: f64 },
    Torus,
    Product(Box<Oracle>, Box<Oracle>),
}

impl Oracle {
    fn from_kind(kind: &SetKind) -> Result<Self> {
        Ok(match kind {
            SetKind::Interval { a, b } => Oracle::Interval { a: *a, b: *b },
            SetKind::Circle { .. } | SetKind::DiscBoundary { .. } => {
                let (center, r) = kind.as_circle().unwrap();
                Oracle::Circle { center, r }
            }
            SetKind::Torus { .. } => Oracle::Torus,
            SetKind::Product(a, b) => Oracle::Product(Box::new(Oracle::from_kind(a)?), Box::new(Oracle::from_kind(b)?)),
            SetKind::Custom => return Err(Error::OracleUnavailable("custom sets have no closed-form envelope".into())),
        })
    }

    fn method(&self) -> EnvelopeMethod {
        match self {
            Oracle::Interval { .. } => EnvelopeMethod::OracleInterval,
            Oracle::Circle { .. } => EnvelopeMethod::OracleDisc,
            Oracle::Torus => EnvelopeMethod::OracleTorus,
            Oracle::Product(..) => EnvelopeMethod::Product,
        }
    }

    fn eval1(&self, z: Complex64) -> f64 {
        match self {
            Oracle::Interval { a, b } => interval_green(z, *a, *b),
            Oracle::Circle { center, r } => ((z - center).norm() / r).ln().max(0.0),
            Oracle::Torus => z.norm().ln().max(0.0),
            Oracle::Product(..) => unreachable!("products are two-dimensional"),
        }
    }

    fn eval(&self, p: &Point) -> f64 {
        match self {
            Oracle::Torus => p.coords().iter().map(|z| z.norm().ln().max(0.0)).fold(0.0, f64::max),
            Oracle::Product(a, b) => a.eval1(p.coord(0)).max(b.eval1(p.coord(1))),
            _ => self.eval1(p.z()),
        }
    }
}

/// Green function of `ℂ \ [a, b]` with pole at infinity.
pub fn interval_green(z: Complex64, a: f64, b: f64) -> f64 {
    let w = (2.0 * z - (a + b)) / (b - a);
    let one = Complex64::new(1.0, 0.0);
    let s = (w - one).sqrt() * (w + one).sqrt();
    (w + s).norm().ln().abs()
}

/// An equilibrium-weight estimate that can be evaluated anywhere.
#[derive(Clone, Debug)]
pub enum Envelope {
    Bergman { onb: Arc<OrthonormalBasis>, shift: f64 },
    Oracle { oracle: OracleHandle, c: f64 },
}

/// Opaque closed-form envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleHandle(Oracle);

impl Envelope {
    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            Envelope::Bergman { onb, shift } => onb.log_sum_sq(p) / (2.0 * onb.k().max(1) as f64) + shift,
            Envelope::Oracle { oracle, c } => oracle.0.eval(p) + c,
        }
    }

    pub fn eval_points(&self, pts: &[Point]) -> Result<Vec<f64>> {
        let v: Vec<f64> = pts.par_iter().map(|p| self.eval(p)).collect();
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Evaluation(format!("envelope is not finite at point {i}")));
        }
        Ok(v)
    }

    /// The envelope as a weight of logarithmic growth.
    pub fn as_weight(&self) -> WeightFn {
        let env = self.clone();
        WeightFn::new("envelope", GrowthClass::Logarithmic, move |p| env.eval(p))
    }
}

/// Approximate `P_Kφ` sampled on an evaluation grid.
#[derive(Clone, Debug, Serialize)]
pub struct ExtremalResult {
    #[serde(skip)]
    pub envelope: Envelope,
    #[serde(skip)]
    pub grid: Arc<CompactGrid>,
    pub values: Vec<f64>,
    pub k_used: usize,
    pub method: EnvelopeMethod,
    /// `max_K (P − φ)`.
    pub sup_defect: f64,
    pub warning: Option<String>,
}

impl ExtremalResult {
    pub fn grid_function(&self) -> GridFunction {
        GridFunction::new(self.grid.clone(), self.values.clone()).expect("values match the grid")
    }

    pub fn as_weight(&self) -> WeightFn {
        self.envelope.as_weight()
    }

    pub fn growth_class(&self) -> GrowthClass {
        GrowthClass::Logarithmic
    }
}

fn sup_defect(env: &Envelope, k_set: &CompactGrid, phi: &WeightFn) -> Result<f64> {
    let p = env.eval_points(k_set.points())?;
    let f = phi.eval_grid(k_set)?;
    Ok(p.iter().zip(&f).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max))
}

/// Bergman envelope of degree k from `μ_K`. With `centered`, the known
/// upward bias `(log N_k)/(2k)` on K is subtracted.
pub fn extremal_bergman(
    k_set: &CompactGrid,
    phi: &WeightFn,
    mu: &DiscreteMeasure,
    k: usize,
    eval: &Arc<CompactGrid>,
    centered: bool,
) -> Result<ExtremalResult> {
    if k == 0 {
        return Err(Error::param("Bergman envelopes need k ≥ 1"));
    }
    let onb = default_onb(mu, phi, k)?;
    let shift = if centered { -(onb.len() as f64).ln() / (2.0 * k as f64) } else { 0.0 };
    let env = Envelope::Bergman { onb: Arc::new(onb), shift };
    let values = env.eval_points(eval.points())?;
    let defect = sup_defect(&env, k_set, phi)?;
    let warning = (defect > DEFECT_TOL).then(|| format!("envelope not converged: sup defect {defect:.4} at k = {k}"));
    Ok(ExtremalResult {
        envelope: env,
        grid: eval.clone(),
        values,
        k_used: k,
        method: EnvelopeMethod::Bergman,
        sup_defect: defect,
        warning,
    })
}

/// Closed-form envelope of a model set. Only constant weights are
/// supported; anything else is [`Error::OracleUnavailable`].
pub fn extremal_oracle(kind: &SetKind, phi: &WeightFn, eval: &Arc<CompactGrid>) -> Result<ExtremalResult> {
    let c = phi
        .constant_value()
        .ok_or_else(|| Error::OracleUnavailable(format!("no closed form for weight '{}'", phi.label())))?;
    let oracle = Oracle::from_kind(kind)?;
    if kind.dim() != eval.dim() {
        return Err(Error::param("evaluation grid dimension does not match the set"));
    }
    let method = oracle.method();
    let env = Envelope::Oracle { oracle: OracleHandle(oracle), c };
    let values = env.eval_points(eval.points())?;
    let count = if kind.dim() == 1 { 256 } else { 24 };
    let sample = make_parametric_set(kind, count)?;
    let defect = sup_defect(&env, &sample, phi)?;
    Ok(ExtremalResult {
        envelope: env,
        grid: eval.clone(),
        values,
        k_used: 0,
        method,
        sup_defect: defect,
        warning: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub sup_defect: f64,
    /// Fraction of points of K where `|P − φ| < contact_tol`.
    pub contact_fraction: f64,
    pub contact_tol: f64,
    pub min_contact: f64,
    pub pass: bool,
}

/// Checks that the envelope sits on φ over K.
pub fn regularity_check(
    result: &ExtremalResult,
    k_set: &CompactGrid,
    phi: &WeightFn,
    contact_tol: f64,
    min_contact: f64,
) -> Result<RegularityReport> {
    let p = result.envelope.eval_points(k_set.points())?;
    let f = phi.eval_grid(k_set)?;
    let gaps: Vec<f64> = p.iter().zip(&f).map(|(a, b)| a - b).collect();
    let defect = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let touching = gaps.iter().filter(|g| g.abs() < contact_tol).count();
    let frac = touching as f64 / gaps.len().max(1) as f64;
    Ok(RegularityReport {
        sup_defect: defect,
        contact_fraction: frac,
        contact_tol,
        min_contact,
        pass: defect <= DEFECT_TOL && frac >= min_contact,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PullbackEnvelopeReport {
    pub k: usize,
    /// `max |P_{f⁻¹K}(d⁻¹f*φ) − d⁻¹f*P_Kφ|` over the evaluation grid.
    pub discrepancy: f64,
    pub preimage_points: usize,
}

/// Compares the envelope of the pulled-back pair with the pull-back of the
/// envelope, both by the Bergman estimator at degree k.
pub fn pullback_envelope_check(
    lift: &MapLift,
    mu_k: &DiscreteMeasure,
    phi: &WeightFn,
    k: usize,
    eval: &Arc<CompactGrid>,
) -> Result<PullbackEnvelopeReport> {
    let pulled_mu = pullback_measure(lift, mu_k)?;
    let pulled_phi = lift.pullback_weight(phi);
    let lhs = extremal_bergman(pulled_mu.support(), &pulled_phi, &pulled_mu, k, eval, false)?;
    let base = extremal_bergman(mu_k.support(), phi, mu_k, k, eval, false)?;
    let rhs = lift.pullback_weight(&base.as_weight()).eval_grid(eval)?;
    let discrepancy = lhs.values.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(PullbackEnvelopeReport {
        k,
        discrepancy,
        preimage_points: pulled_mu.len(),
    })
}

/// How an equilibrium weight is obtained.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeSolver {
    Oracle,
    Bergman { k: usize },
    /// Oracle when one exists, Bergman at degree k otherwise.
    Auto { k: usize },
}

/// A measure with the Bernstein–Markov property on a model cloud: Haar on
/// circles and tori, arcsine on intervals, uniform counting measure on
/// anything else (the BM property is then the caller's assumption).
pub fn default_bm_measure(k_set: &Arc<CompactGrid>) -> Result<DiscreteMeasure> {
    match k_set.kind() {
        SetKind::Interval { a, b } => arcsine_measure_on(*a, *b, k_set.len()),
        SetKind::Circle { .. } | SetKind::DiscBoundary { .. } | SetKind::Torus { .. } => haar_measure(k_set),
        SetKind::Product(a, b) if a.as_circle().is_some() && b.as_circle().is_some() => haar_measure(k_set),
        _ => Ok(DiscreteMeasure::uniform(k_set.clone())),
    }
}

/// Equilibrium weight of (K, φ), evaluated on K itself.
pub fn solve_envelope(k_set: &Arc<CompactGrid>, phi: &WeightFn, solver: EnvelopeSolver) -> Result<ExtremalResult> {
    let bergman = |k| {
        let mu = default_bm_measure(k_set)?;
        extremal_bergman(k_set, phi, &mu, k, k_set, false)
    };
    match solver {
        EnvelopeSolver::Oracle => extremal_oracle(k_set.kind(), phi, k_set),
        EnvelopeSolver::Bergman { k } => bergman(k),
        EnvelopeSolver::Auto { k } => match extremal_oracle(k_set.kind(), phi, k_set) {
            Err(Error::OracleUnavailable(_)) => bergman(k),
            other => other,
        },
    }
}

/// Points on the circle `|z − center| = r`, a convenient evaluation grid.
pub fn ring(center: Complex64, r: f64, count: usize) -> Result<Arc<CompactGrid>> {
    Ok(Arc::new(make_parametric_set(&SetKind::Circle { center, r }, count)?))
}
