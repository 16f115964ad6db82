use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{CompactGrid, Point};
use crate::error::{Error, Result};

/// Asymptotic behaviour of a weight.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    /// Only meaningful on (a neighbourhood of) the compact set.
    BoundedSupport,
    /// `v − log⁺|z|` stays bounded, as for psh weights with minimal
    /// singularities.
    Logarithmic,
}

type Eval = dyn Fn(&Point) -> f64 + Send + Sync;

/// A continuous weight, seen as a real function on ℂⁿ.
#[derive(Clone)]
pub struct WeightFn {
    f: Arc<Eval>,
    growth: GrowthClass,
    label: String,
    constant: Option<f64>,
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFn")
            .field("label", &self.label)
            .field("growth", &self.growth)
            .finish()
    }
}

/// Names accepted after `expr:`.
pub const BUILTINS: &[&str] = &["re", "im", "re2", "im2", "abs2", "log_plus", "log_max"];

fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

impl WeightFn {
    pub fn new<F>(label: impl Into<String>, growth: GrowthClass, f: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        WeightFn {
            f: Arc::new(f),
            growth,
            label: label.into(),
            constant: None,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        let label = if c == 0.0 { "zero".to_string() } else { format!("const:{c}") };
        WeightFn {
            f: Arc::new(move |_| c),
            growth: GrowthClass::BoundedSupport,
            label,
            constant: Some(c),
        }
    }

    /// `log max(1, |z_1|, …, |z_n|)`, the equilibrium weight of the unit torus.
    pub fn log_plus() -> Self {
        WeightFn::new("expr:log_plus", GrowthClass::Logarithmic, |p| {
            p.coords().iter().map(|z| log_plus(z.norm())).fold(0.0, f64::max)
        })
    }

    /// `v(z) = Σ c_j |z|^{2j}` with |z| the Euclidean norm.
    pub fn poly(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("poly weight needs finite coefficients"));
        }
        let label = format!(
            "poly:{}",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        );
        if coeffs[1..].iter().all(|c| *c == 0.0) {
            let mut w = WeightFn::constant(coeffs[0]);
            w.label = label;
            return Ok(w);
        }
        Ok(WeightFn::new(label, GrowthClass::BoundedSupport, move |p| {
            let s = p.norm_sqr();
            coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
        }))
    }

    /// Parses `zero`, `poly:c0,c1,...`, `log_z0` or `expr:<builtin>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "zero" {
            return Ok(WeightFn::zero());
        }
        if spec == "log_z0" {
            // the reference weight log|Z₀| is the zero function in this chart
            let mut w = WeightFn::zero();
            w.label = "log_z0".into();
            return Ok(w);
        }
        if let Some(rest) = spec.strip_prefix("poly:") {
            let coeffs = rest
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::param(format!("bad poly coefficient '{s}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            return WeightFn::poly(coeffs);
        }
        if let Some(id) = spec.strip_prefix("expr:") {
            return WeightFn::builtin(id.trim());
        }
        Err(Error::param(format!("unknown weight spec '{spec}'")))
    }

    pub fn builtin(id: &str) -> Result<Self> {
        let label = format!("expr:{id}");
        let b = GrowthClass::BoundedSupport;
        let w = match id {
            "re" => WeightFn::new(label, b, |p| p.z().re),
            "im" => WeightFn::new(label, b, |p| p.z().im),
            "re2" => WeightFn::new(label, b, |p| p.z().re * p.z().re),
            "im2" => WeightFn::new(label, b, |p| p.z().im * p.z().im),
            "abs2" => WeightFn::new(label, b, |p| p.norm_sqr()),
            "log_plus" => WeightFn::log_plus(),
            "log_max" => WeightFn::new(label, GrowthClass::Logarithmic, |p| {
                p.coords().iter().map(|z| z.norm()).fold(1.0, f64::max).ln()
            }),
            _ => {
                return Err(Error::param(format!(
                    "unknown builtin '{id}' (known: {})",
                    BUILTINS.join(", ")
                )))
            }
        };
        Ok(w)
    }

    #[inline]
    pub fn eval(&self, p: &Point) -> f64 {
        (self.f)(p)
    }

    /// Values on every grid point; non-finite values are an evaluation error.
    pub fn eval_grid(&self, grid: &CompactGrid) -> Result<Vec<f64>> {
        self.eval_points(grid.points())
    }

    pub fn eval_points(&self, pts: &[Point]) -> Result<Vec<f64>> {
        pts.iter()
            .enumerate()
            .map(|(i, p)| {
                let v = self.eval(p);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Evaluation(format!(
                        "weight '{}' is not finite at point {i}",
                        self.label
                    )))
                }
            })
            .collect()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn growth_class(&self) -> GrowthClass {
        self.growth
    }

    /// Value of a weight known to be constant.
    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    /// `self + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let f = self.f.clone();
        WeightFn {
            f: Arc::new(move |p| f(p) + c),
            growth: self.growth,
            label: format!("{}{:+}", self.label, c),
            constant: self.constant.map(|v| v + c),
        }
    }

    /// `self + t·u`.
    pub fn add_scaled(&self, u: &WeightFn, t: f64) -> Self {
        if t == 0.0 {
            return self.clone();
        }
        let (f, g) = (self.f.clone(), u.f.clone());
        let growth = if self.growth == GrowthClass::Logarithmic && u.growth == GrowthClass::BoundedSupport {
            GrowthClass::Logarithmic
        } else {
            GrowthClass::BoundedSupport
        };
        WeightFn {
            f: Arc::new(move |p| f(p) + t * g(p)),
            growth,
            label: format!("{}{:+}*{}", self.label, t, u.label),
            constant: match (self.constant, u.constant) {
                (Some(a), Some(b)) => Some(a + t * b),
                _ => None,
            },
        }
    }

    /// For logarithmic weights, checks numerically that `v − log⁺|z|` stays
    /// bounded on the annulus `r_in ≤ |z| ≤ r_out` (first coordinate, or the
    /// diagonal direction when n = 2). Returns the observed oscillation.
    pub fn check_growth(&self, dim: usize, r_in: f64, r_out: f64, bound: f64) -> Result<f64> {
        if self.growth != GrowthClass::Logarithmic {
            return Ok(0.0);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=16 {
            let r = r_in * (r_out / r_in).powf(i as f64 / 16.0);
            for j in 0..32 {
                let z = num_complex::Complex64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / 32.0);
                let p = if dim == 1 { Point::new1(z) } else { Point::new2(z, z * 0.5) };
                let d = self.eval(&p) - log_plus(p.coords().iter().map(|z| z.norm()).fold(0.0, f64::max));
                if !d.is_finite() {
                    return Err(Error::Evaluation(format!("weight '{}' not finite at |z| = {r}", self.label)));
                }
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        if hi - lo > bound {
            return Err(Error::Domain(format!(
                "weight '{}' deviates from logarithmic growth by {:.3e}",
                self.label,
                hi - lo
            )));
        }
        Ok(hi - lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn parses_specs() {
        let p = Point::new1(Complex64::new(2.0, 1.0));
        assert_eq!(WeightFn::parse("zero").unwrap().eval(&p), 0.0);
        assert_eq!(WeightFn::parse("log_z0").unwrap().eval(&p), 0.0);
        assert_eq!(WeightFn::parse("poly:1,0.5").unwrap().eval(&p), 1.0 + 0.5 * 5.0);
        assert_eq!(WeightFn::parse("expr:re2").unwrap().eval(&p), 4.0);
        assert!((WeightFn::parse("expr:log_plus").unwrap().eval(&p) - 5f64.sqrt().ln()).abs() < 1e-15);
        assert!(WeightFn::parse("expr:nope").is_err());
        assert!(WeightFn::parse("poly:1,x").is_err());
        assert!(WeightFn::parse("garbage").is_err());
    }

    #[test]
    fn constants_are_tracked() {
        let w = WeightFn::parse("poly:0.25").unwrap();
        assert_eq!(w.constant_value(), Some(0.25));
        assert_eq!(w.shifted(1.0).constant_value(), Some(1.25));
        assert_eq!(WeightFn::builtin("re").unwrap().constant_value(), None);
    }

    #[test]
    fn growth_check() {
        assert!(WeightFn::log_plus().check_growth(1, 2.0, 1e3, 1e-9).is_ok());
        let bad = WeightFn::new("2log", GrowthClass::Logarithmic, |p| 2.0 * p.z().norm().ln());
        assert!(bad.check_growth(1, 2.0, 1e3, 1.0).is_err());
    }
}
