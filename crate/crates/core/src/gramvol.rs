//! Gram determinants, ℒ_k differences and L² norms of determinant sections.
//!
//! The log-volume of the L²(μ, kφ) unit ball of degree-k sections is, up to
//! a constant that cancels in differences, `−½ log det G(μ, kφ)` with `G` the
//! Gram matrix of the monomials. [`orthonormalize`] reports that
//! log-determinant (computed stably from the pivoted QR factor), so
//!
//! ```text
//! ℒ_k(μ₁,φ₁) − ℒ_k(μ₂,φ₂) = −(Λ₁ − Λ₂) / (2kN_k),   Λ = log det G.
//! ```
//!
//! Equivalently, with `H` the Gram matrix of an orthonormal basis of the
//! second pair measured in the first, the difference is
//! `−log det H / (2kN_k)`; [`l_delta_via_gram`] computes that form directly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::domain::{DiscreteMeasure, WeightFn};
use crate::error::{Error, Result};
use crate::fekete::SectionReference;
use crate::linalg::{logdet_hermitian, CMatrix, Precision, PrecisionPolicy};
use crate::polyspace::{orthonormalize, OrthonormalBasis, PolyBasis};

/// `ℒ_k(μ₁,φ₁) − ℒ_k(μ₂,φ₂)` with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LDelta {
    pub value: f64,
    pub k: usize,
    pub n_k: usize,
    /// Worst condition estimate of the two factorizations.
    pub cond: f64,
    pub prec: Precision,
}

/// `H_ij = Σ_x m(x) s_i(x) conj(s_j(x)) e^{−2kφ(x)}` for the sections of
/// `onb` against a target weighted measure.
pub fn gram_matrix(onb: &OrthonormalBasis, target: &DiscreteMeasure, weight: &WeightFn, k: usize) -> Result<CMatrix> {
    if target.dim() != onb.basis().dim() {
        return Err(Error::param("measure and basis dimensions differ"));
    }
    let phi = weight.eval_grid(target.support())?;
    let n = onb.len();
    let kf = k as f64;
    // scaled rows √m e^{−kφ} s(x)
    let rows: Vec<Vec<Complex64>> = target
        .points()
        .par_iter()
        .zip(target.masses().par_iter())
        .zip(phi.par_iter())
        .filter(|((_, m), _)| **m > 0.0)
        .map(|((p, m), f)| {
            let (v, l) = onb.sections_scaled(p);
            let s = (0.5 * m.ln() + l - kf * f).exp();
            v.into_iter().map(|z| z * s).collect()
        })
        .collect();
    let entries: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals: Vec<Complex64> = entries
        .par_iter()
        .map(|&(i, j)| {
            let re = crate::linalg::compensated_sum(rows.iter().map(|r| (r[i] * r[j].conj()).re));
            let im = crate::linalg::compensated_sum(rows.iter().map(|r| (r[i] * r[j].conj()).im));
            Complex64::new(re, im)
        })
        .collect();
    let mut h = CMatrix::zeros(n, n);
    for (&(i, j), v) in entries.iter().zip(vals) {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Evaluation(format!("Gram entry ({i}, {j}) is not finite")));
        }
        h[(i, j)] = v;
        h[(j, i)] = v.conj();
    }
    Ok(h)
}

/// Orthonormal basis for a weighted measure in the default family of its
/// support.
pub fn default_onb(mu: &DiscreteMeasure, weight: &WeightFn, k: usize) -> Result<OrthonormalBasis> {
    let basis = PolyBasis::for_set(mu.support().kind(), mu.support(), k)?;
    orthonormalize(&basis, mu, weight, k)
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::param("ℒ_k differences need k ≥ 1"))
    } else {
        Ok(())
    }
}

/// `ℒ_k(μ₁,φ₁) − ℒ_k(μ₂,φ₂)`.
pub fn l_delta(mu1: &DiscreteMeasure, phi1: &WeightFn, mu2: &DiscreteMeasure, phi2: &WeightFn, k: usize) -> Result<LDelta> {
    check_k(k)?;
    let a = default_onb(mu1, phi1, k)?;
    let b = default_onb(mu2, phi2, k)?;
    Ok(l_delta_from(&a, &b))
}

/// ℒ_k difference between two already orthonormalized pairs of equal degree.
pub fn l_delta_from(a: &OrthonormalBasis, b: &OrthonormalBasis) -> LDelta {
    let n = a.len();
    let k = a.k();
    LDelta {
        value: -(a.log_gram_monomial() - b.log_gram_monomial()) / (2.0 * k as f64 * n as f64),
        k,
        n_k: n,
        cond: a.condition_estimate().max(b.condition_estimate()),
        prec: a.precision().max(b.precision()),
    }
}

/// Same quantity through the Gram matrix of an orthonormal basis of
/// (μ₂, φ₂) measured in L²(μ₁, φ₁).
pub fn l_delta_via_gram(
    mu1: &DiscreteMeasure,
    phi1: &WeightFn,
    mu2: &DiscreteMeasure,
    phi2: &WeightFn,
    k: usize,
) -> Result<LDelta> {
    check_k(k)?;
    let onb = default_onb(mu2, phi2, k)?;
    let h = gram_matrix(&onb, mu1, phi1, k)?;
    let (ld, prec) = logdet_hermitian(&h, PrecisionPolicy::global()).map_err(|e| match e {
        Error::DegenerateSupport { column } => Error::DegenerateSupport { column },
        other => other,
    })?;
    let n = onb.len();
    Ok(LDelta {
        value: -ld / (2.0 * k as f64 * n as f64),
        k,
        n_k: n,
        cond: onb.condition_estimate(),
        prec: prec.max(onb.precision()),
    })
}

/// `log N!` through the log-gamma function.
pub fn log_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `log ‖det S‖_{L²(μ, kφ)}` where `S` is the orthonormal basis `reference`
/// of degree k: `½(log N_k! + log det H)` with `H` the Gram matrix of
/// `reference` in L²(μ, kφ).
pub fn det_section_l2_norm(reference: &OrthonormalBasis, mu: &DiscreteMeasure, weight: &WeightFn) -> Result<f64> {
    let k = reference.k();
    let other = default_onb(mu, weight, k)?;
    Ok(det_section_l2_norm_from(reference, &other))
}

pub fn det_section_l2_norm_from(reference: &OrthonormalBasis, other: &OrthonormalBasis) -> f64 {
    0.5 * (log_factorial(reference.len()) + other.log_gram_monomial() - reference.log_gram_monomial())
}

/// Same with the reference given only through its monomial log-Gram.
pub fn det_section_l2_norm_ref(reference: &SectionReference, other: &OrthonormalBasis) -> f64 {
    0.5 * (log_factorial(reference.n_k()) + other.log_gram_monomial() - reference.log_gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{arcsine_measure, haar_measure, make_parametric_set, SetKind};
    use std::sync::Arc;

    fn haar(r: f64, count: usize) -> DiscreteMeasure {
        let g = make_parametric_set(&SetKind::Circle { center: Complex64::new(0.0, 0.0), r }, count).unwrap();
        haar_measure(&Arc::new(g)).unwrap()
    }

    #[test]
    fn self_gram_is_identity() {
        let mu = arcsine_measure(50).unwrap();
        let w = WeightFn::parse("poly:0,0.3").unwrap();
        let onb = default_onb(&mu, &w, 10).unwrap();
        let h = gram_matrix(&onb, &mu, &w, 10).unwrap();
        assert!(h.max_abs_diff(&CMatrix::identity(11)) < 1e-8);
        let h = gram_matrix(&onb, &mu, &w.shifted(0.1), 10).unwrap();
        let mut want = CMatrix::identity(11);
        for i in 0..11 {
            want[(i, i)] = Complex64::new((-2.0 * 10.0 * 0.1f64).exp(), 0.0);
        }
        assert!(h.max_abs_diff(&want) < 1e-8);
    }

    #[test]
    fn circle_onb_against_arcsine() {
        let onb = default_onb(&haar(1.0, 16), &WeightFn::zero(), 1).unwrap();
        let h = gram_matrix(&onb, &arcsine_measure(16).unwrap(), &WeightFn::zero(), 1).unwrap();
        assert!((h[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((h[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!(h[(0, 1)].norm() < 1e-12);
        // N = 2, Gram diag(1, ½): ½(log 2 + log ½) = 0
        let v = det_section_l2_norm(&onb, &arcsine_measure(16).unwrap(), &WeightFn::zero()).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn identity_scaling_and_antisymmetry() {
        let mu = haar(1.0, 40);
        let w = WeightFn::parse("poly:0,0.3").unwrap();
        assert!(l_delta(&mu, &w, &mu, &w, 6).unwrap().value.abs() < 1e-10);
        for c in [-1.0, 0.5, 3.0] {
            let d = l_delta(&mu, &w.shifted(c), &mu, &w, 6).unwrap();
            assert!((d.value - c).abs() < 1e-8);
        }
        let a = arcsine_measure(40).unwrap();
        let x = l_delta(&a, &WeightFn::zero(), &mu, &w, 6).unwrap().value;
        let y = l_delta(&mu, &w, &a, &WeightFn::zero(), 6).unwrap().value;
        assert!((x + y).abs() < 1e-10);
    }

    #[test]
    fn gram_route_agrees() {
        let a = arcsine_measure(60).unwrap();
        let mu = haar(1.0, 60);
        let w = WeightFn::builtin("re2").unwrap();
        for k in [1, 4, 10] {
            let x = l_delta(&a, &w, &mu, &WeightFn::zero(), k).unwrap().value;
            let y = l_delta_via_gram(&a, &w, &mu, &WeightFn::zero(), k).unwrap().value;
            assert!((x - y).abs() < 1e-8, "k={k}: {x} vs {y}");
        }
    }

    #[test]
    fn self_det_norm() {
        let mu = haar(1.0, 80);
        for k in [1, 5, 20, 32] {
            let onb = default_onb(&mu, &WeightFn::zero(), k).unwrap();
            let v = det_section_l2_norm(&onb, &mu, &WeightFn::zero()).unwrap();
            assert!((v - 0.5 * log_factorial(k + 1)).abs() < 1e-8);
            let s = det_section_l2_norm(&onb, &mu, &WeightFn::constant(0.25)).unwrap();
            assert!((v - s - k as f64 * (k + 1) as f64 * 0.25).abs() < 1e-8);
        }
    }
}
