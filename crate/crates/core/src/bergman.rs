//! Bergman distortion functions and Bergman measures.
//!
//! For an orthonormal basis `(s_i)` of L²(μ, kφ),
//! `ρ(μ, kφ)(x) = Σ_i |s_i(x)|² e^{−2kφ(x)}` is the squared norm of point
//! evaluation, `∫ ρ dμ = N_k`, and `β = N_k⁻¹ ρ μ` is a probability measure.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{CompactGrid, DiscreteMeasure, Point, WeightFn};
use crate::error::{Error, Result};
use crate::extrapolate::extrapolate;
use crate::fekete::check_schedule;
use crate::gramvol::default_onb;
use crate::polyspace::OrthonormalBasis;

/// Verdict threshold on the extrapolated `(1/2k) log sup_K ρ`.
pub const BM_LIMIT_TOL: f64 = 0.01;

#[derive(Clone, Debug, Serialize)]
pub struct BergmanDensity {
    pub k: usize,
    pub n_k: usize,
    /// ρ at the support points of μ.
    pub values: Vec<f64>,
    /// ρ at the query points, if any.
    pub query_values: Vec<f64>,
    /// `|∫ ρ dμ − N_k| / N_k`.
    pub normalization_residual: f64,
}

fn density_at(onb: &OrthonormalBasis, weight: &WeightFn, p: &Point) -> f64 {
    let k = onb.k() as f64;
    (onb.log_sum_sq(p) - 2.0 * k * weight.eval(p)).exp()
}

fn densities(onb: &OrthonormalBasis, weight: &WeightFn, pts: &[Point]) -> Result<Vec<f64>> {
    let v: Vec<f64> = pts.par_iter().map(|p| density_at(onb, weight, p)).collect();
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Evaluation(format!("Bergman density is not finite at point {i}")));
    }
    Ok(v)
}

/// ρ(μ, kφ) on supp μ and on optional query points.
pub fn bergman_density(mu: &DiscreteMeasure, phi: &WeightFn, k: usize, query: Option<&CompactGrid>) -> Result<BergmanDensity> {
    let onb = default_onb(mu, phi, k)?;
    let values = densities(&onb, phi, mu.points())?;
    let query_values = match query {
        Some(q) => densities(&onb, phi, q.points())?,
        None => vec![],
    };
    let n = onb.len();
    let total = crate::linalg::compensated_sum(values.iter().zip(mu.masses()).map(|(r, m)| r * m));
    Ok(BergmanDensity {
        k,
        n_k: n,
        values,
        query_values,
        normalization_residual: (total - n as f64).abs() / n as f64,
    })
}

/// β(μ, kφ) = N_k⁻¹ ρ μ.
pub fn bergman_measure(mu: &DiscreteMeasure, phi: &WeightFn, k: usize) -> Result<DiscreteMeasure> {
    let rho = bergman_density(mu, phi, k, None)?;
    let n = rho.n_k as f64;
    let masses = rho.values.iter().zip(mu.masses()).map(|(r, m)| r * m / n).collect();
    DiscreteMeasure::new(mu.support_arc().clone(), masses)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub k: usize,
    pub sup_rho: f64,
    /// `(1/2k) log sup_K ρ`.
    pub rate: f64,
}

/// Numerical evidence for the Bernstein–Markov property; a positive
/// extrapolated rate refutes it, a vanishing one does not prove it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    pub limit: f64,
    pub bm_plausible: bool,
}

/// Tabulates `(1/2k) log sup_K ρ(μ, kφ)` and extrapolates it in k.
pub fn bm_growth_diagnostic(k_set: &CompactGrid, mu: &DiscreteMeasure, phi: &WeightFn, schedule: &[usize]) -> Result<GrowthReport> {
    check_schedule(schedule)?;
    let rows = schedule
        .iter()
        .map(|&k| {
            let onb = default_onb(mu, phi, k)?;
            let sup = k_set
                .points()
                .par_iter()
                .chain(mu.points().par_iter())
                .map(|p| onb.log_sum_sq(p) - 2.0 * k as f64 * phi.eval(p))
                .reduce(|| f64::NEG_INFINITY, f64::max);
            Ok(GrowthRow {
                k,
                sup_rho: sup.exp(),
                rate: sup / (2.0 * k as f64),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = extrapolate(schedule, &rows.iter().map(|r| r.rate).collect::<Vec<_>>())?;
    Ok(GrowthReport {
        limit: fit.limit,
        bm_plausible: fit.limit <= BM_LIMIT_TOL,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentGap {
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakRow {
    pub k: usize,
    pub max_gap: f64,
    pub gaps: Vec<MomentGap>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakConvergenceReport {
    pub rows: Vec<WeakRow>,
    /// Largest moment gap at the last k.
    pub final_gap: f64,
}

/// Multi-indices (a, b) with |a| + |b| ≤ order.
pub fn moment_indices(dim: usize, order: u32) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut exps: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..2 * dim {
        exps = exps
            .into_iter()
            .flat_map(|e| (0..=order).map(move |j| {
                let mut f = e.clone();
                f.push(j);
                f
            }))
            .filter(|e| e.iter().sum::<u32>() <= order)
            .collect();
    }
    exps.into_iter().map(|e| (e[..dim].to_vec(), e[dim..].to_vec())).collect()
}

/// Compares `∫ z^a z̄^b` of each β_k with the target for |a| + |b| ≤ order.
pub fn weak_convergence_check(betas: &[(usize, DiscreteMeasure)], target: &DiscreteMeasure, order: u32) -> Result<WeakConvergenceReport> {
    if betas.is_empty() {
        return Err(Error::param("no measures to compare"));
    }
    let dim = target.dim();
    if betas.iter().any(|(_, b)| b.dim() != dim) {
        return Err(Error::param("measures live in different dimensions"));
    }
    let idx = moment_indices(dim, order);
    let want: Vec<_> = idx.iter().map(|(a, b)| target.moment(a, b)).collect();
    let rows: Vec<WeakRow> = betas
        .iter()
        .map(|(k, beta)| {
            let gaps: Vec<MomentGap> = idx
                .iter()
                .zip(&want)
                .map(|((a, b), w)| MomentGap {
                    a: a.clone(),
                    b: b.clone(),
                    gap: (beta.moment(a, b) - w).norm(),
                })
                .collect();
            WeakRow {
                k: *k,
                max_gap: gaps.iter().map(|g| g.gap).fold(0.0, f64::max),
                gaps,
            }
        })
        .collect();
    Ok(WeakConvergenceReport {
        final_gap: rows.last().unwrap().max_gap,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{arcsine_measure, haar_measure, make_parametric_set, SetKind};
    use num_complex::Complex64;
    use std::sync::Arc;

    fn circle(count: usize) -> Arc<CompactGrid> {
        Arc::new(make_parametric_set(&SetKind::Circle { center: Complex64::new(0.0, 0.0), r: 1.0 }, count).unwrap())
    }

    #[test]
    fn haar_density_is_flat() {
        let mu = haar_measure(&circle(64)).unwrap();
        for k in [0, 1, 7, 20] {
            let rho = bergman_density(&mu, &WeightFn::zero(), k, None).unwrap();
            assert!(rho.values.iter().all(|r| (r - (k + 1) as f64).abs() < 1e-10));
            let beta = bergman_measure(&mu, &WeightFn::zero(), k).unwrap();
            assert!(beta.masses().iter().zip(mu.masses()).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn normalization_and_shift() {
        let mu = arcsine_measure(40).unwrap();
        let w = WeightFn::builtin("re2").unwrap();
        let a = bergman_density(&mu, &w, 9, None).unwrap();
        assert!(a.normalization_residual < 1e-8);
        let b = bergman_density(&mu, &w.shifted(0.4), 9, None).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn growth_verdicts() {
        let k = circle(96);
        let mu = haar_measure(&k).unwrap();
        let r = bm_growth_diagnostic(&k, &mu, &WeightFn::zero(), &[4, 8, 12, 16]).unwrap();
        assert!(r.bm_plausible, "{r:?}");
        let half = mu.restrict(|p| p.z().im >= 0.0).unwrap();
        let r = bm_growth_diagnostic(&k, &half, &WeightFn::zero(), &[4, 8, 12, 16]).unwrap();
        assert!(!r.bm_plausible, "{r:?}");
    }

    #[test]
    fn moment_index_count() {
        assert_eq!(moment_indices(1, 4).len(), 15);
        assert_eq!(moment_indices(2, 1).len(), 5);
    }
}
