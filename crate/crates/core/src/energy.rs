//! Monge–Ampère measures and energies.
//!
//! With `dd^c = (i/π)∂∂̄`, a function u on ℂ has `dd^c u = (1/2π) Δu dA`, so
//! `dd^c log|z − a| = δ_a` and every psh weight of logarithmic growth has
//! Monge–Ampère mass 1. Only energy *differences* are computed:
//!
//! ```text
//! ℰ(φ) − ℰ(ψ) = (1/(n+1)) Σ_j ∫ (φ − ψ) (dd^c φ)^j ∧ (dd^c ψ)^{n−j}.
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{arcsine_measure_on, make_parametric_set, CompactGrid, DiscreteMeasure, PlaneMesh, Point, SetKind, WeightFn};
use crate::envelope::{extremal_oracle, solve_envelope, Envelope, EnvelopeMethod, EnvelopeSolver};
use crate::error::{Error, Result};
use crate::extrapolate::extrapolate;
use crate::linalg::least_squares;

/// Largest accepted `|total mass − 1|` of a discrete Monge–Ampère measure.
pub const MASS_DEFECT_TOL: f64 = 0.02;
/// Largest accepted fraction of equilibrium mass away from K.
pub const LEAK_TOL: f64 = 0.02;
/// Laplacian masses below this are treated as round-off.
const MASS_FLOOR: f64 = 1e-13;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaSource {
    Laplacian1d,
    Oracle,
    Product,
}

/// A normalized Monge–Ampère measure.
#[derive(Clone, Debug, Serialize)]
pub struct MAMeasure {
    #[serde(skip)]
    pub measure: DiscreteMeasure,
    pub source: MaSource,
    /// `|total − 1|` before renormalization.
    pub mass_defect: f64,
    /// Total negative Laplacian mass discarded.
    pub clipped: f64,
    #[serde(skip)]
    nodes: Vec<usize>,
}

/// Discrete `dd^c P` from samples on a plane mesh: the positive part of the
/// five-point Laplacian, divided by 2π, times the cell area.
pub fn ma_measure_1d(mesh: &PlaneMesh, values: &[f64]) -> Result<MAMeasure> {
    if values.len() != mesh.len() {
        return Err(Error::param("mesh values have the wrong length"));
    }
    if mesh.nx < 3 || mesh.ny < 3 {
        return Err(Error::param("mesh needs at least 3×3 nodes"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("mesh value {i} is not finite")));
    }
    let v = |i: usize, j: usize| values[mesh.index(i, j)];
    let mut nodes = Vec::new();
    let mut masses = Vec::new();
    let mut clipped = 0.0;
    for i in 1..mesh.nx - 1 {
        for j in 1..mesh.ny - 1 {
            let lap = v(i + 1, j) + v(i - 1, j) + v(i, j + 1) + v(i, j - 1) - 4.0 * v(i, j);
            let m = lap / (2.0 * PI);
            if m > MASS_FLOOR {
                nodes.push(mesh.index(i, j));
                masses.push(m);
            } else if m < 0.0 {
                clipped -= m;
            }
        }
    }
    let total: f64 = masses.iter().sum();
    let defect = (total - 1.0).abs();
    if defect > MASS_DEFECT_TOL || masses.is_empty() {
        return Err(Error::Resolution { mass_defect: defect });
    }
    let pts = nodes
        .iter()
        .map(|&ix| Point::new1(mesh.node(ix / mesh.ny, ix % mesh.ny)))
        .collect();
    let grid = CompactGrid::new(1, pts, mesh.h / std::f64::consts::SQRT_2, SetKind::Custom)?;
    Ok(MAMeasure {
        measure: DiscreteMeasure::from_weights(Arc::new(grid), masses)?,
        source: MaSource::Laplacian1d,
        mass_defect: defect,
        clipped,
        nodes,
    })
}

/// Mesh resolution and margin for discrete Monge–Ampère measures.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshOptions {
    /// Mesh width; by default a fixed fraction of the box size, finer for
    /// closed-form envelopes than for Bergman ones.
    pub h: Option<f64>,
    /// Distance between K's bounding box and the mesh boundary (≥ 1).
    pub margin: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { h: None, margin: 1.0 }
    }
}

impl MeshOptions {
    pub fn with_h(h: f64) -> Self {
        MeshOptions { h: Some(h), margin: 1.0 }
    }

    fn mesh(&self, clouds: &[&CompactGrid], fine: bool) -> Result<PlaneMesh> {
        if self.margin < 1.0 {
            return Err(Error::param("mesh margin must be at least 1"));
        }
        let coarse = PlaneMesh::around(clouds, self.margin, 1.0)?;
        let span = (coarse.nx.max(coarse.ny)) as f64;
        let h = self.h.unwrap_or(span / if fine { 1500.0 } else { 400.0 });
        let mesh = PlaneMesh::around(clouds, self.margin, h)?;
        match clouds.iter().find_map(|c| match c.kind() {
            SetKind::Interval { a, b } => Some((*a, *b)),
            _ => None,
        }) {
            Some((a, b)) => Ok(staggered(&mesh, a, b)),
            None => Ok(mesh),
        }
    }
}

/// Shifts and slightly shrinks the mesh so that the endpoints of [a, b]
/// fall at cell centres while the real axis stays a mesh line; the
/// square-root singularities of the envelope at the endpoints then do not
/// sit on nodes, which removes most of the clipped Laplacian mass.
fn staggered(mesh: &PlaneMesh, a: f64, b: f64) -> PlaneMesh {
    let cells = ((b - a) / mesh.h).ceil().max(1.0);
    let h = (b - a) / cells;
    let x1 = mesh.x0 + mesh.h * (mesh.nx - 1) as f64;
    let left = ((a - mesh.x0) / h).ceil();
    let right = ((x1 - b) / h).ceil();
    let y1 = mesh.y0 + mesh.h * (mesh.ny - 1) as f64;
    let j0 = (mesh.y0 / h).floor();
    let j1 = (y1 / h).ceil();
    PlaneMesh {
        x0: a - h * (left + 0.5),
        y0: j0 * h,
        h,
        nx: (left + cells + right + 1.0) as usize,
        ny: (j1 - j0 + 1.0) as usize,
    }
}

fn uses_oracle(k_set: &CompactGrid, phi: &WeightFn, solver: EnvelopeSolver) -> bool {
    match solver {
        EnvelopeSolver::Oracle => true,
        EnvelopeSolver::Bergman { .. } => false,
        EnvelopeSolver::Auto { .. } => phi.constant_value().is_some() && *k_set.kind() != SetKind::Custom,
    }
}

/// Distance from z to K, exact for intervals and circles.
fn set_distance(k_set: &CompactGrid, z: Complex64) -> f64 {
    match k_set.kind() {
        SetKind::Interval { a, b } => {
            let x = z.re.clamp(*a, *b);
            (z - Complex64::new(x, 0.0)).norm()
        }
        kind if kind.as_circle().is_some() => {
            let (c, r) = kind.as_circle().unwrap();
            ((z - c).norm() - r).abs()
        }
        _ => k_set.distance_to(&Point::new1(z)),
    }
}

/// `μ_eq(K, φ) = dd^c P_Kφ` with support diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumMeasure {
    pub ma: MAMeasure,
    #[serde(skip)]
    pub envelope: Envelope,
    pub mesh: PlaneMesh,
    #[serde(skip)]
    mesh_values: Vec<f64>,
    pub method: EnvelopeMethod,
    pub k_used: usize,
    pub sup_defect: f64,
    /// Mass farther than `support_radius` from K.
    pub leak: f64,
    pub support_radius: f64,
    /// `∫ (P − φ) dμ_eq`, zero in the limit.
    pub contact: f64,
    pub warning: Option<String>,
}

impl EquilibriumMeasure {
    pub fn measure(&self) -> &DiscreteMeasure {
        &self.ma.measure
    }

    /// `∫ u dμ_eq`.
    pub fn integrate(&self, u: &WeightFn) -> f64 {
        self.ma.measure.integrate(|p| u.eval(p))
    }
}

/// Equilibrium measure of (K, φ) on a mesh around K.
pub fn equilibrium_measure(
    k_set: &Arc<CompactGrid>,
    phi: &WeightFn,
    solver: EnvelopeSolver,
    opts: &MeshOptions,
) -> Result<EquilibriumMeasure> {
    let mesh = opts.mesh(&[k_set], uses_oracle(k_set, phi, solver))?;
    equilibrium_measure_on(k_set, phi, solver, &mesh)
}

/// Same on a given mesh, which must cover K with a margin.
pub fn equilibrium_measure_on(
    k_set: &Arc<CompactGrid>,
    phi: &WeightFn,
    solver: EnvelopeSolver,
    mesh: &PlaneMesh,
) -> Result<EquilibriumMeasure> {
    if k_set.dim() != 1 {
        return Err(Error::param("mesh Monge–Ampère measures are one-dimensional"));
    }
    let ext = solve_envelope(k_set, phi, solver)?;
    let env = ext.envelope.clone();
    let idx: Vec<usize> = (0..mesh.len()).collect();
    let mesh_values: Vec<f64> = idx
        .par_iter()
        .map(|&ix| env.eval(&Point::new1(mesh.node(ix / mesh.ny, ix % mesh.ny))))
        .collect();
    let ma = ma_measure_1d(mesh, &mesh_values)?;
    let radius = k_set.fill_distance() + mesh.h * std::f64::consts::SQRT_2;
    let mut leak = 0.0;
    let mut contact = 0.0;
    for ((p, m), ix) in ma.measure.points().iter().zip(ma.measure.masses()).zip(&ma.nodes) {
        if set_distance(k_set, p.z()) > radius {
            leak += m;
        }
        contact += m * (mesh_values[*ix] - phi.eval(p));
    }
    let mut warning = ext.warning.clone();
    if leak > LEAK_TOL {
        warning = Some(format!("support violation: {:.2}% of the mass lies off K", 100.0 * leak));
    }
    Ok(EquilibriumMeasure {
        ma,
        envelope: env,
        mesh: mesh.clone(),
        mesh_values,
        method: ext.method,
        k_used: ext.k_used,
        sup_defect: ext.sup_defect,
        leak,
        support_radius: radius,
        contact,
        warning,
    })
}

/// An energy difference with its per-j integrals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyDelta {
    pub value: f64,
    pub n: usize,
    /// `∫ (φ − ψ) (dd^c φ)^j ∧ (dd^c ψ)^{n−j}` for j = 0..=n.
    pub components: Vec<f64>,
}

/// `ℰ(φ) − ℰ(ψ)` from the n+1 measures `(dd^c φ)^j ∧ (dd^c ψ)^{n−j}`,
/// j = 0..=n. In dimension one these are `MA(ψ)` and `MA(φ)`; in dimension
/// two the mixed measure must be supplied as well.
pub fn energy_delta(phi: &WeightFn, psi: &WeightFn, measures: &[&DiscreteMeasure]) -> Result<EnergyDelta> {
    let n = match measures.len() {
        2 => 1,
        3 => 2,
        l => {
            return Err(Error::param(format!(
                "energy differences need n + 1 measures with n ∈ {{1, 2}}, got {l}"
            )))
        }
    };
    if measures.iter().any(|m| m.dim() != measures[0].dim()) {
        return Err(Error::param("measures live in different dimensions"));
    }
    let components: Vec<f64> = measures.iter().map(|m| m.integrate(|p| phi.eval(p) - psi.eval(p))).collect();
    if components.iter().any(|c| !c.is_finite()) {
        return Err(Error::Evaluation("φ − ψ is not integrable against the given measures".into()));
    }
    Ok(EnergyDelta {
        value: components.iter().sum::<f64>() / (n + 1) as f64,
        n,
        components,
    })
}

/// `ℰ_eq(K₁, φ₁) − ℰ_eq(K₂, φ₂)` from two equilibrium measures.
pub fn energy_eq_delta_from(a: &EquilibriumMeasure, b: &EquilibriumMeasure) -> EnergyDelta {
    let integral = |m: &EquilibriumMeasure| -> f64 {
        if a.mesh == b.mesh {
            m.ma.nodes
                .iter()
                .zip(m.ma.measure.masses())
                .map(|(ix, w)| w * (a.mesh_values[*ix] - b.mesh_values[*ix]))
                .sum()
        } else {
            m.ma.measure.integrate(|p| a.envelope.eval(p) - b.envelope.eval(p))
        }
    };
    let components = vec![integral(b), integral(a)];
    EnergyDelta {
        value: 0.5 * (components[0] + components[1]),
        n: 1,
        components,
    }
}

/// `ℰ_eq(K₁, φ₁) − ℰ_eq(K₂, φ₂)` for one-dimensional sets. Under `Auto`,
/// closed forms are used only if both sides admit one.
pub fn energy_eq_delta(
    k1: &Arc<CompactGrid>,
    phi1: &WeightFn,
    k2: &Arc<CompactGrid>,
    phi2: &WeightFn,
    solver: EnvelopeSolver,
    opts: &MeshOptions,
) -> Result<EnergyDelta> {
    let fine = uses_oracle(k1, phi1, solver) && uses_oracle(k2, phi2, solver);
    // Both sides use the same estimator so that finite-k biases cancel.
    let solver = match solver {
        EnvelopeSolver::Auto { k } if !fine => EnvelopeSolver::Bergman { k },
        s => s,
    };
    let mesh = opts.mesh(&[k1, k2], fine)?;
    let a = equilibrium_measure_on(k1, phi1, solver, &mesh)?;
    let b = equilibrium_measure_on(k2, phi2, solver, &mesh)?;
    Ok(energy_eq_delta_from(&a, &b))
}

/// `γ = lim (P(z) − log|z|)` with the radii and angular averages used.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobinConstant {
    pub gamma: f64,
    pub radii: Vec<f64>,
    pub averages: Vec<f64>,
}

const ROBIN_ANGLES: usize = 256;

/// Fits `a + b x + c x²` through three points and returns a.
fn richardson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let design: Vec<Vec<f64>> = xs.iter().map(|x| vec![1.0, *x, x * x]).collect();
    Ok(least_squares(&design, ys)?[0])
}

/// Angular averages of `P − log R` on three radii `R₀, 2R₀, 4R₀` with
/// `R₀ = 10·max(diam K, max|z|, 1)`, extrapolated to R = ∞.
pub fn robin_constant(env: &Envelope, k_set: &CompactGrid) -> Result<RobinConstant> {
    if k_set.dim() != 1 {
        return Err(Error::param("Robin constants are one-dimensional"));
    }
    let size = k_set
        .points()
        .iter()
        .map(|p| p.norm())
        .fold(k_set.diameter(), f64::max)
        .max(1.0);
    let r0 = 10.0 * size;
    let radii = vec![r0, 2.0 * r0, 4.0 * r0];
    let averages: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let s: f64 = (0..ROBIN_ANGLES)
                .map(|j| {
                    let z = Complex64::from_polar(r, 2.0 * PI * (j as f64 + 0.5) / ROBIN_ANGLES as f64);
                    env.eval(&Point::new1(z))
                })
                .sum();
            s / ROBIN_ANGLES as f64 - r.ln()
        })
        .collect();
    if averages.iter().any(|a| !a.is_finite()) {
        return Err(Error::Evaluation("envelope is not finite at large radii".into()));
    }
    let xs: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    Ok(RobinConstant {
        gamma: richardson(&xs, &averages)?,
        radii,
        averages,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobinRow {
    pub k: usize,
    pub gamma: f64,
    pub integral: f64,
    pub value: f64,
}

/// `log d_∞` from Robin's formula `−log d_∞ = γ + ∫ P dd^c P`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobinTransfinite {
    pub log_d_inf: f64,
    pub gamma: f64,
    pub integral: f64,
    /// Per-degree values when Bergman envelopes were used.
    pub per_k: Vec<RobinRow>,
    pub extrapolation_residual: f64,
    pub method: EnvelopeMethod,
}

fn robin_row(k_set: &Arc<CompactGrid>, v: &WeightFn, solver: EnvelopeSolver, opts: &MeshOptions) -> Result<(f64, f64, EnvelopeMethod)> {
    let eq = equilibrium_measure(k_set, v, solver, opts)?;
    let gamma = robin_constant(&eq.envelope, k_set)?.gamma;
    let integral: f64 = eq
        .ma
        .nodes
        .iter()
        .zip(eq.ma.measure.masses())
        .map(|(ix, m)| m * eq.mesh_values[*ix])
        .sum();
    Ok((gamma, integral, eq.method))
}

/// Weighted Robin formula in dimension one. Closed-form envelopes give the
/// value directly; Bergman envelopes are evaluated along `schedule` and
/// extrapolated in k.
pub fn transfinite_via_robin(
    k_set: &Arc<CompactGrid>,
    v: &WeightFn,
    solver: EnvelopeSolver,
    opts: &MeshOptions,
    schedule: &[usize],
) -> Result<RobinTransfinite> {
    if k_set.dim() != 1 {
        return Err(Error::param("Robin's formula is one-dimensional"));
    }
    if uses_oracle(k_set, v, solver) {
        let (gamma, integral, method) = robin_row(k_set, v, EnvelopeSolver::Oracle, opts)?;
        return Ok(RobinTransfinite {
            log_d_inf: -(gamma + integral),
            gamma,
            integral,
            per_k: vec![],
            extrapolation_residual: 0.0,
            method,
        });
    }
    crate::fekete::check_schedule(schedule)?;
    // the Monge–Ampère mass of a degree-k Bergman envelope outside radius R
    // decays only like 1/(k (R/r)²), so the mesh must reach well beyond K
    let reach = k_set.points().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let wide = MeshOptions {
        h: opts.h,
        margin: opts.margin.max(3.0 * reach),
    };
    let per_k = schedule
        .iter()
        .map(|&k| {
            let (gamma, integral, _) = robin_row(k_set, v, EnvelopeSolver::Bergman { k }, &wide)?;
            Ok(RobinRow {
                k,
                gamma,
                integral,
                value: -(gamma + integral),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ks: Vec<usize> = per_k.iter().map(|r| r.k).collect();
    let fit = extrapolate(&ks, &per_k.iter().map(|r| r.value).collect::<Vec<_>>())?;
    let g = extrapolate(&ks, &per_k.iter().map(|r| r.gamma).collect::<Vec<_>>())?;
    Ok(RobinTransfinite {
        log_d_inf: fit.limit,
        gamma: g.limit,
        integral: -fit.limit - g.limit,
        per_k,
        extrapolation_residual: fit.residual,
        method: EnvelopeMethod::Bergman,
    })
}

/// The three terms of the iterated Robin formula in ℂ².
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RumelyReport {
    pub log_d_inf: f64,
    /// `∫_{Y_j} (log|Z_j| − P)(dd^c P)^{2−j}` for j = 0, 1, 2.
    pub terms: Vec<f64>,
}

/// One-dimensional factors of a separable model set in ℂ².
fn factors(kind: &SetKind) -> Result<(SetKind, SetKind)> {
    match kind {
        SetKind::Torus { n: 2 } => {
            let c = SetKind::Circle { center: Complex64::new(0.0, 0.0), r: 1.0 };
            Ok((c.clone(), c))
        }
        SetKind::Product(a, b) => Ok(((**a).clone(), (**b).clone())),
        _ => Err(Error::OracleUnavailable(format!(
            "iterated Robin formula needs a separable set in ℂ², got {}",
            kind.tag()
        ))),
    }
}

/// Equilibrium measure of a one-dimensional model factor.
fn factor_equilibrium(kind: &SetKind, count: usize) -> Result<DiscreteMeasure> {
    match kind {
        SetKind::Interval { a, b } => arcsine_measure_on(*a, *b, count),
        _ => Ok(DiscreteMeasure::uniform(Arc::new(make_parametric_set(kind, count)?))),
    }
}

/// `log d_∞(K, v)` for separable K ⊂ ℂ² and constant v from
/// `½ Σ_j ∫_{Y_j} (log|Z_j| − P_K v)(dd^c P_K v)^{2−j}`: the restriction of
/// P to the line at infinity is its Robin function, computed from the
/// envelope at large radii, and its Monge–Ampère measure on that line is
/// resolved on a mesh.
pub fn rumely_iterated_robin(kind: &SetKind, v: &WeightFn, opts: &MeshOptions) -> Result<RumelyReport> {
    let (fa, fb) = factors(kind)?;
    let probe = Arc::new(make_parametric_set(kind, 4)?);
    let env = extremal_oracle(kind, v, &probe)?.envelope;
    let p = |z: Complex64, w: Complex64| env.eval(&Point::new2(z, w));

    // j = 0: −∫ P d(μ_a ⊗ μ_b), the product being the equilibrium measure
    let (ma, mb) = (factor_equilibrium(&fa, 256)?, factor_equilibrium(&fb, 256)?);
    let term0 = -ma
        .points()
        .iter()
        .zip(ma.masses())
        .map(|(x, m)| m * mb.integrate(|y| p(x.z(), y.z())))
        .sum::<f64>();

    // Robin function ρ(a, b) = lim_t P(ta, tb) − log t
    let scale = probe.points().iter().map(|q| q.norm()).fold(1.0, f64::max);
    let t0 = 1e4 * scale;
    let ts = [t0, 2.0 * t0, 4.0 * t0];
    let xs: Vec<f64> = ts.iter().map(|t| 1.0 / t).collect();
    let rho = |a: Complex64, b: Complex64| -> Result<f64> {
        let ys: Vec<f64> = ts.iter().map(|t| p(a * t, b * t) - t.ln()).collect();
        richardson(&xs, &ys)
    };
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);

    // j = 1: on Y₁ in the chart Z₁ = 1, −∫ ρ(1, w) dd^c ρ(1, w)
    let w_star = (rho(one, zero)? - rho(zero, one)?).exp();
    let ring = Arc::new(make_parametric_set(&SetKind::Circle { center: zero, r: w_star }, 64)?);
    let mesh = MeshOptions { h: opts.h, margin: opts.margin }.mesh(&[&ring], true)?;
    let idx: Vec<usize> = (0..mesh.len()).collect();
    let vals = idx
        .iter()
        .map(|&ix| rho(one, mesh.node(ix / mesh.ny, ix % mesh.ny)))
        .collect::<Result<Vec<f64>>>()?;
    let mu1 = ma_measure_1d(&mesh, &vals)?;
    let term1 = -mu1.nodes.iter().zip(mu1.measure.masses()).map(|(ix, m)| m * vals[*ix]).sum::<f64>();

    // j = 2: the point [0 : 0 : 1]
    let term2 = -rho(zero, one)?;
    let terms = vec![term0, term1, term2];
    Ok(RumelyReport {
        log_d_inf: terms.iter().sum::<f64>() / 2.0,
        terms,
    })
}

/// Finite-difference check of `d/dt ℰ_eq(K, φ + t u)|₀ = ∫ u dμ_eq(K, φ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremBConfig {
    /// Half-widths of the central differences; the first one is decisive.
    pub steps: Vec<f64>,
    /// Equally spaced t values for the concavity test.
    pub concavity_grid: Vec<f64>,
    /// Base point `φ + s u` of the second slope used for the Lipschitz test.
    pub lipschitz_shift: f64,
    /// Frozen constant C of `|slope(φ) − slope(φ')| ≤ C max_K |φ − φ'|`.
    pub lipschitz_bound: f64,
    pub tol: f64,
    pub concavity_tol: f64,
}

impl Default for TheoremBConfig {
    fn default() -> Self {
        TheoremBConfig {
            steps: vec![0.05, 0.1],
            concavity_grid: vec![-0.2, -0.1, 0.0, 0.1, 0.2],
            lipschitz_shift: 0.1,
            lipschitz_bound: 1.0,
            tol: 0.03,
            concavity_tol: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremBReport {
    /// `∫ u dμ_eq(K, φ)`.
    pub rhs: f64,
    /// Central difference at the first step.
    pub slope: f64,
    /// `(step, slope)` for every configured step.
    pub slopes: Vec<(f64, f64)>,
    pub gap: f64,
    /// `(t, ℰ_eq(K, φ + t u) − ℰ_eq(K, φ))`.
    pub energies: Vec<(f64, f64)>,
    /// Largest second difference over the concavity grid.
    pub concavity_max: f64,
    pub lipschitz_ratio: f64,
    pub method: EnvelopeMethod,
    pub pass: bool,
}

fn t_key(t: f64) -> i64 {
    (t * 1e9).round() as i64
}

/// Runs the finite-difference test. The same solver is used for every t:
/// under `Auto`, a non-constant direction forces Bergman envelopes.
pub fn theorem_b_check(
    k_set: &Arc<CompactGrid>,
    phi: &WeightFn,
    u: &WeightFn,
    solver: EnvelopeSolver,
    opts: &MeshOptions,
    cfg: &TheoremBConfig,
) -> Result<TheoremBReport> {
    if cfg.steps.is_empty() || cfg.steps.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::param("finite-difference steps must be positive"));
    }
    if cfg.concavity_grid.len() < 3 {
        return Err(Error::param("concavity grid needs at least three t values"));
    }
    let solver = match solver {
        EnvelopeSolver::Auto { k } if phi.constant_value().is_none() || u.constant_value().is_none() => {
            EnvelopeSolver::Bergman { k }
        }
        s => s,
    };
    let h0 = cfg.steps[0];
    let s = cfg.lipschitz_shift;
    let mut ts: Vec<f64> = vec![0.0, s - h0, s + h0];
    for h in &cfg.steps {
        ts.push(*h);
        ts.push(-*h);
    }
    ts.extend(&cfg.concavity_grid);
    let mut uniq: BTreeMap<i64, f64> = BTreeMap::new();
    for t in ts {
        uniq.entry(t_key(t)).or_insert(t);
    }
    let fine = uses_oracle(k_set, &phi.add_scaled(u, 1.0), solver);
    let mesh = opts.mesh(&[k_set], fine)?;
    let sols: BTreeMap<i64, EquilibriumMeasure> = uniq
        .iter()
        .map(|(key, t)| Ok((*key, equilibrium_measure_on(k_set, &phi.add_scaled(u, *t), solver, &mesh)?)))
        .collect::<Result<_>>()?;
    let base = &sols[&0];
    let energy = |t: f64| energy_eq_delta_from(&sols[&t_key(t)], base).value;
    let slope_at = |c: f64, h: f64| (energy(c + h) - energy(c - h)) / (2.0 * h);
    let slopes: Vec<(f64, f64)> = cfg.steps.iter().map(|h| (*h, slope_at(0.0, *h))).collect();
    let slope = slopes[0].1;
    let rhs = base.integrate(u);
    let gap = (slope - rhs).abs();
    let e: Vec<f64> = cfg.concavity_grid.iter().map(|t| energy(*t)).collect();
    let concavity_max = e.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).fold(f64::NEG_INFINITY, f64::max);
    let u_sup = u.eval_grid(k_set)?.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let lipschitz_ratio = if u_sup * s > 0.0 {
        (slope_at(s, h0) - slope).abs() / (u_sup * s.abs())
    } else {
        0.0
    };
    let energies = uniq.values().map(|t| (*t, energy(*t))).collect();
    Ok(TheoremBReport {
        rhs,
        slope,
        slopes,
        gap,
        energies,
        concavity_max,
        lipschitz_ratio,
        method: base.method,
        pass: gap <= cfg.tol && concavity_max <= cfg.concavity_tol && lipschitz_ratio <= cfg.lipschitz_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(r: f64, count: usize) -> Arc<CompactGrid> {
        Arc::new(make_parametric_set(&SetKind::Circle { center: Complex64::new(0.0, 0.0), r }, count).unwrap())
    }

    fn interval(count: usize) -> Arc<CompactGrid> {
        Arc::new(make_parametric_set(&SetKind::Interval { a: -1.0, b: 1.0 }, count).unwrap())
    }

    #[test]
    fn circle_equilibrium_is_haar() {
        let k = circle(1.0, 256);
        let eq = equilibrium_measure(&k, &WeightFn::zero(), EnvelopeSolver::Oracle, &MeshOptions::default()).unwrap();
        assert!(eq.ma.mass_defect < 0.02, "{}", eq.ma.mass_defect);
        assert!(eq.leak < 0.02);
        let mu = eq.measure();
        assert!(mu.moment(&[1], &[0]).norm() < 1e-3);
        assert!((mu.moment(&[1], &[1]).re - 1.0).abs() < 0.02, "{}", mu.moment(&[1], &[1]));
        assert!((mu.moment(&[2], &[2]).re - 1.0).abs() < 0.02);
        assert!(eq.contact.abs() < 0.02);
    }

    #[test]
    fn interval_equilibrium_is_arcsine() {
        let k = interval(257);
        let eq = equilibrium_measure(&k, &WeightFn::zero(), EnvelopeSolver::Oracle, &MeshOptions::default()).unwrap();
        let mu = eq.measure();
        assert!((mu.moment(&[2], &[0]).re - 0.5).abs() < 0.02, "{}", mu.moment(&[2], &[0]));
        assert!((mu.moment(&[4], &[0]).re - 0.375).abs() < 0.02);
        assert!(eq.leak < 0.02);
    }

    #[test]
    fn energy_of_nested_circles() {
        let d = energy_eq_delta(
            &circle(2.0, 256),
            &WeightFn::zero(),
            &circle(1.0, 256),
            &WeightFn::zero(),
            EnvelopeSolver::Oracle,
            &MeshOptions::default(),
        )
        .unwrap();
        assert!((d.value + 0.5 * 2f64.ln()).abs() < 0.02, "{d:?}");
        let k = circle(1.0, 128);
        let d = energy_eq_delta(&k, &WeightFn::constant(1.0), &k, &WeightFn::zero(), EnvelopeSolver::Oracle, &MeshOptions::default()).unwrap();
        assert!((d.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn robin_constants() {
        let probe = interval(65);
        let env = extremal_oracle(probe.kind(), &WeightFn::zero(), &probe).unwrap().envelope;
        assert!((robin_constant(&env, &probe).unwrap().gamma - 2f64.ln()).abs() < 1e-8);
        let c = circle(3.0, 64);
        let env = extremal_oracle(c.kind(), &WeightFn::zero(), &c).unwrap().envelope;
        assert!((robin_constant(&env, &c).unwrap().gamma + 3f64.ln()).abs() < 1e-8);
        let r = transfinite_via_robin(&interval(257), &WeightFn::zero(), EnvelopeSolver::Oracle, &MeshOptions::default(), &[]).unwrap();
        assert!((r.log_d_inf + 2f64.ln()).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn iterated_robin_on_tori() {
        let r = rumely_iterated_robin(&SetKind::Torus { n: 2 }, &WeightFn::zero(), &MeshOptions::default()).unwrap();
        assert!(r.log_d_inf.abs() < 0.01, "{r:?}");
        let c2 = SetKind::Circle { center: Complex64::new(0.0, 0.0), r: 2.0 };
        let r = rumely_iterated_robin(&SetKind::Product(Box::new(c2.clone()), Box::new(c2)), &WeightFn::zero(), &MeshOptions::default()).unwrap();
        assert!((r.log_d_inf - 2f64.ln()).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn energy_delta_basics() {
        let mu = DiscreteMeasure::uniform(circle(1.0, 16));
        let w = WeightFn::log_plus();
        let d = energy_delta(&w.shifted(0.3), &w, &[&mu, &mu]).unwrap();
        assert!((d.value - 0.3).abs() < 1e-15);
        let d = energy_delta(&w.shifted(0.3), &w, &[&mu, &mu, &mu]).unwrap();
        assert_eq!(d.n, 2);
        assert!((d.value - 0.3).abs() < 1e-15);
        assert!(energy_delta(&w, &w, &[&mu]).is_err());
    }
}
