//! One function per subcommand. Each returns the report and whether the
//! run's verdict (if it has one) passed.

use std::sync::Arc;

use num_complex::Complex64;
use serde_json::{json, Value};

use plurilab::bergman::{bergman_density, bergman_measure, bm_growth_diagnostic, weak_convergence_check};

use plurilab::domain::{
    arcsine_measure_on, disc_area_measure, haar_measure, load_measure, load_pointcloud, make_parametric_set, write_measure,
    write_pointcloud, CompactGrid, DiscreteMeasure, Point, SetKind,
    WeightFn,
};
use plurilab::dynamics::{green_weight, parse_complex, pullback_check, resultant, MapLift};
use plurilab::energy::{
    energy_eq_delta, equilibrium_measure, rumely_iterated_robin, transfinite_via_robin, MeshOptions, TheoremBConfig,
};
use plurilab::envelope::{default_bm_measure, extremal_bergman, extremal_oracle, regularity_check, EnvelopeSolver};
use plurilab::fekete::{check_schedule, transfinite_diameter_leja};
use plurilab::polyspace::{MAX_DEGREE_1D, MAX_DEGREE_2D};
use plurilab::report::{to_value, Diagnostics, Heading, Report};
use plurilab::verify::{
    verify_corollary_a, verify_corollary_a_l2, verify_lemma_elde, verify_theorem_a, verify_theorem_b, ConvergenceReport,
    CorollaryReference, VerifyOptions, WeightedPair,
};
use plurilab::Error;

use crate::args::*;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing files, caps exceeded: exit 64.
    Usage(String),
    /// Numerical or evaluation failure: exit 1.
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(m) => CliError::Usage(m),
            Error::Io(m) => CliError::Usage(m),
            other => CliError::Run(other),
        }
    }
}

type Res<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(CliError::Usage(msg.into()))
}

/// Output of a command: the report, an optional CSV table and a verdict.
pub struct Outcome {
    pub report: Report,
    pub table: Option<Vec<Value>>,
    pub summary: Vec<String>,
    pub pass: bool,
}

/// Accepts bare built-in ids (`re2`) besides the full weight syntax.
pub fn parse_weight(spec: &str) -> Res<WeightFn> {
    match WeightFn::parse(spec) {
        Ok(w) => Ok(w),
        Err(e) => WeightFn::builtin(spec).map_err(|_| e.into()),
    }
}

struct SetInput<'a> {
    set: SetArg,
    r: f64,
    center: &'a str,
    a: f64,
    b: f64,
    count: usize,
    path: Option<&'a str>,
}

fn build_set(s: &SetInput) -> Res<Arc<CompactGrid>> {
    if s.count > 4096 {
        return usage("count must be at most 4096");
    }
    let center = parse_complex(s.center)?;
    let circle = |r: f64| SetKind::Circle { center: Complex64::new(0.0, 0.0), r };
    let kind = match s.set {
        SetArg::Circle => SetKind::Circle { center, r: s.r },
        SetArg::Disc => SetKind::DiscBoundary { r: s.r },
        SetArg::Interval => SetKind::Interval { a: s.a, b: s.b },
        SetArg::Torus => SetKind::Torus { n: 2 },
        SetArg::CircleProduct => SetKind::Product(Box::new(circle(s.r)), Box::new(circle(s.r))),
        SetArg::File => {
            let path = match s.path {
                Some(p) => p,
                None => return usage("--set file needs --path"),
            };
            if !std::path::Path::new(path).exists() {
                return usage(format!("no such file: {path}"));
            }
            return Ok(Arc::new(load_pointcloud(path)?));
        }
    };
    let count = if kind.dim() == 2 { s.count.min(64) } else { s.count };
    Ok(Arc::new(make_parametric_set(&kind, count)?))
}

fn first_set(s: &SetSpec) -> Res<Arc<CompactGrid>> {
    build_set(&SetInput {
        set: s.set,
        r: s.r,
        center: &s.center,
        a: s.a,
        b: s.b,
        count: s.count,
        path: s.path.as_deref(),
    })
}

fn second_set(s: &SecondSet, count: usize) -> Res<Arc<CompactGrid>> {
    build_set(&SetInput {
        set: s.set2,
        r: s.r2,
        center: &s.center2,
        a: s.a2,
        b: s.b2,
        count,
        path: s.path2.as_deref(),
    })
}

/// `{k/6, k/3, k/2, 2k/3, k}` or the explicit list, checked against the
/// degree caps.
pub fn schedule(c: &Common, dim: usize) -> Res<Vec<usize>> {
    let cap = if dim == 2 { MAX_DEGREE_2D } else { MAX_DEGREE_1D };
    let ks: Vec<usize> = match &c.kschedule {
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad degree '{x}' in --kschedule"))))
            .collect::<Res<_>>()?,
        None => {
            let k = c.kmax.unwrap_or(if dim == 2 { 16 } else { 48 });
            let mut v: Vec<usize> = [k / 6, k / 3, k / 2, 2 * k / 3, k].into_iter().filter(|x| *x > 0).collect();
            v.dedup();
            v
        }
    };
    if let Some(k) = ks.iter().find(|k| **k > cap) {
        return usage(format!("degree {k} exceeds the cap {cap} for n = {dim}"));
    }
    check_schedule(&ks)?;
    Ok(ks)
}

fn solver(m: SolverArg, k: usize) -> EnvelopeSolver {
    match m {
        SolverArg::Auto => EnvelopeSolver::Auto { k },
        SolverArg::Oracle => EnvelopeSolver::Oracle,
        SolverArg::Bergman => EnvelopeSolver::Bergman { k },
    }
}

fn build_measure(m: MeasureArg, path: Option<&str>, k_set: &Arc<CompactGrid>, r: f64, kmax: usize) -> Res<DiscreteMeasure> {
    Ok(match m {
        MeasureArg::Default => default_bm_measure(k_set)?,
        MeasureArg::Haar => haar_measure(k_set)?,
        MeasureArg::Arcsine => match k_set.kind() {
            SetKind::Interval { a, b } => arcsine_measure_on(*a, *b, k_set.len())?,
            _ => return usage("the arcsine measure needs --set interval"),
        },
        MeasureArg::Uniform => DiscreteMeasure::uniform(k_set.clone()),
        MeasureArg::UpperHalf => default_bm_measure(k_set)?.restrict(|p| p.coord(0).im >= 0.0)?,
        MeasureArg::DiscArea => disc_area_measure(r, kmax + 8, 2 * kmax + 8)?,
        MeasureArg::File => match path {
            Some(p) if std::path::Path::new(p).exists() => load_measure(p)?,
            Some(p) => return usage(format!("no such file: {p}")),
            None => return usage("--measure file needs --measure-path"),
        },
    })
}

fn point_row(p: &Point, value: f64) -> Value {
    let mut m = serde_json::Map::new();
    for (j, z) in p.coords().iter().enumerate() {
        m.insert(format!("re{}", j + 1), json!(z.re));
        m.insert(format!("im{}", j + 1), json!(z.im));
    }
    m.insert("value".into(), json!(value));
    Value::Object(m)
}

fn diagnostics(ks: Vec<usize>, clouds: &[(&str, &CompactGrid)]) -> Diagnostics {
    let mut d = Diagnostics::new(ks);
    d.fill_distances = clouds.iter().map(|(n, g)| (n.to_string(), g.fill_distance())).collect();
    d
}

fn report(heading: Heading, config: &impl serde::Serialize, per_k: Value, result: Value, diag: Diagnostics) -> Res<Report> {
    Ok(Report {
        heading,
        config: to_value(config)?,
        per_k,
        result,
        diagnostics: diag,
    })
}

fn cmd(name: &str) -> Heading {
    Heading::Command(name.into())
}

pub fn gen(a: &GenArgs) -> Res<Outcome> {
    let k_set = first_set(&a.set)?;
    let kmax = a.common.kmax.unwrap_or(48);
    let result = match a.measure {
        Some(m) => {
            let mu = build_measure(m, a.measure_path.as_deref(), &k_set, a.set.r, kmax)?;
            write_measure(&a.file, &mu)?;
            json!({"file": a.file, "points": mu.len(), "dim": mu.dim(), "fill_distance": mu.support().fill_distance(), "measure": true})
        }
        None => {
            write_pointcloud(&a.file, &k_set)?;
            json!({"file": a.file, "points": k_set.len(), "dim": k_set.dim(), "fill_distance": k_set.fill_distance(), "measure": false})
        }
    };
    let summary = vec![format!("wrote {} points to {}", result["points"], a.file)];
    Ok(Outcome {
        report: report(cmd("gen"), a, json!([]), result, diagnostics(vec![], &[("K", &k_set)]))?,
        table: None,
        summary,
        pass: true,
    })
}

pub fn envelope(a: &EnvelopeArgs) -> Res<Outcome> {
    let k_set = first_set(&a.set)?;
    let phi = parse_weight(&a.set.weight)?;
    let k = a.common.kmax.unwrap_or(if k_set.dim() == 2 { 16 } else { 48 });
    schedule(&Common { kschedule: None, kmax: Some(k.max(3)), ..a.common.clone() }, k_set.dim())?;
    let eval = match a.eval_r {
        Some(r) if k_set.dim() == 1 => Arc::new(k_set.union(&make_parametric_set(
            &SetKind::Circle { center: Complex64::new(0.0, 0.0), r },
            k_set.len().max(3),
        )?)?),
        Some(_) => return usage("--eval-r is available for one-dimensional sets only"),
        None => k_set.clone(),
    };
    let bergman = || -> Res<_> {
        let mu = default_bm_measure(&k_set)?;
        Ok(extremal_bergman(&k_set, &phi, &mu, k, &eval, false)?)
    };
    let res = match a.method {
        SolverArg::Oracle => extremal_oracle(k_set.kind(), &phi, &eval)?,
        SolverArg::Bergman => bergman()?,
        SolverArg::Auto => match extremal_oracle(k_set.kind(), &phi, &eval) {
            Err(Error::OracleUnavailable(_)) => bergman()?,
            other => other?,
        },
    };
    let reg = regularity_check(&res, &k_set, &phi, a.contact_tol, 0.9)?;
    let table: Vec<Value> = eval.points().iter().zip(&res.values).map(|(p, v)| point_row(p, *v)).collect();
    let result = json!({
        "method": to_value(&res.method)?,
        "k_used": res.k_used,
        "sup_defect": res.sup_defect,
        "warning": res.warning,
        "regularity": to_value(&reg)?,
        "values": table.clone(),
    });
    let summary = vec![
        format!("method {:?}, k = {}", res.method, res.k_used),
        format!("sup_K (P − φ) = {:.6}, contact fraction {:.3}", reg.sup_defect, reg.contact_fraction),
    ];
    let per_k = json!([{"k": res.k_used, "sup_defect": res.sup_defect, "contact_fraction": reg.contact_fraction}]);
    Ok(Outcome {
        report: report(cmd("envelope"), a, per_k, result, diagnostics(vec![res.k_used], &[("K", &k_set), ("eval", &eval)]))?,
        table: Some(table),
        summary,
        pass: true,
    })
}

pub fn transfinite(a: &TransfiniteArgs) -> Res<Outcome> {
    let k_set = first_set(&a.set)?;
    let dim = k_set.dim();
    if a.method == TransfiniteMethod::Robin && dim != 1 {
        return usage("the robin method is one-dimensional; use leja or energy for sets in ℂ²");
    }
    let phi = parse_weight(&a.set.weight)?;
    let ks = schedule(&a.common, dim)?;
    let kmax = *ks.last().unwrap();
    let opts = MeshOptions::default();
    let (log_d, per_k, extra) = match a.method {
        TransfiniteMethod::Leja => {
            let t = transfinite_diameter_leja(&k_set, &phi, &ks)?;
            (t.log_d_inf, to_value(&t.per_k)?, json!({"extrapolation": to_value(&t.fit)?}))
        }
        TransfiniteMethod::Robin => {
            let t = transfinite_via_robin(&k_set, &phi, solver(a.solver, kmax), &opts, &ks)?;
            let extra = json!({"gamma": t.gamma, "integral": t.integral, "method": to_value(&t.method)?,
                               "extrapolation_residual": t.extrapolation_residual});
            (t.log_d_inf, to_value(&t.per_k)?, extra)
        }
        TransfiniteMethod::Energy if dim == 1 => {
            let unit = Arc::new(make_parametric_set(&SetKind::Circle { center: Complex64::new(0.0, 0.0), r: 1.0 }, k_set.len().max(64))?);
            let e = energy_eq_delta(&unit, &WeightFn::zero(), &k_set, &phi, solver(a.solver, kmax), &opts)?;
            (2.0 * e.value, json!([]), json!({"energy_delta": to_value(&e)?}))
        }
        TransfiniteMethod::Energy => {
            if phi.constant_value().is_none() {
                return usage("the energy method in ℂ² needs a constant weight");
            }
            let r = rumely_iterated_robin(k_set.kind(), &phi, &opts)?;
            (r.log_d_inf, json!([]), json!({"terms": r.terms}))
        }
    };
    let result = json!({"log_d_inf": log_d, "d_inf": log_d.exp(), "details": extra});
    let summary = vec![format!("log d_∞ = {log_d:.6}  (d_∞ = {:.6})", log_d.exp())];
    let table = per_k.as_array().cloned();
    Ok(Outcome {
        report: report(cmd("transfinite"), a, per_k, result, diagnostics(ks, &[("K", &k_set)]))?,
        table,
        summary,
        pass: true,
    })
}

pub fn bergman(a: &BergmanArgs) -> Res<Outcome> {
    let k_set = first_set(&a.set)?;
    let phi = parse_weight(&a.set.weight)?;
    let ks = schedule(&a.common, k_set.dim())?;
    let kmax = *ks.last().unwrap();
    let mu = build_measure(a.measure, a.measure_path.as_deref(), &k_set, a.set.r, kmax)?;
    let growth = bm_growth_diagnostic(&k_set, &mu, &phi, &ks)?;
    let densities = ks
        .iter()
        .map(|&k| bergman_density(&mu, &phi, k, None))
        .collect::<plurilab::Result<Vec<_>>>()?;
    let weak = if k_set.dim() == 1 {
        let eq = equilibrium_measure(&k_set, &phi, EnvelopeSolver::Auto { k: kmax }, &MeshOptions::default())?;
        let betas = ks
            .iter()
            .map(|&k| Ok((k, bergman_measure(&mu, &phi, k)?)))
            .collect::<plurilab::Result<Vec<_>>>()?;
        Some(weak_convergence_check(&betas, eq.measure(), a.moment_order)?)
    } else {
        None
    };
    let per_k: Vec<Value> = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            json!({
                "k": k,
                "n_k": densities[i].n_k,
                "normalization_residual": densities[i].normalization_residual,
                "sup_rho": growth.rows[i].sup_rho,
                "rate": growth.rows[i].rate,
                "max_moment_gap": weak.as_ref().map(|w| w.rows[i].max_gap),
            })
        })
        .collect();
    let result = json!({
        "growth_limit": growth.limit,
        "bm_plausible": growth.bm_plausible,
        "final_moment_gap": weak.as_ref().map(|w| w.final_gap),
        "max_normalization_residual": densities.iter().map(|d| d.normalization_residual).fold(0.0, f64::max),
    });
    let mut summary = vec![
        format!("(1/2k) log sup ρ → {:.5}; Bernstein–Markov plausible: {}", growth.limit, growth.bm_plausible),
    ];
    if let Some(w) = &weak {
        summary.push(format!("largest moment gap to μ_eq at k = {kmax}: {:.5}", w.final_gap));
    }
    Ok(Outcome {
        report: report(cmd("bergman"), a, Value::Array(per_k.clone()), result, diagnostics(ks, &[("K", &k_set), ("supp μ", mu.support())]))?,
        table: Some(per_k),
        summary,
        pass: true,
    })
}

pub fn energy(a: &EnergyArgs) -> Res<Outcome> {
    let k1 = first_set(&a.set)?;
    let k2 = second_set(&a.second, a.set.count)?;
    if k1.dim() != 1 || k2.dim() != 1 {
        return usage("energy differences of equilibrium weights are computed for sets in ℂ");
    }
    let phi1 = parse_weight(&a.set.weight)?;
    let phi2 = parse_weight(&a.second.weight2)?;
    let k = a.common.kmax.unwrap_or(48);
    if k > MAX_DEGREE_1D {
        return usage(format!("degree {k} exceeds the cap {MAX_DEGREE_1D}"));
    }
    let opts = MeshOptions { h: a.h, ..MeshOptions::default() };
    let e = energy_eq_delta(&k1, &phi1, &k2, &phi2, solver(a.method, k), &opts)?;
    let result = json!({"energy_delta": e.value, "components": e.components});
    let summary = vec![format!("ℰ_eq(K₁, φ₁) − ℰ_eq(K₂, φ₂) = {:.6}", e.value)];
    Ok(Outcome {
        report: report(cmd("energy"), a, json!([]), result, diagnostics(vec![k], &[("K1", &k1), ("K2", &k2)]))?,
        table: None,
        summary,
        pass: true,
    })
}

pub fn dynamics(a: &DynamicsArgs) -> Res<Outcome> {
    let lift = MapLift::parse(&a.map)?;
    let k_set = first_set(&a.set)?;
    if k_set.dim() != 1 {
        return usage("maps act on ℙ¹; use a one-dimensional set");
    }
    let psi = parse_weight(&a.set.weight)?;
    let ks = schedule(&a.common, 1)?;
    let res = resultant(&lift)?;
    let green = if lift.degree() >= 2 {
        let g = green_weight(&lift, &WeightFn::log_plus(), &k_set, a.iterations, 1e-10)?;
        Some(json!({"iterations": g.iterations_m, "residual": g.residual, "fixed_point_residual": g.fixed_point_residual}))
    } else {
        None
    };
    let pb = pullback_check(&lift, &k_set, &psi, &ks, a.common.tol)?;
    let result = json!({
        "degree": lift.degree(),
        "resultant": [res.re, res.im],
        "log_abs_resultant": res.norm().ln(),
        "green_weight": green,
        "pullback": to_value(&pb)?,
    });
    let summary = vec![
        format!("|Res F| = {:.6e}", res.norm()),
        format!("pull-back: lhs {:.6}, rhs {:.6}, gap {:.2e} ({})", pb.lhs, pb.rhs, pb.gap, if pb.pass { "pass" } else { "FAIL" }),
    ];
    Ok(Outcome {
        report: report(cmd("dynamics"), a, json!([]), result, diagnostics(ks, &[("K", &k_set)]))?,
        table: None,
        summary,
        pass: pb.pass,
    })
}

fn verdict_lines(r: &ConvergenceReport) -> Vec<String> {
    let mut v = vec![format!(
        "{}: extrapolated {:.6}, target {:.6}, gap {:.2e} (tol {}) {}",
        r.claim_id.tag(),
        r.extrapolated,
        r.target,
        r.gap,
        r.tolerance,
        if r.pass { "pass" } else { "FAIL" }
    )];
    for c in &r.side_checks {
        v.push(format!("  {}: {:.3e} ≤ {} {}", c.name, c.value, c.bound, if c.pass { "pass" } else { "FAIL" }));
    }
    if r.expected_failure {
        v.push("  (hypotheses deliberately violated: failure expected)".into());
    }
    v
}

pub fn verify(a: &VerifyArgs) -> Res<Outcome> {
    let k_set = first_set(&a.set)?;
    if k_set.dim() != 1 {
        return usage("verification harnesses run on sets in ℂ");
    }
    let phi = parse_weight(&a.set.weight)?;
    let ks = schedule(&a.common, 1)?;
    let kmax = *ks.last().unwrap();
    let opts = VerifyOptions {
        tol: a.common.tol,
        solver: solver(a.method, kmax),
        mesh: MeshOptions::default(),
    };
    let mu = || build_measure(a.measure, a.measure_path.as_deref(), &k_set, a.set.r, kmax);
    let mut clouds: Vec<(&str, Arc<CompactGrid>)> = vec![("K", k_set.clone())];
    let mut extra = Value::Null;
    let mut rep = match a.claim {
        ClaimArg::ThmAI | ClaimArg::ThmAIi => {
            let k2 = second_set(&a.second, a.set.count)?;
            let phi2 = parse_weight(&a.second.weight2)?;
            clouds.push(("K2", k2.clone()));
            let (p1, p2) = if a.claim == ClaimArg::ThmAI {
                (WeightedPair::Set { set: k_set.clone(), weight: phi }, WeightedPair::Set { set: k2, weight: phi2 })
            } else {
                (
                    WeightedPair::Measure { mu: mu()?, weight: phi },
                    WeightedPair::Measure { mu: default_bm_measure(&k2)?, weight: phi2 },
                )
            };
            verify_theorem_a(&p1, &p2, &ks, &opts)?
        }
        ClaimArg::CorAI | ClaimArg::CorAIi => {
            let reference = CorollaryReference::unit_circle(k_set.len().max(2 * kmax + 2))?;
            let m = if a.measure == MeasureArg::Default { None } else { Some(mu()?) };
            if a.claim == ClaimArg::CorAI {
                verify_corollary_a(&reference, &k_set, &phi, m.as_ref(), &ks, &opts)?
            } else {
                verify_corollary_a_l2(&reference, &k_set, &phi, m.as_ref(), &ks, &opts)?
            }
        }
        ClaimArg::LemmaElde => {
            let mut r = verify_lemma_elde(&k_set, &phi, &mu()?, &ks, a.common.tol)?;
            r.expected_failure = a.measure == MeasureArg::UpperHalf;
            r
        }
        ClaimArg::ThmB => {
            let u = parse_weight(&a.u)?;
            let cfg = TheoremBConfig { tol: a.common.tol, ..TheoremBConfig::default() };
            let (r, b) = verify_theorem_b(&k_set, &phi, &u, &opts, &cfg)?;
            extra = to_value(&b)?;
            r
        }
    };
    if a.claim == ClaimArg::ThmB {
        rep.fit = None;
    }
    let pass = rep.all_pass();
    let summary = verdict_lines(&rep);
    let per_k = to_value(&rep.per_k)?;
    let mut result = to_value(&rep)?;
    if let Value::Object(m) = &mut result {
        m.remove("per_k");
        m.insert("all_pass".into(), json!(pass));
        if !extra.is_null() {
            m.insert("details".into(), extra);
        }
    }
    let named: Vec<(&str, &CompactGrid)> = clouds.iter().map(|(n, g)| (*n, g.as_ref())).collect();
    let diag_ks = if a.claim == ClaimArg::ThmB { vec![kmax] } else { ks };
    Ok(Outcome {
        report: report(Heading::Claim(rep.claim_id.tag().into()), a, per_k.clone(), result, diagnostics(diag_ks, &named))?,
        table: per_k.as_array().cloned(),
        summary,
        pass,
    })
}
