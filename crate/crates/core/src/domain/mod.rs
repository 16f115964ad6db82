//! Compact sets, weights, measures and sampled functions.
//!
//! A compact set K ⊂ ℂⁿ is represented by a finite cloud of points together
//! with a fill distance, the largest distance from a point of the intended
//! continuum set to the cloud. Suprema over K are maxima over the cloud and
//! therefore never overestimate the true value.

mod io;
mod weight;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::compensated_sum;

pub use io::{load_measure, load_pointcloud, write_measure, write_pointcloud};
pub use weight::{GrowthClass, WeightFn};

/// Smallest cloud size accepted by [`make_parametric_set`].
pub const MIN_PARAMETRIC_COUNT: usize = 2;

/// Tolerance on the total mass of a [`DiscreteMeasure`].
pub const MASS_TOL: f64 = 1e-12;

/// A point of ℂⁿ, n ∈ {1, 2}.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    coords: [Complex64; 2],
    dim: usize,
}

impl Point {
    pub fn new1(z: Complex64) -> Self {
        Point {
            coords: [z, Complex64::new(0.0, 0.0)],
            dim: 1,
        }
    }

    pub fn new2(z1: Complex64, z2: Complex64) -> Self {
        Point {
            coords: [z1, z2],
            dim: 2,
        }
    }

    pub fn real(x: f64) -> Self {
        Point::new1(Complex64::new(x, 0.0))
    }

    pub fn from_slice(coords: &[Complex64]) -> Result<Self> {
        let p = match coords {
            [z] => Point::new1(*z),
            [z1, z2] => Point::new2(*z1, *z2),
            _ => return Err(Error::param(format!("dimension {} not in {{1, 2}}", coords.len()))),
        };
        if !p.is_finite() {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords[..self.dim]
    }

    /// First coordinate; the whole point when n = 1.
    pub fn z(&self) -> Complex64 {
        self.coords[0]
    }

    pub fn coord(&self, i: usize) -> Complex64 {
        self.coords[i]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean norm in ℂⁿ.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords().iter().map(|z| z.norm_sqr()).sum()
    }

    fn key(&self) -> [u64; 4] {
        // +0.0 and -0.0 must collide
        let b = |x: f64| if x == 0.0 { 0u64 } else { x.to_bits() };
        [
            b(self.coords[0].re),
            b(self.coords[0].im),
            b(self.coords[1].re),
            b(self.coords[1].im),
        ]
    }
}

/// Geometric description of a compact set.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    /// Real segment [a, b].
    Interval { a: f64, b: f64 },
    /// Circle |z − center| = r.
    Circle { center: Complex64, r: f64 },
    /// Unit torus |z_j| = 1 in ℂⁿ.
    Torus { n: usize },
    /// Boundary of the disc of radius r about 0.
    DiscBoundary { r: f64 },
    /// Product K₁ × K₂ of two one-dimensional sets.
    Product(Box<SetKind>, Box<SetKind>),
    /// Anything else (loaded clouds, meshes, preimages).
    Custom,
}

impl SetKind {
    pub fn dim(&self) -> usize {
        match self {
            SetKind::Interval { .. } | SetKind::Circle { .. } | SetKind::DiscBoundary { .. } => 1,
            SetKind::Torus { n } => *n,
            SetKind::Product(..) => 2,
            SetKind::Custom => 0,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SetKind::Interval { .. } => "interval",
            SetKind::Circle { .. } => "circle",
            SetKind::Torus { .. } => "torus",
            SetKind::DiscBoundary { .. } => "disc_boundary",
            SetKind::Product(..) => "product",
            SetKind::Custom => "custom",
        }
    }

    /// Circle and disc boundary in a common form.
    pub fn as_circle(&self) -> Option<(Complex64, f64)> {
        match self {
            SetKind::Circle { center, r } => Some((*center, *r)),
            SetKind::DiscBoundary { r } => Some((Complex64::new(0.0, 0.0), *r)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SetKind::Interval { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::param(format!("interval needs a < b (got a={a}, b={b})")));
                }
            }
            SetKind::Circle { r, center } => {
                if !(*r > 0.0) || !r.is_finite() || !center.re.is_finite() || !center.im.is_finite() {
                    return Err(Error::param(format!("circle radius must be positive (got {r})")));
                }
            }
            SetKind::DiscBoundary { r } => {
                if !(*r > 0.0) || !r.is_finite() {
                    return Err(Error::param(format!("disc radius must be positive (got {r})")));
                }
            }
            SetKind::Torus { n } => {
                if !(1..=2).contains(n) {
                    return Err(Error::param(format!("torus dimension {n} not in {{1, 2}}")));
                }
            }
            SetKind::Product(a, b) => {
                if a.dim() != 1 || b.dim() != 1 {
                    return Err(Error::param("product factors must be one-dimensional sets"));
                }
                a.validate()?;
                b.validate()?;
            }
            SetKind::Custom => return Err(Error::param("custom sets have no parametrization")),
        }
        Ok(())
    }
}

/// Finite point cloud standing in for a compact set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompactGrid {
    dim: usize,
    points: Vec<Point>,
    fill_distance: f64,
    kind: SetKind,
}

impl CompactGrid {
    /// Checks nonemptiness, dimension, finiteness and pairwise distinctness.
    pub fn new(dim: usize, points: Vec<Point>, fill_distance: f64, kind: SetKind) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::param(format!("dimension {dim} not in {{1, 2}}")));
        }
        if points.is_empty() {
            return Err(Error::param("point cloud is empty"));
        }
        if !(fill_distance >= 0.0) {
            return Err(Error::param("fill distance must be nonnegative"));
        }
        if kind != SetKind::Custom && !(fill_distance > 0.0) {
            return Err(Error::param("parametric sets need a positive fill distance"));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::param(format!("point {i} has dimension {}", p.dim())));
            }
            if !p.is_finite() {
                return Err(Error::Domain(format!("point {i} is not finite")));
            }
            if !seen.insert(p.key()) {
                return Err(Error::param(format!("point {i} duplicates an earlier point")));
            }
        }
        Ok(CompactGrid {
            dim,
            points,
            fill_distance,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn fill_distance(&self) -> f64 {
        self.fill_distance
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    /// Largest pairwise distance (exact for clouds up to a few thousand points).
    pub fn diameter(&self) -> f64 {
        let pts = &self.points;
        let mut d = 0.0f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max(pts[i].dist(&pts[j]));
            }
        }
        d
    }

    /// Distance from `p` to the nearest cloud point.
    pub fn distance_to(&self, p: &Point) -> f64 {
        self.points.iter().map(|q| q.dist(p)).fold(f64::INFINITY, f64::min)
    }

    /// Union of two clouds of the same dimension; points of `other` already
    /// present are skipped. The result is a custom set.
    pub fn union(&self, other: &CompactGrid) -> Result<CompactGrid> {
        if self.dim != other.dim {
            return Err(Error::param("cannot unite clouds of different dimension"));
        }
        let mut seen: HashSet<[u64; 4]> = self.points.iter().map(|p| p.key()).collect();
        let mut pts = self.points.clone();
        for p in &other.points {
            if seen.insert(p.key()) {
                pts.push(*p);
            }
        }
        CompactGrid::new(
            self.dim,
            pts,
            self.fill_distance.min(other.fill_distance),
            SetKind::Custom,
        )
    }
}

fn circle_points(center: Complex64, r: f64, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / count as f64;
            // exact values at the quarter turns keep the 4th roots of unity exact
            let (s, c) = match (4 * j) % count {
                0 if (4 * j / count) % 4 == 0 => (0.0, 1.0),
                0 if (4 * j / count) % 4 == 1 => (1.0, 0.0),
                0 if (4 * j / count) % 4 == 2 => (0.0, -1.0),
                0 if (4 * j / count) % 4 == 3 => (-1.0, 0.0),
                _ => t.sin_cos(),
            };
            center + Complex64::new(r * c, r * s)
        })
        .collect()
}

fn circle_fill(r: f64, count: usize) -> f64 {
    // farthest circle point from the cloud is the arc midpoint
    2.0 * r * (PI / (2.0 * count as f64)).sin()
}

fn one_dim_cloud(kind: &SetKind, count: usize) -> Result<(Vec<Complex64>, f64)> {
    match kind {
        SetKind::Interval { a, b } => {
            let h = (b - a) / (count - 1) as f64;
            let pts = (0..count)
                .map(|j| {
                    let x = if j + 1 == count { *b } else { a + h * j as f64 };
                    Complex64::new(x, 0.0)
                })
                .collect();
            Ok((pts, h / 2.0))
        }
        SetKind::Torus { n: 1 } => Ok((circle_points(Complex64::new(0.0, 0.0), 1.0, count), circle_fill(1.0, count))),
        _ => {
            let (c, r) = kind
                .as_circle()
                .ok_or_else(|| Error::param("product factors must be intervals or circles"))?;
            Ok((circle_points(c, r, count), circle_fill(r, count)))
        }
    }
}

/// Equispaced-in-parameter cloud on a model set. `count` points per
/// one-dimensional factor, so torus(2) and products give `count²` points.
pub fn make_parametric_set(kind: &SetKind, count: usize) -> Result<CompactGrid> {
    kind.validate()?;
    if count < MIN_PARAMETRIC_COUNT {
        return Err(Error::param(format!(
            "count {count} below minimum {MIN_PARAMETRIC_COUNT}"
        )));
    }
    match kind {
        SetKind::Torus { n: 2 } => {
            let f = SetKind::Torus { n: 1 };
            product_cloud(&f, &f, count, kind.clone())
        }
        SetKind::Product(a, b) => product_cloud(a, b, count, kind.clone()),
        _ => {
            if matches!(kind, SetKind::Interval { .. }) || count >= 3 {
                let (pts, fill) = one_dim_cloud(kind, count)?;
                CompactGrid::new(1, pts.into_iter().map(Point::new1).collect(), fill, kind.clone())
            } else {
                Err(Error::param("circles need at least 3 points"))
            }
        }
    }
}

fn product_cloud(a: &SetKind, b: &SetKind, count: usize, kind: SetKind) -> Result<CompactGrid> {
    let (pa, fa) = one_dim_cloud(a, count)?;
    let (pb, fb) = one_dim_cloud(b, count)?;
    let mut pts = Vec::with_capacity(pa.len() * pb.len());
    for za in &pa {
        for zb in &pb {
            pts.push(Point::new2(*za, *zb));
        }
    }
    CompactGrid::new(2, pts, (fa * fa + fb * fb).sqrt(), kind)
}

/// Probability measure on a finite cloud.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    support: Arc<CompactGrid>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    /// Masses must be nonnegative and sum to 1 within `1e-9`; they are then
    /// renormalized so the sum is 1 to within [`MASS_TOL`].
    pub fn new(support: Arc<CompactGrid>, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != support.len() {
            return Err(Error::param(format!(
                "{} masses for {} support points",
                masses.len(),
                support.len()
            )));
        }
        if let Some(i) = masses.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::param(format!("mass {i} is negative or not finite")));
        }
        let total = compensated_sum(masses.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("masses sum to {total}, not 1")));
        }
        Ok(Self::normalized(support, masses))
    }

    /// Rescales arbitrary nonnegative weights to a probability measure.
    pub fn from_weights(support: Arc<CompactGrid>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(Error::param("weights and support differ in length"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::param("weights must be finite and nonnegative"));
        }
        let total = compensated_sum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::param("weights have zero total"));
        }
        Ok(Self::normalized(support, weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(support: Arc<CompactGrid>) -> Self {
        let n = support.len();
        DiscreteMeasure {
            support,
            masses: vec![1.0 / n as f64; n],
        }
    }

    fn normalized(support: Arc<CompactGrid>, mut masses: Vec<f64>) -> Self {
        for _ in 0..2 {
            let total = compensated_sum(masses.iter().copied());
            masses.iter_mut().for_each(|m| *m /= total);
        }
        DiscreteMeasure { support, masses }
    }

    pub fn support(&self) -> &CompactGrid {
        &self.support
    }

    pub fn support_arc(&self) -> &Arc<CompactGrid> {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn points(&self) -> &[Point] {
        self.support.points()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.masses.iter().copied())
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.points().iter().zip(&self.masses).map(|(p, m)| m * f(p)))
    }

    pub fn integrate_complex<F: Fn(&Point) -> Complex64>(&self, f: F) -> Complex64 {
        let vals: Vec<Complex64> = self.points().iter().map(&f).collect();
        let re = compensated_sum(vals.iter().zip(&self.masses).map(|(v, m)| m * v.re));
        let im = compensated_sum(vals.iter().zip(&self.masses).map(|(v, m)| m * v.im));
        Complex64::new(re, im)
    }

    /// ∫ z^a z̄^b dμ for multi-indices `a`, `b` of the measure's dimension.
    pub fn moment(&self, a: &[u32], b: &[u32]) -> Complex64 {
        self.integrate_complex(|p| {
            let mut v = Complex64::new(1.0, 0.0);
            for (i, z) in p.coords().iter().enumerate() {
                v *= z.powu(a[i]) * z.conj().powu(b[i]);
            }
            v
        })
    }

    /// Restriction to the points where `keep` holds, renormalized.
    pub fn restrict<F: Fn(&Point) -> bool>(&self, keep: F) -> Result<DiscreteMeasure> {
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for (p, m) in self.points().iter().zip(&self.masses) {
            if keep(p) {
                pts.push(*p);
                w.push(*m);
            }
        }
        if pts.is_empty() {
            return Err(Error::param("restriction leaves an empty support"));
        }
        let grid = CompactGrid::new(self.dim(), pts, self.support.fill_distance(), SetKind::Custom)?;
        DiscreteMeasure::from_weights(Arc::new(grid), w)
    }
}

/// Uniform probability measure on a circle or torus cloud.
pub fn haar_measure(grid: &Arc<CompactGrid>) -> Result<DiscreteMeasure> {
    match grid.kind() {
        SetKind::Torus { .. } | SetKind::Circle { .. } | SetKind::DiscBoundary { .. } => {
            Ok(DiscreteMeasure::uniform(grid.clone()))
        }
        SetKind::Product(a, b) if a.as_circle().is_some() && b.as_circle().is_some() => {
            Ok(DiscreteMeasure::uniform(grid.clone()))
        }
        other => Err(Error::Domain(format!(
            "Haar measure needs a circle or torus cloud, got {}",
            other.tag()
        ))),
    }
}

/// Arcsine distribution dx/(π√(1−x²)) on [−1, 1] discretized at the
/// Chebyshev nodes with equal masses (Gauss–Chebyshev quadrature).
pub fn arcsine_measure(count: usize) -> Result<DiscreteMeasure> {
    arcsine_measure_on(-1.0, 1.0, count)
}

/// Equilibrium (arcsine) measure of [a, b] at `count` Chebyshev nodes.
pub fn arcsine_measure_on(a: f64, b: f64, count: usize) -> Result<DiscreteMeasure> {
    if count < MIN_PARAMETRIC_COUNT {
        return Err(Error::param(format!(
            "count {count} below minimum {MIN_PARAMETRIC_COUNT}"
        )));
    }
    if !(a < b) {
        return Err(Error::param("arcsine measure needs a < b"));
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let pts: Vec<Point> = (0..count)
        .map(|j| {
            // mirror the upper half so the node set is exactly symmetric
            let jj = j.min(count - 1 - j);
            let x = ((2 * jj + 1) as f64 * PI / (2 * count) as f64).cos();
            let x = if 2 * j + 1 == count {
                0.0
            } else if jj != j {
                -x
            } else {
                x
            };
            Point::real(mid + half * x)
        })
        .collect();
    let fill = half * (PI / (2.0 * count as f64)).sin() * 2.0;
    let grid = CompactGrid::new(1, pts, fill, SetKind::Interval { a, b })?;
    Ok(DiscreteMeasure::uniform(Arc::new(grid)))
}

/// Normalized area measure of the disc |z| ≤ r, discretized by a polar
/// product rule (Gauss–Legendre in r², equispaced in angle) that integrates
/// z^a z̄^b exactly for a + b < 2·`angular` and a + b ≤ 2·`radial` − 1.
pub fn disc_area_measure(r: f64, radial: usize, angular: usize) -> Result<DiscreteMeasure> {
    if !(r > 0.0) || radial < 1 || angular < 3 {
        return Err(Error::param("disc area measure needs r > 0, radial >= 1, angular >= 3"));
    }
    let (nodes, weights) = gauss_legendre(radial);
    let mut pts = Vec::with_capacity(radial * angular);
    let mut masses = Vec::with_capacity(radial * angular);
    for (x, w) in nodes.iter().zip(&weights) {
        // s = r² uniform on [0, 1] ⇒ normalized area
        let s = 0.5 * (x + 1.0);
        let rho = r * s.sqrt();
        // stagger rings so no two share an angle
        for j in 0..angular {
            let t = 2.0 * PI * j as f64 / angular as f64;
            pts.push(Point::new1(Complex64::from_polar(rho, t)));
            masses.push(0.5 * w / angular as f64);
        }
    }
    let fill = r * (PI / angular as f64).max(2.0 / radial as f64);
    let grid = CompactGrid::new(1, pts, fill, SetKind::Custom)?;
    DiscreteMeasure::new(Arc::new(grid), masses)
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * p - pm) / (t * t - 1.0);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Real values sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridFunction {
    grid: Arc<CompactGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<CompactGrid>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::param("grid function length mismatch"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite value at grid point {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn grid(&self) -> &Arc<CompactGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Uniform rectangular mesh of the plane with nodes at `origin + h·(i, j)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlaneMesh {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl PlaneMesh {
    /// Mesh covering `[xmin, xmax] × [ymin, ymax]` with nodes on the lattice
    /// hℤ², so real segments and the axes are resolved exactly.
    pub fn covering(xmin: f64, xmax: f64, ymin: f64, ymax: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(xmax > xmin) || !(ymax > ymin) {
            return Err(Error::param("mesh needs h > 0 and a nondegenerate box"));
        }
        let i0 = (xmin / h + 1e-9).floor() as i64;
        let i1 = (xmax / h - 1e-9).ceil() as i64;
        let j0 = (ymin / h + 1e-9).floor() as i64;
        let j1 = (ymax / h - 1e-9).ceil() as i64;
        Ok(PlaneMesh {
            x0: i0 as f64 * h,
            y0: j0 as f64 * h,
            h,
            nx: (i1 - i0 + 1) as usize,
            ny: (j1 - j0 + 1) as usize,
        })
    }

    /// Mesh around the clouds' bounding box with the given margin.
    pub fn around(clouds: &[&CompactGrid], margin: f64, h: f64) -> Result<Self> {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for c in clouds {
            if c.dim() != 1 {
                return Err(Error::param("plane meshes need one-dimensional sets"));
            }
            for p in c.points() {
                let z = p.z();
                b[0] = b[0].min(z.re);
                b[1] = b[1].max(z.re);
                b[2] = b[2].min(z.im);
                b[3] = b[3].max(z.im);
            }
        }
        PlaneMesh::covering(b[0] - margin, b[1] + margin, b[2] - margin, b[3] + margin, h)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node index of lattice position (i, j); i runs along the real axis.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x0 + self.h * i as f64, self.y0 + self.h * j as f64)
    }

    pub fn grid(&self) -> Result<CompactGrid> {
        let mut pts = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            for j in 0..self.ny {
                pts.push(Point::new1(self.node(i, j)));
            }
        }
        CompactGrid::new(1, pts, self.h / std::f64::consts::SQRT_2, SetKind::Custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn interval_three_points() {
        let g = make_parametric_set(&SetKind::Interval { a: -1.0, b: 1.0 }, 3).unwrap();
        let xs: Vec<f64> = g.points().iter().map(|p| p.z().re).collect();
        assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
        assert_eq!(g.fill_distance(), 0.5);
    }

    #[test]
    fn circle_four_points_are_roots_of_unity() {
        let g = make_parametric_set(&SetKind::Circle { center: c(0.0, 0.0), r: 1.0 }, 4).unwrap();
        let zs: Vec<Complex64> = g.points().iter().map(|p| p.z()).collect();
        assert_eq!(zs, vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]);
    }

    #[test]
    fn torus_product_grid() {
        let g = make_parametric_set(&SetKind::Torus { n: 2 }, 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.dim(), 2);
        assert_eq!(g.points()[5], Point::new2(c(0.0, 1.0), c(0.0, 1.0)));
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(make_parametric_set(&SetKind::Interval { a: 1.0, b: 1.0 }, 10).is_err());
        assert!(make_parametric_set(&SetKind::Circle { center: c(0.0, 0.0), r: -1.0 }, 10).is_err());
        assert!(make_parametric_set(&SetKind::DiscBoundary { r: 0.0 }, 10).is_err());
        assert!(make_parametric_set(&SetKind::Interval { a: -1.0, b: 1.0 }, 1).is_err());
    }

    #[test]
    fn deterministic_construction() {
        let k = SetKind::Circle { center: c(0.3, -0.1), r: 2.0 };
        let a = make_parametric_set(&k, 97).unwrap();
        let b = make_parametric_set(&k, 97).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert_eq!(p.z().re.to_bits(), q.z().re.to_bits());
            assert_eq!(p.z().im.to_bits(), q.z().im.to_bits());
        }
    }

    #[test]
    fn haar_is_uniform_and_kind_checked() {
        let g = Arc::new(make_parametric_set(&SetKind::Circle { center: c(0.0, 0.0), r: 1.0 }, 4).unwrap());
        let h = haar_measure(&g).unwrap();
        assert_eq!(h.masses(), &[0.25; 4]);
        let t = Arc::new(make_parametric_set(&SetKind::Torus { n: 2 }, 4).unwrap());
        assert!(haar_measure(&t).unwrap().masses().iter().all(|m| *m == 1.0 / 16.0));
        let i = Arc::new(make_parametric_set(&SetKind::Interval { a: -1.0, b: 1.0 }, 9).unwrap());
        assert!(matches!(haar_measure(&i), Err(Error::Domain(_))));
    }

    #[test]
    fn arcsine_nodes_and_moments() {
        let m = arcsine_measure(2).unwrap();
        let xs: Vec<f64> = m.points().iter().map(|p| p.z().re).collect();
        assert!((xs[0] - 0.5f64.sqrt()).abs() < 1e-15 && (xs[1] + 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.masses(), &[0.5, 0.5]);
        for count in [4, 9, 64] {
            let m = arcsine_measure(count).unwrap();
            let x2 = m.integrate(|p| p.z().re.powi(2));
            assert!((x2 - 0.5).abs() < 1e-14, "count {count}: {x2}");
        }
        let m = arcsine_measure(33).unwrap();
        assert_eq!(m.integrate(|p| p.z().re), 0.0);
    }

    #[test]
    fn measure_mass_checks() {
        let g = Arc::new(make_parametric_set(&SetKind::Interval { a: 0.0, b: 1.0 }, 3).unwrap());
        assert!(DiscreteMeasure::new(g.clone(), vec![0.3, 0.3, 0.3]).is_err());
        assert!(DiscreteMeasure::new(g.clone(), vec![-0.1, 0.6, 0.5]).is_err());
        let m = DiscreteMeasure::new(g, vec![0.2, 0.3, 0.5]).unwrap();
        assert!((m.total_mass() - 1.0).abs() <= MASS_TOL);
    }

    #[test]
    fn disc_area_moments_are_exact() {
        let m = disc_area_measure(1.0, 40, 100).unwrap();
        for a in 0..6u32 {
            let v = m.moment(&[a], &[a]).re;
            assert!((v - 1.0 / (a as f64 + 1.0)).abs() < 1e-13);
        }
        assert!(m.moment(&[2], &[0]).norm() < 1e-14);
    }

    #[test]
    fn mesh_contains_lattice_lines() {
        let mesh = PlaneMesh::covering(-2.0, 2.0, -1.0, 1.0, 0.25).unwrap();
        assert_eq!((mesh.nx, mesh.ny), (17, 9));
        assert_eq!(mesh.node(4, 4), c(-1.0, 0.0));
        assert_eq!(mesh.grid().unwrap().len(), 17 * 9);
    }
}
