//! Command-line definitions.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "plurilab",
    version,
    about = "Equilibrium weights, energies, transfinite diameters and Bergman measures on point clouds",
    args_override_self = true
)]
pub struct Cli {
    /// `key = value` file; its entries are overridden by flags.
    #[arg(long, global = true)]
    pub config: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a model point cloud or measure as CSV.
    Gen(GenArgs),
    /// Equilibrium weight of (K, φ) and its regularity diagnostics.
    Envelope(EnvelopeArgs),
    /// Transfinite diameter log d_∞(K, φ).
    Transfinite(TransfiniteArgs),
    /// Bergman densities, normalization and Bernstein–Markov diagnostics.
    Bergman(BergmanArgs),
    /// Difference of equilibrium energies of two weighted sets.
    Energy(EnergyArgs),
    /// Resultants, Green weights and the pull-back formula for a map of ℙ¹.
    Dynamics(DynamicsArgs),
    /// Convergence harness for one of the main statements.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Envelope(_) => "envelope",
            Command::Transfinite(_) => "transfinite",
            Command::Bergman(_) => "bergman",
            Command::Energy(_) => "energy",
            Command::Dynamics(_) => "dynamics",
            Command::Verify(_) => "verify",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Gen(a) => &a.common,
            Command::Envelope(a) => &a.common,
            Command::Transfinite(a) => &a.common,
            Command::Bergman(a) => &a.common,
            Command::Energy(a) => &a.common,
            Command::Dynamics(a) => &a.common,
            Command::Verify(a) => &a.common,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SetArg {
    Circle,
    Disc,
    Interval,
    Torus,
    CircleProduct,
    File,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PrecisionArg {
    Auto,
    Double,
    Dd,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SolverArg {
    Auto,
    Oracle,
    Bergman,
}

/// Where K lives and which weight it carries.
#[derive(Args, Clone, Debug, Serialize)]
pub struct SetSpec {
    /// Model set, or `file` to load `--path`.
    #[arg(long, value_enum, default_value = "circle")]
    pub set: SetArg,
    /// Radius of circles and disc boundaries (second factor of products: --r2).
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Centre of circles, as `a+bi`.
    #[arg(long, default_value = "0")]
    pub center: String,
    /// Interval endpoints.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    /// Points per one-dimensional factor.
    #[arg(long, default_value_t = 256)]
    pub count: usize,
    /// Point-cloud CSV for `--set file`.
    #[arg(long)]
    pub path: Option<String>,
    /// Weight: zero | log_z0 | poly:c0,c1,... | expr:<id> | <id>.
    #[arg(long, default_value = "zero")]
    pub weight: String,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Serialize)]
pub struct Common {
    /// Largest degree; the schedule is {k/6, k/3, k/2, 2k/3, k}.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Explicit comma-separated degree schedule.
    #[arg(long, conflicts_with = "kmax")]
    pub kschedule: Option<String>,
    /// Write the JSON report to this file.
    #[arg(long)]
    pub out: Option<String>,
    /// Write the main table as CSV to this file.
    #[arg(long)]
    pub csv: Option<String>,
    /// Print the JSON report on stdout instead of a summary.
    #[arg(long)]
    pub json: bool,
    /// Absolute tolerance for verdicts.
    #[arg(long, default_value_t = 0.03)]
    pub tol: f64,
    /// Size of the worker pool (0: all cores). Not part of the report,
    /// which does not depend on it.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,
    /// Recorded in the report; every computation is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    pub precision: PrecisionArg,
    /// Omit the timestamp so that identical runs give identical bytes.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MeasureArg {
    /// Haar on circles and tori, arcsine on intervals, uniform otherwise.
    Default,
    Haar,
    Arcsine,
    Uniform,
    /// Default measure restricted to Im z₁ ≥ 0 (not Bernstein–Markov on a circle).
    UpperHalf,
    /// Area measure of the disc of radius --r.
    DiscArea,
    /// Load `--measure-path`.
    File,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub set: SetSpec,
    /// Also write masses of this measure.
    #[arg(long, value_enum)]
    pub measure: Option<MeasureArg>,
    #[arg(long)]
    pub measure_path: Option<String>,
    /// CSV file to write.
    #[arg(long)]
    pub file: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub set: SetSpec,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: SolverArg,
    /// Also evaluate on the circle of this radius about 0.
    #[arg(long)]
    pub eval_r: Option<f64>,
    /// Contact tolerance of the regularity check.
    #[arg(long, default_value_t = 0.05)]
    pub contact_tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum TransfiniteMethod {
    Leja,
    Robin,
    Energy,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct TransfiniteArgs {
    #[command(flatten)]
    pub set: SetSpec,
    #[arg(long, value_enum, default_value = "leja")]
    pub method: TransfiniteMethod,
    /// Envelope solver for the robin and energy methods.
    #[arg(long, value_enum, default_value = "auto")]
    pub solver: SolverArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct BergmanArgs {
    #[command(flatten)]
    pub set: SetSpec,
    #[arg(long, value_enum, default_value = "default")]
    pub measure: MeasureArg,
    #[arg(long)]
    pub measure_path: Option<String>,
    /// Largest total order of the compared moments.
    #[arg(long, default_value_t = 4)]
    pub moment_order: u32,
    #[command(flatten)]
    pub common: Common,
}

/// The second weighted set of a comparison.
#[derive(Args, Clone, Debug, Serialize)]
pub struct SecondSet {
    #[arg(long, value_enum, default_value = "circle")]
    pub set2: SetArg,
    #[arg(long, default_value_t = 1.0)]
    pub r2: f64,
    #[arg(long, default_value = "0")]
    pub center2: String,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub a2: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b2: f64,
    #[arg(long)]
    pub path2: Option<String>,
    #[arg(long, default_value = "zero")]
    pub weight2: String,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub set: SetSpec,
    #[command(flatten)]
    pub second: SecondSet,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: SolverArg,
    /// Mesh width of the Monge–Ampère discretization.
    #[arg(long)]
    pub h: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub set: SetSpec,
    /// Lift `d=2;F0=c0,c1,c2;F1=...`, coefficients of Z₀^{d−j}Z₁^j.
    #[arg(long, default_value = "d=2;F0=1,0,0;F1=0,0,1")]
    pub map: String,
    /// Orbit length for the Green weight.
    #[arg(long, default_value_t = 60)]
    pub iterations: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ClaimArg {
    #[value(name = "thm_a_i")]
    #[serde(rename = "thm_a_i")]
    ThmAI,
    #[value(name = "thm_a_ii")]
    #[serde(rename = "thm_a_ii")]
    ThmAIi,
    #[value(name = "cor_a_i")]
    #[serde(rename = "cor_a_i")]
    CorAI,
    #[value(name = "cor_a_ii")]
    #[serde(rename = "cor_a_ii")]
    CorAIi,
    LemmaElde,
    ThmB,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub claim: ClaimArg,
    #[command(flatten)]
    pub set: SetSpec,
    /// Second weighted pair of an ℒ_k comparison.
    #[command(flatten)]
    pub second: SecondSet,
    /// Direction u of the energy derivative (`thm_b`).
    #[arg(long, default_value = "re2")]
    pub u: String,
    /// Measure on K for L² routes.
    #[arg(long, value_enum, default_value = "default")]
    pub measure: MeasureArg,
    #[arg(long)]
    pub measure_path: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: SolverArg,
    #[command(flatten)]
    pub common: Common,
}
