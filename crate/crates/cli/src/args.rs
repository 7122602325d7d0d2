use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hmono_core::heis::parse_reals;
use hmono_core::{HVec, Point};

#[derive(Debug, Parser)]
#[command(name = "hmono", version, about = "Monotone operators on the Heisenberg group")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample horizontal pairs and check H-monotonicity.
    CheckMonotone(CheckMonotoneArgs),
    /// Check H-cyclical monotonicity on one closed H-chain.
    CheckCyclic(CheckCyclicArgs),
    /// Search random closed H-chains for a cyclic violation.
    SearchCyclic(SearchCyclicArgs),
    /// Solve the horizontal resolvent equation p ∈ ξ₁(ζ) + λT(ζ).
    Resolve(ResolveArgs),
    /// Points of the resolvent fiber on the planes through (0, 0, h).
    Fiber(FiberArgs),
    /// Pairwise 1-Lipschitz check of the horizontal resolvent.
    Lipschitz(LipschitzArgs),
    /// Auxiliary sequence η′ₖ ∈ H_η′ ∩ H_ηₖ.
    LemmaSeq(LemmaSeqArgs),
    /// Grid check of the spherical sector inner-product bound.
    SectorCheck(SectorCheckArgs),
    /// Sector-map Jacobian: closed form against finite differences.
    JacobianCheck(JacobianCheckArgs),
    /// Boundedness of the support polyhedron P(ξ) on a grid of ξ.
    Polytope(PolytopeArgs),
    /// Diameter of T along a vertical segment.
    VerticalProbe(VerticalProbeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OpArgs {
    /// Operator config: a JSON file, or one of the built-ins
    /// `example1`, `negated`, `gauge`.
    #[arg(long)]
    pub op: String,
    /// Expected dimension; rejected if it disagrees with the operator.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckMonotoneArgs {
    #[command(flatten)]
    pub op: OpArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Half-width of the sampling box for base points.
    #[arg(long = "box", default_value_t = 5.0)]
    pub half_width: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Keep the points; reject the chain unless it is already closed.
    Validate,
    /// Lift the ξ₁-polygon from the first height, moving the last vertex to close it.
    Adjust,
}

#[derive(Debug, Args)]
pub struct CheckCyclicArgs {
    #[command(flatten)]
    pub op: OpArgs,
    /// Chain points separated by ';', each as comma-separated reals.
    #[arg(long, allow_hyphen_values = true)]
    pub chain: String,
    #[arg(long, value_enum, default_value = "validate")]
    pub mode: Mode,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SearchCyclicArgs {
    #[command(flatten)]
    pub op: OpArgs,
    #[arg(long, default_value_t = 6)]
    pub max_len: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long = "box", default_value_t = 5.0)]
    pub half_width: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Residual tolerance of the Minty iteration.
    #[arg(long, default_value_t = 1e-10)]
    pub solver_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    #[command(flatten)]
    pub op: OpArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    pub base: Point,
    #[arg(long, value_parser = hvec, allow_hyphen_values = true)]
    pub target: HVec,
    /// Initial horizontal offset from the base.
    #[arg(long, value_parser = hvec, allow_hyphen_values = true)]
    pub start: Option<HVec>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FiberArgs {
    #[command(flatten)]
    pub op: OpArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, value_parser = hvec, allow_hyphen_values = true)]
    pub target: HVec,
    #[arg(long, value_parser = reals, allow_hyphen_values = true, default_value = "-1,0,1")]
    pub heights: Reals,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct LipschitzArgs {
    #[command(flatten)]
    pub op: OpArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, value_parser = hvec, allow_hyphen_values = true)]
    pub target: HVec,
    #[arg(long, value_parser = hvec, allow_hyphen_values = true)]
    pub target2: HVec,
    #[arg(long, value_parser = reals, allow_hyphen_values = true, default_value = "-1,0,1")]
    pub heights: Reals,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct LemmaSeqArgs {
    /// Base point η (defaults to the identity of ℍ¹).
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    pub eta: Option<Point>,
    /// η′ ∈ H_η, distinct from η.
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    pub eta_prime: Point,
    /// Sequence length; the sequence is ηₖ = η ∘ (0, 0, 1/k).
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SectorCheckArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Grid step is π / step_div; must be at least 32.
    #[arg(long, default_value_t = 64)]
    pub step_div: u32,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct JacobianCheckArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub fd_step: f64,
    /// Angles are drawn at least this far from the faces of their π/4 cube.
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct PolytopeArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// A single ξ; without it a grid inside B(0, r) is scanned.
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    pub xi: Option<Point>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.3)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// The margin scan uses directions on the angle grid of step π / grid_div.
    #[arg(long, default_value_t = 16)]
    pub grid_div: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VerticalProbeArgs {
    #[command(flatten)]
    pub op: OpArgs,
    #[arg(long, value_parser = hvec, allow_hyphen_values = true)]
    pub x: HVec,
    #[arg(long, value_parser = reals, allow_hyphen_values = true, default_value = "-1,1")]
    pub t_range: Reals,
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Exit 1 if the union diameter exceeds this.
    #[arg(long)]
    pub max_diameter: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

fn point(s: &str) -> Result<Point, String> {
    s.parse().map_err(|e: hmono_core::Error| e.to_string())
}

fn hvec(s: &str) -> Result<HVec, String> {
    s.parse().map_err(|e: hmono_core::Error| e.to_string())
}

/// Comma-separated list of reals given as a single argument.
#[derive(Clone, Debug)]
pub struct Reals(pub Vec<f64>);

fn reals(s: &str) -> Result<Reals, String> {
    parse_reals(s).map(Reals).map_err(|e| e.to_string())
}
