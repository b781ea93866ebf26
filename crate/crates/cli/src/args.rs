use clap::{Args, Parser, Subcommand};
use hdgms_core::hdg::Family;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "hdgms", version, about = "HDG solver and multisymplecticity workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether a builtin system is Hamiltonian (closed coefficient Jacobian).
    CheckSystem(CheckSystemArgs),
    /// Run a verification campaign, or a single entry given by flags.
    Verify(VerifyArgs),
    /// Reproduce the lowest-order continuous Galerkin counterexample.
    Counterexample(CounterexampleArgs),
    /// Generate a mesh document.
    Mesh(MeshArgs),
    /// Solve one problem and report the solution.
    Solve(SolveArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MeshFlags {
    /// Mesh document to load.
    #[arg(long, conflicts_with_all = ["two_equilateral", "rect", "interval"])]
    pub mesh: Option<PathBuf>,
    /// Two equilateral triangles with edge √2 sharing one edge.
    #[arg(long, conflicts_with_all = ["rect", "interval"])]
    pub two_equilateral: bool,
    /// Triangulated rectangle `WxH` with the origin at a corner.
    #[arg(long, value_name = "WxH", conflicts_with = "interval")]
    pub rect: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub nx: usize,
    #[arg(long, default_value_t = 4)]
    pub ny: usize,
    /// Interior vertex displacement relative to the grid spacing.
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,
    /// Interval endpoints.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub interval: Option<Vec<f64>>,
    #[arg(long, default_value_t = 8)]
    pub cells: usize,
}

impl MeshFlags {
    pub fn given(&self) -> bool {
        self.mesh.is_some() || self.two_equilateral || self.rect.is_some() || self.interval.is_some()
    }
}

#[derive(Debug, Clone, Args)]
pub struct MethodFlags {
    #[arg(long, value_parser = parse_family)]
    pub method: Option<Family>,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Builtin system, optionally with parameters: `name:key=value,...`.
    #[arg(long, default_value = "poisson")]
    pub system: String,
    /// Uniform penalty `λ`, or `plus,minus` for two-sided values.
    #[arg(long, conflicts_with = "penalty_file")]
    pub penalty: Option<String>,
    /// JSON penalty document.
    #[arg(long)]
    pub penalty_file: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct CheckSystemArgs {
    /// System name; same as `--system`.
    pub name: Option<String>,
    #[arg(long, conflicts_with = "name")]
    pub system: Option<String>,
    /// Space dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Campaign document. Without it, a single entry is built from the flags.
    #[arg(long)]
    pub campaign: Option<PathBuf>,
    #[command(flatten)]
    pub method: MethodFlags,
    #[command(flatten)]
    pub mesh: MeshFlags,
    /// Seed for mesh perturbation and boundary data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of sampled connected regions.
    #[arg(long, default_value_t = 10)]
    pub regions: usize,
    #[arg(long)]
    pub expect_strong_fail: bool,
    /// Directory for report files; overrides the campaign value.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print reports as a JSON array instead of the summary table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub mesh: MeshFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub method: MethodFlags,
    #[command(flatten)]
    pub mesh: MeshFlags,
    /// Seed for mesh perturbation and boundary data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Homogeneous boundary data instead of seeded random values.
    #[arg(long)]
    pub zero_boundary: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}
