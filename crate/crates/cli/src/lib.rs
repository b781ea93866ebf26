//! Command implementations behind the `hdgms` binary.
//!
//! Every command writes to a caller-supplied sink and returns an [`Exit`]
//! code, so the binary and the tests share one code path.

pub mod args;
pub mod campaign;

pub use args::{Cli, Command};
pub use campaign::{BoundarySpec, CampaignEntry, EntryOutcome, MeshSpec, Status, VerifyCampaign};

use args::{CheckSystemArgs, CounterexampleArgs, MeshArgs, MeshFlags, MethodFlags, SolveArgs, VerifyArgs};
use hdgms_core::geometry::GeometryError;
use hdgms_core::hdg::{solve, Discretization, HdgError, NewtonOptions, Penalty};
use hdgms_core::msym::{cgh_counterexample, MeshStats, MsclReport, MsymError, RegionSampler};
use hdgms_core::system::{builtin_system, closedness_residual, sample_states, SystemError, SystemSpec};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Largest closedness residual accepted by `check-system`.
pub const CLOSEDNESS_GATE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    GateFailure = 1,
    Usage = 2,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Hdg(#[from] HdgError),
    #[error(transparent)]
    Msym(#[from] MsymError),
}

impl CliError {
    /// Numerical failures map to 1, configuration problems to 2.
    pub fn exit(&self) -> Exit {
        fn hdg(e: &HdgError) -> Exit {
            match e {
                HdgError::SingularLocalBlock { .. }
                | HdgError::SingularTraceSystem { .. }
                | HdgError::NoConvergence { .. } => Exit::GateFailure,
                _ => Exit::Usage,
            }
        }
        match self {
            CliError::Hdg(e) | CliError::Msym(MsymError::Hdg(e)) => hdg(e),
            CliError::Msym(MsymError::SourceIteration { .. }) => Exit::GateFailure,
            _ => Exit::Usage,
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Write `text` to `path` when given, otherwise to `out`.
fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

/// Parse a `WxH` rectangle extent.
pub fn parse_extent(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("invalid rectangle '{text}', expected WxH"));
    let (w, h) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

/// Parse `λ` or `plus,minus`.
pub fn parse_penalty(text: &str) -> Result<Penalty, CliError> {
    let bad = || CliError::Usage(format!("invalid penalty '{text}', expected λ or plus,minus"));
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0))
        .collect::<Option<_>>()
        .ok_or_else(bad)?;
    match vals.as_slice() {
        [l] => Ok(Penalty::uniform(*l)),
        [p, m] => Ok(Penalty::two_sided(*p, *m)),
        _ => Err(bad()),
    }
}

impl MeshFlags {
    pub fn spec(&self, seed: u64) -> Result<MeshSpec, CliError> {
        if let Some(path) = &self.mesh {
            return Ok(MeshSpec::File { path: path.clone() });
        }
        if self.two_equilateral {
            return Ok(MeshSpec::TwoEquilateral);
        }
        if let Some(rect) = &self.rect {
            let (width, height) = parse_extent(rect)?;
            return Ok(MeshSpec::Rect { width, height, nx: self.nx, ny: self.ny, perturb: self.perturb, seed });
        }
        if let Some(iv) = &self.interval {
            return Ok(MeshSpec::Interval { a: iv[0], b: iv[1], cells: self.cells });
        }
        Err(CliError::Usage("no mesh given: use --mesh, --two-equilateral, --rect or --interval".into()))
    }
}

impl MethodFlags {
    pub fn penalty_value(&self) -> Result<Penalty, CliError> {
        if let Some(text) = &self.penalty {
            return parse_penalty(text);
        }
        if let Some(path) = &self.penalty_file {
            let text =
                std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            return serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid penalty file: {e}")));
        }
        Ok(Penalty::default())
    }

    pub fn entry(&self, mesh: MeshSpec) -> Result<CampaignEntry, CliError> {
        let method = self.method.ok_or_else(|| CliError::Usage("--method is required".into()))?;
        let mut entry = CampaignEntry::new(method, self.degree, &self.system, mesh);
        entry.penalty = self.penalty_value()?;
        Ok(entry)
    }
}

#[derive(Debug, Serialize)]
struct ClosednessReport<'a> {
    system: &'a str,
    dim: usize,
    samples: usize,
    residual: f64,
    gate: f64,
    pass: bool,
}

pub fn cmd_check_system(args: &CheckSystemArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    let text = args
        .name
        .as_deref()
        .or(args.system.as_deref())
        .ok_or_else(|| CliError::Usage("no system given".into()))?;
    let spec: SystemSpec = text.parse()?;
    let sys = builtin_system(&spec, args.dim)?;
    let states = sample_states(sys.m, sys.n, args.samples.max(1), args.seed, 1.0);
    let residual = closedness_residual(&sys, &states);
    let pass = residual <= CLOSEDNESS_GATE;
    if args.json {
        let rep = ClosednessReport { system: text, dim: args.dim, samples: states.len(), residual, gate: CLOSEDNESS_GATE, pass };
        emit(out, None, &hdgms_core::json::to_string(&rep, true).expect("report serializes"))?;
    } else {
        writeln!(
            out,
            "{} {text} (m={}, n={}): closedness residual {residual:.3e} over {} states, gate {CLOSEDNESS_GATE:e}",
            if pass { "PASS" } else { "FAIL" },
            sys.m,
            sys.n,
            states.len()
        )?;
    }
    Ok(if pass { Exit::Pass } else { Exit::GateFailure })
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    let mut campaign = match &args.campaign {
        Some(path) => {
            if args.method.method.is_some() || args.mesh.given() {
                return Err(CliError::Usage("--campaign cannot be combined with entry flags".into()));
            }
            VerifyCampaign::load(path)?
        }
        None => {
            let mut entry = args.method.entry(args.mesh.spec(args.seed)?)?;
            entry.boundary = BoundarySpec::Random { seed: args.seed };
            entry.sampler = RegionSampler { count: args.regions, seed: args.seed };
            entry.expect_strong_fail = args.expect_strong_fail;
            VerifyCampaign { output: None, tolerances: Default::default(), entries: vec![entry] }
        }
    };
    if let Some(dir) = &args.out {
        campaign.output = Some(dir.clone());
    }
    campaign.validate()?;
    let outcomes = campaign.run();
    if let Some(dir) = &campaign.output {
        for (i, o) in outcomes.iter().enumerate() {
            if let Ok(r) = &o.report {
                write_file(&dir.join(o.file_name(i)), &r.to_json(true))?;
            }
        }
    }
    if args.json {
        let reports: Vec<Option<&MsclReport>> = outcomes.iter().map(|o| o.report.as_ref().ok()).collect();
        emit(out, None, &hdgms_core::json::to_string(&reports, true).expect("reports serialize"))?;
    } else {
        out.write_all(campaign::summary_table(&outcomes).as_bytes())?;
        let passed = outcomes.iter().filter(|o| o.status.ok()).count();
        writeln!(out, "{passed}/{} entries pass", outcomes.len())?;
    }
    Ok(if outcomes.iter().all(|o| o.status.ok()) { Exit::Pass } else { Exit::GateFailure })
}

fn format_values(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:+.12}")).collect();
    format!("[{}]", items.join(", "))
}

pub fn cmd_counterexample(args: &CounterexampleArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    if args.degree != 1 {
        return Err(CliError::Usage(format!(
            "the counterexample is defined for degree 1 only, got --degree {}",
            args.degree
        )));
    }
    let record = cgh_counterexample()?;
    let text = if args.json {
        hdgms_core::json::to_string(&record, true).expect("record serializes")
    } else {
        let mut s = String::new();
        for c in &record.checks {
            s.push_str(&format!(
                "{}  {}  max error {:.3e} (tolerance {:.0e})\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.max_error,
                c.tolerance
            ));
            s.push_str(&format!("      expected {}\n", format_values(&c.expected)));
            s.push_str(&format!("      computed {}\n", format_values(&c.computed)));
        }
        s
    };
    emit(out, args.out.as_deref(), &text)?;
    Ok(if record.pass { Exit::Pass } else { Exit::GateFailure })
}

pub fn cmd_mesh(args: &MeshArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    let mesh = args.mesh.spec(args.seed)?.build()?;
    emit(out, args.out.as_deref(), &mesh.to_json())?;
    Ok(Exit::Pass)
}

#[derive(Debug, Serialize)]
pub struct CellCoefficients {
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
    pub w: Vec<f64>,
}

/// Machine-readable solution summary written by `solve --json`.
#[derive(Debug, Serialize)]
pub struct SolutionDocument {
    pub method: String,
    pub system: String,
    pub mesh: MeshStats,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub boundary: Vec<f64>,
    pub trace: Vec<f64>,
    pub cells: Vec<CellCoefficients>,
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    let mut entry = args.method.entry(args.mesh.spec(args.seed)?)?;
    entry.boundary = if args.zero_boundary { BoundarySpec::Zero } else { BoundarySpec::Random { seed: args.seed } };
    let r = entry.resolve()?;
    let disc = Discretization::new(r.mesh.clone(), r.method, r.system)?;
    let sol = solve(&disc, &entry.boundary.data(&disc), &NewtonOptions::default())?;
    let n_cells = disc.mesh.num_cells();
    let text = if args.json {
        let doc = SolutionDocument {
            method: disc.method.label(),
            system: disc.system.label.clone(),
            mesh: MeshStats::of(&disc.mesh),
            newton_iterations: sol.newton_iterations,
            residual_norm: sol.residual_norm,
            boundary: sol.boundary.values.as_slice().to_vec(),
            trace: sol.trace.as_slice().to_vec(),
            cells: (0..n_cells)
                .map(|c| CellCoefficients {
                    u: sol.u_coeffs(c).to_vec(),
                    sigma: sol.sigma_coeffs(c).to_vec(),
                    w: sol.w_coeffs(c).to_vec(),
                })
                .collect(),
        };
        hdgms_core::json::to_string(&doc, true).expect("solution serializes")
    } else {
        let mut s = format!("method {}\nsystem {}\n", disc.method.label(), disc.system.label);
        s.push_str(&format!(
            "mesh dim={} cells={} facets={}\n",
            disc.mesh.dim(),
            n_cells,
            disc.mesh.facets().len()
        ));
        s.push_str(&format!(
            "trace dofs {} ({} boundary)\nnewton iterations {} residual {:.3e}\n",
            disc.layout.n_interior() + disc.layout.n_boundary(),
            disc.layout.n_boundary(),
            sol.newton_iterations,
            sol.residual_norm
        ));
        for c in 0..n_cells {
            let x = disc.mesh.cell_centroid(c);
            s.push_str(&format!("cell {c:>4} centroid u = {}\n", format_values(&sol.u_at(c, x))));
        }
        s
    };
    emit(out, args.out.as_deref(), &text)?;
    Ok(Exit::Pass)
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Exit, CliError> {
    match &cli.command {
        Command::CheckSystem(a) => cmd_check_system(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Counterexample(a) => cmd_counterexample(a, out),
        Command::Mesh(a) => cmd_mesh(a, out),
        Command::Solve(a) => cmd_solve(a, out),
    }
}
