//! Numerical checks of multisymplectic conservation laws for discrete
//! solutions: tangent variations, boundary pairings over unions of cells,
//! normal jumps of the numerical flux, reciprocity, and the closed-form
//! computations for the lowest-order continuous Galerkin method on
//! equilateral triangles.

use crate::geometry::{build_equilateral_triangle, build_two_equilateral_mesh, Mesh};
use crate::hdg::{
    solve, BoundaryData, Discretization, DiscreteSolution, Family, HdgError, Linearization, MethodSpec, NewtonOptions,
};
use crate::polyspace::{gauss_legendre, quadrature_rule};
use crate::system::{builtin_from_str, inf_norm, SourceProbe};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MsymError {
    #[error("region is empty")]
    EmptyRegion,
    #[error("region refers to cell {cell}, mesh has {count} cells")]
    CellOutOfRange { cell: usize, count: usize },
    #[error("source iteration did not converge after {iterations} steps (change {change:e})")]
    SourceIteration { iterations: usize, change: f64 },
    #[error("counterexample is defined for degree 1, got {0}")]
    CounterexampleDegree(usize),
    #[error(transparent)]
    Hdg(#[from] HdgError),
}

pub type Result<T> = std::result::Result<T, MsymError>;

/// Gate tolerances applied to a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub local: f64,
    pub strong: f64,
    pub jump_identity: f64,
    pub conservativity: f64,
    pub schur: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { local: 1e-9, strong: 1e-9, jump_identity: 1e-10, conservativity: 1e-10, schur: 1e-12 }
    }
}

/// Tangent variations of a base solution, one per boundary trace DOF.
#[derive(Debug, Clone)]
pub struct VariationSet {
    /// Label of the boundary DOF driving each variation.
    pub labels: Vec<String>,
    /// Global trace DOF driving each variation.
    pub boundary_dofs: Vec<usize>,
    /// `cell_states[a][K]`: local unknowns of variation `a` in cell `K`.
    pub cell_states: Vec<Vec<DVector<f64>>>,
    pub traces: Vec<DVector<f64>>,
}

impl VariationSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Columns for cell `K`: `(local unknowns, cell-local traces)`.
    fn cell_columns(&self, disc: &Discretization, cell: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let ops = &disc.cells[cell];
        let k = self.len();
        let mut x = DMatrix::zeros(ops.nloc, k);
        let mut t = DMatrix::zeros(ops.trace_ids.len(), k);
        for a in 0..k {
            x.set_column(a, &self.cell_states[a][cell]);
            t.set_column(a, &ops.gather_trace(&self.traces[a]));
        }
        (x, t)
    }
}

/// Derivatives of the solution with respect to each boundary trace value.
pub fn tangent_variations(base: &DiscreteSolution) -> Result<VariationSet> {
    let lin = Linearization::at(base)?;
    Ok(variations_from(base, &lin))
}

pub fn variations_from(base: &DiscreteSolution, lin: &Linearization) -> VariationSet {
    let layout = &base.disc.layout;
    let nb = layout.n_boundary();
    let solved: Vec<(Vec<DVector<f64>>, DVector<f64>)> = (0..nb)
        .into_par_iter()
        .map(|a| {
            let mut e = DVector::zeros(nb);
            e[a] = 1.0;
            lin.solve(&[], &e)
        })
        .collect();
    let (cell_states, traces) = solved.into_iter().unzip();
    VariationSet {
        labels: layout.boundary.iter().map(|&d| layout.labels[d].clone()).collect(),
        boundary_dofs: layout.boundary.clone(),
        cell_states,
        traces,
    }
}

/// `∮_e v̂_a τ̂_b·n` for every cell side, and the same pairing with the
/// interior values subtracted from both traces.
#[derive(Debug, Clone)]
pub struct PairingTable {
    /// `[cell][local facet]`
    pub sides: Vec<Vec<DMatrix<f64>>>,
    /// `[cell][local facet]`: `∮_e (v̂_a − v_a)(τ̂_b − τ_b)·n`.
    pub jump_sides: Vec<Vec<DMatrix<f64>>>,
}

/// One pairing matrix per local side.
type SideForms = Vec<DMatrix<f64>>;

impl PairingTable {
    pub fn new(base: &DiscreteSolution, vars: &VariationSet) -> Self {
        let disc = &base.disc;
        let per_cell: Vec<(SideForms, SideForms)> = (0..disc.cells.len())
            .into_par_iter()
            .map(|c| {
                let ops = &disc.cells[c];
                let (x, t) = vars.cell_columns(disc, c);
                ops.sides
                    .iter()
                    .map(|side| {
                        let ts = t.rows(side.trace_offset, side.trace_len);
                        let u_hat = &side.et * ts;
                        let flux = &side.fx * &x + &side.ft * ts;
                        let u_in = &side.eu * &x;
                        let s_in = &side.esn * &x;
                        let pair = side.pair(&u_hat, &flux);
                        let jump = side.pair(&(u_hat - u_in), &(flux - s_in));
                        (pair, jump)
                    })
                    .unzip()
            })
            .collect();
        let (sides, jump_sides) = per_cell.into_iter().unzip();
        PairingTable { sides, jump_sides }
    }

    /// Pairing over `∂R`, taking each boundary facet from the side inside `R`.
    pub fn region(&self, mesh: &Mesh, region: &Region) -> PairingMatrix {
        let k = self.sides.first().and_then(|s| s.first()).map_or(0, |m| m.nrows());
        let mut b = DMatrix::zeros(k, k);
        let inside: BTreeSet<usize> = region.cells.iter().copied().collect();
        for &c in &region.cells {
            for (l, p) in self.sides[c].iter().enumerate() {
                let facet = mesh.facet(mesh.cell_facet(c, l));
                let across = facet.sides().map(|s| s.cell).find(|&o| o != c);
                if across.is_none_or(|o| !inside.contains(&o)) {
                    b += p;
                }
            }
        }
        PairingMatrix::new(region.clone(), b)
    }

    pub fn cell(&self, cell: usize) -> DMatrix<f64> {
        self.sides[cell].iter().fold(DMatrix::zeros(0, 0), |acc, p| if acc.is_empty() { p.clone() } else { acc + p })
    }

    fn jump_cell(&self, cell: usize) -> DMatrix<f64> {
        self.jump_sides[cell].iter().fold(DMatrix::zeros(0, 0), |acc, p| if acc.is_empty() { p.clone() } else { acc + p })
    }
}

/// A union of cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub label: String,
    /// Ascending cell ids.
    pub cells: Vec<usize>,
}

impl Region {
    pub fn new(label: impl Into<String>, cells: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = cells.into_iter().collect();
        Region { label: label.into(), cells: set.into_iter().collect() }
    }

    pub fn whole(mesh: &Mesh) -> Self {
        Region::new("all", 0..mesh.num_cells())
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.cells.is_empty() {
            return Err(MsymError::EmptyRegion);
        }
        match self.cells.iter().find(|&&c| c >= mesh.num_cells()) {
            Some(&cell) => Err(MsymError::CellOutOfRange { cell, count: mesh.num_cells() }),
            None => Ok(()),
        }
    }
}

/// Regions for strong checks: every singleton, the whole mesh, and `count`
/// connected unions grown by facet adjacency from seeded start cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionSampler {
    pub count: usize,
    pub seed: u64,
}

impl Default for RegionSampler {
    fn default() -> Self {
        RegionSampler { count: 10, seed: 0 }
    }
}

impl RegionSampler {
    pub fn regions(&self, mesh: &Mesh) -> Vec<Region> {
        let nc = mesh.num_cells();
        let mut out: Vec<Region> = (0..nc).map(|c| Region::new(format!("cell {c}"), [c])).collect();
        if nc > 1 {
            out.push(Region::whole(mesh));
        }
        if nc < 3 {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for k in 0..self.count {
            let target = rng.gen_range(2..nc);
            let mut set = BTreeSet::from([rng.gen_range(0..nc)]);
            while set.len() < target {
                let frontier: Vec<usize> = set
                    .iter()
                    .flat_map(|&c| mesh.neighbors(c))
                    .filter(|o| !set.contains(o))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                if frontier.is_empty() {
                    break;
                }
                set.insert(frontier[rng.gen_range(0..frontier.len())]);
            }
            out.push(Region::new(format!("union {k}"), set));
        }
        out
    }
}

/// Relative size of the antisymmetric part: `‖B − Bᵀ‖∞ / max(1, max |B_ij|)`.
pub fn asymmetry(b: &DMatrix<f64>) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    inf_norm(&(b - b.transpose())) / b.amax().max(1.0)
}

/// `B[a][b] = ∮_{∂R} v̂_a τ̂_b·n`; the 2-form on a pair is `B[a][b] − B[b][a]`.
#[derive(Debug, Clone)]
pub struct PairingMatrix {
    pub region: Region,
    pub matrix: DMatrix<f64>,
    /// Largest entry magnitude.
    pub scale: f64,
}

impl PairingMatrix {
    pub fn new(region: Region, matrix: DMatrix<f64>) -> Self {
        let scale = if matrix.is_empty() { 0.0 } else { matrix.amax() };
        PairingMatrix { region, matrix, scale }
    }

    pub fn two_form(&self) -> DMatrix<f64> {
        &self.matrix - self.matrix.transpose()
    }

    pub fn residual(&self) -> f64 {
        asymmetry(&self.matrix)
    }
}

pub fn boundary_pairing(base: &DiscreteSolution, vars: &VariationSet, region: &Region) -> Result<PairingMatrix> {
    region.validate(&base.disc.mesh)?;
    Ok(PairingTable::new(base, vars).region(&base.disc.mesh, region))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMscl {
    pub max: f64,
    pub per_cell: Vec<f64>,
}

pub fn local_mscl_from(table: &PairingTable) -> LocalMscl {
    let per_cell: Vec<f64> = (0..table.sides.len()).map(|c| asymmetry(&table.cell(c))).collect();
    LocalMscl { max: per_cell.iter().cloned().fold(0.0, f64::max), per_cell }
}

pub fn local_mscl_residual(base: &DiscreteSolution, vars: &VariationSet) -> LocalMscl {
    local_mscl_from(&PairingTable::new(base, vars))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongEntry {
    pub region: Region,
    pub residual: f64,
}

pub enum RegionSpec<'a> {
    Explicit(&'a [Region]),
    Sampled(RegionSampler),
}

pub fn strong_mscl_from(table: &PairingTable, mesh: &Mesh, regions: &[Region]) -> Vec<StrongEntry> {
    regions
        .iter()
        .map(|r| StrongEntry { region: r.clone(), residual: table.region(mesh, r).residual() })
        .collect()
}

pub fn strong_mscl_residual(base: &DiscreteSolution, vars: &VariationSet, spec: RegionSpec<'_>) -> Result<Vec<StrongEntry>> {
    let mesh = &base.disc.mesh;
    let regions = match spec {
        RegionSpec::Explicit(r) => r.to_vec(),
        RegionSpec::Sampled(s) => s.regions(mesh),
    };
    for r in &regions {
        r.validate(mesh)?;
    }
    Ok(strong_mscl_from(&PairingTable::new(base, vars), mesh, &regions))
}

pub fn jump_identity_from(table: &PairingTable) -> f64 {
    (0..table.sides.len())
        .map(|c| {
            let b = table.cell(c);
            let j = table.jump_cell(c);
            if b.is_empty() {
                return 0.0;
            }
            let lhs = &b - b.transpose();
            let rhs = &j - j.transpose();
            (lhs - rhs).amax() / b.amax().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Largest entrywise gap between `∮ dû∧dσ̂` and `∮ d(û−u)∧d(σ̂−σ)` over cells.
pub fn jump_identity_residual(base: &DiscreteSolution, vars: &VariationSet) -> f64 {
    jump_identity_from(&PairingTable::new(base, vars))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetJump {
    pub facet: usize,
    /// L² norm of the normal jump over the facet, all components.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservativityTable {
    pub facets: Vec<FacetJump>,
    pub max: f64,
}

/// L² norms of `[[σ̂]] = σ̂·n⁺ + σ̂·n⁻` on internal facets.
pub fn conservativity_jump(base: &DiscreteSolution) -> ConservativityTable {
    let disc = &base.disc;
    let mesh = &disc.mesh;
    let side_flux = |cell: usize, local: usize| -> DVector<f64> {
        let ops = &disc.cells[cell];
        let side = &ops.sides[local];
        let t = ops.gather_trace(&base.trace);
        &side.fx * &base.cell_states[cell] + &side.ft * t.rows(side.trace_offset, side.trace_len)
    };
    let mut facets = Vec::new();
    for (f, facet) in mesh.facets().iter().enumerate() {
        let Some(minus) = &facet.minus else { continue };
        let plus = &facet.plus;
        let jump = side_flux(plus.cell, plus.local) + side_flux(minus.cell, minus.local);
        let w = &disc.cells[plus.cell].sides[plus.local].weights;
        let norm = jump.iter().zip(w.iter()).map(|(j, w)| w * j * j).sum::<f64>().sqrt();
        facets.push(FacetJump { facet: f, norm });
    }
    let max = facets.iter().map(|j| j.norm).fold(0.0, f64::max);
    ConservativityTable { facets, max }
}

/// A smooth scalar function with its gradient and Laplacian.
#[derive(Clone)]
pub struct SmoothFunction {
    pub value: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    pub grad: Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
    pub laplacian: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
}

impl SmoothFunction {
    pub fn new(
        value: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        grad: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
        laplacian: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SmoothFunction { value: Arc::new(value), grad: Arc::new(grad), laplacian: Arc::new(laplacian) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    /// `∫(v Δv′ − v′ Δv) = ∮(v ∂ₙv′ − v′ ∂ₙv)`
    GreenSecondIdentity,
    /// Laplace with `∂v = τ + ψ` (constant ψ) and `−div τ = g`.
    ReciprocityIntegral,
}

/// `|LHS − RHS|` of an integral identity on one triangle, by quadrature.
/// `psi` and `psi_prime` are the constant incremental sources for the
/// reciprocity form and are ignored for Green's identity.
pub fn continuum_identity_check(
    kind: IdentityKind,
    v: &SmoothFunction,
    v_prime: &SmoothFunction,
    triangle: [[f64; 2]; 3],
    psi: [f64; 2],
    psi_prime: [f64; 2],
) -> f64 {
    let [p0, p1, p2] = triangle;
    let e1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let e2 = [p2[0] - p0[0], p2[1] - p0[1]];
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    let orient = det.signum();
    let rule = quadrature_rule(2, 20).expect("supported degree");
    let (psi, psi_prime) = match kind {
        IdentityKind::GreenSecondIdentity => ([0.0; 2], [0.0; 2]),
        IdentityKind::ReciprocityIntegral => (psi, psi_prime),
    };
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let tau = |f: &SmoothFunction, s: [f64; 2], x: [f64; 2]| {
        let g = (f.grad)(x);
        [g[0] - s[0], g[1] - s[1]]
    };
    let mut volume = 0.0;
    for (xi, w) in rule.points.iter().zip(&rule.weights) {
        let x = [p0[0] + e1[0] * xi[0] + e2[0] * xi[1], p0[1] + e1[1] * xi[0] + e2[1] * xi[1]];
        let w = w * det.abs();
        let (a, b) = ((v.value)(x), (v_prime.value)(x));
        let (g, g_prime) = (-(v.laplacian)(x), -(v_prime.laplacian)(x));
        volume += w
            * (dot(psi, tau(v_prime, psi_prime, x)) - a * g_prime - dot(psi_prime, tau(v, psi, x)) + b * g);
    }
    let (ts, ws) = gauss_legendre(12);
    let mut boundary = 0.0;
    for (a, b) in [(p0, p1), (p1, p2), (p2, p0)] {
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = d[0].hypot(d[1]);
        let normal = [orient * d[1] / len, -orient * d[0] / len];
        for (t, w) in ts.iter().zip(&ws) {
            let x = [a[0] + t * d[0], a[1] + t * d[1]];
            let term = (v.value)(x) * dot(tau(v_prime, psi_prime, x), normal)
                - (v_prime.value)(x) * dot(tau(v, psi, x), normal);
            boundary += w * len * term;
        }
    }
    (boundary - volume).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReciprocityOutcome {
    /// `Σ_K ∮(v̂ τ̂′ − v̂′ τ̂)·n`
    pub boundary_term: f64,
    /// `Σ_K ∫[ψ·τ′ − v g′ − ψ′·τ + v′ g]`
    pub source_term: f64,
    pub scale: f64,
    pub residual: f64,
}

fn solve_with_sources(
    lin: &Linearization,
    probe: &SourceProbe,
    delta_b: &DVector<f64>,
) -> Result<(Vec<DVector<f64>>, DVector<f64>)> {
    let disc = &lin.disc;
    let mut states: Vec<DVector<f64>> = disc.cells.iter().map(|c| DVector::zeros(c.nloc)).collect();
    let max_iter = if probe.state_independent { 1 } else { 60 };
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let rhs = lin.source_rhs(probe, &states);
        let (next, trace) = lin.solve(&rhs, delta_b);
        change = next.iter().zip(&states).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        let size = next.iter().map(|a| a.amax()).fold(1.0, f64::max);
        states = next;
        if probe.state_independent || change <= 1e-14 * size {
            return Ok((states, trace));
        }
    }
    Err(MsymError::SourceIteration { iterations: max_iter, change })
}

/// Reciprocity defect of two linearized solves with incremental sources
/// and seeded random boundary perturbations.
pub fn discrete_reciprocity_residual(
    base: &DiscreteSolution,
    probe: &SourceProbe,
    probe_prime: &SourceProbe,
    seed: u64,
) -> Result<ReciprocityOutcome> {
    let lin = Linearization::at(base)?;
    let disc = &base.disc;
    let nb = disc.layout.n_boundary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let db = DVector::from_fn(nb, |_, _| rng.gen_range(-1.0..=1.0));
    let db_prime = DVector::from_fn(nb, |_, _| rng.gen_range(-1.0..=1.0));
    let (x, t) = solve_with_sources(&lin, probe, &db)?;
    let (xp, tp) = solve_with_sources(&lin, probe_prime, &db_prime)?;
    let vars = VariationSet {
        labels: vec!["first".into(), "second".into()],
        boundary_dofs: vec![],
        cell_states: vec![x, xp],
        traces: vec![t, tp],
    };
    let table = PairingTable::new(base, &vars);
    let mut boundary_term = 0.0;
    let mut magnitude: f64 = 0.0;
    for c in 0..disc.cells.len() {
        let b = table.cell(c);
        boundary_term += b[(0, 1)] - b[(1, 0)];
        magnitude = magnitude.max(b[(0, 1)].abs()).max(b[(1, 0)].abs());
    }
    let (m, n) = (disc.system.m, disc.system.n);
    let mut source_term = 0.0;
    for (c, ops) in disc.cells.iter().enumerate() {
        for (q, p) in ops.point_eval.iter().enumerate() {
            let z = p * &vars.cell_states[0][c];
            let zp = p * &vars.cell_states[1][c];
            let xq = &ops.quad_points[q][..m];
            let eval = |pr: &SourceProbe, z: &DVector<f64>| {
                let mut psi = vec![0.0; m * n];
                let mut g = vec![0.0; n];
                (pr.psi)(xq, &z.as_slice()[..n], &z.as_slice()[n..], &mut psi);
                (pr.g)(xq, &z.as_slice()[..n], &z.as_slice()[n..], &mut g);
                (psi, g)
            };
            let (psi, g) = eval(probe, &z);
            let (psi_p, g_p) = eval(probe_prime, &zp);
            let mut s = 0.0;
            for j in 0..m * n {
                s += psi[j] * zp[n + j] - psi_p[j] * z[n + j];
            }
            for i in 0..n {
                s += -z[i] * g_p[i] + zp[i] * g[i];
            }
            source_term += ops.quad_weights[q] * s;
        }
    }
    let scale = magnitude.max(source_term.abs()).max(1.0);
    Ok(ReciprocityOutcome { boundary_term, source_term, scale, residual: (boundary_term - source_term).abs() / scale })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub dim: usize,
    pub vertices: usize,
    pub cells: usize,
    pub facets: usize,
    pub boundary_facets: usize,
}

impl MeshStats {
    pub fn of(mesh: &Mesh) -> Self {
        MeshStats {
            dim: mesh.dim(),
            vertices: mesh.vertices().len(),
            cells: mesh.num_cells(),
            facets: mesh.facets().len(),
            boundary_facets: mesh.boundary_facet_ids().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassFlags {
    pub local: bool,
    pub strong: bool,
    pub jump_identity: bool,
    pub conservativity: bool,
    /// Gated only for linear systems.
    pub schur: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsclReport {
    pub method: String,
    pub degree: usize,
    pub system: String,
    pub mesh: MeshStats,
    pub local_mscl_max: f64,
    pub strong_entries: Vec<StrongEntry>,
    pub jump_identity_max: f64,
    pub conservativity_max: f64,
    pub schur_asymmetry: f64,
    pub newton_iters: usize,
    pub passes: PassFlags,
}

impl MsclReport {
    pub fn strong_max(&self) -> f64 {
        self.strong_entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn to_json(&self, pretty: bool) -> String {
        crate::json::to_string(self, pretty).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Run every check on a converged solution.
pub fn verify(base: &DiscreteSolution, regions: &[Region], tol: &Tolerances) -> Result<MsclReport> {
    let disc = &base.disc;
    for r in regions {
        r.validate(&disc.mesh)?;
    }
    let lin = Linearization::at(base)?;
    let vars = variations_from(base, &lin);
    let schur_asymmetry = lin.condensed().interior_asymmetry();
    let table = PairingTable::new(base, &vars);
    let local = local_mscl_from(&table);
    let strong_entries = strong_mscl_from(&table, &disc.mesh, regions);
    let jump = jump_identity_from(&table);
    let cons = conservativity_jump(base);
    let strong_max = strong_entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    let passes = PassFlags {
        local: local.max <= tol.local,
        strong: strong_max <= tol.strong,
        jump_identity: jump <= tol.jump_identity,
        conservativity: cons.max <= tol.conservativity,
        schur: disc.system.linear.then_some(schur_asymmetry <= tol.schur),
    };
    Ok(MsclReport {
        method: disc.method.label(),
        degree: disc.method.degree,
        system: disc.system.label.clone(),
        mesh: MeshStats::of(&disc.mesh),
        local_mscl_max: local.max,
        strong_entries,
        jump_identity_max: jump,
        conservativity_max: cons.max,
        schur_asymmetry,
        newton_iters: base.newton_iterations,
        passes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub expected: Vec<f64>,
    pub computed: Vec<f64>,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl SubCheck {
    fn new(name: &str, expected: &DMatrix<f64>, computed: &DMatrix<f64>, tolerance: f64) -> Self {
        // row-major flattening
        let flat = |a: &DMatrix<f64>| a.transpose().as_slice().to_vec();
        let max_error = (expected - computed).amax();
        SubCheck {
            name: name.to_string(),
            expected: flat(expected),
            computed: flat(computed),
            max_error,
            tolerance,
            pass: max_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRecord {
    pub checks: Vec<SubCheck>,
    pub pass: bool,
}

impl CounterexampleRecord {
    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

fn wedge(k: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(k, k);
    w[(i, j)] += 1.0;
    w[(j, i)] -= 1.0;
    w
}

fn cg1_laplace(mesh: Mesh) -> Result<DiscreteSolution> {
    let sys = Arc::new(builtin_from_str("poisson", 2).map_err(HdgError::from)?);
    let disc = Discretization::new(Arc::new(mesh), MethodSpec::new(Family::CgH, 1), sys)?;
    Ok(solve(&disc, &BoundaryData::zeros(&disc), &NewtonOptions::default())?)
}

/// The lowest-order continuous Galerkin computations for Laplace's equation
/// on the equilateral triangle with edge √2 and on two such triangles.
pub fn cgh_counterexample() -> Result<CounterexampleRecord> {
    let s6 = 6f64.sqrt() / 6.0;
    let s3 = 3f64.sqrt() / 6.0;
    let mut checks = Vec::new();

    let single = cg1_laplace(build_equilateral_triangle())?;
    let vars = tangent_variations(&single)?;
    let mut wmap = DMatrix::zeros(3, 3);
    let verts = single.disc.mesh.cells()[0].clone();
    for a in 0..3 {
        let ops = &single.disc.cells[0];
        let w = &vars.cell_states[a][0].as_slice()[ops.nu + ops.ns..];
        for (local, &g) in verts.iter().enumerate() {
            wmap[(g, vars.boundary_dofs[a])] = w[local];
        }
    }
    let expected_w = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]) * s6;
    checks.push(SubCheck::new("flux map on T", &expected_w, &wmap, 1e-12));

    let table = PairingTable::new(&single, &vars);
    let mesh = &single.disc.mesh;
    let edge_form = |i: usize, j: usize| -> DMatrix<f64> {
        let l = (0..3).find(|&l| mesh.facet(mesh.cell_facet(0, l)).vertices == vec![i.min(j), i.max(j)]).expect("edge");
        let p = &table.sides[0][l];
        p - p.transpose()
    };
    let edges = [(0, 1), (1, 2), (2, 0)];
    let expected_edges = [
        (wedge(3, 2, 0) - wedge(3, 1, 2)) * s3,
        (wedge(3, 0, 1) - wedge(3, 2, 0)) * s3,
        (wedge(3, 1, 2) - wedge(3, 0, 1)) * s3,
    ];
    let mut computed_edges = DMatrix::zeros(9, 3);
    let mut expected_stack = DMatrix::zeros(9, 3);
    let mut sum = DMatrix::zeros(3, 3);
    for (k, &(i, j)) in edges.iter().enumerate() {
        let a = edge_form(i, j);
        sum += &a;
        computed_edges.view_mut((3 * k, 0), (3, 3)).copy_from(&a);
        expected_stack.view_mut((3 * k, 0), (3, 3)).copy_from(&expected_edges[k]);
    }
    checks.push(SubCheck::new("edge 2-forms on T", &expected_stack, &computed_edges, 1e-12));
    checks.push(SubCheck::new("sum over the boundary of T", &DMatrix::zeros(3, 3), &sum, 1e-13));

    let pair = cg1_laplace(build_two_equilateral_mesh())?;
    let vars2 = tangent_variations(&pair)?;
    let b = PairingTable::new(&pair, &vars2).region(&pair.disc.mesh, &Region::whole(&pair.disc.mesh));
    let quadratic_form = DMatrix::from_row_slice(
        4,
        4,
        &[2.0, -1.0, -1.0, 0.0, 0.0, 2.0, -2.0, 0.0, 0.0, -2.0, 2.0, 0.0, 0.0, -1.0, -1.0, 2.0],
    ) * s3;
    let first = DVector::from_row_slice(&[0.0, 1.0, 1.0, 0.0]);
    let second = DVector::from_row_slice(&[1.0, 0.0, 0.0, 1.0]);
    let form = (&first * second.transpose() - &second * first.transpose()) * s3;
    let mut expected_iv = DMatrix::zeros(8, 4);
    expected_iv.view_mut((0, 0), (4, 4)).copy_from(&quadratic_form);
    expected_iv.view_mut((4, 0), (4, 4)).copy_from(&form);
    let mut computed_iv = DMatrix::zeros(8, 4);
    computed_iv.view_mut((0, 0), (4, 4)).copy_from(&b.matrix);
    computed_iv.view_mut((4, 0), (4, 4)).copy_from(&b.two_form());
    checks.push(SubCheck::new("pairing and 2-form on the boundary of two triangles", &expected_iv, &computed_iv, 1e-12));

    let value = b.two_form()[(1, 0)];
    checks.push(SubCheck::new(
        "variation pair v2 = v'1 = 1",
        &DMatrix::from_element(1, 1, s3),
        &DMatrix::from_element(1, 1, value),
        1e-12,
    ));
    let pass = checks.iter().all(|c| c.pass);
    Ok(CounterexampleRecord { checks, pass })
}
