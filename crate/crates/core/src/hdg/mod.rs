//! Hybridized flux formulation for canonical systems.
//!
//! Per cell `K` the unknowns are `x_K = [u | σ | w]` (coefficients in
//! `V(K)`, `Σ(K)`, and, for families whose numerical flux is an unknown,
//! `Σ̂(∂K)`), and globally the approximate traces `û`. Residual rows per cell,
//! in the same order as the unknowns:
//!
//! ```text
//! v-rows:  ∮ σ̂·n v − ∫ σ·∇v + ∫ f v            (v ∈ V(K))
//! τ-rows:  ∮ û τ·n − ∫ u div τ − ∫ φ·τ           (τ ∈ Σ(K))
//! w-rows:  ∮ (û − u) χ                           (χ ∈ Σ̂(∂K)·n, unknown-flux families)
//! ```
//!
//! followed by conservativity rows `Σ_K ∮ σ̂·n θ` for interior trace test
//! functions and Dirichlet rows pinning `û` on the domain boundary.

mod element;
mod solve;
mod spaces;

pub use element::{CellOps, SideOps};
pub use solve::{
    assemble_residual_jacobian, boundary_data_from_fn, condense_schur, flux_sigma_hat, random_boundary_data, solve,
    Assembled, BlockIndex, BoundaryData, CondensedSystem, DiscreteSolution, Linearization, NewtonOptions,
};
pub use spaces::{local_space_table, FluxMode, LocalSpaces, SigmaKind, TraceKind, TraceLayout};

use crate::geometry::Mesh;
use crate::polyspace::PolyError;
use crate::system::{CanonicalSystem, SystemError};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HdgError {
    #[error("unsupported method {family} with degree {degree} in dimension {dim}: {reason}")]
    Unsupported { family: Family, degree: usize, dim: usize, reason: String },
    #[error("mesh dimension {mesh} does not match system dimension {system}")]
    DimensionMismatch { mesh: usize, system: usize },
    #[error("{0} requires a flux coefficient matrix")]
    MissingCoefficient(Family),
    #[error("flux coefficient for cell {cell} must be a symmetric positive-definite {size}x{size} matrix")]
    BadCoefficient { cell: usize, size: usize },
    #[error("flux coefficient list has {found} entries for {cells} cells")]
    CoefficientCount { found: usize, cells: usize },
    #[error("singular local block in cell {cell} (pivot ratio {ratio:e}, penalties {lambdas:?})")]
    SingularLocalBlock { cell: usize, lambdas: Vec<f64>, ratio: f64 },
    #[error("singular condensed trace system (pivot ratio {ratio:e})")]
    SingularTraceSystem { ratio: f64 },
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("boundary data has {found} values, expected {expected}")]
    BoundaryData { expected: usize, found: usize },
    #[error("numerical flux of {0} is an unknown, not a closed-form expression")]
    FluxIsUnknown(Family),
    #[error("invalid method name '{0}'")]
    UnknownFamily(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    System(#[from] SystemError),
}

pub type Result<T> = std::result::Result<T, HdgError>;

/// Pivot ratio below which a dense block counts as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "rth")]
    RtH,
    #[serde(rename = "bdmh")]
    BdmH,
    #[serde(rename = "ldgh-a")]
    LdgHA,
    #[serde(rename = "ldgh-b")]
    LdgHB,
    #[serde(rename = "ldgh-c")]
    LdgHC,
    #[serde(rename = "cgh")]
    CgH,
    #[serde(rename = "nch")]
    NcH,
    #[serde(rename = "iph")]
    IpH,
    #[serde(rename = "iph-like")]
    IpHLike,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::RtH,
        Family::BdmH,
        Family::LdgHA,
        Family::LdgHB,
        Family::LdgHC,
        Family::CgH,
        Family::NcH,
        Family::IpH,
        Family::IpHLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::RtH => "rth",
            Family::BdmH => "bdmh",
            Family::LdgHA => "ldgh-a",
            Family::LdgHB => "ldgh-b",
            Family::LdgHC => "ldgh-c",
            Family::CgH => "cgh",
            Family::NcH => "nch",
            Family::IpH => "iph",
            Family::IpHLike => "iph-like",
        }
    }

    pub fn min_degree(self) -> usize {
        match self {
            Family::RtH | Family::LdgHB => 0,
            _ => 1,
        }
    }

    pub fn uses_penalty(self) -> bool {
        matches!(self, Family::LdgHA | Family::LdgHB | Family::LdgHC | Family::IpH | Family::IpHLike)
    }

    pub fn needs_coefficient(self) -> bool {
        matches!(self, Family::IpH | Family::IpHLike)
    }

    pub fn flux_mode(self) -> FluxMode {
        match self {
            Family::CgH | Family::NcH => FluxMode::Unknown,
            _ => FluxMode::Eliminated,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Family::ALL.into_iter().find(|f| f.name() == key).ok_or_else(|| HdgError::UnknownFamily(s.to_string()))
    }
}

/// Facet-wise constant penalty λ, one value per (cell, local facet).
///
/// Resolution order: explicit override, then the side-specific value (the
/// "plus" side of a facet is the incident cell with smaller id), then the
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub default: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty", with = "override_map")]
    pub overrides: BTreeMap<(usize, usize), f64>,
}

mod override_map {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<(usize, usize), f64>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<(usize, usize, f64)> = m.iter().map(|(&(c, l), &x)| (c, l, x)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, usize), f64>, D::Error> {
        let v: Vec<(usize, usize, f64)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|(c, l, x)| ((c, l), x)).collect())
    }
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::uniform(1.0)
    }
}

impl Penalty {
    pub fn uniform(lambda: f64) -> Self {
        Penalty { default: lambda, plus: None, minus: None, overrides: BTreeMap::new() }
    }

    /// Different constants on the two sides of every internal facet.
    /// Boundary facets use `plus`.
    pub fn two_sided(plus: f64, minus: f64) -> Self {
        Penalty { default: plus, plus: Some(plus), minus: Some(minus), overrides: BTreeMap::new() }
    }

    pub fn with_override(mut self, cell: usize, local: usize, lambda: f64) -> Self {
        self.overrides.insert((cell, local), lambda);
        self
    }

    pub fn value(&self, mesh: &Mesh, cell: usize, local: usize) -> f64 {
        if let Some(&v) = self.overrides.get(&(cell, local)) {
            return v;
        }
        let facet = mesh.facet(mesh.cell_facet(cell, local));
        let is_plus = facet.plus.cell == cell;
        match (is_plus, self.plus, self.minus) {
            (true, Some(p), _) => p,
            (false, _, Some(m)) => m,
            _ => self.default,
        }
    }

    pub fn describe(&self) -> String {
        let mut s = match (self.plus, self.minus) {
            (Some(p), Some(m)) if p != m => format!("{p}|{m}"),
            _ => format!("{}", self.default),
        };
        if !self.overrides.is_empty() {
            s.push_str(&format!("+{} overrides", self.overrides.len()));
        }
        s
    }

    fn all_zero(&self) -> bool {
        self.default == 0.0 && self.plus.unwrap_or(0.0) == 0.0 && self.minus.unwrap_or(0.0) == 0.0
    }
}

/// Per-cell constant flux coefficient `a` (size `mn × mn`) for interior
/// penalty fluxes `σ̂ = a ∇u + λ(û − u) n`.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxCoefficient {
    Uniform(DMatrix<f64>),
    PerCell(Vec<DMatrix<f64>>),
}

impl FluxCoefficient {
    pub fn for_cell(&self, cell: usize) -> &DMatrix<f64> {
        match self {
            FluxCoefficient::Uniform(a) => a,
            FluxCoefficient::PerCell(v) => &v[cell],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub family: Family,
    pub degree: usize,
    pub penalty: Penalty,
    pub coeff_a: Option<FluxCoefficient>,
}

impl MethodSpec {
    pub fn new(family: Family, degree: usize) -> Self {
        MethodSpec { family, degree, penalty: Penalty::default(), coeff_a: None }
    }

    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_coefficient(mut self, a: FluxCoefficient) -> Self {
        self.coeff_a = Some(a);
        self
    }

    /// Attach the coefficient `a = (∂φ/∂σ)⁻¹` of `system` when the family
    /// needs one; other families are returned unchanged.
    pub fn with_system_coefficient(self, system: &CanonicalSystem) -> Result<Self> {
        if !self.family.needs_coefficient() {
            return Ok(self);
        }
        let a = system.ip_coefficient()?;
        Ok(self.with_coefficient(FluxCoefficient::Uniform(a)))
    }

    pub fn label(&self) -> String {
        let mut s = format!("{} r={}", self.family, self.degree);
        if self.family.uses_penalty() {
            s.push_str(&format!(" lambda={}", self.penalty.describe()));
        }
        s
    }
}

/// A method instantiated on a mesh for a system: local spaces, trace
/// numbering, and all precomputed per-cell operators.
#[derive(Debug)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub method: MethodSpec,
    pub system: Arc<CanonicalSystem>,
    pub spaces: LocalSpaces,
    pub layout: TraceLayout,
    pub cells: Vec<CellOps>,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, method: MethodSpec, system: Arc<CanonicalSystem>) -> Result<Arc<Self>> {
        let m = mesh.dim();
        if m != system.m {
            return Err(HdgError::DimensionMismatch { mesh: m, system: system.m });
        }
        let spaces = local_space_table(&method, m, system.n)?;
        if method.family.needs_coefficient() {
            let coeff = method.coeff_a.as_ref().ok_or(HdgError::MissingCoefficient(method.family))?;
            if let FluxCoefficient::PerCell(v) = coeff {
                if v.len() != mesh.num_cells() {
                    return Err(HdgError::CoefficientCount { found: v.len(), cells: mesh.num_cells() });
                }
            }
            let size = m * system.n;
            for c in 0..mesh.num_cells() {
                let a = coeff.for_cell(c);
                let spd = a.nrows() == size
                    && a.ncols() == size
                    && (a - a.transpose()).amax() <= 1e-12 * a.amax()
                    && a.clone().cholesky().is_some();
                if !spd {
                    return Err(HdgError::BadCoefficient { cell: c, size });
                }
            }
        }
        let layout = TraceLayout::new(&mesh, &spaces, system.n);
        let tables = element::ReferenceTables::new(&spaces, m)?;
        let cells = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| CellOps::build(&mesh, c, &method, &spaces, &layout, &tables, system.n))
            .collect::<Vec<_>>();
        Ok(Arc::new(Discretization { mesh, method, system, spaces, layout, cells }))
    }

    pub fn n_fields(&self) -> usize {
        self.system.n
    }

    /// True when every penalty is zero for a penalized family.
    pub fn zero_penalty(&self) -> bool {
        self.method.family.uses_penalty() && self.method.penalty.all_zero()
    }
}
