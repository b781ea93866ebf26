//! Local space tables and global trace numbering.

use super::{Family, HdgError, MethodSpec, Result};
use crate::geometry::Mesh;
use crate::polyspace::{space_dim, BasisKind, MAX_BASIS_DEGREE};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FluxMode {
    /// σ̂ given in closed form by the flux condition and substituted.
    Eliminated,
    /// σ̂ = w n with `w` carried as a local unknown.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SigmaKind {
    /// `[P_k]^m` per field.
    Polynomial(usize),
    /// `RT_k` per field.
    RaviartThomas(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceKind {
    /// Facet-wise discontinuous `P_k(e)`.
    Discontinuous(usize),
    /// Continuous `P_k` on the skeleton.
    Continuous(usize),
}

impl TraceKind {
    pub fn degree(self) -> usize {
        match self {
            TraceKind::Discontinuous(k) | TraceKind::Continuous(k) => k,
        }
    }
}

/// Dimensions per field; totals are these times `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalSpaces {
    pub family: Family,
    pub degree: usize,
    pub dim: usize,
    pub n_fields: usize,
    pub v_degree: usize,
    pub v_dim: usize,
    pub sigma: SigmaKind,
    pub sigma_dim: usize,
    /// Dimension of Σ̂(∂K) (zero for eliminated fluxes).
    pub w_dim: usize,
    /// Degree of the facet polynomials representing `w`.
    pub w_facet_degree: usize,
    pub trace: TraceKind,
    /// Trace nodes per facet.
    pub facet_trace_dim: usize,
    pub flux_mode: FluxMode,
}

impl LocalSpaces {
    pub fn unknowns_per_cell(&self) -> usize {
        self.n_fields * (self.v_dim + self.sigma_dim + self.w_dim)
    }

    /// Local equations per cell: one per test function of V(K), Σ(K), Σ̂(∂K).
    pub fn equations_per_cell(&self) -> usize {
        self.n_fields * (self.v_dim + self.sigma_dim + self.w_dim)
    }
}

fn unsupported(method: &MethodSpec, dim: usize, reason: &str) -> HdgError {
    HdgError::Unsupported { family: method.family, degree: method.degree, dim, reason: reason.to_string() }
}

/// Local spaces of `method` for meshes of dimension `m` and `n` fields.
pub fn local_space_table(method: &MethodSpec, m: usize, n: usize) -> Result<LocalSpaces> {
    let r = method.degree;
    let family = method.family;
    if m != 1 && m != 2 {
        return Err(unsupported(method, m, "mesh dimension must be 1 or 2"));
    }
    if n == 0 {
        return Err(unsupported(method, m, "system has no fields"));
    }
    if r < family.min_degree() {
        return Err(unsupported(method, m, &format!("degree must be at least {}", family.min_degree())));
    }
    if r > MAX_BASIS_DEGREE {
        return Err(unsupported(method, m, &format!("degree above {MAX_BASIS_DEGREE}")));
    }
    use Family::*;
    let (v_degree, sigma) = match family {
        RtH => (r, SigmaKind::RaviartThomas(r)),
        BdmH | LdgHA => (r - 1, SigmaKind::Polynomial(r)),
        LdgHB | IpH => (r, SigmaKind::Polynomial(r)),
        LdgHC | CgH | NcH | IpHLike => (r, SigmaKind::Polynomial(r - 1)),
    };
    let trace = match family {
        CgH if m == 2 => TraceKind::Continuous(r),
        NcH => TraceKind::Discontinuous(r - 1),
        _ => TraceKind::Discontinuous(r),
    };
    let facet_trace_dim = if m == 1 { 1 } else { trace.degree() + 1 };
    let sigma_dim = match sigma {
        SigmaKind::Polynomial(k) => space_dim(BasisKind::PVector, k, m)?,
        SigmaKind::RaviartThomas(k) => space_dim(BasisKind::Rt, k, m)?,
    };
    let (w_dim, w_facet_degree) = match family {
        // Continuous boundary traces of P_r(K): vertices plus edge-interior nodes.
        CgH if m == 2 => (3 * r, r),
        CgH => (2, 0),
        NcH if m == 2 => (3 * r, r - 1),
        NcH => (2, 0),
        _ => (0, 0),
    };
    Ok(LocalSpaces {
        family,
        degree: r,
        dim: m,
        n_fields: n,
        v_degree,
        v_dim: space_dim(BasisKind::PScalar, v_degree, m)?,
        sigma,
        sigma_dim,
        w_dim,
        w_facet_degree,
        trace,
        facet_trace_dim,
        flux_mode: family.flux_mode(),
    })
}

/// Global numbering of trace degrees of freedom.
///
/// On every facet the trace is expanded in the Lagrange basis at the nodes
/// `t_j` of the facet parametrization (first to second sorted vertex); the
/// coefficient of node `j`, field `i` sits at position `j * n + i` of
/// [`TraceLayout::facet_dofs`]. Continuous layouts number vertex DOFs first
/// (`vertex * n + i`), then edge-interior nodes.
#[derive(Debug, Clone)]
pub struct TraceLayout {
    pub n_fields: usize,
    pub n_dofs: usize,
    pub facet_dofs: Vec<Vec<usize>>,
    pub on_boundary: Vec<bool>,
    /// Boundary DOFs in increasing order.
    pub boundary: Vec<usize>,
    /// Interior DOFs in increasing order.
    pub interior: Vec<usize>,
    /// Position of each DOF within `boundary` or `interior`.
    pub position: Vec<usize>,
    /// Physical node location of each DOF.
    pub points: Vec<[f64; 2]>,
    pub field: Vec<usize>,
    pub labels: Vec<String>,
}

impl TraceLayout {
    pub fn new(mesh: &Mesh, spaces: &LocalSpaces, n: usize) -> Self {
        let nodes: Vec<f64> = crate::polyspace::facet_nodes(spaces.trace.degree());
        let mut facet_dofs = vec![Vec::new(); mesh.facets().len()];
        let mut points = Vec::new();
        let mut field = Vec::new();
        let mut labels = Vec::new();
        let mut push = |p: [f64; 2], label: String, points: &mut Vec<[f64; 2]>| -> usize {
            let first = points.len();
            for i in 0..n {
                points.push(p);
                field.push(i);
                labels.push(if n == 1 { label.clone() } else { format!("{label}.{}", i + 1) });
            }
            first
        };
        match spaces.trace {
            TraceKind::Continuous(r) if mesh.dim() == 2 => {
                for (v, p) in mesh.vertices().iter().enumerate() {
                    push(*p, format!("u{}", v + 1), &mut points);
                }
                for (f, facet) in mesh.facets().iter().enumerate() {
                    let mut dofs = vec![0; (r + 1) * n];
                    for (j, &t) in nodes.iter().enumerate() {
                        let base = if j == 0 {
                            facet.vertices[0] * n
                        } else if j == r {
                            facet.vertices[1] * n
                        } else {
                            push(mesh.facet_point(f, t), format!("e{f}.{j}"), &mut points)
                        };
                        for i in 0..n {
                            dofs[j * n + i] = base + i;
                        }
                    }
                    facet_dofs[f] = dofs;
                }
            }
            _ => {
                for (f, _) in mesh.facets().iter().enumerate() {
                    let mut dofs = Vec::with_capacity(spaces.facet_trace_dim * n);
                    let ts = if mesh.dim() == 1 { vec![0.0] } else { nodes.clone() };
                    for (j, &t) in ts.iter().enumerate() {
                        let label = if mesh.dim() == 1 { format!("x{f}") } else { format!("e{f}.{j}") };
                        let base = push(mesh.facet_point(f, t), label, &mut points);
                        for i in 0..n {
                            dofs.push(base + i);
                        }
                    }
                    facet_dofs[f] = dofs;
                }
            }
        }
        let n_dofs = points.len();
        let mut on_boundary = vec![false; n_dofs];
        for &f in mesh.boundary_facet_ids() {
            for &d in &facet_dofs[f] {
                on_boundary[d] = true;
            }
        }
        let mut boundary = Vec::new();
        let mut interior = Vec::new();
        let mut position = vec![0; n_dofs];
        for d in 0..n_dofs {
            if on_boundary[d] {
                position[d] = boundary.len();
                boundary.push(d);
            } else {
                position[d] = interior.len();
                interior.push(d);
            }
        }
        TraceLayout { n_fields: n, n_dofs, facet_dofs, on_boundary, boundary, interior, position, points, field, labels }
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }
}
