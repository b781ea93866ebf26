//! Per-cell operators: quadrature tables, linear parts of the local residual,
//! and facet evaluation matrices.
//!
//! Facet matrices have rows indexed by `(field i, quadrature point q)` at
//! position `i * nq + q` and columns indexed by the local unknowns of the
//! cell (or, for `et`, by the local trace columns of the facet).

use super::spaces::{FluxMode, LocalSpaces, SigmaKind};
use super::{Family, MethodSpec, Result, TraceLayout};
use crate::geometry::Mesh;
use crate::polyspace::{
    gauss_legendre, lagrange_1d, quadrature_rule, reference_vertex, BasisKind, ScalarBasis, ScalarFlavor, VectorBasis,
};
use nalgebra::{DMatrix, DVector};

pub(crate) enum SigmaBasis {
    Scalar(ScalarBasis),
    Rt(VectorBasis),
}

/// Reference bases and rules shared by all cells.
pub(crate) struct ReferenceTables {
    v: ScalarBasis,
    sigma: SigmaBasis,
    cell_points: Vec<[f64; 2]>,
    cell_weights: Vec<f64>,
    facet_t: Vec<f64>,
    facet_w: Vec<f64>,
}

impl ReferenceTables {
    pub(crate) fn new(spaces: &LocalSpaces, m: usize) -> Result<Self> {
        let r = spaces.degree;
        let v = ScalarBasis::new(spaces.v_degree, m, ScalarFlavor::Modal)?;
        let sigma = match spaces.sigma {
            SigmaKind::Polynomial(k) => SigmaBasis::Scalar(ScalarBasis::new(k, m, ScalarFlavor::Modal)?),
            SigmaKind::RaviartThomas(k) => SigmaBasis::Rt(VectorBasis::new(BasisKind::Rt, k, m)?),
        };
        let rule = quadrature_rule(m, 2 * r + 6)?;
        let (facet_t, facet_w) = if m == 1 { (vec![0.0], vec![1.0]) } else { gauss_legendre((2 * r + 4) / 2 + 1) };
        Ok(ReferenceTables { v, sigma, cell_points: rule.points, cell_weights: rule.weights, facet_t, facet_w })
    }
}

/// Physical tables of V(K) and Σ(K) at a set of points.
struct PhysTables {
    /// `(q, k)`
    v: DMatrix<f64>,
    /// `[axis](q, k)`
    v_grad: Vec<DMatrix<f64>>,
    /// `[component](q, k)`
    sigma: Vec<DMatrix<f64>>,
    /// `(q, k)`
    sigma_div: DMatrix<f64>,
}

struct AffineMap {
    /// Jacobian of ξ ↦ x, columns are edge vectors.
    jac: DMatrix<f64>,
    /// Inverse of `jac`.
    inv: DMatrix<f64>,
}

fn eval_physical(tables: &ReferenceTables, map: &AffineMap, m: usize, pts: &[[f64; 2]]) -> PhysTables {
    let vt = tables.v.eval(pts);
    let v_grad = physical_gradients(&vt.grads, map, m);
    let (sigma, sigma_div) = match &tables.sigma {
        SigmaBasis::Scalar(b) => {
            let st = b.eval(pts);
            let g = physical_gradients(&st.grads, map, m);
            let np = b.size();
            let nq = pts.len();
            let mut comps = vec![DMatrix::zeros(nq, m * np); m];
            let mut div = DMatrix::zeros(nq, m * np);
            for mu in 0..m {
                comps[mu].columns_mut(mu * np, np).copy_from(&st.values);
                div.columns_mut(mu * np, np).copy_from(&g[mu]);
            }
            (comps, div)
        }
        SigmaBasis::Rt(b) => {
            // Contravariant Piola without the determinant: τ = J τ̂, div_x τ = div_ξ τ̂.
            let t = b.eval(pts);
            let mut comps = Vec::with_capacity(m);
            for mu in 0..m {
                let mut c = DMatrix::zeros(pts.len(), b.size());
                for a in 0..m {
                    c += &t.values[a] * map.jac[(mu, a)];
                }
                comps.push(c);
            }
            (comps, t.div)
        }
    };
    PhysTables { v: vt.values, v_grad, sigma, sigma_div }
}

fn physical_gradients(refg: &[DMatrix<f64>; 2], map: &AffineMap, m: usize) -> Vec<DMatrix<f64>> {
    (0..m)
        .map(|mu| {
            let mut g = DMatrix::zeros(refg[0].nrows(), refg[0].ncols());
            for a in 0..m {
                g += &refg[a] * map.inv[(a, mu)];
            }
            g
        })
        .collect()
}

/// Operators of one cell side (cell, local facet).
#[derive(Debug, Clone)]
pub struct SideOps {
    pub facet: usize,
    pub local: usize,
    pub normal: [f64; 2],
    pub lambda: f64,
    pub nq: usize,
    /// Physical quadrature points on the facet.
    pub points: Vec<[f64; 2]>,
    /// Quadrature weights (physical measure), replicated per field: length `n * nq`.
    pub weights: DVector<f64>,
    /// Offset of this facet's columns in the cell-local trace vector.
    pub trace_offset: usize,
    pub trace_len: usize,
    /// u values.
    pub eu: DMatrix<f64>,
    /// σ·n values.
    pub esn: DMatrix<f64>,
    /// w values (zero for eliminated fluxes).
    pub ew: DMatrix<f64>,
    /// û values from the facet's trace columns.
    pub et: DMatrix<f64>,
    /// σ̂·n = fx x + ft t̂.
    pub fx: DMatrix<f64>,
    pub ft: DMatrix<f64>,
    /// Full σ values, rows `(i * m + μ) * nq + q`.
    pub esig: DMatrix<f64>,
    /// Gradients of u, rows `(i * m + ν) * nq + q`.
    pub egrad: DMatrix<f64>,
}

impl SideOps {
    /// `Aᵀ W B`
    pub fn pair(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut wb = b.clone();
        for (r, w) in self.weights.iter().enumerate() {
            wb.row_mut(r).scale_mut(*w);
        }
        a.transpose() * wb
    }
}

/// All precomputed operators of one cell.
#[derive(Debug, Clone)]
pub struct CellOps {
    pub cell: usize,
    pub nu: usize,
    pub ns: usize,
    pub nw: usize,
    pub nloc: usize,
    pub quad_points: Vec<[f64; 2]>,
    pub quad_weights: Vec<f64>,
    /// Per quadrature point, rows `(u_1..u_n, σ_{1,1}..σ_{n,m})` in terms of the local unknowns.
    pub point_eval: Vec<DMatrix<f64>>,
    /// Linear part of the local residual in the local unknowns.
    pub lin: DMatrix<f64>,
    /// Local residual coupling to the cell-local trace vector.
    pub trace_mat: DMatrix<f64>,
    /// Conservativity contributions, rows = cell-local trace vector.
    pub cons_x: DMatrix<f64>,
    pub cons_t: DMatrix<f64>,
    /// Global DOF id of every cell-local trace entry.
    pub trace_ids: Vec<usize>,
    pub sides: Vec<SideOps>,
    pub lambdas: Vec<f64>,
}

impl CellOps {
    pub(crate) fn build(
        mesh: &Mesh,
        cell: usize,
        method: &MethodSpec,
        spaces: &LocalSpaces,
        layout: &TraceLayout,
        tables: &ReferenceTables,
        n: usize,
    ) -> CellOps {
        let m = mesh.dim();
        let verts = &mesh.cells()[cell];
        let p0 = mesh.vertices()[verts[0]];
        let mut jac = DMatrix::zeros(m, m);
        for a in 0..m {
            let pa = mesh.vertices()[verts[a + 1]];
            for mu in 0..m {
                jac[(mu, a)] = pa[mu] - p0[mu];
            }
        }
        let inv = jac.clone().try_inverse().expect("mesh cells are non-degenerate");
        let det = jac.determinant();
        let map = AffineMap { jac, inv };
        let to_phys = |xi: [f64; 2]| -> [f64; 2] {
            let mut x = p0;
            for mu in 0..m {
                for a in 0..m {
                    x[mu] += map.jac[(mu, a)] * xi[a];
                }
            }
            x
        };

        let nv = spaces.v_dim;
        let ns = spaces.sigma_dim;
        let nwf = spaces.w_dim;
        let nu_tot = n * nv;
        let ns_tot = n * ns;
        let nw_tot = n * nwf;
        let nloc = nu_tot + ns_tot + nw_tot;
        let s_off = nu_tot;
        let w_off = nu_tot + ns_tot;

        // Cell quadrature.
        let ct = eval_physical(tables, &map, m, &tables.cell_points);
        let quad_weights: Vec<f64> = tables.cell_weights.iter().map(|w| w * det.abs()).collect();
        let quad_points: Vec<[f64; 2]> = tables.cell_points.iter().map(|&p| to_phys(p)).collect();
        let nqc = quad_points.len();
        let mut point_eval = Vec::with_capacity(nqc);
        for q in 0..nqc {
            let mut pe = DMatrix::zeros(n + m * n, nloc);
            for i in 0..n {
                for k in 0..nv {
                    pe[(i, i * nv + k)] = ct.v[(q, k)];
                }
                for mu in 0..m {
                    for k in 0..ns {
                        pe[(n + i * m + mu, s_off + i * ns + k)] = ct.sigma[mu][(q, k)];
                    }
                }
            }
            point_eval.push(pe);
        }

        let mut lin = DMatrix::zeros(nloc, nloc);
        // τ-rows: −∫ u div τ.   v-rows: −∫ σ·∇v.
        let mut div_mass = DMatrix::zeros(ns, nv);
        let mut grad_mass = DMatrix::zeros(nv, ns);
        for q in 0..nqc {
            let w = quad_weights[q];
            for k in 0..ns {
                for l in 0..nv {
                    div_mass[(k, l)] += w * ct.sigma_div[(q, k)] * ct.v[(q, l)];
                }
            }
            for k in 0..nv {
                for l in 0..ns {
                    let mut s = 0.0;
                    for mu in 0..m {
                        s += ct.sigma[mu][(q, l)] * ct.v_grad[mu][(q, k)];
                    }
                    grad_mass[(k, l)] += w * s;
                }
            }
        }
        for i in 0..n {
            lin.view_mut((s_off + i * ns, i * nv), (ns, nv)).copy_from(&(-&div_mass));
            lin.view_mut((i * nv, s_off + i * ns), (nv, ns)).copy_from(&(-&grad_mass));
        }

        // Facets.
        let nf = m + 1;
        let ntf = spaces.facet_trace_dim * n;
        let ntk = nf * ntf;
        let mut trace_mat = DMatrix::zeros(nloc, ntk);
        let mut cons_x = DMatrix::zeros(ntk, nloc);
        let mut cons_t = DMatrix::zeros(ntk, ntk);
        let mut trace_ids = Vec::with_capacity(ntk);
        let mut sides = Vec::with_capacity(nf);
        let mut lambdas = Vec::with_capacity(nf);
        let family = method.family;
        let coeff = method.coeff_a.as_ref().map(|c| c.for_cell(cell).clone());

        for l in 0..nf {
            let fid = mesh.cell_facet(cell, l);
            let facet = mesh.facet(fid);
            let side = facet.sides().find(|s| s.cell == cell && s.local == l).expect("incidence");
            let normal = side.normal;
            let lambda = if family.uses_penalty() { method.penalty.value(mesh, cell, l) } else { 0.0 };
            lambdas.push(lambda);

            // Reference points along the shared facet parametrization.
            let local_of = |g: usize| verts.iter().position(|&v| v == g).expect("facet vertex in cell");
            let (xi_pts, ts, weights_1d): (Vec<[f64; 2]>, Vec<f64>, Vec<f64>) = if m == 1 {
                (vec![reference_vertex(1, 1 - l)], vec![0.0], vec![1.0])
            } else {
                let a = reference_vertex(2, local_of(facet.vertices[0]));
                let b = reference_vertex(2, local_of(facet.vertices[1]));
                let pts = tables.facet_t.iter().map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]).collect();
                let w = tables.facet_w.iter().map(|w| w * facet.measure).collect();
                (pts, tables.facet_t.clone(), w)
            };
            let nq = xi_pts.len();
            let points: Vec<[f64; 2]> = xi_pts.iter().map(|&p| to_phys(p)).collect();
            let ft_tab = eval_physical(tables, &map, m, &xi_pts);
            let trace_basis = if m == 1 { DMatrix::from_element(1, 1, 1.0) } else { lagrange_1d(spaces.trace.degree(), &ts) };
            let mut weights = DVector::zeros(n * nq);
            for i in 0..n {
                for q in 0..nq {
                    weights[i * nq + q] = weights_1d[q];
                }
            }

            let rows = n * nq;
            let mut eu = DMatrix::zeros(rows, nloc);
            let mut esn = DMatrix::zeros(rows, nloc);
            let mut ew = DMatrix::zeros(rows, nloc);
            let mut et = DMatrix::zeros(rows, ntf);
            let mut esig = DMatrix::zeros(n * m * nq, nloc);
            let mut egrad = DMatrix::zeros(n * m * nq, nloc);
            for i in 0..n {
                for q in 0..nq {
                    let r = i * nq + q;
                    for k in 0..nv {
                        eu[(r, i * nv + k)] = ft_tab.v[(q, k)];
                        for nu in 0..m {
                            egrad[((i * m + nu) * nq + q, i * nv + k)] = ft_tab.v_grad[nu][(q, k)];
                        }
                    }
                    for k in 0..ns {
                        let mut s = 0.0;
                        for mu in 0..m {
                            s += ft_tab.sigma[mu][(q, k)] * normal[mu];
                            esig[((i * m + mu) * nq + q, s_off + i * ns + k)] = ft_tab.sigma[mu][(q, k)];
                        }
                        esn[(r, s_off + i * ns + k)] = s;
                    }
                    for j in 0..spaces.facet_trace_dim {
                        et[(r, j * n + i)] = trace_basis[(q, j)];
                    }
                }
            }
            if spaces.flux_mode == FluxMode::Unknown {
                let wdeg = spaces.w_facet_degree;
                let wb = if m == 1 { DMatrix::from_element(1, 1, 1.0) } else { lagrange_1d(wdeg, &ts) };
                let continuous = family == Family::CgH && m == 2;
                let r = spaces.degree;
                for j in 0..wb.ncols() {
                    let widx = if m == 1 {
                        l
                    } else if continuous {
                        if j == 0 {
                            local_of(facet.vertices[0])
                        } else if j == r {
                            local_of(facet.vertices[1])
                        } else {
                            3 + l * (r - 1) + (j - 1)
                        }
                    } else {
                        l * (wdeg + 1) + j
                    };
                    for i in 0..n {
                        for q in 0..nq {
                            ew[(i * nq + q, w_off + i * nwf + widx)] = wb[(q, j)];
                        }
                    }
                }
            }
            let (fx, ftm) = match family {
                Family::RtH | Family::BdmH => (esn.clone(), DMatrix::zeros(rows, ntf)),
                Family::LdgHA | Family::LdgHB | Family::LdgHC => (&esn - &eu * lambda, &et * lambda),
                Family::IpH | Family::IpHLike => {
                    let a = coeff.as_ref().expect("coefficient checked at construction");
                    let mut egn = DMatrix::zeros(rows, nloc);
                    for i in 0..n {
                        for j in 0..n {
                            for mu in 0..m {
                                for nu in 0..m {
                                    let c = a[(i * m + mu, j * m + nu)] * normal[mu];
                                    if c == 0.0 {
                                        continue;
                                    }
                                    for q in 0..nq {
                                        for k in 0..nv {
                                            egn[(i * nq + q, j * nv + k)] += c * egrad[((j * m + nu) * nq + q, j * nv + k)];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    (&egn - &eu * lambda, &et * lambda)
                }
                Family::CgH | Family::NcH => (ew.clone(), DMatrix::zeros(rows, ntf)),
            };

            let side_ops = SideOps {
                facet: fid,
                local: l,
                normal,
                lambda,
                nq,
                points,
                weights,
                trace_offset: l * ntf,
                trace_len: ntf,
                eu,
                esn,
                ew,
                et,
                fx,
                ft: ftm,
                esig,
                egrad,
            };
            lin += side_ops.pair(&side_ops.eu, &side_ops.fx) - side_ops.pair(&side_ops.ew, &side_ops.eu);
            let tm = side_ops.pair(&side_ops.esn, &side_ops.et)
                + side_ops.pair(&side_ops.eu, &side_ops.ft)
                + side_ops.pair(&side_ops.ew, &side_ops.et);
            trace_mat.columns_mut(l * ntf, ntf).copy_from(&tm);
            cons_x.rows_mut(l * ntf, ntf).copy_from(&side_ops.pair(&side_ops.et, &side_ops.fx));
            cons_t.view_mut((l * ntf, l * ntf), (ntf, ntf)).copy_from(&side_ops.pair(&side_ops.et, &side_ops.ft));
            trace_ids.extend_from_slice(&layout.facet_dofs[fid]);
            sides.push(side_ops);
        }

        CellOps {
            cell,
            nu: nu_tot,
            ns: ns_tot,
            nw: nw_tot,
            nloc,
            quad_points,
            quad_weights,
            point_eval,
            lin,
            trace_mat,
            cons_x,
            cons_t,
            trace_ids,
            sides,
            lambdas,
        }
    }

    pub fn gather_trace(&self, trace: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.trace_ids.len(), self.trace_ids.iter().map(|&d| trace[d]))
    }
}
