//! Newton iteration with static condensation, linearization at a base
//! state, and boundary-data helpers.

use super::{Discretization, Family, HdgError, Result, SINGULAR_PIVOT_RATIO};
use crate::polyspace::ScalarBasis;
use crate::system::{PointEval, SourceProbe};
use nalgebra::{DMatrix, DVector, Dyn, FullPivLU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Dirichlet values for the boundary trace DOFs, in the order of
/// [`super::TraceLayout::boundary`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub values: Vec<f64>,
}

impl BoundaryData {
    pub fn zeros(disc: &Discretization) -> Self {
        BoundaryData { values: vec![0.0; disc.layout.n_boundary()] }
    }
}

/// Boundary data representing `g`: nodal interpolation for continuous
/// traces, facet-wise L² projection otherwise.
pub fn boundary_data_from_fn(disc: &Discretization, g: impl Fn([f64; 2]) -> Vec<f64>) -> BoundaryData {
    let layout = &disc.layout;
    let n = disc.n_fields();
    let mut values = vec![0.0; layout.n_boundary()];
    if matches!(disc.spaces.trace, super::TraceKind::Continuous(_)) {
        for (pos, &d) in layout.boundary.iter().enumerate() {
            values[pos] = g(layout.points[d])[layout.field[d]];
        }
        return BoundaryData { values };
    }
    for &f in disc.mesh.boundary_facet_ids() {
        let side_ref = disc.mesh.facet(f).plus;
        let side = &disc.cells[side_ref.cell].sides[side_ref.local];
        let mut gv = DVector::zeros(n * side.nq);
        for (q, p) in side.points.iter().enumerate() {
            let val = g(*p);
            for i in 0..n {
                gv[i * side.nq + q] = val[i];
            }
        }
        let gm = DMatrix::from_column_slice(gv.len(), 1, gv.as_slice());
        let mass = side.pair(&side.et, &side.et);
        let rhs = side.pair(&side.et, &gm);
        let coeffs = mass.lu().solve(&rhs).expect("facet mass matrix is nonsingular");
        for (k, &d) in layout.facet_dofs[f].iter().enumerate() {
            values[layout.position[d]] = coeffs[(k, 0)];
        }
    }
    BoundaryData { values }
}

/// Uniform pseudo-random boundary values in `[-1, 1]`.
pub fn random_boundary_data(disc: &Discretization, seed: u64) -> BoundaryData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BoundaryData { values: (0..disc.layout.n_boundary()).map(|_| rng.gen_range(-1.0..=1.0)).collect() }
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Relative tolerance on the residual (and on the Newton step).
    pub tol: f64,
    pub max_iter: usize,
    /// Initial cell states and trace vector; zero when absent.
    pub warm_start: Option<(Vec<DVector<f64>>, DVector<f64>)>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-12, max_iter: 25, warm_start: None }
    }
}

/// Converged discrete state `(u, σ, [w], û)`.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub disc: Arc<Discretization>,
    /// Local unknowns `[u | σ | w]` per cell.
    pub cell_states: Vec<DVector<f64>>,
    pub trace: DVector<f64>,
    pub boundary: BoundaryData,
    pub newton_iterations: usize,
    /// Final ∞-norm of the full residual.
    pub residual_norm: f64,
    pub tolerance: f64,
}

impl DiscreteSolution {
    pub fn u_coeffs(&self, cell: usize) -> &[f64] {
        let ops = &self.disc.cells[cell];
        &self.cell_states[cell].as_slice()[..ops.nu]
    }

    pub fn sigma_coeffs(&self, cell: usize) -> &[f64] {
        let ops = &self.disc.cells[cell];
        &self.cell_states[cell].as_slice()[ops.nu..ops.nu + ops.ns]
    }

    /// Coefficients of the flux unknown `w` (empty for eliminated fluxes).
    pub fn w_coeffs(&self, cell: usize) -> &[f64] {
        let ops = &self.disc.cells[cell];
        &self.cell_states[cell].as_slice()[ops.nu + ops.ns..]
    }

    /// `(u, σ)` at the cell quadrature points: rows `(u_1..u_n, σ_{1,1}..σ_{n,m})`.
    pub fn cell_values(&self, cell: usize) -> Vec<DVector<f64>> {
        let ops = &self.disc.cells[cell];
        ops.point_eval.iter().map(|p| p * &self.cell_states[cell]).collect()
    }

    /// L² projection coefficients of `g` onto V(K) for every cell, in the
    /// layout of [`Self::u_coeffs`].
    pub fn project_u(&self, g: impl Fn([f64; 2]) -> Vec<f64>) -> Vec<DVector<f64>> {
        let n = self.disc.n_fields();
        self.disc
            .cells
            .iter()
            .map(|ops| {
                let nu = ops.nu;
                let mut mass = DMatrix::zeros(nu, nu);
                let mut rhs = DVector::zeros(nu);
                for (q, p) in ops.point_eval.iter().enumerate() {
                    let w = ops.quad_weights[q];
                    let pu = p.view((0, 0), (n, nu));
                    mass += pu.transpose() * pu * w;
                    let gv = DVector::from_vec(g(ops.quad_points[q]));
                    rhs += pu.transpose() * gv * w;
                }
                mass.lu().solve(&rhs).expect("mass matrix is nonsingular")
            })
            .collect()
    }

    /// Evaluate `u` in cell `cell` at the physical point `x` (exact for the
    /// polynomial representation).
    pub fn u_at(&self, cell: usize, x: [f64; 2]) -> Vec<f64> {
        let mesh = &self.disc.mesh;
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
        let rhs = DVector::from_iterator(m, (0..m).map(|mu| x[mu] - p0[mu]));
        let xi = jac.lu().solve(&rhs).expect("non-degenerate cell");
        let xi = [xi[0], if m == 2 { xi[1] } else { 0.0 }];
        let basis = ScalarBasis::new(self.disc.spaces.v_degree, m, crate::polyspace::ScalarFlavor::Modal)
            .expect("degree validated");
        let vals = basis.eval(&[xi]).values;
        let nv = self.disc.spaces.v_dim;
        let c = self.u_coeffs(cell);
        (0..self.disc.n_fields()).map(|i| (0..nv).map(|k| c[i * nv + k] * vals[(0, k)]).sum()).collect()
    }
}

/// Local residual and (optionally) its Jacobian in the local unknowns.
pub(crate) fn local_residual(
    disc: &Discretization,
    cell: usize,
    x: &DVector<f64>,
    t_loc: &DVector<f64>,
    want_jacobian: bool,
) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let ops = &disc.cells[cell];
    let sys = &disc.system;
    let (n, m) = (sys.n, sys.m);
    let k = n + m * n;
    let mut r = &ops.lin * x + &ops.trace_mat * t_loc;
    let mut a = want_jacobian.then(|| ops.lin.clone());
    let mut pe = PointEval::zeros(m, n);
    let mut dc = DVector::zeros(k);
    let mut dj = DMatrix::zeros(k, k);
    for (q, p) in ops.point_eval.iter().enumerate() {
        let z = p * x;
        let xq = &ops.quad_points[q][..m];
        sys.eval_into(xq, &z.as_slice()[..n], &z.as_slice()[n..], &mut pe);
        let w = ops.quad_weights[q];
        // f enters the v-rows with +, φ enters the τ-rows with −.
        dc.rows_mut(0, n).copy_from(&pe.f);
        dc.rows_mut(n, m * n).copy_from(&(-&pe.phi));
        r.gemv_tr(w, p, &dc, 1.0);
        if let Some(a) = a.as_mut() {
            dj.view_mut((0, 0), (n, n)).copy_from(&pe.df_du);
            dj.view_mut((0, n), (n, m * n)).copy_from(&pe.df_dsigma);
            dj.view_mut((n, 0), (m * n, n)).copy_from(&(-&pe.dphi_du));
            dj.view_mut((n, n), (m * n, m * n)).copy_from(&(-&pe.dphi_dsigma));
            let jp = &dj * p;
            a.gemm_tr(w, p, &jp, 1.0);
        }
    }
    (r, a)
}

/// Source contributions `+∫ g v` (v-rows) and `−∫ ψ·τ` (τ-rows) evaluated at
/// the local state `x`.
pub(crate) fn source_vector(disc: &Discretization, cell: usize, probe: &SourceProbe, x: &DVector<f64>) -> DVector<f64> {
    let ops = &disc.cells[cell];
    let (n, m) = (disc.system.n, disc.system.m);
    let mut out = DVector::zeros(ops.nloc);
    let mut psi = vec![0.0; m * n];
    let mut g = vec![0.0; n];
    let mut dc = DVector::zeros(n + m * n);
    for (q, p) in ops.point_eval.iter().enumerate() {
        let z = p * x;
        let xq = &ops.quad_points[q][..m];
        psi.iter_mut().for_each(|v| *v = 0.0);
        g.iter_mut().for_each(|v| *v = 0.0);
        (probe.psi)(xq, &z.as_slice()[..n], &z.as_slice()[n..], &mut psi);
        (probe.g)(xq, &z.as_slice()[..n], &z.as_slice()[n..], &mut g);
        for i in 0..n {
            dc[i] = g[i];
        }
        for j in 0..m * n {
            dc[n + j] = -psi[j];
        }
        out.gemv_tr(ops.quad_weights[q], p, &dc, 1.0);
    }
    out
}

fn factor_checked(a: DMatrix<f64>) -> std::result::Result<FullPivLU<f64, Dyn, Dyn>, f64> {
    let lu = FullPivLU::new(a);
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows().min(u.ncols())).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if diag.is_empty() { 1.0 } else if max > 0.0 { min / max } else { 0.0 };
    if ratio < SINGULAR_PIVOT_RATIO {
        Err(ratio)
    } else {
        Ok(lu)
    }
}

struct CellCondensed {
    lu: FullPivLU<f64, Dyn, Dyn>,
    y: DMatrix<f64>,
    z: DVector<f64>,
    residual: DVector<f64>,
}

fn condense_cell(
    disc: &Discretization,
    cell: usize,
    x: &DVector<f64>,
    trace: &DVector<f64>,
) -> Result<CellCondensed> {
    let ops = &disc.cells[cell];
    let t_loc = ops.gather_trace(trace);
    let (residual, a) = local_residual(disc, cell, x, &t_loc, true);
    let lu = factor_checked(a.expect("jacobian requested")).map_err(|ratio| HdgError::SingularLocalBlock {
        cell,
        lambdas: ops.lambdas.clone(),
        ratio,
    })?;
    let y = lu.solve(&ops.trace_mat).expect("factor checked");
    let z = lu.solve(&residual).expect("factor checked");
    Ok(CellCondensed { lu, y, z, residual })
}

fn condense_all(disc: &Discretization, states: &[DVector<f64>], trace: &DVector<f64>) -> Result<Vec<CellCondensed>> {
    (0..disc.cells.len()).into_par_iter().map(|c| condense_cell(disc, c, &states[c], trace)).collect()
}

fn schur_from(disc: &Discretization, parts: &[CellCondensed]) -> DMatrix<f64> {
    let nd = disc.layout.n_dofs;
    let mut s = DMatrix::zeros(nd, nd);
    for (ops, part) in disc.cells.iter().zip(parts) {
        let local = &ops.cons_t - &ops.cons_x * &part.y;
        for (a, &ga) in ops.trace_ids.iter().enumerate() {
            for (b, &gb) in ops.trace_ids.iter().enumerate() {
                s[(ga, gb)] += local[(a, b)];
            }
        }
    }
    s
}

fn select(s: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| s[(rows[i], cols[j])])
}

fn inf(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Interior trace solve `S₀₀ δ₀ = rhs₀ − S₀b δ_b`.
struct TraceSolver {
    lu: Option<FullPivLU<f64, Dyn, Dyn>>,
    s0b: DMatrix<f64>,
}

impl TraceSolver {
    fn new(disc: &Discretization, s: &DMatrix<f64>) -> Result<Self> {
        let l = &disc.layout;
        let s00 = select(s, &l.interior, &l.interior);
        let s0b = select(s, &l.interior, &l.boundary);
        let lu = if l.interior.is_empty() {
            None
        } else {
            Some(factor_checked(s00).map_err(|ratio| HdgError::SingularTraceSystem { ratio })?)
        };
        Ok(TraceSolver { lu, s0b })
    }

    /// Full trace increment from interior right-hand side and boundary increment.
    fn solve(&self, disc: &Discretization, rhs_interior: &DVector<f64>, delta_b: &DVector<f64>) -> DVector<f64> {
        let l = &disc.layout;
        let mut delta = DVector::zeros(l.n_dofs);
        for (p, &d) in l.boundary.iter().enumerate() {
            delta[d] = delta_b[p];
        }
        if let Some(lu) = &self.lu {
            let rhs = rhs_interior - &self.s0b * delta_b;
            let d0 = lu.solve(&rhs).expect("factor checked");
            for (p, &d) in l.interior.iter().enumerate() {
                delta[d] = d0[p];
            }
        }
        delta
    }
}

/// Solve the discrete problem with Dirichlet trace data by Newton's method.
pub fn solve(disc: &Arc<Discretization>, boundary: &BoundaryData, opts: &NewtonOptions) -> Result<DiscreteSolution> {
    let layout = &disc.layout;
    if boundary.values.len() != layout.n_boundary() {
        return Err(HdgError::BoundaryData { expected: layout.n_boundary(), found: boundary.values.len() });
    }
    let (mut states, mut trace) = match &opts.warm_start {
        Some((s, t)) => (s.clone(), t.clone()),
        None => (disc.cells.iter().map(|c| DVector::zeros(c.nloc)).collect(), DVector::zeros(layout.n_dofs)),
    };
    let gb = DVector::from_column_slice(&boundary.values);
    let mut reference: Option<f64> = None;
    let mut last_step_small = false;
    for iter in 0..=opts.max_iter {
        let parts = condense_all(disc, &states, &trace)?;
        let mut g = DVector::zeros(layout.n_dofs);
        let mut gz = DVector::zeros(layout.n_dofs);
        for (c, (ops, part)) in disc.cells.iter().zip(&parts).enumerate() {
            let t_loc = ops.gather_trace(&trace);
            let gl = &ops.cons_x * &states[c] + &ops.cons_t * &t_loc;
            let gzl = &ops.cons_x * &part.z;
            for (a, &d) in ops.trace_ids.iter().enumerate() {
                g[d] += gl[a];
                gz[d] += gzl[a];
            }
        }
        let tb = DVector::from_iterator(layout.n_boundary(), layout.boundary.iter().map(|&d| trace[d]));
        let g0 = DVector::from_iterator(layout.n_interior(), layout.interior.iter().map(|&d| g[d]));
        let resid = parts.iter().map(|p| inf(&p.residual)).fold(inf(&g0), f64::max).max(inf(&(&tb - &gb)));
        let scale = *reference.get_or_insert(resid.max(1.0));
        if iter >= 1 && (resid <= opts.tol * scale || last_step_small) {
            return Ok(DiscreteSolution {
                disc: disc.clone(),
                cell_states: states,
                trace,
                boundary: boundary.clone(),
                newton_iterations: iter,
                residual_norm: resid,
                tolerance: opts.tol,
            });
        }
        if iter == opts.max_iter {
            return Err(HdgError::NoConvergence { iterations: iter, residual: resid });
        }
        let s = schur_from(disc, &parts);
        let solver = TraceSolver::new(disc, &s)?;
        let rhs = -(&g - &gz);
        let rhs0 = DVector::from_iterator(layout.n_interior(), layout.interior.iter().map(|&d| rhs[d]));
        let delta_t = solver.solve(disc, &rhs0, &(&gb - &tb));
        let mut step = inf(&delta_t);
        let mut size = inf(&trace);
        for (c, (ops, part)) in disc.cells.iter().zip(&parts).enumerate() {
            let dt = ops.gather_trace(&delta_t);
            let dx = -(&part.z + &part.y * dt);
            step = step.max(inf(&dx));
            states[c] += dx;
            size = size.max(inf(&states[c]));
        }
        trace += delta_t;
        last_step_small = step <= 1e-2 * opts.tol * size.max(1.0);
    }
    unreachable!("loop returns")
}

/// Jacobian of the discrete problem at a base state, condensed onto the
/// trace DOFs.
pub struct Linearization {
    pub disc: Arc<Discretization>,
    lus: Vec<FullPivLU<f64, Dyn, Dyn>>,
    /// `A_K⁻¹ T_K` per cell.
    pub y: Vec<DMatrix<f64>>,
    /// Condensed operator on all trace DOFs.
    pub schur: DMatrix<f64>,
    solver: TraceSolver,
}

impl std::fmt::Debug for Linearization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Linearization").field("n_dofs", &self.schur.nrows()).finish_non_exhaustive()
    }
}

impl Linearization {
    pub fn at(base: &DiscreteSolution) -> Result<Self> {
        let disc = base.disc.clone();
        let parts = condense_all(&disc, &base.cell_states, &base.trace)?;
        let schur = schur_from(&disc, &parts);
        let solver = TraceSolver::new(&disc, &schur)?;
        let (lus, y) = parts.into_iter().map(|p| (p.lu, p.y)).unzip();
        Ok(Linearization { disc, lus, y, schur, solver })
    }

    /// Solve `J δ + [cell_rhs; 0] = 0` with boundary trace increment
    /// `delta_b`. An empty `cell_rhs` means zero.
    pub fn solve(&self, cell_rhs: &[DVector<f64>], delta_b: &DVector<f64>) -> (Vec<DVector<f64>>, DVector<f64>) {
        let disc = &self.disc;
        let layout = &disc.layout;
        let zs: Vec<Option<DVector<f64>>> = if cell_rhs.is_empty() {
            vec![None; disc.cells.len()]
        } else {
            self.lus.iter().zip(cell_rhs).map(|(lu, r)| Some(lu.solve(r).expect("factor checked"))).collect()
        };
        let mut gz = DVector::zeros(layout.n_dofs);
        for (ops, z) in disc.cells.iter().zip(&zs) {
            if let Some(z) = z {
                let gl = &ops.cons_x * z;
                for (a, &d) in ops.trace_ids.iter().enumerate() {
                    gz[d] += gl[a];
                }
            }
        }
        let rhs0 = DVector::from_iterator(layout.n_interior(), layout.interior.iter().map(|&d| gz[d]));
        let delta_t = self.solver.solve(disc, &rhs0, delta_b);
        let dx = disc
            .cells
            .iter()
            .enumerate()
            .map(|(c, ops)| {
                let dt = ops.gather_trace(&delta_t);
                let mut dx = -(&self.y[c] * dt);
                if let Some(z) = &zs[c] {
                    dx -= z;
                }
                dx
            })
            .collect();
        (dx, delta_t)
    }

    /// The condensed operator split into interior and boundary blocks.
    pub fn condensed(&self) -> CondensedSystem {
        let l = &self.disc.layout;
        CondensedSystem {
            interior_block: select(&self.schur, &l.interior, &l.interior),
            boundary_block: select(&self.schur, &l.boundary, &l.boundary),
            full: self.schur.clone(),
            interior: l.interior.clone(),
            boundary: l.boundary.clone(),
        }
    }

    /// Source vectors for every cell at the given local states.
    pub fn source_rhs(&self, probe: &SourceProbe, states: &[DVector<f64>]) -> Vec<DVector<f64>> {
        (0..self.disc.cells.len()).map(|c| source_vector(&self.disc, c, probe, &states[c])).collect()
    }
}

/// Condensed trace operator with its interior/boundary split.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub full: DMatrix<f64>,
    pub interior_block: DMatrix<f64>,
    pub boundary_block: DMatrix<f64>,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
}

impl CondensedSystem {
    /// ‖S₀₀ − S₀₀ᵀ‖∞ / ‖S₀₀‖∞ (zero for an empty block).
    pub fn interior_asymmetry(&self) -> f64 {
        let s = &self.interior_block;
        if s.is_empty() {
            return 0.0;
        }
        let norm = crate::system::inf_norm(s);
        if norm == 0.0 {
            return 0.0;
        }
        crate::system::inf_norm(&(s - s.transpose())) / norm
    }
}

/// Eliminate all cell unknowns from the Jacobian at `base`.
pub fn condense_schur(base: &DiscreteSolution) -> Result<CondensedSystem> {
    Ok(Linearization::at(base)?.condensed())
}

/// Offsets of the monolithic unknown vector `(x_0, …, x_{K−1}, û)`; rows
/// follow the same layout (trace rows: conservativity on interior DOFs,
/// Dirichlet on boundary DOFs).
#[derive(Debug, Clone)]
pub struct BlockIndex {
    pub cell_offsets: Vec<usize>,
    pub trace_offset: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub residual: DVector<f64>,
    /// Jacobian in coordinate form `(row, col, value)`.
    pub jacobian: Vec<(usize, usize, f64)>,
    pub index: BlockIndex,
}

impl Assembled {
    pub fn dense_jacobian(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.index.total, self.index.total);
        for &(r, c, v) in &self.jacobian {
            j[(r, c)] += v;
        }
        j
    }
}

/// Full residual and Jacobian of the discrete problem at a state. Sources,
/// when given, are added to the residual at that state; their dependence on
/// the state is not differentiated.
pub fn assemble_residual_jacobian(
    disc: &Discretization,
    cell_states: &[DVector<f64>],
    trace: &DVector<f64>,
    boundary: &BoundaryData,
    sources: Option<&SourceProbe>,
) -> Assembled {
    let layout = &disc.layout;
    let mut cell_offsets = Vec::with_capacity(disc.cells.len());
    let mut off = 0;
    for ops in &disc.cells {
        cell_offsets.push(off);
        off += ops.nloc;
    }
    let trace_offset = off;
    let total = off + layout.n_dofs;
    let mut residual = DVector::zeros(total);
    let mut jac = Vec::new();
    for (c, ops) in disc.cells.iter().enumerate() {
        let o = cell_offsets[c];
        let t_loc = ops.gather_trace(trace);
        let (mut r, a) = local_residual(disc, c, &cell_states[c], &t_loc, true);
        if let Some(p) = sources {
            r += source_vector(disc, c, p, &cell_states[c]);
        }
        residual.rows_mut(o, ops.nloc).copy_from(&r);
        let a = a.expect("jacobian requested");
        for i in 0..ops.nloc {
            for j in 0..ops.nloc {
                if a[(i, j)] != 0.0 {
                    jac.push((o + i, o + j, a[(i, j)]));
                }
            }
            for (k, &d) in ops.trace_ids.iter().enumerate() {
                if ops.trace_mat[(i, k)] != 0.0 {
                    jac.push((o + i, trace_offset + d, ops.trace_mat[(i, k)]));
                }
            }
        }
        let gl = &ops.cons_x * &cell_states[c] + &ops.cons_t * &t_loc;
        for (k, &d) in ops.trace_ids.iter().enumerate() {
            if layout.on_boundary[d] {
                continue;
            }
            residual[trace_offset + d] += gl[k];
            for j in 0..ops.nloc {
                if ops.cons_x[(k, j)] != 0.0 {
                    jac.push((trace_offset + d, o + j, ops.cons_x[(k, j)]));
                }
            }
            for (k2, &d2) in ops.trace_ids.iter().enumerate() {
                if ops.cons_t[(k, k2)] != 0.0 {
                    jac.push((trace_offset + d, trace_offset + d2, ops.cons_t[(k, k2)]));
                }
            }
        }
    }
    for (p, &d) in layout.boundary.iter().enumerate() {
        residual[trace_offset + d] = trace[d] - boundary.values[p];
        jac.push((trace_offset + d, trace_offset + d, 1.0));
    }
    Assembled { residual, jacobian: jac, index: BlockIndex { cell_offsets, trace_offset, total } }
}

/// Closed-form numerical flux σ̂ on side `local` of `cell` at the facet
/// quadrature points; each entry has length `m·n` in the σ layout.
pub fn flux_sigma_hat(sol: &DiscreteSolution, cell: usize, local: usize) -> Result<Vec<Vec<f64>>> {
    let disc = &sol.disc;
    let family = disc.method.family;
    if matches!(family, Family::CgH | Family::NcH) {
        return Err(HdgError::FluxIsUnknown(family));
    }
    let (m, n) = (disc.system.m, disc.system.n);
    let ops = &disc.cells[cell];
    let side = &ops.sides[local];
    let x = &sol.cell_states[cell];
    let t_loc = ops.gather_trace(&sol.trace).rows(side.trace_offset, side.trace_len).into_owned();
    let nq = side.nq;
    let sig = &side.esig * x;
    let grad = &side.egrad * x;
    let jump = &side.et * &t_loc - &side.eu * x;
    let mut out = vec![vec![0.0; m * n]; nq];
    for (q, row) in out.iter_mut().enumerate() {
        for i in 0..n {
            for mu in 0..m {
                let base = match family {
                    Family::IpH | Family::IpHLike => {
                        let a = disc.method.coeff_a.as_ref().expect("checked").for_cell(cell);
                        let mut s = 0.0;
                        for j in 0..n {
                            for nu in 0..m {
                                s += a[(i * m + mu, j * m + nu)] * grad[(j * m + nu) * nq + q];
                            }
                        }
                        s
                    }
                    _ => sig[(i * m + mu) * nq + q],
                };
                let pen = match family {
                    Family::RtH | Family::BdmH => 0.0,
                    _ => side.lambda * jump[i * nq + q] * side.normal[mu],
                };
                row[i * m + mu] = base + pen;
            }
        }
    }
    Ok(out)
}
