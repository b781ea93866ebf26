//! Polynomial spaces on reference simplices, quadrature, and basis tables.
//!
//! Reference simplices: the interval `[0, 1]` and the triangle with vertices
//! `(0,0), (1,0), (0,1)`. Points are stored in reference Cartesian
//! coordinates; in 1-D the second coordinate is unused.

use nalgebra::DMatrix;
use thiserror::Error;

/// Highest degree covered by the conditioning guarantee.
pub const MAX_BASIS_DEGREE: usize = 4;
/// Highest supported quadrature exactness.
pub const MAX_QUADRATURE_DEGREE: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("unsupported simplex dimension {0}")]
    Dimension(usize),
    #[error("degree {0} exceeds the supported maximum {MAX_BASIS_DEGREE}")]
    DegreeTooHigh(usize),
    #[error("quadrature degree {0} outside 0..={MAX_QUADRATURE_DEGREE}")]
    QuadratureDegree(usize),
    #[error("basis construction failed: {0}")]
    Construction(String),
}

pub type Result<T> = std::result::Result<T, PolyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    PScalar,
    PVector,
    Rt,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension of a polynomial space of degree `r` on a `d`-simplex.
pub fn space_dim(kind: BasisKind, r: usize, d: usize) -> Result<usize> {
    if d != 1 && d != 2 {
        return Err(PolyError::Dimension(d));
    }
    let p = binomial(r + d, d);
    Ok(match kind {
        BasisKind::PScalar => p,
        BasisKind::PVector => d * p,
        // [P_r]^d plus x times the homogeneous degree-r polynomials.
        BasisKind::Rt => d * p + binomial(r + d - 1, d - 1),
    })
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub sim_dim: usize,
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Barycentric coordinates of point `q`.
    pub fn barycentric(&self, q: usize) -> Vec<f64> {
        let p = self.points[q];
        match self.sim_dim {
            0 => vec![1.0],
            1 => vec![1.0 - p[0], p[0]],
            _ => vec![1.0 - p[0] - p[1], p[0], p[1]],
        }
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1].
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature on the reference simplex of dimension `sim_dim` exact to `degree`.
pub fn quadrature_rule(sim_dim: usize, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_QUADRATURE_DEGREE {
        return Err(PolyError::QuadratureDegree(degree));
    }
    match sim_dim {
        0 => Ok(QuadratureRule { sim_dim, degree, points: vec![[0.0, 0.0]], weights: vec![1.0] }),
        1 => {
            let (x, w) = gauss_legendre(degree / 2 + 1);
            Ok(QuadratureRule { sim_dim, degree, points: x.iter().map(|&t| [t, 0.0]).collect(), weights: w })
        }
        2 => {
            // Collapsed coordinates x = s(1 - t), y = t with Jacobian (1 - t).
            let (s, ws) = gauss_legendre(degree / 2 + 1);
            let (t, wt) = gauss_legendre(degree.div_ceil(2) + 1);
            let mut points = Vec::with_capacity(s.len() * t.len());
            let mut weights = Vec::with_capacity(s.len() * t.len());
            for (tj, wj) in t.iter().zip(&wt) {
                for (si, wi) in s.iter().zip(&ws) {
                    points.push([si * (1.0 - tj), *tj]);
                    weights.push(wi * wj * (1.0 - tj));
                }
            }
            Ok(QuadratureRule { sim_dim, degree, points, weights })
        }
        d => Err(PolyError::Dimension(d)),
    }
}

/// Exponents of all monomials of total degree ≤ `r` in `d` variables, graded.
pub fn monomial_exponents(r: usize, d: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for total in 0..=r {
        if d == 1 {
            out.push([total, 0]);
        } else {
            for b in 0..=total {
                out.push([total - b, b]);
            }
        }
    }
    out
}

fn reference_centroid(d: usize) -> [f64; 2] {
    if d == 1 {
        [0.5, 0.0]
    } else {
        [1.0 / 3.0, 1.0 / 3.0]
    }
}

fn powi(x: f64, k: usize) -> f64 {
    x.powi(k as i32)
}

/// Values and first derivatives of centered monomials at one point.
fn monomial_row(exps: &[[usize; 2]], c: [f64; 2], p: [f64; 2]) -> (Vec<f64>, [Vec<f64>; 2]) {
    let x = p[0] - c[0];
    let y = p[1] - c[1];
    let mut val = Vec::with_capacity(exps.len());
    let mut dx = Vec::with_capacity(exps.len());
    let mut dy = Vec::with_capacity(exps.len());
    for &[a, b] in exps {
        val.push(powi(x, a) * powi(y, b));
        dx.push(if a == 0 { 0.0 } else { a as f64 * powi(x, a - 1) * powi(y, b) });
        dy.push(if b == 0 { 0.0 } else { b as f64 * powi(x, a) * powi(y, b - 1) });
    }
    (val, [dx, dy])
}

/// Lattice nodes of the principal lattice of order `r` (centroid for `r = 0`).
pub fn lattice_nodes(r: usize, d: usize) -> Vec<[f64; 2]> {
    if r == 0 {
        return vec![reference_centroid(d)];
    }
    let h = 1.0 / r as f64;
    let mut nodes = Vec::new();
    if d == 1 {
        for i in 0..=r {
            nodes.push([i as f64 * h, 0.0]);
        }
    } else {
        for j in 0..=r {
            for i in 0..=(r - j) {
                nodes.push([i as f64 * h, j as f64 * h]);
            }
        }
    }
    nodes
}

/// Modified Gram–Schmidt (two passes) of coefficient vectors under the inner
/// product `gram`. Rows of `vectors` are the input vectors.
fn orthonormalize(vectors: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = vectors.nrows();
    let mut q = vectors.clone();
    let inner = |a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize| -> f64 {
        let ai = a.row(i);
        let bj = b.row(j);
        (ai * gram * bj.transpose())[(0, 0)]
    };
    for k in 0..n {
        for _pass in 0..2 {
            for j in 0..k {
                let c = inner(&q, k, &q, j);
                let row_j = q.row(j).clone_owned();
                let mut row_k = q.row_mut(k);
                row_k -= c * row_j;
            }
        }
        let norm = inner(&q, k, &q, k).sqrt();
        if !(norm > 1e-14) {
            return Err(PolyError::Construction(format!("linearly dependent generator {k}")));
        }
        q.row_mut(k).scale_mut(1.0 / norm);
    }
    Ok(q)
}

fn monomial_gram(exps: &[[usize; 2]], d: usize) -> Result<DMatrix<f64>> {
    let dmax = exps.iter().map(|e| e[0] + e[1]).max().unwrap_or(0);
    let rule = quadrature_rule(d, 2 * dmax)?;
    let c = reference_centroid(d);
    let mut g = DMatrix::zeros(exps.len(), exps.len());
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let (v, _) = monomial_row(exps, c, *p);
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                g[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarFlavor {
    /// Lagrange basis on the principal lattice.
    Nodal,
    /// L²-orthonormal basis on the reference simplex.
    Modal,
}

/// Tabulated scalar basis: `values[(q, k)]`, `grads[axis][(q, k)]`.
#[derive(Debug, Clone)]
pub struct ScalarTable {
    pub values: DMatrix<f64>,
    pub grads: [DMatrix<f64>; 2],
}

/// Scalar polynomial basis of P_r on the reference simplex, stored as
/// coefficients over centered monomials.
#[derive(Debug, Clone)]
pub struct ScalarBasis {
    pub d: usize,
    pub r: usize,
    pub flavor: ScalarFlavor,
    exps: Vec<[usize; 2]>,
    coeffs: DMatrix<f64>,
}

impl ScalarBasis {
    pub fn new(r: usize, d: usize, flavor: ScalarFlavor) -> Result<Self> {
        if r > MAX_BASIS_DEGREE {
            return Err(PolyError::DegreeTooHigh(r));
        }
        Self::new_unchecked(r, d, flavor)
    }

    /// Construct without the degree cap; conditioning is not guaranteed.
    pub fn new_unchecked(r: usize, d: usize, flavor: ScalarFlavor) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(PolyError::Dimension(d));
        }
        let exps = monomial_exponents(r, d);
        let nb = exps.len();
        let c = reference_centroid(d);
        let coeffs = match flavor {
            ScalarFlavor::Nodal => {
                let nodes = lattice_nodes(r, d);
                let mut vt = DMatrix::zeros(nb, nb);
                for (l, p) in nodes.iter().enumerate() {
                    let (v, _) = monomial_row(&exps, c, *p);
                    for j in 0..nb {
                        vt[(j, l)] = v[j];
                    }
                }
                vt.try_inverse().ok_or_else(|| PolyError::Construction("singular Vandermonde".into()))?
            }
            ScalarFlavor::Modal => orthonormalize(&DMatrix::identity(nb, nb), &monomial_gram(&exps, d)?)?,
        };
        Ok(ScalarBasis { d, r, flavor, exps, coeffs })
    }

    pub fn size(&self) -> usize {
        self.exps.len()
    }

    /// Lattice nodes for the nodal flavor.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        lattice_nodes(self.r, self.d)
    }

    pub fn eval(&self, points: &[[f64; 2]]) -> ScalarTable {
        let nb = self.size();
        let c = reference_centroid(self.d);
        let mut values = DMatrix::zeros(points.len(), nb);
        let mut gx = DMatrix::zeros(points.len(), nb);
        let mut gy = DMatrix::zeros(points.len(), nb);
        for (q, p) in points.iter().enumerate() {
            let (v, [dx, dy]) = monomial_row(&self.exps, c, *p);
            for k in 0..nb {
                let row = self.coeffs.row(k);
                let mut s = [0.0; 3];
                for j in 0..nb {
                    s[0] += row[j] * v[j];
                    s[1] += row[j] * dx[j];
                    s[2] += row[j] * dy[j];
                }
                values[(q, k)] = s[0];
                gx[(q, k)] = s[1];
                gy[(q, k)] = s[2];
            }
        }
        ScalarTable { values, grads: [gx, gy] }
    }
}

/// Tabulated vector basis: `values[component][(q, k)]` and divergence.
#[derive(Debug, Clone)]
pub struct VectorTable {
    pub values: Vec<DMatrix<f64>>,
    pub div: DMatrix<f64>,
}

/// Vector-valued basis with `d` components: either [P_r]^d or RT_r.
/// The basis is L²-orthonormal on the reference simplex.
#[derive(Debug, Clone)]
pub struct VectorBasis {
    pub d: usize,
    pub r: usize,
    pub kind: BasisKind,
    exps: Vec<[usize; 2]>,
    /// Row k holds the coefficients of function k: component c occupies
    /// columns `c * nmono .. (c + 1) * nmono`.
    coeffs: DMatrix<f64>,
}

impl VectorBasis {
    pub fn new(kind: BasisKind, r: usize, d: usize) -> Result<Self> {
        if r > MAX_BASIS_DEGREE {
            return Err(PolyError::DegreeTooHigh(r));
        }
        Self::new_unchecked(kind, r, d)
    }

    pub fn new_unchecked(kind: BasisKind, r: usize, d: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(PolyError::Dimension(d));
        }
        let top = match kind {
            BasisKind::PVector => r,
            BasisKind::Rt => r + 1,
            BasisKind::PScalar => return Err(PolyError::Construction("scalar kind for vector basis".into())),
        };
        let exps = monomial_exponents(top, d);
        let nm = exps.len();
        let index = |e: [usize; 2]| exps.iter().position(|&x| x == e).expect("exponent present");
        let mut gens: Vec<Vec<f64>> = Vec::new();
        for c in 0..d {
            for e in monomial_exponents(r, d) {
                let mut g = vec![0.0; d * nm];
                g[c * nm + index(e)] = 1.0;
                gens.push(g);
            }
        }
        if kind == BasisKind::Rt {
            // (ξ - c) h(ξ - c) for homogeneous h of degree r; the shift by the
            // centroid only adds members of [P_r]^d.
            for e in monomial_exponents(r, d).into_iter().filter(|e| e[0] + e[1] == r) {
                let mut g = vec![0.0; d * nm];
                g[index([e[0] + 1, e[1]])] = 1.0;
                if d == 2 {
                    g[nm + index([e[0], e[1] + 1])] = 1.0;
                }
                gens.push(g);
            }
        }
        let nb = gens.len();
        let mut raw = DMatrix::zeros(nb, d * nm);
        for (k, g) in gens.iter().enumerate() {
            for (j, v) in g.iter().enumerate() {
                raw[(k, j)] = *v;
            }
        }
        let g1 = monomial_gram(&exps, d)?;
        let mut gram = DMatrix::zeros(d * nm, d * nm);
        for c in 0..d {
            gram.view_mut((c * nm, c * nm), (nm, nm)).copy_from(&g1);
        }
        let coeffs = orthonormalize(&raw, &gram)?;
        Ok(VectorBasis { d, r, kind, exps, coeffs })
    }

    pub fn size(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn eval(&self, points: &[[f64; 2]]) -> VectorTable {
        let nb = self.size();
        let nm = self.exps.len();
        let c = reference_centroid(self.d);
        let mut values = vec![DMatrix::zeros(points.len(), nb); self.d];
        let mut div = DMatrix::zeros(points.len(), nb);
        for (q, p) in points.iter().enumerate() {
            let (v, grads) = monomial_row(&self.exps, c, *p);
            for k in 0..nb {
                let row = self.coeffs.row(k);
                let mut dv = 0.0;
                for comp in 0..self.d {
                    let mut s = 0.0;
                    for j in 0..nm {
                        let a = row[comp * nm + j];
                        s += a * v[j];
                        dv += a * grads[comp][j];
                    }
                    values[comp][(q, k)] = s;
                }
                div[(q, k)] = dv;
            }
        }
        VectorTable { values, div }
    }

    /// Normal-trace tables on each reference facet at parameters `ts`.
    /// Entry `[facet][(q, k)]` is τ_k · n at the `q`-th point of that facet.
    pub fn normal_traces(&self, ts: &[f64]) -> Vec<DMatrix<f64>> {
        reference_facets(self.d)
            .iter()
            .map(|facet| {
                let pts: Vec<[f64; 2]> = ts.iter().map(|&t| facet.point(t)).collect();
                let tab = self.eval(&pts);
                let mut out = DMatrix::zeros(pts.len(), self.size());
                for comp in 0..self.d {
                    out += &tab.values[comp] * facet.normal[comp];
                }
                out
            })
            .collect()
    }
}

/// A facet of the reference simplex, parametrized from `start` to `end`.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceFacet {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub normal: [f64; 2],
}

impl ReferenceFacet {
    pub fn point(&self, t: f64) -> [f64; 2] {
        [self.start[0] + t * (self.end[0] - self.start[0]), self.start[1] + t * (self.end[1] - self.start[1])]
    }
}

/// Reference facets, facet `l` opposite reference vertex `l`.
pub fn reference_facets(d: usize) -> Vec<ReferenceFacet> {
    if d == 1 {
        vec![
            ReferenceFacet { start: [1.0, 0.0], end: [1.0, 0.0], normal: [1.0, 0.0] },
            ReferenceFacet { start: [0.0, 0.0], end: [0.0, 0.0], normal: [-1.0, 0.0] },
        ]
    } else {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![
            ReferenceFacet { start: [1.0, 0.0], end: [0.0, 1.0], normal: [s, s] },
            ReferenceFacet { start: [0.0, 0.0], end: [0.0, 1.0], normal: [-1.0, 0.0] },
            ReferenceFacet { start: [0.0, 0.0], end: [1.0, 0.0], normal: [0.0, -1.0] },
        ]
    }
}

/// Reference coordinates of reference vertex `k`.
pub fn reference_vertex(d: usize, k: usize) -> [f64; 2] {
    match (d, k) {
        (_, 0) => [0.0, 0.0],
        (_, 1) => [1.0, 0.0],
        (2, 2) => [0.0, 1.0],
        _ => panic!("reference vertex {k} out of range for dimension {d}"),
    }
}

/// Equispaced nodes of degree `k` on `[0, 1]`; the midpoint for `k = 0`.
pub fn facet_nodes(k: usize) -> Vec<f64> {
    if k == 0 {
        vec![0.5]
    } else {
        (0..=k).map(|j| j as f64 / k as f64).collect()
    }
}

/// One-dimensional Lagrange basis on [`facet_nodes`]`(k)` evaluated at `ts`.
pub fn lagrange_1d(k: usize, ts: &[f64]) -> DMatrix<f64> {
    let nodes = facet_nodes(k);
    let mut out = DMatrix::zeros(ts.len(), nodes.len());
    for (q, &t) in ts.iter().enumerate() {
        for (j, &xj) in nodes.iter().enumerate() {
            let mut v = 1.0;
            for (l, &xl) in nodes.iter().enumerate() {
                if l != j {
                    v *= (t - xl) / (xj - xl);
                }
            }
            out[(q, j)] = v;
        }
    }
    out
}
