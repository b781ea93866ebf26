//! Canonical first-order systems
//!
//! ```text
//!   ∂_μ u^i = φ^i_μ(x, u, σ),     −∂_μ σ_i^μ = f_i(x, u, σ)
//! ```
//!
//! with `x ∈ R^m`, `u ∈ R^n`, `σ ∈ R^{m·n}`. Field-space vectors of length
//! `m·n` are stored row-major as `σ[i * m + μ]` (field outer, direction inner).
//! Jacobians are dense row-major matrices in the same layout.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("unknown system '{0}'")]
    UnknownSystem(String),
    #[error("invalid parameter '{key}' for system '{system}': {reason}")]
    BadParameter { system: String, key: String, reason: String },
    #[error("unsupported dimensions m={m}, n={n} for system '{system}'")]
    Dimensions { system: String, m: usize, n: usize },
    #[error("Hamiltonian gradient inconsistent with finite differences (relative error {0:e})")]
    InconsistentGradient(f64),
    #[error("system is not closed along the reconstruction path (residual {0:e})")]
    NotClosed(f64),
    #[error("flux coefficient is not constant (variation {0:e})")]
    NonConstantCoefficient(f64),
    #[error("flux coefficient matrix is singular")]
    SingularCoefficient,
}

pub type Result<T> = std::result::Result<T, SystemError>;

/// Pointwise vector-valued map `(x, u, σ) ↦ out`.
pub type VecMap = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Pointwise matrix-valued map. The output matrix arrives zeroed with the
/// documented shape.
pub type MatMap = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut DMatrix<f64>) + Send + Sync>;
/// Pointwise scalar map.
pub type ScalarMap = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>;

/// All pointwise quantities needed by assembly at one state.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub phi: DVector<f64>,
    pub f: DVector<f64>,
    pub dphi_du: DMatrix<f64>,
    pub dphi_dsigma: DMatrix<f64>,
    pub df_du: DMatrix<f64>,
    pub df_dsigma: DMatrix<f64>,
}

impl PointEval {
    pub fn zeros(m: usize, n: usize) -> Self {
        let mn = m * n;
        PointEval {
            phi: DVector::zeros(mn),
            f: DVector::zeros(n),
            dphi_du: DMatrix::zeros(mn, n),
            dphi_dsigma: DMatrix::zeros(mn, mn),
            df_du: DMatrix::zeros(n, n),
            df_dsigma: DMatrix::zeros(n, mn),
        }
    }
}

/// A canonical system together with its Jacobians.
///
/// All maps must be pure functions of their arguments; they are shared
/// across threads during assembly.
#[derive(Clone)]
pub struct CanonicalSystem {
    pub m: usize,
    pub n: usize,
    pub label: String,
    pub phi: VecMap,
    pub f: VecMap,
    /// `mn × n`
    pub jac_phi_u: MatMap,
    /// `mn × mn`
    pub jac_phi_sigma: MatMap,
    /// `n × n`
    pub jac_f_u: MatMap,
    /// `n × mn`
    pub jac_f_sigma: MatMap,
    /// (φ, f) affine in (u, σ): Newton converges in one step.
    pub linear: bool,
    pub hamiltonian: Option<HamiltonianDef>,
}

impl fmt::Debug for CanonicalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CanonicalSystem")
            .field("m", &self.m)
            .field("n", &self.n)
            .field("label", &self.label)
            .field("linear", &self.linear)
            .finish_non_exhaustive()
    }
}

impl CanonicalSystem {
    pub fn eval_into(&self, x: &[f64], u: &[f64], sigma: &[f64], out: &mut PointEval) {
        out.phi.fill(0.0);
        out.f.fill(0.0);
        out.dphi_du.fill(0.0);
        out.dphi_dsigma.fill(0.0);
        out.df_du.fill(0.0);
        out.df_dsigma.fill(0.0);
        (self.phi)(x, u, sigma, out.phi.as_mut_slice());
        (self.f)(x, u, sigma, out.f.as_mut_slice());
        (self.jac_phi_u)(x, u, sigma, &mut out.dphi_du);
        (self.jac_phi_sigma)(x, u, sigma, &mut out.dphi_dsigma);
        (self.jac_f_u)(x, u, sigma, &mut out.df_du);
        (self.jac_f_sigma)(x, u, sigma, &mut out.df_dsigma);
    }

    pub fn eval(&self, x: &[f64], u: &[f64], sigma: &[f64]) -> PointEval {
        let mut out = PointEval::zeros(self.m, self.n);
        self.eval_into(x, u, sigma, &mut out);
        out
    }

    /// Jacobian of the coefficient vector `(f, φ)` with respect to `(u, σ)`.
    pub fn coefficient_jacobian(&self, state: &SampleState) -> DMatrix<f64> {
        let (n, mn) = (self.n, self.m * self.n);
        let p = self.eval(&state.x, &state.u, &state.sigma);
        let mut j = DMatrix::zeros(n + mn, n + mn);
        j.view_mut((0, 0), (n, n)).copy_from(&p.df_du);
        j.view_mut((0, n), (n, mn)).copy_from(&p.df_dsigma);
        j.view_mut((n, 0), (mn, n)).copy_from(&p.dphi_du);
        j.view_mut((n, n), (mn, mn)).copy_from(&p.dphi_dsigma);
        j
    }

    /// Central-difference approximation of [`Self::coefficient_jacobian`].
    pub fn coefficient_jacobian_fd(&self, state: &SampleState, rel_step: f64) -> DMatrix<f64> {
        let (n, mn) = (self.n, self.m * self.n);
        let mut z: Vec<f64> = state.u.iter().chain(&state.sigma).copied().collect();
        let scale = z.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let h = rel_step * scale;
        let coeff = |z: &[f64]| -> Vec<f64> {
            let mut phi = vec![0.0; mn];
            let mut f = vec![0.0; n];
            (self.phi)(&state.x, &z[..n], &z[n..], &mut phi);
            (self.f)(&state.x, &z[..n], &z[n..], &mut f);
            f.into_iter().chain(phi).collect()
        };
        let mut j = DMatrix::zeros(n + mn, n + mn);
        for c in 0..n + mn {
            let z0 = z[c];
            z[c] = z0 + h;
            let plus = coeff(&z);
            z[c] = z0 - h;
            let minus = coeff(&z);
            z[c] = z0;
            for r in 0..n + mn {
                j[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
            }
        }
        j
    }

    /// Constant `∂φ/∂σ`, if it does not depend on the state.
    pub fn constant_flux_jacobian(&self, states: &[SampleState]) -> Result<DMatrix<f64>> {
        let mut first: Option<DMatrix<f64>> = None;
        let mut worst = 0.0f64;
        for s in states {
            let d = self.eval(&s.x, &s.u, &s.sigma).dphi_dsigma;
            let var = d.amax().max(1.0);
            match &first {
                None => first = Some(d),
                Some(f0) => worst = worst.max((&d - f0).amax() / var),
            }
            let du = self.eval(&s.x, &s.u, &s.sigma).dphi_du;
            worst = worst.max(du.amax());
        }
        if worst > 1e-12 {
            return Err(SystemError::NonConstantCoefficient(worst));
        }
        first.ok_or(SystemError::NonConstantCoefficient(f64::NAN))
    }

    /// Coefficient `a` for interior-penalty fluxes σ̂ = a ∇u + …: the inverse
    /// of the constant `∂φ/∂σ` (since ∇u = φ = (∂φ/∂σ) σ).
    pub fn ip_coefficient(&self) -> Result<DMatrix<f64>> {
        let states = sample_states(self.m, self.n, 8, 0x19, 2.0);
        let d = self.constant_flux_jacobian(&states)?;
        d.try_inverse().ok_or(SystemError::SingularCoefficient)
    }
}

/// `H(x, u, σ)` with its gradients and optionally the Hessian with respect
/// to `z = (u, σ)` (size `(n + mn)²`).
#[derive(Clone)]
pub struct HamiltonianDef {
    pub h: ScalarMap,
    pub dh_du: VecMap,
    pub dh_dsigma: VecMap,
    pub hessian: Option<MatMap>,
}

impl fmt::Debug for HamiltonianDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianDef").field("analytic_hessian", &self.hessian.is_some()).finish()
    }
}

/// Incremental sources `(ψ, g)` of a linearized problem.
#[derive(Clone)]
pub struct SourceProbe {
    /// `(x, v, τ) ↦ ψ ∈ R^{mn}`
    pub psi: VecMap,
    /// `(x, v, τ) ↦ g ∈ R^n`
    pub g: VecMap,
    /// True when ψ and g ignore `(v, τ)`.
    pub state_independent: bool,
}

impl fmt::Debug for SourceProbe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceProbe").field("state_independent", &self.state_independent).finish()
    }
}

impl SourceProbe {
    pub fn zero() -> Self {
        SourceProbe { psi: Arc::new(|_, _, _, _| {}), g: Arc::new(|_, _, _, _| {}), state_independent: true }
    }

    /// Constant sources.
    pub fn constant(psi: Vec<f64>, g: Vec<f64>) -> Self {
        SourceProbe {
            psi: Arc::new(move |_, _, _, out| out.copy_from_slice(&psi)),
            g: Arc::new(move |_, _, _, out| out.copy_from_slice(&g)),
            state_independent: true,
        }
    }

    /// Sources depending on position only.
    pub fn from_position(
        psi: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        g: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        SourceProbe {
            psi: Arc::new(move |x, _, _, out| psi(x, out)),
            g: Arc::new(move |x, _, _, out| g(x, out)),
            state_independent: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Pseudo-random states with `x ∈ [0,1]^m` and `|u|, |σ| ≤ radius` componentwise.
pub fn sample_states(m: usize, n: usize, count: usize, seed: u64, radius: f64) -> Vec<SampleState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| SampleState {
            x: (0..m).map(|_| rng.gen::<f64>()).collect(),
            u: (0..n).map(|_| rng.gen_range(-radius..=radius)).collect(),
            sigma: (0..m * n).map(|_| rng.gen_range(-radius..=radius)).collect(),
        })
        .collect()
}

/// Maximum over `states` of ‖J − Jᵀ‖∞ for the coefficient Jacobian J.
pub fn closedness_residual(sys: &CanonicalSystem, states: &[SampleState]) -> f64 {
    states
        .iter()
        .map(|s| {
            let j = sys.coefficient_jacobian(s);
            inf_norm(&(&j - j.transpose()))
        })
        .fold(0.0, f64::max)
}

/// Largest relative deviation between analytic and central-difference
/// coefficient Jacobians over `states`.
pub fn jacobian_consistency(sys: &CanonicalSystem, states: &[SampleState], rel_step: f64) -> f64 {
    states
        .iter()
        .map(|s| {
            let a = sys.coefficient_jacobian(s);
            let fd = sys.coefficient_jacobian_fd(s, rel_step);
            (&a - &fd).amax() / a.amax().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Induced ∞-norm (maximum absolute row sum).
pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows()).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Build the de Donder–Weyl system φ = ∂H/∂σ, f = ∂H/∂u.
///
/// Without an analytic Hessian the Jacobians are central differences of the
/// supplied gradients, and the label records it.
pub fn from_hamiltonian(h: HamiltonianDef, m: usize, n: usize, label: &str) -> Result<CanonicalSystem> {
    let mn = m * n;
    let states = sample_states(m, n, 10, 0xD0D, 1.5);
    let mut worst = 0.0f64;
    for s in &states {
        let mut z: Vec<f64> = s.u.iter().chain(&s.sigma).copied().collect();
        let mut grad = vec![0.0; n + mn];
        (h.dh_du)(&s.x, &s.u, &s.sigma, &mut grad[..n]);
        (h.dh_dsigma)(&s.x, &s.u, &s.sigma, &mut grad[n..]);
        let scale = grad.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let step = 1e-5;
        for c in 0..n + mn {
            let z0 = z[c];
            z[c] = z0 + step;
            let hp = (h.h)(&s.x, &z[..n], &z[n..]);
            z[c] = z0 - step;
            let hm = (h.h)(&s.x, &z[..n], &z[n..]);
            z[c] = z0;
            worst = worst.max(((hp - hm) / (2.0 * step) - grad[c]).abs() / scale);
        }
    }
    if worst > 1e-6 {
        return Err(SystemError::InconsistentGradient(worst));
    }

    let phi: VecMap = h.dh_dsigma.clone();
    let f: VecMap = h.dh_du.clone();
    let (jac_phi_u, jac_phi_sigma, jac_f_u, jac_f_sigma, label) = match &h.hessian {
        Some(hess) => {
            let block = |r0: usize, c0: usize, rows: usize, cols: usize| -> MatMap {
                let hess = hess.clone();
                Arc::new(move |x, u, s, out: &mut DMatrix<f64>| {
                    let mut full = DMatrix::zeros(n + mn, n + mn);
                    hess(x, u, s, &mut full);
                    out.copy_from(&full.view((r0, c0), (rows, cols)));
                })
            };
            (block(n, 0, mn, n), block(n, n, mn, mn), block(0, 0, n, n), block(0, n, n, mn), label.to_string())
        }
        None => {
            let fd = |grad: VecMap, rows: usize, wrt_u: bool| -> MatMap {
                Arc::new(move |x, u, s, out: &mut DMatrix<f64>| {
                    let cols = if wrt_u { n } else { mn };
                    let mut uu = u.to_vec();
                    let mut ss = s.to_vec();
                    let mut gp = vec![0.0; rows];
                    let mut gm = vec![0.0; rows];
                    for c in 0..cols {
                        let v0 = if wrt_u { uu[c] } else { ss[c] };
                        let hstep = 1e-6 * v0.abs().max(1.0);
                        let set = |uu: &mut Vec<f64>, ss: &mut Vec<f64>, v: f64| {
                            if wrt_u {
                                uu[c] = v
                            } else {
                                ss[c] = v
                            }
                        };
                        set(&mut uu, &mut ss, v0 + hstep);
                        grad(x, &uu, &ss, &mut gp);
                        set(&mut uu, &mut ss, v0 - hstep);
                        grad(x, &uu, &ss, &mut gm);
                        set(&mut uu, &mut ss, v0);
                        for r in 0..rows {
                            out[(r, c)] = (gp[r] - gm[r]) / (2.0 * hstep);
                        }
                    }
                })
            };
            (
                fd(phi.clone(), mn, true),
                fd(phi.clone(), mn, false),
                fd(f.clone(), n, true),
                fd(f.clone(), n, false),
                format!("{label} [fd-jacobian]"),
            )
        }
    };
    Ok(CanonicalSystem {
        m,
        n,
        label,
        phi,
        f,
        jac_phi_u,
        jac_phi_sigma,
        jac_f_u,
        jac_f_sigma,
        linear: false,
        hamiltonian: Some(h),
    })
}

/// `H_rec(x,u,σ) = ∫₀¹ [φ(x,tu,tσ)·σ + f(x,tu,tσ)·u] dt`, which is the
/// Hamiltonian normalized by `H(x,0,0) = 0` whenever the system is closed.
pub fn reconstruct_hamiltonian(sys: &CanonicalSystem, x: &[f64], u: &[f64], sigma: &[f64]) -> Result<f64> {
    let path_states: Vec<SampleState> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&t| SampleState {
            x: x.to_vec(),
            u: u.iter().map(|v| t * v).collect(),
            sigma: sigma.iter().map(|v| t * v).collect(),
        })
        .collect();
    let resid = closedness_residual(sys, &path_states);
    if resid > 1e-6 {
        return Err(SystemError::NotClosed(resid));
    }
    let (n, mn) = (sys.n, sys.m * sys.n);
    let integrand = |t: f64| -> f64 {
        let tu: Vec<f64> = u.iter().map(|v| t * v).collect();
        let ts: Vec<f64> = sigma.iter().map(|v| t * v).collect();
        let mut phi = vec![0.0; mn];
        let mut f = vec![0.0; n];
        (sys.phi)(x, &tu, &ts, &mut phi);
        (sys.f)(x, &tu, &ts, &mut f);
        phi.iter().zip(sigma).map(|(a, b)| a * b).sum::<f64>() + f.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
    };
    Ok(adaptive_gauss(&integrand, 0.0, 1.0, 1e-14, 40))
}

/// Adaptive Gauss–Legendre quadrature on `[a, b]` by interval bisection.
pub fn adaptive_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: usize) -> f64 {
    let (nodes, weights) = crate::polyspace::gauss_legendre(10);
    let rule = |lo: f64, hi: f64| -> f64 {
        nodes.iter().zip(&weights).map(|(t, w)| w * f(lo + t * (hi - lo))).sum::<f64>() * (hi - lo)
    };
    fn recurse(rule: &dyn Fn(f64, f64) -> f64, lo: f64, hi: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let mid = 0.5 * (lo + hi);
        let left = rule(lo, mid);
        let right = rule(mid, hi);
        let split = left + right;
        if depth == 0 || (split - whole).abs() <= tol * split.abs().max(1.0) {
            return split;
        }
        recurse(rule, lo, mid, left, tol, depth - 1) + recurse(rule, mid, hi, right, tol, depth - 1)
    }
    recurse(&rule, a, b, rule(a, b), tol, max_depth)
}

/// Parsed `name:key=value,...` system specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl std::str::FromStr for SystemSpec {
    type Err = SystemError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), r),
            None => (s.trim(), ""),
        };
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| SystemError::BadParameter {
                system: name.to_string(),
                key: item.to_string(),
                reason: "expected key=value".into(),
            })?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(SystemSpec { name: name.to_string(), params })
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

pub const BUILTIN_NAMES: [&str; 6] =
    ["poisson", "linear_elliptic", "anisotropic", "semilinear_sine", "coupled_pair", "non_hamiltonian_control"];

struct Params<'a> {
    system: &'a str,
    map: &'a BTreeMap<String, String>,
    allowed: &'a [&'a str],
}

impl Params<'_> {
    fn check(&self) -> Result<()> {
        for k in self.map.keys() {
            if !self.allowed.contains(&k.as_str()) {
                return Err(self.bad(k, "unknown parameter"));
            }
        }
        Ok(())
    }

    fn bad(&self, key: &str, reason: &str) -> SystemError {
        SystemError::BadParameter { system: self.system.into(), key: key.into(), reason: reason.into() }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| self.bad(key, "not a finite number")),
        }
    }

    /// Row-major `m × m` matrix written as `a11/a12/a21/a22`.
    fn matrix(&self, key: &str, m: usize, default: DMatrix<f64>) -> Result<DMatrix<f64>> {
        let a = match self.map.get(key) {
            None => default,
            Some(v) => {
                let vals: std::result::Result<Vec<f64>, _> = v.split('/').map(|t| t.trim().parse::<f64>()).collect();
                let vals = vals.map_err(|_| self.bad(key, "matrix entries must be numbers separated by '/'"))?;
                if vals.len() != m * m {
                    return Err(self.bad(key, &format!("expected {} entries", m * m)));
                }
                DMatrix::from_row_slice(m, m, &vals)
            }
        };
        if (&a - a.transpose()).amax() > 0.0 {
            return Err(self.bad(key, "matrix must be symmetric"));
        }
        if a.clone().cholesky().is_none() {
            return Err(self.bad(key, "matrix must be positive definite"));
        }
        Ok(a)
    }
}

fn default_a(m: usize, elliptic: bool) -> DMatrix<f64> {
    match (m, elliptic) {
        (1, true) => DMatrix::from_element(1, 1, 2.0),
        (1, false) => DMatrix::from_element(1, 1, 0.5),
        (_, true) => DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]),
        (_, false) => DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]),
    }
}

/// Quadratic-in-σ system with φ_i = A σ_i and a caller-supplied source.
struct Quadratic {
    m: usize,
    n: usize,
    a: DMatrix<f64>,
}

impl Quadratic {
    fn phi(&self) -> VecMap {
        let (m, n, a) = (self.m, self.n, self.a.clone());
        Arc::new(move |_, _, s, out| {
            for i in 0..n {
                for mu in 0..m {
                    out[i * m + mu] = (0..m).map(|nu| a[(mu, nu)] * s[i * m + nu]).sum();
                }
            }
        })
    }

    fn jac_phi_sigma(&self) -> MatMap {
        let (m, n, a) = (self.m, self.n, self.a.clone());
        Arc::new(move |_, _, _, out| {
            for i in 0..n {
                out.view_mut((i * m, i * m), (m, m)).copy_from(&a);
            }
        })
    }

    fn kinetic(&self) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
        let (m, n, a) = (self.m, self.n, self.a.clone());
        move |s: &[f64]| {
            let mut e = 0.0;
            for i in 0..n {
                for mu in 0..m {
                    for nu in 0..m {
                        e += 0.5 * s[i * m + mu] * a[(mu, nu)] * s[i * m + nu];
                    }
                }
            }
            e
        }
    }
}

fn zero_mat() -> MatMap {
    Arc::new(|_, _, _, _| {})
}

/// Instantiate a builtin system in space dimension `m`.
///
/// | name | n | φ | f |
/// |------|---|---|---|
/// | `poisson(f=0)` | 1 | σ | f |
/// | `linear_elliptic(a, c=1, f=1)` | 1 | aσ | f − c u |
/// | `anisotropic(a)` | 1 | aσ | 0 |
/// | `semilinear_sine(kappa=1)` | 1 | σ | κ sin u |
/// | `coupled_pair` | 2 | σ | (u₂, u₁) |
/// | `non_hamiltonian_control` | 2 | σ | (u₂, 0) |
pub fn builtin_system(spec: &SystemSpec, m: usize) -> Result<CanonicalSystem> {
    if m != 1 && m != 2 {
        return Err(SystemError::Dimensions { system: spec.name.clone(), m, n: 0 });
    }
    let name = spec.name.as_str();
    let allowed: &[&str] = match name {
        "poisson" => &["f"],
        "linear_elliptic" => &["a", "c", "f"],
        "anisotropic" => &["a"],
        "semilinear_sine" => &["kappa"],
        "coupled_pair" | "non_hamiltonian_control" => &[],
        _ => return Err(SystemError::UnknownSystem(spec.name.clone())),
    };
    let p = Params { system: name, map: &spec.params, allowed };
    p.check()?;
    let label = spec.to_string();
    let identity = DMatrix::identity(m, m);

    let sys = match name {
        "poisson" | "linear_elliptic" | "anisotropic" => {
            let a = match name {
                "poisson" => identity,
                "linear_elliptic" => p.matrix("a", m, default_a(m, true))?,
                _ => p.matrix("a", m, default_a(m, false))?,
            };
            let (c, src) = match name {
                "poisson" => (0.0, p.real("f", 0.0)?),
                "linear_elliptic" => (p.real("c", 1.0)?, p.real("f", 1.0)?),
                _ => (0.0, 0.0),
            };
            let q = Quadratic { m, n: 1, a };
            let kinetic = q.kinetic();
            let hess_a = q.a.clone();
            let ham = HamiltonianDef {
                h: Arc::new(move |_, u, s| kinetic(s) + src * u[0] - 0.5 * c * u[0] * u[0]),
                dh_du: Arc::new(move |_, u, _, out| out[0] = src - c * u[0]),
                dh_dsigma: q.phi(),
                hessian: Some(Arc::new(move |_, _, _, out| {
                    out[(0, 0)] = -c;
                    out.view_mut((1, 1), (m, m)).copy_from(&hess_a);
                })),
            };
            CanonicalSystem {
                m,
                n: 1,
                label,
                phi: q.phi(),
                f: Arc::new(move |_, u, _, out| out[0] = src - c * u[0]),
                jac_phi_u: zero_mat(),
                jac_phi_sigma: q.jac_phi_sigma(),
                jac_f_u: Arc::new(move |_, _, _, out| out[(0, 0)] = -c),
                jac_f_sigma: zero_mat(),
                linear: true,
                hamiltonian: Some(ham),
            }
        }
        "semilinear_sine" => {
            let kappa = p.real("kappa", 1.0)?;
            let q = Quadratic { m, n: 1, a: identity };
            let kinetic = q.kinetic();
            let ham = HamiltonianDef {
                h: Arc::new(move |_, u, s| kinetic(s) - kappa * u[0].cos()),
                dh_du: Arc::new(move |_, u, _, out| out[0] = kappa * u[0].sin()),
                dh_dsigma: q.phi(),
                hessian: Some(Arc::new(move |_, u, _, out| {
                    out[(0, 0)] = kappa * u[0].cos();
                    for mu in 0..m {
                        out[(1 + mu, 1 + mu)] = 1.0;
                    }
                })),
            };
            CanonicalSystem {
                m,
                n: 1,
                label,
                phi: q.phi(),
                f: Arc::new(move |_, u, _, out| out[0] = kappa * u[0].sin()),
                jac_phi_u: zero_mat(),
                jac_phi_sigma: q.jac_phi_sigma(),
                jac_f_u: Arc::new(move |_, u, _, out| out[(0, 0)] = kappa * u[0].cos()),
                jac_f_sigma: zero_mat(),
                linear: false,
                hamiltonian: Some(ham),
            }
        }
        "coupled_pair" => {
            let q = Quadratic { m, n: 2, a: identity };
            let kinetic = q.kinetic();
            let ham = HamiltonianDef {
                h: Arc::new(move |_, u, s| kinetic(s) + u[0] * u[1]),
                dh_du: Arc::new(|_, u, _, out| {
                    out[0] = u[1];
                    out[1] = u[0];
                }),
                dh_dsigma: q.phi(),
                hessian: Some(Arc::new(move |_, _, _, out| {
                    out[(0, 1)] = 1.0;
                    out[(1, 0)] = 1.0;
                    for k in 0..2 * m {
                        out[(2 + k, 2 + k)] = 1.0;
                    }
                })),
            };
            CanonicalSystem {
                m,
                n: 2,
                label,
                phi: q.phi(),
                f: Arc::new(|_, u, _, out| {
                    out[0] = u[1];
                    out[1] = u[0];
                }),
                jac_phi_u: zero_mat(),
                jac_phi_sigma: q.jac_phi_sigma(),
                jac_f_u: Arc::new(|_, _, _, out| {
                    out[(0, 1)] = 1.0;
                    out[(1, 0)] = 1.0;
                }),
                jac_f_sigma: zero_mat(),
                linear: true,
                hamiltonian: Some(ham),
            }
        }
        _ => {
            let q = Quadratic { m, n: 2, a: identity };
            CanonicalSystem {
                m,
                n: 2,
                label,
                phi: q.phi(),
                f: Arc::new(|_, u, _, out| {
                    out[0] = u[1];
                    out[1] = 0.0;
                }),
                jac_phi_u: zero_mat(),
                jac_phi_sigma: q.jac_phi_sigma(),
                jac_f_u: Arc::new(|_, _, _, out| out[(0, 1)] = 1.0),
                jac_f_sigma: zero_mat(),
                linear: true,
                hamiltonian: None,
            }
        }
    };
    Ok(sys)
}

/// Convenience wrapper: parse `text` and build the system.
pub fn builtin_from_str(text: &str, m: usize) -> Result<CanonicalSystem> {
    builtin_system(&text.parse()?, m)
}
