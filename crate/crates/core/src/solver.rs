//! The regularized least-squares system, its PCG solution and error
//! measurement against manufactured solutions.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use crate::assembly::{load_vector_f, load_vector_space, CellGeometry, SpaceBasisSpec, SpaceDofs};
use crate::error::{Error, Result};
use crate::krylov;
use crate::mesh::MeshPair;
use crate::operators::{Discretization, KroneckerOperator, LinearOperator};
use crate::oracle::{log_log_slope, mode_perturbation, random_perturbation};
use crate::precond::{make_g_x, make_g_y, Preconditioner, Realization, RieszPreconditioner};
use crate::quadrature::{gauss_legendre, simplex_rule};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonStrategy {
    /// `DoFs^{-1/d}`.
    Plain,
    /// `‖g_pert‖ + DoFs^{-1/d}`.
    DataAware,
    Explicit(f64),
}

pub fn choose_epsilon(strategy: &EpsilonStrategy, dofs: usize, d: usize, pert_norm: f64) -> f64 {
    let base = (dofs.max(1) as f64).powf(-1.0 / d as f64);
    match strategy {
        EpsilonStrategy::Plain => base,
        EpsilonStrategy::DataAware => pert_norm + base,
        EpsilonStrategy::Explicit(v) => *v,
    }
}

/// A smooth function on `J × Ω` with the derivatives needed for data and errors.
pub trait ExactSolution: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, x: &[f64]) -> f64;
    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64>;
    fn time_derivative(&self, t: f64, x: &[f64]) -> f64;
    fn laplacian(&self, t: f64, x: &[f64]) -> f64;

    /// `f = ∂_t u - Δu`.
    fn source(&self, t: f64, x: &[f64]) -> f64 {
        self.time_derivative(t, x) - self.laplacian(t, x)
    }
}

/// Separable solutions `a(t) Π sin(nπx_i)` on the unit cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manufactured {
    /// `(1 + t³) Π sin(πx_i)`.
    PolyCubic { d: usize },
    /// `exp(d(nπ)²(t_ref - t)) Π sin(nπx_i)`, a solution of the homogeneous equation.
    HeatMode { d: usize, n: usize, t_ref: f64 },
    Zero { d: usize },
}

impl Manufactured {
    fn frequency(&self) -> f64 {
        match self {
            Manufactured::HeatMode { n, .. } => *n as f64 * PI,
            _ => PI,
        }
    }

    /// `(a(t), a'(t))`.
    fn profile(&self, t: f64) -> (f64, f64) {
        match *self {
            Manufactured::PolyCubic { .. } => (1.0 + t * t * t, 3.0 * t * t),
            Manufactured::HeatMode { d, n, t_ref } => {
                let rate = d as f64 * (n as f64 * PI).powi(2);
                let a = (rate * (t_ref - t)).exp();
                (a, -rate * a)
            }
            Manufactured::Zero { .. } => (0.0, 0.0),
        }
    }

    fn shape(&self, x: &[f64]) -> f64 {
        let w = self.frequency();
        x.iter().map(|xi| (w * xi).sin()).product()
    }
}

impl ExactSolution for Manufactured {
    fn dim(&self) -> usize {
        match *self {
            Manufactured::PolyCubic { d } | Manufactured::HeatMode { d, .. } | Manufactured::Zero { d } => d,
        }
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.profile(t).0 * self.shape(x)
    }

    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let w = self.frequency();
        let a = self.profile(t).0;
        (0..x.len())
            .map(|i| {
                let others: f64 = x
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, xj)| (w * xj).sin())
                    .product();
                a * w * (w * x[i]).cos() * others
            })
            .collect()
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        self.profile(t).1 * self.shape(x)
    }

    fn laplacian(&self, t: f64, x: &[f64]) -> f64 {
        let w = self.frequency();
        -(x.len() as f64) * w * w * self.value(t, x)
    }

    fn source(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            // the exact cancellation avoids round-off of two huge terms
            Manufactured::HeatMode { .. } | Manufactured::Zero { .. } => 0.0,
            Manufactured::PolyCubic { .. } => self.time_derivative(t, x) - self.laplacian(t, x),
        }
    }
}

/// A symmetric positive definite operator on trial coefficients.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn epsilon(&self) -> Option<f64> {
        None
    }
}

/// The identity, for exercising the iteration in isolation.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl SymmetricOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `S_ε = Bᵀ G_Y B + γ_Tᵀ M γ_T + ε² γ_0ᵀ M γ_0` with right-hand side
/// `h = Bᵀ G_Y F + γ_Tᵀ g`.
#[derive(Debug)]
pub struct LeastSquaresSystem {
    disc: Arc<Discretization>,
    b: KroneckerOperator,
    g_y: RieszPreconditioner,
    gamma_t: KroneckerOperator,
    gamma_0: KroneckerOperator,
    mass: SparseMatrix,
    epsilon: f64,
    f_load: Vec<f64>,
    g_load: Vec<f64>,
    rhs: Vec<f64>,
}

impl LeastSquaresSystem {
    /// `f_load[i] = f(ψ_i)` on the test space, `g_load[j] = ∫ g η_j` on the spatial trial space.
    pub fn new(disc: Arc<Discretization>, epsilon: f64, f_load: Vec<f64>, g_load: Vec<f64>) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("regularization parameter {epsilon}")));
        }
        if f_load.len() != disc.n_test() || g_load.len() != disc.n_space_trial() {
            return Err(Error::DimensionMismatch("load vectors do not match the spaces".into()));
        }
        let b = disc.b();
        let g_y = make_g_y(&disc);
        let time = disc.time_mesh();
        let gamma_t = disc.trace(time.t_end())?;
        let gamma_0 = disc.trace(time.t_start())?;
        let mass = disc.space_mass().clone();
        let mut rhs = b.apply_transpose(&g_y.apply(&f_load)?);
        gamma_t.apply_transpose_add(&g_load, &mut rhs);
        Ok(Self {
            disc,
            b,
            g_y,
            gamma_t,
            gamma_0,
            mass,
            epsilon,
            f_load,
            g_load,
            rhs,
        })
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn f_load(&self) -> &[f64] {
        &self.f_load
    }

    pub fn g_load(&self) -> &[f64] {
        &self.g_load
    }

    pub fn reg_epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `‖Bz - f‖²_{Y^δ'} + ‖γ_T z - g‖² + ε² ‖γ_0 z‖²` up to the
    /// `z`-independent constant `‖g‖²`.
    pub fn functional(&self, z: &[f64]) -> Result<f64> {
        let mut r = self.b.apply(z);
        for (ri, fi) in r.iter_mut().zip(&self.f_load) {
            *ri -= fi;
        }
        let res = self.g_y.dual_norm_sq(&r)?;
        let zt = self.gamma_t.apply(z);
        let z0 = self.gamma_0.apply(z);
        Ok(res + dot(&zt, &self.mass.mul_vec(&zt)) - 2.0 * dot(&zt, &self.g_load)
            + self.epsilon.powi(2) * dot(&z0, &self.mass.mul_vec(&z0)))
    }

    /// Dense matrix of `S_ε`; small problems only.
    pub fn to_dense(&self) -> Result<nalgebra::DMatrix<f64>> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            m.column_mut(j).copy_from_slice(&self.apply(&e)?);
            e[j] = 0.0;
        }
        Ok(m)
    }
}

impl SymmetricOperator for LeastSquaresSystem {
    fn dim(&self) -> usize {
        self.disc.n_trial()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.b.apply_transpose(&self.g_y.apply(&self.b.apply(x))?);
        let xt = self.gamma_t.apply(x);
        self.gamma_t.apply_transpose_add(&self.mass.mul_vec(&xt), &mut y);
        if self.epsilon > 0.0 {
            let x0 = self.gamma_0.apply(x);
            let m0: Vec<f64> = self.mass.mul_vec(&x0).iter().map(|v| v * self.epsilon.powi(2)).collect();
            self.gamma_0.apply_transpose_add(&m0, &mut y);
        }
        Ok(y)
    }

    fn epsilon(&self) -> Option<f64> {
        Some(self.epsilon)
    }
}

/// Assemble the system for source `f` and end-time data `g`.
pub fn build_system(
    disc: Arc<Discretization>,
    epsilon: f64,
    f: impl Fn(f64, &[f64]) -> f64,
    g: impl Fn(&[f64]) -> f64,
    quad_order: usize,
) -> Result<LeastSquaresSystem> {
    let meshes = disc.meshes();
    let f_load = load_vector_f(&meshes.time, &meshes.space, disc.time_test(), disc.test_dofs(), f, quad_order)?;
    let g_load = load_vector_space(&meshes.space, disc.trial_dofs(), g, quad_order);
    LeastSquaresSystem::new(disc, epsilon, f_load, g_load)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `rᵀ G_X r` for the initial guess and after every iteration.
    pub residual_history: Vec<f64>,
    pub stopping_value: f64,
    pub threshold: f64,
    pub epsilon: Option<f64>,
    /// `false` if the iteration limit was reached first.
    pub converged: bool,
    pub wall_time_s: f64,
}

/// PCG from zero until `rᵀ P r ≤ threshold`.
pub fn pcg<S: SymmetricOperator + ?Sized, P: Preconditioner + ?Sized>(
    system: &S,
    rhs: &[f64],
    precond: &P,
    threshold: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("stopping threshold {threshold}")));
    }
    if rhs.len() != system.dim() || precond.dim() != system.dim() {
        return Err(Error::DimensionMismatch("system, right-hand side and preconditioner".into()));
    }
    let start = Instant::now();
    let out = krylov::pcg(
        |x| system.apply(x),
        |r| precond.apply(r),
        rhs,
        None,
        |_, rz, _| rz <= threshold,
        max_iter,
    )?;
    if !out.converged {
        log::warn!(
            "PCG stopped at the iteration limit {max_iter} with rᵀG_X r = {:e} > {threshold:e}",
            out.history.last().copied().unwrap_or(f64::NAN)
        );
    }
    let report = SolveReport {
        iterations: out.iterations,
        stopping_value: *out.history.last().expect("history starts with the initial residual"),
        residual_history: out.history,
        threshold,
        epsilon: system.epsilon(),
        converged: out.converged,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((out.x, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `(t, ‖u(t) - u_h(t)‖_{L2(Ω)})`.
    pub l2_slices: Vec<(f64, f64)>,
    pub l2l2: f64,
    pub l2h1: f64,
    pub dofs: usize,
}

/// `(‖e‖², |e|²_{H¹})` on Ω for `e = u - u_h` with `u_h` given by spatial coefficients.
fn space_errors(
    disc: &Discretization,
    slab: &[f64],
    value: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    quad_order: usize,
) -> (f64, f64) {
    let mesh = &disc.meshes().space;
    let dofs = disc.trial_dofs();
    let (pts, wts) = simplex_rule(mesh.dim(), quad_order);
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        for (xi, w) in pts.iter().zip(&wts) {
            let x = geom.map(xi);
            let (vh, gh) = dofs.eval(&geom, c, slab, xi);
            let e = value(&x) - vh;
            let ge: f64 = grad(&x).iter().zip(&gh).map(|(a, b)| (a - b) * (a - b)).sum();
            l2 += w * geom.det() * e * e;
            h1 += w * geom.det() * ge;
        }
    }
    (l2, h1)
}

fn time_slab(coeffs: &[f64], ns: usize, node: usize) -> &[f64] {
    &coeffs[node * ns..(node + 1) * ns]
}

fn blend(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - s) * x + s * y).collect()
}

/// Errors of the trial function `coeffs` against `exact`: slices at the
/// given times (linear in time between breakpoints) and space-time norms by
/// tensor Gauss quadrature.
pub fn error_report(
    disc: &Discretization,
    coeffs: &[f64],
    exact: &dyn ExactSolution,
    slice_times: &[f64],
    quad_order: usize,
) -> Result<ErrorReport> {
    if coeffs.len() != disc.n_trial() {
        return Err(Error::DimensionMismatch("coefficient vector".into()));
    }
    let mut l2_slices = Vec::with_capacity(slice_times.len());
    for &t in slice_times {
        let slab = disc.trace(t)?.apply(coeffs);
        let (l2, _) = space_errors(disc, &slab, |x| exact.value(t, x), |x| exact.grad(t, x), quad_order);
        l2_slices.push((t, l2.sqrt()));
    }
    let time = disc.time_mesh();
    let ns = disc.n_space_trial();
    let (gx, gw) = gauss_legendre(quad_order / 2 + 1);
    let mut l2l2 = 0.0;
    let mut h1 = 0.0;
    for e in 0..time.n_elements() {
        let (a, b) = time.element(e);
        let (left, right) = (time_slab(coeffs, ns, e), time_slab(coeffs, ns, e + 1));
        for (s, w) in gx.iter().zip(&gw) {
            let t = a + (b - a) * s;
            let slab = blend(left, right, *s);
            let (l2, semi) = space_errors(disc, &slab, |x| exact.value(t, x), |x| exact.grad(t, x), quad_order);
            l2l2 += w * (b - a) * l2;
            h1 += w * (b - a) * semi;
        }
    }
    Ok(ErrorReport {
        l2_slices,
        l2l2: l2l2.sqrt(),
        l2h1: (l2l2 + h1).sqrt(),
        dofs: disc.n_trial(),
    })
}

/// Space-time nodal interpolant in the trial space.
pub fn interpolant(disc: &Discretization, exact: &dyn ExactSolution) -> Vec<f64> {
    let nodes = disc.trial_dofs().nodes();
    disc.time_mesh()
        .breakpoints()
        .iter()
        .flat_map(|&t| nodes.iter().map(move |x| exact.value(t, x)))
        .collect()
}

/// Computable upper bound for the `X`-norm distance between `exact` and
/// its nodal interpolant: `(‖∇(u - Iu)‖² + λ₁⁻¹ ‖∂_t(u - Iu)‖²)^{1/2}` over
/// `J × Ω`, using `‖w‖_{H⁻¹} ≤ λ₁^{-1/2} ‖w‖_{L2}` with `λ₁ = dπ²`.
pub fn interpolation_error_x(disc: &Discretization, exact: &dyn ExactSolution, quad_order: usize) -> f64 {
    let iu = interpolant(disc, exact);
    let time = disc.time_mesh();
    let ns = disc.n_space_trial();
    let lambda1 = disc.meshes().space.dim() as f64 * PI * PI;
    let (gx, gw) = gauss_legendre(quad_order / 2 + 1);
    let mut total = 0.0;
    for e in 0..time.n_elements() {
        let (a, b) = time.element(e);
        let h = b - a;
        let (left, right) = (time_slab(&iu, ns, e), time_slab(&iu, ns, e + 1));
        let slope: Vec<f64> = left.iter().zip(right).map(|(l, r)| (r - l) / h).collect();
        for (s, w) in gx.iter().zip(&gw) {
            let t = a + h * s;
            let slab = blend(left, right, *s);
            let (_, semi) = space_errors(disc, &slab, |x| exact.value(t, x), |x| exact.grad(t, x), quad_order);
            let (dt_l2, _) = space_errors(
                disc,
                &slope,
                |x| exact.time_derivative(t, x),
                |x| vec![0.0; x.len()],
                quad_order,
            );
            total += w * h * (semi + dt_l2 / lambda1);
        }
    }
    total.sqrt()
}

/// `‖u(t)‖_{L2(Ω)}` by quadrature on the spatial mesh.
pub fn exact_l2_norm_at(disc: &Discretization, exact: &dyn ExactSolution, t: f64, quad_order: usize) -> f64 {
    let zero = vec![0.0; disc.n_space_trial()];
    space_errors(disc, &zero, |x| exact.value(t, x), |x| vec![0.0; x.len()], quad_order)
        .0
        .sqrt()
}

/// `(E_data + E_appr)² / ‖γ_0 u‖`.
pub fn manufactured_threshold(e_data: f64, e_appr: f64, gamma0_norm: f64) -> f64 {
    let num = (e_data + e_appr).powi(2);
    if num == 0.0 {
        0.0
    } else {
        num / gamma0_norm
    }
}

/// Least-squares slope of `log(error)` against `log(dofs)`.
pub fn fit_rate(dofs: &[f64], errors: &[f64]) -> Result<f64> {
    if dofs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least three points, got {}",
            dofs.len()
        )));
    }
    log_log_slope(dofs, errors)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    None,
    /// `amplitude · Π sin(nπx_i)` added to `g`.
    Mode { n: usize, amplitude: f64 },
    /// A seeded random finite element function of the given `L2` norm.
    Random { target_norm: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Stop when `rᵀ G_X r` drops below this value.
    Threshold(f64),
    /// `(ε (E_data + E_appr))²`: the residual bound `|||e||| ≤ ε⁻¹ (rᵀ G_X r)^{1/2}`
    /// made smaller than `E_data + E_appr`. All factors come from the
    /// manufactured solution and the known perturbation.
    Manufactured,
    /// `(E_data + E_appr)² / ‖γ_0 u‖`, the same bound with `ε` replaced by
    /// its a priori size `(E_data + E_appr) / ‖γ_0 u‖` and without the square.
    ManufacturedCoarse,
}

#[derive(Clone)]
pub struct BackwardProblem {
    pub meshes: MeshPair,
    pub l: usize,
    pub epsilon: EpsilonStrategy,
    pub solution: Arc<dyn ExactSolution>,
    pub perturbation: Perturbation,
    pub stopping: StoppingRule,
    pub max_iter: usize,
    pub slice_times: Vec<f64>,
    pub quad_order: usize,
    pub realization: Realization,
}

impl BackwardProblem {
    pub fn new(meshes: MeshPair, solution: Arc<dyn ExactSolution>) -> Self {
        Self {
            meshes,
            l: 0,
            epsilon: EpsilonStrategy::Plain,
            solution,
            perturbation: Perturbation::None,
            stopping: StoppingRule::Manufactured,
            max_iter: 5000,
            slice_times: Vec::new(),
            quad_order: 6,
            realization: Realization::Exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BackwardSolution {
    pub coeffs: Vec<f64>,
    pub report: SolveReport,
    pub errors: ErrorReport,
    pub epsilon: f64,
    pub perturbation_norm: f64,
    pub approximation_error: f64,
    /// Functional value at the computed solution and at the nodal
    /// interpolant of the exact solution.
    pub functional: f64,
    pub functional_at_interpolant: f64,
}

/// Mesh pair → system → ε → PCG → errors.
pub fn solve_backward(problem: &BackwardProblem) -> Result<BackwardSolution> {
    let disc = Arc::new(Discretization::new(problem.meshes.clone(), problem.l)?);
    let exact = problem.solution.as_ref();
    let d = problem.meshes.space.dim();
    if exact.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "solution in {} dimensions on a {d}-dimensional mesh",
            exact.dim()
        )));
    }
    let q = problem.quad_order;
    let t_end = disc.time_mesh().t_end();
    let t_start = disc.time_mesh().t_start();

    let (mode, fe_pert, pert_norm) = match &problem.perturbation {
        Perturbation::None => (None, None, 0.0),
        Perturbation::Mode { n, amplitude } => {
            let field = mode_perturbation(d, *n, *amplitude)?;
            let norm = field.l2_norm();
            (Some(field), None, norm)
        }
        Perturbation::Random { target_norm, seed } => {
            let c = random_perturbation(&problem.meshes.space, SpaceBasisSpec::h01(1), *target_norm, *seed)?;
            (None, Some(c), *target_norm)
        }
    };

    let epsilon = choose_epsilon(&problem.epsilon, disc.n_trial(), d, pert_norm);
    let meshes = disc.meshes();
    let f_load = load_vector_f(
        &meshes.time,
        &meshes.space,
        disc.time_test(),
        disc.test_dofs(),
        |t, x| exact.source(t, x),
        q,
    )?;
    let mut g_load = load_vector_space(
        &meshes.space,
        disc.trial_dofs(),
        |x| exact.value(t_end, x) + mode.as_ref().map_or(0.0, |m| m.eval(x)),
        q,
    );
    if let Some(c) = &fe_pert {
        disc.space_mass().mul_add(1.0, c, &mut g_load);
    }
    let system = LeastSquaresSystem::new(Arc::clone(&disc), epsilon, f_load, g_load)?;
    let g_x = make_g_x(&disc, problem.realization)?;

    let approximation_error = interpolation_error_x(&disc, exact, q);
    let threshold = match problem.stopping {
        StoppingRule::Threshold(v) => v,
        StoppingRule::Manufactured => (epsilon * (pert_norm + approximation_error)).powi(2),
        StoppingRule::ManufacturedCoarse => {
            let gamma0 = exact_l2_norm_at(&disc, exact, t_start, q);
            manufactured_threshold(pert_norm, approximation_error, gamma0)
        }
    };
    let (coeffs, report) = pcg(&system, system.rhs(), &g_x, threshold, problem.max_iter)?;
    let errors = error_report(&disc, &coeffs, exact, &problem.slice_times, q + 2)?;
    let functional = system.functional(&coeffs)?;
    let functional_at_interpolant = system.functional(&interpolant(&disc, exact))?;
    Ok(BackwardSolution {
        coeffs,
        report,
        errors,
        epsilon,
        perturbation_norm: pert_norm,
        approximation_error,
        functional,
        functional_at_interpolant,
    })
}

/// Spatial trial space used for end-time data and perturbations.
pub fn trial_space(meshes: &MeshPair) -> SpaceDofs {
    SpaceDofs::new(&meshes.space, SpaceBasisSpec::h01(1))
}
