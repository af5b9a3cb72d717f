//! Exact solutions of the homogeneous heat equation on `(0,1)^d` as sine
//! series, used to check stability estimates and to build perturbations.
//!
//! A field stores coefficients `c_k` of `Π_i sin(k_i π x_i)` for
//! `k ∈ {1..n_max}^d`; its evolution is `c_k e^{-λ_k t}` with
//! `λ_k = π² |k|²`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{space_pair, SpaceBasisSpec, SpaceDofs};
use crate::error::{Error, Result};
use crate::mesh::SpatialMesh;

/// Coefficients above this magnitude count as blow-up of a backward evolution.
pub const BLOW_UP_LIMIT: f64 = 1e300;

/// Elliptic regularity gain on the unit square / interval (full H² regularity).
pub const REGULARITY_GAIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    d: usize,
    n_max: usize,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(d: usize, n_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&d) || n_max == 0 {
            return Err(Error::InvalidArgument(format!("spectral field d = {d}, n_max = {n_max}")));
        }
        if coeffs.len() != n_max.pow(d as u32) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                n_max.pow(d as u32),
                coeffs.len()
            )));
        }
        Ok(Self { d, n_max, coeffs })
    }

    pub fn zeros(d: usize, n_max: usize) -> Result<Self> {
        Self::new(d, n_max, vec![0.0; n_max.pow(d as u32)])
    }

    /// `c · Π sin(k_i π x_i)`.
    pub fn single_mode(mode: &[usize], c: f64) -> Result<Self> {
        let n_max = mode.iter().copied().max().unwrap_or(0);
        if mode.contains(&0) {
            return Err(Error::InvalidArgument("mode indices start at 1".into()));
        }
        let mut f = Self::zeros(mode.len(), n_max)?;
        let idx = f.index(mode);
        f.coeffs[idx] = c;
        Ok(f)
    }

    /// Coefficients uniform in `[-1, 1]`.
    pub fn random(d: usize, n_max: usize, rng: &mut impl Rng) -> Result<Self> {
        let n = n_max.pow(d as u32);
        Self::new(d, n_max, (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn index(&self, mode: &[usize]) -> usize {
        mode.iter().fold(0, |acc, k| acc * self.n_max + (k - 1))
    }

    /// Multi-index of coefficient `idx`.
    pub fn mode(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.d];
        for i in (0..self.d).rev() {
            m[i] = idx % self.n_max + 1;
            idx /= self.n_max;
        }
        m
    }

    pub fn coeff(&self, mode: &[usize]) -> f64 {
        self.coeffs[self.index(mode)]
    }

    pub fn eigenvalue(&self, idx: usize) -> f64 {
        PI * PI * self.mode(idx).iter().map(|k| (k * k) as f64).sum::<f64>()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        (0..self.coeffs.len()).map(|i| self.eigenvalue(i)).collect()
    }

    fn norm_factor(&self) -> f64 {
        0.5f64.powi(self.d as i32)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
            ..self.clone()
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.hbeta_norm(0.0)
    }

    /// `(Σ λ_k^β c_k² / 2^d)^{1/2}`.
    pub fn hbeta_norm(&self, beta: f64) -> f64 {
        let s: f64 = self
            .eigenvalues()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(l, c)| l.powf(beta) * c * c)
            .sum();
        (s * self.norm_factor()).sqrt()
    }

    /// `‖u(t)‖_{H^β}` of the forward evolution, without forming it.
    pub fn hbeta_norm_at(&self, t: f64, beta: f64) -> f64 {
        let s: f64 = self
            .eigenvalues()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(l, c)| l.powf(beta) * c * c * (-2.0 * l * t).exp())
            .sum();
        (s * self.norm_factor()).sqrt()
    }

    pub fn norm_at(&self, t: f64) -> f64 {
        self.hbeta_norm_at(t, 0.0)
    }

    /// `‖∂_t u(t)‖_{L2} = ‖Δu(t)‖_{L2}`.
    pub fn time_derivative_norm_at(&self, t: f64) -> f64 {
        self.hbeta_norm_at(t, 2.0)
    }

    /// `‖u‖_{L2(0,T; H^β)}` in closed form.
    pub fn l2_hbeta_time_norm(&self, t_end: f64, beta: f64) -> f64 {
        let s: f64 = self
            .eigenvalues()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(l, c)| l.powf(beta) * c * c * (-(-2.0 * l * t_end).exp_m1()) / (2.0 * l))
            .sum();
        (s * self.norm_factor()).sqrt()
    }

    /// Point value `Σ c_k Π sin(k_i π x_i)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let sines: Vec<Vec<f64>> = x
            .iter()
            .map(|xi| (1..=self.n_max).map(|k| (k as f64 * PI * xi).sin()).collect())
            .collect();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| {
                let m = self.mode(i);
                c * m.iter().enumerate().map(|(j, k)| sines[j][k - 1]).product::<f64>()
            })
            .sum()
    }
}

/// Evolve by `dt` (backward for `dt < 0`).
pub fn heat_evolve(field: &SpectralField, dt: f64) -> Result<SpectralField> {
    let mut out = field.clone();
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let v = *c * (-field.eigenvalue(i) * dt).exp();
        if !v.is_finite() || v.abs() > BLOW_UP_LIMIT {
            return Err(Error::BlowUp(v));
        }
        *c = v;
    }
    Ok(out)
}

/// Outcome of comparing `‖u(t)‖` (or an `H^β` variant) with its
/// conditional stability bound along the exact evolution.
#[derive(Debug, Clone)]
pub struct StabilityCheckResult {
    /// `max (actual - bound)` over the samples.
    pub max_violation: f64,
    /// `max actual / bound` over the samples.
    pub max_ratio: f64,
    pub sample_times: Vec<f64>,
    /// `ω(t) = t / T` at the samples.
    pub omega: Vec<f64>,
    pub bound_values: Vec<f64>,
    pub actual_values: Vec<f64>,
    pub elliptic_regularity_gain: f64,
    pub beta: f64,
    /// `max{‖u(0)‖, ‖u(T)‖ + 1}`.
    pub m_constant: f64,
}

fn uniform_samples(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

/// Check `‖u(t)‖ ≤ ‖u(0)‖^{1-t/T} ‖u(T)‖^{t/T}` for the evolution of `u0`.
pub fn check_log_convexity(u0: &SpectralField, t_end: f64, n_samples: usize) -> StabilityCheckResult {
    let n0 = u0.l2_norm();
    let nt = u0.norm_at(t_end);
    let times = uniform_samples(t_end, n_samples);
    let omega: Vec<f64> = times.iter().map(|t| t / t_end).collect();
    let actual: Vec<f64> = times.iter().map(|t| u0.norm_at(*t)).collect();
    let bound: Vec<f64> = omega
        .iter()
        .map(|w| ((1.0 - w) * n0.ln() + w * nt.ln()).exp())
        .collect();
    finish(times, omega, actual, bound, 0.0, n0.max(nt + 1.0))
}

fn finish(
    times: Vec<f64>,
    omega: Vec<f64>,
    actual: Vec<f64>,
    bound: Vec<f64>,
    beta: f64,
    m_constant: f64,
) -> StabilityCheckResult {
    let max_violation = actual
        .iter()
        .zip(&bound)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_ratio = actual
        .iter()
        .zip(&bound)
        .filter(|(_, b)| **b > 0.0)
        .map(|(a, b)| a / b)
        .fold(f64::NEG_INFINITY, f64::max);
    StabilityCheckResult {
        max_violation,
        max_ratio,
        sample_times: times,
        omega,
        bound_values: bound,
        actual_values: actual,
        elliptic_regularity_gain: REGULARITY_GAIN,
        beta,
        m_constant,
    }
}

/// Approximate `sup_{t ∈ [a, b]} f(t)`: log-spaced sampling followed by
/// golden-section refinement around the best sample.
pub fn sup_on_interval(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    let n = n.max(3);
    let ratio = (b / a).ln();
    let ts: Vec<f64> = (0..n)
        .map(|i| a * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect();
    let vals: Vec<f64> = ts.iter().map(|t| f(*t)).collect();
    let (best, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    let mut lo = ts[best.saturating_sub(1)];
    let mut hi = ts[(best + 1).min(n - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let candidates = [(vals[best], ts[best]), (f1, x1), (f2, x2), (f(a), a), (f(b), b)];
    let (v, t) = candidates
        .iter()
        .copied()
        .fold((f64::NEG_INFINITY, a), |acc, c| if c.0 > acc.0 { c } else { acc });
    (v, t)
}

#[derive(Debug, Clone, Copy)]
pub struct SmoothingReport {
    /// `sup_t t ‖∂_t u(t)‖ / ‖u(0)‖`.
    pub sup_value: f64,
    pub argmax: f64,
}

/// `t ‖∂_t u(t)‖ / ‖u(0)‖`.
pub fn smoothing_ratio(u0: &SpectralField, t: f64) -> f64 {
    t * u0.time_derivative_norm_at(t) / u0.l2_norm()
}

/// Supremum of the smoothing ratio over `(0, T]`.
pub fn check_smoothing(u0: &SpectralField, t_end: f64) -> SmoothingReport {
    let lambda_max = (0..u0.coeffs.len())
        .filter(|i| u0.coeffs[*i] != 0.0)
        .map(|i| u0.eigenvalue(i))
        .fold(0.0, f64::max);
    // every mode peaks at t = 1/λ; start well before the fastest one
    let a = (1e-3 / lambda_max.max(1.0)).min(t_end * 1e-6);
    let (sup_value, argmax) = sup_on_interval(|t| smoothing_ratio(u0, t), a, t_end, 4000);
    SmoothingReport { sup_value, argmax }
}

/// `t^{-β/(1+g)} ‖u(0)‖ (‖u(T)‖/‖u(0)‖)^{(1-β/(1+g)) t/T}` with gain `g`.
pub fn hbeta_bound(u0: &SpectralField, t_end: f64, beta: f64, t: f64) -> f64 {
    let n0 = u0.l2_norm();
    let nt = u0.norm_at(t_end);
    let s = beta / (1.0 + REGULARITY_GAIN);
    (-s * t.ln() + n0.ln() + (1.0 - s) * (t / t_end) * (nt / n0).ln()).exp()
}

/// Compare `‖u(t)‖_{H^β}` with [`hbeta_bound`] on `(0, T]`; `max_ratio`
/// is refined to the supremum over the interval.
pub fn check_hbeta_stability(
    u0: &SpectralField,
    t_end: f64,
    beta: f64,
    n_samples: usize,
) -> Result<StabilityCheckResult> {
    if !(0.0..2.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("β = {beta} outside [0, 2)")));
    }
    let times: Vec<f64> = uniform_samples(t_end, n_samples + 1).into_iter().skip(1).collect();
    let omega: Vec<f64> = times.iter().map(|t| t / t_end).collect();
    let actual: Vec<f64> = times.iter().map(|t| u0.hbeta_norm_at(*t, beta)).collect();
    let bound: Vec<f64> = times.iter().map(|t| hbeta_bound(u0, t_end, beta, *t)).collect();
    let m = u0.l2_norm().max(u0.norm_at(t_end) + 1.0);
    let mut res = finish(times, omega, actual, bound, beta, m);
    let (sup, _) = sup_on_interval(
        |t| u0.hbeta_norm_at(t, beta) / hbeta_bound(u0, t_end, beta, t),
        t_end * 1e-8,
        t_end,
        2000,
    );
    res.max_ratio = res.max_ratio.max(sup);
    Ok(res)
}

/// Closed-form `sup_{t ∈ (0,T]}` of the `H^β` ratio for a single mode of
/// eigenvalue `λ`: `(λt)^{β/2} e^{-βλt/2}`, maximal at `λt = 1`.
pub fn single_mode_hbeta_ratio_sup(lambda: f64, t_end: f64, beta: f64) -> f64 {
    let s = (lambda * t_end).min(1.0);
    s.powf(beta / 2.0) * (-beta * s / 2.0).exp()
}

#[derive(Debug, Clone)]
pub struct DecayFit {
    /// `-log ‖u(T)‖` per field.
    pub log_data: Vec<f64>,
    /// `‖u‖_{L2(0,T;H^β)}` per field.
    pub norms: Vec<f64>,
    pub slope: f64,
    /// `-(1 - 2β/(1+g)) / 2` for linear `ω` and gain `g`.
    pub expected: f64,
}

/// Single modes `(n, …, n)` with unit coefficient (so `‖u(0)‖` stays fixed):
/// fit `log ‖u‖_{L2(J;H^β)}` against `log(-log ‖u(T)‖)`.
pub fn decay_rate_fit(d: usize, beta: f64, t_end: f64, modes: &[usize]) -> Result<DecayFit> {
    let mut log_data = Vec::new();
    let mut norms = Vec::new();
    for &n in modes {
        let f = SpectralField::single_mode(&vec![n; d], 1.0)?;
        let lambda = d as f64 * (n as f64 * PI).powi(2);
        // ‖u(T)‖ = 2^{-d/2} e^{-λT}, in log form to avoid underflow
        log_data.push(lambda * t_end + 0.5 * d as f64 * 2f64.ln());
        norms.push(f.l2_hbeta_time_norm(t_end, beta));
    }
    let slope = log_log_slope(&log_data, &norms)?;
    Ok(DecayFit {
        log_data,
        norms,
        slope,
        expected: -(1.0 - 2.0 * beta / (1.0 + REGULARITY_GAIN)) / 2.0,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two matching points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// `amplitude · Π sin(nπx_i)`: the end value of the mode
/// `e^{d(nπ)²(T-t)} Π sin(nπx_i)`, which has `L2` norm `2^{-d/2}` at `t = T`.
pub fn mode_perturbation(d: usize, n: usize, amplitude: f64) -> Result<SpectralField> {
    if n == 0 {
        return Err(Error::InvalidArgument("mode index must be at least 1".into()));
    }
    SpectralField::single_mode(&vec![n; d], amplitude)
}

/// Finite element coefficients with i.i.d. uniform entries in `[-1, 1]`,
/// rescaled to the requested `L2(Ω)` norm.
pub fn random_perturbation(
    mesh: &SpatialMesh,
    spec: SpaceBasisSpec,
    target_norm: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(target_norm > 0.0) {
        return Err(Error::InvalidArgument(format!("target norm {target_norm} must be positive")));
    }
    let dofs = SpaceDofs::new(mesh, spec);
    if dofs.n_dofs() == 0 {
        return Err(Error::InvalidArgument("empty finite element space".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..dofs.n_dofs()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let norm = fe_l2_norm(mesh, spec, &c);
    Ok(c.iter().map(|v| v * target_norm / norm).collect())
}

/// `(cᵀ M c)^{1/2}` for the mass matrix of the given space.
pub fn fe_l2_norm(mesh: &SpatialMesh, spec: SpaceBasisSpec, c: &[f64]) -> f64 {
    let dofs = SpaceDofs::new(mesh, spec);
    let mass = space_pair(mesh, &dofs, &dofs).0;
    c.iter().zip(mass.mul_vec(c)).map(|(a, b)| a * b).sum::<f64>().sqrt()
}
