//! Preconditioned conjugate gradients on closures.

use crate::error::{Error, Result};

/// Result of a PCG run.
#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `rᵀ P r` for the initial guess and after every iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` for SPD `A` with SPD preconditioner `P`, starting from
/// `x0` (zero if `None`). After each iterate `stop(iteration, rᵀ P r, ‖r‖)`
/// decides whether to terminate.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    precond: impl Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    x0: Option<&[f64]>,
    mut stop: impl FnMut(usize, f64, f64) -> bool,
    max_iter: usize,
) -> Result<PcgOutcome> {
    let n = b.len();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = b.to_vec();
    if x.iter().any(|v| *v != 0.0) {
        let ax = apply(&x)?;
        for (ri, ai) in r.iter_mut().zip(&ax) {
            *ri -= ai;
        }
    }
    let mut z = precond(&r)?;
    let mut rz = dot(&r, &z);
    let mut history = vec![rz];
    if stop(0, rz, dot(&r, &r).sqrt()) {
        return Ok(PcgOutcome {
            x,
            iterations: 0,
            history,
            converged: true,
        });
    }
    let mut p = z.clone();
    for it in 1..=max_iter {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            if rz == 0.0 {
                return Ok(PcgOutcome {
                    x,
                    iterations: it - 1,
                    history,
                    converged: true,
                });
            }
            return Err(Error::NotPositiveDefinite(format!(
                "pᵀAp = {pap:e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r)?;
        let rz_new = dot(&r, &z);
        history.push(rz_new);
        if !rz_new.is_finite() {
            return Err(Error::NotConverged {
                iterations: it,
                residual: rz_new,
            });
        }
        if stop(it, rz_new, dot(&r, &r).sqrt()) {
            return Ok(PcgOutcome {
                x,
                iterations: it,
                history,
                converged: true,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(PcgOutcome {
        x,
        iterations: max_iter,
        history,
        converged: false,
    })
}
