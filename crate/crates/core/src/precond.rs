//! Riesz maps of the discrete trial and test norms, used as preconditioners
//! and to evaluate discrete dual norms `f(G f)`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::krylov::pcg;
use crate::operators::{Discretization, GramOperator, LinearOperator};
use crate::sparse::{SparseCholesky, SparseMatrix};

/// An SPD map from dual coefficients to primal coefficients.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Test space norm `L2(J; H¹₀)`.
    Y,
    /// Trial space norm `L2(J; H¹₀) ∩ H¹(J; H⁻¹)`.
    X,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Realization {
    /// Direct factorizations (sparse Cholesky in space; for `X` a spatial
    /// eigenbasis with tridiagonal solves in time).
    Exact,
    /// Inner CG on the Gram operator, preconditioned by `M_t⁻¹ ⊗ A_x⁻¹`,
    /// to a relative Euclidean residual `rel_tol`.
    InnerCg { rel_tol: f64, max_iter: usize },
}

impl Realization {
    pub fn inner_cg() -> Self {
        Realization::InnerCg {
            rel_tol: 1e-10,
            max_iter: 2000,
        }
    }
}

pub struct RieszPreconditioner {
    norm: NormKind,
    realization: Realization,
    map: Box<dyn Preconditioner>,
}

impl std::fmt::Debug for RieszPreconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RieszPreconditioner")
            .field("norm", &self.norm)
            .field("realization", &self.realization)
            .field("dim", &self.map.dim())
            .finish()
    }
}

impl RieszPreconditioner {
    pub fn new(norm: NormKind, realization: Realization, map: Box<dyn Preconditioner>) -> Self {
        Self {
            norm,
            realization,
            map,
        }
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn realization(&self) -> Realization {
        self.realization
    }

    /// `f(G f)`, the squared discrete dual norm of `f`.
    pub fn dual_norm_sq(&self, f: &[f64]) -> Result<f64> {
        let g = self.map.apply(f)?;
        Ok(f.iter().zip(&g).map(|(a, b)| a * b).sum())
    }
}

impl Preconditioner for RieszPreconditioner {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "preconditioner of size {} applied to vector of length {}",
                self.dim(),
                f.len()
            )));
        }
        self.map.apply(f)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        Ok(f.to_vec())
    }
}

/// `I ⊗ K⁻¹` for a sparse SPD spatial matrix `K`.
struct BlockSolve {
    n_time: usize,
    factor: Arc<SparseCholesky>,
}

impl Preconditioner for BlockSolve {
    fn dim(&self) -> usize {
        self.n_time * self.factor.dim()
    }

    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let ns = self.factor.dim();
        let mut out = Vec::with_capacity(f.len());
        for row in f.chunks(ns) {
            out.extend(self.factor.solve(row));
        }
        Ok(out)
    }
}

/// LDLᵀ factorization of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
struct TridiagonalLdl {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagonalLdl {
    fn factor(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = diag[0];
        for i in 1..n {
            l[i - 1] = off[i - 1] / d[i - 1];
            d[i] = diag[i] - l[i - 1] * off[i - 1];
        }
        if d.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::NotPositiveDefinite("tridiagonal factor".into()));
        }
        Ok(Self { d, l })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
    }
}

fn tridiagonal_parts(m: &SparseMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.n_rows();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for (i, j, v) in m.triplets() {
        if i == j {
            diag[i] = v;
        } else if j == i + 1 {
            off[i] = v;
        } else if i != j + 1 {
            return Err(Error::InvalidArgument("matrix is not tridiagonal".into()));
        }
    }
    Ok((diag, off))
}

/// Exact inverse of `M_t ⊗ A + T_t ⊗ M A⁻¹ M` using `A Q = M Q Λ`, `QᵀMQ = I`:
/// in the eigenbasis every spatial mode decouples into the tridiagonal
/// system `λ M_t + λ⁻¹ T_t`.
struct SpectralGramXInverse {
    n_time: usize,
    q: DMatrix<f64>,
    modes: Vec<TridiagonalLdl>,
}

impl SpectralGramXInverse {
    fn new(disc: &Discretization) -> Result<Self> {
        let m = disc.space_mass().to_dense();
        let a = disc.space_stiffness().to_dense();
        let l = m
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("spatial mass matrix".into()))?
            .l();
        let y = l
            .solve_lower_triangular(&a)
            .ok_or_else(|| Error::NotPositiveDefinite("spatial mass matrix".into()))?;
        let c = l
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::NotPositiveDefinite("spatial mass matrix".into()))?;
        let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
        let q = l
            .transpose()
            .solve_upper_triangular(&eig.eigenvectors)
            .ok_or_else(|| Error::NotPositiveDefinite("spatial mass matrix".into()))?;
        let (mt_d, mt_o) = tridiagonal_parts(disc.time_mass())?;
        let (tt_d, tt_o) = tridiagonal_parts(disc.time_stiffness())?;
        let mut modes = Vec::with_capacity(eig.eigenvalues.len());
        for &lam in eig.eigenvalues.iter() {
            if !(lam > 0.0) {
                return Err(Error::NotPositiveDefinite(format!("stiffness eigenvalue {lam}")));
            }
            let diag: Vec<f64> = mt_d.iter().zip(&tt_d).map(|(m, t)| lam * m + t / lam).collect();
            let off: Vec<f64> = mt_o.iter().zip(&tt_o).map(|(m, t)| lam * m + t / lam).collect();
            modes.push(TridiagonalLdl::factor(&diag, &off)?);
        }
        Ok(Self {
            n_time: disc.n_time_trial(),
            q,
            modes,
        })
    }
}

impl Preconditioner for SpectralGramXInverse {
    fn dim(&self) -> usize {
        self.n_time * self.q.nrows()
    }

    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let ns = self.q.nrows();
        let fm = DMatrix::from_row_slice(self.n_time, ns, f);
        let mut w = fm * &self.q;
        for (j, mode) in self.modes.iter().enumerate() {
            let mut col: Vec<f64> = w.column(j).iter().copied().collect();
            mode.solve_in_place(&mut col);
            w.column_mut(j).copy_from_slice(&col);
        }
        let out = w * self.q.transpose();
        let mut v = Vec::with_capacity(f.len());
        for r in 0..self.n_time {
            v.extend(out.row(r).iter());
        }
        Ok(v)
    }
}

/// Gram_X solved by CG with `M_t⁻¹ ⊗ A_x⁻¹` as preconditioner.
struct CgGramXInverse {
    gram: GramOperator,
    time_mass: TridiagonalLdl,
    space: Arc<SparseCholesky>,
    n_time: usize,
    rel_tol: f64,
    max_iter: usize,
}

impl CgGramXInverse {
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let ns = self.space.dim();
        let mut v: Vec<f64> = Vec::with_capacity(r.len());
        for row in r.chunks(ns) {
            v.extend(self.space.solve(row));
        }
        let mut col = vec![0.0; self.n_time];
        for j in 0..ns {
            for t in 0..self.n_time {
                col[t] = v[t * ns + j];
            }
            self.time_mass.solve_in_place(&mut col);
            for t in 0..self.n_time {
                v[t * ns + j] = col[t];
            }
        }
        v
    }
}

impl Preconditioner for CgGramXInverse {
    fn dim(&self) -> usize {
        self.gram.n_rows()
    }

    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let f_norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tol = self.rel_tol * f_norm;
        let mut last = 0.0;
        let out = pcg(
            |x| Ok(self.gram.apply(x)),
            |r| Ok(self.precondition(r)),
            f,
            None,
            |_, _, r_norm| {
                last = r_norm;
                r_norm <= tol
            },
            self.max_iter,
        )?;
        if !out.converged {
            return Err(Error::NotConverged {
                iterations: out.iterations,
                residual: last / f_norm,
            });
        }
        Ok(out.x)
    }
}

/// `G_Y = I ⊗ A_test⁻¹` (the temporal test basis is orthonormal).
pub fn make_g_y(disc: &Discretization) -> RieszPreconditioner {
    RieszPreconditioner::new(
        NormKind::Y,
        Realization::Exact,
        Box::new(BlockSolve {
            n_time: disc.n_time_test(),
            factor: Arc::clone(disc.test_stiffness_factor()),
        }),
    )
}

/// Inverse of Gram_X in the requested realization.
pub fn make_g_x(disc: &Discretization, realization: Realization) -> Result<RieszPreconditioner> {
    let map: Box<dyn Preconditioner> = match realization {
        Realization::Exact => Box::new(SpectralGramXInverse::new(disc)?),
        Realization::InnerCg { rel_tol, max_iter } => {
            let (d, o) = tridiagonal_parts(disc.time_mass())?;
            Box::new(CgGramXInverse {
                gram: disc.gram_x(),
                time_mass: TridiagonalLdl::factor(&d, &o)?,
                space: Arc::clone(disc.space_stiffness_factor()),
                n_time: disc.n_time_trial(),
                rel_tol,
                max_iter,
            })
        }
    };
    Ok(RieszPreconditioner::new(NormKind::X, realization, map))
}
