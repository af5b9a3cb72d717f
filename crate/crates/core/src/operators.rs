//! Matrix-free space-time operators built from one-dimensional factors.
//!
//! Space-time coefficient vectors are stored time-major: entry
//! `time_index * n_space + space_index`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assembly::{
    space_pair, time_derivative_mixed, time_mass_mixed, time_mass_trial, time_stiffness_trial,
    trace_vector, SpaceBasisSpec, SpaceDofs, TimeBasisSpec,
};
use crate::error::{Error, Result};
use crate::mesh::{MeshPair, TimeMesh};
use crate::sparse::{SparseCholesky, SparseMatrix};

/// A linear map between coefficient spaces.
pub trait LinearOperator {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// Dense matrix, column by column. Only meant for small problems.
    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows(), self.n_cols());
        let mut e = vec![0.0; self.n_cols()];
        for j in 0..self.n_cols() {
            e[j] = 1.0;
            let col = self.apply(&e);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

/// One term `T ⊗ S` of a Kronecker sum.
#[derive(Debug, Clone)]
pub struct KroneckerTerm {
    pub time: SparseMatrix,
    pub space: SparseMatrix,
}

/// `Σ_i T_i ⊗ S_i`, applied without forming the products.
#[derive(Debug, Clone)]
pub struct KroneckerOperator {
    terms: Vec<KroneckerTerm>,
    time_dims: (usize, usize),
    space_dims: (usize, usize),
}

impl KroneckerOperator {
    pub fn new(terms: Vec<(SparseMatrix, SparseMatrix)>) -> Result<Self> {
        let Some((t0, s0)) = terms.first() else {
            return Err(Error::DimensionMismatch("Kronecker sum without terms".into()));
        };
        let time_dims = (t0.n_rows(), t0.n_cols());
        let space_dims = (s0.n_rows(), s0.n_cols());
        for (i, (t, s)) in terms.iter().enumerate() {
            if (t.n_rows(), t.n_cols()) != time_dims || (s.n_rows(), s.n_cols()) != space_dims {
                return Err(Error::DimensionMismatch(format!(
                    "term {i}: {}x{} ⊗ {}x{} does not match {}x{} ⊗ {}x{}",
                    t.n_rows(),
                    t.n_cols(),
                    s.n_rows(),
                    s.n_cols(),
                    time_dims.0,
                    time_dims.1,
                    space_dims.0,
                    space_dims.1
                )));
            }
        }
        let terms = terms
            .into_iter()
            .map(|(time, space)| KroneckerTerm { time, space })
            .collect();
        Ok(Self {
            terms,
            time_dims,
            space_dims,
        })
    }

    pub fn terms(&self) -> &[KroneckerTerm] {
        &self.terms
    }

    /// `(rows, cols)` of the time factors.
    pub fn time_dims(&self) -> (usize, usize) {
        self.time_dims
    }

    /// `(rows, cols)` of the space factors.
    pub fn space_dims(&self) -> (usize, usize) {
        self.space_dims
    }

    /// `y += Σ (T_i ⊗ S_i) x`.
    pub fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        let (sr, sc) = self.space_dims;
        assert_eq!(x.len(), self.time_dims.1 * sc);
        assert_eq!(y.len(), self.time_dims.0 * sr);
        for term in &self.terms {
            kron_term_add(&term.time, sr, |c, out| {
                term.space.mul_add(1.0, &x[c * sc..(c + 1) * sc], out)
            }, self.time_dims.1, y);
        }
    }

    /// `y += Σ (T_i ⊗ S_i)ᵀ x`.
    pub fn apply_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        let (sr, sc) = self.space_dims;
        assert_eq!(x.len(), self.time_dims.0 * sr);
        assert_eq!(y.len(), self.time_dims.1 * sc);
        for term in &self.terms {
            let tt = term.time.transpose();
            kron_term_add(&tt, sc, |r, out| {
                term.space.transpose_mul_add(1.0, &x[r * sr..(r + 1) * sr], out)
            }, self.time_dims.0, y);
        }
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols()];
        self.apply_transpose_add(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| KroneckerTerm {
                    time: t.time.transpose(),
                    space: t.space.transpose(),
                })
                .collect(),
            time_dims: (self.time_dims.1, self.time_dims.0),
            space_dims: (self.space_dims.1, self.space_dims.0),
        }
    }
}

/// `y[r] += Σ_c T[r][c] · w_c` where `w_c` is produced by `space_apply(c, w_c)`
/// of length `block`; only columns that `T` touches are evaluated.
fn kron_term_add(
    t: &SparseMatrix,
    block: usize,
    space_apply: impl Fn(usize, &mut [f64]),
    n_time_cols: usize,
    y: &mut [f64],
) {
    let mut used = vec![false; n_time_cols];
    for (_, c, _) in t.triplets() {
        used[c] = true;
    }
    let mut w = vec![0.0; n_time_cols * block];
    for c in (0..n_time_cols).filter(|&c| used[c]) {
        space_apply(c, &mut w[c * block..(c + 1) * block]);
    }
    for (r, c, v) in t.triplets() {
        let src = &w[c * block..(c + 1) * block];
        for (dst, s) in y[r * block..(r + 1) * block].iter_mut().zip(src) {
            *dst += v * s;
        }
    }
}

impl LinearOperator for KroneckerOperator {
    fn n_rows(&self) -> usize {
        self.time_dims.0 * self.space_dims.0
    }

    fn n_cols(&self) -> usize {
        self.time_dims.1 * self.space_dims.1
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows()];
        self.apply_add(x, &mut y);
        y
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows(), self.n_cols());
        for term in &self.terms {
            m += term.time.to_dense().kronecker(&term.space.to_dense());
        }
        m
    }
}

/// `T ⊗ (L K⁻¹ R)` with `K` held as a sparse factorization.
#[derive(Debug, Clone)]
pub struct InverseTerm {
    pub time: SparseMatrix,
    pub left: SparseMatrix,
    pub factor: Arc<SparseCholesky>,
    pub right: SparseMatrix,
}

impl InverseTerm {
    fn space_apply(&self, x: &[f64], out: &mut [f64]) {
        let rx = self.right.mul_vec(x);
        let k = self.factor.solve(&rx);
        self.left.mul_add(1.0, &k, out);
    }

    fn space_dense(&self) -> DMatrix<f64> {
        let r = self.right.to_dense();
        self.left.to_dense() * self.factor.solve_many(&r)
    }
}

/// Symmetric Gram operator: a Kronecker sum plus terms with an inner solve.
#[derive(Debug, Clone)]
pub struct GramOperator {
    direct: KroneckerOperator,
    inverse_terms: Vec<InverseTerm>,
}

impl GramOperator {
    pub fn new(direct: KroneckerOperator, inverse_terms: Vec<InverseTerm>) -> Result<Self> {
        let (tr, tc) = direct.time_dims();
        let (sr, sc) = direct.space_dims();
        for term in &inverse_terms {
            if term.time.n_rows() != tr
                || term.time.n_cols() != tc
                || term.left.n_rows() != sr
                || term.right.n_cols() != sc
                || term.left.n_cols() != term.factor.dim()
                || term.right.n_rows() != term.factor.dim()
            {
                return Err(Error::DimensionMismatch("inverse term of Gram operator".into()));
            }
        }
        Ok(Self {
            direct,
            inverse_terms,
        })
    }

    pub fn direct_part(&self) -> &KroneckerOperator {
        &self.direct
    }
}

impl LinearOperator for GramOperator {
    fn n_rows(&self) -> usize {
        self.direct.n_rows()
    }

    fn n_cols(&self) -> usize {
        self.direct.n_cols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.direct.apply(x);
        let (sr, sc) = self.direct.space_dims();
        let n_tc = self.direct.time_dims().1;
        for term in &self.inverse_terms {
            kron_term_add(&term.time, sr, |c, out| {
                term.space_apply(&x[c * sc..(c + 1) * sc], out)
            }, n_tc, &mut y);
        }
        y
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = self.direct.to_dense();
        for term in &self.inverse_terms {
            m += term.time.to_dense().kronecker(&term.space_dense());
        }
        m
    }
}

/// All one-dimensional factors of the discretization on a mesh pair, for
/// spatial test degree `1 + l`.
#[derive(Debug)]
pub struct Discretization {
    meshes: MeshPair,
    l: usize,
    time_test: TimeBasisSpec,
    trial_dofs: SpaceDofs,
    test_dofs: SpaceDofs,
    m_t: SparseMatrix,
    t_t: SparseMatrix,
    n_t: SparseMatrix,
    d_t: SparseMatrix,
    m_x: SparseMatrix,
    a_x: SparseMatrix,
    m_mix: SparseMatrix,
    a_mix: SparseMatrix,
    a_test: SparseMatrix,
    a_x_factor: Arc<SparseCholesky>,
    a_test_factor: Arc<SparseCholesky>,
}

impl Discretization {
    pub fn new(meshes: MeshPair, l: usize) -> Result<Self> {
        if l > 1 {
            return Err(Error::Unsupported(format!("test degree offset l = {l}")));
        }
        let time_test = TimeBasisSpec::legendre(1);
        let trial_dofs = SpaceDofs::new(&meshes.space, SpaceBasisSpec::h01(1));
        let test_dofs = SpaceDofs::new(&meshes.space, SpaceBasisSpec::h01(1 + l));
        if trial_dofs.n_dofs() == 0 {
            return Err(Error::InvalidArgument("spatial trial space is empty".into()));
        }
        let (m_x, a_x) = space_pair(&meshes.space, &trial_dofs, &trial_dofs);
        let (m_mix, a_mix) = space_pair(&meshes.space, &trial_dofs, &test_dofs);
        let a_test = space_pair(&meshes.space, &test_dofs, &test_dofs).1;
        let a_x_factor = Arc::new(SparseCholesky::factor(&a_x)?);
        let a_test_factor = Arc::new(SparseCholesky::factor(&a_test)?);
        Ok(Self {
            m_t: time_mass_trial(&meshes.time),
            t_t: time_stiffness_trial(&meshes.time),
            n_t: time_mass_mixed(&meshes.time, time_test)?,
            d_t: time_derivative_mixed(&meshes.time, time_test)?,
            meshes,
            l,
            time_test,
            trial_dofs,
            test_dofs,
            m_x,
            a_x,
            m_mix,
            a_mix,
            a_test,
            a_x_factor,
            a_test_factor,
        })
    }

    pub fn meshes(&self) -> &MeshPair {
        &self.meshes
    }

    pub fn time_mesh(&self) -> &TimeMesh {
        &self.meshes.time
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn time_test(&self) -> TimeBasisSpec {
        self.time_test
    }

    pub fn trial_dofs(&self) -> &SpaceDofs {
        &self.trial_dofs
    }

    pub fn test_dofs(&self) -> &SpaceDofs {
        &self.test_dofs
    }

    pub fn n_time_trial(&self) -> usize {
        self.meshes.time.n_nodes()
    }

    pub fn n_time_test(&self) -> usize {
        self.time_test.n_dofs(&self.meshes.time)
    }

    pub fn n_space_trial(&self) -> usize {
        self.trial_dofs.n_dofs()
    }

    pub fn n_space_test(&self) -> usize {
        self.test_dofs.n_dofs()
    }

    /// Total number of space-time trial unknowns.
    pub fn n_trial(&self) -> usize {
        self.n_time_trial() * self.n_space_trial()
    }

    pub fn n_test(&self) -> usize {
        self.n_time_test() * self.n_space_test()
    }

    pub fn time_mass(&self) -> &SparseMatrix {
        &self.m_t
    }

    pub fn time_stiffness(&self) -> &SparseMatrix {
        &self.t_t
    }

    pub fn space_mass(&self) -> &SparseMatrix {
        &self.m_x
    }

    pub fn space_stiffness(&self) -> &SparseMatrix {
        &self.a_x
    }

    pub fn test_stiffness(&self) -> &SparseMatrix {
        &self.a_test
    }

    pub fn space_stiffness_factor(&self) -> &Arc<SparseCholesky> {
        &self.a_x_factor
    }

    pub fn test_stiffness_factor(&self) -> &Arc<SparseCholesky> {
        &self.a_test_factor
    }

    /// `B = D_t ⊗ M_mix + N_t ⊗ A_mix`.
    pub fn b(&self) -> KroneckerOperator {
        KroneckerOperator::new(vec![
            (self.d_t.clone(), self.m_mix.clone()),
            (self.n_t.clone(), self.a_mix.clone()),
        ])
        .expect("consistent factors")
    }

    /// `I ⊗ A_test` (the temporal test basis is orthonormal).
    pub fn gram_y(&self) -> GramOperator {
        let direct = KroneckerOperator::new(vec![(
            SparseMatrix::identity(self.n_time_test()),
            self.a_test.clone(),
        )])
        .expect("consistent factors");
        GramOperator::new(direct, Vec::new()).expect("no inverse terms")
    }

    /// `M_t ⊗ A_x + T_t ⊗ (M_x A_x⁻¹ M_x)`.
    pub fn gram_x(&self) -> GramOperator {
        let direct = KroneckerOperator::new(vec![(self.m_t.clone(), self.a_x.clone())])
            .expect("consistent factors");
        let inv = InverseTerm {
            time: self.t_t.clone(),
            left: self.m_x.clone(),
            factor: Arc::clone(&self.a_x_factor),
            right: self.m_x.clone(),
        };
        GramOperator::new(direct, vec![inv]).expect("consistent factors")
    }

    /// `γ_t = e_tᵀ ⊗ I`, mapping space-time trial coefficients to spatial ones.
    pub fn trace(&self, t: f64) -> Result<KroneckerOperator> {
        trace_on(&self.meshes.time, self.n_space_trial(), t)
    }
}

fn trace_on(time: &TimeMesh, n_space: usize, t: f64) -> Result<KroneckerOperator> {
    let row = trace_vector(time, t)?;
    let trips = row
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (0, j, *v))
        .collect();
    KroneckerOperator::new(vec![(
        SparseMatrix::from_triplets(1, time.n_nodes(), trips),
        SparseMatrix::identity(n_space),
    )])
}

pub fn assemble_b(meshes: &MeshPair, l: usize) -> Result<KroneckerOperator> {
    Ok(Discretization::new(meshes.clone(), l)?.b())
}

pub fn gram_y(meshes: &MeshPair, l: usize) -> Result<GramOperator> {
    Ok(Discretization::new(meshes.clone(), l)?.gram_y())
}

pub fn gram_x(meshes: &MeshPair) -> Result<GramOperator> {
    Ok(Discretization::new(meshes.clone(), 0)?.gram_x())
}

pub fn trace_operator(meshes: &MeshPair, t: f64) -> Result<KroneckerOperator> {
    let n_space = SpaceDofs::new(&meshes.space, SpaceBasisSpec::h01(1)).n_dofs();
    trace_on(&meshes.time, n_space, t)
}

/// Dense `Bᵀ (I ⊗ A_test⁻¹) B` on the trial space, formed factor by factor:
/// `Σ_{a,b} (T_aᵀ T_b) ⊗ (S_aᵀ A_test⁻¹ S_b)`.
pub fn normal_matrix_dense(disc: &Discretization) -> DMatrix<f64> {
    let b = disc.b();
    let factor = disc.test_stiffness_factor();
    let n = disc.n_trial();
    let mut out = DMatrix::zeros(n, n);
    for ta in b.terms() {
        let ta_t = ta.time.to_dense().transpose();
        let sa_t = ta.space.to_dense().transpose();
        for tb in b.terms() {
            let time = &ta_t * tb.time.to_dense();
            let space = &sa_t * factor.solve_many(&tb.space.to_dense());
            out += time.kronecker(&space);
        }
    }
    out
}

/// Square root of the smallest generalized eigenvalue of the pencil formed
/// by the normal matrices for test degrees `1 + l_small` and `1 + l_big`.
pub fn infsup_constant(meshes: &MeshPair, l_small: usize, l_big: usize) -> Result<f64> {
    if l_small > l_big {
        return Err(Error::InvalidArgument(format!(
            "l_small = {l_small} exceeds l_big = {l_big}"
        )));
    }
    let small = normal_matrix_dense(&Discretization::new(meshes.clone(), l_small)?);
    let big = if l_big == l_small {
        small.clone()
    } else {
        normal_matrix_dense(&Discretization::new(meshes.clone(), l_big)?)
    };
    let lambda = smallest_generalized_eigenvalue(&small, &big)?;
    Ok(lambda.max(0.0).sqrt())
}

/// Smallest λ with `a x = λ b x`, `a` symmetric and `b` SPD.
pub fn smallest_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let sym = |m: &DMatrix<f64>| (m + m.transpose()) * 0.5;
    let chol = sym(b).cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite("right-hand matrix of the pencil is singular".into())
    })?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&sym(a))
        .ok_or_else(|| Error::NotPositiveDefinite("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite("triangular solve failed".into()))?;
    Ok(SymmetricEigen::new(sym(&c)).eigenvalues.min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{eval_local, test_function, CellGeometry};
    use crate::mesh::{refine_uniform, uniform_time_mesh, unit_interval_mesh, unit_square_initial};
    use crate::quadrature::{gauss_legendre, simplex_rule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn square_pair(time_k: u32, rounds: usize) -> MeshPair {
        MeshPair::new(
            uniform_time_mesh(0.0, 1.0, time_k).unwrap(),
            refine_uniform(&unit_square_initial(), rounds),
        )
    }

    fn random_sparse(rng: &mut ChaCha8Rng, r: usize, c: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..r {
            for j in 0..c {
                if rng.random_bool(0.4) {
                    t.push((i, j, rng.random_range(-2.0..2.0)));
                }
            }
        }
        SparseMatrix::from_triplets(r, c, t)
    }

    #[test]
    fn kronecker_apply_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let terms = (0..3)
            .map(|_| (random_sparse(&mut rng, 4, 3), random_sparse(&mut rng, 5, 6)))
            .collect();
        let k = KroneckerOperator::new(terms).unwrap();
        let dense = k.to_dense();
        let x = random_vec(&mut rng, 18);
        let y = k.apply(&x);
        let yd = &dense * nalgebra::DVector::from_vec(x.clone());
        for (a, b) in y.iter().zip(yd.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
        let z = random_vec(&mut rng, 20);
        let yt = k.apply_transpose(&z);
        let ytd = dense.transpose() * nalgebra::DVector::from_vec(z.clone());
        for (a, b) in yt.iter().zip(ytd.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
        let kt = k.transpose();
        assert!((kt.to_dense() - dense.transpose()).amax() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = KroneckerOperator::new(vec![
            (SparseMatrix::identity(2), SparseMatrix::identity(3)),
            (SparseMatrix::identity(2), SparseMatrix::identity(4)),
        ]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        assert!(KroneckerOperator::new(Vec::new()).is_err());
    }

    /// Direct space-time quadrature of `∫∫ ∂_t u w + ∇u·∇w` over basis pairs.
    fn dense_space_time_b(pair: &MeshPair, l: usize) -> DMatrix<f64> {
        let trial = SpaceDofs::new(&pair.space, SpaceBasisSpec::h01(1));
        let test = SpaceDofs::new(&pair.space, SpaceBasisSpec::h01(1 + l));
        let nt = pair.time.n_nodes();
        let ne = pair.time.n_elements();
        let (ns_tr, ns_te) = (trial.n_dofs(), test.n_dofs());
        let mut m = DMatrix::zeros(2 * ne * ns_te, nt * ns_tr);
        let (gx, gw) = gauss_legendre(3);
        let (pts, wts) = simplex_rule(pair.space.dim(), 2 + l);
        for e in 0..ne {
            let (a, b) = pair.time.element(e);
            let h = b - a;
            for (x, wt) in gx.iter().zip(&gw) {
                let t = a + h * x;
                let hats = [(e, 1.0 - x, -1.0 / h), (e + 1, *x, 1.0 / h)];
                for c in 0..pair.space.n_cells() {
                    let geom = CellGeometry::new(&pair.space, c);
                    for (xi, ws) in pts.iter().zip(&wts) {
                        let (tv, tg) = eval_local(&geom, 1, xi);
                        let (sv, sg) = eval_local(&geom, 1 + l, xi);
                        let w = wt * h * ws * geom.det();
                        for q in 0..2 {
                            let psi = test_function(&pair.time, 1, true, e, q, t);
                            for (i, ti) in test.cell_dofs(c).iter().enumerate() {
                                let Some(ti) = ti else { continue };
                                for (j, tj) in trial.cell_dofs(c).iter().enumerate() {
                                    let Some(tj) = tj else { continue };
                                    let grad: f64 = tg[j].iter().zip(&sg[i]).map(|(p, q)| p * q).sum();
                                    for (node, phi, dphi) in hats {
                                        let row = (2 * e + q) * ns_te + ti;
                                        let col = node * ns_tr + tj;
                                        m[(row, col)] +=
                                            w * psi * (dphi * tv[j] * sv[i] + phi * grad);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        m
    }

    #[test]
    fn b_matches_space_time_assembly() {
        for (pair, l) in [(square_pair(0, 1), 0), (square_pair(0, 1), 1), (square_pair(1, 2), 1)] {
            let disc = Discretization::new(pair.clone(), l).unwrap();
            let b = disc.b();
            assert_eq!(b.n_rows(), pair.time.n_elements() * 2 * disc.n_space_test());
            assert_eq!(b.n_cols(), pair.time.n_nodes() * disc.n_space_trial());
            let oracle = dense_space_time_b(&pair, l);
            let scale = oracle.amax();
            assert!((b.to_dense() - &oracle).amax() <= 1e-13 * scale);
            // matrix-free apply agrees with the dense matrix too
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let x = random_vec(&mut rng, b.n_cols());
            let y = b.apply(&x);
            let yd = &oracle * nalgebra::DVector::from_vec(x);
            for (p, q) in y.iter().zip(yd.iter()) {
                assert!((p - q).abs() <= 1e-13 * scale * 10.0);
            }
        }
    }

    #[test]
    fn b_on_constant_in_time_function() {
        let disc = Discretization::new(square_pair(2, 2), 1).unwrap();
        let ns = disc.n_space_trial();
        let eta: Vec<f64> = (0..ns).map(|i| 1.0 + i as f64).collect();
        let u: Vec<f64> = (0..disc.n_time_trial()).flat_map(|_| eta.clone()).collect();
        let full = disc.b().apply(&u);
        let reduced = KroneckerOperator::new(vec![(disc.n_t.clone(), disc.a_mix.clone())])
            .unwrap()
            .apply(&u);
        for (a, b) in full.iter().zip(&reduced) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_y_single_dof_and_quadrature() {
        // one interior vertex, P1 test space: Gram_Y = I · A[0][0]
        let pair = MeshPair::new(uniform_time_mesh(0.0, 1.0, 1).unwrap(), unit_square_initial());
        let disc = Discretization::new(pair, 0).unwrap();
        let g = disc.gram_y().to_dense();
        let a00 = disc.test_stiffness().get(0, 0);
        assert!((g - DMatrix::identity(4, 4) * a00).amax() < 1e-14);

        let pair = square_pair(2, 2);
        let disc = Discretization::new(pair.clone(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_vec(&mut rng, disc.n_test());
        let via_gram = dot(&v, &disc.gram_y().apply(&v));
        // ∫_J ‖∇v‖² by tensor quadrature
        let ns = disc.n_space_test();
        let (gx, gw) = gauss_legendre(3);
        let (pts, wts) = simplex_rule(2, 4);
        let mut quad = 0.0;
        for e in 0..pair.time.n_elements() {
            let (a, b) = pair.time.element(e);
            for (x, wt) in gx.iter().zip(&gw) {
                let t = a + (b - a) * x;
                let slab: Vec<f64> = (0..ns)
                    .map(|j| {
                        (0..2)
                            .map(|q| test_function(&pair.time, 1, true, e, q, t) * v[(2 * e + q) * ns + j])
                            .sum()
                    })
                    .collect();
                for c in 0..pair.space.n_cells() {
                    let geom = CellGeometry::new(&pair.space, c);
                    for (xi, ws) in pts.iter().zip(&wts) {
                        let (_, grad) = disc.test_dofs().eval(&geom, c, &slab, xi);
                        quad += wt * (b - a) * ws * geom.det() * dot(&grad, &grad);
                    }
                }
            }
        }
        assert!((via_gram - quad).abs() <= 1e-12 * quad);
    }

    #[test]
    fn gram_operators_symmetric_positive() {
        let disc = Discretization::new(square_pair(2, 2), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in [disc.gram_x(), disc.gram_y()] {
            for _ in 0..100 {
                let u = random_vec(&mut rng, g.n_cols());
                let v = random_vec(&mut rng, g.n_cols());
                let nu = dot(&u, &u).sqrt();
                let nv = dot(&v, &v).sqrt();
                let gu = g.apply(&u);
                assert!((dot(&gu, &v) - dot(&u, &g.apply(&v))).abs() <= 1e-12 * nu * nv * 10.0);
                assert!(dot(&gu, &u) > 0.0);
            }
        }
    }

    /// `M_t ⊗ A + T_t ⊗ (M Q Λ⁻¹ Qᵀ M)` from the generalized eigenpairs `A Q = M Q Λ`.
    fn gram_x_by_eigen(disc: &Discretization) -> DMatrix<f64> {
        let m = disc.space_mass().to_dense();
        let a = disc.space_stiffness().to_dense();
        let l = m.clone().cholesky().unwrap().l();
        let linv = l.clone().try_inverse().unwrap();
        let eig = SymmetricEigen::new(&linv * &a * linv.transpose());
        let q = linv.transpose() * &eig.eigenvectors;
        let lam_inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x));
        let inner = &m * &q * lam_inv * q.transpose() * &m;
        disc.time_mass().to_dense().kronecker(&a) + disc.time_stiffness().to_dense().kronecker(&inner)
    }

    #[test]
    fn gram_x_matches_eigen_oracle() {
        for pair in [square_pair(0, 1), square_pair(1, 2)] {
            let disc = Discretization::new(pair, 0).unwrap();
            let g = disc.gram_x().to_dense();
            let oracle = gram_x_by_eigen(&disc);
            assert!((&g - &oracle).amax() <= 1e-10 * oracle.amax());
            // matrix-free apply agrees
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let x = random_vec(&mut rng, disc.n_trial());
            let y = disc.gram_x().apply(&x);
            let yd = &oracle * nalgebra::DVector::from_vec(x);
            for (a, b) in y.iter().zip(yd.iter()) {
                assert!((a - b).abs() <= 1e-10 * oracle.amax());
            }
        }
    }

    #[test]
    fn gram_x_on_separable_eigenfunction() {
        // on the interval the discrete eigenvectors of (A, M) are sines
        let m = 8;
        let pair = MeshPair::new(uniform_time_mesh(0.0, 2.0, 2).unwrap(), unit_interval_mesh(m).unwrap());
        let disc = Discretization::new(pair, 0).unwrap();
        let h = 1.0 / m as f64;
        let eta: Vec<f64> = (1..m).map(|i| (std::f64::consts::PI * i as f64 * h).sin()).collect();
        let a_eta = disc.space_stiffness().mul_vec(&eta);
        let m_eta = disc.space_mass().mul_vec(&eta);
        let mu = dot(&eta, &a_eta) / dot(&eta, &m_eta);
        let mass_norm = dot(&eta, &m_eta);
        let phi = [0.3, -1.0, 2.0, 0.5, 1.5];
        let u: Vec<f64> = phi.iter().flat_map(|p| eta.iter().map(move |e| p * e)).collect();
        let phi_mt = dot(&phi, &disc.time_mass().mul_vec(&phi));
        let phi_tt = dot(&phi, &disc.time_stiffness().mul_vec(&phi));
        let expected = mass_norm * (mu * phi_mt + phi_tt / mu);
        let got = dot(&u, &disc.gram_x().apply(&u));
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn traces() {
        let pair = square_pair(2, 2);
        let disc = Discretization::new(pair.clone(), 0).unwrap();
        let ns = disc.n_space_trial();
        let eta: Vec<f64> = (0..ns).map(|i| (i as f64).sin()).collect();
        let mut z = vec![0.0; disc.n_trial()];
        z[4 * ns..].copy_from_slice(&eta);
        assert_eq!(disc.trace(1.0).unwrap().apply(&z), eta);
        assert!(disc.trace(0.0).unwrap().apply(&z).iter().all(|v| v.abs() <= 1e-15));
        assert!(matches!(disc.trace(1.5), Err(Error::OutOfInterval { .. })));

        let single = MeshPair::new(uniform_time_mesh(0.0, 1.0, 0).unwrap(), pair.space.clone());
        let g = trace_operator(&single, 0.5).unwrap();
        let w: Vec<f64> = (0..2 * ns).map(|i| i as f64).collect();
        let mid = g.apply(&w);
        for j in 0..ns {
            assert!((mid[j] - 0.5 * (w[j] + w[ns + j])).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_matrix_matches_dense_product() {
        let disc = Discretization::new(square_pair(1, 2), 1).unwrap();
        let b = disc.b().to_dense();
        let g_inv = disc.gram_y().to_dense().try_inverse().unwrap();
        let oracle = b.transpose() * g_inv * &b;
        let p = normal_matrix_dense(&disc);
        assert!((&p - &oracle).amax() <= 1e-10 * oracle.amax());
        // discrete injectivity
        assert!(smallest_generalized_eigenvalue(&p, &DMatrix::identity(p.nrows(), p.nrows())).unwrap() > 0.0);
    }

    #[test]
    fn infsup_constant_properties() {
        let pair = square_pair(1, 2);
        let same = infsup_constant(&pair, 1, 1).unwrap();
        assert!((same - 1.0).abs() < 1e-10);
        let gamma = infsup_constant(&pair, 0, 1).unwrap();
        assert!(gamma > 0.0 && gamma <= 1.0 + 1e-10, "γ = {gamma}");
        assert!(infsup_constant(&pair, 1, 0).is_err());
    }
}
