//! One-dimensional temporal matrices.
//!
//! Trial functions are the continuous piecewise-linear hats on the time
//! mesh; test functions are discontinuous piecewise polynomials, by default
//! an element-wise orthonormal Legendre basis so that the temporal test Gram
//! matrix is the identity. Test dof `(e, q)` has index `e * (p + 1) + q`.

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;
use crate::quadrature::{gauss_legendre, legendre_with_derivative};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeBasisSpec {
    ContinuousLinear,
    Discontinuous { degree: usize, orthonormal: bool },
}

impl TimeBasisSpec {
    /// Discontinuous orthonormal Legendre basis of the given degree.
    pub fn legendre(degree: usize) -> Self {
        TimeBasisSpec::Discontinuous {
            degree,
            orthonormal: true,
        }
    }

    pub fn n_dofs(&self, mesh: &TimeMesh) -> usize {
        match *self {
            TimeBasisSpec::ContinuousLinear => mesh.n_nodes(),
            TimeBasisSpec::Discontinuous { degree, .. } => mesh.n_elements() * (degree + 1),
        }
    }

    fn discontinuous(&self) -> Result<(usize, bool)> {
        match *self {
            TimeBasisSpec::Discontinuous { degree, orthonormal } => Ok((degree, orthonormal)),
            TimeBasisSpec::ContinuousLinear => Err(Error::InvalidArgument(
                "test basis in time must be discontinuous".into(),
            )),
        }
    }
}

/// Value of discontinuous test function `q` of element `e` at `t`
/// (zero outside the element).
pub fn test_function(mesh: &TimeMesh, degree: usize, orthonormal: bool, e: usize, q: usize, t: f64) -> f64 {
    assert!(q <= degree);
    let (a, b) = mesh.element(e);
    if t < a || t > b {
        return 0.0;
    }
    let h = b - a;
    let (p, _) = legendre_with_derivative(q, 2.0 * (t - a) / h - 1.0);
    if orthonormal {
        ((2 * q + 1) as f64 / h).sqrt() * p
    } else {
        p
    }
}

/// `M_t[i][j] = ∫_J φ_i φ_j` for the hat functions.
pub fn time_mass_trial(mesh: &TimeMesh) -> SparseMatrix {
    let n = mesh.n_nodes();
    let mut t = Vec::with_capacity(4 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        t.push((e, e, h / 3.0));
        t.push((e + 1, e + 1, h / 3.0));
        t.push((e, e + 1, h / 6.0));
        t.push((e + 1, e, h / 6.0));
    }
    SparseMatrix::from_triplets(n, n, t)
}

/// `T_t[i][j] = ∫_J φ_i' φ_j'`.
pub fn time_stiffness_trial(mesh: &TimeMesh) -> SparseMatrix {
    let n = mesh.n_nodes();
    let mut t = Vec::with_capacity(4 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let s = 1.0 / (b - a);
        t.push((e, e, s));
        t.push((e + 1, e + 1, s));
        t.push((e, e + 1, -s));
        t.push((e + 1, e, -s));
    }
    SparseMatrix::from_triplets(n, n, t)
}

/// Mixed matrix `[i][j] = ∫_J θ_j ψ_i` where `θ_j` is either the hat `φ_j`
/// (`derivative = false`) or its derivative.
fn time_mixed(mesh: &TimeMesh, test: TimeBasisSpec, derivative: bool) -> Result<SparseMatrix> {
    let (p, ortho) = test.discontinuous()?;
    let (gx, gw) = gauss_legendre(p + 2);
    let mut t = Vec::with_capacity(2 * (p + 1) * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        for q in 0..=p {
            let mut left = 0.0;
            let mut right = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                let tt = a + h * x;
                let psi = test_function(mesh, p, ortho, e, q, tt);
                let (phi_l, phi_r) = if derivative { (-1.0 / h, 1.0 / h) } else { (1.0 - x, *x) };
                left += w * h * phi_l * psi;
                right += w * h * phi_r * psi;
            }
            let row = e * (p + 1) + q;
            t.push((row, e, left));
            t.push((row, e + 1, right));
        }
    }
    Ok(SparseMatrix::from_triplets(test.n_dofs(mesh), mesh.n_nodes(), t))
}

/// `N_t[i][j] = ∫_J φ_j ψ_i`.
pub fn time_mass_mixed(mesh: &TimeMesh, test: TimeBasisSpec) -> Result<SparseMatrix> {
    time_mixed(mesh, test, false)
}

/// `D_t[i][j] = ∫_J φ_j' ψ_i`.
pub fn time_derivative_mixed(mesh: &TimeMesh, test: TimeBasisSpec) -> Result<SparseMatrix> {
    time_mixed(mesh, test, true)
}

/// Gram matrix `∫_J ψ_i ψ_j` of a discontinuous test basis (identity when orthonormal).
pub fn time_test_gram(mesh: &TimeMesh, test: TimeBasisSpec) -> Result<SparseMatrix> {
    let (p, ortho) = test.discontinuous()?;
    let (gx, gw) = gauss_legendre(p + 1);
    let mut t = Vec::new();
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        for q in 0..=p {
            for r in 0..=p {
                let v: f64 = gx
                    .iter()
                    .zip(&gw)
                    .map(|(x, w)| {
                        let tt = a + h * x;
                        w * h * test_function(mesh, p, ortho, e, q, tt) * test_function(mesh, p, ortho, e, r, tt)
                    })
                    .sum();
                t.push((e * (p + 1) + q, e * (p + 1) + r, v));
            }
        }
    }
    let n = test.n_dofs(mesh);
    Ok(SparseMatrix::from_triplets(n, n, t))
}

/// Values of all hat functions at `t`.
pub fn trace_vector(mesh: &TimeMesh, t: f64) -> Result<Vec<f64>> {
    let e = mesh.locate(t)?;
    let (a, b) = mesh.element(e);
    let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
    let mut v = vec![0.0; mesh.n_nodes()];
    v[e] = 1.0 - s;
    v[e + 1] = s;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::uniform_time_mesh;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14
    }

    #[test]
    fn trial_mass() {
        let m = time_mass_trial(&uniform_time_mesh(0.0, 1.0, 0).unwrap());
        assert!(close(m.get(0, 0), 1.0 / 3.0) && close(m.get(0, 1), 1.0 / 6.0));
        assert!(close(m.get(1, 0), 1.0 / 6.0) && close(m.get(1, 1), 1.0 / 3.0));

        let m = time_mass_trial(&uniform_time_mesh(0.0, 1.0, 1).unwrap());
        assert!(close(m.get(0, 0), 1.0 / 6.0));
        assert!(close(m.get(1, 1), 1.0 / 3.0));
        assert!(close(m.get(2, 2), 1.0 / 6.0));
        assert!(close(m.sum(), 1.0));

        let mesh = TimeMesh::from_breakpoints(vec![0.3, 0.4, 0.9, 1.7]).unwrap();
        let m = time_mass_trial(&mesh);
        assert!((m.sum() - 1.4).abs() < 1e-14);
        assert!(m.is_symmetric(1e-14));
    }

    #[test]
    fn trial_stiffness() {
        let s = time_stiffness_trial(&uniform_time_mesh(0.0, 1.0, 0).unwrap());
        assert_eq!(s.to_dense(), nalgebra::dmatrix![1.0, -1.0; -1.0, 1.0]);
        let s = time_stiffness_trial(&uniform_time_mesh(0.0, 1.0, 1).unwrap());
        assert!(close(s.get(1, 1), 4.0));
        for i in 0..3 {
            assert!(s.row(i).map(|(_, v)| v).sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_mass_legendre() {
        let mesh = uniform_time_mesh(0.0, 1.0, 0).unwrap();
        let n = time_mass_mixed(&mesh, TimeBasisSpec::legendre(1)).unwrap();
        let r3 = 3f64.sqrt();
        assert!(close(n.get(0, 0), 0.5) && close(n.get(0, 1), 0.5));
        assert!(close(n.get(1, 0), -1.0 / (2.0 * r3)) && close(n.get(1, 1), 1.0 / (2.0 * r3)));

        let mesh = uniform_time_mesh(0.0, 2.0, 2).unwrap();
        let n = time_mass_mixed(&mesh, TimeBasisSpec::legendre(1)).unwrap();
        assert_eq!((n.n_rows(), n.n_cols()), (8, 5));
        // constant trial function -> ∫ ψ_i
        let ones = n.mul_vec(&[1.0; 5]);
        for e in 0..4 {
            let h: f64 = 0.5;
            assert!((ones[2 * e] - h.sqrt()).abs() < 1e-14);
            assert!(ones[2 * e + 1].abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_derivative() {
        let mesh = uniform_time_mesh(0.0, 1.0, 0).unwrap();
        let d = time_derivative_mixed(&mesh, TimeBasisSpec::legendre(0)).unwrap();
        assert!(close(d.get(0, 0), -1.0) && close(d.get(0, 1), 1.0));

        let mesh = uniform_time_mesh(0.0, 1.0, 1).unwrap();
        let d = time_derivative_mixed(&mesh, TimeBasisSpec::legendre(1)).unwrap();
        assert!(d.mul_vec(&[1.0; 3]).iter().all(|v| v.abs() < 1e-14));
        // element rows only touch the two hats of the element
        for (i, j, _) in d.triplets() {
            let e = i / 2;
            assert!(j == e || j == e + 1);
        }
        assert!(time_derivative_mixed(&mesh, TimeBasisSpec::ContinuousLinear).is_err());
    }

    #[test]
    fn orthonormal_gram_is_identity() {
        let mesh = TimeMesh::from_breakpoints(vec![0.0, 0.1, 0.5, 1.2]).unwrap();
        let g = time_test_gram(&mesh, TimeBasisSpec::legendre(2)).unwrap();
        let diff = g.to_dense() - nalgebra::DMatrix::identity(9, 9);
        assert!(diff.amax() < 1e-14);
    }

    #[test]
    fn traces() {
        let mesh = uniform_time_mesh(0.0, 1.0, 2).unwrap();
        assert_eq!(trace_vector(&mesh, 1.0).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(trace_vector(&mesh, 0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(trace_vector(&mesh, 0.375).unwrap(), vec![0.0, 0.5, 0.5, 0.0, 0.0]);
        assert!(trace_vector(&mesh, 1.1).is_err());
    }
}
