//! Load vectors for source terms and end-time data, and L2 projections.

use super::basis::{eval_local, CellGeometry, SpaceBasisSpec, SpaceDofs};
use super::space::space_pair;
use super::time::{test_function, TimeBasisSpec};
use crate::error::{Error, Result};
use crate::mesh::{SpatialMesh, TimeMesh};
use crate::quadrature::{gauss_legendre, simplex_rule};
use crate::sparse::SparseCholesky;

/// `b[j] = ∫_Ω g η_j`.
pub fn load_vector_space(
    mesh: &SpatialMesh,
    dofs: &SpaceDofs,
    g: impl Fn(&[f64]) -> f64,
    quad_order: usize,
) -> Vec<f64> {
    let (pts, wts) = simplex_rule(mesh.dim(), quad_order);
    let mut b = vec![0.0; dofs.n_dofs()];
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        for (xi, w) in pts.iter().zip(&wts) {
            let (vals, _) = eval_local(&geom, dofs.spec().degree, xi);
            let gx = g(&geom.map(xi));
            for (a, dof) in dofs.cell_dofs(c).iter().enumerate() {
                if let Some(j) = dof {
                    b[*j] += w * geom.det() * gx * vals[a];
                }
            }
        }
    }
    b
}

/// `F[(e, q) * n_space + j] = ∫_J ∫_Ω f ψ_{e,q} η_j` by tensor Gauss quadrature.
pub fn load_vector_f(
    time_mesh: &TimeMesh,
    space_mesh: &SpatialMesh,
    time_test: TimeBasisSpec,
    space_test: &SpaceDofs,
    f: impl Fn(f64, &[f64]) -> f64,
    quad_order: usize,
) -> Result<Vec<f64>> {
    let TimeBasisSpec::Discontinuous { degree: p, orthonormal } = time_test else {
        return Err(Error::InvalidArgument("time test basis must be discontinuous".into()));
    };
    let n_space = space_test.n_dofs();
    let (gx, gw) = gauss_legendre(quad_order / 2 + 1);
    let (pts, wts) = simplex_rule(space_mesh.dim(), quad_order);
    let geoms: Vec<CellGeometry> = (0..space_mesh.n_cells())
        .map(|c| CellGeometry::new(space_mesh, c))
        .collect();
    let local: Vec<Vec<Vec<f64>>> = geoms
        .iter()
        .map(|g| pts.iter().map(|xi| eval_local(g, space_test.spec().degree, xi).0).collect())
        .collect();
    let phys: Vec<Vec<Vec<f64>>> = geoms
        .iter()
        .map(|g| pts.iter().map(|xi| g.map(xi)).collect())
        .collect();

    let mut out = vec![0.0; time_test.n_dofs(time_mesh) * n_space];
    let mut slab = vec![0.0; n_space];
    for e in 0..time_mesh.n_elements() {
        let (a, b) = time_mesh.element(e);
        let h = b - a;
        for (x, wt) in gx.iter().zip(&gw) {
            let t = a + h * x;
            slab.iter_mut().for_each(|s| *s = 0.0);
            for c in 0..space_mesh.n_cells() {
                let det = geoms[c].det();
                for (qp, w) in wts.iter().enumerate() {
                    let fx = f(t, &phys[c][qp]);
                    for (loc, dof) in space_test.cell_dofs(c).iter().enumerate() {
                        if let Some(j) = dof {
                            slab[*j] += w * det * fx * local[c][qp][loc];
                        }
                    }
                }
            }
            for q in 0..=p {
                let psi = test_function(time_mesh, p, orthonormal, e, q, t);
                let row = (e * (p + 1) + q) * n_space;
                for j in 0..n_space {
                    out[row + j] += wt * h * psi * slab[j];
                }
            }
        }
    }
    Ok(out)
}

/// Coefficients of the L2(Ω) projection of `g` onto the given space.
pub fn l2_projection(
    mesh: &SpatialMesh,
    spec: SpaceBasisSpec,
    g: impl Fn(&[f64]) -> f64,
    quad_order: usize,
) -> Result<Vec<f64>> {
    let dofs = SpaceDofs::new(mesh, spec);
    let (mass, _) = space_pair(mesh, &dofs, &dofs);
    let b = load_vector_space(mesh, &dofs, g, quad_order);
    let chol = SparseCholesky::factor(&mass)?;
    Ok(chol.solve(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{refine_uniform, uniform_time_mesh, unit_interval_mesh, unit_square_initial};
    use std::f64::consts::PI;

    #[test]
    fn zero_source_gives_zero() {
        let tm = uniform_time_mesh(0.0, 1.0, 2).unwrap();
        let sm = refine_uniform(&unit_square_initial(), 2);
        let dofs = SpaceDofs::new(&sm, SpaceBasisSpec::h01(1));
        let f = load_vector_f(&tm, &sm, TimeBasisSpec::legendre(1), &dofs, |_, _| 0.0, 4).unwrap();
        assert_eq!(f.len(), 8 * 5);
        assert!(f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_source_single_element() {
        let tm = uniform_time_mesh(0.0, 1.0, 0).unwrap();
        let sm = unit_interval_mesh(2).unwrap();
        let dofs = SpaceDofs::new(&sm, SpaceBasisSpec::h01(1));
        let f = load_vector_f(&tm, &sm, TimeBasisSpec::legendre(1), &dofs, |_, _| 1.0, 4).unwrap();
        // ∫ψ_0 = 1, ∫ψ_1 = 0, ∫ hat_{1/2} = 1/2
        assert!((f[0] - 0.5).abs() < 1e-15);
        assert!(f[1].abs() < 1e-15);
    }

    #[test]
    fn projection_of_space_member_is_exact() {
        let sm = refine_uniform(&unit_square_initial(), 3);
        let spec = SpaceBasisSpec::h01(1);
        let dofs = SpaceDofs::new(&sm, spec);
        let coeffs: Vec<f64> = (0..dofs.n_dofs()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let g = |x: &[f64]| {
            // evaluate the finite element function by locating the cell
            for c in 0..sm.n_cells() {
                let geom = CellGeometry::new(&sm, c);
                let v = sm.cells()[c].iter().map(|&i| &sm.vertices()[i]).collect::<Vec<_>>();
                let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0]);
                let xi0 = ((x[0] - v[0][0]) * (v[2][1] - v[0][1]) - (x[1] - v[0][1]) * (v[2][0] - v[0][0])) / det;
                let xi1 = ((v[1][0] - v[0][0]) * (x[1] - v[0][1]) - (v[1][1] - v[0][1]) * (x[0] - v[0][0])) / det;
                if xi0 >= -1e-12 && xi1 >= -1e-12 && xi0 + xi1 <= 1.0 + 1e-12 {
                    return dofs.eval(&geom, c, &coeffs, &[xi0, xi1]).0;
                }
            }
            unreachable!()
        };
        let p = l2_projection(&sm, spec, g, 2).unwrap();
        for (a, b) in p.iter().zip(&coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(l2_projection(&sm, spec, |_| 0.0, 2).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn projection_of_sine_is_close_to_nodal_values() {
        let h_errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&m| {
                let sm = unit_interval_mesh(m).unwrap();
                let spec = SpaceBasisSpec::h01(1);
                let p = l2_projection(&sm, spec, |x| (PI * x[0]).sin(), 6).unwrap();
                let nodal = SpaceDofs::new(&sm, spec).interpolate(|x| (PI * x[0]).sin());
                p.iter().zip(&nodal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .collect();
        assert!(h_errs[0] < 1e-2);
        // O(h^2): halving h reduces the gap by about 4
        assert!(h_errs[0] / h_errs[1] > 3.5);
    }
}
