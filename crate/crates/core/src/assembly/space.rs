//! Spatial mass and stiffness matrices, possibly between two different
//! Lagrange spaces on the same mesh.

use super::basis::{eval_local, CellGeometry, SpaceBasisSpec, SpaceDofs};
use crate::error::{Error, Result};
use crate::mesh::SpatialMesh;
use crate::quadrature::simplex_rule;
use crate::sparse::SparseMatrix;

/// Mass and stiffness between `trial` (columns) and `test` (rows) spaces.
pub fn space_pair(
    mesh: &SpatialMesh,
    trial: &SpaceDofs,
    test: &SpaceDofs,
) -> (SparseMatrix, SparseMatrix) {
    let dim = mesh.dim();
    let (pts, wts) = simplex_rule(dim, trial.spec().degree + test.spec().degree);
    let mut mass = Vec::new();
    let mut stiff = Vec::new();
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh, c);
        let tr_dofs = trial.cell_dofs(c);
        let te_dofs = test.cell_dofs(c);
        let mut m_loc = vec![vec![0.0; tr_dofs.len()]; te_dofs.len()];
        let mut a_loc = vec![vec![0.0; tr_dofs.len()]; te_dofs.len()];
        for (xi, w) in pts.iter().zip(&wts) {
            let (tr_v, tr_g) = eval_local(&geom, trial.spec().degree, xi);
            let (te_v, te_g) = eval_local(&geom, test.spec().degree, xi);
            let wdet = w * geom.det();
            for i in 0..te_dofs.len() {
                for j in 0..tr_dofs.len() {
                    m_loc[i][j] += wdet * te_v[i] * tr_v[j];
                    let dot: f64 = te_g[i].iter().zip(&tr_g[j]).map(|(a, b)| a * b).sum();
                    a_loc[i][j] += wdet * dot;
                }
            }
        }
        for (i, ri) in te_dofs.iter().enumerate() {
            let Some(r) = ri else { continue };
            for (j, cj) in tr_dofs.iter().enumerate() {
                let Some(col) = cj else { continue };
                mass.push((*r, *col, m_loc[i][j]));
                stiff.push((*r, *col, a_loc[i][j]));
            }
        }
    }
    (
        SparseMatrix::from_triplets(test.n_dofs(), trial.n_dofs(), mass),
        SparseMatrix::from_triplets(test.n_dofs(), trial.n_dofs(), stiff),
    )
}

/// `M_x[i][j] = ∫_Ω η_i η_j`.
pub fn space_mass(mesh: &SpatialMesh, spec: SpaceBasisSpec) -> SparseMatrix {
    let dofs = SpaceDofs::new(mesh, spec);
    space_pair(mesh, &dofs, &dofs).0
}

/// `A_x[i][j] = ∫_Ω ∇η_i · ∇η_j`.
pub fn space_stiffness(mesh: &SpatialMesh, spec: SpaceBasisSpec) -> SparseMatrix {
    let dofs = SpaceDofs::new(mesh, spec);
    space_pair(mesh, &dofs, &dofs).1
}

/// Mixed mass and stiffness with rows in the test space and columns in the
/// (degree 1) trial space.
pub fn space_mixed(
    mesh: &SpatialMesh,
    trial: SpaceBasisSpec,
    test: SpaceBasisSpec,
) -> Result<(SparseMatrix, SparseMatrix)> {
    if trial.degree != 1 {
        return Err(Error::Unsupported(format!("trial degree {}", trial.degree)));
    }
    let tr = SpaceDofs::new(mesh, trial);
    let te = SpaceDofs::new(mesh, test);
    Ok(space_pair(mesh, &tr, &te))
}
