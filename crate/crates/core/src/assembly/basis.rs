//! Lagrange bases of degree 1 and 2 on simplices, cell geometry and global
//! degree-of-freedom numbering with Dirichlet elimination.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::SpatialMesh;

/// Continuous Lagrange space on a spatial mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceBasisSpec {
    pub degree: usize,
    /// Drop dofs on the boundary (homogeneous Dirichlet conditions).
    pub dirichlet: bool,
}

impl SpaceBasisSpec {
    pub fn new(degree: usize, dirichlet: bool) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::Unsupported(format!("spatial degree {degree}")));
        }
        Ok(Self { degree, dirichlet })
    }

    /// Degree `1 + l` with Dirichlet elimination.
    pub fn h01(degree: usize) -> Self {
        Self::new(degree, true).expect("supported degree")
    }
}

/// Affine map from the reference simplex onto a cell.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    origin: Vec<f64>,
    /// Columns are `v_i - v_0`.
    jac: Vec<Vec<f64>>,
    /// Gradients of the barycentric coordinates `λ_0..λ_d`.
    bary_grads: Vec<Vec<f64>>,
    det: f64,
}

impl CellGeometry {
    pub fn new(mesh: &SpatialMesh, c: usize) -> Self {
        let d = mesh.dim();
        let cell = &mesh.cells()[c];
        let v = mesh.vertices();
        let origin = v[cell[0]].clone();
        let jac: Vec<Vec<f64>> = (0..d)
            .map(|r| (0..d).map(|col| v[cell[col + 1]][r] - origin[r]).collect())
            .collect();
        let (det, inv) = match d {
            1 => (jac[0][0], vec![vec![1.0 / jac[0][0]]]),
            2 => {
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                let inv = vec![
                    vec![jac[1][1] / det, -jac[0][1] / det],
                    vec![-jac[1][0] / det, jac[0][0] / det],
                ];
                (det, inv)
            }
            _ => unimplemented!("cell geometry for d > 2"),
        };
        // ∇λ_i = row i-1 of J^{-1} for i >= 1.
        let mut bary_grads = vec![vec![0.0; d]; d + 1];
        for i in 1..=d {
            bary_grads[i] = inv[i - 1].clone();
            for k in 0..d {
                bary_grads[0][k] -= inv[i - 1][k];
            }
        }
        Self {
            origin,
            jac,
            bary_grads,
            det: det.abs(),
        }
    }

    /// Physical coordinates of a reference point.
    pub fn map(&self, xi: &[f64]) -> Vec<f64> {
        self.origin
            .iter()
            .enumerate()
            .map(|(r, o)| o + self.jac[r].iter().zip(xi).map(|(j, x)| j * x).sum::<f64>())
            .collect()
    }

    /// |det J|; integrals are `Σ w · |det J| · f` with reference weights.
    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn bary_grads(&self) -> &[Vec<f64>] {
        &self.bary_grads
    }
}

fn barycentric(xi: &[f64]) -> Vec<f64> {
    let mut l = Vec::with_capacity(xi.len() + 1);
    l.push(1.0 - xi.iter().sum::<f64>());
    l.extend_from_slice(xi);
    l
}

/// Local edges (pairs of local vertices) carrying degree-2 dofs.
pub fn local_edges(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        1 => &[(0, 1)],
        2 => &[(0, 1), (1, 2), (0, 2)],
        _ => unimplemented!("local edges for d > 2"),
    }
}

/// Number of local basis functions per cell.
pub fn n_local(dim: usize, degree: usize) -> usize {
    match degree {
        1 => dim + 1,
        2 => dim + 1 + local_edges(dim).len(),
        _ => unimplemented!("degree {degree}"),
    }
}

/// Values and physical gradients of all local basis functions at a
/// reference point.
pub fn eval_local(
    geom: &CellGeometry,
    degree: usize,
    xi: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = xi.len();
    let lam = barycentric(xi);
    let g = geom.bary_grads();
    let mut vals = Vec::with_capacity(n_local(dim, degree));
    let mut grads = Vec::with_capacity(n_local(dim, degree));
    match degree {
        1 => {
            for i in 0..=dim {
                vals.push(lam[i]);
                grads.push(g[i].clone());
            }
        }
        2 => {
            for i in 0..=dim {
                vals.push(lam[i] * (2.0 * lam[i] - 1.0));
                grads.push(g[i].iter().map(|x| (4.0 * lam[i] - 1.0) * x).collect());
            }
            for &(i, j) in local_edges(dim) {
                vals.push(4.0 * lam[i] * lam[j]);
                grads.push(
                    g[i].iter()
                        .zip(&g[j])
                        .map(|(gi, gj)| 4.0 * (lam[j] * gi + lam[i] * gj))
                        .collect(),
                );
            }
        }
        _ => unimplemented!("degree {degree}"),
    }
    (vals, grads)
}

/// Global numbering of the dofs of a Lagrange space.
#[derive(Debug, Clone)]
pub struct SpaceDofs {
    spec: SpaceBasisSpec,
    dim: usize,
    n_dofs: usize,
    cell_dofs: Vec<Vec<Option<usize>>>,
    nodes: Vec<Vec<f64>>,
}

impl SpaceDofs {
    pub fn new(mesh: &SpatialMesh, spec: SpaceBasisSpec) -> Self {
        let dim = mesh.dim();
        let boundary = mesh.boundary_flags();
        let mut vertex_dof = vec![None; mesh.n_vertices()];
        let mut nodes = Vec::new();
        for (v, flag) in boundary.iter().enumerate() {
            if !(spec.dirichlet && *flag) {
                vertex_dof[v] = Some(nodes.len());
                nodes.push(mesh.vertices()[v].clone());
            }
        }

        let mut edge_dof: HashMap<(usize, usize), Option<usize>> = HashMap::new();
        if spec.degree == 2 {
            let facets = if dim == 2 { Some(mesh.facet_counts()) } else { None };
            for cell in mesh.cells() {
                for &(i, j) in local_edges(dim) {
                    let key = (cell[i].min(cell[j]), cell[i].max(cell[j]));
                    if edge_dof.contains_key(&key) {
                        continue;
                    }
                    let on_boundary = facets
                        .as_ref()
                        .map(|f| f.get(&vec![key.0, key.1]) == Some(&1))
                        .unwrap_or(false);
                    let dof = if spec.dirichlet && on_boundary {
                        None
                    } else {
                        let a = &mesh.vertices()[key.0];
                        let b = &mesh.vertices()[key.1];
                        nodes.push(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect());
                        Some(nodes.len() - 1)
                    };
                    edge_dof.insert(key, dof);
                }
            }
        }

        let cell_dofs = mesh
            .cells()
            .iter()
            .map(|cell| {
                let mut dofs: Vec<Option<usize>> = cell.iter().map(|&v| vertex_dof[v]).collect();
                if spec.degree == 2 {
                    for &(i, j) in local_edges(dim) {
                        let key = (cell[i].min(cell[j]), cell[i].max(cell[j]));
                        dofs.push(edge_dof[&key]);
                    }
                }
                dofs
            })
            .collect();

        Self {
            spec,
            dim,
            n_dofs: nodes.len(),
            cell_dofs,
            nodes,
        }
    }

    pub fn spec(&self) -> SpaceBasisSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Global dof of each local basis function on cell `c` (`None` if eliminated).
    pub fn cell_dofs(&self, c: usize) -> &[Option<usize>] {
        &self.cell_dofs[c]
    }

    /// Lagrange node of each global dof.
    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    /// Nodal interpolant of `g`. Exact on the space itself.
    pub fn interpolate(&self, g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|x| g(x)).collect()
    }

    /// Value and gradient of the finite element function `coeffs` at a
    /// reference point of cell `c`.
    pub fn eval(&self, geom: &CellGeometry, c: usize, coeffs: &[f64], xi: &[f64]) -> (f64, Vec<f64>) {
        let (vals, grads) = eval_local(geom, self.spec.degree, xi);
        let mut v = 0.0;
        let mut g = vec![0.0; self.dim];
        for (a, dof) in self.cell_dofs[c].iter().enumerate() {
            if let Some(i) = dof {
                v += coeffs[*i] * vals[a];
                for k in 0..self.dim {
                    g[k] += coeffs[*i] * grads[a][k];
                }
            }
        }
        (v, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{refine_uniform, unit_interval_mesh, unit_square_initial};

    #[test]
    fn p2_counts_on_square() {
        let m = refine_uniform(&unit_square_initial(), 2);
        let p1 = SpaceDofs::new(&m, SpaceBasisSpec::h01(1));
        assert_eq!(p1.n_dofs(), 5);
        let p2 = SpaceDofs::new(&m, SpaceBasisSpec::h01(2));
        // 16 triangles, 28 edges of which 8 lie on the boundary
        assert_eq!(p2.n_dofs(), 5 + 20);
        let full = SpaceDofs::new(&m, SpaceBasisSpec::new(2, false).unwrap());
        assert_eq!(full.n_dofs(), 13 + 28);
    }

    #[test]
    fn partition_of_unity_and_gradients() {
        let m = unit_square_initial();
        for deg in [1, 2] {
            for c in 0..m.n_cells() {
                let geom = CellGeometry::new(&m, c);
                for xi in [[0.2, 0.3], [0.0, 0.0], [0.5, 0.5]] {
                    let (v, g) = eval_local(&geom, deg, &xi);
                    assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                    for k in 0..2 {
                        assert!(g.iter().map(|gi| gi[k]).sum::<f64>().abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_quadratics() {
        let m = refine_uniform(&unit_square_initial(), 1);
        let dofs = SpaceDofs::new(&m, SpaceBasisSpec::new(2, false).unwrap());
        let q = |x: &[f64]| 1.0 + x[0] - 2.0 * x[1] + x[0] * x[1] + 3.0 * x[1] * x[1];
        let coeffs = dofs.interpolate(q);
        for c in 0..m.n_cells() {
            let geom = CellGeometry::new(&m, c);
            let xi = [0.21, 0.37];
            let (v, g) = dofs.eval(&geom, c, &coeffs, &xi);
            let x = geom.map(&xi);
            assert!((v - q(&x)).abs() < 1e-13);
            assert!((g[0] - (1.0 + x[1])).abs() < 1e-12);
            assert!((g[1] - (-2.0 + x[0] + 6.0 * x[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn interval_p2_dofs() {
        let m = unit_interval_mesh(1).unwrap();
        assert_eq!(SpaceDofs::new(&m, SpaceBasisSpec::h01(1)).n_dofs(), 0);
        let p2 = SpaceDofs::new(&m, SpaceBasisSpec::h01(2));
        assert_eq!(p2.n_dofs(), 1);
        assert_eq!(p2.nodes()[0], vec![0.5]);
    }
}
