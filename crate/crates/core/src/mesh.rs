//! Temporal grids and simplicial spatial meshes.
//!
//! Spatial meshes are refined by uniform newest-vertex bisection: every cell
//! is split once per round through the midpoint of its refinement edge. Cells
//! store their vertices so that `cell[0]`-`cell[1]` (the first and second
//! local vertex) is the refinement edge in 2-D and the last vertex is the
//! newest one.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A partition of the closed time interval `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    breakpoints: Vec<f64>,
}

impl TimeMesh {
    /// Build a mesh from explicit breakpoints (strictly increasing, at least two).
    pub fn from_breakpoints(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidMesh("time mesh needs at least two breakpoints".into()));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidMesh("non-finite time breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMesh("time breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints })
    }

    pub fn t_start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_elements(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.breakpoints.len()
    }

    /// `(left, right)` endpoints of element `e`.
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.breakpoints[e], self.breakpoints[e + 1])
    }

    pub fn max_element_length(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Element containing `t`; the right endpoint belongs to the last element.
    pub fn locate(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * (self.t_end() - self.t_start());
        if t < self.t_start() - tol || t > self.t_end() + tol {
            return Err(Error::OutOfInterval {
                t,
                start: self.t_start(),
                end: self.t_end(),
            });
        }
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        Ok(idx.saturating_sub(1).min(self.n_elements() - 1))
    }

    /// Index of the breakpoint closest to `t`; ties go to the later breakpoint.
    pub fn nearest_breakpoint(&self, t: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &b) in self.breakpoints.iter().enumerate() {
            let dist = (b - t).abs();
            if dist <= best_dist * (1.0 + 1e-12) {
                best = i;
                best_dist = best_dist.min(dist);
            }
        }
        best
    }

    /// Keep only the breakpoints in `[t_start, t_end]`; `t_start` must be a
    /// breakpoint (up to round-off).
    pub fn restrict_from(&self, t_start: f64) -> Result<Self> {
        let idx = self.nearest_breakpoint(t_start);
        let h = self.max_element_length();
        if (self.breakpoints[idx] - t_start).abs() > 1e-10 * h {
            return Err(Error::InvalidMesh(format!(
                "restriction start {t_start} is not a breakpoint of the time mesh"
            )));
        }
        let mut pts = self.breakpoints[idx..].to_vec();
        pts[0] = t_start;
        Self::from_breakpoints(pts)
    }
}

/// `2^k` equal subintervals of `[t_start, t_end]`.
pub fn uniform_time_mesh(t_start: f64, t_end: f64, k: u32) -> Result<TimeMesh> {
    if !(t_end > t_start) {
        return Err(Error::InvalidMesh(format!(
            "degenerate time interval [{t_start}, {t_end}]"
        )));
    }
    let n = 1usize << k;
    let len = t_end - t_start;
    let mut pts: Vec<f64> = (0..=n).map(|i| t_start + len * (i as f64) / (n as f64)).collect();
    pts[n] = t_end;
    TimeMesh::from_breakpoints(pts)
}

/// A conforming simplicial mesh of a polytope in 1 or 2 space dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    boundary: Vec<bool>,
}

impl SpatialMesh {
    /// Validate and build a mesh. Cells must have positive orientation.
    pub fn new(
        dim: usize,
        vertices: Vec<Vec<f64>>,
        cells: Vec<Vec<usize>>,
        boundary: Vec<bool>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        if boundary.len() != vertices.len() {
            return Err(Error::InvalidMesh("boundary flags must match vertex count".into()));
        }
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidMesh("vertex coordinate arity mismatch".into()));
        }
        let mesh = Self {
            dim,
            vertices,
            cells,
            boundary,
        };
        for (c, cell) in mesh.cells.iter().enumerate() {
            if cell.len() != dim + 1 || cell.iter().any(|&v| v >= mesh.vertices.len()) {
                return Err(Error::InvalidMesh(format!("cell {c} has invalid vertex list")));
            }
            if dim <= 2 && mesh.signed_volume(c) <= 0.0 {
                return Err(Error::InvalidMesh(format!("cell {c} is not positively oriented")));
            }
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_interior_vertices(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    /// Signed measure of cell `c` (length in 1-D, area in 2-D).
    pub fn signed_volume(&self, c: usize) -> f64 {
        let cell = &self.cells[c];
        match self.dim {
            1 => self.vertices[cell[1]][0] - self.vertices[cell[0]][0],
            2 => {
                let a = &self.vertices[cell[0]];
                let b = &self.vertices[cell[1]];
                let p = &self.vertices[cell[2]];
                0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]))
            }
            _ => unimplemented!("volumes are only implemented for d <= 2"),
        }
    }

    pub fn volume(&self, c: usize) -> f64 {
        self.signed_volume(c).abs()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.volume(c)).sum()
    }

    /// Largest edge length over all cells.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for cell in &self.cells {
            for i in 0..cell.len() {
                for j in i + 1..cell.len() {
                    h = h.max(dist(&self.vertices[cell[i]], &self.vertices[cell[j]]));
                }
            }
        }
        h
    }

    /// Facets (sorted vertex tuples) with the number of cells sharing each.
    pub fn facet_counts(&self) -> HashMap<Vec<usize>, usize> {
        let mut counts = HashMap::new();
        for cell in &self.cells {
            for skip in 0..cell.len() {
                let mut facet: Vec<usize> = cell
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                facet.sort_unstable();
                *counts.entry(facet).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Ratio of circumradius to inradius of a triangle (2-D only).
    pub fn radius_ratio(&self, c: usize) -> f64 {
        assert_eq!(self.dim, 2, "radius ratio is defined for triangles");
        let cell = &self.cells[c];
        let a = dist(&self.vertices[cell[1]], &self.vertices[cell[2]]);
        let b = dist(&self.vertices[cell[0]], &self.vertices[cell[2]]);
        let e = dist(&self.vertices[cell[0]], &self.vertices[cell[1]]);
        let area = self.volume(c);
        let circum = a * b * e / (4.0 * area);
        let inr = 2.0 * area / (a + b + e);
        circum / inr
    }

    /// Plain-text dump: one `v x y` line per vertex and one `c i j k` line per cell.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push('v');
            for x in v {
                let _ = write!(out, " {x:.17e}");
            }
            out.push('\n');
        }
        for cell in &self.cells {
            out.push('c');
            for i in cell {
                let _ = write!(out, " {i}");
            }
            out.push('\n');
        }
        out
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `m` equal elements on the unit interval, endpoints flagged as boundary.
pub fn unit_interval_mesh(m: usize) -> Result<SpatialMesh> {
    if m == 0 {
        return Err(Error::InvalidMesh("interval mesh needs at least one element".into()));
    }
    let vertices = (0..=m).map(|i| vec![i as f64 / m as f64]).collect();
    let cells = (0..m).map(|i| vec![i, i + 1]).collect();
    let boundary = (0..=m).map(|i| i == 0 || i == m).collect();
    SpatialMesh::new(1, vertices, cells, boundary)
}

/// The unit square cut along both diagonals: four triangles meeting at the
/// center, which is the newest vertex of every triangle.
pub fn unit_square_initial() -> SpatialMesh {
    let vertices = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
        vec![0.5, 0.5],
    ];
    let cells = vec![vec![0, 1, 4], vec![1, 2, 4], vec![2, 3, 4], vec![3, 0, 4]];
    let boundary = vec![true, true, true, true, false];
    SpatialMesh::new(2, vertices, cells, boundary).expect("initial square mesh is valid")
}

/// Apply `rounds` sweeps of uniform bisection to every cell.
pub fn refine_uniform(mesh: &SpatialMesh, rounds: usize) -> SpatialMesh {
    let mut current = mesh.clone();
    for _ in 0..rounds {
        current = bisect_all(&current);
    }
    current
}

fn bisect_all(mesh: &SpatialMesh) -> SpatialMesh {
    let facets = mesh.facet_counts();
    let mut vertices = mesh.vertices.clone();
    let mut boundary = mesh.boundary.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec<f64>>, boundary: &mut Vec<bool>| {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let m: Vec<f64> = vertices[a]
                .iter()
                .zip(&vertices[b])
                .map(|(x, y)| 0.5 * (x + y))
                .collect();
            vertices.push(m);
            // In 1-D the refined "edge" is the cell itself, never on the boundary.
            let on_boundary = mesh.dim == 2 && facets.get(&vec![key.0, key.1]) == Some(&1);
            boundary.push(on_boundary);
            vertices.len() - 1
        })
    };

    let mut cells = Vec::with_capacity(2 * mesh.n_cells());
    for cell in &mesh.cells {
        match mesh.dim {
            1 => {
                let m = midpoint(cell[0], cell[1], &mut vertices, &mut boundary);
                cells.push(vec![cell[0], m]);
                cells.push(vec![m, cell[1]]);
            }
            2 => {
                let (a, b, c) = (cell[0], cell[1], cell[2]);
                let m = midpoint(a, b, &mut vertices, &mut boundary);
                cells.push(vec![c, a, m]);
                cells.push(vec![b, c, m]);
            }
            _ => unimplemented!("bisection is only implemented for d <= 2"),
        }
    }
    SpatialMesh::new(mesh.dim, vertices, cells, boundary).expect("bisection preserves validity")
}

/// A time mesh together with a spatial mesh; all discrete spaces live on it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshPair {
    pub time: TimeMesh,
    pub space: SpatialMesh,
}

impl MeshPair {
    pub fn new(time: TimeMesh, space: SpatialMesh) -> Self {
        Self { time, space }
    }

    /// `2^k` time elements on `(t_start, t_end)` and `d * k` bisections of
    /// the initial mesh of the unit cube.
    pub fn uniform(d: usize, t_start: f64, t_end: f64, k: u32) -> Result<Self> {
        let time = uniform_time_mesh(t_start, t_end, k)?;
        let space = refine_uniform(&unit_cube_initial(d)?, d * k as usize);
        Ok(Self { time, space })
    }
}

/// Initial mesh of the unit cube `(0,1)^d` used by the experiments.
pub fn unit_cube_initial(d: usize) -> Result<SpatialMesh> {
    match d {
        1 => unit_interval_mesh(1),
        2 => Ok(unit_square_initial()),
        _ => Err(Error::Unsupported(format!("spatial dimension {d}"))),
    }
}
