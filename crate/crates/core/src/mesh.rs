//! Uniform meshes of the unit interval and the unit square.
//!
//! In 2D every square is split by its bottom-left to top-right diagonal, which
//! makes the triangulation symmetric about every interior vertex. Boundary
//! vertices carry no degree of freedom (homogeneous Dirichlet condition).

use crate::error::{Error, Result};

/// How the number of cells relates to the mesh family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpacingRule {
    /// h = 1/N for any N ≥ 2.
    Standard,
    /// 1D only: h = 1/(2^k + 1), so that x = 1/2 falls strictly between nodes.
    Offset,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    /// Cells per axis.
    pub n: usize,
    pub h: f64,
    pub rule: SpacingRule,
    /// Vertex coordinates; the second component is zero in 1D.
    pub vertices: Vec<[f64; 2]>,
    /// Vertex indices of each cell; only the first `dim + 1` entries are used.
    pub cells: Vec<[usize; 3]>,
    /// Equation index of each vertex, `None` on the boundary.
    pub interior_dof: Vec<Option<usize>>,
    /// Vertex of each equation index.
    pub dof_vertex: Vec<usize>,
}

/// Builds the uniform mesh with `n` cells per axis.
pub fn build_mesh(dim: usize, n: usize, rule: SpacingRule) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::Mesh(format!("need at least 2 cells per axis, got {n}")));
    }
    let nf = n as f64;
    match (dim, rule) {
        (2, SpacingRule::Offset) => Err(Error::Mesh(
            "offset spacing is only defined for 1D meshes".into(),
        )),
        (1, _) => {
            if rule == SpacingRule::Offset && !(n - 1).is_power_of_two() {
                return Err(Error::Mesh(format!(
                    "offset spacing needs n = 2^k + 1 cells, got {n}"
                )));
            }
            let vertices = (0..=n).map(|i| [i as f64 / nf, 0.0]).collect();
            let cells = (0..n).map(|i| [i, i + 1, usize::MAX]).collect();
            let interior_dof = (0..=n)
                .map(|i| (i > 0 && i < n).then(|| i - 1))
                .collect();
            let dof_vertex = (1..n).collect();
            Ok(Mesh {
                dim,
                n,
                h: 1.0 / nf,
                rule,
                vertices,
                cells,
                interior_dof,
                dof_vertex,
            })
        }
        (2, SpacingRule::Standard) => {
            let nv = n + 1;
            let v = |i: usize, j: usize| i + nv * j;
            let mut vertices = Vec::with_capacity(nv * nv);
            let mut interior_dof = Vec::with_capacity(nv * nv);
            let mut dof_vertex = Vec::with_capacity((n - 1) * (n - 1));
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([i as f64 / nf, j as f64 / nf]);
                    if i > 0 && i < n && j > 0 && j < n {
                        interior_dof.push(Some(dof_vertex.len()));
                        dof_vertex.push(v(i, j));
                    } else {
                        interior_dof.push(None);
                    }
                }
            }
            let mut cells = Vec::with_capacity(2 * n * n);
            for j in 0..n {
                for i in 0..n {
                    cells.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
                    cells.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
                }
            }
            Ok(Mesh {
                dim,
                n,
                h: 1.0 / nf,
                rule,
                vertices,
                cells,
                interior_dof,
                dof_vertex,
            })
        }
        _ => Err(Error::Mesh(format!("dimension {dim} is not supported"))),
    }
}

impl Mesh {
    pub fn num_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Vertex indices of cell `c`.
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..self.dim + 1]
    }

    /// Vertex coordinates of cell `c`.
    pub fn cell_coords(&self, c: usize) -> [[f64; 2]; 3] {
        let mut out = [[0.0; 2]; 3];
        for (k, &v) in self.cell(c).iter().enumerate() {
            out[k] = self.vertices[v];
        }
        out
    }

    /// Length or area of every cell (all equal on these meshes).
    pub fn cell_measure(&self) -> f64 {
        match self.dim {
            1 => self.h,
            _ => 0.5 * self.h * self.h,
        }
    }

    /// Coordinates of the vertex carrying equation `k`.
    pub fn dof_coords(&self, k: usize) -> [f64; 2] {
        self.vertices[self.dof_vertex[k]]
    }

    /// Grid indices (i, j) of equation `k` (j = 0 in 1D).
    pub fn dof_grid_index(&self, k: usize) -> (usize, usize) {
        match self.dim {
            1 => (k + 1, 0),
            _ => (k % (self.n - 1) + 1, k / (self.n - 1) + 1),
        }
    }

    /// Equation index of interior grid point (i, j), 1 ≤ i, j ≤ n − 1.
    pub fn grid_dof(&self, i: usize, j: usize) -> usize {
        match self.dim {
            1 => i - 1,
            _ => (i - 1) + (self.n - 1) * (j - 1),
        }
    }

    /// Scatters an interior vector onto all vertices (zero on the boundary).
    pub fn extend_to_vertices(&self, u: &[f64]) -> Vec<f64> {
        self.interior_dof
            .iter()
            .map(|d| d.map_or(0.0, |k| u[k]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = build_mesh(1, 8, SpacingRule::Standard).unwrap();
        assert_eq!((m.num_vertices(), m.num_dofs(), m.h), (9, 7, 0.125));
        let m = build_mesh(2, 4, SpacingRule::Standard).unwrap();
        assert_eq!((m.num_vertices(), m.num_dofs(), m.num_cells()), (25, 9, 32));
    }

    #[test]
    fn offset_grid_misses_midpoint() {
        let m = build_mesh(1, 9, SpacingRule::Offset).unwrap();
        assert!((m.h - 1.0 / 9.0).abs() < 1e-16);
        let nearest = m
            .vertices
            .iter()
            .map(|v| v[0])
            .min_by(|a, b| (a - 0.5).abs().total_cmp(&(b - 0.5).abs()))
            .unwrap();
        assert_eq!(nearest, 4.0 / 9.0);
        assert!(build_mesh(1, 10, SpacingRule::Offset).is_err());
    }

    #[test]
    fn rejects_invalid_requests() {
        assert!(matches!(build_mesh(1, 1, SpacingRule::Standard), Err(Error::Mesh(_))));
        assert!(matches!(build_mesh(2, 9, SpacingRule::Offset), Err(Error::Mesh(_))));
        assert!(build_mesh(3, 4, SpacingRule::Standard).is_err());
    }

    #[test]
    fn triangles_are_positively_oriented_and_symmetric() {
        let m = build_mesh(2, 6, SpacingRule::Standard).unwrap();
        for c in 0..m.num_cells() {
            let p = m.cell_coords(c);
            let area = 0.5
                * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                    - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
            assert!((area - m.cell_measure()).abs() < 1e-15);
        }
        // every interior vertex has six triangles, point-symmetric about it
        for k in 0..m.num_dofs() {
            let v = m.dof_vertex[k];
            let z = m.vertices[v];
            let mut pts = Vec::new();
            for c in 0..m.num_cells() {
                if m.cell(c).contains(&v) {
                    for &w in m.cell(c) {
                        pts.push(m.vertices[w]);
                    }
                }
            }
            assert_eq!(pts.len(), 18);
            for p in &pts {
                let r = [2.0 * z[0] - p[0], 2.0 * z[1] - p[1]];
                assert!(pts
                    .iter()
                    .any(|q| (q[0] - r[0]).abs() < 1e-12 && (q[1] - r[1]).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn dof_indexing_round_trips() {
        let m = build_mesh(2, 5, SpacingRule::Standard).unwrap();
        for k in 0..m.num_dofs() {
            let (i, j) = m.dof_grid_index(k);
            assert_eq!(m.grid_dof(i, j), k);
            let c = m.dof_coords(k);
            assert_eq!(c, [i as f64 / 5.0, j as f64 / 5.0]);
        }
    }
}
