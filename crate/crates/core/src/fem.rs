//! P1 assembly of stiffness and mass operators on interior degrees of freedom.

use crate::mesh::Mesh;
use crate::par;
use crate::sparse::Csr;

/// Local element matrix, at most 3×3 (only the leading (dim+1)² block is used).
pub type LocalMatrix = [[f64; 3]; 3];

/// Assembles Σ_cells local(cell) over interior DOFs. The callback receives the
/// cell's vertex coordinates and fills the local matrix; this is the seam for
/// operators other than −Δ.
pub fn assemble<F>(mesh: &Mesh, local: F) -> Csr
where
    F: Fn(&[[f64; 2]], &mut LocalMatrix) + Sync + Send,
{
    let k = mesh.dim + 1;
    let locals = par::map_range(mesh.num_cells(), |c| {
        let coords = mesh.cell_coords(c);
        let mut m = [[0.0; 3]; 3];
        local(&coords[..k], &mut m);
        m
    });
    let mut trips = Vec::with_capacity(mesh.num_cells() * k * k);
    for (c, m) in locals.iter().enumerate() {
        let verts = mesh.cell(c);
        for a in 0..k {
            let Some(i) = mesh.interior_dof[verts[a]] else { continue };
            for b in 0..k {
                if let Some(j) = mesh.interior_dof[verts[b]] {
                    trips.push((i, j, m[a][b]));
                }
            }
        }
    }
    Csr::from_triplets(mesh.num_dofs(), &trips)
}

/// Gradients of the barycentric coordinates of a triangle and its area.
pub fn triangle_gradients(p: &[[f64; 2]]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        g[a] = [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det];
    }
    (g, 0.5 * det.abs())
}

/// Exact local stiffness matrix of −Δ.
pub fn local_stiffness(p: &[[f64; 2]], m: &mut LocalMatrix) {
    if p.len() == 2 {
        let h = (p[1][0] - p[0][0]).abs();
        *m = [[1.0 / h, -1.0 / h, 0.0], [-1.0 / h, 1.0 / h, 0.0], [0.0; 3]];
        return;
    }
    let (g, area) = triangle_gradients(p);
    for a in 0..3 {
        for b in 0..3 {
            m[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
}

/// Exact local consistent mass matrix.
pub fn local_mass(p: &[[f64; 2]], m: &mut LocalMatrix) {
    if p.len() == 2 {
        let h = (p[1][0] - p[0][0]).abs();
        *m = [[h / 3.0, h / 6.0, 0.0], [h / 6.0, h / 3.0, 0.0], [0.0; 3]];
        return;
    }
    let (_, area) = triangle_gradients(p);
    for (a, row) in m.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = area / if a == b { 6.0 } else { 12.0 };
        }
    }
}

/// Vertex-quadrature (lumped) local mass: |τ|/(d+1) on the diagonal.
pub fn local_lumped_mass(p: &[[f64; 2]], m: &mut LocalMatrix) {
    let measure = if p.len() == 2 {
        (p[1][0] - p[0][0]).abs()
    } else {
        triangle_gradients(p).1
    };
    *m = [[0.0; 3]; 3];
    for (a, row) in m.iter_mut().enumerate().take(p.len()) {
        row[a] = measure / p.len() as f64;
    }
}

pub fn assemble_stiffness(mesh: &Mesh) -> Csr {
    assemble(mesh, local_stiffness)
}

/// Consistent mass matrix, or the diagonal of the lumped one.
pub fn assemble_mass(mesh: &Mesh, lumped: bool) -> Mass {
    if lumped {
        Mass::Lumped(assemble(mesh, local_lumped_mass).diagonal())
    } else {
        Mass::Consistent(assemble(mesh, local_mass))
    }
}

#[derive(Debug, Clone)]
pub enum Mass {
    Consistent(Csr),
    Lumped(Vec<f64>),
}

impl Mass {
    pub fn is_lumped(&self) -> bool {
        matches!(self, Mass::Lumped(_))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Mass::Consistent(m) => m.matvec(x),
            Mass::Lumped(d) => d.iter().zip(x).map(|(d, x)| d * x).collect(),
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        match self {
            Mass::Consistent(m) => m.quad_form(x),
            Mass::Lumped(d) => crate::quadrature::accurate_sum(d.iter().zip(x).map(|(d, x)| d * x * x)),
        }
    }

    pub fn to_csr(&self) -> Csr {
        match self {
            Mass::Consistent(m) => m.clone(),
            Mass::Lumped(d) => Csr::from_diagonal(d),
        }
    }
}

/// Stiffness and mass matrices on one mesh.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub stiffness: Csr,
    pub mass: Mass,
}

impl OperatorPair {
    pub fn new(mesh: &Mesh, lumped: bool) -> Self {
        OperatorPair {
            stiffness: assemble_stiffness(mesh),
            mass: assemble_mass(mesh, lumped),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, SpacingRule};

    #[test]
    fn stiffness_1d_rows() {
        let m = build_mesh(1, 4, SpacingRule::Standard).unwrap();
        let a = assemble_stiffness(&m);
        assert_eq!((a.get(1, 0), a.get(1, 1), a.get(1, 2)), (-4.0, 8.0, -4.0));
        let m = build_mesh(1, 2, SpacingRule::Standard).unwrap();
        assert_eq!(assemble_stiffness(&m).get(0, 0), 4.0);
    }

    #[test]
    fn stiffness_2d_is_five_point() {
        let m = build_mesh(2, 4, SpacingRule::Standard).unwrap();
        let a = assemble_stiffness(&m);
        let c = m.grid_dof(2, 2);
        let at = |i, j| a.get(c, m.grid_dof(i, j));
        assert!((at(2, 2) - 4.0).abs() < 1e-14);
        for (i, j) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
            assert!((at(i, j) + 1.0).abs() < 1e-14);
        }
        for (i, j) in [(1, 1), (3, 3), (1, 3), (3, 1)] {
            assert!(at(i, j).abs() < 1e-14);
        }
        assert!(a.is_symmetric());
    }

    #[test]
    fn mass_entries() {
        let m = build_mesh(1, 4, SpacingRule::Standard).unwrap();
        let Mass::Consistent(mc) = assemble_mass(&m, false) else { unreachable!() };
        assert!((mc.get(1, 1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((mc.get(1, 0) - 1.0 / 24.0).abs() < 1e-15);
        let Mass::Lumped(d) = assemble_mass(&m, true) else { unreachable!() };
        assert!(d.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let m = build_mesh(2, 8, SpacingRule::Standard).unwrap();
        let Mass::Lumped(d) = assemble_mass(&m, true) else { unreachable!() };
        assert!(d.iter().all(|&v| (v - 1.0 / 64.0).abs() < 1e-16));
    }
}
