//! Numerical estimate of the homogenized matrix from a finite block of the
//! medium (representative volume element).
//!
//! For each direction `p` the corrector `phi` solves
//! `-div(a (p + grad phi)) = 0` on `(0, L)^2`, and column `p` of the
//! estimate is the averaged flux `L^-2 ∫ a (p + grad phi)`.

use std::sync::Arc;

use serde::Serialize;

use super::{CheckerboardField, HomogenizedMatrix};
use crate::assembly::{assemble_stiffness, build_pattern, element_geometry};
use crate::error::{Error, Result};
use crate::mesh::build_mesh;
use crate::sparse::{LinearSolver, PreparedSolver};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RveBoundary {
    /// `phi = 0` on the boundary of the block (affine Dirichlet data).
    #[default]
    DirichletAffine,
    /// `phi` periodic on the block, pinned at one vertex.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RveOptions {
    /// Refinement level of the cell-problem mesh.
    pub k: u32,
    pub boundary: RveBoundary,
    pub solver: LinearSolver,
}

impl Default for RveOptions {
    fn default() -> Self {
        RveOptions {
            k: 3,
            boundary: RveBoundary::DirichletAffine,
            solver: LinearSolver::Cholesky,
        }
    }
}

/// Estimates the homogenized matrix from the field on `(0, L)^2`, `L = field.r()`.
///
/// The raw estimate is symmetrized as `(A + A^T) / 2`.
pub fn rve_estimate_abar(field: &CheckerboardField, opts: &RveOptions) -> Result<HomogenizedMatrix> {
    let l = field.r();
    if l < 8 {
        return Err(Error::invalid(format!("RVE block needs L >= 8, got {l}")));
    }
    let mesh = build_mesh(l, opts.k)?;
    let m = mesh.squares_per_side();

    let (vertex_dof, n): (Vec<Option<usize>>, usize) = match opts.boundary {
        RveBoundary::DirichletAffine => {
            let dofs = mesh.interior_dof_map();
            ((0..mesh.n_vertices()).map(|v| dofs.dof_of_vertex(v)).collect(), dofs.n_dofs())
        }
        RveBoundary::Periodic => {
            let map = (0..mesh.n_vertices())
                .map(|v| {
                    let (i, j) = (v % mesh.n_side(), v / mesh.n_side());
                    let periodic = (j % m) * m + (i % m);
                    periodic.checked_sub(1)
                })
                .collect();
            (map, m * m - 1)
        }
    };

    let coeff: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| field.coeff_of_cell(mesh.cell_of_triangle(t)?))
        .collect::<Result<_>>()?;
    let pattern = Arc::new(build_pattern(&mesh, &vertex_dof, n)?);
    let stiffness = assemble_stiffness(&mesh, &vertex_dof, &pattern, |t| [[coeff[t], 0.0], [0.0, coeff[t]]])?;
    let solver = PreparedSolver::new(stiffness, &opts.solver)?;

    let mut estimate = [[0.0; 2]; 2];
    for (dir, p) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        let mut rhs = vec![0.0; n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let (grads, area) = element_geometry(&mesh.triangle_coords(t))?;
            for (a, &v) in tri.iter().enumerate() {
                if let Some(d) = vertex_dof[v] {
                    rhs[d] -= coeff[t] * area * (p[0] * grads[a][0] + p[1] * grads[a][1]);
                }
            }
        }
        let phi = solver.solve(&rhs)?;

        let mut flux = [0.0; 2];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let (grads, area) = element_geometry(&mesh.triangle_coords(t))?;
            let mut g = p;
            for (a, &v) in tri.iter().enumerate() {
                if let Some(d) = vertex_dof[v] {
                    g[0] += phi[d] * grads[a][0];
                    g[1] += phi[d] * grads[a][1];
                }
            }
            flux[0] += coeff[t] * area * g[0];
            flux[1] += coeff[t] * area * g[1];
        }
        let volume = (l * l) as f64;
        estimate[0][dir] = flux[0] / volume;
        estimate[1][dir] = flux[1] / volume;
    }

    let off = 0.5 * (estimate[0][1] + estimate[1][0]);
    HomogenizedMatrix::new([[estimate[0][0], off], [off, estimate[1][1]]])
}
