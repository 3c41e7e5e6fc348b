//! P1 finite element assembly on the structured mesh.
//!
//! Coefficients are constant per element, so all element integrals are
//! evaluated exactly. Homogeneous Dirichlet conditions are imposed by
//! restricting every matrix to the interior unknowns.

use std::sync::Arc;

use crate::coeff::{CheckerboardField, HomogenizedMatrix};
use crate::error::{Error, Result};
use crate::mesh::{doubled_signed_area, DofMap, StructuredMesh};
use crate::sparse::{CsrPattern, SparseSpd};

/// Gradients of the three barycentric basis functions and the area.
pub fn element_geometry(p: &[[f64; 2]; 3]) -> Result<([[f64; 2]; 3], f64)> {
    let det = doubled_signed_area(p);
    let scale = (p[1][0] - p[0][0]).abs().max((p[2][1] - p[0][1]).abs()).max(
        (p[2][0] - p[0][0]).abs().max((p[1][1] - p[0][1]).abs()),
    );
    if !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
        return Err(Error::DegenerateTriangle { area: 0.5 * det });
    }
    let grads = [
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ];
    Ok((grads, 0.5 * det.abs()))
}

fn local_stiffness(grads: &[[f64; 2]; 3], area: f64, c: &[[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        let cg = [
            c[0][0] * grads[i][0] + c[0][1] * grads[i][1],
            c[1][0] * grads[i][0] + c[1][1] * grads[i][1],
        ];
        for j in 0..3 {
            k[j][i] = area * (grads[j][0] * cg[0] + grads[j][1] * cg[1]);
        }
    }
    k
}

/// `K[i][j] = area * grad(psi_i) . C grad(psi_j)` for constant `C`.
pub fn element_stiffness(p: &[[f64; 2]; 3], coefficient: &[[f64; 2]; 2]) -> Result<[[f64; 3]; 3]> {
    let (grads, area) = element_geometry(p)?;
    Ok(local_stiffness(&grads, area, coefficient))
}

/// Consistent P1 mass matrix `area / 12 * [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn element_mass(p: &[[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let (_, area) = element_geometry(p)?;
    Ok(consistent_mass(area))
}

fn consistent_mass(area: f64) -> [[f64; 3]; 3] {
    let (d, o) = (area / 6.0, area / 12.0);
    [[d, o, o], [o, d, o], [o, o, d]]
}

fn lumped_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 3.0;
    [[d, 0.0, 0.0], [0.0, d, 0.0], [0.0, 0.0, d]]
}

/// CSR pattern coupling every pair of unknowns that share a triangle.
pub(crate) fn build_pattern(
    mesh: &StructuredMesh,
    vertex_dof: &[Option<usize>],
    n: usize,
) -> Result<CsrPattern> {
    let mut row_ptr = vec![0usize; n + 1];
    for tri in mesh.triangles() {
        for &a in tri {
            if let Some(da) = vertex_dof[a] {
                row_ptr[da + 1] += tri.iter().filter(|&&b| vertex_dof[b].is_some()).count();
            }
        }
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let mut fill = row_ptr.clone();
    let mut cols = vec![0usize; row_ptr[n]];
    for tri in mesh.triangles() {
        for &a in tri {
            let Some(da) = vertex_dof[a] else { continue };
            for &b in tri {
                if let Some(db) = vertex_dof[b] {
                    cols[fill[da]] = db;
                    fill[da] += 1;
                }
            }
        }
    }
    let mut compact_ptr = Vec::with_capacity(n + 1);
    compact_ptr.push(0);
    let mut col_idx = Vec::with_capacity(cols.len() / 2);
    for i in 0..n {
        let row = &mut cols[row_ptr[i]..row_ptr[i + 1]];
        row.sort_unstable();
        let start = col_idx.len();
        for &c in row.iter() {
            if col_idx.len() == start || *col_idx.last().unwrap() != c {
                col_idx.push(c);
            }
        }
        compact_ptr.push(col_idx.len());
    }
    CsrPattern::new(n, compact_ptr, col_idx)
}

/// Scatters a local 3x3 matrix into the value array of `pattern`.
fn scatter(
    pattern: &CsrPattern,
    values: &mut [f64],
    dofs: &[Option<usize>; 3],
    local: &[[f64; 3]; 3],
) {
    for a in 0..3 {
        let Some(da) = dofs[a] else { continue };
        for b in 0..3 {
            if let Some(db) = dofs[b] {
                let pos = pattern.position(da, db).expect("element pair in pattern");
                values[pos] += local[a][b];
            }
        }
    }
}

/// Stiffness matrix for an arbitrary vertex-to-unknown map and a per-triangle
/// coefficient matrix.
pub(crate) fn assemble_stiffness(
    mesh: &StructuredMesh,
    vertex_dof: &[Option<usize>],
    pattern: &Arc<CsrPattern>,
    coefficient: impl Fn(usize) -> [[f64; 2]; 2],
) -> Result<SparseSpd> {
    let mut values = vec![0.0; pattern.nnz()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (grads, area) = element_geometry(&mesh.triangle_coords(t))?;
        let local = local_stiffness(&grads, area, &coefficient(t));
        let dofs = tri.map(|v| vertex_dof[v]);
        scatter(pattern, &mut values, &dofs, &local);
    }
    SparseSpd::new(Arc::clone(pattern), values)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Replace the consistent mass matrix by its row-sum lumped diagonal.
    pub lumped_mass: bool,
}

/// Interior-unknown matrices and load vector of one problem instance.
#[derive(Debug, Clone)]
pub struct FemSystem {
    /// Stiffness with the heterogeneous coefficient `a(x)`.
    pub a_het: SparseSpd,
    /// Stiffness with the homogenized matrix.
    pub a_bar: SparseSpd,
    /// Stiffness with the identity; defines the discrete H1 seminorm.
    pub a_id: SparseSpd,
    pub mass: SparseSpd,
    pub load: Vec<f64>,
    pub dof_map: DofMap,
    pub abar: HomogenizedMatrix,
    pub r: usize,
    pub k: u32,
}

impl FemSystem {
    pub fn n_dofs(&self) -> usize {
        self.load.len()
    }
}

/// Assembles the system for `-div(a grad u) = f` with constant `f`.
pub fn assemble(
    mesh: &StructuredMesh,
    field: &CheckerboardField,
    abar: &HomogenizedMatrix,
    f: f64,
) -> Result<FemSystem> {
    assemble_with_options(mesh, field, abar, f, &AssemblyOptions::default())
}

pub fn assemble_with_options(
    mesh: &StructuredMesh,
    field: &CheckerboardField,
    abar: &HomogenizedMatrix,
    f: f64,
    opts: &AssemblyOptions,
) -> Result<FemSystem> {
    if mesh.r() != field.r() {
        return Err(Error::DimensionMismatch {
            expected: mesh.r(),
            actual: field.r(),
        });
    }
    let dof_map = mesh.interior_dof_map();
    let vertex_dof: Vec<Option<usize>> = (0..mesh.n_vertices()).map(|v| dof_map.dof_of_vertex(v)).collect();
    let n = dof_map.n_dofs();
    let pattern = Arc::new(build_pattern(mesh, &vertex_dof, n)?);
    let nnz = pattern.nnz();

    let identity = [[1.0, 0.0], [0.0, 1.0]];
    let mut het = vec![0.0; nnz];
    let mut bar = vec![0.0; nnz];
    let mut id = vec![0.0; nnz];
    let mut mass = vec![0.0; nnz];
    let mut load = vec![0.0; n];

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (grads, area) = element_geometry(&mesh.triangle_coords(t))?;
        let c = field.coeff_of_cell(mesh.cell_of_triangle(t)?)?;
        let dofs = tri.map(|v| vertex_dof[v]);

        let k_id = local_stiffness(&grads, area, &identity);
        let k_het = k_id.map(|row| row.map(|v| c * v));
        let k_bar = local_stiffness(&grads, area, &abar.abar);
        let m_loc = if opts.lumped_mass {
            lumped_mass(area)
        } else {
            consistent_mass(area)
        };
        scatter(&pattern, &mut id, &dofs, &k_id);
        scatter(&pattern, &mut het, &dofs, &k_het);
        scatter(&pattern, &mut bar, &dofs, &k_bar);
        scatter(&pattern, &mut mass, &dofs, &m_loc);
        for d in dofs.into_iter().flatten() {
            load[d] += f * area / 3.0;
        }
    }

    Ok(FemSystem {
        a_het: SparseSpd::new(Arc::clone(&pattern), het)?,
        a_bar: SparseSpd::new(Arc::clone(&pattern), bar)?,
        a_id: SparseSpd::new(Arc::clone(&pattern), id)?,
        mass: SparseSpd::new(pattern, mass)?,
        load,
        dof_map,
        abar: *abar,
        r: mesh.r(),
        k: mesh.k(),
    })
}

/// Discrete H1 seminorm `sqrt(v^T A_id v)`.
pub fn h1_seminorm(system: &FemSystem, v: &[f64]) -> Result<f64> {
    Ok(system.a_id.quad_form(v)?.max(0.0).sqrt())
}

/// Degree-5 seven-point rule on the reference triangle: barycentric
/// coordinates and weights summing to one.
const QUADRATURE: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const W1: f64 = 0.132_394_152_788_506;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

fn quadrature_points(p: &[[f64; 2]; 3]) -> impl Iterator<Item = ([f64; 3], [f64; 2], f64)> + '_ {
    QUADRATURE.iter().map(move |&(bary, w)| {
        let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
        let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
        (bary, [x, y], w)
    })
}

/// Load vector `∫ f psi_i` for a smooth right-hand side, by quadrature.
pub fn load_vector(mesh: &StructuredMesh, dofs: &DofMap, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let mut load = vec![0.0; dofs.n_dofs()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_coords(t);
        let (_, area) = element_geometry(&p)?;
        for (bary, x, w) in quadrature_points(&p) {
            let fx = f(x[0], x[1]) * w * area;
            for (a, &v) in tri.iter().enumerate() {
                if let Some(d) = dofs.dof_of_vertex(v) {
                    load[d] += fx * bary[a];
                }
            }
        }
    }
    Ok(load)
}

/// `||grad(u - u_h)||_{L2}` for a discrete `u_h` (interior values, zero on
/// the boundary) against an exact gradient field, by quadrature.
pub fn h1_error_against(
    mesh: &StructuredMesh,
    dofs: &DofMap,
    u_h: &[f64],
    grad_u: impl Fn(f64, f64) -> [f64; 2],
) -> Result<f64> {
    if u_h.len() != dofs.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: dofs.n_dofs(),
            actual: u_h.len(),
        });
    }
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_coords(t);
        let (grads, area) = element_geometry(&p)?;
        let mut gh = [0.0; 2];
        for (a, &v) in tri.iter().enumerate() {
            if let Some(d) = dofs.dof_of_vertex(v) {
                gh[0] += u_h[d] * grads[a][0];
                gh[1] += u_h[d] * grads[a][1];
            }
        }
        for (_, x, w) in quadrature_points(&p) {
            let g = grad_u(x[0], x[1]);
            total += w * area * ((g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2));
        }
    }
    Ok(total.sqrt())
}
