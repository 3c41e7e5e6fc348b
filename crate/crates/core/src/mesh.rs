//! Structured P1 triangulation of the square `(0, r)^2`.
//!
//! Every unit cell `z + [0,1)^2` is cut into `2^k x 2^k` fine squares of side
//! `h = 2^-k`, and every fine square is split along its lower-left to
//! upper-right diagonal. Triangles therefore never straddle an integer
//! gridline, so a cellwise constant coefficient is constant on each element.
//!
//! Vertex `(i, j)` sits at `(i h, j h)` with lexicographic index
//! `j * n_side + i`.

use std::io::Write;

use crate::error::{Error, Result};

/// Triangulated square with uniform refinement level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    r: usize,
    k: u32,
    h: f64,
    n_side: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_mask: Vec<bool>,
}

/// Builds the mesh of `(0, r)^2` at refinement level `k`.
pub fn build_mesh(r: usize, k: u32) -> Result<StructuredMesh> {
    StructuredMesh::new(r, k)
}

impl StructuredMesh {
    pub fn new(r: usize, k: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("mesh side length r must be at least 1"));
        }
        let too_large = || Error::MeshTooLarge { r, k };
        let per_cell = 1usize.checked_shl(k).filter(|_| k < 32).ok_or_else(too_large)?;
        let squares = r.checked_mul(per_cell).ok_or_else(too_large)?;
        let n_side = squares.checked_add(1).ok_or_else(too_large)?;
        let n_vertices = n_side.checked_mul(n_side).ok_or_else(too_large)?;
        let n_triangles = squares
            .checked_mul(squares)
            .and_then(|s| s.checked_mul(2))
            .ok_or_else(too_large)?;
        // Coordinates must stay exactly representable.
        if n_side as u64 >= 1 << 52 {
            return Err(too_large());
        }

        let h = 1.0 / per_cell as f64;
        let mut vertices = Vec::with_capacity(n_vertices);
        let mut boundary_mask = Vec::with_capacity(n_vertices);
        for j in 0..n_side {
            for i in 0..n_side {
                vertices.push([i as f64 * h, j as f64 * h]);
                boundary_mask.push(i == 0 || j == 0 || i == squares || j == squares);
            }
        }

        let mut triangles = Vec::with_capacity(n_triangles);
        for j in 0..squares {
            for i in 0..squares {
                let v00 = j * n_side + i;
                let v10 = v00 + 1;
                let v01 = v00 + n_side;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        Ok(StructuredMesh {
            r,
            k,
            h,
            n_side,
            vertices,
            triangles,
            boundary_mask,
        })
    }

    /// Side length of the domain in unit cells.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Refinement level.
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Mesh size `2^-k`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Vertices per side, `r 2^k + 1`.
    pub fn n_side(&self) -> usize {
        self.n_side
    }

    /// Fine squares per side, `r 2^k`.
    pub fn squares_per_side(&self) -> usize {
        self.n_side - 1
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Lexicographic index of grid vertex `(i, j)`.
    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * self.n_side + i
    }

    /// Corner coordinates of triangle `t`, in counterclockwise order.
    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unit cell `z` containing triangle `t`.
    ///
    /// Equal to the floor of the centroid; computed from the fine-square
    /// index so it is exact.
    pub fn cell_of_triangle(&self, t: usize) -> Result<(usize, usize)> {
        if t >= self.triangles.len() {
            return Err(Error::OutOfRange {
                index: t,
                len: self.triangles.len(),
            });
        }
        let square = t / 2;
        let m = self.squares_per_side();
        let (i, j) = (square % m, square / m);
        Ok((i >> self.k, j >> self.k))
    }

    /// Bijection between interior vertices and dense unknown indices.
    pub fn interior_dof_map(&self) -> DofMap {
        let mut vertex_to_dof = vec![None; self.vertices.len()];
        let mut dof_to_vertex = Vec::with_capacity(self.n_side.saturating_sub(2).pow(2));
        for (v, &on_boundary) in self.boundary_mask.iter().enumerate() {
            if !on_boundary {
                vertex_to_dof[v] = Some(dof_to_vertex.len());
                dof_to_vertex.push(v);
            }
        }
        DofMap {
            vertex_to_dof,
            dof_to_vertex,
        }
    }

    /// Plain-text listing of vertices and triangles for inspection.
    ///
    /// Format: a `vertices N` header followed by `x y boundary` lines, then a
    /// `triangles M` header followed by `a b c` lines.
    pub fn write_listing<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "vertices {}", self.vertices.len())?;
        for (p, &b) in self.vertices.iter().zip(&self.boundary_mask) {
            writeln!(out, "{} {} {}", p[0], p[1], u8::from(b))?;
        }
        writeln!(out, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Twice the signed area of the triangle `(p0, p1, p2)`.
pub(crate) fn doubled_signed_area(p: &[[f64; 2]; 3]) -> f64 {
    (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])
}

/// Map between mesh vertices and the unknowns of the Dirichlet-eliminated
/// system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    vertex_to_dof: Vec<Option<usize>>,
    dof_to_vertex: Vec<usize>,
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        self.dof_to_vertex.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.vertex_to_dof.get(v).copied().flatten()
    }

    pub fn vertex_of_dof(&self, d: usize) -> usize {
        self.dof_to_vertex[d]
    }

    pub fn dof_to_vertex(&self) -> &[usize] {
        &self.dof_to_vertex
    }

    /// Extends an interior vector by zero to all mesh vertices.
    pub fn extend_by_zero(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.vertex_to_dof.len()];
        for (d, &v) in self.dof_to_vertex.iter().enumerate() {
            full[v] = interior[d];
        }
        full
    }

    /// Restricts a vertex vector to the interior unknowns.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.dof_to_vertex.iter().map(|&v| full[v]).collect()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    #[test]
    fn single_cell() {
        let m = build_mesh(1, 0).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert!(m.boundary_mask().iter().all(|&b| b));
        assert_eq!(m.cell_of_triangle(0).unwrap(), (0, 0));
        assert_eq!(m.interior_dof_map().n_dofs(), 0);
    }

    #[test]
    fn counts() {
        let m = build_mesh(2, 1).unwrap();
        assert_eq!(m.n_vertices(), 25);
        assert_eq!(m.n_triangles(), 32);
        assert_eq!(m.interior_dof_map().n_dofs(), 9);

        let m = build_mesh(2, 0).unwrap();
        let dofs = m.interior_dof_map();
        assert_eq!(dofs.n_dofs(), 1);
        assert_eq!(m.vertices()[dofs.vertex_of_dof(0)], [1.0, 1.0]);
    }

    #[test]
    fn full_scale_counts() {
        let m = build_mesh(100, 3).unwrap();
        assert_eq!(m.n_vertices(), 641_601);
        assert_eq!(m.n_triangles(), 1_280_000);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(build_mesh(0, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_mesh(usize::MAX / 2, 3), Err(Error::MeshTooLarge { .. })));
        assert!(matches!(build_mesh(4, 40), Err(Error::MeshTooLarge { .. })));
    }

    #[test]
    fn invariants() {
        for (r, k) in [(1, 0), (2, 1), (3, 2), (5, 1)] {
            let m = build_mesh(r, k).unwrap();
            let h = m.h();
            let squares = r << k;
            assert_eq!(m.n_triangles(), 2 * squares * squares);
            assert_eq!(
                m.boundary_mask().iter().filter(|&&b| b).count(),
                4 * (m.n_side() - 1)
            );
            let mut total = 0.0;
            for t in 0..m.n_triangles() {
                let p = m.triangle_coords(t);
                let area = 0.5 * doubled_signed_area(&p);
                assert_eq!(area, h * h / 2.0);
                total += area;
                let (cx, cy) = m.cell_of_triangle(t).unwrap();
                for q in p {
                    assert!(q[0] >= cx as f64 && q[0] <= cx as f64 + 1.0);
                    assert!(q[1] >= cy as f64 && q[1] <= cy as f64 + 1.0);
                }
            }
            assert!((total - (r * r) as f64).abs() <= 1e-12 * (r * r) as f64);
            assert_eq!(m.interior_dof_map().n_dofs(), (m.n_side() - 2).pow(2));
        }
    }

    #[test]
    fn cell_equals_centroid_floor() {
        let m = build_mesh(2, 1).unwrap();
        // Upper triangle of fine square (2, 0): (1,0), (1.5,0.5), (1,0.5).
        let mut found = false;
        for t in 0..m.n_triangles() {
            let p = m.triangle_coords(t);
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            let z = m.cell_of_triangle(t).unwrap();
            assert_eq!(z, (c[0].floor() as usize, c[1].floor() as usize));
            if (c[0] - 7.0 / 6.0).abs() < 1e-12 && (c[1] - 1.0 / 3.0).abs() < 1e-12 {
                assert_eq!(z, (1, 0));
                found = true;
            }
        }
        assert!(found);
        assert!(m.cell_of_triangle(m.n_triangles()).is_err());
    }

    #[test]
    fn refined_cell_maps_back() {
        let m = build_mesh(4, 3).unwrap();
        let inside: Vec<usize> = (0..m.n_triangles())
            .filter(|&t| {
                m.triangle_coords(t)
                    .iter()
                    .all(|p| (3.0..=4.0).contains(&p[0]) && (2.0..=3.0).contains(&p[1]))
            })
            .collect();
        assert_eq!(inside.len(), 2 * 64);
        for t in inside {
            assert_eq!(m.cell_of_triangle(t).unwrap(), (3, 2));
        }
    }

    #[test]
    fn edge_sharing() {
        let m = build_mesh(3, 1).unwrap();
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in m.triangles() {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let on_boundary = |v: usize| m.boundary_mask()[v];
        let coords = m.vertices();
        for ((a, b), count) in edges {
            let boundary_edge = on_boundary(a)
                && on_boundary(b)
                && (coords[a][0] == coords[b][0] || coords[a][1] == coords[b][1])
                && (coords[a][0] == coords[b][0] && (coords[a][0] == 0.0 || coords[a][0] == 3.0)
                    || coords[a][1] == coords[b][1] && (coords[a][1] == 0.0 || coords[a][1] == 3.0));
            assert_eq!(count, if boundary_edge { 1 } else { 2 }, "edge {a}-{b}");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(build_mesh(3, 2).unwrap(), build_mesh(3, 2).unwrap());
    }

    #[test]
    fn dof_map_roundtrip() {
        let m = build_mesh(2, 1).unwrap();
        let dofs = m.interior_dof_map();
        for d in 0..dofs.n_dofs() {
            let v = dofs.vertex_of_dof(d);
            assert!(!m.boundary_mask()[v]);
            assert_eq!(dofs.dof_of_vertex(v), Some(d));
        }
        let x: Vec<f64> = (0..dofs.n_dofs()).map(|d| d as f64 + 1.0).collect();
        assert_eq!(dofs.restrict(&dofs.extend_by_zero(&x)), x);
    }

    #[test]
    fn listing_has_all_rows() {
        let m = build_mesh(1, 1).unwrap();
        let mut buf = Vec::new();
        m.write_listing(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + 9 + 8);
        assert!(text.starts_with("vertices 9\n0 0 1\n"));
    }
}
