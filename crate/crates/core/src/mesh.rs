//! Structured triangulations of axis-aligned rectangles with tagged
//! boundary facets.
//!
//! Meshes are immutable after construction. Every builder validates cell
//! orientation (positive signed area), edge manifoldness (interior edges
//! shared by exactly two cells, boundary edges by one), and that the cells
//! tile the requested rectangle.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Boundary region classification carried by each boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionTag {
    Dirichlet(u32),
    Neumann(u32),
}

impl RegionTag {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, RegionTag::Dirichlet(_))
    }
}

/// Which way the squares of a structured mesh are split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Diagonal from the bottom-left to the top-right corner.
    #[default]
    Right,
    /// Diagonal from the bottom-right to the top-left corner.
    Left,
}

/// Boundary edge with its region tag. The vertex pair is stored in the
/// owning cell's counter-clockwise order, so the outward unit normal is
/// `(dy, -dx) / len` for `(dx, dy) = b - a`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFacet {
    pub vertices: [usize; 2],
    pub tag: RegionTag,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh resolution must be at least 1, got {0}")]
    ZeroResolution(usize),
    #[error("cell {cell} has non-positive signed area {area}")]
    BadOrientation { cell: usize, area: f64 },
    #[error("edge ({0}, {1}) is shared by {2} cells; the mesh is not manifold")]
    NonManifoldEdge(usize, usize, usize),
    #[error("boundary facet with midpoint ({0}, {1}) matches no tagging predicate")]
    UntaggedFacet(f64, f64),
    #[error("cells tile area {tiled} but the domain has area {expected}")]
    BadTiling { tiled: f64, expected: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Conforming triangle mesh of a rectangle.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Vertex triples in counter-clockwise order.
    pub cells: Vec<[usize; 3]>,
    pub boundary_facets: Vec<BoundaryFacet>,
}

/// Predicate on a facet midpoint paired with the tag to apply.
pub type TagRule<'a> = (&'a dyn Fn([f64; 2]) -> bool, RegionTag);

impl TriMesh {
    /// Structured triangulation of the unit square with `2 n^2` cells.
    ///
    /// All boundary facets start tagged `Dirichlet(0)`; retag with
    /// [`TriMesh::tag_boundary`].
    pub fn unit_square(n: usize, diag: Diagonal) -> Result<Self, MeshError> {
        Self::rectangle(n, n, [0.0, 1.0], [0.0, 1.0], diag)
    }

    /// Structured triangulation of `[x0, x1] x [y0, y1]` with `nx * ny`
    /// squares, each split into two triangles.
    pub fn rectangle(
        nx: usize,
        ny: usize,
        x_range: [f64; 2],
        y_range: [f64; 2],
        diag: Diagonal,
    ) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::ZeroResolution(nx.min(ny)));
        }
        let [x0, x1] = x_range;
        let [y0, y1] = y_range;
        let dx = (x1 - x0) / nx as f64;
        let dy = (y1 - y0) / ny as f64;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([x0 + i as f64 * dx, y0 + j as f64 * dy]);
            }
        }

        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let a = vid(i, j);
                let b = vid(i + 1, j);
                let c = vid(i + 1, j + 1);
                let d = vid(i, j + 1);
                match diag {
                    Diagonal::Right => {
                        cells.push([a, b, c]);
                        cells.push([a, c, d]);
                    }
                    Diagonal::Left => {
                        cells.push([a, b, d]);
                        cells.push([b, c, d]);
                    }
                }
            }
        }

        let mesh = Self::from_raw(vertices, cells, RegionTag::Dirichlet(0))?;
        mesh.check_tiling((x1 - x0) * (y1 - y0))?;
        Ok(mesh)
    }

    /// Build a mesh from raw vertex and cell arrays, classifying edges and
    /// tagging every boundary facet with `default_tag`.
    pub fn from_raw(
        vertices: Vec<[f64; 2]>,
        cells: Vec<[usize; 3]>,
        default_tag: RegionTag,
    ) -> Result<Self, MeshError> {
        let mut mesh = Self {
            vertices,
            cells,
            boundary_facets: Vec::new(),
        };
        for (k, _) in mesh.cells.iter().enumerate() {
            let area = mesh.cell_area(k);
            if area <= 0.0 {
                return Err(MeshError::BadOrientation { cell: k, area });
            }
        }

        // Count cells per undirected edge and remember the cell-ordered
        // orientation of the first occurrence.
        let mut edge_use: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
        let mut order = Vec::new();
        for cell in &mesh.cells {
            for e in 0..3 {
                let a = cell[e];
                let b = cell[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                match edge_use.get_mut(&key) {
                    Some(entry) => entry.0 += 1,
                    None => {
                        edge_use.insert(key, (1, [a, b]));
                        order.push(key);
                    }
                }
            }
        }
        for &key in &order {
            let (count, oriented) = edge_use[&key];
            match count {
                1 => mesh.boundary_facets.push(BoundaryFacet {
                    vertices: oriented,
                    tag: default_tag,
                }),
                2 => {}
                c => return Err(MeshError::NonManifoldEdge(key.0, key.1, c)),
            }
        }
        Ok(mesh)
    }

    /// Retag all boundary facets by midpoint predicates, first match wins.
    ///
    /// Fails if some facet matches no rule, leaving no facet untagged.
    pub fn tag_boundary(mut self, rules: &[TagRule]) -> Result<Self, MeshError> {
        for facet in &mut self.boundary_facets {
            let [a, b] = facet.vertices;
            let mid = [
                0.5 * (self.vertices[a][0] + self.vertices[b][0]),
                0.5 * (self.vertices[a][1] + self.vertices[b][1]),
            ];
            let tag = rules
                .iter()
                .find(|(pred, _)| pred(mid))
                .map(|(_, tag)| *tag)
                .ok_or(MeshError::UntaggedFacet(mid[0], mid[1]))?;
            facet.tag = tag;
        }
        Ok(self)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_vertices(&self, k: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.cells[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of cell `k`; positive for counter-clockwise orientation.
    pub fn cell_area(&self, k: usize) -> f64 {
        let [p, q, r] = self.cell_vertices(k);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    /// Largest edge length over all cells.
    pub fn diameter(&self) -> f64 {
        let mut h: f64 = 0.0;
        for k in 0..self.num_cells() {
            let v = self.cell_vertices(k);
            for e in 0..3 {
                let a = v[e];
                let b = v[(e + 1) % 3];
                h = h.max(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Outward unit normal and length of a boundary facet.
    pub fn facet_normal_and_length(&self, facet: &BoundaryFacet) -> ([f64; 2], f64) {
        let a = self.vertices[facet.vertices[0]];
        let b = self.vertices[facet.vertices[1]];
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        ([d[1] / len, -d[0] / len], len)
    }

    fn check_tiling(&self, expected: f64) -> Result<(), MeshError> {
        let tiled: f64 = (0..self.num_cells()).map(|k| self.cell_area(k)).sum();
        if (tiled - expected).abs() > 1e-13 * expected.max(1.0) {
            return Err(MeshError::BadTiling { tiled, expected });
        }
        Ok(())
    }

    /// Undirected edges of the mesh in a deterministic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = BTreeMap::new();
        let mut out = Vec::new();
        for cell in &self.cells {
            for e in 0..3 {
                let a = cell[e];
                let b = cell[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    /// Write the mesh (and optional per-point / per-cell data arrays) as a
    /// legacy ASCII VTK 2.0 unstructured grid.
    ///
    /// `point_scalars` and `cell_scalars` must match the vertex and cell
    /// counts; `cell_vectors` holds `[vx, vy]` pairs per cell, padded with a
    /// zero z-component on output.
    pub fn write_vtk(
        &self,
        path: &Path,
        title: &str,
        point_scalars: &[(&str, &[f64])],
        cell_scalars: &[(&str, &[f64])],
        cell_vectors: &[(&str, &[[f64; 2]])],
    ) -> Result<(), MeshError> {
        let mut out = String::new();
        out.push_str("# vtk DataFile Version 2.0\n");
        out.push_str(title);
        out.push('\n');
        out.push_str("ASCII\n");
        out.push_str("DATASET UNSTRUCTURED_GRID\n");
        out.push_str(&format!("POINTS {} double\n", self.num_vertices()));
        for v in &self.vertices {
            out.push_str(&format!("{} {} 0\n", v[0], v[1]));
        }
        out.push_str(&format!(
            "CELLS {} {}\n",
            self.num_cells(),
            4 * self.num_cells()
        ));
        for c in &self.cells {
            out.push_str(&format!("3 {} {} {}\n", c[0], c[1], c[2]));
        }
        out.push_str(&format!("CELL_TYPES {}\n", self.num_cells()));
        for _ in &self.cells {
            out.push_str("5\n");
        }
        if !point_scalars.is_empty() {
            out.push_str(&format!("POINT_DATA {}\n", self.num_vertices()));
            for (name, data) in point_scalars {
                assert_eq!(data.len(), self.num_vertices(), "point data length");
                out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
                for v in *data {
                    out.push_str(&format!("{v}\n"));
                }
            }
        }
        if !cell_scalars.is_empty() || !cell_vectors.is_empty() {
            out.push_str(&format!("CELL_DATA {}\n", self.num_cells()));
            for (name, data) in cell_scalars {
                assert_eq!(data.len(), self.num_cells(), "cell data length");
                out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
                for v in *data {
                    out.push_str(&format!("{v}\n"));
                }
            }
            for (name, data) in cell_vectors {
                assert_eq!(data.len(), self.num_cells(), "cell vector length");
                out.push_str(&format!("VECTORS {name} double\n"));
                for v in *data {
                    out.push_str(&format!("{} {} 0\n", v[0], v[1]));
                }
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = TriMesh::unit_square(1, Diagonal::Right).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.boundary_facets.len(), 4);

        let m = TriMesh::unit_square(8, Diagonal::Right).unwrap();
        assert_eq!(m.num_vertices(), 81);
        assert_eq!(m.num_cells(), 128);
        assert_eq!(m.boundary_facets.len(), 32);
    }

    #[test]
    fn rejects_zero_resolution() {
        assert!(matches!(
            TriMesh::unit_square(0, Diagonal::Right),
            Err(MeshError::ZeroResolution(0))
        ));
    }

    #[test]
    fn cell_areas_tile_the_square() {
        for diag in [Diagonal::Right, Diagonal::Left] {
            let m = TriMesh::unit_square(2, diag).unwrap();
            let total: f64 = (0..m.num_cells()).map(|k| m.cell_area(k)).sum();
            assert!((total - 1.0).abs() < 1e-13);
            assert!((0..m.num_cells()).all(|k| m.cell_area(k) > 0.0));
        }
    }

    #[test]
    fn diameter_of_structured_meshes() {
        for (n, expected) in [
            (1, 2.0f64.sqrt()),
            (8, 2.0f64.sqrt() / 8.0),
            (64, 2.0f64.sqrt() / 64.0),
        ] {
            let m = TriMesh::unit_square(n, Diagonal::Right).unwrap();
            assert!((m.diameter() - expected).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn refinement_halves_diameter() {
        for n in [2usize, 4, 8] {
            let coarse = TriMesh::unit_square(n, Diagonal::Right).unwrap();
            let fine = TriMesh::unit_square(2 * n, Diagonal::Right).unwrap();
            assert_eq!(fine.diameter(), coarse.diameter() / 2.0);
        }
    }

    #[test]
    fn euler_characteristic_of_disc() {
        for n in [1usize, 3, 5] {
            let m = TriMesh::unit_square(n, Diagonal::Left).unwrap();
            let v = m.num_vertices() as i64;
            let e = m.edges().len() as i64;
            let f = m.num_cells() as i64;
            assert_eq!(v - e + f, 1, "n={n}");
        }
    }

    #[test]
    fn tag_boundary_whole_dirichlet() {
        let m = TriMesh::unit_square(4, Diagonal::Right).unwrap();
        let all = |_: [f64; 2]| true;
        let m = m.tag_boundary(&[(&all, RegionTag::Dirichlet(0))]).unwrap();
        assert_eq!(m.boundary_facets.len(), 16);
        assert!(m
            .boundary_facets
            .iter()
            .all(|f| f.tag == RegionTag::Dirichlet(0)));
    }

    #[test]
    fn tag_boundary_left_right_else_neumann() {
        let m = TriMesh::unit_square(4, Diagonal::Right).unwrap();
        let left = |p: [f64; 2]| p[0] < 1e-12;
        let right = |p: [f64; 2]| p[0] > 1.0 - 1e-12;
        let rest = |_: [f64; 2]| true;
        let m = m
            .tag_boundary(&[
                (&left, RegionTag::Dirichlet(1)),
                (&right, RegionTag::Dirichlet(2)),
                (&rest, RegionTag::Neumann(0)),
            ])
            .unwrap();
        let count = |tag| m.boundary_facets.iter().filter(|f| f.tag == tag).count();
        assert_eq!(count(RegionTag::Dirichlet(1)), 4);
        assert_eq!(count(RegionTag::Dirichlet(2)), 4);
        assert_eq!(count(RegionTag::Neumann(0)), 8);
    }

    #[test]
    fn tag_boundary_without_coverage_fails() {
        let m = TriMesh::unit_square(2, Diagonal::Right).unwrap();
        let never = |_: [f64; 2]| false;
        assert!(matches!(
            m.tag_boundary(&[(&never, RegionTag::Neumann(0))]),
            Err(MeshError::UntaggedFacet(_, _))
        ));
        let m = TriMesh::unit_square(2, Diagonal::Right).unwrap();
        assert!(matches!(
            m.tag_boundary(&[]),
            Err(MeshError::UntaggedFacet(_, _))
        ));
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = TriMesh::unit_square(2, Diagonal::Right).unwrap();
        for facet in &m.boundary_facets {
            let (n, len) = m.facet_normal_and_length(facet);
            assert!((len - 0.5).abs() < 1e-14);
            let a = m.vertices[facet.vertices[0]];
            let b = m.vertices[facet.vertices[1]];
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            // Stepping outward along the normal must leave the unit square.
            let probe = [mid[0] + 0.01 * n[0], mid[1] + 0.01 * n[1]];
            let outside = probe[0] < 0.0 || probe[0] > 1.0 || probe[1] < 0.0 || probe[1] > 1.0;
            assert!(outside, "normal {n:?} at {mid:?} points inward");
        }
    }

    #[test]
    fn from_raw_rejects_clockwise_cells() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = TriMesh::from_raw(verts, vec![[0, 2, 1]], RegionTag::Dirichlet(0));
        assert!(matches!(err, Err(MeshError::BadOrientation { .. })));
    }

    #[test]
    fn vtk_export_has_legacy_keywords() {
        let dir = std::env::temp_dir().join("smfem_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.vtk");
        let m = TriMesh::unit_square(2, Diagonal::Right).unwrap();
        let point_data: Vec<f64> = (0..m.num_vertices()).map(|i| i as f64).collect();
        let cell_data: Vec<f64> = (0..m.num_cells()).map(|i| i as f64).collect();
        let vectors: Vec<[f64; 2]> = (0..m.num_cells()).map(|_| [1.0, -2.0]).collect();
        m.write_vtk(
            &path,
            "test mesh",
            &[("conc", &point_data)],
            &[("rate", &cell_data)],
            &[("vel", &vectors)],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 2.0\n"));
        for keyword in [
            "ASCII",
            "DATASET UNSTRUCTURED_GRID",
            "POINTS 9 double",
            "CELLS 8 32",
            "CELL_TYPES 8",
            "POINT_DATA 9",
            "SCALARS conc double 1",
            "LOOKUP_TABLE default",
            "CELL_DATA 8",
            "VECTORS vel double",
        ] {
            assert!(text.contains(keyword), "missing {keyword}");
        }
    }
}
