//! Finite element spaces on triangle meshes: continuous scalar Lagrange
//! spaces of order `m` for concentrations and discontinuous vector spaces of
//! order `m-1` for velocities, together with fields, interpolation, exact
//! gradient transfer, and norm evaluation.
//!
//! The pairing is chosen so that the gradient of any continuous field lies
//! exactly in the discontinuous vector space, which is what transfers the
//! coercivity and inf-sup structure of the continuous problem to the
//! discrete one.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{solve_dense, DenseMat};
use crate::mesh::{RegionTag, TriMesh};
use crate::quadrature::Quadrature;

#[derive(Debug, Error)]
pub enum FespaceError {
    #[error("polynomial order {0} is not supported (orders 1 and 2 are)")]
    UnsupportedOrder(usize),
    #[error("discontinuous vector order {0} is not supported (orders 0 and 1 are)")]
    UnsupportedDgOrder(usize),
    #[error("operation requires a {expected} space, got {got}")]
    KindMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("fields live on different spaces")]
    SpaceMismatch,
    #[error("function is not finite at node ({0}, {1})")]
    NonFiniteValue(f64, f64),
    #[error("coefficient vector has {got} entries, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },
}

/// What a [`FiniteSpace`] discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Continuous scalar Lagrange space of order `m`.
    ContinuousScalar { order: usize },
    /// Cell-local vector space of order `m - 1` with two components.
    DiscontinuousVector { order: usize },
}

impl SpaceKind {
    fn name(&self) -> &'static str {
        match self {
            SpaceKind::ContinuousScalar { .. } => "continuous scalar",
            SpaceKind::DiscontinuousVector { .. } => "discontinuous vector",
        }
    }
}

/// Scalar Lagrange basis of a given order on the reference triangle, in
/// barycentric coordinates `(l0, l1, l2)`.
pub fn scalar_basis_count(order: usize) -> usize {
    match order {
        0 => 1,
        1 => 3,
        2 => 6,
        _ => unreachable!("orders are validated at space construction"),
    }
}

pub fn scalar_basis_value(order: usize, a: usize, lam: [f64; 3]) -> f64 {
    match (order, a) {
        (0, 0) => 1.0,
        (1, i) => lam[i],
        (2, i) if i < 3 => lam[i] * (2.0 * lam[i] - 1.0),
        (2, 3) => 4.0 * lam[0] * lam[1],
        (2, 4) => 4.0 * lam[1] * lam[2],
        (2, 5) => 4.0 * lam[2] * lam[0],
        _ => unreachable!("basis index {a} out of range for order {order}"),
    }
}

/// Gradient of the scalar basis in reference coordinates `(x, y)` where
/// `l0 = 1 - x - y`, `l1 = x`, `l2 = y`.
pub fn scalar_basis_ref_grad(order: usize, a: usize, lam: [f64; 3]) -> [f64; 2] {
    const GL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    match (order, a) {
        (0, 0) => [0.0, 0.0],
        (1, i) => GL[i],
        (2, i) if i < 3 => {
            let f = 4.0 * lam[i] - 1.0;
            [f * GL[i][0], f * GL[i][1]]
        }
        (2, 3) => edge_grad(lam, 0, 1),
        (2, 4) => edge_grad(lam, 1, 2),
        (2, 5) => edge_grad(lam, 2, 0),
        _ => unreachable!("basis index {a} out of range for order {order}"),
    }
}

fn edge_grad(lam: [f64; 3], i: usize, j: usize) -> [f64; 2] {
    const GL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    [
        4.0 * (lam[j] * GL[i][0] + lam[i] * GL[j][0]),
        4.0 * (lam[j] * GL[i][1] + lam[i] * GL[j][1]),
    ]
}

/// Trace of the scalar basis on a facet, parametrized by `t in [0, 1]` from
/// the first to the second facet node. Index order: first vertex, second
/// vertex, then (order 2 only) the midpoint node.
pub fn facet_basis_value(order: usize, a: usize, t: f64) -> f64 {
    match (order, a) {
        (1, 0) => 1.0 - t,
        (1, 1) => t,
        (2, 0) => (1.0 - t) * (1.0 - 2.0 * t),
        (2, 1) => t * (2.0 * t - 1.0),
        (2, 2) => 4.0 * t * (1.0 - t),
        _ => unreachable!("facet basis index {a} out of range for order {order}"),
    }
}

/// Per-cell affine geometry: Jacobian, its determinant, and the inverse
/// transpose used to push reference gradients to physical space.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    inv_t: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new(mesh: &TriMesh, cell: usize) -> Self {
        let [p0, p1, p2] = mesh.cell_vertices(cell);
        let jac = [
            [p1[0] - p0[0], p2[0] - p0[0]],
            [p1[1] - p0[1], p2[1] - p0[1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Self {
            origin: p0,
            jac,
            det,
            inv_t,
        }
    }

    /// Map barycentric coordinates to physical coordinates.
    pub fn to_physical(&self, lam: [f64; 3]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * lam[1] + self.jac[0][1] * lam[2],
            self.origin[1] + self.jac[1][0] * lam[1] + self.jac[1][1] * lam[2],
        ]
    }

    pub fn physical_grad(&self, ref_grad: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * ref_grad[0] + self.inv_t[0][1] * ref_grad[1],
            self.inv_t[1][0] * ref_grad[0] + self.inv_t[1][1] * ref_grad[1],
        ]
    }
}

/// Basis values and reference gradients tabulated at the points of a
/// quadrature rule; shared by all cells of an affine mesh.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub order: usize,
    /// `values[a][q]`
    pub values: Vec<Vec<f64>>,
    /// `ref_grads[a][q]`
    pub ref_grads: Vec<Vec<[f64; 2]>>,
}

impl BasisTable {
    pub fn tabulate(order: usize, rule: &Quadrature) -> Self {
        let nb = scalar_basis_count(order);
        let values = (0..nb)
            .map(|a| {
                rule.points
                    .iter()
                    .map(|&lam| scalar_basis_value(order, a, lam))
                    .collect()
            })
            .collect();
        let ref_grads = (0..nb)
            .map(|a| {
                rule.points
                    .iter()
                    .map(|&lam| scalar_basis_ref_grad(order, a, lam))
                    .collect()
            })
            .collect();
        Self {
            order,
            values,
            ref_grads,
        }
    }
}

/// A scalar or vector finite element space on a shared mesh.
#[derive(Debug)]
pub struct FiniteSpace {
    mesh: Arc<TriMesh>,
    kind: SpaceKind,
    num_dofs: usize,
    /// Scalar generator dofs per cell (vector components expand these).
    cell_dofs: Vec<Vec<usize>>,
    /// Interpolation node coordinates (continuous spaces only).
    dof_points: Vec<[f64; 2]>,
    /// Boundary dofs per region tag (continuous spaces only), sorted.
    boundary_dofs: BTreeMap<RegionTag, Vec<usize>>,
    /// Facet scalar dofs, aligned with `mesh.boundary_facets` (continuous
    /// spaces only): first vertex, second vertex, then the midpoint node.
    facet_dofs: Vec<Vec<usize>>,
}

impl FiniteSpace {
    /// Continuous scalar Lagrange space of order `m in {1, 2}`.
    pub fn continuous(mesh: Arc<TriMesh>, order: usize) -> Result<Arc<Self>, FespaceError> {
        if order != 1 && order != 2 {
            return Err(FespaceError::UnsupportedOrder(order));
        }
        let nv = mesh.num_vertices();
        let mut dof_points: Vec<[f64; 2]> = mesh.vertices.clone();
        let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        if order == 2 {
            for (idx, (a, b)) in mesh.edges().into_iter().enumerate() {
                edge_index.insert((a, b), idx);
                dof_points.push([
                    0.5 * (mesh.vertices[a][0] + mesh.vertices[b][0]),
                    0.5 * (mesh.vertices[a][1] + mesh.vertices[b][1]),
                ]);
            }
        }
        let num_dofs = dof_points.len();

        let edge_dof = |a: usize, b: usize| nv + edge_index[&(a.min(b), a.max(b))];
        let cell_dofs = mesh
            .cells
            .iter()
            .map(|&[v0, v1, v2]| {
                if order == 1 {
                    vec![v0, v1, v2]
                } else {
                    vec![
                        v0,
                        v1,
                        v2,
                        edge_dof(v0, v1),
                        edge_dof(v1, v2),
                        edge_dof(v2, v0),
                    ]
                }
            })
            .collect();

        let mut boundary_dofs: BTreeMap<RegionTag, Vec<usize>> = BTreeMap::new();
        let mut facet_dofs = Vec::with_capacity(mesh.boundary_facets.len());
        for facet in &mesh.boundary_facets {
            let [a, b] = facet.vertices;
            let mut dofs = vec![a, b];
            if order == 2 {
                dofs.push(edge_dof(a, b));
            }
            let entry = boundary_dofs.entry(facet.tag).or_default();
            entry.extend_from_slice(&dofs);
            facet_dofs.push(dofs);
        }
        for dofs in boundary_dofs.values_mut() {
            dofs.sort_unstable();
            dofs.dedup();
        }

        Ok(Arc::new(Self {
            mesh,
            kind: SpaceKind::ContinuousScalar { order },
            num_dofs,
            cell_dofs,
            dof_points,
            boundary_dofs,
            facet_dofs,
        }))
    }

    /// Discontinuous two-component vector space of order `m - 1 in {0, 1}`.
    ///
    /// Dof layout: cell-major, scalar node within the cell, then component,
    /// i.e. `dof = (cell * nb + node) * 2 + component`.
    pub fn dg_vector(mesh: Arc<TriMesh>, order: usize) -> Result<Arc<Self>, FespaceError> {
        if order > 1 {
            return Err(FespaceError::UnsupportedDgOrder(order));
        }
        let nb = scalar_basis_count(order);
        let cell_dofs = (0..mesh.num_cells())
            .map(|k| (0..nb).map(|a| k * nb + a).collect())
            .collect();
        let num_dofs = mesh.num_cells() * nb * 2;
        Ok(Arc::new(Self {
            mesh,
            kind: SpaceKind::DiscontinuousVector { order },
            num_dofs,
            cell_dofs,
            dof_points: Vec::new(),
            boundary_dofs: BTreeMap::new(),
            facet_dofs: Vec::new(),
        }))
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        match self.kind {
            SpaceKind::ContinuousScalar { order } => order,
            SpaceKind::DiscontinuousVector { order } => order,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    /// Scalar generator dofs of a cell (for vector spaces, expand with
    /// [`FiniteSpace::vector_dof`]).
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell]
    }

    /// Global dof of component `comp` of scalar generator dof `sdof` in a
    /// vector space.
    pub fn vector_dof(&self, sdof: usize, comp: usize) -> usize {
        debug_assert!(matches!(self.kind, SpaceKind::DiscontinuousVector { .. }));
        sdof * 2 + comp
    }

    pub fn dof_point(&self, dof: usize) -> [f64; 2] {
        self.dof_points[dof]
    }

    pub fn boundary_dofs(&self, tag: RegionTag) -> &[usize] {
        self.boundary_dofs
            .get(&tag)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// All dofs lying on Dirichlet-tagged boundary regions, sorted.
    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        let mut dofs: Vec<usize> = self
            .boundary_dofs
            .iter()
            .filter(|(tag, _)| tag.is_dirichlet())
            .flat_map(|(_, d)| d.iter().copied())
            .collect();
        dofs.sort_unstable();
        dofs.dedup();
        dofs
    }

    /// Scalar dofs of boundary facet `facet_idx`, ordered first vertex,
    /// second vertex, then midpoint for order 2.
    pub fn facet_dofs(&self, facet_idx: usize) -> &[usize] {
        &self.facet_dofs[facet_idx]
    }

    fn expect_kind(&self, continuous: bool) -> Result<(), FespaceError> {
        let ok = match self.kind {
            SpaceKind::ContinuousScalar { .. } => continuous,
            SpaceKind::DiscontinuousVector { .. } => !continuous,
        };
        if ok {
            Ok(())
        } else {
            Err(FespaceError::KindMismatch {
                expected: if continuous {
                    "continuous scalar"
                } else {
                    "discontinuous vector"
                },
                got: self.kind.name(),
            })
        }
    }

    /// Nodal interpolation of a scalar function into a continuous space.
    pub fn interpolate_scalar(
        self: &Arc<Self>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Field, FespaceError> {
        self.expect_kind(true)?;
        let mut coeffs = Vec::with_capacity(self.num_dofs);
        for p in &self.dof_points {
            let v = f(p[0], p[1]);
            if !v.is_finite() {
                return Err(FespaceError::NonFiniteValue(p[0], p[1]));
            }
            coeffs.push(v);
        }
        Ok(Field {
            space: Arc::clone(self),
            coeffs,
        })
    }

    /// Nodal interpolation of a vector function into a discontinuous vector
    /// space; order 0 uses the cell centroid, order 1 the cell vertices.
    pub fn interpolate_vector(
        self: &Arc<Self>,
        f: impl Fn(f64, f64) -> [f64; 2],
    ) -> Result<Field, FespaceError> {
        self.expect_kind(false)?;
        let order = self.order();
        let mut coeffs = vec![0.0; self.num_dofs];
        for cell in 0..self.mesh.num_cells() {
            let verts = self.mesh.cell_vertices(cell);
            let nodes: Vec<[f64; 2]> = if order == 0 {
                vec![[
                    (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
                    (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
                ]]
            } else {
                verts.to_vec()
            };
            for (a, node) in nodes.iter().enumerate() {
                let value = f(node[0], node[1]);
                if !value[0].is_finite() || !value[1].is_finite() {
                    return Err(FespaceError::NonFiniteValue(node[0], node[1]));
                }
                let sdof = self.cell_dofs[cell][a];
                coeffs[self.vector_dof(sdof, 0)] = value[0];
                coeffs[self.vector_dof(sdof, 1)] = value[1];
            }
        }
        Ok(Field {
            space: Arc::clone(self),
            coeffs,
        })
    }

    pub fn zero_field(self: &Arc<Self>) -> Field {
        Field {
            space: Arc::clone(self),
            coeffs: vec![0.0; self.num_dofs],
        }
    }

    pub fn field_from_coeffs(self: &Arc<Self>, coeffs: Vec<f64>) -> Result<Field, FespaceError> {
        if coeffs.len() != self.num_dofs {
            return Err(FespaceError::CoefficientLength {
                got: coeffs.len(),
                expected: self.num_dofs,
            });
        }
        Ok(Field {
            space: Arc::clone(self),
            coeffs,
        })
    }
}

/// Coefficient vector over a [`FiniteSpace`].
#[derive(Debug, Clone)]
pub struct Field {
    space: Arc<FiniteSpace>,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    fn check_same_space(&self, other: &Field) -> Result<(), FespaceError> {
        if Arc::ptr_eq(&self.space, &other.space) {
            Ok(())
        } else {
            Err(FespaceError::SpaceMismatch)
        }
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &Field) -> Result<Field, FespaceError> {
        self.check_same_space(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            space: Arc::clone(&self.space),
            coeffs,
        })
    }

    pub fn add_assign(&mut self, other: &Field) -> Result<(), FespaceError> {
        self.check_same_space(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(())
    }

    /// Evaluate a continuous scalar field at a barycentric point of a cell.
    pub fn eval_scalar(&self, cell: usize, lam: [f64; 3]) -> f64 {
        let order = self.space.order();
        self.space
            .cell_dofs(cell)
            .iter()
            .enumerate()
            .map(|(a, &dof)| self.coeffs[dof] * scalar_basis_value(order, a, lam))
            .sum()
    }

    /// Physical gradient of a continuous scalar field at a barycentric point.
    pub fn eval_scalar_grad(&self, cell: usize, lam: [f64; 3], geom: &CellGeometry) -> [f64; 2] {
        let order = self.space.order();
        let mut g = [0.0, 0.0];
        for (a, &dof) in self.space.cell_dofs(cell).iter().enumerate() {
            let rg = scalar_basis_ref_grad(order, a, lam);
            let pg = geom.physical_grad(rg);
            g[0] += self.coeffs[dof] * pg[0];
            g[1] += self.coeffs[dof] * pg[1];
        }
        g
    }

    /// Evaluate a discontinuous vector field at a barycentric point of a cell.
    pub fn eval_vector(&self, cell: usize, lam: [f64; 3]) -> [f64; 2] {
        let order = self.space.order();
        let mut v = [0.0, 0.0];
        for (a, &sdof) in self.space.cell_dofs(cell).iter().enumerate() {
            let phi = scalar_basis_value(order, a, lam);
            v[0] += self.coeffs[self.space.vector_dof(sdof, 0)] * phi;
            v[1] += self.coeffs[self.space.vector_dof(sdof, 1)] * phi;
        }
        v
    }
}

/// Exact representation of the gradient of a continuous field in the paired
/// discontinuous vector space (one order lower, same mesh).
pub fn gradient_field(c: &Field, velocity_space: &Arc<FiniteSpace>) -> Result<Field, FespaceError> {
    c.space().expect_kind(true)?;
    velocity_space.expect_kind(false)?;
    if !Arc::ptr_eq(c.space().mesh(), velocity_space.mesh())
        || velocity_space.order() + 1 != c.space().order()
    {
        return Err(FespaceError::SpaceMismatch);
    }
    let mesh = c.space().mesh();
    let order = velocity_space.order();
    // Nodal points of the target space: centroid for order 0, vertices for
    // order 1. The gradient of a P^m function is P^{m-1} on each cell, so
    // nodal sampling reproduces it exactly.
    let nodes: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let centroid = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
    let mut coeffs = vec![0.0; velocity_space.num_dofs()];
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        let points: &[[f64; 3]] = if order == 0 { &[centroid] } else { &nodes };
        for (a, &lam) in points.iter().enumerate() {
            let g = c.eval_scalar_grad(cell, lam, &geom);
            let sdof = velocity_space.cell_dofs(cell)[a];
            coeffs[velocity_space.vector_dof(sdof, 0)] = g[0];
            coeffs[velocity_space.vector_dof(sdof, 1)] = g[1];
        }
    }
    Ok(Field {
        space: Arc::clone(velocity_space),
        coeffs,
    })
}

/// Exact solution callables used by the error norms.
pub trait ExactSolution {
    fn concentration(&self, species: usize, x: f64, y: f64) -> f64;
    fn concentration_gradient(&self, species: usize, x: f64, y: f64) -> [f64; 2];
    fn velocity(&self, species: usize, x: f64, y: f64) -> [f64; 2];
}

/// L2 norm of a continuous scalar field evaluated by quadrature.
pub fn scalar_l2_norm(field: &Field, degree: usize) -> f64 {
    integrate_scalar(field, degree, |v, _| v * v).sqrt()
}

/// Full H1 norm (L2 plus gradient seminorm) of a continuous scalar field.
pub fn scalar_h1_norm(field: &Field, degree: usize) -> f64 {
    integrate_scalar(field, degree, |v, g| v * v + g[0] * g[0] + g[1] * g[1]).sqrt()
}

/// L2 seminorm of the gradient of a continuous scalar field.
pub fn scalar_grad_l2_norm(field: &Field, degree: usize) -> f64 {
    integrate_scalar(field, degree, |_, g| g[0] * g[0] + g[1] * g[1]).sqrt()
}

fn integrate_scalar(field: &Field, degree: usize, f: impl Fn(f64, [f64; 2]) -> f64) -> f64 {
    let mesh = field.space().mesh();
    let rule = Quadrature::triangle(degree);
    let mut total = 0.0;
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        for (q, &lam) in rule.points.iter().enumerate() {
            let v = field.eval_scalar(cell, lam);
            let g = field.eval_scalar_grad(cell, lam, &geom);
            total += rule.weights[q] * geom.det * f(v, g);
        }
    }
    total
}

/// L2 norm of a discontinuous vector field.
pub fn vector_l2_norm(field: &Field, degree: usize) -> f64 {
    let mesh = field.space().mesh();
    let rule = Quadrature::triangle(degree);
    let mut total = 0.0;
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        for (q, &lam) in rule.points.iter().enumerate() {
            let v = field.eval_vector(cell, lam);
            total += rule.weights[q] * geom.det * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    total.sqrt()
}

/// The three error norms of a discrete solution against exact callables:
/// concentration L2, concentration-gradient L2, and velocity L2, each summed
/// over species in quadrature.
pub fn error_norms(
    c_h: &[Field],
    v_h: &[Field],
    exact: &dyn ExactSolution,
    degree: usize,
) -> (f64, f64, f64) {
    assert_eq!(c_h.len(), v_h.len());
    let mesh = c_h[0].space().mesh();
    let rule = Quadrature::triangle(degree);
    let (mut e1, mut e2, mut e3) = (0.0, 0.0, 0.0);
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        for (q, &lam) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geom.det;
            let p = geom.to_physical(lam);
            for (i, (c_field, v_field)) in c_h.iter().zip(v_h).enumerate() {
                let dc = exact.concentration(i, p[0], p[1]) - c_field.eval_scalar(cell, lam);
                e1 += w * dc * dc;

                let ge = exact.concentration_gradient(i, p[0], p[1]);
                let gh = c_field.eval_scalar_grad(cell, lam, &geom);
                e2 += w * ((ge[0] - gh[0]).powi(2) + (ge[1] - gh[1]).powi(2));

                let ve = exact.velocity(i, p[0], p[1]);
                let vh = v_field.eval_vector(cell, lam);
                e3 += w * ((ve[0] - vh[0]).powi(2) + (ve[1] - vh[1]).powi(2));
            }
        }
    }
    (e1.sqrt(), e2.sqrt(), e3.sqrt())
}

/// L2 norm of the mass-flux defect `sum_j M_j c_jh v_jh - u`.
pub fn mass_flux_error(
    c_h: &[Field],
    v_h: &[Field],
    molar_masses: &[f64],
    u: &dyn Fn(f64, f64) -> [f64; 2],
    degree: usize,
) -> f64 {
    assert_eq!(c_h.len(), v_h.len());
    let mesh = c_h[0].space().mesh();
    let rule = Quadrature::triangle(degree);
    let mut total = 0.0;
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        for (q, &lam) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geom.det;
            let p = geom.to_physical(lam);
            let mut flux = [0.0f64, 0.0];
            for (i, (c_field, v_field)) in c_h.iter().zip(v_h).enumerate() {
                let c = c_field.eval_scalar(cell, lam);
                let v = v_field.eval_vector(cell, lam);
                flux[0] += molar_masses[i] * c * v[0];
                flux[1] += molar_masses[i] * c * v[1];
            }
            let ue = u(p[0], p[1]);
            total += w * ((flux[0] - ue[0]).powi(2) + (flux[1] - ue[1]).powi(2));
        }
    }
    total.sqrt()
}

/// Per-cell affine reconstruction of a P1 field by an independent 3x3 solve;
/// used as the oracle for [`gradient_field`] in tests.
pub fn p1_cell_gradient_by_solve(field: &Field, cell: usize) -> [f64; 2] {
    let mesh = field.space().mesh();
    let verts = mesh.cell_vertices(cell);
    let dofs = field.space().cell_dofs(cell);
    let a = DenseMat::from_rows(&[
        &[1.0, verts[0][0], verts[0][1]],
        &[1.0, verts[1][0], verts[1][1]],
        &[1.0, verts[2][0], verts[2][1]],
    ]);
    let b = [
        field.coeffs[dofs[0]],
        field.coeffs[dofs[1]],
        field.coeffs[dofs[2]],
    ];
    let sol = solve_dense(&a, &b).expect("nondegenerate cell");
    [sol[1], sol[2]]
}
