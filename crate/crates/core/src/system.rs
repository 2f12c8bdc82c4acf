//! Assembly of the linearized saddle-point system.
//!
//! Given the previous concentration iterate `c^k`, one Picard step solves
//!
//! ```text
//! [ A    B ] [ v       ]   [ l - B_full c0 ]
//! [ B_c  0 ] [ c0_hat  ] = [ -(r, w) + (g, w)_Neumann ]
//! ```
//!
//! where `A` integrates the augmented transport matrix against pairs of
//! velocity basis functions, `B` couples velocities to concentration
//! gradients with unit coefficient, and `B_c` carries the frozen coefficient
//! `c^k_i` under the integral. Dirichlet values enter through the lifting
//! field `c0`: the concentration unknowns are restricted to the non-Dirichlet
//! dofs and the product of the full-width gradient coupling with the lifting
//! moves to the right-hand side.
//!
//! `B` and `B_c` are assembled over the same cells with the same quadrature,
//! so they share a sparsity pattern and differ only by the coefficient.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::fespace::{facet_basis_value, BasisTable, CellGeometry, Field, FiniteSpace, SpaceKind};
use crate::quadrature::{gauss_legendre_unit, Quadrature};
use crate::sparse::{CooMat, CsrMat};
use crate::transport::{
    augmented_matrix, PointState, TransportCoefficients, TransportError, DEFAULT_KAPPA_MIN,
};

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Wrap a plain closure as a shareable scalar coefficient function.
pub fn scalar_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

pub fn vector_fn(f: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> VectorFn {
    Arc::new(f)
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(
        "concentration iterate below positivity floor: cell {cell}, species {species}, value {value}"
    )]
    PositivityBreach {
        cell: usize,
        species: usize,
        value: f64,
    },
    #[error("problem data inconsistent: {0}")]
    InconsistentData(String),
    #[error("Dirichlet data sums to {sum} instead of {expected} at dof ({x}, {y})")]
    DirichletSumMismatch {
        sum: f64,
        expected: f64,
        x: f64,
        y: f64,
    },
    #[error("no Dirichlet region in the problem data; a lifting cannot be built")]
    NoDirichletData,
    #[error("expected {expected} fields, got {got}")]
    WrongFieldCount { got: usize, expected: usize },
    #[error("Dirichlet region {0} has no boundary facets with that tag")]
    UnusedDirichletRegion(u32),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Fespace(#[from] crate::fespace::FespaceError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Boundary data, reactions, prescribed mass-flux, and material coefficients
/// for one steady-state diffusion problem.
#[derive(Clone)]
pub struct ProblemData {
    pub coeffs: TransportCoefficients,
    /// Region id -> per-species boundary concentration.
    pub dirichlet: BTreeMap<u32, Vec<ScalarFn>>,
    /// Region id -> per-species normal molar flux.
    pub neumann: BTreeMap<u32, Vec<ScalarFn>>,
    /// Per-species volumetric reaction rate.
    pub reactions: Vec<ScalarFn>,
    /// Prescribed barycentric mass-flux `u`.
    pub mass_flux: VectorFn,
    /// Analytic divergence of `u` when available; otherwise central finite
    /// differences are used in the consistency check.
    pub mass_flux_divergence: Option<ScalarFn>,
    /// Expected constant total concentration.
    pub c_total: f64,
}

impl ProblemData {
    fn div_u(&self, x: f64, y: f64, step: f64) -> f64 {
        match &self.mass_flux_divergence {
            Some(div) => div(x, y),
            None => {
                let u = &self.mass_flux;
                let dx = (u(x + step, y)[0] - u(x - step, y)[0]) / (2.0 * step);
                let dy = (u(x, y + step)[1] - u(x, y - step)[1]) / (2.0 * step);
                dx + dy
            }
        }
    }

    /// Check the compatibility relations that make the problem well posed:
    /// Dirichlet data sums to `c_total`, mass-weighted Neumann fluxes match
    /// `u . n`, and mass-weighted reactions match `div u`.
    ///
    /// With `strict` every violation is an error; otherwise violations are
    /// returned as warnings.
    pub fn validate(
        &self,
        mesh: &crate::mesh::TriMesh,
        order: usize,
        strict: bool,
    ) -> Result<Vec<String>, SystemError> {
        let n = self.coeffs.num_species();
        let mut warnings = Vec::new();
        let fail = |msg: String, warnings: &mut Vec<String>| -> Result<(), SystemError> {
            if strict {
                Err(SystemError::InconsistentData(msg))
            } else {
                warnings.push(msg);
                Ok(())
            }
        };

        let (t_nodes, _) = gauss_legendre_unit(order + 2);
        for facet in &mesh.boundary_facets {
            let a = mesh.vertices[facet.vertices[0]];
            let b = mesh.vertices[facet.vertices[1]];
            match facet.tag {
                crate::mesh::RegionTag::Dirichlet(region) => {
                    let fns = self.dirichlet.get(&region).ok_or_else(|| {
                        SystemError::InconsistentData(format!(
                            "no Dirichlet data for region {region}"
                        ))
                    })?;
                    for &t in &t_nodes {
                        let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                        let sum: f64 = fns.iter().map(|f| f(p[0], p[1])).sum();
                        if (sum - self.c_total).abs() > 1e-12 * self.c_total.abs().max(1.0) {
                            fail(
                                format!(
                                    "Dirichlet data sums to {sum} != {} at ({}, {})",
                                    self.c_total, p[0], p[1]
                                ),
                                &mut warnings,
                            )?;
                        }
                    }
                }
                crate::mesh::RegionTag::Neumann(region) => {
                    let fns = self.neumann.get(&region).ok_or_else(|| {
                        SystemError::InconsistentData(format!(
                            "no Neumann data for region {region}"
                        ))
                    })?;
                    let (normal, _) = mesh.facet_normal_and_length(facet);
                    for &t in &t_nodes {
                        let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                        let sum: f64 = fns
                            .iter()
                            .enumerate()
                            .map(|(i, g)| self.coeffs.molar_masses[i] * g(p[0], p[1]))
                            .sum();
                        let un = {
                            let u = (self.mass_flux)(p[0], p[1]);
                            u[0] * normal[0] + u[1] * normal[1]
                        };
                        if (sum - un).abs() > 1e-12 * un.abs().max(1.0) {
                            fail(
                                format!(
                                    "Neumann data: sum M_i g_i = {sum} but u.n = {un} at ({}, {})",
                                    p[0], p[1]
                                ),
                                &mut warnings,
                            )?;
                        }
                    }
                }
            }
        }

        if self.reactions.len() != n {
            return Err(SystemError::WrongFieldCount {
                got: self.reactions.len(),
                expected: n,
            });
        }
        // Domain width sets the finite-difference step for div u.
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for v in &mesh.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let step = 1e-5 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let rule = Quadrature::triangle(order + 2);
        for cell in 0..mesh.num_cells() {
            let geom = CellGeometry::new(mesh, cell);
            for &lam in &rule.points {
                let p = geom.to_physical(lam);
                let sum: f64 = self
                    .reactions
                    .iter()
                    .enumerate()
                    .map(|(i, r)| self.coeffs.molar_masses[i] * r(p[0], p[1]))
                    .sum();
                let div = self.div_u(p[0], p[1], step);
                if (sum - div).abs() > 1e-10 * div.abs().max(1.0) {
                    fail(
                        format!(
                            "reactions: sum M_i r_i = {sum} but div u = {div} at ({}, {})",
                            p[0], p[1]
                        ),
                        &mut warnings,
                    )?;
                }
            }
        }
        Ok(warnings)
    }
}

/// Assembled saddle-point blocks, right-hand sides, the Dirichlet lifting,
/// and the free concentration dofs.
#[derive(Debug)]
pub struct SaddleSystem {
    /// Velocity-velocity block (symmetric, positive definite for positive
    /// iterates with `gamma > 0`).
    pub a: CsrMat,
    /// Velocity rows by free concentration columns; unit coefficient.
    pub b: CsrMat,
    /// Free concentration rows by velocity columns; coefficient `c^k`.
    pub b_c: CsrMat,
    pub rhs_velocity: Vec<f64>,
    pub rhs_continuity: Vec<f64>,
    pub lifting: Vec<Field>,
    /// Scalar dofs of the concentration space not constrained by Dirichlet
    /// data (shared by all species), ascending.
    pub free_dofs: Vec<usize>,
    pub num_species: usize,
    pub velocity_dofs_per_species: usize,
}

impl SaddleSystem {
    pub fn num_velocity_unknowns(&self) -> usize {
        self.num_species * self.velocity_dofs_per_species
    }

    pub fn num_concentration_unknowns(&self) -> usize {
        self.num_species * self.free_dofs.len()
    }

    pub fn num_unknowns(&self) -> usize {
        self.num_velocity_unknowns() + self.num_concentration_unknowns()
    }

    /// Dump the three blocks in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, dir: &Path) -> Result<(), SystemError> {
        std::fs::create_dir_all(dir)?;
        self.a
            .write_matrix_market(&dir.join("block_a.mtx"), "velocity-velocity block")?;
        self.b
            .write_matrix_market(&dir.join("block_b.mtx"), "velocity-concentration block")?;
        self.b_c
            .write_matrix_market(&dir.join("block_bc.mtx"), "continuity block")?;
        Ok(())
    }

    /// Residual of the two block equations for a candidate solution.
    pub fn block_residuals(&self, velocity: &[f64], conc_hat: &[f64]) -> (f64, f64) {
        let mut r1 = self.rhs_velocity.clone();
        self.a.matvec_add(velocity, -1.0, &mut r1);
        self.b.matvec_add(conc_hat, -1.0, &mut r1);
        let mut r2 = self.rhs_continuity.clone();
        self.b_c.matvec_add(velocity, -1.0, &mut r2);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (norm(&r1), norm(&r2))
    }
}

/// Assembly tuning knobs.
#[derive(Debug, Clone)]
pub struct AssemblyOptions {
    /// Positivity floor for the concentration iterate at quadrature points.
    pub kappa_min: f64,
    /// Cell quadrature degree; defaults to `3 m + 2` which resolves the
    /// rational coefficients well enough to preserve convergence orders.
    pub quadrature_degree: Option<usize>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            kappa_min: DEFAULT_KAPPA_MIN,
            quadrature_degree: None,
        }
    }
}

/// Default assembly quadrature degree for concentration order `m`.
pub fn default_assembly_degree(order: usize) -> usize {
    3 * order + 2
}

/// Build per-species lifting fields: Dirichlet dofs interpolate the region's
/// boundary data, all remaining dofs take the region-averaged composition
/// normalized so the species sum equals `c_total` at every dof.
pub fn apply_dirichlet_lifting(
    data: &ProblemData,
    space: &Arc<FiniteSpace>,
) -> Result<Vec<Field>, SystemError> {
    let n = data.coeffs.num_species();
    let mesh = space.mesh();
    if data.dirichlet.is_empty() {
        return Err(SystemError::NoDirichletData);
    }
    for (&region, fns) in &data.dirichlet {
        if fns.len() != n {
            return Err(SystemError::WrongFieldCount {
                got: fns.len(),
                expected: n,
            });
        }
        if space
            .boundary_dofs(crate::mesh::RegionTag::Dirichlet(region))
            .is_empty()
        {
            return Err(SystemError::UnusedDirichletRegion(region));
        }
    }

    // First facet in mesh order claims a shared dof (e.g. a corner).
    let mut owner: BTreeMap<usize, u32> = BTreeMap::new();
    for (f_idx, facet) in mesh.boundary_facets.iter().enumerate() {
        if let crate::mesh::RegionTag::Dirichlet(region) = facet.tag {
            for &dof in space.facet_dofs(f_idx) {
                owner.entry(dof).or_insert(region);
            }
        }
    }

    let mut fields: Vec<Vec<f64>> = vec![vec![0.0; space.num_dofs()]; n];
    let regions: Vec<u32> = data.dirichlet.keys().copied().collect();
    for dof in 0..space.num_dofs() {
        let p = space.dof_point(dof);
        let values: Vec<f64> = match owner.get(&dof) {
            Some(region) => data.dirichlet[region]
                .iter()
                .map(|f| f(p[0], p[1]))
                .collect(),
            None => {
                // Mean composition over the Dirichlet regions, rescaled to
                // sum exactly to c_total.
                let mut mean = vec![0.0; n];
                for region in &regions {
                    for (i, f) in data.dirichlet[region].iter().enumerate() {
                        mean[i] += f(p[0], p[1]) / regions.len() as f64;
                    }
                }
                let total: f64 = mean.iter().sum();
                mean.iter().map(|v| v * data.c_total / total).collect()
            }
        };
        let sum: f64 = values.iter().sum();
        if (sum - data.c_total).abs() > 1e-12 * data.c_total.abs().max(1.0) {
            return Err(SystemError::DirichletSumMismatch {
                sum,
                expected: data.c_total,
                x: p[0],
                y: p[1],
            });
        }
        for (field, value) in fields.iter_mut().zip(values) {
            field[dof] = value;
        }
    }
    fields
        .into_iter()
        .map(|coeffs| space.field_from_coeffs(coeffs).map_err(SystemError::from))
        .collect()
}

/// Assemble the saddle-point system at the concentration iterate `c_k`.
///
/// `lifting` is the fixed Dirichlet lifting of the outer iteration; its
/// gradient coupling is folded into the velocity right-hand side.
pub fn assemble(
    conc_space: &Arc<FiniteSpace>,
    vel_space: &Arc<FiniteSpace>,
    data: &ProblemData,
    c_k: &[Field],
    lifting: &[Field],
    opts: &AssemblyOptions,
) -> Result<SaddleSystem, SystemError> {
    let n = data.coeffs.num_species();
    if c_k.len() != n {
        return Err(SystemError::WrongFieldCount {
            got: c_k.len(),
            expected: n,
        });
    }
    if lifting.len() != n {
        return Err(SystemError::WrongFieldCount {
            got: lifting.len(),
            expected: n,
        });
    }
    let mesh = conc_space.mesh();
    let m_order = match conc_space.kind() {
        SpaceKind::ContinuousScalar { order } => order,
        _ => unreachable!("concentration space is continuous by construction"),
    };
    let dg_order = vel_space.order();
    debug_assert_eq!(dg_order + 1, m_order);

    // Unknown numbering.
    let dirichlet = conc_space.dirichlet_dofs();
    let mut free_index = vec![usize::MAX; conc_space.num_dofs()];
    let mut free_dofs = Vec::with_capacity(conc_space.num_dofs() - dirichlet.len());
    {
        let mut is_dir = vec![false; conc_space.num_dofs()];
        for &d in &dirichlet {
            is_dir[d] = true;
        }
        for dof in 0..conc_space.num_dofs() {
            if !is_dir[dof] {
                free_index[dof] = free_dofs.len();
                free_dofs.push(dof);
            }
        }
    }
    let nfree = free_dofs.len();
    let qdofs = vel_space.num_dofs();
    let vel_unknown = |species: usize, vdof: usize| species * qdofs + vdof;
    let conc_unknown = |species: usize, free: usize| species * nfree + free;

    let degree = opts
        .quadrature_degree
        .unwrap_or_else(|| default_assembly_degree(m_order));
    let rule = Quadrature::triangle(degree);
    let cg_table = BasisTable::tabulate(m_order, &rule);
    let dg_table = BasisTable::tabulate(dg_order, &rule);
    let nb_cg = cg_table.values.len();
    let nq = rule.len();

    let n_vel = n * qdofs;
    let n_conc = n * nfree;
    let mut a_coo = CooMat::new(n_vel, n_vel);
    let mut b_coo = CooMat::new(n_vel, n_conc);
    let mut bc_coo = CooMat::new(n_conc, n_vel);
    let mut rhs_velocity = vec![0.0; n_vel];
    let mut rhs_continuity = vec![0.0; n_conc];

    let gamma = data.coeffs.gamma;
    let rt = data.coeffs.rt;
    let masses = &data.coeffs.molar_masses;

    let mut c_at_q = vec![vec![0.0; nq]; n];
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        let cg_dofs = conc_space.cell_dofs(cell);
        let dg_dofs = vel_space.cell_dofs(cell);

        for (i, (field, row)) in c_k.iter().zip(&mut c_at_q).enumerate() {
            for (q, value) in row.iter_mut().enumerate() {
                let mut v = 0.0;
                for (a, &dof) in cg_dofs.iter().enumerate() {
                    v += field.coeffs[dof] * cg_table.values[a][q];
                }
                if !(v >= opts.kappa_min) {
                    return Err(SystemError::PositivityBreach {
                        cell,
                        species: i,
                        value: v,
                    });
                }
                *value = v;
            }
        }

        // Physical gradients of the concentration basis at each point.
        let cg_grads: Vec<[f64; 2]> = cg_table
            .ref_grads
            .iter()
            .flat_map(|per_basis| per_basis.iter().map(|&g| geom.physical_grad(g)))
            .collect();
        debug_assert_eq!(cg_grads.len(), nb_cg * nq);

        for q in 0..nq {
            let w = rule.weights[q] * geom.det;
            let point_c: Vec<f64> = (0..n).map(|i| c_at_q[i][q]).collect();
            let state = PointState::new(point_c, &data.coeffs)?;
            let m_gamma = augmented_matrix(&state, &data.coeffs)?;
            let p = geom.to_physical(rule.points[q]);
            let u = (data.mass_flux)(p[0], p[1]);

            // Velocity block: species-coupled, component-diagonal.
            for i in 0..n {
                for j in 0..n {
                    let mij = m_gamma[(i, j)];
                    if mij == 0.0 {
                        continue;
                    }
                    for (a, &dof_a) in dg_dofs.iter().enumerate() {
                        for (b, &dof_b) in dg_dofs.iter().enumerate() {
                            let val = w * mij * dg_table.values[a][q] * dg_table.values[b][q];
                            for comp in 0..2 {
                                a_coo.push(
                                    vel_unknown(i, vel_space.vector_dof(dof_a, comp)),
                                    vel_unknown(j, vel_space.vector_dof(dof_b, comp)),
                                    val,
                                );
                            }
                        }
                    }
                }
            }

            // Gradient couplings and the mass-flux functional.
            for i in 0..n {
                let l_coeff = gamma * rt * c_at_q[i][q] * masses[i] / state.rho;
                for (a, &dof_a) in dg_dofs.iter().enumerate() {
                    let phi = dg_table.values[a][q];
                    for comp in 0..2 {
                        let row = vel_unknown(i, vel_space.vector_dof(dof_a, comp));
                        rhs_velocity[row] += w * l_coeff * u[comp] * phi;
                        for (v, &cdof) in cg_dofs.iter().enumerate() {
                            let entry = w * phi * cg_grads[v * nq + q][comp];
                            // b-block: subtract the lifting column, keep the
                            // free column as an unknown.
                            rhs_velocity[row] -= entry * lifting[i].coeffs[cdof];
                            if free_index[cdof] != usize::MAX {
                                let col = conc_unknown(i, free_index[cdof]);
                                b_coo.push(row, col, entry);
                                bc_coo.push(col, row, entry * c_at_q[i][q]);
                            }
                        }
                    }
                }
            }

            // Reaction term of the continuity rows.
            for i in 0..n {
                let r = (data.reactions[i])(p[0], p[1]);
                if r != 0.0 {
                    for (v, &cdof) in cg_dofs.iter().enumerate() {
                        if free_index[cdof] != usize::MAX {
                            rhs_continuity[conc_unknown(i, free_index[cdof])] -=
                                w * r * cg_table.values[v][q];
                        }
                    }
                }
            }
        }
    }

    // Neumann boundary term (g_i, w)_Gamma_N with facet quadrature.
    let (t_nodes, t_weights) = gauss_legendre_unit(m_order + 2);
    for (f_idx, facet) in mesh.boundary_facets.iter().enumerate() {
        let crate::mesh::RegionTag::Neumann(region) = facet.tag else {
            continue;
        };
        let fns = data.neumann.get(&region).ok_or_else(|| {
            SystemError::InconsistentData(format!("no Neumann data for region {region}"))
        })?;
        let a = mesh.vertices[facet.vertices[0]];
        let b = mesh.vertices[facet.vertices[1]];
        let (_, len) = mesh.facet_normal_and_length(facet);
        let fdofs = conc_space.facet_dofs(f_idx);
        for (&t, &tw) in t_nodes.iter().zip(&t_weights) {
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            for (i, g) in fns.iter().enumerate() {
                let gv = g(p[0], p[1]);
                if gv == 0.0 {
                    continue;
                }
                for (node, &dof) in fdofs.iter().enumerate() {
                    if free_index[dof] != usize::MAX {
                        rhs_continuity[conc_unknown(i, free_index[dof])] +=
                            tw * len * gv * facet_basis_value(m_order, node, t);
                    }
                }
            }
        }
    }

    Ok(SaddleSystem {
        a: a_coo.to_csr(),
        b: b_coo.to_csr(),
        b_c: bc_coo.to_csr(),
        rhs_velocity,
        rhs_continuity,
        lifting: lifting.to_vec(),
        free_dofs,
        num_species: n,
        velocity_dofs_per_species: qdofs,
    })
}

/// Mass matrix of the discontinuous vector space (block diagonal).
pub fn velocity_mass_matrix(vel_space: &Arc<FiniteSpace>, degree: usize) -> CsrMat {
    let mesh = vel_space.mesh();
    let rule = Quadrature::triangle(degree);
    let table = BasisTable::tabulate(vel_space.order(), &rule);
    let nb = table.values.len();
    let ndofs = vel_space.num_dofs();
    let mut coo = CooMat::new(ndofs, ndofs);
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        let dofs = vel_space.cell_dofs(cell);
        for a in 0..nb {
            for b in 0..nb {
                let mut val = 0.0;
                for q in 0..rule.len() {
                    val += rule.weights[q] * geom.det * table.values[a][q] * table.values[b][q];
                }
                for comp in 0..2 {
                    coo.push(
                        vel_space.vector_dof(dofs[a], comp),
                        vel_space.vector_dof(dofs[b], comp),
                        val,
                    );
                }
            }
        }
    }
    coo.to_csr()
}
