//! JSON-configured entry points behind the `smfem` binary.
//!
//! Four experiments are exposed: `convergence` (the manufactured-solution
//! refinement study), `demo` (the mixed boundary-condition rectangle),
//! `solve` (a single solve described entirely by the config), and
//! `spectrum` (pointwise transport-matrix diagnostics). Every experiment
//! writes its outputs atomically: files are staged under a temporary name
//! and renamed into place, so an interrupted run never leaves a partial
//! CSV behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fespace::FiniteSpace;
use crate::mesh::{Diagonal, RegionTag, TriMesh};
use crate::solver::{picard_iterate, PicardSettings};
use crate::system::{apply_dirichlet_lifting, scalar_fn, vector_fn, ProblemData};
use crate::transport::{spectral_report, PointState, TransportCoefficients};
use crate::verify::{reference_case, convergence_study, mixed_bc_demo, DemoConfig, StudyResult};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration invalid: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("io failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Fespace(#[from] crate::fespace::FespaceError),
    #[error(transparent)]
    Transport(#[from] crate::transport::TransportError),
    #[error(transparent)]
    System(#[from] crate::system::SystemError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Verify(#[from] crate::verify::VerifyError),
}

impl CliError {
    /// Process exit status: 2 config, 4 io, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            _ => 3,
        }
    }

    /// Machine-readable error payload printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Mesh(_) => "mesh",
            CliError::Fespace(_) => "fespace",
            CliError::Transport(_) => "transport",
            CliError::System(_) => "system",
            CliError::Solver(_) => "solver",
            CliError::Verify(_) => "verify",
        };
        let mut obj = serde_json::json!({
            "error": { "kind": kind, "message": self.to_string() }
        });
        if let CliError::Config(keys) = self {
            obj["error"]["offending"] = serde_json::json!(keys);
        }
        obj
    }
}

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Convergence,
    Demo,
    Solve,
    Spectrum,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Cells per side of the unit square (solve).
    pub n: Option<usize>,
    /// Refinement levels (convergence).
    pub n_list: Option<Vec<usize>>,
    /// Cells across (demo rectangles).
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub width: Option<f64>,
    pub height: Option<f64>,
    /// "left" or "right".
    pub diagonal: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusivityEntry {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub n: usize,
    pub diffusivities: Vec<DiffusivityEntry>,
    pub molar_masses: Vec<f64>,
    #[serde(default = "default_rt")]
    pub rt: f64,
}

fn default_rt() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryBlock {
    pub region: u32,
    /// "dirichlet" or "neumann".
    pub kind: String,
    /// Edge selector: "left", "right", "bottom", "top", or "all".
    #[serde(rename = "where")]
    pub edge: String,
    /// Constant per-species values: concentrations for Dirichlet regions,
    /// normal molar fluxes for Neumann regions.
    pub values: Vec<f64>,
}

/// Top-level run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub mesh: MeshConfig,
    pub order: Option<usize>,
    pub species: Option<SpeciesConfig>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub boundary: Vec<BoundaryBlock>,
    /// Pointwise concentrations for `spectrum`.
    pub concentrations: Option<Vec<f64>>,
    /// Constant prescribed mass-flux for `solve`.
    pub mass_flux: Option<[f64; 2]>,
    /// Mole fractions overriding the demo boundary data.
    pub inlet: Option<Vec<f64>>,
    pub outlet: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub write_vtk: bool,
    /// Seed for randomized property sweeps; fixed for reproducibility.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(vec![format!("json parse error: {e}")]))?;
        config.validate()?;
        Ok(config)
    }

    /// Schema validation; collects every offending key before failing.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        if let Some(d) = &self.mesh.diagonal {
            if d != "left" && d != "right" {
                problems.push(format!(
                    "mesh.diagonal must be \"left\" or \"right\", got {d:?}"
                ));
            }
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0) {
                problems.push(format!("gamma must be nonnegative, got {g}"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                problems.push(format!("epsilon must be positive, got {e}"));
            }
        }
        if self.max_iterations == Some(0) {
            problems.push("max_iterations must be at least 1".into());
        }
        if let Some(species) = &self.species {
            if species.n < 2 {
                problems.push(format!("species.n must be at least 2, got {}", species.n));
            }
            if species.molar_masses.len() != species.n {
                problems.push(format!(
                    "species.molar_masses must have {} entries, got {}",
                    species.n,
                    species.molar_masses.len()
                ));
            }
            let expected = species.n * (species.n - 1) / 2;
            if species.diffusivities.len() != expected {
                problems.push(format!(
                    "species.diffusivities must have {expected} independent entries, got {}",
                    species.diffusivities.len()
                ));
            }
        }
        match self.experiment {
            Experiment::Convergence => {
                match &self.mesh.n_list {
                    Some(list) if list.len() >= 3 => {}
                    Some(list) => problems.push(format!(
                        "mesh.n_list needs at least 3 levels, got {}",
                        list.len()
                    )),
                    None => problems.push("mesh.n_list is required for convergence".into()),
                }
                if self.gamma.is_none() {
                    problems.push("gamma is required for convergence".into());
                }
            }
            Experiment::Solve => {
                if self.mesh.n.is_none() {
                    problems.push("mesh.n is required for solve".into());
                }
                if self.species.is_none() {
                    problems.push("species block is required for solve".into());
                }
                if self.gamma.is_none() {
                    problems.push("gamma is required for solve".into());
                }
                if self.boundary.is_empty() {
                    problems.push("boundary blocks are required for solve".into());
                }
                let n = self.species.as_ref().map(|s| s.n).unwrap_or(0);
                for (idx, block) in self.boundary.iter().enumerate() {
                    if block.kind != "dirichlet" && block.kind != "neumann" {
                        problems.push(format!(
                            "boundary[{idx}].kind must be \"dirichlet\" or \"neumann\", got {:?}",
                            block.kind
                        ));
                    }
                    if !["left", "right", "bottom", "top", "all"].contains(&block.edge.as_str()) {
                        problems.push(format!(
                            "boundary[{idx}].where must be one of left/right/bottom/top/all, got {:?}",
                            block.edge
                        ));
                    }
                    if n != 0 && block.values.len() != n {
                        problems.push(format!(
                            "boundary[{idx}].values must have {n} entries, got {}",
                            block.values.len()
                        ));
                    }
                }
                if !self.boundary.iter().any(|b| b.kind == "dirichlet") {
                    problems.push("at least one Dirichlet boundary block is required".into());
                }
            }
            Experiment::Spectrum => {
                if self.species.is_none() {
                    problems.push("species block is required for spectrum".into());
                }
                if self.gamma.is_none() {
                    problems.push("gamma is required for spectrum".into());
                }
                match (&self.concentrations, &self.species) {
                    (None, _) => problems.push("concentrations are required for spectrum".into()),
                    (Some(c), Some(s)) if c.len() != s.n => problems.push(format!(
                        "concentrations must have {} entries, got {}",
                        s.n,
                        c.len()
                    )),
                    _ => {}
                }
            }
            Experiment::Demo => {
                for (name, data) in [("inlet", &self.inlet), ("outlet", &self.outlet)] {
                    if let Some(values) = data {
                        if values.len() != 4 {
                            problems
                                .push(format!("{name} must have 4 entries, got {}", values.len()));
                        }
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems))
        }
    }

    fn diagonal(&self) -> Diagonal {
        match self.mesh.diagonal.as_deref() {
            Some("left") => Diagonal::Left,
            _ => Diagonal::Right,
        }
    }

    fn settings(&self, default_epsilon: f64) -> PicardSettings {
        PicardSettings {
            epsilon: self.epsilon.unwrap_or(default_epsilon),
            max_iterations: self.max_iterations.unwrap_or(50),
            gamma: self.gamma.unwrap_or(1.0),
            strict_consistency: self.strict,
            ..PicardSettings::default()
        }
    }

    fn coefficients(&self) -> Result<TransportCoefficients, CliError> {
        let species = self
            .species
            .as_ref()
            .ok_or_else(|| CliError::Config(vec!["species block is required".into()]))?;
        let pairs: Vec<(usize, usize, f64)> = species
            .diffusivities
            .iter()
            .map(|d| (d.i, d.j, d.value))
            .collect();
        Ok(TransportCoefficients::new(
            species.n,
            &pairs,
            species.molar_masses.clone(),
            species.rt,
            self.gamma.unwrap_or(1.0),
        )?)
    }
}

/// Write a file atomically: stage next to the target, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let staged = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::write(&staged, contents).map_err(io_err)?;
    std::fs::rename(&staged, path).map_err(io_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_atomic(path, &text)
}

/// Flag overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub strict: bool,
}

/// Run one experiment; returns the output directory used.
pub fn run(config_path: &Path, overrides: &Overrides) -> Result<PathBuf, CliError> {
    let mut config = RunConfig::from_path(config_path)?;
    if overrides.strict {
        config.strict = true;
    }
    let threads = overrides.threads.unwrap_or(1);
    if threads <= 1 {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(threads));
    }

    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;

    match config.experiment {
        Experiment::Convergence => run_convergence(&config, &out_dir)?,
        Experiment::Demo => run_demo(&config, &out_dir)?,
        Experiment::Solve => run_solve(&config, &out_dir)?,
        Experiment::Spectrum => run_spectrum(&config, &out_dir)?,
    }
    Ok(out_dir)
}

fn run_convergence(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let case = reference_case()?;
    let settings = config.settings(1e-13);
    let order = config.order.unwrap_or(1);
    let mesh_sizes = config.mesh.n_list.clone().expect("validated");
    let study: StudyResult =
        convergence_study(&case, &mesh_sizes, order, config.diagonal(), &settings)?;

    write_atomic(&out_dir.join("results.csv"), &study.to_csv())?;
    write_json(&out_dir.join("slopes.json"), &study.slopes)?;
    write_json(
        &out_dir.join("report.json"),
        &serde_json::json!({
            "experiment": "convergence",
            "order": order,
            "levels": study.rows.iter().map(|r| serde_json::json!({
                "n": r.n,
                "iterations": r.iterations,
                "gibbs_duhem_l2": r.gibbs_duhem_l2,
                "wall_time_s": r.wall_time_s,
            })).collect::<Vec<_>>(),
            "slopes": study.slopes,
        }),
    )?;

    if config.write_vtk {
        for &n in &mesh_sizes {
            let (_, velocities, concentrations, _) = crate::verify::solve_manufactured_level(
                &case,
                n,
                order,
                config.diagonal(),
                &settings,
            )?;
            let mesh = concentrations[0].space().mesh();
            write_solution_vtk(
                mesh,
                &concentrations,
                &velocities,
                &out_dir.join(format!("solution_n{n}.vtk")),
            )?;
        }
    }
    Ok(())
}

fn write_solution_vtk(
    mesh: &Arc<TriMesh>,
    concentrations: &[crate::fespace::Field],
    velocities: &[crate::fespace::Field],
    path: &Path,
) -> Result<(), CliError> {
    let names: Vec<String> = (0..concentrations.len())
        .map(|i| format!("c{}", i + 1))
        .collect();
    let vertex_data: Vec<Vec<f64>> = concentrations
        .iter()
        .map(|c| c.coeffs[..mesh.num_vertices()].to_vec())
        .collect();
    let point_scalars: Vec<(&str, &[f64])> = names
        .iter()
        .zip(&vertex_data)
        .map(|(n, d)| (n.as_str(), d.as_slice()))
        .collect();
    let centroid = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
    let vel_names: Vec<String> = (0..velocities.len())
        .map(|i| format!("v{}", i + 1))
        .collect();
    let vel_data: Vec<Vec<[f64; 2]>> = velocities
        .iter()
        .map(|v| {
            (0..mesh.num_cells())
                .map(|cell| v.eval_vector(cell, centroid))
                .collect()
        })
        .collect();
    let cell_vectors: Vec<(&str, &[[f64; 2]])> = vel_names
        .iter()
        .zip(&vel_data)
        .map(|(n, d)| (n.as_str(), d.as_slice()))
        .collect();
    mesh.write_vtk(path, "smfem solution", &point_scalars, &[], &cell_vectors)?;
    Ok(())
}

fn run_demo(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let mut demo = DemoConfig::default();
    if let Some(nx) = config.mesh.nx {
        demo.nx = nx;
    }
    if let Some(ny) = config.mesh.ny {
        demo.ny = ny;
    }
    if let Some(w) = config.mesh.width {
        demo.width = w;
    }
    if let Some(h) = config.mesh.height {
        demo.height = h;
    }
    demo.diagonal = config.diagonal();
    if let Some(order) = config.order {
        demo.order = order;
    }
    if let Some(inlet) = &config.inlet {
        demo.inlet = [inlet[0], inlet[1], inlet[2], inlet[3]];
    }
    if let Some(outlet) = &config.outlet {
        demo.outlet = [outlet[0], outlet[1], outlet[2], outlet[3]];
    }
    demo.settings = config.settings(1e-11);

    let result = mixed_bc_demo(&demo)?;

    let mut csv = String::from("species,y_min,y_max\n");
    for (i, name) in crate::verify::DEMO_SPECIES.iter().enumerate() {
        let min = result.concentrations[i]
            .coeffs
            .iter()
            .fold(f64::MAX, |m, v| m.min(*v));
        let max = result.concentrations[i]
            .coeffs
            .iter()
            .fold(f64::MIN, |m, v| m.max(*v));
        csv.push_str(&format!("{name},{min},{max}\n"));
    }
    write_atomic(&out_dir.join("results.csv"), &csv)?;
    write_json(&out_dir.join("report.json"), &result.report)?;
    if config.write_vtk {
        write_solution_vtk(
            &result.mesh,
            &result.concentrations,
            &result.velocities,
            &out_dir.join("solution.vtk"),
        )?;
    }
    Ok(())
}

fn run_solve(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let coeffs = config.coefficients()?;
    let n_species = coeffs.num_species();
    let n = config.mesh.n.expect("validated");
    let mesh = TriMesh::unit_square(n, config.diagonal())?;

    // Tag the boundary from the config blocks, in order; first match wins.
    type EdgePredicate = Box<dyn Fn([f64; 2]) -> bool>;
    let predicates: Vec<(EdgePredicate, RegionTag)> = config
        .boundary
        .iter()
        .map(|block| {
            let tag = if block.kind == "dirichlet" {
                RegionTag::Dirichlet(block.region)
            } else {
                RegionTag::Neumann(block.region)
            };
            let pred: EdgePredicate = match block.edge.as_str() {
                "left" => Box::new(|p: [f64; 2]| p[0] < 1e-12),
                "right" => Box::new(|p: [f64; 2]| p[0] > 1.0 - 1e-12),
                "bottom" => Box::new(|p: [f64; 2]| p[1] < 1e-12),
                "top" => Box::new(|p: [f64; 2]| p[1] > 1.0 - 1e-12),
                _ => Box::new(|_| true),
            };
            (pred, tag)
        })
        .collect();
    let rules: Vec<crate::mesh::TagRule> = predicates
        .iter()
        .map(|(p, t)| (p.as_ref() as &dyn Fn([f64; 2]) -> bool, *t))
        .collect();
    let mesh = Arc::new(mesh.tag_boundary(&rules)?);

    let mut dirichlet = BTreeMap::new();
    let mut neumann = BTreeMap::new();
    let mut c_total: Option<f64> = None;
    for block in &config.boundary {
        let fns: Vec<crate::system::ScalarFn> = block
            .values
            .iter()
            .map(|&v| scalar_fn(move |_, _| v))
            .collect();
        if block.kind == "dirichlet" {
            let sum: f64 = block.values.iter().sum();
            c_total.get_or_insert(sum);
            dirichlet.insert(block.region, fns);
        } else {
            neumann.insert(block.region, fns);
        }
    }
    let u = config.mass_flux.unwrap_or([0.0, 0.0]);
    let data = ProblemData {
        coeffs,
        dirichlet,
        neumann,
        reactions: (0..n_species).map(|_| scalar_fn(|_, _| 0.0)).collect(),
        mass_flux: vector_fn(move |_, _| u),
        mass_flux_divergence: Some(scalar_fn(|_, _| 0.0)),
        c_total: c_total.expect("validated: a Dirichlet block exists"),
    };

    let order = config.order.unwrap_or(1);
    let conc_space = FiniteSpace::continuous(Arc::clone(&mesh), order)?;
    let vel_space = FiniteSpace::dg_vector(Arc::clone(&mesh), order - 1)?;
    let lifting = apply_dirichlet_lifting(&data, &conc_space)?;
    let settings = config.settings(1e-13);
    let (velocities, concentrations, report) =
        picard_iterate(&conc_space, &vel_space, &data, &lifting, &settings)?;

    let mut csv = String::from("species,c_min,c_max\n");
    for (i, c) in concentrations.iter().enumerate() {
        let min = c.coeffs.iter().fold(f64::MAX, |m, v| m.min(*v));
        let max = c.coeffs.iter().fold(f64::MIN, |m, v| m.max(*v));
        csv.push_str(&format!("{i},{min},{max}\n"));
    }
    write_atomic(&out_dir.join("results.csv"), &csv)?;
    write_json(&out_dir.join("report.json"), &report)?;
    if config.write_vtk {
        write_solution_vtk(
            &mesh,
            &concentrations,
            &velocities,
            &out_dir.join("solution.vtk"),
        )?;
    }
    Ok(())
}

fn run_spectrum(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let coeffs = config.coefficients()?;
    let concentrations = config.concentrations.clone().expect("validated");
    let state = PointState::new(concentrations, &coeffs)?;
    let (eigenvalues, min_aug) = spectral_report(&state, &coeffs)?;

    let mut header: Vec<String> = (1..=eigenvalues.len())
        .map(|i| format!("eig_{i}"))
        .collect();
    header.push("min_eig_augmented".into());
    let mut row: Vec<String> = eigenvalues.iter().map(|v| v.to_string()).collect();
    row.push(min_aug.to_string());
    let csv = format!("{}\n{}\n", header.join(","), row.join(","));
    write_atomic(&out_dir.join("results.csv"), &csv)?;
    write_json(
        &out_dir.join("report.json"),
        &serde_json::json!({
            "eigenvalues": eigenvalues,
            "min_eig_augmented": min_aug,
        }),
    )?;
    Ok(())
}
