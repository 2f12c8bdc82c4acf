//! Build a structured triangle mesh, tag its boundary into Dirichlet and
//! Neumann regions, and write it as a legacy ASCII VTK file.
//!
//! ```sh
//! cargo run --release --example build_mesh_vtk
//! ```

use smfem::mesh::{Diagonal, RegionTag, TriMesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TriMesh::unit_square(8, Diagonal::Right)?;
    println!(
        "unit square, N = 8: {} vertices, {} cells, {} boundary facets, h = {:.6}",
        mesh.num_vertices(),
        mesh.num_cells(),
        mesh.boundary_facets.len(),
        mesh.diameter()
    );

    // Dirichlet on the left and right edges, no-flux walls elsewhere.
    let left = |p: [f64; 2]| p[0] < 1e-12;
    let right = |p: [f64; 2]| p[0] > 1.0 - 1e-12;
    let rest = |_: [f64; 2]| true;
    let mesh = mesh.tag_boundary(&[
        (&left, RegionTag::Dirichlet(1)),
        (&right, RegionTag::Dirichlet(2)),
        (&rest, RegionTag::Neumann(0)),
    ])?;
    for tag in [
        RegionTag::Dirichlet(1),
        RegionTag::Dirichlet(2),
        RegionTag::Neumann(0),
    ] {
        let count = mesh.boundary_facets.iter().filter(|f| f.tag == tag).count();
        println!("{tag:?}: {count} facets");
    }

    // Attach the distance from the center as point data and the cell area
    // as cell data.
    let point_data: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|v| ((v[0] - 0.5).powi(2) + (v[1] - 0.5).powi(2)).sqrt())
        .collect();
    let cell_data: Vec<f64> = (0..mesh.num_cells()).map(|k| mesh.cell_area(k)).collect();

    let out = std::env::temp_dir().join("smfem_mesh.vtk");
    mesh.write_vtk(
        &out,
        "tagged unit square",
        &[("center_distance", &point_data)],
        &[("area", &cell_data)],
        &[],
    )?;
    println!("wrote {}", out.display());
    Ok(())
}
