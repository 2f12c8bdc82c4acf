//! Steady interdiffusion of N2, O2, CO2, and H2O in a channel: humidified
//! air enters on the left, alveolar air sits on the right, the walls are
//! no-flux, and the prescribed mass-flux is zero. The water-vapour mole
//! fraction is equal at both ends, so any interior gradient is produced by
//! drag from the other species; near the inlet the vapour velocity points
//! up its own gradient (uphill diffusion).
//!
//! ```sh
//! cargo run --release --example mixed_bc_demo
//! ```

use smfem::verify::{mixed_bc_demo, DemoConfig, DEMO_SPECIES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = DemoConfig::default();
    println!(
        "channel {} x {}, mesh {} x {}, epsilon = {:.0e}",
        config.width, config.height, config.nx, config.ny, config.settings.epsilon
    );
    let result = mixed_bc_demo(&config)?;
    let report = &result.report;

    println!(
        "converged in {} iterations ({:.2}s)",
        report.solve.iterations, report.solve.wall_time_s
    );
    println!(
        "mole fractions stay in [{:.3e}, {:.6}]; max |sum - 1| = {:.2e}",
        report.mole_fraction_min, report.mole_fraction_max, report.sum_deviation_max
    );
    for (i, name) in DEMO_SPECIES.iter().enumerate() {
        let y = &result.concentrations[i].coeffs;
        let min = y.iter().cloned().fold(f64::MAX, f64::min);
        let max = y.iter().cloned().fold(f64::MIN, f64::max);
        println!("  {name:>3}: [{min:.4}, {max:.4}]");
    }
    println!(
        "H2O near the inlet: velocity_x = {:+.4}, gradient_x = {:+.6} -> uphill: {}",
        report.h2o_velocity_x_near_inlet, report.h2o_gradient_x_near_inlet, report.uphill_h2o
    );

    let out = std::env::temp_dir().join("smfem_demo.vtk");
    let names: Vec<String> = DEMO_SPECIES.iter().map(|s| format!("y_{s}")).collect();
    let vertex_data: Vec<Vec<f64>> = result
        .concentrations
        .iter()
        .map(|c| c.coeffs[..result.mesh.num_vertices()].to_vec())
        .collect();
    let point_scalars: Vec<(&str, &[f64])> = names
        .iter()
        .zip(&vertex_data)
        .map(|(n, d)| (n.as_str(), d.as_slice()))
        .collect();
    result
        .mesh
        .write_vtk(&out, "air channel", &point_scalars, &[], &[])?;
    println!("wrote {}", out.display());
    Ok(())
}
