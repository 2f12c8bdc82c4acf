//! Inspect the Onsager transport matrix of a gas mixture: entries, row
//! sums, the rank-1 augmentation, and the eigenvalue spectrum before and
//! after augmenting.
//!
//! ```sh
//! cargo run --release --example transport_spectrum
//! ```

use smfem::transport::{
    augmentation_matrix, augmented_matrix, onsager_matrix, spectral_report, PointState,
    TransportCoefficients,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Three species with asymmetric composition.
    let coeffs = TransportCoefficients::new(
        3,
        &[(0, 1, 2.0), (0, 2, 1.0), (1, 2, 3.0)],
        vec![28.0, 32.0, 44.0],
        1.0,
        1.0,
    )?;
    let state = PointState::new(vec![0.6, 0.3, 0.1], &coeffs)?;
    println!(
        "state: c = {:?}, c_T = {}, rho = {}",
        state.concentrations, state.c_total, state.rho
    );

    let m = onsager_matrix(&state, &coeffs)?;
    println!("transport matrix M (row sums vanish by construction):");
    for i in 0..3 {
        println!("  [{:+.6} {:+.6} {:+.6}]", m[(i, 0)], m[(i, 1)], m[(i, 2)]);
    }
    println!("max |row sum| = {:.2e}", m.max_abs_row_sum());

    let l = augmentation_matrix(&state, &coeffs)?;
    println!("augmentation L is the scaled outer product of (M_i c_i):");
    for i in 0..3 {
        println!("  [{:+.6} {:+.6} {:+.6}]", l[(i, 0)], l[(i, 1)], l[(i, 2)]);
    }

    let (eigs, min_aug) = spectral_report(&state, &coeffs)?;
    println!("eigenvalues of M (ascending): {eigs:?}");
    println!("smallest eigenvalue of M + gamma L: {min_aug:.6}");

    // The augmented matrix stays positive definite as gamma varies.
    for gamma in [0.1, 1.0, 10.0] {
        let coeffs = coeffs.clone().with_gamma(gamma);
        let mg = augmented_matrix(&state, &coeffs)?;
        let min = smfem::linalg::symmetric_eigenvalues(&mg)[0];
        println!("gamma = {gamma:>4}: min eig(M^gamma) = {min:.6}");
    }
    Ok(())
}
