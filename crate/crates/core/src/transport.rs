//! Pointwise Onsager transport matrix for Stefan-Maxwell diffusion, its
//! rank-1 augmentation, and spectral diagnostics.
//!
//! For species concentrations `c_i`, pairwise diffusivities `D_ij`, and
//! total concentration `c_T`, the transport matrix is
//!
//! ```text
//! M_ij = -RT c_i c_j / (D_ij c_T)          (i != j)
//! M_ii = sum_{k != i} RT c_i c_k / (D_ik c_T)
//! ```
//!
//! so rows sum to zero and `(1, ..., 1)` is a null eigenvector: a uniform
//! shift of all species velocities (convection) produces no driving force.
//! Adding `gamma * L` with the rank-1 matrix `L_ij = RT M_i M_j c_i c_j / rho`
//! removes this nullspace, making the augmented matrix positive definite
//! while leaving solutions of the constrained problem unchanged.
//!
//! Negative cross-diffusivities are accepted: only the spectral structure
//! (single null eigenvalue, positive remainder) is relied on, and the
//! diagnostics in [`spectral_report`] expose when it fails to hold.

use thiserror::Error;

use crate::linalg::{symmetric_eigenvalues, DenseMat};

/// Default positivity floor for concentrations, in nondimensional units.
pub const DEFAULT_KAPPA_MIN: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("need at least 2 species, got {0}")]
    TooFewSpecies(usize),
    #[error("diffusivity D({i},{j}) is missing")]
    MissingDiffusivity { i: usize, j: usize },
    #[error("diffusivity D({i},{j}) given twice with conflicting values {a} and {b}")]
    ConflictingDiffusivity { i: usize, j: usize, a: f64, b: f64 },
    #[error("diffusivity D({i},{j}) must be nonzero")]
    ZeroDiffusivity { i: usize, j: usize },
    #[error("diffusivity index {0} out of range for {1} species")]
    DiffusivityIndex(usize, usize),
    #[error("molar mass of species {species} must be positive, got {value}")]
    NonPositiveMolarMass { species: usize, value: f64 },
    #[error("RT must be positive, got {0}")]
    NonPositiveRt(f64),
    #[error("augmentation parameter gamma must be nonnegative, got {0}")]
    NegativeGamma(f64),
    #[error("concentration of species {species} is {value}, below the floor {floor}")]
    ConcentrationBelowFloor {
        species: usize,
        value: f64,
        floor: f64,
    },
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("concentration vector has {got} entries, expected {expected}")]
    WrongSpeciesCount { got: usize, expected: usize },
}

/// Material data: species count, Stefan-Maxwell diffusivity table, molar
/// masses, thermal energy `RT`, and the augmentation parameter `gamma`.
#[derive(Debug, Clone)]
pub struct TransportCoefficients {
    n: usize,
    /// Dense symmetric table; the diagonal is never read and is stored as
    /// NaN so accidental use surfaces immediately.
    diffusivities: Vec<f64>,
    pub molar_masses: Vec<f64>,
    pub rt: f64,
    pub gamma: f64,
}

impl TransportCoefficients {
    /// Build from a list of `(i, j, value)` pairs. Every unordered pair of
    /// distinct species must appear exactly once (either index order);
    /// values may be negative but not zero.
    pub fn new(
        n: usize,
        pairs: &[(usize, usize, f64)],
        molar_masses: Vec<f64>,
        rt: f64,
        gamma: f64,
    ) -> Result<Self, TransportError> {
        if n < 2 {
            return Err(TransportError::TooFewSpecies(n));
        }
        if molar_masses.len() != n {
            return Err(TransportError::WrongSpeciesCount {
                got: molar_masses.len(),
                expected: n,
            });
        }
        for (i, &m) in molar_masses.iter().enumerate() {
            if !(m > 0.0) {
                return Err(TransportError::NonPositiveMolarMass {
                    species: i,
                    value: m,
                });
            }
        }
        if !(rt > 0.0) {
            return Err(TransportError::NonPositiveRt(rt));
        }
        if !(gamma >= 0.0) {
            return Err(TransportError::NegativeGamma(gamma));
        }

        let mut table = vec![f64::NAN; n * n];
        for &(i, j, value) in pairs {
            if i >= n || j >= n || i == j {
                return Err(TransportError::DiffusivityIndex(i.max(j), n));
            }
            if value == 0.0 {
                return Err(TransportError::ZeroDiffusivity { i, j });
            }
            let existing = table[i * n + j];
            if !existing.is_nan() && existing != value {
                return Err(TransportError::ConflictingDiffusivity {
                    i,
                    j,
                    a: existing,
                    b: value,
                });
            }
            table[i * n + j] = value;
            table[j * n + i] = value;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if table[i * n + j].is_nan() {
                    return Err(TransportError::MissingDiffusivity { i, j });
                }
            }
        }
        Ok(Self {
            n,
            diffusivities: table,
            molar_masses,
            rt,
            gamma,
        })
    }

    pub fn num_species(&self) -> usize {
        self.n
    }

    /// Symmetric lookup; panics on the (undefined) diagonal.
    pub fn diffusivity(&self, i: usize, j: usize) -> f64 {
        assert_ne!(i, j, "diagonal diffusivities are not defined");
        self.diffusivities[i * self.n + j]
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
}

/// Species concentrations at a point together with the derived total
/// concentration and mass density.
#[derive(Debug, Clone)]
pub struct PointState {
    pub concentrations: Vec<f64>,
    pub c_total: f64,
    pub rho: f64,
}

impl PointState {
    pub fn new(
        concentrations: Vec<f64>,
        coeffs: &TransportCoefficients,
    ) -> Result<Self, TransportError> {
        if concentrations.len() != coeffs.num_species() {
            return Err(TransportError::WrongSpeciesCount {
                got: concentrations.len(),
                expected: coeffs.num_species(),
            });
        }
        let c_total = concentrations.iter().sum();
        let rho = concentrations
            .iter()
            .zip(&coeffs.molar_masses)
            .map(|(c, m)| c * m)
            .sum();
        Ok(Self {
            concentrations,
            c_total,
            rho,
        })
    }

    /// Check every concentration against a positivity floor, reporting the
    /// first offending species. A violation is an error, never a clamp.
    pub fn check_floor(&self, kappa_min: f64) -> Result<(), TransportError> {
        for (i, &c) in self.concentrations.iter().enumerate() {
            if !(c >= kappa_min) {
                return Err(TransportError::ConcentrationBelowFloor {
                    species: i,
                    value: c,
                    floor: kappa_min,
                });
            }
        }
        Ok(())
    }
}

/// Onsager transport matrix at a point.
///
/// The diagonal is assembled as the negated sum of the stored off-diagonal
/// entries, so row sums vanish exactly in floating point.
pub fn onsager_matrix(
    state: &PointState,
    coeffs: &TransportCoefficients,
) -> Result<DenseMat, TransportError> {
    let n = coeffs.num_species();
    state.check_floor(f64::MIN_POSITIVE)?;
    let c = &state.concentrations;
    let mut m = DenseMat::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let entry = -coeffs.rt * c[i] * c[j] / (coeffs.diffusivity(i, j) * state.c_total);
            m[(i, j)] = entry;
            m[(j, i)] = entry;
        }
    }
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if j != i {
                diag -= m[(i, j)];
            }
        }
        m[(i, i)] = diag;
    }
    Ok(m)
}

/// Rank-1 augmentation `L_ij = RT M_i M_j c_i c_j / rho`, the scaled outer
/// product of the mass-concentration vector with itself.
pub fn augmentation_matrix(
    state: &PointState,
    coeffs: &TransportCoefficients,
) -> Result<DenseMat, TransportError> {
    let n = coeffs.num_species();
    if !(state.rho > 0.0) {
        return Err(TransportError::NonPositiveDensity(state.rho));
    }
    let mc: Vec<f64> = state
        .concentrations
        .iter()
        .zip(&coeffs.molar_masses)
        .map(|(c, m)| c * m)
        .collect();
    let mut l = DenseMat::zeros(n);
    for (i, &mi) in mc.iter().enumerate() {
        for (j, &mj) in mc.iter().enumerate() {
            l[(i, j)] = coeffs.rt * mi * mj / state.rho;
        }
    }
    Ok(l)
}

/// Augmented transport matrix `M + gamma * L`; symmetric positive definite
/// for strictly positive concentrations and `gamma > 0`.
pub fn augmented_matrix(
    state: &PointState,
    coeffs: &TransportCoefficients,
) -> Result<DenseMat, TransportError> {
    let mut m = onsager_matrix(state, coeffs)?;
    if coeffs.gamma > 0.0 {
        let l = augmentation_matrix(state, coeffs)?;
        m.add_scaled(&l, coeffs.gamma);
    }
    Ok(m)
}

/// Eigenvalues of `M` in ascending order and the smallest eigenvalue of the
/// augmented matrix `M + gamma * L`.
pub fn spectral_report(
    state: &PointState,
    coeffs: &TransportCoefficients,
) -> Result<(Vec<f64>, f64), TransportError> {
    let m = onsager_matrix(state, coeffs)?;
    let eigs = symmetric_eigenvalues(&m);
    let mg = augmented_matrix(state, coeffs)?;
    let min_aug = symmetric_eigenvalues(&mg)[0];
    Ok((eigs, min_aug))
}

/// Energy-dissipation form of the augmented quadratic form, evaluated from
/// the pairwise velocity differences rather than from the matrix:
///
/// ```text
/// 1/2 sum_{i != j} RT c_i c_j / (D_ij c_T) |v_i - v_j|^2
///   + gamma RT / rho |sum_j M_j c_j v_j|^2
/// ```
///
/// This is an independent route to `v^T (M^gamma (x) I_d) v` and is used to
/// cross-check the matrix construction.
pub fn pairwise_dissipation(
    state: &PointState,
    coeffs: &TransportCoefficients,
    velocities: &[[f64; 2]],
) -> f64 {
    let n = coeffs.num_species();
    assert_eq!(velocities.len(), n);
    let c = &state.concentrations;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dv = [
                velocities[j][0] - velocities[i][0],
                velocities[j][1] - velocities[i][1],
            ];
            total += 0.5 * coeffs.rt * c[i] * c[j] / (coeffs.diffusivity(i, j) * state.c_total)
                * (dv[0] * dv[0] + dv[1] * dv[1]);
        }
    }
    let mut flux = [0.0f64; 2];
    for j in 0..n {
        let w = coeffs.molar_masses[j] * c[j];
        flux[0] += w * velocities[j][0];
        flux[1] += w * velocities[j][1];
    }
    total + coeffs.gamma * coeffs.rt / state.rho * (flux[0] * flux[0] + flux[1] * flux[1])
}

/// Quadratic form `v^T (M (x) I_2) v` for a per-species velocity list, the
/// matrix route paired with [`pairwise_dissipation`].
pub fn blockwise_quadratic_form(matrix: &DenseMat, velocities: &[[f64; 2]]) -> f64 {
    let n = matrix.dim();
    assert_eq!(velocities.len(), n);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += matrix[(i, j)]
                * (velocities[i][0] * velocities[j][0] + velocities[i][1] * velocities[j][1]);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs_n2(d12: f64, gamma: f64) -> TransportCoefficients {
        TransportCoefficients::new(2, &[(0, 1, d12)], vec![1.0, 1.0], 1.0, gamma).unwrap()
    }

    #[test]
    fn onsager_two_species_hand_value() {
        let coeffs = coeffs_n2(2.0, 0.0);
        let state = PointState::new(vec![1.0, 1.0], &coeffs).unwrap();
        let m = onsager_matrix(&state, &coeffs).unwrap();
        assert_eq!(m[(0, 0)], 0.25);
        assert_eq!(m[(0, 1)], -0.25);
        assert_eq!(m[(1, 0)], -0.25);
        assert_eq!(m[(1, 1)], 0.25);
    }

    #[test]
    fn onsager_three_species_entrywise_oracle() {
        // Frozen hand evaluation of the entry formulas at
        // c = (1, 2, 3), D12 = 1, D13 = 2, D23 = 3, RT = 1, c_T = 6.
        let coeffs = TransportCoefficients::new(
            3,
            &[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)],
            vec![1.0, 1.0, 1.0],
            1.0,
            0.0,
        )
        .unwrap();
        let state = PointState::new(vec![1.0, 2.0, 3.0], &coeffs).unwrap();
        assert_eq!(state.c_total, 6.0);
        let m = onsager_matrix(&state, &coeffs).unwrap();
        let expected = [
            [7.0 / 12.0, -1.0 / 3.0, -1.0 / 4.0],
            [-1.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0],
            [-1.0 / 4.0, -1.0 / 3.0, 7.0 / 12.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (m[(i, j)] - expected[i][j]).abs() <= 1e-14,
                    "entry ({i},{j}): {} vs {}",
                    m[(i, j)],
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn onsager_annihilates_constant_vector() {
        let coeffs = TransportCoefficients::new(
            4,
            &[
                (0, 1, 2.0),
                (0, 2, 1.0),
                (0, 3, 1.0),
                (1, 2, 1.0),
                (1, 3, 1.0),
                (2, 3, 3.0),
            ],
            vec![1.0, 2.0, 0.5, 1.5],
            1.3,
            0.0,
        )
        .unwrap();
        let state = PointState::new(vec![0.3, 1.7, 0.9, 2.1], &coeffs).unwrap();
        let m = onsager_matrix(&state, &coeffs).unwrap();
        let ones = vec![1.0; 4];
        let y = m.matvec(&ones);
        let bound = 1e-14 * m.max_abs();
        assert!(y.iter().all(|v| v.abs() <= bound), "M 1 = {y:?}");
    }

    #[test]
    fn onsager_rejects_nonpositive_concentration() {
        let coeffs = coeffs_n2(1.0, 0.0);
        let state = PointState::new(vec![1.0, -0.5], &coeffs).unwrap();
        match onsager_matrix(&state, &coeffs) {
            Err(TransportError::ConcentrationBelowFloor { species, value, .. }) => {
                assert_eq!(species, 1);
                assert_eq!(value, -0.5);
            }
            other => panic!("expected positivity error, got {other:?}"),
        }
    }

    #[test]
    fn augmentation_hand_value_and_rank_one() {
        let coeffs = coeffs_n2(1.0, 1.0);
        let state = PointState::new(vec![1.0, 1.0], &coeffs).unwrap();
        assert_eq!(state.rho, 2.0);
        let l = augmentation_matrix(&state, &coeffs).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(l[(i, j)], 0.5);
            }
        }
        // Rank 1: second eigenvalue is zero, L (1,1)^T = (1,1)^T.
        let eigs = symmetric_eigenvalues(&l);
        assert!(eigs[0].abs() <= 1e-13 * eigs[1]);
        let y = l.matvec(&[1.0, 1.0]);
        assert!((y[0] - 1.0).abs() < 1e-15 && (y[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn augmented_matrix_is_identity_for_symmetric_pair() {
        let coeffs = coeffs_n2(1.0, 1.0);
        let state = PointState::new(vec![1.0, 1.0], &coeffs).unwrap();
        let mg = augmented_matrix(&state, &coeffs).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((mg[(i, j)] - expected).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn gamma_zero_returns_onsager_exactly() {
        let coeffs = coeffs_n2(1.7, 0.0);
        let state = PointState::new(vec![0.4, 2.5], &coeffs).unwrap();
        let m = onsager_matrix(&state, &coeffs).unwrap();
        let mg = augmented_matrix(&state, &coeffs).unwrap();
        assert_eq!(m, mg);
    }

    #[test]
    fn spectral_report_two_species_analytic() {
        let coeffs = coeffs_n2(1.0, 1.0);
        let state = PointState::new(vec![1.0, 1.0], &coeffs).unwrap();
        let (eigs, min_aug) = spectral_report(&state, &coeffs).unwrap();
        assert!(eigs[0].abs() <= 1e-12 * eigs[1]);
        assert!((eigs[1] - 1.0).abs() < 1e-14);
        assert!((min_aug - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_scale_linearly_with_concentration() {
        let coeffs = TransportCoefficients::new(
            3,
            &[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)],
            vec![1.0, 1.0, 1.0],
            1.0,
            0.0,
        )
        .unwrap();
        let base = PointState::new(vec![1.0, 2.0, 3.0], &coeffs).unwrap();
        let alpha = 2.5;
        let scaled = PointState::new(vec![2.5, 5.0, 7.5], &coeffs).unwrap();
        let (e0, _) = spectral_report(&base, &coeffs).unwrap();
        let (e1, _) = spectral_report(&scaled, &coeffs).unwrap();
        for (a, b) in e0.iter().zip(&e1) {
            assert!((b - alpha * a).abs() <= 1e-12 * e0[2].max(1.0));
        }
    }

    #[test]
    fn negative_cross_diffusivity_is_accepted() {
        let coeffs = TransportCoefficients::new(
            3,
            &[(0, 1, 1.0), (0, 2, -2.0), (1, 2, 3.0)],
            vec![1.0, 1.0, 1.0],
            1.0,
            0.0,
        )
        .unwrap();
        let state = PointState::new(vec![1.0, 1.0, 1.0], &coeffs).unwrap();
        // Construction succeeds; lambda_2 may now be nonpositive and the
        // report simply says so.
        let (eigs, _) = spectral_report(&state, &coeffs).unwrap();
        assert_eq!(eigs.len(), 3);
    }

    #[test]
    fn zero_diffusivity_is_rejected() {
        let err = TransportCoefficients::new(2, &[(0, 1, 0.0)], vec![1.0, 1.0], 1.0, 1.0);
        assert!(matches!(err, Err(TransportError::ZeroDiffusivity { .. })));
    }

    #[test]
    fn single_species_is_rejected() {
        let err = TransportCoefficients::new(1, &[], vec![1.0], 1.0, 1.0);
        assert!(matches!(err, Err(TransportError::TooFewSpecies(1))));
    }

    #[test]
    fn spectral_gap_is_positive_on_random_states() {
        // With positive diffusivities and concentrations bounded away from
        // zero, the second eigenvalue stays strictly positive: 100 states
        // with floor 0.1.
        let mut seed = 12345u64;
        let mut next = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let n = 2 + (next() * 4.0) as usize; // 2..=5
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.push((i, j, 0.2 + 3.0 * next()));
                }
            }
            let coeffs = TransportCoefficients::new(n, &pairs, vec![1.0; n], 1.0, 0.0).unwrap();
            let conc: Vec<f64> = (0..n).map(|_| 0.1 + 4.0 * next()).collect();
            let state = PointState::new(conc, &coeffs).unwrap();
            let (eigs, _) = spectral_report(&state, &coeffs).unwrap();
            assert!(eigs[0].abs() <= 1e-12 * eigs[n - 1]);
            assert!(eigs[1] > 0.0, "lambda_2 = {} for n = {n}", eigs[1]);
        }
    }

    #[test]
    fn missing_diffusivity_is_rejected() {
        let err = TransportCoefficients::new(3, &[(0, 1, 1.0)], vec![1.0; 3], 1.0, 1.0);
        assert!(matches!(
            err,
            Err(TransportError::MissingDiffusivity { i: 0, j: 2 })
        ));
    }

    #[test]
    fn dissipation_identity_with_rt_not_one() {
        // RT != 1 pins the RT / rho factor in the augmentation term.
        let coeffs = TransportCoefficients::new(
            3,
            &[(0, 1, 2.0), (0, 2, 0.7), (1, 2, 1.9)],
            vec![1.0, 3.0, 0.5],
            2.75,
            1.4,
        )
        .unwrap();
        let state = PointState::new(vec![0.9, 0.4, 1.6], &coeffs).unwrap();
        let velocities = [[0.3, -1.0], [2.0, 0.1], [-0.7, 0.9]];
        let mg = augmented_matrix(&state, &coeffs).unwrap();
        let lhs = blockwise_quadratic_form(&mg, &velocities);
        let rhs = pairwise_dissipation(&state, &coeffs, &velocities);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn state_strategy() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)>
        {
            (2usize..=6).prop_flat_map(|n| {
                let pairs = n * (n - 1) / 2;
                (
                    Just(n),
                    proptest::collection::vec(0.1f64..5.0, n),
                    proptest::collection::vec(0.2f64..4.0, pairs),
                    proptest::collection::vec(0.5f64..3.0, n),
                    0.5f64..2.0,
                    0.0f64..2.0,
                )
            })
        }

        fn build(
            n: usize,
            diffusivities: &[f64],
            masses: Vec<f64>,
            rt: f64,
            gamma: f64,
        ) -> TransportCoefficients {
            let mut pairs = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.push((i, j, diffusivities[k]));
                    k += 1;
                }
            }
            TransportCoefficients::new(n, &pairs, masses, rt, gamma).unwrap()
        }

        proptest! {
            #[test]
            fn onsager_structure_invariants(
                (n, conc, diff, masses, rt, gamma) in state_strategy(),
                shift in -3.0f64..3.0,
                alpha in 0.1f64..4.0,
            ) {
                let coeffs = build(n, &diff, masses, rt, gamma);
                let state = PointState::new(conc.clone(), &coeffs).unwrap();
                let m = onsager_matrix(&state, &coeffs).unwrap();

                // Exact symmetry and row sums at rounding level.
                prop_assert!(m.is_symmetric_exact());
                prop_assert!(m.max_abs_row_sum() <= 1e-14 * m.max_abs());

                // Action is invariant under constant velocity shifts.
                let v: Vec<f64> = (0..n).map(|i| (i as f64) - 1.2).collect();
                let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
                let (y0, y1) = (m.matvec(&v), m.matvec(&shifted));
                for (a, b) in y0.iter().zip(&y1) {
                    prop_assert!((a - b).abs() <= 1e-12 * m.max_abs().max(1.0));
                }

                // Entries are 1-homogeneous in the concentrations.
                let scaled =
                    PointState::new(conc.iter().map(|c| alpha * c).collect(), &coeffs).unwrap();
                let ms = onsager_matrix(&scaled, &coeffs).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        prop_assert!(
                            (ms[(i, j)] - alpha * m[(i, j)]).abs()
                                <= 1e-14 * (alpha * m.max_abs()).max(1e-300)
                        );
                    }
                }
            }

            #[test]
            fn dissipation_identity_holds(
                (n, conc, diff, masses, rt, gamma) in state_strategy(),
            ) {
                let coeffs = build(n, &diff, masses, rt, gamma);
                let state = PointState::new(conc, &coeffs).unwrap();
                let mg = augmented_matrix(&state, &coeffs).unwrap();
                let velocities: Vec<[f64; 2]> = (0..n)
                    .map(|i| [(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()])
                    .collect();
                let lhs = blockwise_quadratic_form(&mg, &velocities);
                let rhs = pairwise_dissipation(&state, &coeffs, &velocities);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn shift_invariance_of_onsager_action() {
        let coeffs = TransportCoefficients::new(
            4,
            &[
                (0, 1, 2.0),
                (0, 2, 1.0),
                (0, 3, 1.0),
                (1, 2, 1.0),
                (1, 3, 1.0),
                (2, 3, 3.0),
            ],
            vec![1.0, 2.0, 0.5, 1.5],
            1.0,
            0.0,
        )
        .unwrap();
        let state = PointState::new(vec![1.5, 0.5, 1.0, 1.0], &coeffs).unwrap();
        let m = onsager_matrix(&state, &coeffs).unwrap();
        let v = [0.2, -0.4, 1.1, 0.9];
        let shifted: Vec<f64> = v.iter().map(|x| x + 3.7).collect();
        let y0 = m.matvec(&v);
        let y1 = m.matvec(&shifted);
        for (a, b) in y0.iter().zip(&y1) {
            assert!((a - b).abs() <= 1e-12 * m.max_abs());
        }
    }
}
