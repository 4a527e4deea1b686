//! Shared fixtures and generators for integration tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochbisim::StochasticLinearSystem;

pub fn mat(rows: usize, cols: usize, vals: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, vals)
}

/// Two-state system whose second coordinate is unobserved, undriven and
/// noise-free; bisimilar to [`scalar_unit`] through matching first
/// coordinates.
pub fn planar_degenerate() -> StochasticLinearSystem {
    StochasticLinearSystem::new(
        mat(2, 2, &[1.0, 0.0, 0.0, 2.0]),
        mat(2, 1, &[1.0, 0.0]),
        mat(1, 2, &[1.0, 0.0]),
        mat(2, 1, &[1.0, 0.0]),
        DVector::zeros(1),
        mat(1, 1, &[0.0]),
    )
    .unwrap()
}

/// Like [`planar_degenerate`] but with full-rank state noise: externally
/// equivalent to [`scalar_unit`], yet not bisimilar to it.
pub fn planar_full_noise() -> StochasticLinearSystem {
    StochasticLinearSystem::new(
        mat(2, 2, &[1.0, 0.0, 0.0, 2.0]),
        mat(2, 1, &[1.0, 0.0]),
        mat(1, 2, &[1.0, 0.0]),
        DMatrix::identity(2, 2),
        DVector::zeros(2),
        mat(1, 1, &[0.0]),
    )
    .unwrap()
}

/// Scalar random-walk system with unit coefficients.
pub fn scalar_unit() -> StochasticLinearSystem {
    StochasticLinearSystem::new(
        mat(1, 1, &[1.0]),
        mat(1, 1, &[1.0]),
        mat(1, 1, &[1.0]),
        mat(1, 1, &[1.0]),
        DVector::zeros(1),
        mat(1, 1, &[0.0]),
    )
    .unwrap()
}

/// Two-state pair distinguishable only after two steps: identical one-step
/// statistics, different two-step state laws.
pub fn coupled_pair(a: f64, b: f64, sigma: f64) -> (StochasticLinearSystem, StochasticLinearSystem) {
    let s1 = StochasticLinearSystem::new(
        mat(2, 2, &[b, 1.0, 0.0, a]),
        DMatrix::zeros(2, 1),
        mat(1, 2, &[0.0, 1.0]),
        mat(2, 1, &[0.0, sigma]),
        DVector::zeros(1),
        mat(1, 1, &[0.0]),
    )
    .unwrap();
    let s2 = StochasticLinearSystem::new(
        mat(2, 2, &[b, 0.0, 0.0, a]),
        DMatrix::zeros(2, 1),
        mat(1, 2, &[0.0, 1.0]),
        mat(2, 1, &[0.0, sigma]),
        DVector::zeros(1),
        mat(1, 1, &[0.0]),
    )
    .unwrap();
    (s1, s2)
}

/// Three-state system with a repeated mode split between a noise-excited
/// and a silent copy; its bisimulation reduction has dimension two.
pub fn repeated_mode_system(alpha: f64, beta: f64) -> StochasticLinearSystem {
    StochasticLinearSystem::new(
        mat(3, 3, &[alpha, 0.0, 0.0, 0.0, alpha, 0.0, 0.0, 0.0, beta]),
        DMatrix::zeros(3, 1),
        mat(1, 3, &[0.0, 0.0, 1.0]),
        mat(3, 1, &[1.0, 0.0, 0.0]),
        DVector::zeros(1),
        mat(1, 1, &[0.0]),
    )
    .unwrap()
}

/// Deterministic RNG for test generators.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Well-conditioned invertible matrix: orthogonal factor times a bounded
/// diagonal, keeping the condition number around ten.
pub fn random_well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let raw = random_matrix(rng, n, n, 1.0) + DMatrix::identity(n, n) * 2.0;
    let qr = raw.qr();
    let q = qr.q();
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + 2.0 * (i as f64 / n.max(1) as f64)
        } else {
            0.0
        }
    });
    q * d
}

/// Random system with controlled observable dimension, noise rank and
/// stability, built in structured coordinates and mixed by a
/// well-conditioned similarity.
pub fn random_structured_system(
    rng: &mut ChaCha8Rng,
    n: usize,
    obs_dim: usize,
    noise_rank: usize,
    stable: bool,
) -> StochasticLinearSystem {
    assert!(obs_dim >= 1 && obs_dim <= n);
    loop {
        // Block-triangular state matrix: the trailing block is unobservable.
        let mut a = random_matrix(rng, n, n, 1.0);
        for i in 0..obs_dim {
            for j in obs_dim..n {
                a[(i, j)] = 0.0;
            }
        }
        let radius = stochbisim::numlin::spectral_radius(&a).unwrap();
        let target = if stable { 0.8 } else { 1.3 };
        if radius > 1e-6 {
            a *= target / radius;
        }
        let mut c = DMatrix::zeros(1, n);
        for j in 0..obs_dim {
            c[(0, j)] = rng.random_range(-2.0..2.0f64) + 0.5;
        }
        let g = random_matrix(rng, n, noise_rank.max(1), 1.0);
        let g = if noise_rank == 0 { DMatrix::zeros(n, 1) } else { g };
        let b = random_matrix(rng, n, 1, 1.0);
        let mu = DVector::from_fn(g.ncols(), |_, _| rng.random_range(-0.5..0.5));
        let psi = {
            let r = rng.random_range(0.1..1.0f64);
            mat(1, 1, &[r])
        };

        let t = random_well_conditioned(rng, n);
        let t_inv = t.clone().try_inverse().unwrap();
        let sys = StochasticLinearSystem::new(
            &t * a * &t_inv,
            &t * b,
            c * &t_inv,
            &t * g,
            mu,
            psi,
        )
        .unwrap();

        // Require the observable dimension to come out exactly as designed;
        // regenerate on the rare degenerate draw.
        let obs = stochbisim::sysmodel::obs_matrix(sys.a(), sys.c(), n).unwrap();
        if stochbisim::numlin::rank(&obs, stochbisim::Tolerance::default()) == obs_dim {
            return sys;
        }
    }
}

/// Applies a similarity transformation, producing a linearly equivalent
/// system.
pub fn transform_system(
    sys: &StochasticLinearSystem,
    t: &DMatrix<f64>,
) -> StochasticLinearSystem {
    let t_inv = t.clone().try_inverse().unwrap();
    StochasticLinearSystem::new(
        t * sys.a() * &t_inv,
        t * sys.b(),
        sys.c() * &t_inv,
        t * sys.g(),
        sys.mu().clone(),
        sys.psi().clone(),
    )
    .unwrap()
}
