//! The stochastic linear control system and its exact moment computations.
//!
//! A system is
//!
//! ```text
//! x(t+1) = A x(t) + B u(t) + G w(t),    w(t) ~ N(mu, I_l)  (white)
//! y(t)   = C x(t) + nu(t),              nu(t) ~ N(0, Psi)  (white)
//! ```
//!
//! The disturbance covariance is normalized to the identity; degeneracy of
//! the state noise is carried entirely by `G`. Loaders therefore reject any
//! supplied non-identity disturbance covariance instead of re-normalizing.

use nalgebra::{DMatrix, DVector};

use crate::numlin::{self, Subspace, Tolerance};
use crate::{Error, Result};

/// Margin below 1 that the spectral radius must clear for operations that
/// require stability.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Discrete-time stochastic linear control system.
#[derive(Debug, Clone)]
pub struct StochasticLinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    g: DMatrix<f64>,
    mu: DVector<f64>,
    psi: DMatrix<f64>,
}

fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

impl StochasticLinearSystem {
    /// Validates dimensional consistency and the noise covariance.
    ///
    /// `Psi` is symmetrized on load; a symmetry deviation or a negative
    /// eigenvalue beyond noise level is rejected.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        g: DMatrix<f64>,
        mu: DVector<f64>,
        psi: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square with positive size, found {} x {}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B must have {} rows, found {}",
                n,
                b.nrows()
            )));
        }
        let p = c.nrows();
        if p == 0 || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C must be p x {} with p > 0, found {} x {}",
                n,
                c.nrows(),
                c.ncols()
            )));
        }
        if g.nrows() != n {
            return Err(Error::Dimension(format!(
                "G must have {} rows, found {}",
                n,
                g.nrows()
            )));
        }
        let l = g.ncols();
        if mu.len() != l {
            return Err(Error::Dimension(format!(
                "mu must have length {}, found {}",
                l,
                mu.len()
            )));
        }
        if psi.nrows() != p || psi.ncols() != p {
            return Err(Error::Dimension(format!(
                "Psi must be {p} x {p}, found {} x {}",
                psi.nrows(),
                psi.ncols()
            )));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c), ("G", &g), ("Psi", &psi)] {
            if !all_finite(m) {
                return Err(Error::Invalid(format!("{name} contains non-finite entries")));
            }
        }
        if !mu.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid("mu contains non-finite entries".into()));
        }

        let scale = 1.0 + psi.norm();
        let asym = (&psi - psi.transpose()).norm();
        if asym > 1e-9 * scale {
            return Err(Error::Invalid(format!(
                "Psi is not symmetric (deviation {asym:.3e})"
            )));
        }
        let psi = 0.5 * (&psi + psi.transpose());
        let min_eig = psi
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-12 * scale {
            return Err(Error::Invalid(format!(
                "Psi is not positive semi-definite (smallest eigenvalue {min_eig:.3e})"
            )));
        }

        Ok(Self { a, b, c, g, mu, psi })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn noise_dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// `G mu`, the mean of the state noise `v = G w`.
    pub fn state_noise_mean(&self) -> DVector<f64> {
        &self.g * &self.mu
    }

    /// Directions excited by the state noise: `im(Reach_n(A, G))`.
    pub fn noise_reachable(&self, tol: Tolerance) -> Subspace {
        let n = self.state_dim();
        if self.noise_dim() == 0 {
            return Subspace::zero(n);
        }
        let reach = reach_matrix(&self.a, &self.g, n).expect("validated dimensions");
        numlin::image(&reach, tol)
    }

    /// Unobservable subspace: `ker(Obs_n(A, C))`.
    pub fn unobservable(&self, tol: Tolerance) -> Subspace {
        let obs = obs_matrix(&self.a, &self.c, self.state_dim()).expect("validated dimensions");
        numlin::rank_and_kernel(&obs, tol).1
    }

    /// Whether the state noise excites the full state space.
    pub fn is_nondegenerate(&self, tol: Tolerance) -> bool {
        self.noise_reachable(tol).is_full()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        numlin::spectral_radius(&self.a)
    }
}

/// Reachability-style block matrix `[M  A M  ...  A^(t-1) M]`.
pub fn reach_matrix(a: &DMatrix<f64>, m: &DMatrix<f64>, steps: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "reachability matrix needs a square A, found {} x {}",
            a.nrows(),
            a.ncols()
        )));
    }
    if m.nrows() != n {
        return Err(Error::Dimension(format!(
            "reachability matrix needs M with {} rows, found {}",
            n,
            m.nrows()
        )));
    }
    if steps == 0 {
        return Err(Error::Invalid("reachability horizon must be at least 1".into()));
    }
    let w = m.ncols();
    let mut out = DMatrix::zeros(n, steps * w);
    let mut block = m.clone();
    for k in 0..steps {
        out.view_mut((0, k * w), (n, w)).copy_from(&block);
        if k + 1 < steps {
            block = a * block;
        }
    }
    Ok(out)
}

/// Observability-style stacked matrix `[C; C A; ...; C A^(t-1)]`.
///
/// Equals `reach_matrix(A^T, C^T, t)^T` exactly.
pub fn obs_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>, steps: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "observability matrix needs a square A, found {} x {}",
            a.nrows(),
            a.ncols()
        )));
    }
    if c.ncols() != n {
        return Err(Error::Dimension(format!(
            "observability matrix needs C with {} columns, found {}",
            n,
            c.ncols()
        )));
    }
    if steps == 0 {
        return Err(Error::Invalid("observability horizon must be at least 1".into()));
    }
    let p = c.nrows();
    let mut out = DMatrix::zeros(steps * p, n);
    let mut block = c.clone();
    for k in 0..steps {
        out.view_mut((k * p, 0), (p, n)).copy_from(&block);
        if k + 1 < steps {
            block = &block * a;
        }
    }
    Ok(out)
}

/// Deterministic input sequence `u(0), ..., u(T-1)`.
#[derive(Debug, Clone)]
pub struct InputSequence {
    dim: usize,
    values: Vec<DVector<f64>>,
}

impl InputSequence {
    pub fn new(dim: usize, values: Vec<DVector<f64>>) -> Result<Self> {
        for (t, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "input at time {t} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::Invalid(format!("input at time {t} is not finite")));
            }
        }
        Ok(Self { dim, values })
    }

    /// All-zero input over the given horizon.
    pub fn zero(dim: usize, horizon: usize) -> Self {
        Self {
            dim,
            values: vec![DVector::zeros(dim); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, t: usize) -> &DVector<f64> {
        &self.values[t]
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    /// Restriction to `u(0), ..., u(horizon-1)`.
    pub fn truncate(&self, horizon: usize) -> Self {
        Self {
            dim: self.dim,
            values: self.values[..horizon.min(self.values.len())].to_vec(),
        }
    }
}

/// How the output-noise covariance enters the output covariance table.
///
/// The measurement noise is white, so its covariance contributes only at
/// equal times. `TimeCorrelated` instead adds `Psi` at every time pair (as
/// if a single noise draw were held across time) and exists purely as a
/// diagnostic comparison mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputNoiseModel {
    #[default]
    White,
    TimeCorrelated,
}

/// Lower-triangular table of cross-time covariance matrices.
#[derive(Debug, Clone)]
pub struct CovTable {
    horizon: usize,
    entries: Vec<DMatrix<f64>>, // (t, tau) with tau <= t, row-major by t
}

impl CovTable {
    fn index(t: usize, tau: usize) -> usize {
        t * (t + 1) / 2 + tau
    }

    /// `cov(z(t), z(tau))`; for `tau > t` the stored transpose is returned.
    pub fn cov(&self, t: usize, tau: usize) -> DMatrix<f64> {
        assert!(t <= self.horizon && tau <= self.horizon, "time out of range");
        if tau <= t {
            self.entries[Self::index(t, tau)].clone()
        } else {
            self.entries[Self::index(tau, t)].transpose()
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Conditional means and covariances of the state and output processes over
/// a finite horizon, given a deterministic initial state.
#[derive(Debug, Clone)]
pub struct MomentSequence {
    pub horizon: usize,
    pub state_means: Vec<DVector<f64>>,
    pub output_means: Vec<DVector<f64>>,
    pub state_covs: CovTable,
    pub output_covs: CovTable,
}

impl MomentSequence {
    pub fn state_mean(&self, t: usize) -> &DVector<f64> {
        &self.state_means[t]
    }

    pub fn output_mean(&self, t: usize) -> &DVector<f64> {
        &self.output_means[t]
    }
}

/// Exact conditional moments of the state and output processes for
/// `t = 0, ..., u.horizon()`.
///
/// The state covariance between times `t >= tau` is
/// `sum_{h=0}^{tau-1} A^(t-tau+h) G G^T (A^h)^T`; the output covariance adds
/// `Psi` on the diagonal (white measurement noise).
pub fn conditional_moments(
    sys: &StochasticLinearSystem,
    x0: &DVector<f64>,
    u: &InputSequence,
) -> Result<MomentSequence> {
    conditional_moments_with(sys, x0, u, OutputNoiseModel::White)
}

/// Same as [`conditional_moments`] with an explicit output-noise model.
pub fn conditional_moments_with(
    sys: &StochasticLinearSystem,
    x0: &DVector<f64>,
    u: &InputSequence,
    noise_model: OutputNoiseModel,
) -> Result<MomentSequence> {
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!(
            "initial state has length {}, expected {n}",
            x0.len()
        )));
    }
    if u.dim() != sys.input_dim() {
        return Err(Error::Dimension(format!(
            "input dimension {} does not match the system input dimension {}",
            u.dim(),
            sys.input_dim()
        )));
    }
    let horizon = u.horizon();

    // Powers of A, cached once per call.
    let mut powers: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    powers.push(DMatrix::identity(n, n));
    for t in 0..horizon {
        let next = sys.a() * &powers[t];
        powers.push(next);
    }

    let g_mu = sys.state_noise_mean();
    let mut state_means = Vec::with_capacity(horizon + 1);
    state_means.push(x0.clone());
    for t in 0..horizon {
        let next = sys.a() * &state_means[t] + sys.b() * u.value(t) + &g_mu;
        state_means.push(next);
    }
    let output_means: Vec<DVector<f64>> = state_means.iter().map(|m| sys.c() * m).collect();

    let ggt = sys.g() * sys.g().transpose();
    // Equal-time covariances S(tau) = sum_{h < tau} A^h G G^T (A^h)^T.
    let mut diag: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    diag.push(DMatrix::zeros(n, n));
    for tau in 0..horizon {
        let term = &powers[tau] * &ggt * powers[tau].transpose();
        diag.push(&diag[tau] + term);
    }

    let mut state_entries = Vec::with_capacity((horizon + 1) * (horizon + 2) / 2);
    let mut output_entries = Vec::with_capacity((horizon + 1) * (horizon + 2) / 2);
    for t in 0..=horizon {
        for tau in 0..=t {
            let cov_x = &powers[t - tau] * &diag[tau];
            let mut cov_y = sys.c() * &cov_x * sys.c().transpose();
            let add_psi = match noise_model {
                OutputNoiseModel::White => t == tau,
                OutputNoiseModel::TimeCorrelated => true,
            };
            if add_psi {
                cov_y += sys.psi();
            }
            state_entries.push(cov_x);
            output_entries.push(cov_y);
        }
    }

    Ok(MomentSequence {
        horizon,
        state_means,
        output_means,
        state_covs: CovTable {
            horizon,
            entries: state_entries,
        },
        output_covs: CovTable {
            horizon,
            entries: output_entries,
        },
    })
}

/// Affine support of the conditional state distribution at time `t`:
/// the conditional mean offset plus the noise-excited directions.
pub fn state_support(
    sys: &StochasticLinearSystem,
    x0: &DVector<f64>,
    u: &InputSequence,
    t: usize,
) -> Result<(DVector<f64>, Subspace)> {
    if t > u.horizon() {
        return Err(Error::Invalid(format!(
            "support time {t} exceeds the input horizon {}",
            u.horizon()
        )));
    }
    let moments = conditional_moments(sys, x0, &u.truncate(t))?;
    let offset = moments.state_means[t].clone();
    let n = sys.state_dim();
    let directions = if t == 0 || sys.noise_dim() == 0 {
        Subspace::zero(n)
    } else {
        // The excited image stabilizes at t = n.
        let steps = t.min(n);
        numlin::image(
            &reach_matrix(sys.a(), sys.g(), steps)?,
            Tolerance::default(),
        )
    };
    Ok((offset, directions))
}

/// Steady-state solution of `P = A P A^T + G G^T`, solved as the linear
/// system `(I - A (x) A) vec(P) = vec(G G^T)`.
///
/// Requires the spectral radius of `A` to be below `1 - STABILITY_MARGIN`.
pub fn stationary_state_covariance(sys: &StochasticLinearSystem) -> Result<DMatrix<f64>> {
    let rho = sys.spectral_radius()?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::Unstable { rho });
    }
    let n = sys.state_dim();
    let ggt = sys.g() * sys.g().transpose();
    let kron = sys.a().kronecker(sys.a());
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - kron;
    let rhs = DVector::from_column_slice(ggt.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("stationary covariance solve failed".into()))?;
    let mut psi_x = DMatrix::from_column_slice(n, n, sol.as_slice());
    psi_x = 0.5 * (&psi_x + psi_x.transpose());

    let residual = (&psi_x - sys.a() * &psi_x * sys.a().transpose() - &ggt).norm();
    let bound = 1e-8 * (1.0 + ggt.norm());
    if residual > bound {
        return Err(Error::Numerical(format!(
            "stationary covariance residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(psi_x)
}
