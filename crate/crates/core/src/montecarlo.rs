//! Seeded trajectory simulation and empirical validation.
//!
//! Determinism contract: every trajectory draws from its own ChaCha stream
//! derived from `(seed, trajectory index)` and results are merged in
//! trajectory-index order, so ensembles are bit-identical for a fixed seed
//! and configuration regardless of how many threads run the simulation.
//! With the `parallel` feature (default) trajectories run on rayon;
//! [`simulate_sequential`] is always available as the fallback path and as a
//! benchmark baseline.
//!
//! Sampling goes through the normalized disturbance parameterization: a
//! standard normal is shifted by the disturbance mean and mapped through the
//! noise input matrix, so a rank-deficient noise matrix produces exactly
//! degenerate state noise instead of an approximately factored covariance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::numlin::Tolerance;
use crate::relations::LinearRelation;
use crate::sysmodel::{
    conditional_moments, state_support, InputSequence, StochasticLinearSystem,
};
use crate::{Error, Result};

/// Magnitude bound beyond which a trajectory counts as diverged.
pub const STATE_MAGNITUDE_LIMIT: f64 = 1e300;

/// Gate width for all statistical comparisons, in standard errors.
pub const STANDARD_ERROR_GATE: f64 = 5.0;

/// Seed, ensemble size and horizon of a simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SimulationConfig {
    pub seed: u64,
    pub trajectories: usize,
    pub horizon: usize,
}

impl SimulationConfig {
    pub fn new(seed: u64, trajectories: usize, horizon: usize) -> Result<Self> {
        if trajectories == 0 {
            return Err(Error::Invalid("ensemble needs at least one trajectory".into()));
        }
        Ok(Self {
            seed,
            trajectories,
            horizon,
        })
    }
}

/// One sampled state/output path over `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

/// Ensemble of independent trajectories, in trajectory-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub horizon: usize,
    pub state_dim: usize,
    pub output_dim: usize,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Tabular text export: a header comment, then one row per
    /// `(trajectory, t)` holding the trajectory index, the time, the state
    /// coordinates and the output coordinates, space-separated. Numbers are
    /// printed in shortest round-trip form, so identical ensembles export to
    /// identical bytes.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("# trajectory t");
        for i in 0..self.state_dim {
            out.push_str(&format!(" x{i}"));
        }
        for i in 0..self.output_dim {
            out.push_str(&format!(" y{i}"));
        }
        out.push('\n');
        for (idx, traj) in self.trajectories.iter().enumerate() {
            for t in 0..=self.horizon {
                out.push_str(&format!("{idx} {t}"));
                for v in traj.states[t].iter() {
                    out.push_str(&format!(" {v}"));
                }
                for v in traj.outputs[t].iter() {
                    out.push_str(&format!(" {v}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Symmetric square root of the output-noise covariance, with tiny negative
/// eigenvalues clipped to zero.
fn psi_factor(sys: &StochasticLinearSystem) -> Result<DMatrix<f64>> {
    let psi = sys.psi();
    let p = psi.nrows();
    if psi.norm() == 0.0 {
        return Ok(DMatrix::zeros(p, p));
    }
    let eig = psi.clone().symmetric_eigen();
    let scale = 1.0 + psi.norm();
    let mut sqrt_vals = DVector::zeros(p);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -1e-12 * scale {
            return Err(Error::Invalid(format!(
                "output-noise covariance has negative eigenvalue {l:.3e}"
            )));
        }
        sqrt_vals[i] = l.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose())
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

struct SimulationInputs<'a> {
    sys: &'a StochasticLinearSystem,
    x0: &'a DVector<f64>,
    u: &'a InputSequence,
    psi_root: DMatrix<f64>,
    seed: u64,
    horizon: usize,
}

fn simulate_one(inputs: &SimulationInputs<'_>, index: usize) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(inputs.seed);
    rng.set_stream(index as u64);

    let sys = inputs.sys;
    let (l, p) = (sys.noise_dim(), sys.output_dim());
    let horizon = inputs.horizon;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut outputs = Vec::with_capacity(horizon + 1);
    let mut x = inputs.x0.clone();

    for t in 0..=horizon {
        let noise = &inputs.psi_root * standard_normal_vector(&mut rng, p);
        outputs.push(sys.c() * &x + noise);
        states.push(x.clone());
        if t < horizon {
            let w = sys.mu() + standard_normal_vector(&mut rng, l);
            x = sys.a() * &x + sys.b() * inputs.u.value(t) + sys.g() * w;
            if !x.iter().all(|v| v.is_finite() && v.abs() <= STATE_MAGNITUDE_LIMIT) {
                return Err(Error::Numerical(format!(
                    "trajectory {index} exceeded the magnitude limit at time {}; \
                     the system is too unstable for this horizon",
                    t + 1
                )));
            }
        }
    }
    Ok(Trajectory { states, outputs })
}

fn validated_inputs<'a>(
    sys: &'a StochasticLinearSystem,
    x0: &'a DVector<f64>,
    u: &'a InputSequence,
    cfg: SimulationConfig,
) -> Result<SimulationInputs<'a>> {
    if x0.len() != sys.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            sys.state_dim()
        )));
    }
    if u.dim() != sys.input_dim() {
        return Err(Error::Dimension(format!(
            "input dimension {} does not match the system input dimension {}",
            u.dim(),
            sys.input_dim()
        )));
    }
    if u.horizon() < cfg.horizon {
        return Err(Error::Dimension(format!(
            "input horizon {} is shorter than the simulation horizon {}",
            u.horizon(),
            cfg.horizon
        )));
    }
    if cfg.trajectories == 0 {
        return Err(Error::Invalid("ensemble needs at least one trajectory".into()));
    }
    Ok(SimulationInputs {
        sys,
        x0,
        u,
        psi_root: psi_factor(sys)?,
        seed: cfg.seed,
        horizon: cfg.horizon,
    })
}

/// Samples an ensemble; runs on rayon when the `parallel` feature is
/// enabled, sequentially otherwise. Output is identical either way.
pub fn simulate(
    sys: &StochasticLinearSystem,
    x0: &DVector<f64>,
    u: &InputSequence,
    cfg: SimulationConfig,
) -> Result<TrajectoryEnsemble> {
    #[cfg(feature = "parallel")]
    {
        simulate_parallel(sys, x0, u, cfg)
    }
    #[cfg(not(feature = "parallel"))]
    {
        simulate_sequential(sys, x0, u, cfg)
    }
}

/// Single-threaded simulation path.
pub fn simulate_sequential(
    sys: &StochasticLinearSystem,
    x0: &DVector<f64>,
    u: &InputSequence,
    cfg: SimulationConfig,
) -> Result<TrajectoryEnsemble> {
    let inputs = validated_inputs(sys, x0, u, cfg)?;
    let trajectories = (0..cfg.trajectories)
        .map(|i| simulate_one(&inputs, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryEnsemble {
        horizon: cfg.horizon,
        state_dim: sys.state_dim(),
        output_dim: sys.output_dim(),
        trajectories,
    })
}

/// Data-parallel simulation path; trajectories are collected in index
/// order, so the result is bit-identical to the sequential path.
#[cfg(feature = "parallel")]
pub fn simulate_parallel(
    sys: &StochasticLinearSystem,
    x0: &DVector<f64>,
    u: &InputSequence,
    cfg: SimulationConfig,
) -> Result<TrajectoryEnsemble> {
    let inputs = validated_inputs(sys, x0, u, cfg)?;
    let trajectories = (0..cfg.trajectories)
        .into_par_iter()
        .map(|i| simulate_one(&inputs, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryEnsemble {
        horizon: cfg.horizon,
        state_dim: sys.state_dim(),
        output_dim: sys.output_dim(),
        trajectories,
    })
}

/// Which process of an ensemble to summarize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    State,
    Output,
}

/// Per-time sample means and unbiased sample covariances of one process.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub horizon: usize,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub sample_count: usize,
}

fn vectors_at<'a>(
    ensemble: &'a TrajectoryEnsemble,
    process: Process,
    t: usize,
) -> impl Iterator<Item = &'a DVector<f64>> {
    ensemble.trajectories.iter().map(move |traj| match process {
        Process::State => &traj.states[t],
        Process::Output => &traj.outputs[t],
    })
}

/// Unbiased per-time sample moments; needs at least two trajectories.
pub fn empirical_moments(
    ensemble: &TrajectoryEnsemble,
    process: Process,
) -> Result<EmpiricalMoments> {
    let count = ensemble.len();
    if count < 2 {
        return Err(Error::Invalid(
            "sample moments need at least two trajectories".into(),
        ));
    }
    let dim = match process {
        Process::State => ensemble.state_dim,
        Process::Output => ensemble.output_dim,
    };
    let mut means = Vec::with_capacity(ensemble.horizon + 1);
    let mut covariances = Vec::with_capacity(ensemble.horizon + 1);
    for t in 0..=ensemble.horizon {
        let mut mean = DVector::zeros(dim);
        for v in vectors_at(ensemble, process, t) {
            mean += v;
        }
        mean /= count as f64;
        let mut cov = DMatrix::zeros(dim, dim);
        for v in vectors_at(ensemble, process, t) {
            let d = v - &mean;
            cov += &d * d.transpose();
        }
        cov /= (count - 1) as f64;
        means.push(mean);
        covariances.push(cov);
    }
    Ok(EmpiricalMoments {
        horizon: ensemble.horizon,
        means,
        covariances,
        sample_count: count,
    })
}

/// What a single statistical comparison looked at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    Mean,
    Covariance,
    LaggedCovariance,
}

impl std::fmt::Display for MomentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MomentKind::Mean => "mean",
            MomentKind::Covariance => "covariance",
            MomentKind::LaggedCovariance => "lagged covariance",
        };
        f.write_str(s)
    }
}

/// One per-time moment comparison: largest deviation over entries, in
/// standard errors.
#[derive(Debug, Clone)]
pub struct MomentComparison {
    pub time: usize,
    pub kind: MomentKind,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Outcome of an output-law comparison.
#[derive(Debug, Clone)]
pub struct LawComparison {
    pub passed: bool,
    pub checks: Vec<MomentComparison>,
    pub sample_count: usize,
}

/// Centers samples of entry `j` at time `t`.
fn centered_entry(
    ensemble: &TrajectoryEnsemble,
    t: usize,
    j: usize,
    mean: &DVector<f64>,
) -> Vec<f64> {
    ensemble
        .trajectories
        .iter()
        .map(|traj| traj.outputs[t][j] - mean[j])
        .collect()
}

/// Two-sample deviation in standard errors, with a floor that treats
/// structurally exact zeros as agreeing.
fn deviation_in_se(est1: f64, var1: f64, est2: f64, var2: f64, n1: usize, n2: usize) -> f64 {
    let se = (var1 / n1 as f64 + var2 / n2 as f64).sqrt();
    let diff = (est1 - est2).abs();
    if diff == 0.0 {
        return 0.0;
    }
    if se == 0.0 {
        return f64::INFINITY;
    }
    diff / se
}

/// Compares the empirical output laws of two systems started from a related
/// pair of initial states and driven by the same input: per-time output
/// means, covariances and one lagged cross-covariance must agree within
/// five standard errors.
pub fn compare_output_laws(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    x0_1: &DVector<f64>,
    x0_2: &DVector<f64>,
    u: &InputSequence,
    cfg: SimulationConfig,
) -> Result<LawComparison> {
    if s1.output_dim() != s2.output_dim() {
        return Err(Error::Dimension(format!(
            "output dimensions differ ({} vs {})",
            s1.output_dim(),
            s2.output_dim()
        )));
    }
    let cfg2 = SimulationConfig {
        seed: cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        ..cfg
    };
    let ens1 = simulate(s1, x0_1, u, cfg)?;
    let ens2 = simulate(s2, x0_2, u, cfg2)?;
    let m1 = empirical_moments(&ens1, Process::Output)?;
    let m2 = empirical_moments(&ens2, Process::Output)?;
    let (n1, n2) = (ens1.len(), ens2.len());
    let p = s1.output_dim();

    let mut checks = Vec::new();
    for t in 0..=cfg.horizon {
        // Means, entrywise.
        let mut max_dev: f64 = 0.0;
        for j in 0..p {
            let dev = deviation_in_se(
                m1.means[t][j],
                m1.covariances[t][(j, j)],
                m2.means[t][j],
                m2.covariances[t][(j, j)],
                n1,
                n2,
            );
            max_dev = max_dev.max(dev);
        }
        checks.push(MomentComparison {
            time: t,
            kind: MomentKind::Mean,
            max_deviation: max_dev,
            passed: max_dev <= STANDARD_ERROR_GATE,
        });

        // Covariances, entrywise, with the standard error estimated from
        // the sample variance of the centered products.
        let mut max_dev: f64 = 0.0;
        for j in 0..p {
            for k in j..p {
                let (est1, var1) = product_moment(&ens1, t, t, j, k, &m1);
                let (est2, var2) = product_moment(&ens2, t, t, j, k, &m2);
                max_dev = max_dev.max(deviation_in_se(est1, var1, est2, var2, n1, n2));
            }
        }
        checks.push(MomentComparison {
            time: t,
            kind: MomentKind::Covariance,
            max_deviation: max_dev,
            passed: max_dev <= STANDARD_ERROR_GATE,
        });

        if t > 0 {
            let mut max_dev: f64 = 0.0;
            for j in 0..p {
                for k in 0..p {
                    let (est1, var1) = product_moment(&ens1, t, t - 1, j, k, &m1);
                    let (est2, var2) = product_moment(&ens2, t, t - 1, j, k, &m2);
                    max_dev = max_dev.max(deviation_in_se(est1, var1, est2, var2, n1, n2));
                }
            }
            checks.push(MomentComparison {
                time: t,
                kind: MomentKind::LaggedCovariance,
                max_deviation: max_dev,
                passed: max_dev <= STANDARD_ERROR_GATE,
            });
        }
    }

    Ok(LawComparison {
        passed: checks.iter().all(|c| c.passed),
        checks,
        sample_count: n1,
    })
}

/// Sample cross-moment `cov(y_j(t), y_k(tau))` together with the sample
/// variance of the underlying products (for its standard error).
fn product_moment(
    ensemble: &TrajectoryEnsemble,
    t: usize,
    tau: usize,
    j: usize,
    k: usize,
    moments: &EmpiricalMoments,
) -> (f64, f64) {
    let a = centered_entry(ensemble, t, j, &moments.means[t]);
    let b = centered_entry(ensemble, tau, k, &moments.means[tau]);
    let n = a.len() as f64;
    let mut mean = 0.0;
    for (x, y) in a.iter().zip(&b) {
        mean += x * y;
    }
    mean /= n;
    let mut var = 0.0;
    for (x, y) in a.iter().zip(&b) {
        var += (x * y - mean) * (x * y - mean);
    }
    var /= n - 1.0;
    (mean, var)
}

/// Axis-aligned box, possibly unbounded per coordinate.
#[derive(Debug, Clone)]
pub struct BoxSet {
    intervals: Vec<(f64, f64)>,
}

impl BoxSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if lo > hi || lo.is_nan() || hi.is_nan() {
                return Err(Error::Invalid(format!(
                    "box interval {i} is empty or invalid: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn ambient_dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        v.iter()
            .zip(&self.intervals)
            .all(|(&x, &(lo, hi))| x >= lo && x <= hi)
    }

    fn clamp(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(v.len(), |i, _| v[i].clamp(self.intervals[i].0, self.intervals[i].1))
    }
}

/// Outcome of an empirical state-law box comparison.
#[derive(Debug, Clone)]
pub struct BoxComparison {
    pub time: usize,
    pub p1: f64,
    pub p2: f64,
    pub standard_error: f64,
    pub passed: bool,
    pub sample_count: usize,
}

/// Membership tester for the relation image of `box ∩ support` as a set of
/// second-system states: `x2` belongs when some `x1` in the support's
/// affine set satisfies the box constraints and `R1 x1 = R2 x2`.
struct RelationImageMembership {
    offset: DVector<f64>,
    dirs: DMatrix<f64>,
    solve: DMatrix<f64>,      // pseudoinverse of R1 * dirs
    free: DMatrix<f64>,       // dirs * ker(R1 * dirs): free motions inside the support
    r1: DMatrix<f64>,
    r2: DMatrix<f64>,
    residual_scale: f64,
}

impl RelationImageMembership {
    fn new(
        offset: DVector<f64>,
        support: &crate::numlin::Subspace,
        rel: &LinearRelation,
        tol: Tolerance,
    ) -> Result<Self> {
        let dirs = support.basis().clone();
        let m = rel.r1() * &dirs;
        let solve = crate::numlin::pseudo_inverse(&m, tol)?;
        let (_, kernel) = crate::numlin::rank_and_kernel_scaled(&m, rel.r1().norm(), tol);
        let free = &dirs * kernel.basis();
        Ok(Self {
            offset,
            dirs,
            solve,
            free,
            r1: rel.r1().clone(),
            r2: rel.r2().clone(),
            residual_scale: 1.0 + rel.r1().norm() + rel.r2().norm(),
        })
    }

    /// Alternating projections between the support-constrained affine set
    /// and the box decide feasibility; both sets are convex, so the gap
    /// converges to zero exactly when the intersection is nonempty.
    fn contains(&self, x2: &DVector<f64>, boxset: &BoxSet) -> bool {
        let rhs = &self.r2 * x2 - &self.r1 * &self.offset;
        let z0 = &self.solve * &rhs;
        let residual = (&self.r1 * &self.dirs * &z0 - &rhs).norm();
        let tol = 1e-8 * (self.residual_scale + rhs.norm());
        if residual > tol {
            return false;
        }
        let base = &self.offset + &self.dirs * z0;
        if self.free.ncols() == 0 {
            return boxset
                .clamp(&base)
                .iter()
                .zip(base.iter())
                .all(|(a, b)| (a - b).abs() <= tol);
        }
        let mut x = base.clone();
        let gate = 1e-8 * (1.0 + base.norm());
        for _ in 0..500 {
            let clamped = boxset.clamp(&x);
            let back = &base + &self.free * (self.free.transpose() * (&clamped - &base));
            let gap = (&back - &clamped).norm();
            if gap <= gate {
                return true;
            }
            if (&back - &x).norm() <= 1e-14 * (1.0 + x.norm()) {
                return false;
            }
            x = back;
        }
        false
    }
}

/// Empirically compares the probability that the first system's state lies
/// in a box with the probability that the second system's state lies in the
/// relation image of the box intersected with the first state's support.
/// Passes when the two estimates agree within five binomial standard
/// errors.
pub fn compare_state_box_laws(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    rel: &LinearRelation,
    x0_1: &DVector<f64>,
    x0_2: &DVector<f64>,
    u: &InputSequence,
    t: usize,
    boxset: &BoxSet,
    cfg: SimulationConfig,
    tol: Tolerance,
) -> Result<BoxComparison> {
    if boxset.ambient_dim() != s1.state_dim() {
        return Err(Error::Dimension(format!(
            "box lives in dimension {}, expected the first state dimension {}",
            boxset.ambient_dim(),
            s1.state_dim()
        )));
    }
    if rel.n1() != s1.state_dim() || rel.n2() != s2.state_dim() {
        return Err(Error::Dimension(
            "relation shape does not match the state dimensions".into(),
        ));
    }
    if !rel.is_total(tol) {
        return Err(Error::Precondition(
            "the box comparison requires a total relation".into(),
        ));
    }
    if t > cfg.horizon {
        return Err(Error::Invalid(format!(
            "comparison time {t} exceeds the horizon {}",
            cfg.horizon
        )));
    }

    let run_cfg = SimulationConfig {
        horizon: t,
        ..cfg
    };
    let cfg2 = SimulationConfig {
        seed: run_cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        ..run_cfg
    };
    let ens1 = simulate(s1, x0_1, &u.truncate(t), run_cfg)?;
    let ens2 = simulate(s2, x0_2, &u.truncate(t), cfg2)?;

    let hits1 = ens1
        .trajectories
        .iter()
        .filter(|traj| boxset.contains(&traj.states[t]))
        .count();
    let p1 = hits1 as f64 / ens1.len() as f64;

    let (offset, support) = state_support(s1, x0_1, u, t)?;
    let membership = RelationImageMembership::new(offset, &support, rel, tol)?;
    let hits2 = ens2
        .trajectories
        .iter()
        .filter(|traj| membership.contains(&traj.states[t], boxset))
        .count();
    let p2 = hits2 as f64 / ens2.len() as f64;

    let pooled = (hits1 + hits2) as f64 / (ens1.len() + ens2.len()) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / ens1.len() as f64 + 1.0 / ens2.len() as f64)).sqrt();
    let passed = (p1 - p2).abs() <= STANDARD_ERROR_GATE * se;

    Ok(BoxComparison {
        time: t,
        p1,
        p2,
        standard_error: se,
        passed,
        sample_count: ens1.len(),
    })
}

/// Largest distance of any sampled state from its analytic support, in
/// units of `1e-10 * (1 + |x|)`; values at or below one confirm the
/// degeneracy structure of the ensemble.
pub fn max_support_deviation(
    sys: &StochasticLinearSystem,
    x0: &DVector<f64>,
    u: &InputSequence,
    ensemble: &TrajectoryEnsemble,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for t in 0..=ensemble.horizon {
        let (offset, dirs) = state_support(sys, x0, u, t)?;
        for traj in &ensemble.trajectories {
            let d = &traj.states[t] - &offset;
            let dist = dirs.distance(&d);
            let scale = 1e-10 * (1.0 + traj.states[t].norm());
            worst = worst.max(dist / scale);
        }
    }
    Ok(worst)
}

/// Analytic-versus-empirical comparison used by the simulation summary:
/// worst per-time deviations of the mean and covariance of both processes.
#[derive(Debug, Clone)]
pub struct MomentDeviation {
    pub process: Process,
    pub max_mean_deviation: f64,
    pub max_cov_deviation: f64,
}

/// Frobenius deviations between empirical and analytic moments, normalized
/// by `1 + norm(analytic)`.
pub fn moment_deviations(
    sys: &StochasticLinearSystem,
    x0: &DVector<f64>,
    u: &InputSequence,
    ensemble: &TrajectoryEnsemble,
) -> Result<Vec<MomentDeviation>> {
    let analytic = conditional_moments(sys, x0, &u.truncate(ensemble.horizon))?;
    let mut result = Vec::new();
    for process in [Process::State, Process::Output] {
        let empirical = empirical_moments(ensemble, process)?;
        let mut mean_dev: f64 = 0.0;
        let mut cov_dev: f64 = 0.0;
        for t in 0..=ensemble.horizon {
            let (m_ref, c_ref) = match process {
                Process::State => (&analytic.state_means[t], analytic.state_covs.cov(t, t)),
                Process::Output => (&analytic.output_means[t], analytic.output_covs.cov(t, t)),
            };
            mean_dev = mean_dev
                .max((&empirical.means[t] - m_ref).norm() / (1.0 + m_ref.norm()));
            cov_dev = cov_dev
                .max((&empirical.covariances[t] - &c_ref).norm() / (1.0 + c_ref.norm()));
        }
        result.push(MomentDeviation {
            process,
            max_mean_deviation: mean_dev,
            max_cov_deviation: cov_dev,
        });
    }
    Ok(result)
}
