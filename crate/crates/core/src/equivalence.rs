//! Decision procedures for the three equivalence notions.
//!
//! Each checker evaluates a fixed list of named conditions and reports every
//! one of them with a residual, so a failing verdict always says which
//! condition broke and by how much. Time quantifiers ("for all t") are
//! truncated at `n1 + n2` powers of the state matrices; by Cayley-Hamilton
//! the truncated tests are equivalent to the unbounded ones.

use nalgebra::DMatrix;
use std::fmt;

use crate::numlin::{self, Tolerance};
use crate::relations::LinearRelation;
use crate::sysmodel::{obs_matrix, reach_matrix, StochasticLinearSystem, STABILITY_MARGIN};
use crate::{Error, Result};

/// Identifier of a checked condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionId {
    /// Output-noise covariances agree.
    P0,
    /// Input-to-output impulse responses agree.
    P1,
    /// Noise-mean-to-output responses agree.
    P2,
    /// Output covariance contributions of the state noise agree.
    P3,
    /// The relation is contained in the paired unobservable kernel.
    P4,
    /// Relation kernel is invariant under the paired state matrices.
    H0,
    /// Relation matches the input matrices.
    H1,
    /// Relation matches the state-noise means.
    H2,
    /// Relation matches the state-noise covariances.
    H3,
    /// Relation kernel is below the paired output map kernel.
    H4,
    /// Noise-excited directions never collapse under the relation.
    H5,
    /// Relation totality (three-rank test).
    Kost,
    /// Similarity-transform equalities.
    Lin,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionId::P0 => "p0",
            ConditionId::P1 => "p1",
            ConditionId::P2 => "p2",
            ConditionId::P3 => "p3",
            ConditionId::P4 => "p4",
            ConditionId::H0 => "h0",
            ConditionId::H1 => "h1",
            ConditionId::H2 => "h2",
            ConditionId::H3 => "h3",
            ConditionId::H4 => "h4",
            ConditionId::H5 => "h5",
            ConditionId::Kost => "kost",
            ConditionId::Lin => "lin",
        };
        f.write_str(s)
    }
}

/// One evaluated condition.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub id: ConditionId,
    pub passed: bool,
    pub residual: f64,
    pub note: Option<String>,
    /// Optional witness matrix (e.g. a least-squares noise-matching factor,
    /// or a basis of an offending intersection).
    pub witness: Option<DMatrix<f64>>,
}

impl ConditionCheck {
    fn new(id: ConditionId, passed: bool, residual: f64) -> Self {
        Self {
            id,
            passed,
            residual,
            note: None,
            witness: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn with_witness(mut self, witness: DMatrix<f64>) -> Self {
        self.witness = Some(witness);
        self
    }

    /// Flags conditions whose residual sits within a decade of the decision
    /// gate; such verdicts can flip under small tolerance changes.
    fn near_threshold(&self, gate: f64) -> bool {
        let r = self.residual;
        if self.passed {
            r >= 0.1 * gate && gate > 0.0
        } else {
            r <= 10.0 * gate
        }
    }
}

/// Overall outcome of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// All required conditions hold.
    Holds,
    /// At least one required condition fails conclusively.
    Fails,
    /// The decision theory does not cover this input (e.g. the invariance
    /// hypothesis of the bisimulation test fails, which makes the condition
    /// list sufficient-only).
    Inconclusive,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Verdict plus per-condition diagnostics and the tolerances used.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub conditions: Vec<ConditionCheck>,
    pub notes: Vec<String>,
    pub tolerance: Tolerance,
}

impl CheckReport {
    fn from_conditions(conditions: Vec<ConditionCheck>, tolerance: Tolerance) -> Self {
        let verdict = if conditions.iter().all(|c| c.passed) {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
        let mut report = Self {
            verdict,
            conditions,
            notes: Vec::new(),
            tolerance,
        };
        report.flag_near_threshold();
        report
    }

    fn flag_near_threshold(&mut self) {
        let gate = self.tolerance.eq_gate(1.0);
        for c in &self.conditions {
            if c.near_threshold(gate) {
                self.notes.push(format!(
                    "condition {} has residual {:.3e} near the decision gate; \
                     the verdict may be sensitive to tolerance choices",
                    c.id, c.residual
                ));
            }
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }

    pub fn condition(&self, id: ConditionId) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.id == id)
    }

    /// All entries for a condition id (h5 is reported once per system).
    pub fn conditions_with(&self, id: ConditionId) -> Vec<&ConditionCheck> {
        self.conditions.iter().filter(|c| c.id == id).collect()
    }
}

fn equal_cond(
    id: ConditionId,
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
    tol: Tolerance,
) -> Result<ConditionCheck> {
    let (passed, residual) = numlin::matrices_equal(m1, m2, tol)?;
    Ok(ConditionCheck::new(id, passed, residual))
}

fn require_same_io(s1: &StochasticLinearSystem, s2: &StochasticLinearSystem) -> Result<()> {
    if s1.input_dim() != s2.input_dim() {
        return Err(Error::Dimension(format!(
            "input dimensions differ ({} vs {})",
            s1.input_dim(),
            s2.input_dim()
        )));
    }
    if s1.output_dim() != s2.output_dim() {
        return Err(Error::Dimension(format!(
            "output dimensions differ ({} vs {})",
            s1.output_dim(),
            s2.output_dim()
        )));
    }
    Ok(())
}

/// Paired observability maps truncated at `n1 + n2` steps.
fn paired_obs(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    steps: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Ok((
        obs_matrix(s1.a(), s1.c(), steps)?,
        obs_matrix(s2.a(), s2.c(), steps)?,
    ))
}

/// Conditions p0-p3 at an explicit truncation horizon. Exposed through
/// [`check_external_equivalence`]; the horizon parameter exists so the
/// truncation-consistency property can be tested.
pub(crate) fn external_conditions(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    steps: usize,
    tol: Tolerance,
) -> Result<Vec<ConditionCheck>> {
    let (q1, q2) = paired_obs(s1, s2, steps)?;

    let mut conditions = Vec::new();
    conditions.push(equal_cond(ConditionId::P0, s1.psi(), s2.psi(), tol)?);
    conditions.push(equal_cond(ConditionId::P1, &(&q1 * s1.b()), &(&q2 * s2.b()), tol)?);

    let gm1 = DMatrix::from_column_slice(s1.state_dim(), 1, s1.state_noise_mean().as_slice());
    let gm2 = DMatrix::from_column_slice(s2.state_dim(), 1, s2.state_noise_mean().as_slice());
    conditions.push(equal_cond(ConditionId::P2, &(&q1 * gm1), &(&q2 * gm2), tol)?);

    // p3 compares the full output-covariance contribution of the state
    // noise: Q1 G1 (Q1 G1)^T = Q2 G2 (Q2 G2)^T. The weaker image-equality
    // reformulation (existence of a matching factor H) is reported as a
    // diagnostic witness; image equality alone would accept a rescaled G.
    let qg1 = &q1 * s1.g();
    let qg2 = &q2 * s2.g();
    let mut p3 = equal_cond(
        ConditionId::P3,
        &(&qg1 * qg1.transpose()),
        &(&qg2 * qg2.transpose()),
        tol,
    )?;
    let h = numlin::least_squares(&qg1, &qg2, tol)?;
    let h_residual = (&qg1 * &h - &qg2).norm();
    p3 = p3
        .with_note(format!(
            "noise-matching factor H has residual {h_residual:.3e}"
        ))
        .with_witness(h);
    conditions.push(p3);

    Ok(conditions)
}

/// Checks equivalence of stochastic external behavior.
///
/// With a relation supplied, the verdict is p0-p3 plus p4 (the relation must
/// be contained in the kernel of the paired observability stack): related
/// initial states then produce identically distributed output processes for
/// every input. Without a relation, the verdict is p0-p3 plus totality of
/// the maximal relation, which decides whether any suitable total relation
/// exists.
pub fn check_external_equivalence(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    rel: Option<&LinearRelation>,
    tol: Tolerance,
) -> Result<CheckReport> {
    require_same_io(s1, s2)?;
    let steps = s1.state_dim() + s2.state_dim();
    let mut conditions = external_conditions(s1, s2, steps, tol)?;
    let (q1, q2) = paired_obs(s1, s2, steps)?;
    let paired = LinearRelation::new(q1, q2)?;

    match rel {
        Some(rel) => {
            if rel.n1() != s1.state_dim() || rel.n2() != s2.state_dim() {
                return Err(Error::Dimension(format!(
                    "relation shape ({}, {}) does not match state dimensions ({}, {})",
                    rel.n1(),
                    rel.n2(),
                    s1.state_dim(),
                    s2.state_dim()
                )));
            }
            let kernel = rel.kernel_stack(tol);
            let paired_kernel = paired.kernel_stack(tol);
            let residual = numlin::containment_residual(&kernel, &paired_kernel);
            let passed = numlin::is_contained(&kernel, &paired_kernel, tol)?;
            let mut p4 = ConditionCheck::new(ConditionId::P4, passed, residual);
            if !rel.is_total(tol) {
                p4 = p4.with_note(
                    "the supplied relation is not total; the verdict covers only related states",
                );
            }
            conditions.push(p4);
        }
        None => {
            let total = paired.is_total(tol);
            conditions.push(
                ConditionCheck::new(ConditionId::Kost, total, if total { 0.0 } else { 1.0 })
                    .with_note("totality of the maximal relation"),
            );
        }
    }

    Ok(CheckReport::from_conditions(conditions, tol))
}

/// The largest relation ensuring equivalent external behavior: the pair of
/// observability stacks truncated at `n1 + n2` steps. Its kernel is
/// invariant under `diag(A1, A2)` by construction.
pub fn maximal_external_relation(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
) -> Result<LinearRelation> {
    if s1.output_dim() != s2.output_dim() {
        return Err(Error::Dimension(format!(
            "output dimensions differ ({} vs {})",
            s1.output_dim(),
            s2.output_dim()
        )));
    }
    let steps = s1.state_dim() + s2.state_dim();
    let (q1, q2) = paired_obs(s1, s2, steps)?;
    LinearRelation::new(q1, q2)
}

/// Checks that a supplied total relation is a stochastic bisimulation
/// relation between the two systems.
///
/// The condition list (h0-h5, plus p0 for the output noise) is necessary and
/// sufficient when the relation kernel is invariant under `diag(A1, A2)`
/// (h0). When h0 fails the list is only sufficient, so a failure among
/// h1-h5 yields an inconclusive verdict rather than a negative one.
pub fn check_bisimulation(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    rel: &LinearRelation,
    tol: Tolerance,
) -> Result<CheckReport> {
    require_same_io(s1, s2)?;
    if rel.n1() != s1.state_dim() || rel.n2() != s2.state_dim() {
        return Err(Error::Dimension(format!(
            "relation shape ({}, {}) does not match state dimensions ({}, {})",
            rel.n1(),
            rel.n2(),
            s1.state_dim(),
            s2.state_dim()
        )));
    }
    if !rel.is_total(tol) {
        return Err(Error::Precondition(
            "the relation is not total (the ranks of R1, R2 and [R1 -R2] differ); \
             the bisimulation test requires totality"
                .into(),
        ));
    }

    let mut conditions = Vec::new();
    conditions.push(equal_cond(ConditionId::P0, s1.psi(), s2.psi(), tol)?);

    let kernel = rel.kernel_stack(tol);
    let a_pair = numlin::block_diag(s1.a(), s2.a());
    let h0_passed = numlin::is_invariant(&a_pair, &kernel, tol)?;
    conditions.push(ConditionCheck::new(
        ConditionId::H0,
        h0_passed,
        if h0_passed { 0.0 } else { 1.0 },
    ));

    conditions.push(equal_cond(
        ConditionId::H1,
        &(rel.r1() * s1.b()),
        &(rel.r2() * s2.b()),
        tol,
    )?);

    let rgm1 = rel.r1() * s1.state_noise_mean();
    let rgm2 = rel.r2() * s2.state_noise_mean();
    conditions.push(equal_cond(
        ConditionId::H2,
        &DMatrix::from_column_slice(rgm1.len(), 1, rgm1.as_slice()),
        &DMatrix::from_column_slice(rgm2.len(), 1, rgm2.as_slice()),
        tol,
    )?);

    let rg1 = rel.r1() * s1.g();
    let rg2 = rel.r2() * s2.g();
    let mut h3 = equal_cond(
        ConditionId::H3,
        &(&rg1 * rg1.transpose()),
        &(&rg2 * rg2.transpose()),
        tol,
    )?;
    let h = numlin::least_squares(&rg1, &rg2, tol)?;
    let h_residual = (&rg1 * &h - &rg2).norm();
    h3 = h3
        .with_note(format!(
            "noise-matching factor H has residual {h_residual:.3e}"
        ))
        .with_witness(h);
    conditions.push(h3);

    let c_pair = numlin::hcat(s1.c(), &(-s2.c()));
    let (_, c_kernel) = numlin::rank_and_kernel(&c_pair, tol);
    let h4_residual = numlin::containment_residual(&kernel, &c_kernel);
    conditions.push(ConditionCheck::new(
        ConditionId::H4,
        numlin::is_contained(&kernel, &c_kernel, tol)?,
        h4_residual,
    ));

    for (i, sys, r) in [(1usize, s1, rel.r1()), (2usize, s2, rel.r2())] {
        let excited = sys.noise_reachable(tol);
        let (_, r_kernel) = numlin::rank_and_kernel(r, tol);
        let meet = numlin::intersect(&excited, &r_kernel, tol)?;
        let passed = meet.is_zero();
        let mut check = ConditionCheck::new(
            ConditionId::H5,
            passed,
            meet.dim() as f64,
        )
        .with_note(format!("system {i}"));
        if !passed {
            check = check.with_witness(meet.basis().clone());
        }
        conditions.push(check);
    }

    let mut report = CheckReport::from_conditions(conditions, tol);
    if !h0_passed && report.verdict == Verdict::Fails {
        // Without kernel invariance the conditions are sufficient but not
        // necessary, so their failure proves nothing.
        report.verdict = Verdict::Inconclusive;
        report.notes.push(
            "h0 fails: the condition list is only sufficient for non-invariant relations, \
             so the failing conditions do not disprove bisimilarity"
                .into(),
        );
    } else if !h0_passed {
        report.verdict = Verdict::Inconclusive;
    }
    Ok(report)
}

/// Checks linear equivalence through an explicit transformation matrix.
///
/// The verdict requires equal output-noise covariances, an invertible `T`
/// and the five similarity equalities
/// `A2 T = T A1`, `B2 = T B1`, `C2 T = C1`, `G2 = T G1`, `G2 mu2 = T G1 mu1`.
/// Unequal state dimensions or a non-square `T` are malformed input, not a
/// negative verdict.
pub fn check_linear_equivalence(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    t: &DMatrix<f64>,
    tol: Tolerance,
) -> Result<CheckReport> {
    let n = s1.state_dim();
    if s2.state_dim() != n {
        return Err(Error::Dimension(format!(
            "linear equivalence needs equal state dimensions, found {} and {}",
            n,
            s2.state_dim()
        )));
    }
    if t.nrows() != n || t.ncols() != n {
        return Err(Error::Dimension(format!(
            "transformation matrix must be {n} x {n}, found {} x {}",
            t.nrows(),
            t.ncols()
        )));
    }

    let mut conditions = Vec::new();
    conditions.push(equal_cond(ConditionId::P0, s1.psi(), s2.psi(), tol)?);

    // Mismatched input/output/noise widths cannot satisfy the matrix
    // equalities, so they produce a negative verdict rather than an error.
    let widths_match = s1.input_dim() == s2.input_dim()
        && s1.output_dim() == s2.output_dim()
        && s1.noise_dim() == s2.noise_dim();

    let invertible = numlin::rank(t, tol) == n;
    if !widths_match {
        conditions.push(
            ConditionCheck::new(ConditionId::Lin, false, f64::INFINITY).with_note(
                "input/output/noise dimensions differ, so no transformation can match them",
            ),
        );
        return Ok(CheckReport::from_conditions(conditions, tol));
    }

    let residuals = [
        numlin::matrices_equal(&(s2.a() * t), &(t * s1.a()), tol)?,
        numlin::matrices_equal(s2.b(), &(t * s1.b()), tol)?,
        numlin::matrices_equal(&(s2.c() * t), s1.c(), tol)?,
        numlin::matrices_equal(s2.g(), &(t * s1.g()), tol)?,
        {
            let lhs = DMatrix::from_column_slice(n, 1, s2.state_noise_mean().as_slice());
            let rhs = t * s1.state_noise_mean();
            let rhs = DMatrix::from_column_slice(n, 1, rhs.as_slice());
            numlin::matrices_equal(&lhs, &rhs, tol)?
        },
    ];
    let all_equal = residuals.iter().all(|(eq, _)| *eq);
    let max_residual = residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let labels = ["state", "input", "output", "noise", "noise mean"];
    let failing: Vec<&str> = residuals
        .iter()
        .zip(labels)
        .filter_map(|((eq, _), l)| (!eq).then_some(l))
        .collect();

    let mut lin = ConditionCheck::new(ConditionId::Lin, invertible && all_equal, max_residual)
        .with_witness(t.clone());
    if !invertible {
        lin = lin.with_note("the transformation matrix is singular");
    } else if !failing.is_empty() {
        lin = lin.with_note(format!("mismatched maps: {}", failing.join(", ")));
    }
    conditions.push(lin);

    Ok(CheckReport::from_conditions(conditions, tol))
}

/// Extracts the transformation matrix `T = pinv(R2) R1` from a total
/// relation whose `R2` has full column rank equal to both state dimensions.
pub fn derive_transformation(rel: &LinearRelation, tol: Tolerance) -> Result<DMatrix<f64>> {
    let n = rel.n1();
    if rel.n2() != n {
        return Err(Error::Precondition(format!(
            "transformation extraction needs equal state dimensions, found {} and {}",
            n,
            rel.n2()
        )));
    }
    if !rel.is_total(tol) {
        return Err(Error::Precondition(
            "transformation extraction needs a total relation".into(),
        ));
    }
    if numlin::rank(rel.r2(), tol) != n {
        return Err(Error::Precondition(format!(
            "R2 has rank {} < {}; with degenerate noise the relation does not determine \
             a state transformation, use the general bisimulation checker instead",
            numlin::rank(rel.r2(), tol),
            n
        )));
    }
    let t = numlin::pseudo_inverse(rel.r2(), tol)? * rel.r1();
    if numlin::rank(&t, tol) != n {
        return Err(Error::Numerical(
            "extracted transformation is singular within tolerance".into(),
        ));
    }
    Ok(t)
}

/// Decides bisimulation equivalence for systems whose state noise excites
/// the full state space; for such systems bisimulation equivalence holds
/// exactly when the systems are linearly equivalent.
///
/// Unequal state dimensions (or unequal observability ranks, which are
/// similarity invariants) conclude negatively. For observable pairs the
/// candidate transformation extracted from the maximal external relation is
/// the only possible one, so its failure is conclusive; for unobservable
/// pairs only a positive identity-transform result is conclusive.
pub fn check_bisim_nondegenerate(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    tol: Tolerance,
) -> Result<CheckReport> {
    for (i, s) in [(1, s1), (2, s2)] {
        if !s.is_nondegenerate(tol) {
            return Err(Error::Precondition(format!(
                "system {i} has degenerate state noise (excited directions have dimension {} < {}); \
                 use the general bisimulation checker with a candidate relation",
                s.noise_reachable(tol).dim(),
                s.state_dim()
            )));
        }
    }

    let mut notes = Vec::new();
    if s1.state_dim() != s2.state_dim() {
        let c = ConditionCheck::new(ConditionId::Lin, false, f64::INFINITY).with_note(format!(
            "state dimensions {} and {} differ; non-degenerate systems of unequal dimension \
             are never bisimilar",
            s1.state_dim(),
            s2.state_dim()
        ));
        return Ok(CheckReport::from_conditions(vec![c], tol));
    }

    let n = s1.state_dim();
    let o1 = numlin::rank(&obs_matrix(s1.a(), s1.c(), n)?, tol);
    let o2 = numlin::rank(&obs_matrix(s2.a(), s2.c(), n)?, tol);
    if s1.output_dim() == s2.output_dim() && o1 != o2 {
        let c = ConditionCheck::new(ConditionId::Lin, false, f64::INFINITY).with_note(format!(
            "observability ranks {o1} and {o2} differ; the rank is a similarity invariant"
        ));
        return Ok(CheckReport::from_conditions(vec![c], tol));
    }

    if s1.output_dim() == s2.output_dim() && o1 == n {
        // Observable pair: the transformation is forced by the maximal
        // external relation, so the linear check on it is decisive.
        let rel = maximal_external_relation(s1, s2)?;
        let t = derive_transformation(&rel, tol)?;
        let mut report = check_linear_equivalence(s1, s2, &t, tol)?;
        report.notes.push(
            "transformation extracted from the maximal external relation".into(),
        );
        return Ok(report);
    }

    // Unobservable (or output-width-mismatched) pair: try the identity.
    if s1.output_dim() == s2.output_dim() {
        let id = DMatrix::identity(n, n);
        let report = check_linear_equivalence(s1, s2, &id, tol)?;
        if report.holds() {
            return Ok(report);
        }
        notes.push(
            "no canonical transformation is derivable for unobservable pairs; \
             the identity candidate failed, so the outcome is undecided"
                .into(),
        );
    } else {
        notes.push("output dimensions differ, so no transformation can match them".into());
        let c = ConditionCheck::new(ConditionId::Lin, false, f64::INFINITY);
        let mut report = CheckReport::from_conditions(vec![c], tol);
        report.notes = notes;
        return Ok(report);
    }

    let mut report = CheckReport::from_conditions(
        vec![ConditionCheck::new(ConditionId::Lin, false, f64::NAN)],
        tol,
    );
    report.verdict = Verdict::Inconclusive;
    report.notes = notes;
    Ok(report)
}

/// Checks whether two stable, zero-drift systems realize the same
/// stationary zero-mean Gaussian output process: output-noise covariances
/// and the state-noise output contributions must agree (p0 and p3).
pub fn check_same_realization(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    tol: Tolerance,
) -> Result<CheckReport> {
    if s1.output_dim() != s2.output_dim() {
        return Err(Error::Dimension(format!(
            "output dimensions differ ({} vs {})",
            s1.output_dim(),
            s2.output_dim()
        )));
    }
    for (i, s) in [(1, s1), (2, s2)] {
        let rho = s.spectral_radius()?;
        if rho >= 1.0 - STABILITY_MARGIN {
            return Err(Error::Unstable { rho });
        }
        let drift = s.mu().norm();
        if drift > tol.eq_abs {
            return Err(Error::Precondition(format!(
                "system {i} has nonzero disturbance mean (|mu| = {drift:.3e}); \
                 stationary realization comparison assumes zero-mean noise"
            )));
        }
    }

    let steps = s1.state_dim() + s2.state_dim();
    let conditions = external_conditions(s1, s2, steps, tol)?;
    let keep: Vec<ConditionCheck> = conditions
        .into_iter()
        .filter(|c| matches!(c.id, ConditionId::P0 | ConditionId::P3))
        .collect();
    Ok(CheckReport::from_conditions(keep, tol))
}

/// Verifies the cascade of matched noise responses implied by kernel
/// invariance plus matched noise covariances: used by tests to confirm that
/// a passing relation matches `R1 A1^k G1 G1^T (A1^h)^T R1^T` with the
/// corresponding product on the other side for all `h, k` below the
/// truncation horizon.
pub fn extended_noise_match_residual(
    s1: &StochasticLinearSystem,
    s2: &StochasticLinearSystem,
    rel: &LinearRelation,
) -> Result<f64> {
    let steps = s1.state_dim() + s2.state_dim();
    let reach1 = reach_matrix(s1.a(), s1.g(), steps)?;
    let reach2 = reach_matrix(s2.a(), s2.g(), steps)?;
    let m1 = rel.r1() * &reach1;
    let m2 = rel.r2() * &reach2;
    // Block (k, h) of M_i M_i^T is R_i A_i^k G_i G_i^T (A_i^h)^T R_i^T.
    Ok((&m1 * m1.transpose() - &m2 * m2.transpose()).norm())
}
