//! Quotient systems and minimal model reduction.
//!
//! Both quotient constructions change coordinates with an invertible
//! `T = [T1 T2]` whose trailing block spans the kernel of the reducing
//! matrix. Because that kernel is invariant under `A` and below the output
//! kernel, the transformed state matrix has a zero upper-right block and the
//! transformed output map has a zero trailing block, so the leading
//! coordinates form a self-contained subsystem. (The lower-left block of the
//! transformed state matrix generally does not vanish; it is irrelevant to
//! the quotient and recorded only as a diagnostic.) The bisimulation variant
//! additionally forces the noise input into the leading block by extending a
//! basis of the noise-excited subspace.

use nalgebra::DMatrix;
use num_complex::Complex;
use std::fmt;

use crate::equivalence::{check_bisimulation, CheckReport};
use crate::numlin::{self, Subspace, Tolerance};
use crate::relations::LinearRelation;
use crate::sysmodel::StochasticLinearSystem;
use crate::{Error, Result};

/// Relative size below which enforced zero blocks must fall.
const BLOCK_ZERO_REL: f64 = 1e-8;

/// Coordinate change `T = [T1 T2]` splitting the state space into a kept
/// block and a factored-out block, along with the transformed matrices.
#[derive(Debug, Clone)]
pub struct KalmanDecomposition {
    transform: DMatrix<f64>,
    transform_inv: DMatrix<f64>,
    reduced_dim: usize,
    a_t: DMatrix<f64>,
    b_t: DMatrix<f64>,
    c_t: DMatrix<f64>,
    g_t: DMatrix<f64>,
}

impl KalmanDecomposition {
    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    pub fn transform_inv(&self) -> &DMatrix<f64> {
        &self.transform_inv
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_dim
    }

    pub fn transformed_a(&self) -> &DMatrix<f64> {
        &self.a_t
    }

    /// Norm of the upper-right block of the transformed state matrix; the
    /// construction guarantees it vanishes.
    pub fn upper_right_residual(&self) -> f64 {
        let n = self.a_t.nrows();
        let k = self.reduced_dim;
        self.a_t.view((0, k), (k, n - k)).norm()
    }

    /// Norm of the lower-left block; generally nonzero, diagnostic only.
    pub fn lower_left_residual(&self) -> f64 {
        let n = self.a_t.nrows();
        let k = self.reduced_dim;
        self.a_t.view((k, 0), (n - k, k)).norm()
    }

    /// Norm of the trailing block of the transformed noise input.
    pub fn noise_lower_residual(&self) -> f64 {
        let n = self.g_t.nrows();
        let k = self.reduced_dim;
        self.g_t.view((k, 0), (n - k, self.g_t.ncols())).norm()
    }

    /// Relation between the reduced state and the original state:
    /// `x_red = [I 0] T^{-1} x`.
    pub fn graph_relation(&self) -> LinearRelation {
        let k = self.reduced_dim;
        let r2 = self.transform_inv.rows(0, k).into_owned();
        LinearRelation::new(DMatrix::identity(k, k), r2).expect("consistent shapes")
    }
}

fn transformed_system(
    sys: &StochasticLinearSystem,
    t: DMatrix<f64>,
    t_inv: DMatrix<f64>,
    reduced_dim: usize,
) -> Result<(StochasticLinearSystem, KalmanDecomposition)> {
    let a_t = &t_inv * sys.a() * &t;
    let b_t = &t_inv * sys.b();
    let c_t = sys.c() * &t;
    let g_t = &t_inv * sys.g();

    let decomp = KalmanDecomposition {
        transform: t,
        transform_inv: t_inv,
        reduced_dim,
        a_t,
        b_t,
        c_t,
        g_t,
    };

    let k = reduced_dim;
    let upper_right = decomp.upper_right_residual();
    if upper_right > BLOCK_ZERO_REL * (1.0 + sys.a().norm()) {
        return Err(Error::Numerical(format!(
            "transformed state matrix has coupling {upper_right:.3e} from the factored-out \
             block into the kept block; the reducing kernel is too ill-conditioned"
        )));
    }

    let reduced = StochasticLinearSystem::new(
        decomp.a_t.view((0, 0), (k, k)).into_owned(),
        decomp.b_t.rows(0, k).into_owned(),
        decomp.c_t.columns(0, k).into_owned(),
        decomp.g_t.rows(0, k).into_owned(),
        sys.mu().clone(),
        sys.psi().clone(),
    )?;
    Ok((reduced, decomp))
}

fn reducing_kernel(
    sys: &StochasticLinearSystem,
    r: &DMatrix<f64>,
    tol: Tolerance,
) -> Result<Subspace> {
    let n = sys.state_dim();
    if r.ncols() != n {
        return Err(Error::Dimension(format!(
            "reducing matrix must have {n} columns, found {}",
            r.ncols()
        )));
    }
    let (_, kernel) = numlin::rank_and_kernel(r, tol);
    if !numlin::is_invariant(sys.a(), &kernel, tol)? {
        return Err(Error::Precondition(
            "the kernel of the reducing matrix is not invariant under the state matrix".into(),
        ));
    }
    let (_, c_kernel) = numlin::rank_and_kernel(sys.c(), tol);
    if !numlin::is_contained(&kernel, &c_kernel, tol)? {
        return Err(Error::Precondition(
            "the kernel of the reducing matrix is not contained in the output-map kernel".into(),
        ));
    }
    Ok(kernel)
}

/// Quotient preserving external behavior.
///
/// Requires the reducing kernel to be invariant under `A` and contained in
/// `ker(C)`. The kept block is the orthogonal complement of the kernel, so
/// the transform is orthogonal. The reduced system has dimension
/// `rank(r_ext)` and equivalent external behavior to the original through
/// the graph relation of the decomposition.
pub fn quotient_external(
    sys: &StochasticLinearSystem,
    r_ext: &DMatrix<f64>,
    tol: Tolerance,
) -> Result<(StochasticLinearSystem, KalmanDecomposition)> {
    let kernel = reducing_kernel(sys, r_ext, tol)?;
    let keep = kernel.orthogonal_complement(tol);
    let t = numlin::hcat(keep.basis(), kernel.basis());
    let t_inv = t.transpose();
    transformed_system(sys, t, t_inv, keep.dim())
}

/// Quotient preserving bisimulation.
///
/// In addition to the external-quotient conditions, the reducing kernel must
/// not meet the noise-excited subspace. The kept block extends an
/// orthonormal basis of the excited subspace, which forces the transformed
/// noise input entirely into the kept coordinates.
pub fn quotient_bisim(
    sys: &StochasticLinearSystem,
    r_bis: &DMatrix<f64>,
    tol: Tolerance,
) -> Result<(StochasticLinearSystem, KalmanDecomposition)> {
    let kernel = reducing_kernel(sys, r_bis, tol)?;
    let excited = sys.noise_reachable(tol);
    let meet = numlin::intersect(&kernel, &excited, tol)?;
    if !meet.is_zero() {
        return Err(Error::Precondition(format!(
            "the kernel of the reducing matrix meets the noise-excited subspace \
             in a {}-dimensional set; factoring it out would change the state law",
            meet.dim()
        )));
    }

    let n = sys.state_dim();
    let span = numlin::sum(&kernel, &excited, tol)?;
    let rest = span.orthogonal_complement(tol);
    let t1 = numlin::hcat(excited.basis(), rest.basis());
    let k = t1.ncols();
    debug_assert_eq!(k + kernel.dim(), n);
    let t = numlin::hcat(&t1, kernel.basis());
    if numlin::rank(&t, tol) != n {
        return Err(Error::Numerical(
            "kept-block construction produced a singular coordinate change".into(),
        ));
    }
    let t_inv = t
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("coordinate change is not invertible".into()))?;

    let (reduced, decomp) = transformed_system(sys, t, t_inv, k)?;
    let g_resid = decomp.noise_lower_residual();
    if g_resid > BLOCK_ZERO_REL * (1.0 + sys.g().norm()) {
        return Err(Error::Numerical(format!(
            "transformed noise input leaks {g_resid:.3e} into the factored-out block"
        )));
    }
    Ok((reduced, decomp))
}

/// Minimal reduction preserving external behavior: quotient by the
/// observability stack. The result has dimension `rank(Obs)` and is
/// observable. The returned relation is the inducing equivalence relation
/// `(R, R)` with `R` the observability stack.
pub fn minimal_external(
    sys: &StochasticLinearSystem,
    tol: Tolerance,
) -> Result<(StochasticLinearSystem, LinearRelation, KalmanDecomposition)> {
    let obs = crate::sysmodel::obs_matrix(sys.a(), sys.c(), sys.state_dim())?;
    let (reduced, decomp) = quotient_external(sys, &obs, tol)?;
    let relation = LinearRelation::new(obs.clone(), obs)?;
    Ok((reduced, relation, decomp))
}

/// Reachability/observability flags of one eigenvalue cluster.
#[derive(Debug, Clone)]
pub struct ClusterClassification {
    pub eigenvalues: Vec<Complex<f64>>,
    pub eigenspace: Subspace,
    /// Eigenspace inside the noise-excited subspace.
    pub totally_reachable: bool,
    /// Eigenspace meets the noise-excited subspace only at the origin.
    pub totally_unreachable: bool,
    /// Eigenspace meets the unobservable subspace only at the origin.
    pub totally_observable: bool,
    /// Eigenspace inside the unobservable subspace.
    pub totally_unobservable: bool,
}

impl ClusterClassification {
    /// Whether both flag pairs are decided; partially overlapping clusters
    /// satisfy neither flag of a pair and require the splitting path.
    pub fn fully_classified(&self) -> bool {
        (self.totally_reachable || self.totally_unreachable)
            && (self.totally_observable || self.totally_unobservable)
    }
}

/// Per-cluster classification against the noise-excited subspace and the
/// unobservable subspace.
#[derive(Debug, Clone)]
pub struct EigenspaceClassification {
    pub clusters: Vec<ClusterClassification>,
    pub noise_reachable: Subspace,
    pub unobservable: Subspace,
}

/// Classifies every generalized eigenspace of the state matrix.
pub fn classify_eigenspaces(
    sys: &StochasticLinearSystem,
    tol: Tolerance,
) -> Result<EigenspaceClassification> {
    let excited = sys.noise_reachable(tol);
    let unobs = sys.unobservable(tol);
    let clusters = numlin::real_invariant_eigenspaces(sys.a(), tol)?
        .into_iter()
        .map(|c| {
            let s = &c.eigenspace;
            Ok(ClusterClassification {
                totally_reachable: numlin::is_contained(s, &excited, tol)?,
                totally_unreachable: numlin::intersect(s, &excited, tol)?.is_zero(),
                totally_observable: numlin::intersect(s, &unobs, tol)?.is_zero(),
                totally_unobservable: numlin::is_contained(s, &unobs, tol)?,
                eigenvalues: c.eigenvalues,
                eigenspace: c.eigenspace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenspaceClassification {
        clusters,
        noise_reachable: excited,
        unobservable: unobs,
    })
}

/// Which construction produced a minimal bisimulation reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionMethod {
    /// Every cluster fully classified; whole unreachable-and-unobservable
    /// eigenspaces were factored out.
    ClusterSelection,
    /// Some cluster only partially overlapped the key subspaces; invariant
    /// pieces inside each cluster were split off and factored out.
    ClusterSplitting,
    /// No removable subspace was found; the system is returned unchanged.
    Irreducible,
}

impl fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ReductionMethod::ClusterSelection => "cluster-selection",
            ReductionMethod::ClusterSplitting => "cluster-splitting",
            ReductionMethod::Irreducible => "irreducible",
        };
        f.write_str(s)
    }
}

/// Certificate accompanying a minimal bisimulation reduction.
#[derive(Debug, Clone)]
pub struct ReductionCertificate {
    pub method: ReductionMethod,
    pub removed_dim: usize,
    pub cluster_notes: Vec<String>,
    /// Post-hoc bisimulation check of the reduced system against the
    /// original through the graph relation (absent for the irreducible
    /// case, where the relation is the identity).
    pub verification: Option<CheckReport>,
}

impl ReductionCertificate {
    pub fn verified(&self) -> bool {
        self.verification.as_ref().map(|r| r.holds()).unwrap_or(true)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "method: {}; removed dimensions: {}",
            self.method, self.removed_dim
        );
        for note in &self.cluster_notes {
            s.push_str("\n  ");
            s.push_str(note);
        }
        if let Some(v) = &self.verification {
            s.push_str(&format!(
                "\n  round-trip bisimulation check: {}",
                v.verdict
            ));
        }
        s
    }
}

fn format_cluster(values: &[Complex<f64>]) -> String {
    let parts: Vec<String> = values
        .iter()
        .map(|l| {
            if l.im.abs() < 1e-12 * (1.0 + l.re.abs()) {
                format!("{:.6}", l.re)
            } else {
                format!("{:.6}{:+.6}i", l.re, l.im)
            }
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}

/// Largest invariant subspace of `a` contained in `v`, via the fixed-point
/// iteration `V <- V  ∩  a^{-1} V`.
fn largest_invariant_inside(a: &DMatrix<f64>, v: &Subspace, tol: Tolerance) -> Result<Subspace> {
    let mut current = v.clone();
    loop {
        if current.is_zero() {
            return Ok(current);
        }
        let n = current.ambient_dim();
        let proj_out =
            DMatrix::<f64>::identity(n, n) - current.basis() * current.basis().transpose();
        let preimage = numlin::rank_and_kernel_scaled(&(proj_out * a), a.norm(), tol).1;
        let next = numlin::intersect(&current, &preimage, tol)?;
        if next.dim() == current.dim() {
            return Ok(next);
        }
        current = next;
    }
}

/// Largest invariant piece of one cluster eigenspace that can be factored
/// out: invariant, inside the unobservable subspace, meeting the
/// noise-excited subspace only at the origin.
///
/// Start from the largest invariant subspace of `eigenspace ∩ unobservable`.
/// If it still meets the excited subspace, restrict to the orthogonal
/// complement of the overlap and take the largest invariant subspace inside
/// that; the orthogonal choice is the deterministic tie-break among
/// equal-dimension candidates.
fn removable_part(
    a: &DMatrix<f64>,
    eigenspace: &Subspace,
    unobservable: &Subspace,
    excited: &Subspace,
    tol: Tolerance,
) -> Result<Subspace> {
    let candidate = numlin::intersect(eigenspace, unobservable, tol)?;
    let invariant = largest_invariant_inside(a, &candidate, tol)?;
    if invariant.is_zero() {
        return Ok(invariant);
    }
    let overlap = numlin::intersect(&invariant, excited, tol)?;
    if overlap.is_zero() {
        return Ok(invariant);
    }
    let away = numlin::intersect(&invariant, &overlap.orthogonal_complement(tol), tol)?;
    let split = largest_invariant_inside(a, &away, tol)?;
    // The construction can return a subspace that still needs the excited
    // check (invariance may pull directions back in); verify.
    if numlin::intersect(&split, excited, tol)?.is_zero() {
        Ok(split)
    } else {
        Ok(Subspace::zero(eigenspace.ambient_dim()))
    }
}

/// Minimal reduction preserving bisimulation.
///
/// When every eigenvalue cluster is fully classified, the removable subspace
/// is the sum of the totally-unreachable-and-unobservable eigenspaces;
/// otherwise invariant pieces are split out of each cluster individually.
/// The returned relation is the inducing equivalence pair `(R, R)` whose
/// kernel is the removed subspace, and the certificate carries the post-hoc
/// bisimulation check of the reduced system against the original.
pub fn minimal_bisim(
    sys: &StochasticLinearSystem,
    tol: Tolerance,
) -> Result<(
    StochasticLinearSystem,
    LinearRelation,
    ReductionCertificate,
    KalmanDecomposition,
)> {
    let n = sys.state_dim();
    let classification = classify_eigenspaces(sys, tol)?;
    let fully_classified = classification.clusters.iter().all(|c| c.fully_classified());

    let mut removed = Subspace::zero(n);
    let mut cluster_notes = Vec::new();
    let method = if fully_classified {
        for c in &classification.clusters {
            if c.totally_unreachable && c.totally_unobservable {
                removed = numlin::sum(&removed, &c.eigenspace, tol)?;
                cluster_notes.push(format!(
                    "cluster {} removed whole ({} dims)",
                    format_cluster(&c.eigenvalues),
                    c.eigenspace.dim()
                ));
            } else {
                cluster_notes.push(format!(
                    "cluster {} kept (reachable: {}, observable: {})",
                    format_cluster(&c.eigenvalues),
                    c.totally_reachable,
                    c.totally_observable
                ));
            }
        }
        ReductionMethod::ClusterSelection
    } else {
        for c in &classification.clusters {
            let part = removable_part(
                sys.a(),
                &c.eigenspace,
                &classification.unobservable,
                &classification.noise_reachable,
                tol,
            )?;
            if part.is_zero() {
                cluster_notes.push(format!(
                    "cluster {} kept whole",
                    format_cluster(&c.eigenvalues)
                ));
            } else {
                cluster_notes.push(format!(
                    "cluster {} split: removed {} of {} dims",
                    format_cluster(&c.eigenvalues),
                    part.dim(),
                    c.eigenspace.dim()
                ));
                removed = numlin::sum(&removed, &part, tol)?;
            }
        }
        ReductionMethod::ClusterSplitting
    };

    if removed.is_zero() {
        let certificate = ReductionCertificate {
            method: ReductionMethod::Irreducible,
            removed_dim: 0,
            cluster_notes,
            verification: None,
        };
        let identity = DMatrix::identity(n, n);
        let decomp = KalmanDecomposition {
            transform: identity.clone(),
            transform_inv: identity.clone(),
            reduced_dim: n,
            a_t: sys.a().clone(),
            b_t: sys.b().clone(),
            c_t: sys.c().clone(),
            g_t: sys.g().clone(),
        };
        return Ok((sys.clone(), LinearRelation::identity(n), certificate, decomp));
    }

    let r_star = removed.orthogonal_complement(tol).basis().transpose();
    let (reduced, decomp) = quotient_bisim(sys, &r_star, tol)?;
    let relation = LinearRelation::new(r_star.clone(), r_star)?;
    let verification = check_bisimulation(&reduced, sys, &decomp.graph_relation(), tol)?;
    if !verification.holds() {
        return Err(Error::Numerical(
            "reduced system failed the post-hoc bisimulation check against the original".into(),
        ));
    }

    let certificate = ReductionCertificate {
        method,
        removed_dim: removed.dim(),
        cluster_notes,
        verification: Some(verification),
    };
    Ok((reduced, relation, certificate, decomp))
}
