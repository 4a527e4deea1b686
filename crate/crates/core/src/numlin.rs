//! Tolerance-aware dense linear algebra and subspace arithmetic.
//!
//! Every geometric verdict in this crate (containment, invariance,
//! intersection triviality) reduces to a rank decision. All rank decisions
//! go through a single SVD-based oracle with the relative threshold
//! `rank_rel * max(rows, cols) * sigma_max`, so the verdicts are mutually
//! consistent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::{Error, Result};

/// Relative distance below which two eigenvalues are treated as one cluster.
const EIGEN_CLUSTER_REL: f64 = 1e-8;

/// Thresholds for rank decisions and matrix-equality tests.
///
/// `rank_rel` is the relative singular-value cutoff; `eq_abs` / `eq_rel` are
/// the absolute and relative parts of the equality gate
/// `residual <= eq_abs + eq_rel * scale`. A purely relative gate would fail
/// on comparisons of near-zero data, hence the absolute part.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rank_rel: f64,
    pub eq_abs: f64,
    pub eq_rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rank_rel: 1e-10,
            eq_abs: 1e-9,
            eq_rel: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(rank_rel: f64, eq_abs: f64, eq_rel: f64) -> Result<Self> {
        if !(rank_rel > 0.0 && eq_abs > 0.0 && eq_rel > 0.0) {
            return Err(Error::Invalid(
                "tolerance thresholds must be strictly positive".into(),
            ));
        }
        Ok(Self {
            rank_rel,
            eq_abs,
            eq_rel,
        })
    }

    /// Equality gate for a residual measured against a reference scale.
    pub fn eq_gate(&self, scale: f64) -> f64 {
        self.eq_abs + self.eq_rel * scale
    }
}

/// A linear subspace of `R^n`, stored through an orthonormal basis.
///
/// The zero subspace is first class: it is represented by a basis with zero
/// columns while retaining its ambient dimension.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: usize,
    basis: DMatrix<f64>,
}

impl Subspace {
    /// The zero subspace `{0}` of `R^ambient`.
    pub fn zero(ambient: usize) -> Self {
        Self {
            ambient,
            basis: DMatrix::zeros(ambient, 0),
        }
    }

    /// The full space `R^ambient`.
    pub fn full(ambient: usize) -> Self {
        Self {
            ambient,
            basis: DMatrix::identity(ambient, ambient),
        }
    }

    /// Wraps a matrix whose columns are already orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let d = basis.ncols();
        if d > 0 {
            let gram = basis.transpose() * &basis;
            let dev = (&gram - DMatrix::identity(d, d)).norm();
            if dev > 1e-8 * (d as f64).sqrt() {
                return Err(Error::Invalid(format!(
                    "basis columns are not orthonormal (deviation {dev:.3e})"
                )));
            }
        }
        Ok(Self {
            ambient: basis.nrows(),
            basis,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient
    }

    /// Orthonormal basis, one column per dimension.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Euclidean distance from `v` to the subspace.
    pub fn distance(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    /// Orthogonal complement, computed as the kernel of `basis^T`.
    pub fn orthogonal_complement(&self, tol: Tolerance) -> Subspace {
        if self.is_zero() {
            return Subspace::full(self.ambient);
        }
        let (_, kernel) = rank_and_kernel(&self.basis.transpose(), tol);
        kernel
    }
}

/// One-sided Jacobi SVD: `a = u * diag(sigma) * v^T` with `sigma` sorted
/// descending, `u` of shape `m x k`, `v` of shape `n x k`, `k = min(m, n)`.
///
/// Wide inputs are decomposed through their transpose. Jacobi rotations
/// orthogonalize column pairs until convergence; the method is slower than
/// bidiagonalization but achieves high relative accuracy and has no
/// problematic edge cases, which matters because every rank decision in this
/// crate flows through it.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    if m < n {
        let (u, s, v) = jacobi_svd_tall(&a.transpose());
        return (v, s, u);
    }
    jacobi_svd_tall(a)
}

fn jacobi_svd_tall(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let eps = f64::EPSILON;

    for _sweep in 0..64 {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in (i + 1)..n {
                let (mut aii, mut ajj, mut aij) = (0.0, 0.0, 0.0);
                for r in 0..m {
                    let (x, y) = (u[(r, i)], u[(r, j)]);
                    aii += x * x;
                    ajj += y * y;
                    aij += x * y;
                }
                if aij.abs() <= eps * (aii * ajj).sqrt() || aij == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (ajj - aii) / (2.0 * aij);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let (x, y) = (u[(r, i)], u[(r, j)]);
                    u[(r, i)] = c * x - s * y;
                    u[(r, j)] = s * x + c * y;
                }
                for r in 0..n {
                    let (x, y) = (v[(r, i)], v[(r, j)]);
                    v[(r, i)] = c * x - s * y;
                    v[(r, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|k| u.column(k).norm()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap());

    let mut u_sorted = DMatrix::zeros(m, n);
    let mut v_sorted = DMatrix::zeros(n, n);
    let mut sigma = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > 0.0 {
            u_sorted.set_column(dst, &(u.column(src) / norms[src]));
        }
    }
    (u_sorted, sigma, v_sorted)
}

/// Singular values plus the complete right-singular basis.
///
/// For a wide matrix the kernel directions are not all present in a thin
/// decomposition; padding with zero rows leaves singular values and right
/// singular vectors unchanged while making the factor square.
fn svd_full_v(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let work = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let (_, sigma, v) = jacobi_svd(&work);
    (sigma, v)
}

fn rank_from_singular_values(sv: &DVector<f64>, rows: usize, cols: usize, tol: Tolerance) -> usize {
    rank_scaled(sv, rows, cols, 0.0, tol)
}

/// Rank decision with an external reference scale. The threshold is taken
/// relative to `max(sigma_max, scale)`, so a matrix that is tiny compared to
/// the scale it was derived from counts as zero instead of contributing
/// noise directions.
fn rank_scaled(sv: &DVector<f64>, rows: usize, cols: usize, scale: f64, tol: Tolerance) -> usize {
    if sv.is_empty() {
        return 0;
    }
    let sigma_max = sv.max().max(scale);
    let thr = tol.rank_rel * rows.max(cols) as f64 * sigma_max;
    sv.iter().filter(|&&s| s > thr).count()
}

/// Numerical rank via SVD.
pub fn rank(m: &DMatrix<f64>, tol: Tolerance) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let (_, sigma, _) = jacobi_svd(m);
    rank_from_singular_values(&sigma, m.nrows(), m.ncols(), tol)
}

/// Numerical rank together with an orthonormal kernel basis.
///
/// `rank + kernel.dim() == cols` by construction; an empty matrix has rank 0
/// and full kernel.
pub fn rank_and_kernel(m: &DMatrix<f64>, tol: Tolerance) -> (usize, Subspace) {
    rank_and_kernel_scaled(m, 0.0, tol)
}

/// Like [`rank_and_kernel`], with the rank threshold referred to an external
/// scale (see `rank_scaled`).
pub fn rank_and_kernel_scaled(m: &DMatrix<f64>, scale: f64, tol: Tolerance) -> (usize, Subspace) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (0, Subspace::full(cols));
    }
    let (sv, v) = svd_full_v(m);
    let r = rank_scaled(&sv, rows, cols, scale, tol);
    let kernel_basis = v.columns(r, cols - r).into_owned();
    (
        r,
        Subspace {
            ambient: cols,
            basis: kernel_basis,
        },
    )
}

/// Orthonormal basis of the column space, rank-truncated.
pub fn image(m: &DMatrix<f64>, tol: Tolerance) -> Subspace {
    image_scaled(m, 0.0, tol)
}

/// Like [`image`], with the rank threshold referred to an external scale, so
/// a product that came out tiny relative to its factors truncates to the
/// zero subspace instead of keeping noise directions.
pub fn image_scaled(m: &DMatrix<f64>, scale: f64, tol: Tolerance) -> Subspace {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Subspace::zero(rows);
    }
    let (u, sigma, _) = jacobi_svd(m);
    let r = rank_scaled(&sigma, rows, cols, scale, tol);
    Subspace {
        ambient: rows,
        basis: u.columns(0, r).into_owned(),
    }
}

fn check_ambient(u: &Subspace, v: &Subspace) -> Result<()> {
    if u.ambient != v.ambient {
        return Err(Error::Dimension(format!(
            "subspaces live in different ambient spaces ({} vs {})",
            u.ambient, v.ambient
        )));
    }
    Ok(())
}

/// Intersection of two subspaces.
///
/// A vector lies in both spans exactly when the stacked system
/// `[Bu -Bv] (a; b) = 0` has a solution, so the intersection is the image of
/// `Bu` applied to the `a`-part of that kernel.
pub fn intersect(u: &Subspace, v: &Subspace, tol: Tolerance) -> Result<Subspace> {
    check_ambient(u, v)?;
    if u.is_zero() || v.is_zero() {
        return Ok(Subspace::zero(u.ambient));
    }
    if u.is_full() {
        return Ok(v.clone());
    }
    if v.is_full() {
        return Ok(u.clone());
    }
    let du = u.dim();
    let stacked = {
        let mut m = DMatrix::zeros(u.ambient, du + v.dim());
        m.view_mut((0, 0), (u.ambient, du)).copy_from(&u.basis);
        m.view_mut((0, du), (v.ambient, v.dim()))
            .copy_from(&(-&v.basis));
        m
    };
    let (_, kernel) = rank_and_kernel(&stacked, tol);
    let a_part = kernel.basis().rows(0, du).into_owned();
    Ok(image(&(&u.basis * a_part), tol))
}

/// Sum (span of the union) of two subspaces.
pub fn sum(u: &Subspace, v: &Subspace, tol: Tolerance) -> Result<Subspace> {
    check_ambient(u, v)?;
    if u.is_zero() {
        return Ok(v.clone());
    }
    if v.is_zero() {
        return Ok(u.clone());
    }
    let mut m = DMatrix::zeros(u.ambient, u.dim() + v.dim());
    m.view_mut((0, 0), (u.ambient, u.dim())).copy_from(&u.basis);
    m.view_mut((0, u.dim()), (v.ambient, v.dim()))
        .copy_from(&v.basis);
    Ok(image(&m, tol))
}

/// Residual of projecting `u`'s basis onto `v`; zero when `u` is contained.
pub fn containment_residual(u: &Subspace, v: &Subspace) -> f64 {
    if u.is_zero() {
        return 0.0;
    }
    let proj = &v.basis * (v.basis.transpose() * &u.basis);
    (&u.basis - proj).norm()
}

/// Whether `u` is contained in `v` within tolerance.
pub fn is_contained(u: &Subspace, v: &Subspace, tol: Tolerance) -> Result<bool> {
    check_ambient(u, v)?;
    let residual = containment_residual(u, v);
    Ok(residual <= tol.eq_gate((u.dim() as f64).sqrt()))
}

/// Whether both subspaces span the same set of vectors.
pub fn subspaces_equal(u: &Subspace, v: &Subspace, tol: Tolerance) -> Result<bool> {
    Ok(u.dim() == v.dim() && is_contained(u, v, tol)? && is_contained(v, u, tol)?)
}

/// Whether `A U ⊆ U`.
pub fn is_invariant(a: &DMatrix<f64>, u: &Subspace, tol: Tolerance) -> Result<bool> {
    if a.nrows() != a.ncols() || a.nrows() != u.ambient {
        return Err(Error::Dimension(format!(
            "invariance test needs a square {n} x {n} matrix, found {r} x {c}",
            n = u.ambient,
            r = a.nrows(),
            c = a.ncols()
        )));
    }
    if u.is_zero() || u.is_full() {
        return Ok(true);
    }
    let mapped = image_scaled(&(a * &u.basis), a.norm(), tol);
    is_contained(&mapped, u, tol)
}

/// Frobenius-norm equality test; returns the verdict and the residual.
pub fn matrices_equal(m1: &DMatrix<f64>, m2: &DMatrix<f64>, tol: Tolerance) -> Result<(bool, f64)> {
    if m1.shape() != m2.shape() {
        return Err(Error::Dimension(format!(
            "matrix equality needs equal shapes, found {:?} and {:?}",
            m1.shape(),
            m2.shape()
        )));
    }
    let residual = (m1 - m2).norm();
    let gate = tol.eq_gate(m1.norm().max(m2.norm()));
    Ok((residual <= gate, residual))
}

/// Complex spectrum of a square matrix, via the real Schur form.
pub fn complex_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, found {} x {}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 0)
        .ok_or(Error::EigenConvergence)?;
    let eigs = schur.complex_eigenvalues();
    Ok(eigs.iter().copied().collect())
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(complex_eigenvalues(a)?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

/// One conjugate-closed eigenvalue cluster and its generalized real eigenspace.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    /// All eigenvalue instances in the cluster (algebraic multiplicity many).
    pub eigenvalues: Vec<Complex<f64>>,
    /// Real `A`-invariant subspace of dimension equal to the cluster's
    /// summed algebraic multiplicity.
    pub eigenspace: Subspace,
}

impl EigenCluster {
    /// Total algebraic multiplicity.
    pub fn multiplicity(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn cluster_distance_rel(a: Complex<f64>, b: Complex<f64>, rel: f64) -> f64 {
    rel * (1.0 + a.norm().max(b.norm()))
}

fn same_cluster_rel(a: Complex<f64>, b: Complex<f64>, rel: f64) -> bool {
    let d = cluster_distance_rel(a, b, rel);
    (a - b).norm() <= d || (a - b.conj()).norm() <= d
}

/// Generalized real eigenspaces of `A`, one per conjugate-closed eigenvalue
/// cluster.
///
/// Eigenvalues within relative distance `1e-8 * (1 + |lambda|)` are merged,
/// and a conjugate pair always lands in one cluster, so each returned
/// eigenspace is real. The eigenspace of a cluster is the kernel of the real
/// polynomial `prod (A - lambda I)` (a quadratic factor per conjugate pair)
/// raised to the cluster's algebraic multiplicity, with renormalization
/// between multiplications.
///
/// Near-defective spectra scatter their computed eigenvalues by roughly
/// `eps^(1/k)` for a block of size `k`, which can defeat any fixed merging
/// distance. When the computed eigenspace dimensions fail to partition the
/// space, the merging distance is widened stepwise until they do.
pub fn real_invariant_eigenspaces(a: &DMatrix<f64>, tol: Tolerance) -> Result<Vec<EigenCluster>> {
    let n = a.nrows();
    let eigs = complex_eigenvalues(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut cluster_rel = EIGEN_CLUSTER_REL;
    while cluster_rel <= 1e-3 {
        let clusters = eigenspaces_with_distance(a, &eigs, cluster_rel, tol);
        let total: usize = clusters.iter().map(|c| c.eigenspace.dim()).sum();
        if total == n {
            return Ok(clusters);
        }
        cluster_rel *= 10.0;
    }
    Err(Error::Numerical(format!(
        "eigenspace dimensions do not partition a {n}-dimensional space at any \
         merging distance up to 1e-3; the spectrum is too ill-conditioned for \
         the configured rank tolerance"
    )))
}

fn eigenspaces_with_distance(
    a: &DMatrix<f64>,
    eigs: &[Complex<f64>],
    cluster_rel: f64,
    tol: Tolerance,
) -> Vec<EigenCluster> {
    let n = a.nrows();

    // Union-find over eigenvalue instances; conjugates merge transitively.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if same_cluster_rel(eigs[i], eigs[j], cluster_rel) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of_group: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of_group.iter().position(|&g| g == r) {
            Some(k) => groups[k].push(i),
            None => {
                root_of_group.push(r);
                groups.push(vec![i]);
            }
        }
    }

    let mut clusters = Vec::with_capacity(groups.len());
    for group in &groups {
        let mut values: Vec<Complex<f64>> = group.iter().map(|&i| eigs[i]).collect();
        values.sort_by(|x, y| {
            x.re.partial_cmp(&y.re)
                .unwrap()
                .then(x.im.partial_cmp(&y.im).unwrap())
        });

        // Representatives: one per distinct eigenvalue, conjugate pairs
        // canonicalized to the upper half plane.
        let mut reps: Vec<Complex<f64>> = Vec::new();
        for &v in &values {
            let canon = Complex::new(v.re, v.im.abs());
            if !reps.iter().any(|&r| same_cluster_rel(r, canon, cluster_rel)) {
                reps.push(canon);
            }
        }

        // Scale bookkeeping: the polynomial of the cluster may annihilate
        // the whole space (it contains the characteristic polynomial when
        // the cluster covers the spectrum), so magnitudes must be judged
        // against the product of factor norms, never against the product's
        // own norm.
        let mut factor = DMatrix::<f64>::identity(n, n);
        let mut reference = 1.0f64;
        let a_norm = a.norm();
        let sqrt_n = (n as f64).sqrt();
        for rep in &reps {
            // The reference is the a-priori size bound of each block, not
            // its actual norm: a block that annihilates the whole space has
            // a rounding-level actual norm, and that smallness is exactly
            // the signal the rank test must see.
            let (block, bound) = if rep.im > cluster_distance_rel(*rep, *rep, cluster_rel) {
                // (A - l)(A - conj(l)) = A^2 - 2 Re(l) A + |l|^2 I
                (
                    a * a - 2.0 * rep.re * a + Complex::norm_sqr(rep) * DMatrix::identity(n, n),
                    a_norm * a_norm + 2.0 * rep.re.abs() * a_norm + Complex::norm_sqr(rep) * sqrt_n,
                )
            } else {
                (
                    a - rep.re * DMatrix::identity(n, n),
                    a_norm + rep.re.abs() * sqrt_n,
                )
            };
            reference *= bound.max(f64::MIN_POSITIVE);
            factor *= block;
        }
        // Normalize by the reference so that annihilated directions carry
        // magnitudes at rounding level relative to 1.
        factor /= reference;

        // Raise to the cluster multiplicity: enough to exhaust any Jordan
        // block of the cluster, while keeping the separation from
        // neighboring eigenvalues as large as possible (a higher power
        // would shrink a neighbor at distance d to d^power and bleed its
        // directions into the kernel).
        let mut power = DMatrix::<f64>::identity(n, n);
        for _ in 0..values.len() {
            power *= &factor;
        }

        let (_, eigenspace) = rank_and_kernel_scaled(&power, 1.0, tol);
        clusters.push(EigenCluster {
            eigenvalues: values,
            eigenspace,
        });
    }

    clusters.sort_by(|x, y| {
        let kx = x.eigenvalues[0];
        let ky = y.eigenvalues[0];
        kx.re
            .partial_cmp(&ky.re)
            .unwrap()
            .then(kx.im.partial_cmp(&ky.im).unwrap())
    });
    clusters
}

/// Minimum-norm least-squares solution `X` of `A X = B`.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: Tolerance) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "least squares needs matching row counts ({} vs {})",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.ncols() == 0 || b.ncols() == 0 {
        return Ok(DMatrix::zeros(a.ncols(), b.ncols()));
    }
    Ok(pseudo_inverse(a, tol)? * b)
}

/// Moore-Penrose pseudoinverse with the shared rank threshold.
pub fn pseudo_inverse(m: &DMatrix<f64>, tol: Tolerance) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let (u, sigma, v) = jacobi_svd(m);
    let r = rank_from_singular_values(&sigma, rows, cols, tol);
    let mut inv = DMatrix::zeros(cols, rows);
    for k in 0..r {
        let vk = v.column(k);
        let uk = u.column(k);
        for i in 0..cols {
            for j in 0..rows {
                inv[(i, j)] += vk[i] * uk[j] / sigma[k];
            }
        }
    }
    Ok(inv)
}

/// Block-diagonal composition `diag(M1, M2)`.
pub fn block_diag(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m1.nrows() + m2.nrows(), m1.ncols() + m2.ncols());
    out.view_mut((0, 0), m1.shape()).copy_from(m1);
    out.view_mut(m1.shape(), m2.shape()).copy_from(m2);
    out
}

/// Horizontal concatenation `[M1 M2]`.
pub fn hcat(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(m1.nrows(), m2.nrows(), "hcat needs equal row counts");
    let mut out = DMatrix::zeros(m1.nrows(), m1.ncols() + m2.ncols());
    out.view_mut((0, 0), m1.shape()).copy_from(m1);
    out.view_mut((0, m1.ncols()), m2.shape()).copy_from(m2);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn span(cols: &[&[f64]]) -> Subspace {
        let n = cols[0].len();
        let mut m = DMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        image(&m, tol())
    }

    #[test]
    fn rank_of_identity() {
        let m = DMatrix::<f64>::identity(3, 3);
        let (r, k) = rank_and_kernel(&m, tol());
        assert_eq!(r, 3);
        assert_eq!(k.dim(), 0);
    }

    #[test]
    fn rank_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (r, k) = rank_and_kernel(&m, tol());
        assert_eq!(r, 1);
        assert_eq!(k.dim(), 1);
        // kernel = span(e2)
        assert_relative_eq!(k.basis()[(1, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(k.basis()[(0, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_of_degenerate_reachability_block() {
        // [G AG] for A = diag(1,2), G = e1 is [[1,1],[0,0]].
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let (r, k) = rank_and_kernel(&m, tol());
        assert_eq!(r, 1);
        assert_eq!(k.dim(), 1);
        let im = image(&m, tol());
        assert_eq!(im.dim(), 1);
        assert_relative_eq!(im.basis()[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(im.basis()[(1, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_and_zero_matrices() {
        let (r, k) = rank_and_kernel(&DMatrix::<f64>::zeros(0, 3), tol());
        assert_eq!(r, 0);
        assert_eq!(k.dim(), 3);
        assert_eq!(image(&DMatrix::<f64>::zeros(3, 2), tol()).dim(), 0);
        assert!(image(&DMatrix::<f64>::identity(3, 3), tol()).is_full());
    }

    #[test]
    fn intersect_axes_is_trivial() {
        let u = span(&[&[1.0, 0.0]]);
        let v = span(&[&[0.0, 1.0]]);
        assert_eq!(intersect(&u, &v, tol()).unwrap().dim(), 0);
    }

    #[test]
    fn intersect_idempotent() {
        let u = span(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, 1.0]]);
        let w = intersect(&u, &u, tol()).unwrap();
        assert!(subspaces_equal(&u, &w, tol()).unwrap());
    }

    #[test]
    fn intersect_line_with_plane() {
        // span(e1) meets span(e1+e2, e1-e2) = R^2 in span(e1); the hand
        // oracle solves a(1,0) = b(1,1) + c(1,-1), giving b = c = a/2.
        let u = span(&[&[1.0, 0.0]]);
        let v = span(&[&[1.0, 1.0], &[1.0, -1.0]]);
        let w = intersect(&u, &v, tol()).unwrap();
        assert!(subspaces_equal(&w, &u, tol()).unwrap());
    }

    #[test]
    fn sum_with_zero_and_axes() {
        let u = span(&[&[1.0, 2.0, 3.0]]);
        let z = Subspace::zero(3);
        assert!(subspaces_equal(&sum(&u, &z, tol()).unwrap(), &u, tol()).unwrap());
        let e1 = span(&[&[1.0, 0.0, 0.0]]);
        let e2 = span(&[&[0.0, 1.0, 0.0]]);
        let s = sum(&e1, &e2, tol()).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(is_contained(&e1, &s, tol()).unwrap());
        assert!(is_contained(&e2, &s, tol()).unwrap());
    }

    #[test]
    fn containment_basics() {
        let z = Subspace::zero(4);
        let any = span(&[&[1.0, 0.0, 2.0, 0.0]]);
        assert!(is_contained(&z, &any, tol()).unwrap());
        assert!(!is_contained(&Subspace::full(4), &any, tol()).unwrap());
        assert!(is_contained(&any, &any, tol()).unwrap());
    }

    #[test]
    fn invariance_examples() {
        let full = Subspace::full(2);
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -2.0, 0.5]);
        assert!(is_invariant(&a, &full, tol()).unwrap());

        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let e2 = span(&[&[0.0, 1.0]]);
        assert!(is_invariant(&diag, &e2, tol()).unwrap());

        // A e2 = e1, so span(e2) is not invariant.
        let shift = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(!is_invariant(&shift, &e2, tol()).unwrap());
    }

    #[test]
    fn matrix_equality_gate() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let (eq, res) = matrices_equal(&m, &m, tol()).unwrap();
        assert!(eq);
        assert_eq!(res, 0.0);

        let bump = DMatrix::from_element(2, 2, tol().eq_abs * 10.0);
        let (eq, _) = matrices_equal(&m, &(&m + bump), tol()).unwrap();
        assert!(!eq);

        assert!(matrices_equal(&m, &DMatrix::zeros(2, 3), tol()).is_err());
    }

    #[test]
    fn eigenspaces_two_clusters() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.3],
        );
        let clusters = real_invariant_eigenspaces(&a, tol()).unwrap();
        assert_eq!(clusters.len(), 2);
        let alpha = clusters.iter().find(|c| c.multiplicity() == 2).unwrap();
        let beta = clusters.iter().find(|c| c.multiplicity() == 1).unwrap();
        assert!(subspaces_equal(
            &alpha.eigenspace,
            &span(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]),
            tol()
        )
        .unwrap());
        assert!(
            subspaces_equal(&beta.eigenspace, &span(&[&[0.0, 0.0, 1.0]]), tol()).unwrap()
        );
    }

    #[test]
    fn eigenspaces_identity_single_cluster() {
        let a = DMatrix::<f64>::identity(4, 4);
        let clusters = real_invariant_eigenspaces(&a, tol()).unwrap();
        assert_eq!(clusters.len(), 1);
        assert!(clusters[0].eigenspace.is_full());
        assert_eq!(clusters[0].multiplicity(), 4);
    }

    #[test]
    fn eigenspaces_conjugate_pair() {
        // Rotation by 90 degrees: eigenvalues +-i; characteristic polynomial
        // s^2 + 1 has no real root, so the only real invariant eigenspace is
        // the whole plane.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let clusters = real_invariant_eigenspaces(&a, tol()).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].multiplicity(), 2);
        assert!(clusters[0].eigenspace.is_full());
        let ims: Vec<f64> = clusters[0].eigenvalues.iter().map(|l| l.im).collect();
        assert!(ims.iter().any(|&x| x > 0.9) && ims.iter().any(|&x| x < -0.9));
    }

    #[test]
    fn eigenspaces_defective_block() {
        // One Jordan block: a single cluster whose generalized eigenspace is
        // everything even though the geometric multiplicity is 1.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let clusters = real_invariant_eigenspaces(&a, tol()).unwrap();
        assert_eq!(clusters.len(), 1);
        assert!(clusters[0].eigenspace.is_full());
    }

    #[test]
    fn jacobi_svd_on_rank_one_with_zero_column() {
        // Proportional columns plus an exact zero column; a previously used
        // bidiagonalization SVD returned a wrong factorization here.
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                -0.4623275857659861,
                -0.5923622706646432,
                0.0,
                0.1532327537840733,
                0.1963311400104807,
                0.0,
                -0.8973753081397174,
                -1.1497719182975346,
                0.0,
            ],
        );
        let (u, s, v) = jacobi_svd(&m);
        let recon = &u * DMatrix::from_diagonal(&s) * v.transpose();
        assert!((recon - &m).norm() < 1e-12 * m.norm());
        assert_relative_eq!(s[0], 1.659495091105029, epsilon = 1e-9);
        assert!(s[1] < 1e-12);
        let im = image(&m, tol());
        assert_eq!(im.dim(), 1);
        let col = m.column(0).normalize();
        assert!(col.dot(&im.basis().column(0)).abs() > 1.0 - 1e-12);
    }

    #[test]
    fn closure_example_relation_sum() {
        // Kernels of the two 2 x 6 relation stacks sum to the kernel of the
        // single row [0 0 1 0 0 -1].
        let r_b = DMatrix::from_row_slice(
            2,
            6,
            &[
                0.0, 0.0, 1.0, 0.0, 0.0, -1.0, //
                1.0, -1.0, 0.0, -1.0, 1.0, 0.0,
            ],
        );
        let r_b2 = DMatrix::from_row_slice(
            2,
            6,
            &[
                1.0, 0.0, 0.0, -1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, 0.0, -1.0,
            ],
        );
        let (_, k1) = rank_and_kernel(&r_b, tol());
        let (_, k2) = rank_and_kernel(&r_b2, tol());
        let s = sum(&k1, &k2, tol()).unwrap();
        let row = DMatrix::from_row_slice(1, 6, &[0.0, 0.0, 1.0, 0.0, 0.0, -1.0]);
        let (_, expected) = rank_and_kernel(&row, tol());
        assert!(subspaces_equal(&s, &expected, tol()).unwrap());
    }

    // ---- property tests ----

    fn arb_matrix(max_dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10.0..10.0f64, r * c)
                .prop_map(move |v| DMatrix::from_row_slice(r, c, &v))
        })
    }

    fn arb_subspace_pair(n: usize) -> impl Strategy<Value = (Subspace, Subspace)> {
        let m1 = proptest::collection::vec(-5.0..5.0f64, n * n)
            .prop_map(move |v| DMatrix::from_row_slice(n, n, &v));
        let m2 = proptest::collection::vec(-5.0..5.0f64, n * n)
            .prop_map(move |v| DMatrix::from_row_slice(n, n, &v));
        (m1, m2, 0..=n, 0..=n).prop_map(move |(a, b, da, db)| {
            (
                image(&a.columns(0, da).into_owned(), tol()),
                image(&b.columns(0, db).into_owned(), tol()),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rank_nullity(m in arb_matrix(6)) {
            let (r, k) = rank_and_kernel(&m, tol());
            prop_assert_eq!(r + k.dim(), m.ncols());
        }

        #[test]
        fn jacobi_svd_is_a_factorization(m in arb_matrix(6)) {
            let (u, s, v) = jacobi_svd(&m);
            let k = m.nrows().min(m.ncols());
            prop_assert_eq!(s.len(), k);
            for i in 1..k {
                prop_assert!(s[i] <= s[i - 1]);
                prop_assert!(s[i] >= 0.0);
            }
            let recon = &u * DMatrix::from_diagonal(&s) * v.transpose();
            prop_assert!((recon - &m).norm() <= 1e-12 * (1.0 + m.norm()));
            // v always has orthonormal columns; u columns matching nonzero
            // singular values are orthonormal as well.
            let vv = v.transpose() * &v;
            prop_assert!((vv - DMatrix::identity(k, k)).norm() < 1e-12 * k as f64);
            let r = rank(&m, tol());
            let ur = u.columns(0, r).into_owned();
            let uu = ur.transpose() * &ur;
            prop_assert!((uu - DMatrix::identity(r, r)).norm() < 1e-10 * (1 + r) as f64);
        }

        #[test]
        fn rank_invariant_under_well_conditioned_maps(m in arb_matrix(5)) {
            // Orthogonal-times-bounded-diagonal factors keep the condition
            // number below 1e3.
            let rows = m.nrows();
            let q = image(&(DMatrix::<f64>::identity(rows, rows)
                + 0.3 * DMatrix::from_fn(rows, rows, |i, j| ((i * 7 + j * 3) as f64).sin())), tol());
            let d = DMatrix::from_fn(rows, rows, |i, j| if i == j { 1.0 + i as f64 } else { 0.0 });
            let p = q.basis() * d;
            prop_assert_eq!(rank(&(&p * &m), tol()), rank(&m, tol()));
        }

        #[test]
        fn lattice_properties((u, v) in arb_subspace_pair(5)) {
            let i1 = intersect(&u, &v, tol()).unwrap();
            let i2 = intersect(&v, &u, tol()).unwrap();
            prop_assert!(subspaces_equal(&i1, &i2, tol()).unwrap());

            let s1 = sum(&u, &v, tol()).unwrap();
            let s2 = sum(&v, &u, tol()).unwrap();
            prop_assert!(subspaces_equal(&s1, &s2, tol()).unwrap());

            prop_assert!(is_contained(&i1, &u, tol()).unwrap());
            prop_assert!(is_contained(&u, &s1, tol()).unwrap());

            // Grassmann identity.
            prop_assert_eq!(u.dim() + v.dim(), s1.dim() + i1.dim());
        }

        #[test]
        fn eigenspace_partition(m in arb_matrix(5)) {
            prop_assume!(m.nrows() == m.ncols());
            let a = m;
            if let Ok(clusters) = real_invariant_eigenspaces(&a, tol()) {
                let n = a.nrows();
                let mut total = Subspace::zero(n);
                for c in &clusters {
                    prop_assert!(is_invariant(&a, &c.eigenspace, tol()).unwrap());
                    prop_assert_eq!(c.eigenspace.dim(), c.multiplicity());
                    for other in &clusters {
                        if !std::ptr::eq(c, other) {
                            let meet = intersect(&c.eigenspace, &other.eigenspace, tol()).unwrap();
                            prop_assert_eq!(meet.dim(), 0);
                        }
                    }
                    total = sum(&total, &c.eigenspace, tol()).unwrap();
                }
                prop_assert!(total.is_full());
            }
        }
    }
}
