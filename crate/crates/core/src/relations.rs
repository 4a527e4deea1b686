//! Subspace relations between state spaces.
//!
//! A relation is stored through a matrix pair `(R1, R2)` with equal row
//! counts; the relation itself is the subspace
//! `ker([R1 -R2]) = {(x1, x2) : R1 x1 = R2 x2}`.

use nalgebra::DMatrix;

use crate::numlin::{self, Subspace, Tolerance};
use crate::{Error, Result};

/// Relation `{(x1, x2) : R1 x1 = R2 x2}` between `R^{n1}` and `R^{n2}`.
#[derive(Debug, Clone)]
pub struct LinearRelation {
    r1: DMatrix<f64>,
    r2: DMatrix<f64>,
}

impl LinearRelation {
    pub fn new(r1: DMatrix<f64>, r2: DMatrix<f64>) -> Result<Self> {
        if r1.nrows() != r2.nrows() {
            return Err(Error::Dimension(format!(
                "R1 and R2 must have equal row counts, found {} and {}",
                r1.nrows(),
                r2.nrows()
            )));
        }
        if !r1.iter().all(|v| v.is_finite()) || !r2.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid("relation matrices must be finite".into()));
        }
        Ok(Self { r1, r2 })
    }

    /// Graph of the linear map `x2 = T x1`, i.e. `(R1, R2) = (T, I)`.
    pub fn graph(t: &DMatrix<f64>) -> Self {
        Self {
            r1: t.clone(),
            r2: DMatrix::identity(t.nrows(), t.nrows()),
        }
    }

    /// Identity relation on `R^n`.
    pub fn identity(n: usize) -> Self {
        Self {
            r1: DMatrix::identity(n, n),
            r2: DMatrix::identity(n, n),
        }
    }

    /// Presents a subspace of `R^{n1+n2}` as a relation: the stacked matrix
    /// is an orthonormal basis of the subspace's orthogonal complement.
    pub fn from_kernel_subspace(
        s: &Subspace,
        n1: usize,
        n2: usize,
        tol: Tolerance,
    ) -> Result<Self> {
        if s.ambient_dim() != n1 + n2 {
            return Err(Error::Dimension(format!(
                "subspace ambient {} does not match n1 + n2 = {}",
                s.ambient_dim(),
                n1 + n2
            )));
        }
        let stack = s.orthogonal_complement(tol).basis().transpose();
        let r1 = stack.columns(0, n1).into_owned();
        let r2 = -stack.columns(n1, n2).into_owned();
        Self::new(r1, r2)
    }

    pub fn r1(&self) -> &DMatrix<f64> {
        &self.r1
    }

    pub fn r2(&self) -> &DMatrix<f64> {
        &self.r2
    }

    pub fn rows(&self) -> usize {
        self.r1.nrows()
    }

    pub fn n1(&self) -> usize {
        self.r1.ncols()
    }

    pub fn n2(&self) -> usize {
        self.r2.ncols()
    }

    /// Swapped relation `(R2, R1)`.
    pub fn transposed(&self) -> Self {
        Self {
            r1: self.r2.clone(),
            r2: self.r1.clone(),
        }
    }

    /// The stacked matrix `[R1 -R2]`.
    pub fn stack(&self) -> DMatrix<f64> {
        numlin::hcat(&self.r1, &(-&self.r2))
    }

    /// The relation as a subspace of `R^{n1+n2}`.
    pub fn kernel_stack(&self, tol: Tolerance) -> Subspace {
        numlin::rank_and_kernel(&self.stack(), tol).1
    }

    /// Totality: every state on each side is related to some state on the
    /// other side. Holds exactly when the ranks of `R1`, `R2` and `[R1 -R2]`
    /// coincide.
    pub fn is_total(&self, tol: Tolerance) -> bool {
        let r1 = numlin::rank(&self.r1, tol);
        let r2 = numlin::rank(&self.r2, tol);
        r1 == r2 && r1 == numlin::rank(&self.stack(), tol)
    }

    /// Whether the relation acts as an equivalence relation on `R^n`.
    ///
    /// A total relation with `R1 = R2` is literally an equivalence relation.
    /// Presentations differ, though: the canonical check used here accepts
    /// pairs whose two kernels agree (the induced state partition is then the
    /// one of `(R1, R1)`). Use [`Self::is_equivalence_strict`] for the
    /// literal matrix-equality test.
    pub fn is_equivalence(&self, tol: Tolerance) -> bool {
        if self.n1() != self.n2() || !self.is_total(tol) {
            return false;
        }
        let k1 = numlin::rank_and_kernel(&self.r1, tol).1;
        let k2 = numlin::rank_and_kernel(&self.r2, tol).1;
        numlin::subspaces_equal(&k1, &k2, tol).unwrap_or(false)
    }

    /// Strict test: total and `R1 = R2` as matrices.
    pub fn is_equivalence_strict(&self, tol: Tolerance) -> bool {
        self.n1() == self.n2()
            && self.is_total(tol)
            && numlin::matrices_equal(&self.r1, &self.r2, tol)
                .map(|(eq, _)| eq)
                .unwrap_or(false)
    }

    /// Forward image of a subspace: `{x2 : R2 x2 in R1 X1}`.
    ///
    /// Always contains `ker(R2)`.
    pub fn forward_image(&self, x1: &Subspace, tol: Tolerance) -> Result<Subspace> {
        if x1.ambient_dim() != self.n1() {
            return Err(Error::Dimension(format!(
                "forward image needs ambient {}, found {}",
                self.n1(),
                x1.ambient_dim()
            )));
        }
        let mapped = numlin::image_scaled(&(&self.r1 * x1.basis()), self.r1.norm(), tol);
        Ok(preimage(&self.r2, &mapped, tol))
    }

    /// Inverse image of a subspace: `{x1 : R1 x1 in R2 X2}`.
    ///
    /// Always contains `ker(R1)`.
    pub fn inverse_image(&self, x2: &Subspace, tol: Tolerance) -> Result<Subspace> {
        if x2.ambient_dim() != self.n2() {
            return Err(Error::Dimension(format!(
                "inverse image needs ambient {}, found {}",
                self.n2(),
                x2.ambient_dim()
            )));
        }
        let mapped = numlin::image_scaled(&(&self.r2 * x2.basis()), self.r2.norm(), tol);
        Ok(preimage(&self.r1, &mapped, tol))
    }

    /// Minimal-row presentation with the same relation subspace: rows are
    /// replaced by an orthonormal basis of the stack's row space.
    pub fn minimal_presentation(&self, tol: Tolerance) -> Result<Self> {
        let row_space = numlin::image(&self.stack().transpose(), tol);
        let stack = row_space.basis().transpose();
        let r1 = stack.columns(0, self.n1()).into_owned();
        let r2 = -stack.columns(self.n1(), self.n2()).into_owned();
        Self::new(r1, r2)
    }
}

/// Preimage of a subspace under a matrix: `{x : M x in Y}`, computed as the
/// kernel of the projector onto `Y`'s complement composed with `M`. The rank
/// threshold is referred to `M`'s own scale: when the projected matrix is
/// tiny relative to `M`, the preimage is everything.
fn preimage(m: &DMatrix<f64>, y: &Subspace, tol: Tolerance) -> Subspace {
    let r = m.nrows();
    let proj_out = DMatrix::<f64>::identity(r, r) - y.basis() * y.basis().transpose();
    numlin::rank_and_kernel_scaled(&(proj_out * m), m.norm(), tol).1
}
