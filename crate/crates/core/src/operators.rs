//! Maximally monotone operators, represented and evaluated through their
//! resolvents.
//!
//! An [`OperatorSpec`] is a small expression tree. Leaves are concrete
//! operators with a closed-form or linear-solve resolvent (normal cones of
//! projectable sets, monotone affine maps, constants, zero); inner nodes are
//! inversion, the flip `A ↦ (−Id)∘A∘(−Id)`, and inner/outer shifts. The
//! operators themselves are set-valued in general and never evaluated
//! pointwise: all algebra flows through [`resolvent`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecspace::{symmetric_eigenvalues, Lu, Matrix, Vector};

/// Relative tolerance used by graph-membership certificates.
pub const TOL_CERT: f64 = 1e-7;

/// Slack allowed on the smallest eigenvalue of the symmetric part of an
/// affine operator before it is rejected as non-monotone.
pub const PSD_SLACK: f64 = 1e-10;

const ORTHONORMAL_TOL: f64 = 1e-12;
const SKEW_TOL: f64 = 1e-10;
const EPIGRAPH_RESIDUAL: f64 = 1e-12;

/// Nonempty closed convex sets with a computable projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetRecord", into = "SetRecord")]
pub enum ProjectableSet {
    /// Coordinatewise `lo ≤ x ≤ hi`.
    Box { lo: Vector, hi: Vector },
    Ball { center: Vector, radius: f64 },
    /// `anchor + span(basis)`; the basis rows are orthonormal and may be empty.
    AffineSubspace { anchor: Vector, basis: Vec<Vector> },
    /// `{ x : ⟨normal, x⟩ ≤ offset }`.
    Halfspace { normal: Vector, offset: f64 },
    /// `{ (x, y) ∈ R² : beta + exp(x) ≤ y }`.
    EpigraphExp { beta: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum SetRecord {
    Box { lo: Vector, hi: Vector },
    Ball { center: Vector, radius: f64 },
    AffineSubspace { anchor: Vector, basis: Vec<Vector> },
    Halfspace { normal: Vector, offset: f64 },
    EpigraphExp { beta: f64 },
}

impl TryFrom<SetRecord> for ProjectableSet {
    type Error = Error;
    fn try_from(r: SetRecord) -> Result<Self> {
        let set = match r {
            SetRecord::Box { lo, hi } => ProjectableSet::Box { lo, hi },
            SetRecord::Ball { center, radius } => ProjectableSet::Ball { center, radius },
            SetRecord::AffineSubspace { anchor, basis } => ProjectableSet::AffineSubspace { anchor, basis },
            SetRecord::Halfspace { normal, offset } => ProjectableSet::Halfspace { normal, offset },
            SetRecord::EpigraphExp { beta } => ProjectableSet::EpigraphExp { beta },
        };
        set.validate()?;
        Ok(set)
    }
}

impl From<ProjectableSet> for SetRecord {
    fn from(s: ProjectableSet) -> Self {
        match s {
            ProjectableSet::Box { lo, hi } => SetRecord::Box { lo, hi },
            ProjectableSet::Ball { center, radius } => SetRecord::Ball { center, radius },
            ProjectableSet::AffineSubspace { anchor, basis } => SetRecord::AffineSubspace { anchor, basis },
            ProjectableSet::Halfspace { normal, offset } => SetRecord::Halfspace { normal, offset },
            ProjectableSet::EpigraphExp { beta } => SetRecord::EpigraphExp { beta },
        }
    }
}

impl ProjectableSet {
    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        let s = ProjectableSet::Box { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        let s = ProjectableSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn affine_subspace(anchor: Vector, basis: Vec<Vector>) -> Result<Self> {
        let s = ProjectableSet::AffineSubspace { anchor, basis };
        s.validate()?;
        Ok(s)
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        let s = ProjectableSet::Halfspace { normal, offset };
        s.validate()?;
        Ok(s)
    }

    pub fn epigraph_exp(beta: f64) -> Result<Self> {
        let s = ProjectableSet::EpigraphExp { beta };
        s.validate()?;
        Ok(s)
    }

    /// The horizontal line `R × {height}` in the plane.
    pub fn horizontal_line(height: f64) -> Self {
        ProjectableSet::AffineSubspace {
            anchor: Vector::from_raw(vec![0.0, height]),
            basis: vec![Vector::from_raw(vec![1.0, 0.0])],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProjectableSet::Box { lo, .. } => lo.dim(),
            ProjectableSet::Ball { center, .. } => center.dim(),
            ProjectableSet::AffineSubspace { anchor, .. } => anchor.dim(),
            ProjectableSet::Halfspace { normal, .. } => normal.dim(),
            ProjectableSet::EpigraphExp { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProjectableSet::Box { lo, hi } => {
                hi.check_dim(lo.dim())?;
                if let Some(i) = (0..lo.dim()).find(|&i| lo[i] > hi[i]) {
                    return Err(Error::InvalidSet(format!("box has lo[{i}] > hi[{i}]")));
                }
            }
            ProjectableSet::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
                }
            }
            ProjectableSet::AffineSubspace { anchor, basis } => {
                for (i, e) in basis.iter().enumerate() {
                    e.check_dim(anchor.dim())?;
                    for (j, f) in basis.iter().enumerate().take(i + 1) {
                        let g: f64 = e.iter().zip(f.iter()).map(|(a, b)| a * b).sum();
                        let expected = if i == j { 1.0 } else { 0.0 };
                        if (g - expected).abs() > ORTHONORMAL_TOL {
                            return Err(Error::InvalidSet(format!(
                                "affine subspace basis is not orthonormal (entry ({i},{j}) of the Gram matrix is {g})"
                            )));
                        }
                    }
                }
            }
            ProjectableSet::Halfspace { normal, offset } => {
                if normal.norm() == 0.0 {
                    return Err(Error::InvalidSet("halfspace normal must be nonzero".into()));
                }
                if !offset.is_finite() {
                    return Err(Error::InvalidSet("halfspace offset must be finite".into()));
                }
            }
            ProjectableSet::EpigraphExp { beta } => {
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(Error::InvalidSet(format!("epigraph beta must be nonnegative, got {beta}")));
                }
            }
        }
        Ok(())
    }
}

/// Nearest point of `set` to `x`.
pub fn project(set: &ProjectableSet, x: &Vector) -> Result<Vector> {
    x.check_dim(set.dim())?;
    let p = match set {
        ProjectableSet::Box { lo, hi } => {
            Vector::from_raw((0..x.dim()).map(|i| x[i].clamp(lo[i], hi[i])).collect())
        }
        ProjectableSet::Ball { center, radius } => {
            let d = x - center;
            let n = d.norm();
            if n <= *radius {
                x.clone()
            } else {
                center.axpy(radius / n, &d)
            }
        }
        ProjectableSet::AffineSubspace { anchor, basis } => {
            let d = x - anchor;
            basis.iter().fold(anchor.clone(), |acc, e| {
                let c: f64 = d.iter().zip(e.iter()).map(|(a, b)| a * b).sum();
                acc.axpy(c, e)
            })
        }
        ProjectableSet::Halfspace { normal, offset } => {
            let s: f64 = x.iter().zip(normal.iter()).map(|(a, b)| a * b).sum();
            if s <= *offset {
                x.clone()
            } else {
                x.axpy(-(s - offset) / (normal.norm() * normal.norm()), normal)
            }
        }
        ProjectableSet::EpigraphExp { beta } => project_epigraph_exp(*beta, x[0], x[1]),
    };
    Ok(p)
}

/// Projection onto `{ (s, y) : beta + exp(s) ≤ y }`.
///
/// For a point `(a, b)` outside the set the nearest point is `(t, beta + e^t)`
/// where `t` is the unique root in `(lo, a)` of
/// `g(t) = t − a + (beta + e^t − b) e^t`; `g` is strictly increasing there.
fn project_epigraph_exp(beta: f64, a: f64, b: f64) -> Vector {
    if b >= beta + a.exp() {
        return Vector::from_raw(vec![a, b]);
    }
    let g = |t: f64| {
        let e = t.exp();
        t - a + (beta + e - b) * e
    };
    let dg = |t: f64| {
        let e = t.exp();
        1.0 + e * (beta - b) + 2.0 * e * e
    };

    let mut lo = if b > beta { (b - beta).ln() } else { a - 1.0 };
    if b <= beta {
        while g(lo) >= 0.0 {
            lo = a - 2.0 * (a - lo);
        }
    }
    // At the root (beta + e^t − b) e^t = a − t ≤ a − lo, which bounds e^t.
    let mut hi = a.min(((b - beta).max(0.0) + (a - lo).max(0.0).sqrt()).ln());
    if !(hi > lo) || g(hi) < 0.0 {
        hi = a;
    }

    let mut t = hi;
    for _ in 0..200 {
        let gt = g(t);
        if gt.abs() <= EPIGRAPH_RESIDUAL {
            break;
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let newton = t - gt / dg(t);
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            break;
        }
    }
    Vector::from_raw(vec![t, beta + t.exp()])
}

/// A monotone affine map `x ↦ M x + a`, with the factorization of `Id + M`
/// kept for repeated resolvent evaluations.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "AffineRecord", into = "AffineRecord")]
pub struct AffineMap {
    m: Matrix,
    a: Vector,
    id_plus_m: Lu,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineRecord {
    #[serde(rename = "M")]
    m: Matrix,
    a: Vector,
}

impl AffineMap {
    /// Rejects `M` whose symmetric part has an eigenvalue below `-PSD_SLACK`.
    pub fn new(m: Matrix, a: Vector) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.rows(), found: m.cols() });
        }
        a.check_dim(m.rows())?;
        let min_eigenvalue = symmetric_eigenvalues(&m.symmetric_part()?)?[0];
        if min_eigenvalue < -PSD_SLACK {
            return Err(Error::NotMonotone { min_eigenvalue });
        }
        let id_plus_m = Lu::factor(&Matrix::identity(m.rows()).add(&m)?)?;
        Ok(AffineMap { m, a, id_plus_m })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn offset(&self) -> &Vector {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

impl PartialEq for AffineMap {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.a == other.a
    }
}

impl TryFrom<AffineRecord> for AffineMap {
    type Error = Error;
    fn try_from(r: AffineRecord) -> Result<Self> {
        AffineMap::new(r.m, r.a)
    }
}

impl From<AffineMap> for AffineRecord {
    fn from(a: AffineMap) -> Self {
        AffineRecord { m: a.m, a: a.a }
    }
}

/// Expression tree describing a maximally monotone operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `N_U`; resolvent is the projection onto `U`.
    NormalCone { set: ProjectableSet },
    /// `x ↦ M x + a` with `M + Mᵀ` positive semidefinite.
    AffineMonotone(AffineMap),
    /// Graph `X × {a}`.
    ConstantValued { a: Vector },
    Zero,
    Inverse { inner: Box<OperatorSpec> },
    /// `(−Id)∘A∘(−Id)`
    FlipBoth { inner: Box<OperatorSpec> },
    /// `x ↦ A(x − w)`
    InnerShift { inner: Box<OperatorSpec>, w: Vector },
    /// `x ↦ A x − w`
    OuterShift { inner: Box<OperatorSpec>, w: Vector },
}

impl OperatorSpec {
    pub fn normal_cone(set: ProjectableSet) -> Self {
        OperatorSpec::NormalCone { set }
    }

    pub fn affine(m: Matrix, a: Vector) -> Result<Self> {
        Ok(OperatorSpec::AffineMonotone(AffineMap::new(m, a)?))
    }

    pub fn linear(m: Matrix) -> Result<Self> {
        let n = m.rows();
        Self::affine(m, Vector::zeros(n))
    }

    pub fn constant(a: Vector) -> Self {
        OperatorSpec::ConstantValued { a }
    }

    pub fn inverse(self) -> Self {
        OperatorSpec::Inverse { inner: Box::new(self) }
    }

    pub fn flip(self) -> Self {
        OperatorSpec::FlipBoth { inner: Box::new(self) }
    }

    /// `A^{−⊻}`, built as the flip of the inverse.
    pub fn inverse_flip(self) -> Self {
        self.inverse().flip()
    }

    pub fn inner_shift(self, w: Vector) -> Self {
        OperatorSpec::InnerShift { inner: Box::new(self), w }
    }

    pub fn outer_shift(self, w: Vector) -> Self {
        OperatorSpec::OuterShift { inner: Box::new(self), w }
    }

    /// Ambient dimension fixed by the data in the tree; `None` for trees
    /// built only from `Zero` and unary nodes.
    pub fn dim(&self) -> Option<usize> {
        match self {
            OperatorSpec::NormalCone { set } => Some(set.dim()),
            OperatorSpec::AffineMonotone(map) => Some(map.dim()),
            OperatorSpec::ConstantValued { a } => Some(a.dim()),
            OperatorSpec::Zero => None,
            OperatorSpec::Inverse { inner } | OperatorSpec::FlipBoth { inner } => inner.dim(),
            OperatorSpec::InnerShift { w, .. } | OperatorSpec::OuterShift { w, .. } => Some(w.dim()),
        }
    }

    /// Checks that every vector, matrix and set in the tree lives in `R^dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            OperatorSpec::NormalCone { set } => check(set.dim(), dim),
            OperatorSpec::AffineMonotone(map) => check(map.dim(), dim),
            OperatorSpec::ConstantValued { a } => a.check_dim(dim),
            OperatorSpec::Zero => Ok(()),
            OperatorSpec::Inverse { inner } | OperatorSpec::FlipBoth { inner } => inner.check_dim(dim),
            OperatorSpec::InnerShift { inner, w } | OperatorSpec::OuterShift { inner, w } => {
                w.check_dim(dim)?;
                inner.check_dim(dim)
            }
        }
    }

    pub fn resolvent(&self, x: &Vector) -> Result<Vector> {
        resolvent(self, x)
    }
}

fn check(found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `J_A = (Id + A)^{-1}` evaluated at `x`.
pub fn resolvent(op: &OperatorSpec, x: &Vector) -> Result<Vector> {
    match op {
        OperatorSpec::NormalCone { set } => project(set, x),
        OperatorSpec::AffineMonotone(map) => {
            x.check_dim(map.dim())?;
            map.id_plus_m.solve(&(x - &map.a))
        }
        OperatorSpec::ConstantValued { a } => {
            x.check_dim(a.dim())?;
            Ok(x - a)
        }
        OperatorSpec::Zero => Ok(x.clone()),
        // J_A + J_{A^{-1}} = Id
        OperatorSpec::Inverse { inner } => Ok(x - resolvent(inner, x)?),
        OperatorSpec::FlipBoth { inner } => Ok(-resolvent(inner, &-x)?),
        OperatorSpec::InnerShift { inner, w } => {
            x.check_dim(w.dim())?;
            Ok(resolvent(inner, &(x - w))? + w)
        }
        OperatorSpec::OuterShift { inner, w } => {
            x.check_dim(w.dim())?;
            resolvent(inner, &(x + w))
        }
    }
}

/// `R_A = 2 J_A − Id` evaluated at `x`.
pub fn reflected_resolvent(op: &OperatorSpec, x: &Vector) -> Result<Vector> {
    Ok(resolvent(op, x)?.scale(2.0) - x)
}

/// Closed-form resolvent `(x − A x) / (1 + α)` of a skew linear map with
/// `A² = −α Id`.
pub fn resolvent_skew_formula(alpha: f64, a: &Matrix, x: &Vector) -> Result<Vector> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Precondition(format!("alpha must be nonnegative, got {alpha}")));
    }
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    x.check_dim(a.rows())?;
    let skew = a.add(&a.transpose())?.norm();
    if skew > SKEW_TOL {
        return Err(Error::Precondition(format!("matrix is not skew: |A + Aᵀ| = {skew:e}")));
    }
    let square = a.matmul(a)?.add(&Matrix::identity(a.rows()).scale(alpha))?.norm();
    if square > SKEW_TOL {
        return Err(Error::Precondition(format!("A² ≠ −αId: |A² + αId| = {square:e}")));
    }
    Ok((x - a.matvec(x)?).scale(1.0 / (1.0 + alpha)))
}

/// Distance `‖J_A(x + x*) − x‖`; zero exactly when `x* ∈ A x`.
pub fn membership_residual(op: &OperatorSpec, x: &Vector, xstar: &Vector) -> Result<f64> {
    xstar.check_dim(x.dim())?;
    Ok(resolvent(op, &(x + xstar))?.dist(x))
}

/// Certifies `x* ∈ A x` up to `TOL_CERT · (1 + ‖x‖)`.
pub fn membership(op: &OperatorSpec, x: &Vector, xstar: &Vector) -> bool {
    membership_residual(op, x, xstar).is_ok_and(|r| r <= TOL_CERT * (1.0 + x.norm()))
}

/// Pointwise form `x ↦ M x + c` of a single-valued affine operator, when the
/// tree has one. Computed structurally, independently of the resolvents.
pub fn affine_form(op: &OperatorSpec, dim: usize) -> Option<(Matrix, Vector)> {
    match op {
        OperatorSpec::NormalCone { .. } => None,
        OperatorSpec::AffineMonotone(map) => Some((map.m.clone(), map.a.clone())),
        OperatorSpec::ConstantValued { a } => Some((Matrix::zeros(dim, dim), a.clone())),
        OperatorSpec::Zero => Some((Matrix::zeros(dim, dim), Vector::zeros(dim))),
        OperatorSpec::Inverse { inner } => {
            // y = M x + c  ⇔  x = M⁻¹ y − M⁻¹ c
            let (m, c) = affine_form(inner, dim)?;
            let lu = Lu::factor(&m).ok()?;
            let cols: Vec<Vector> = (0..dim).map(|j| lu.solve(&Vector::basis(dim, j))).collect::<Result<_>>().ok()?;
            let inv = Matrix::from_columns(&cols).ok()?;
            let shift = -lu.solve(&c).ok()?;
            Some((inv, shift))
        }
        OperatorSpec::FlipBoth { inner } => {
            let (m, c) = affine_form(inner, dim)?;
            Some((m, -c))
        }
        OperatorSpec::InnerShift { inner, w } => {
            let (m, c) = affine_form(inner, dim)?;
            let shift = c - m.matvec(w).ok()?;
            Some((m, shift))
        }
        OperatorSpec::OuterShift { inner, w } => {
            let (m, c) = affine_form(inner, dim)?;
            Some((m, c - w))
        }
    }
}

/// The rotator by π/2 in the plane, `(ξ, η) ↦ (−η, ξ)`.
pub fn rotator() -> Matrix {
    Matrix::new(2, 2, vec![0.0, -1.0, 1.0, 0.0]).expect("static shape")
}
