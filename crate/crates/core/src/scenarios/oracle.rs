//! Reference answers computed without the Douglas–Rachford machinery. Only
//! linear algebra and projections are used here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{project, rotator, ProjectableSet};
use crate::vecspace::{least_norm, project_range, Matrix, PivotedQr, Vector};

pub const AP_BUDGET: usize = 1_000_000;
pub const AP_TOL: f64 = 1e-12;
/// A V-side step at or below this size counts as having reached a fixed point
/// of `P_V P_U`.
pub const AP_ATTAINED: f64 = 1e-9;

/// Result of alternating projections between two closed convex sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapOracle {
    /// Limit of `vₙ − P_U vₙ`, the element of `cl(V − U)` nearest the origin.
    pub gap: Vector,
    /// Last V-side iterate; a point of `Fix(P_V P_U)` when `attained`.
    pub v_point: Vector,
    pub attained: bool,
    pub iterations: usize,
    pub last_step: f64,
}

/// Runs `vₙ = P_V P_U vₙ₋₁` from `v₀ = P_V 0` until the gap `vₙ − P_U vₙ`
/// moves by at most `tol` or `budget` rounds are spent.
pub fn alternating_projections(u: &ProjectableSet, v: &ProjectableSet, budget: usize, tol: f64) -> Result<GapOracle> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), found: v.dim() });
    }
    let mut vn = project(v, &Vector::zeros(u.dim()))?;
    let mut gap: Option<Vector> = None;
    let mut last_step = f64::INFINITY;
    let mut n = 0;
    while n < budget {
        n += 1;
        let un = project(u, &vn)?;
        let next = project(v, &un)?;
        last_step = next.dist(&vn);
        let g = &next - project(u, &next)?;
        vn = next;
        let moved = gap.as_ref().map_or(f64::INFINITY, |prev| prev.dist(&g));
        gap = Some(g);
        if moved <= tol {
            break;
        }
    }
    Ok(GapOracle {
        gap: gap.expect("budget is at least one round"),
        v_point: vn,
        attained: last_step <= AP_ATTAINED,
        iterations: n,
        last_step,
    })
}

/// `v(A, B) = ½(Id − L)(a* − b*)` and `v(B, A) = ½(Id + L)(a* − b*)` for
/// `A = L + a*`, `B = −L − b*` with `L` the planar rotator.
///
/// Both follow from `0 = A(x − w) + Bx − w`: in order `(A, B)` this reads
/// `(Id + L) w = a* − b*`, in order `(B, A)` it reads `(Id − L) w = a* − b*`.
pub fn rotator_closed_form(astar: &Vector, bstar: &Vector) -> Result<(Vector, Vector)> {
    astar.check_dim(2)?;
    bstar.check_dim(2)?;
    let l = rotator();
    let d = astar - bstar;
    let forward = (&d - l.matvec(&d)?).scale(0.5);
    let backward = (&d + l.matvec(&d)?).scale(0.5);
    Ok((forward, backward))
}

/// `a* + b*`, the displacement vector of two constant operators in either order.
pub fn constants_closed_form(astar: &Vector, bstar: &Vector) -> Result<Vector> {
    bstar.check_dim(astar.dim())?;
    Ok(astar + bstar)
}

/// Least-squares reference: `(P_{ran M} b − b, x)` with `x` the least-norm
/// solution of the normal equations `MᵀM x = Mᵀ b`.
pub fn least_squares_oracle(m: &Matrix, b: &Vector) -> Result<(Vector, Vector)> {
    let v = project_range(m, b)? - b;
    let mt = m.transpose();
    let x = least_norm(&mt.matmul(m)?, &mt.matvec(b)?)?;
    Ok((v, x))
}

/// Least-norm `w` subject to `(Id + L) w − (L + M) x = a* + b*` for some `x`,
/// together with the least-norm such `x`.
///
/// Writing `Q` for an orthonormal basis of `ran(L + M)^⊥`, the constraint is
/// solvable in `x` exactly when `Qᵀ(Id + L) w = Qᵀ(a* + b*)`.
pub fn affine_qp_oracle(l: &Matrix, astar: &Vector, m: &Matrix, bstar: &Vector) -> Result<(Vector, Vector)> {
    let n = l.rows();
    if !l.is_square() || m.rows() != n || !m.is_square() {
        return Err(Error::DimensionMismatch { expected: n, found: m.rows() });
    }
    astar.check_dim(n)?;
    bstar.check_dim(n)?;
    let sum = l.add(m)?;
    let rhs = astar + bstar;
    let id_plus_l = Matrix::identity(n).add(l)?;
    let complement = PivotedQr::factor(&sum).range_complement_basis();
    let w = if complement.is_empty() {
        Vector::zeros(n)
    } else {
        let qt = Matrix::from_columns(&complement)?.transpose();
        least_norm(&qt.matmul(&id_plus_l)?, &qt.matvec(&rhs)?)?
    };
    let x = least_norm(&sum, &(id_plus_l.matvec(&w)? - &rhs))?;
    Ok((w, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn ball(c: &[f64], r: f64) -> ProjectableSet {
        ProjectableSet::ball(v(c), r).unwrap()
    }

    #[test]
    fn alternating_projections_on_balls() {
        let g = alternating_projections(&ball(&[0.0, 0.0], 2.0), &ball(&[3.0, 0.0], 2.0), AP_BUDGET, AP_TOL).unwrap();
        assert!(g.gap.norm() <= 1e-9 && g.attained);
        let g = alternating_projections(&ball(&[0.0, 0.0], 1.0), &ball(&[3.0, 0.0], 1.0), AP_BUDGET, AP_TOL).unwrap();
        assert!(g.gap.dist(&v(&[1.0, 0.0])) <= 1e-12);
        assert!(g.v_point.dist(&v(&[2.0, 0.0])) <= 1e-12 && g.attained);
    }

    #[test]
    fn alternating_projections_on_lines() {
        let g = alternating_projections(
            &ProjectableSet::horizontal_line(0.0),
            &ProjectableSet::horizontal_line(1.0),
            10,
            AP_TOL,
        )
        .unwrap();
        assert_eq!(g.gap, v(&[0.0, 1.0]));
        assert_eq!(g.iterations, 2);
        assert_eq!(g.v_point, v(&[0.0, 1.0]));
    }

    #[test]
    fn alternating_projections_epigraph_gap_is_vertical() {
        let u = ProjectableSet::horizontal_line(0.0);
        let epi = ProjectableSet::epigraph_exp(1.0).unwrap();
        let g = alternating_projections(&u, &epi, 100_000, AP_TOL).unwrap();
        assert!(g.gap[0].abs() <= 1e-12);
        assert!((g.gap[1] - 1.0).abs() <= 1e-4);
        assert!(!g.attained);
    }

    #[test]
    fn alternating_projections_rejects_mismatched_sets() {
        let err = alternating_projections(&ball(&[0.0, 0.0], 1.0), &ball(&[0.0, 0.0, 0.0], 1.0), 10, AP_TOL);
        assert!(err.is_err());
    }

    #[test]
    fn rotator_closed_forms() {
        let (f, b) = rotator_closed_form(&v(&[1.0, 0.0]), &v(&[0.0, 0.0])).unwrap();
        assert!(f.dist(&v(&[0.5, -0.5])) <= 1e-15);
        assert!(b.dist(&v(&[0.5, 0.5])) <= 1e-15);
        assert!(crate::vecspace::dot(&f, &b).unwrap().abs() <= 1e-15);
        let (f, b) = rotator_closed_form(&v(&[0.3, 0.7]), &v(&[0.3, 0.7])).unwrap();
        assert_eq!((f.norm(), b.norm()), (0.0, 0.0));
        let (f, _) = rotator_closed_form(&v(&[0.0, 2.0]), &v(&[0.0, 0.0])).unwrap();
        assert!(f.dist(&v(&[1.0, 1.0])) <= 1e-15);
    }

    #[test]
    fn constants_closed_forms() {
        assert_eq!(constants_closed_form(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), v(&[4.0, 6.0]));
        assert_eq!(constants_closed_form(&v(&[1.0, 2.0]), &v(&[-1.0, -2.0])).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(constants_closed_form(&v(&[1.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn least_squares_examples() {
        let m = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let (w, x) = least_squares_oracle(&m, &v(&[1.0, 1.0])).unwrap();
        assert!(w.dist(&v(&[0.0, -1.0])) <= 1e-12);
        assert!((x[0] - 1.0).abs() <= 1e-12);

        let (w, x) = least_squares_oracle(&Matrix::identity(2), &v(&[0.4, -2.0])).unwrap();
        assert!(w.norm() <= 1e-12 && x.dist(&v(&[0.4, -2.0])) <= 1e-12);

        let (w, x) = least_squares_oracle(&Matrix::zeros(2, 2), &v(&[1.0, 0.0])).unwrap();
        assert!(w.dist(&v(&[-1.0, 0.0])) <= 1e-12 && x.norm() == 0.0);
    }

    #[test]
    fn qp_oracle_agrees_with_closed_forms() {
        let zero = Matrix::zeros(2, 2);
        let (a, b) = (v(&[1.0, 2.0]), v(&[3.0, 4.0]));
        let (w, _) = affine_qp_oracle(&zero, &a, &zero, &b).unwrap();
        assert!(w.dist(&constants_closed_form(&a, &b).unwrap()) <= 1e-9);

        let l = rotator();
        for (astar, bstar) in [(v(&[1.0, 0.0]), v(&[0.0, 0.0])), (v(&[0.0, 2.0]), v(&[0.5, -1.0]))] {
            let (w, _) = affine_qp_oracle(&l, &astar, &l.scale(-1.0), &-&bstar).unwrap();
            let (expected, swapped) = rotator_closed_form(&astar, &bstar).unwrap();
            assert!(w.dist(&expected) <= 1e-9);
            let (w, _) = affine_qp_oracle(&l.scale(-1.0), &-&bstar, &l, &astar).unwrap();
            assert!(w.dist(&swapped) <= 1e-9);
        }

        let id = Matrix::identity(2);
        let (w, x) = affine_qp_oracle(&id, &v(&[0.0, 0.0]), &id, &v(&[0.0, 0.0])).unwrap();
        assert!(w.norm() <= 1e-15 && x.norm() <= 1e-15);
    }

    #[test]
    fn qp_oracle_satisfies_its_constraint() {
        let l = Matrix::new(3, 3, vec![1.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let m = Matrix::new(3, 3, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let (a, b) = (v(&[1.0, -1.0, 2.0]), v(&[0.5, 0.0, 1.0]));
        let (w, x) = affine_qp_oracle(&l, &a, &m, &b).unwrap();
        let lhs = Matrix::identity(3).add(&l).unwrap().matvec(&w).unwrap() - l.add(&m).unwrap().matvec(&x).unwrap();
        assert!(lhs.dist(&(&a + &b)) <= 1e-12);
        assert!(w.norm() > 0.5);
    }
}
