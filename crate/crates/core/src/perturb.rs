//! Shift operators and inner/outer perturbations.
//!
//! With the shift `S_w: x ↦ x − w`, the inner perturbation of `A` is
//! `A∘S_w: x ↦ A(x − w)` and the outer perturbation is `S_w∘A: x ↦ Ax − w`.
//! Both are plain [`OperatorSpec`] rewrites; identities between composites are
//! checked by comparing resolvents, which are total and single-valued.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OperatorSpec;
use crate::vecspace::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftDirection {
    Inner,
    Outer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub w: Vector,
    pub direction: ShiftDirection,
}

impl ShiftSpec {
    pub fn inner(w: Vector) -> Self {
        ShiftSpec { w, direction: ShiftDirection::Inner }
    }

    pub fn outer(w: Vector) -> Self {
        ShiftSpec { w, direction: ShiftDirection::Outer }
    }

    pub fn apply(&self, op: OperatorSpec) -> Result<OperatorSpec> {
        match self.direction {
            ShiftDirection::Inner => inner_perturb(op, &self.w),
            ShiftDirection::Outer => outer_perturb(op, &self.w),
        }
    }
}

fn check_against(op: &OperatorSpec, w: &Vector) -> Result<()> {
    match op.dim() {
        Some(d) => w.check_dim(d),
        None => Ok(()),
    }
}

/// `x ↦ A(x − w)`; resolvent `x ↦ J_A(x − w) + w`.
pub fn inner_perturb(op: OperatorSpec, w: &Vector) -> Result<OperatorSpec> {
    check_against(&op, w)?;
    Ok(op.inner_shift(w.clone()))
}

/// `x ↦ Ax − w`; resolvent `x ↦ J_A(x + w)`.
pub fn outer_perturb(op: OperatorSpec, w: &Vector) -> Result<OperatorSpec> {
    check_against(&op, w)?;
    Ok(op.outer_shift(w.clone()))
}

/// Left- and right-hand sides of the six perturbation identities:
///
/// 1. `(⟨w⟩A)⁻¹ = (A⁻¹)⟨−w⟩`
/// 2. `(A⟨w⟩)⁻¹ = ⟨−w⟩(A⁻¹)`
/// 3. `(⟨w⟩A)^⊻ = ⟨−w⟩(A^⊻)`
/// 4. `(A⟨w⟩)^⊻ = (A^⊻)⟨−w⟩`
/// 5. `(⟨w⟩A)^{−⊻} = (A^{−⊻})⟨w⟩`
/// 6. `(A⟨w⟩)^{−⊻} = ⟨w⟩(A^{−⊻})`
///
/// where `⟨w⟩A` is the inner and `A⟨w⟩` the outer perturbation.
pub fn calculus_identity_pair(index: usize, op: &OperatorSpec, w: &Vector) -> Result<(OperatorSpec, OperatorSpec)> {
    check_against(op, w)?;
    let a = || op.clone();
    let neg = -w;
    let pair = match index {
        1 => (a().inner_shift(w.clone()).inverse(), a().inverse().outer_shift(neg)),
        2 => (a().outer_shift(w.clone()).inverse(), a().inverse().inner_shift(neg)),
        3 => (a().inner_shift(w.clone()).flip(), a().flip().inner_shift(neg)),
        4 => (a().outer_shift(w.clone()).flip(), a().flip().outer_shift(neg)),
        5 => (a().inner_shift(w.clone()).inverse_flip(), a().inverse_flip().outer_shift(w.clone())),
        6 => (a().outer_shift(w.clone()).inverse_flip(), a().inverse_flip().inner_shift(w.clone())),
        _ => return Err(Error::Precondition(format!("identity index must be in 1..=6, got {index}"))),
    };
    Ok(pair)
}

/// Attouch–Théra dual of the perturbed pair `(⟨w⟩A, B⟨w⟩)`, written directly
/// as `(A^{−⊻}⟨w⟩, ⟨−w⟩B⁻¹)`.
pub fn dual_of_perturbed(pair: (&OperatorSpec, &OperatorSpec), w: &Vector) -> Result<(OperatorSpec, OperatorSpec)> {
    let (a, b) = pair;
    check_against(a, w)?;
    check_against(b, w)?;
    Ok((a.clone().inverse_flip().outer_shift(w.clone()), b.clone().inverse().inner_shift(-w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{affine_form, resolvent, rotator, ProjectableSet};
    use crate::vecspace::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn agree(a: &OperatorSpec, b: &OperatorSpec, x: &Vector, tol: f64) -> bool {
        resolvent(a, x).unwrap().dist(&resolvent(b, x).unwrap()) <= tol
    }

    fn family() -> Vec<OperatorSpec> {
        vec![
            OperatorSpec::Zero,
            OperatorSpec::constant(v(&[1.0, -2.0])),
            OperatorSpec::normal_cone(ProjectableSet::ball(v(&[1.0, 1.0]), 0.5).unwrap()),
            OperatorSpec::normal_cone(ProjectableSet::horizontal_line(1.0)),
            OperatorSpec::normal_cone(ProjectableSet::halfspace(v(&[1.0, 2.0]), 0.5).unwrap()),
            OperatorSpec::normal_cone(ProjectableSet::boxed(v(&[-1.0, 0.0]), v(&[0.0, 2.0])).unwrap()),
            OperatorSpec::normal_cone(ProjectableSet::epigraph_exp(1.0).unwrap()),
            OperatorSpec::affine(rotator(), v(&[0.5, 0.0])).unwrap(),
            OperatorSpec::affine(Matrix::new(2, 2, vec![2.0, 1.0, -1.0, 0.5]).unwrap(), v(&[-1.0, 1.0])).unwrap(),
        ]
    }

    fn samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector> {
        (0..n).map(|_| v(&[rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])).collect()
    }

    #[test]
    fn inner_perturb_examples() {
        let w = v(&[0.3, -1.2]);
        let x = v(&[2.0, 5.0]);
        let z = inner_perturb(OperatorSpec::Zero, &w).unwrap();
        assert_eq!(resolvent(&z, &x).unwrap(), x);
        let ball = ProjectableSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let n = inner_perturb(OperatorSpec::normal_cone(ball.clone()), &w).unwrap();
        let expected = crate::operators::project(&ball, &(&x - &w)).unwrap() + &w;
        assert!(resolvent(&n, &x).unwrap().dist(&expected) <= 1e-15);
        let a = v(&[1.0, 1.0]);
        let c = inner_perturb(OperatorSpec::constant(a.clone()), &w).unwrap();
        assert!(resolvent(&c, &x).unwrap().dist(&(&x - &a)) <= 1e-15);
    }

    #[test]
    fn outer_perturb_examples() {
        let w = v(&[0.3, -1.2]);
        let x = v(&[2.0, 5.0]);
        let z = outer_perturb(OperatorSpec::Zero, &w).unwrap();
        assert_eq!(resolvent(&z, &x).unwrap(), &x + &w);
        let a = v(&[1.0, 1.0]);
        let c = outer_perturb(OperatorSpec::constant(a.clone()), &w).unwrap();
        assert!(resolvent(&c, &x).unwrap().dist(&(&x - &a + &w)) <= 1e-15);
        let op = OperatorSpec::normal_cone(ProjectableSet::epigraph_exp(0.5).unwrap());
        let same = outer_perturb(op.clone(), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(resolvent(&same, &x).unwrap(), resolvent(&op, &x).unwrap());
    }

    #[test]
    fn shift_spec_dispatch_and_dimension_check() {
        let w = v(&[1.0, 2.0]);
        let inner = ShiftSpec::inner(w.clone()).apply(OperatorSpec::Zero).unwrap();
        assert!(matches!(inner, OperatorSpec::InnerShift { .. }));
        let outer = ShiftSpec::outer(w).apply(OperatorSpec::Zero).unwrap();
        assert!(matches!(outer, OperatorSpec::OuterShift { .. }));
        let c3 = OperatorSpec::constant(v(&[1.0, 2.0, 3.0]));
        assert!(inner_perturb(c3, &v(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn identity_examples() {
        let zero_w = v(&[0.0, 0.0]);
        let x = v(&[1.5, -0.5]);
        for op in family() {
            let (l, r) = calculus_identity_pair(1, &op, &zero_w).unwrap();
            let inv = op.clone().inverse();
            assert!(agree(&l, &inv, &x, 1e-12) && agree(&r, &inv, &x, 1e-12));
        }
        let a = OperatorSpec::constant(v(&[2.0, -1.0]));
        let w = v(&[0.7, 0.1]);
        let (l, r) = calculus_identity_pair(5, &a, &w).unwrap();
        for x in [v(&[0.0, 0.0]), v(&[3.0, -2.0]), v(&[-1.0, 4.0])] {
            assert!(agree(&l, &r, &x, 1e-10));
        }
        let (l, r) = calculus_identity_pair(3, &OperatorSpec::Zero, &w).unwrap();
        assert!(resolvent(&l, &x).unwrap().dist(&x) <= 1e-15);
        assert!(resolvent(&r, &x).unwrap().dist(&x) <= 1e-15);
        assert!(calculus_identity_pair(0, &a, &w).is_err());
        assert!(calculus_identity_pair(7, &a, &w).is_err());
    }

    #[test]
    fn all_six_identities_hold_on_every_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for op in family() {
            for index in 1..=6 {
                let w = v(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
                let (l, r) = calculus_identity_pair(index, &op, &w).unwrap();
                for x in samples(&mut rng, 50) {
                    assert!(agree(&l, &r, &x, 1e-9), "identity {index} failed for {op:?} at {x:?}");
                }
            }
        }
    }

    #[test]
    fn dual_of_perturbed_examples() {
        let a = OperatorSpec::normal_cone(ProjectableSet::ball(v(&[0.0, 0.0]), 1.0).unwrap());
        let b = OperatorSpec::affine(rotator(), v(&[1.0, 0.0])).unwrap();
        let x = v(&[0.4, 2.0]);

        // w = 0 gives the plain dual pair.
        let (da, db) = dual_of_perturbed((&a, &b), &v(&[0.0, 0.0])).unwrap();
        assert!(agree(&da, &a.clone().inverse_flip(), &x, 1e-14));
        assert!(agree(&db, &b.clone().inverse(), &x, 1e-14));

        // Constant pair against a hand expansion:
        // A⁻¹ = N_{{a}}, so J_{A^{−⊻}⟨w⟩}(x) = −a and J_{⟨−w⟩B⁻¹}(x) = b − w.
        let ca = v(&[1.0, 2.0]);
        let cb = v(&[3.0, 4.0]);
        let w = v(&[1.0, 0.0]);
        let (da, db) =
            dual_of_perturbed((&OperatorSpec::constant(ca.clone()), &OperatorSpec::constant(cb.clone())), &w).unwrap();
        assert!(resolvent(&da, &x).unwrap().dist(&-&ca) <= 1e-10);
        assert!(resolvent(&db, &x).unwrap().dist(&(&cb - &w)) <= 1e-10);
    }

    #[test]
    fn dual_of_perturbed_round_trip() {
        let a = OperatorSpec::normal_cone(ProjectableSet::ball(v(&[0.0, 1.0]), 1.0).unwrap());
        let b = OperatorSpec::affine(Matrix::new(2, 2, vec![1.0, 1.0, -1.0, 0.0]).unwrap(), v(&[0.0, -1.0])).unwrap();
        let w = v(&[0.5, -1.5]);
        // dual ∘ dual_of_perturbed(·, w) is the w-perturbation; perturbing by
        // −w undoes it.
        let (p, q) = dual_of_perturbed((&a, &b), &w).unwrap();
        let (p, q) = (p.inverse_flip(), q.inverse());
        let (r, s) = dual_of_perturbed((&p, &q), &-&w).unwrap();
        let (r, s) = (r.inverse_flip(), s.inverse());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for x in samples(&mut rng, 50) {
            assert!(agree(&r, &a, &x, 1e-10));
            assert!(agree(&s, &b, &x, 1e-10));
        }
    }

    #[test]
    fn inner_shift_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for op in family() {
            let w = v(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            let back = inner_perturb(inner_perturb(op.clone(), &w).unwrap(), &-&w).unwrap();
            for x in samples(&mut rng, 20) {
                let a = resolvent(&op, &x).unwrap();
                assert!(a.dist(&resolvent(&back, &x).unwrap()) <= 1e-12 * (1.0 + a.norm() + x.norm()));
            }
        }
    }

    #[test]
    fn perturb_then_dualize_matches_dualize_then_perturb_up_to_shift() {
        // (⟨w⟩A^{−⊻} + B⁻¹⟨w⟩)(x) = (A^{−⊻}⟨w⟩ + ⟨−w⟩B⁻¹)(x − w), evaluated on
        // affine operators whose inverses are single-valued.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = OperatorSpec::affine(Matrix::new(2, 2, vec![2.0, 1.0, -1.0, 1.0]).unwrap(), v(&[1.0, -1.0])).unwrap();
        let b = OperatorSpec::affine(Matrix::new(2, 2, vec![1.0, -3.0, 3.0, 0.5]).unwrap(), v(&[0.0, 2.0])).unwrap();
        let w = v(&[0.75, -0.25]);
        let left = [
            a.clone().inverse_flip().inner_shift(w.clone()),
            b.clone().inverse().outer_shift(w.clone()),
        ];
        let (ra, rb) = dual_of_perturbed((&a, &b), &w).unwrap();
        let eval = |op: &OperatorSpec, x: &Vector| {
            let (m, c) = affine_form(op, 2).expect("single-valued");
            m.matvec(x).unwrap() + c
        };
        for x in samples(&mut rng, 50) {
            let lhs = eval(&left[0], &x) + eval(&left[1], &x);
            let y = &x - &w;
            let rhs = eval(&ra, &y) + eval(&rb, &y);
            assert!(lhs.dist(&rhs) <= 1e-9, "{lhs:?} vs {rhs:?}");
        }
    }
}
