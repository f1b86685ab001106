//! Attouch–Théra duality: the dual pair `(A^{−⊻}, B⁻¹)`, primal–dual
//! solution pairs with their membership certificates, and the bijection
//! `Ψ_w : (z, k) ↦ z + k + w` onto the fixed points of `x ↦ T x + w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{membership_residual, resolvent, TOL_CERT};
use crate::splitting::{dr_apply, OperatorPair};
use crate::vecspace::Vector;

/// Outcome of the two membership checks `k + w ∈ B z` and `−k ∈ A(z − w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub b_residual: f64,
    pub b_passed: bool,
    pub a_residual: f64,
    pub a_passed: bool,
}

impl Certificates {
    pub fn passed(&self) -> bool {
        self.a_passed && self.b_passed
    }
}

/// A candidate primal solution `z` and dual solution `k` of the
/// `w`-perturbed problem. Fields are public so callers may assemble pairs by
/// hand; [`PrimalDualPair::validate`] re-runs the certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualPair {
    pub z: Vector,
    pub k: Vector,
    pub w: Vector,
}

impl PrimalDualPair {
    pub fn validate(&self, pair: &OperatorPair) -> Result<Certificates> {
        self.z.check_dim(pair.dim)?;
        self.k.check_dim(pair.dim)?;
        self.w.check_dim(pair.dim)?;
        let tol_b = TOL_CERT * (1.0 + self.z.norm());
        let za = &self.z - &self.w;
        let tol_a = TOL_CERT * (1.0 + za.norm());
        let b_residual = membership_residual(&pair.b, &self.z, &(&self.k + &self.w))?;
        let a_residual = membership_residual(&pair.a, &za, &-&self.k)?;
        Ok(Certificates {
            b_residual,
            b_passed: b_residual <= tol_b,
            a_residual,
            a_passed: a_residual <= tol_a,
        })
    }

    /// The matching solution pair of the dual problem: `(k + w, z − w)`.
    /// Certified against [`dual_pair`] exactly when `self` is certified
    /// against the primal pair.
    pub fn dual(&self) -> PrimalDualPair {
        PrimalDualPair { z: &self.k + &self.w, k: &self.z - &self.w, w: self.w.clone() }
    }
}

/// `(A, B)* = (A^{−⊻}, B⁻¹)`
pub fn dual_pair(pair: &OperatorPair) -> OperatorPair {
    OperatorPair { a: pair.a.clone().inverse_flip(), b: pair.b.clone().inverse(), dim: pair.dim }
}

/// `Ψ_w(z, k) = z + k + w`
pub fn psi(zk: &PrimalDualPair) -> Vector {
    &zk.z + &zk.k + &zk.w
}

/// Default acceptance for an approximate fixed point of `x ↦ T x + w`:
/// the solver tolerance plus rounding proportional to `‖x‖`.
pub fn psi_inv_tolerance(tol_fix: f64, x: &Vector) -> f64 {
    tol_fix + 1e-12 * (1.0 + x.norm())
}

/// `Ψ_w⁻¹(x) = (J_B x, x − J_B x − w)` for `x = T x + w`, with the default
/// fixed-point tolerance.
pub fn psi_inv(pair: &OperatorPair, x: &Vector, w: &Vector) -> Result<PrimalDualPair> {
    psi_inv_with_tolerance(pair, x, w, psi_inv_tolerance(1e-9, x))
}

/// As [`psi_inv`], rejecting `x` when `‖x − T x − w‖ > tol` or when the
/// resulting pair fails its certificates.
pub fn psi_inv_with_tolerance(pair: &OperatorPair, x: &Vector, w: &Vector, tol: f64) -> Result<PrimalDualPair> {
    x.check_dim(pair.dim)?;
    w.check_dim(pair.dim)?;
    let residual = (dr_apply(pair, x)? + w).dist(x);
    if residual > tol {
        return Err(Error::Precondition(format!(
            "x is not a fixed point of x ↦ Tx + w: residual {residual:e} exceeds {tol:e}"
        )));
    }
    let z = resolvent(&pair.b, x)?;
    let k = x - &z - w;
    let zk = PrimalDualPair { z, k, w: w.clone() };
    let certs = zk.validate(pair)?;
    if !certs.passed() {
        return Err(Error::Precondition(format!(
            "certificates failed: B residual {:e}, A residual {:e}",
            certs.b_residual, certs.a_residual
        )));
    }
    Ok(zk)
}

/// Largest `‖T x − T* x‖` over `points`, where `T*` is the DR operator of the
/// dual pair.
pub fn self_duality_deviation(pair: &OperatorPair, points: &[Vector]) -> Result<f64> {
    let dual = dual_pair(pair);
    points.iter().try_fold(0.0f64, |acc, x| Ok(acc.max(dr_apply(pair, x)?.dist(&dr_apply(&dual, x)?))))
}
