//! The Douglas–Rachford operator `T = J_A R_B + Id − J_B`, its shifted
//! variants, estimation of the infimal displacement vector, and the two-phase
//! normal-problem solver.
//!
//! Shift convention: the DR operator of the `w`-perturbed pair
//! `(A(· − w), B(·) − w)` is evaluated as `x ↦ T(x + w)`. A governing point
//! `x̂ = T(x̂ + w)` yields the normal solution `z = J_B(x̂ + w)` and the dual
//! solution `k = x̂ − z`, certified by `k + w ∈ Bz` and `−k ∈ A(z − w)`.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::duality::{Certificates, PrimalDualPair};
use crate::error::{Error, Result};
use crate::operators::{membership, reflected_resolvent, resolvent, OperatorSpec};
use crate::vecspace::Vector;

/// Iterate norm beyond which a fixed-point search is declared divergent.
pub const R_MAX: f64 = 1e8;

/// Last-doubling travel must stay above this fraction of the previous
/// doubling's travel to count as persistent drift.
const DRIFT_RATIO: f64 = 0.7;
/// Displacement counts as a plateau when it shrinks by less than this factor
/// over the last doubling of the iteration count.
const PLATEAU_RATIO: f64 = 0.9;
/// Smallest iteration count whose checkpoints are used as divergence evidence.
const MIN_EVIDENCE_ITER: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol_v: f64,
    pub tol_fix: f64,
    /// Window length `k` of the v-estimate stopping test.
    pub window: usize,
    pub r_max: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iter: 200_000, tol_v: 1e-8, tol_fix: 1e-9, window: 50, r_max: R_MAX }
    }
}

/// Tolerance on `|‖v(A,B)‖ − ‖v(B,A)‖|`.
pub const TOL_SYM: f64 = 1e-5;

/// Ordered pair `(A, B)` of operators on `R^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorPair {
    #[serde(rename = "A")]
    pub a: OperatorSpec,
    #[serde(rename = "B")]
    pub b: OperatorSpec,
    pub dim: usize,
}

impl OperatorPair {
    pub fn new(a: OperatorSpec, b: OperatorSpec, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        a.check_dim(dim)?;
        b.check_dim(dim)?;
        Ok(OperatorPair { a, b, dim })
    }

    /// Builds a pair, taking the dimension from whichever operator fixes it.
    pub fn infer(a: OperatorSpec, b: OperatorSpec) -> Result<Self> {
        let dim = a
            .dim()
            .or(b.dim())
            .ok_or_else(|| Error::Precondition("neither operator fixes the ambient dimension".into()))?;
        Self::new(a, b, dim)
    }

    /// `(B, A)`
    pub fn swapped(&self) -> Self {
        OperatorPair { a: self.b.clone(), b: self.a.clone(), dim: self.dim }
    }

    pub fn zero_vector(&self) -> Vector {
        Vector::zeros(self.dim)
    }
}

/// One application of `T`, returning `(T y, J_B y)`.
fn dr_eval(pair: &OperatorPair, y: &Vector) -> Result<(Vector, Vector)> {
    y.check_dim(pair.dim)?;
    let jb = resolvent(&pair.b, y)?;
    let rb = jb.scale(2.0) - y;
    let ty = resolvent(&pair.a, &rb)? + y - &jb;
    Ok((ty, jb))
}

/// `T x = J_A R_B x + x − J_B x`.
pub fn dr_apply(pair: &OperatorPair, x: &Vector) -> Result<Vector> {
    Ok(dr_eval(pair, x)?.0)
}

/// `½ (x + R_A R_B x)`; equal to [`dr_apply`], computed along a separate route.
pub fn dr_apply_averaged(pair: &OperatorPair, x: &Vector) -> Result<Vector> {
    x.check_dim(pair.dim)?;
    let r = reflected_resolvent(&pair.a, &reflected_resolvent(&pair.b, x)?)?;
    Ok((x + &r).scale(0.5))
}

/// DR operator of the `w`-perturbed pair: `x ↦ T(x + w)`.
pub fn dr_map_shifted(pair: &OperatorPair, w: &Vector, x: &Vector) -> Result<Vector> {
    w.check_dim(pair.dim)?;
    x.check_dim(pair.dim)?;
    dr_apply(pair, &(x + w))
}

/// `T_{(A⁻¹, B)} x`, which equals `x − T x`.
pub fn complement_is_dr(pair: &OperatorPair, x: &Vector) -> Result<Vector> {
    let inv = OperatorPair { a: pair.a.clone().inverse(), b: pair.b.clone(), dim: pair.dim };
    dr_apply(&inv, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TracePhase {
    /// Plain iteration of `T` to estimate the displacement vector.
    Displacement,
    /// Iteration of the shifted map `x ↦ T(x + w)`.
    FixedPoint,
}

impl TracePhase {
    fn label(self) -> &'static str {
        match self {
            TracePhase::Displacement => "displacement",
            TracePhase::FixedPoint => "fixed_point",
        }
    }
}

/// Record of the `n`-th application of the iterated map `S`.
///
/// `x` is `xₙ = S xₙ₋₁`, `shadow` is `J_B` of the argument handed to `T` in
/// that application, `displacement` and `v_diff` are both `xₙ₋₁ − xₙ`, and
/// `v_cesaro` is `−(xₙ − x₀)/n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub phase: TracePhase,
    pub n: usize,
    pub x: Vector,
    pub shadow: Vector,
    pub displacement: Vector,
    pub v_diff: Vector,
    pub v_cesaro: Vector,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn extend(&mut self, other: IterationTrace) {
        self.steps.extend(other.steps);
    }

    /// True when `‖v_diff‖` never increases by more than `slack` plus a
    /// rounding allowance proportional to the iterate size.
    pub fn v_diff_monotone(&self, slack: f64) -> bool {
        self.steps.windows(2).all(|w| {
            w[0].phase != w[1].phase || {
                let allowance = slack + 8.0 * f64::EPSILON * (w[0].x.norm() + w[1].x.norm());
                w[1].v_diff.norm() <= w[0].v_diff.norm() + allowance
            }
        })
    }

    /// Writes `phase, n, x_*, shadow_*, displacement_norm, v_diff_norm,
    /// v_cesaro_norm`, one row per step. An empty trace has no coordinate
    /// columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.steps.first().map_or(0, |s| s.x.dim());
        let mut header = vec!["phase".to_string(), "n".to_string()];
        header.extend((0..dim).map(|i| format!("x_{i}")));
        header.extend((0..dim).map(|i| format!("shadow_{i}")));
        header.extend(["displacement_norm", "v_diff_norm", "v_cesaro_norm"].map(String::from));
        w.write_record(&header)?;
        for s in &self.steps {
            let mut row = vec![s.phase.label().to_string(), s.n.to_string()];
            row.extend(s.x.iter().map(|v| format!("{v:e}")));
            row.extend(s.shadow.iter().map(|v| format!("{v:e}")));
            row.extend([s.displacement.norm(), s.v_diff.norm(), s.v_cesaro.norm()].map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of iterating `T` to estimate `v(A, B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementEstimate {
    /// Difference estimator `Tⁿx − Tⁿ⁺¹x` at the final step.
    pub v: Vector,
    /// Cesàro estimator `−(Tⁿx − x)/n` at the final step.
    pub v_cesaro: Vector,
    /// `‖v − v_cesaro‖`
    pub v_residual: f64,
    pub iterations: usize,
    /// Whether the windowed stopping test fired before `max_iter`.
    pub converged: bool,
    pub trace: IterationTrace,
}

/// Iterates `xₙ₊₁ = T xₙ` until the difference estimator changes by at most
/// `tol_v` over `window` steps, or `max_iter` is reached.
pub fn estimate_v(pair: &OperatorPair, x0: &Vector, opts: &SolverOptions) -> Result<DisplacementEstimate> {
    estimate_v_inner(pair, x0, opts, false)
}

pub fn estimate_v_traced(pair: &OperatorPair, x0: &Vector, opts: &SolverOptions) -> Result<DisplacementEstimate> {
    estimate_v_inner(pair, x0, opts, true)
}

fn estimate_v_inner(pair: &OperatorPair, x0: &Vector, opts: &SolverOptions, record: bool) -> Result<DisplacementEstimate> {
    x0.check_dim(pair.dim)?;
    if opts.max_iter == 0 {
        return Err(Error::Precondition("max_iter must be at least 1".into()));
    }
    let window = opts.window.max(1);
    let mut history: VecDeque<Vector> = VecDeque::with_capacity(window + 1);
    let mut trace = IterationTrace::default();
    let mut x = x0.clone();
    let mut v = pair.zero_vector();
    let mut converged = false;
    let mut n = 0;

    while n < opts.max_iter {
        n += 1;
        let (tx, shadow) = dr_eval(pair, &x)?;
        v = &x - &tx;
        x = tx;
        if record {
            trace.steps.push(TraceStep {
                phase: TracePhase::Displacement,
                n,
                x: x.clone(),
                shadow,
                displacement: v.clone(),
                v_diff: v.clone(),
                v_cesaro: cesaro(&x, x0, n),
            });
        }
        history.push_back(v.clone());
        if history.len() > window + 1 {
            history.pop_front();
        }
        if history.len() == window + 1 && history[0].dist(&v) <= opts.tol_v {
            converged = true;
            break;
        }
    }

    let v_cesaro = cesaro(&x, x0, n);
    Ok(DisplacementEstimate {
        v_residual: v.dist(&v_cesaro),
        v,
        v_cesaro,
        iterations: n,
        converged,
        trace,
    })
}

fn cesaro(x: &Vector, x0: &Vector, n: usize) -> Vector {
    (x0 - x).scale(1.0 / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    NoFixedPointDetected,
    MaxIter,
}

/// Result of a perturbed or normal solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Perturbation `w` in force during the fixed-point phase.
    pub perturbation: Vector,
    /// Estimate of `v(A, B)`; present for normal solves.
    pub v_estimate: Option<Vector>,
    /// Disagreement between the difference and Cesàro estimators.
    pub v_residual: Option<f64>,
    pub normal_solution: Option<Vector>,
    pub governing_point: Option<Vector>,
    pub dual_solution: Option<Vector>,
    pub certificates: Option<Certificates>,
    /// `‖x − T(x + w)‖` at the last iterate examined.
    pub fixed_point_residual: f64,
    /// Iterations spent estimating `v` (zero for perturbed solves).
    pub v_iterations: usize,
    /// Total iterations across both phases.
    pub iterations_used: usize,
}

/// Finds `x̂ = T(x̂ + w)` and extracts the primal–dual pair of the
/// `w`-perturbed problem.
pub fn solve_perturbed(pair: &OperatorPair, w: &Vector, x0: &Vector, opts: &SolverOptions) -> Result<SolveReport> {
    Ok(solve_perturbed_inner(pair, w, x0, opts, false)?.0)
}

pub fn solve_perturbed_traced(
    pair: &OperatorPair,
    w: &Vector,
    x0: &Vector,
    opts: &SolverOptions,
) -> Result<(SolveReport, IterationTrace)> {
    solve_perturbed_inner(pair, w, x0, opts, true)
}

struct Checkpoint {
    x: Vector,
    displacement: f64,
}

fn solve_perturbed_inner(
    pair: &OperatorPair,
    w: &Vector,
    x0: &Vector,
    opts: &SolverOptions,
    record: bool,
) -> Result<(SolveReport, IterationTrace)> {
    w.check_dim(pair.dim)?;
    x0.check_dim(pair.dim)?;
    let mut trace = IterationTrace::default();
    // Iterates at n = 2^k, used as divergence evidence.
    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    let mut x = x0.clone();
    let mut residual;
    let mut status = SolveStatus::MaxIter;
    let mut solution: Option<(PrimalDualPair, Certificates)> = None;
    let mut n = 0;

    loop {
        let y = &x + w;
        let (sx, shadow) = dr_eval(pair, &y)?;
        let d = &x - &sx;
        residual = d.norm();

        if residual <= opts.tol_fix {
            let zk = PrimalDualPair { k: &x - &shadow, z: shadow.clone(), w: w.clone() };
            let certs = zk.validate(pair)?;
            if certs.passed() {
                status = SolveStatus::Converged;
                solution = Some((zk, certs));
                break;
            }
        }
        if n >= opts.max_iter {
            break;
        }

        n += 1;
        x = sx;
        if record {
            trace.steps.push(TraceStep {
                phase: TracePhase::FixedPoint,
                n,
                x: x.clone(),
                shadow,
                displacement: d.clone(),
                v_diff: d,
                v_cesaro: cesaro(&x, x0, n),
            });
        }
        if x.norm() > opts.r_max || !x.is_finite() {
            status = SolveStatus::NoFixedPointDetected;
            break;
        }
        if n.is_power_of_two() {
            checkpoints.push(Checkpoint { x: x.clone(), displacement: residual });
        }
    }

    if status == SolveStatus::MaxIter && divergence_evidence(&checkpoints, opts.tol_fix) {
        status = SolveStatus::NoFixedPointDetected;
    }

    let mut report = SolveReport {
        status,
        perturbation: w.clone(),
        v_estimate: None,
        v_residual: None,
        normal_solution: None,
        governing_point: None,
        dual_solution: None,
        certificates: None,
        fixed_point_residual: residual,
        v_iterations: 0,
        iterations_used: n,
    };
    if let Some((zk, certs)) = solution {
        report.governing_point = Some(x);
        report.normal_solution = Some(zk.z);
        report.dual_solution = Some(zk.k);
        report.certificates = Some(certs);
    }
    Ok((report, trace))
}

/// Evidence that the orbit of a firmly nonexpansive map is unbounded: the
/// displacement has stalled away from zero, or the iterate keeps travelling
/// comparable distances over successive doublings of the iteration count.
/// Bounded (convergent) orbits travel geometrically less per doubling.
fn divergence_evidence(checkpoints: &[Checkpoint], tol_fix: f64) -> bool {
    let usable: Vec<&Checkpoint> = checkpoints
        .iter()
        .enumerate()
        .filter(|(k, _)| (1usize << k) >= MIN_EVIDENCE_ITER)
        .map(|(_, c)| c)
        .collect();
    if usable.len() < 3 {
        return false;
    }
    let [c0, c1, c2] = [usable[usable.len() - 3], usable[usable.len() - 2], usable[usable.len() - 1]];
    let plateau = c2.displacement > tol_fix && c2.displacement >= PLATEAU_RATIO * c1.displacement;
    let last = c2.x.dist(&c1.x);
    let previous = c1.x.dist(&c0.x);
    let drift = last > tol_fix.sqrt() && last >= DRIFT_RATIO * previous;
    plateau || drift
}

/// Two-phase normal solve: estimate `v(A, B)`, then solve the
/// `v`-perturbed problem.
pub fn solve_normal(pair: &OperatorPair, x0: &Vector, opts: &SolverOptions) -> Result<SolveReport> {
    Ok(solve_normal_inner(pair, x0, opts, false)?.0)
}

pub fn solve_normal_traced(pair: &OperatorPair, x0: &Vector, opts: &SolverOptions) -> Result<(SolveReport, IterationTrace)> {
    solve_normal_inner(pair, x0, opts, true)
}

fn solve_normal_inner(
    pair: &OperatorPair,
    x0: &Vector,
    opts: &SolverOptions,
    record: bool,
) -> Result<(SolveReport, IterationTrace)> {
    let est = estimate_v_inner(pair, x0, opts, record)?;
    let (mut report, phase2) = solve_perturbed_inner(pair, &est.v, x0, opts, record)?;
    report.v_estimate = Some(est.v);
    report.v_residual = Some(est.v_residual);
    report.v_iterations = est.iterations;
    report.iterations_used += est.iterations;
    let mut trace = est.trace;
    trace.extend(phase2);
    Ok((report, trace))
}

/// `(‖v(A, B)‖, ‖v(B, A)‖)`
pub fn norm_symmetry_check(pair: &OperatorPair, x0: &Vector, opts: &SolverOptions) -> Result<(f64, f64)> {
    let forward = estimate_v(pair, x0, opts)?;
    let backward = estimate_v(&pair.swapped(), x0, opts)?;
    Ok((forward.v.norm(), backward.v.norm()))
}

/// For `z` with `0 ∈ Bz`, returns `w = z − J_A z`, a point of `ran(Id − T)`.
pub fn range_witness(pair: &OperatorPair, z: &Vector) -> Result<Vector> {
    z.check_dim(pair.dim)?;
    if !membership(&pair.b, z, &pair.zero_vector()) {
        return Err(Error::Precondition("0 ∉ Bz: z is not a zero of B".into()));
    }
    Ok(z - resolvent(&pair.a, z)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{rotator, ProjectableSet};
    use crate::vecspace::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn cone(set: ProjectableSet) -> OperatorSpec {
        OperatorSpec::normal_cone(set)
    }

    fn lines() -> OperatorPair {
        OperatorPair::new(
            cone(ProjectableSet::horizontal_line(0.0)),
            cone(ProjectableSet::horizontal_line(1.0)),
            2,
        )
        .unwrap()
    }

    fn balls(c2: f64, r: f64) -> OperatorPair {
        OperatorPair::new(
            cone(ProjectableSet::ball(v(&[0.0, 0.0]), r).unwrap()),
            cone(ProjectableSet::ball(v(&[c2, 0.0]), r).unwrap()),
            2,
        )
        .unwrap()
    }

    fn constants() -> OperatorPair {
        OperatorPair::new(OperatorSpec::constant(v(&[1.0, 2.0])), OperatorSpec::constant(v(&[3.0, 4.0])), 2).unwrap()
    }

    fn random_points(seed: u64, n: usize) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| v(&[rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)])).collect()
    }

    #[test]
    fn pair_dimension_checks() {
        let err = OperatorPair::new(OperatorSpec::constant(v(&[1.0])), OperatorSpec::Zero, 2).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(OperatorPair::infer(OperatorSpec::Zero, OperatorSpec::Zero).is_err());
        assert_eq!(OperatorPair::infer(OperatorSpec::Zero, OperatorSpec::constant(v(&[1.0, 2.0, 3.0]))).unwrap().dim, 3);
    }

    #[test]
    fn dr_apply_examples() {
        let id = OperatorPair::new(OperatorSpec::Zero, OperatorSpec::Zero, 2).unwrap();
        assert_eq!(dr_apply(&id, &v(&[3.0, -1.0])).unwrap(), v(&[3.0, -1.0]));
        for x in random_points(1, 20) {
            let tx = dr_apply(&lines(), &x).unwrap();
            assert!(tx.dist(&v(&[x[0], x[1] - 1.0])) <= 1e-14);
            let avg = dr_apply_averaged(&lines(), &x).unwrap();
            assert!(tx.dist(&avg) <= 1e-12);
        }
    }

    #[test]
    fn dr_map_shifted_examples() {
        let p = lines();
        let x = v(&[0.3, -2.0]);
        assert_eq!(dr_map_shifted(&p, &v(&[0.0, 0.0]), &x).unwrap(), dr_apply(&p, &x).unwrap());
        for x in random_points(2, 20) {
            assert!(dr_map_shifted(&p, &v(&[0.0, 1.0]), &x).unwrap().dist(&x) <= 1e-14);
        }
    }

    #[test]
    fn shifted_map_is_dr_of_perturbed_pair() {
        use crate::perturb::{inner_perturb, outer_perturb};
        let p = OperatorPair::new(
            cone(ProjectableSet::ball(v(&[0.0, 1.0]), 1.5).unwrap()),
            OperatorSpec::affine(Matrix::new(2, 2, vec![1.0, 2.0, -2.0, 0.0]).unwrap(), v(&[1.0, 0.0])).unwrap(),
            2,
        )
        .unwrap();
        let ws = random_points(3, 10);
        for (x, w) in random_points(4, 10).iter().zip(&ws) {
            let perturbed = OperatorPair::new(
                inner_perturb(p.a.clone(), w).unwrap(),
                outer_perturb(p.b.clone(), w).unwrap(),
                2,
            )
            .unwrap();
            let lhs = dr_apply(&perturbed, x).unwrap();
            let rhs = dr_map_shifted(&p, w, x).unwrap();
            assert!(lhs.dist(&rhs) <= 1e-10);
        }
    }

    #[test]
    fn complement_examples() {
        let id = OperatorPair::new(OperatorSpec::Zero, OperatorSpec::Zero, 2).unwrap();
        assert_eq!(complement_is_dr(&id, &v(&[3.0, -1.0])).unwrap(), v(&[0.0, 0.0]));
        for x in random_points(5, 10) {
            assert!(complement_is_dr(&lines(), &x).unwrap().dist(&v(&[0.0, 1.0])) <= 1e-14);
        }
        let p = OperatorPair::new(
            OperatorSpec::affine(Matrix::new(2, 2, vec![2.0, 1.0, -1.0, 1.0]).unwrap(), v(&[0.0, 1.0])).unwrap(),
            OperatorSpec::affine(rotator(), v(&[1.0, 1.0])).unwrap(),
            2,
        )
        .unwrap();
        for x in random_points(6, 10) {
            let lhs = complement_is_dr(&p, &x).unwrap();
            let rhs = &x - dr_apply(&p, &x).unwrap();
            assert!(lhs.dist(&rhs) <= 1e-10);
        }
    }

    #[test]
    fn estimate_v_examples() {
        let opts = SolverOptions::default();
        let x0 = v(&[0.0, 0.0]);
        let est = estimate_v(&balls(3.0, 2.0), &x0, &opts).unwrap();
        assert!(est.converged && est.v.norm() <= 1e-6);

        let est = estimate_v_traced(&lines(), &x0, &opts).unwrap();
        assert_eq!(est.trace.steps[0].v_diff, v(&[0.0, 1.0]));
        assert_eq!(est.v, v(&[0.0, 1.0]));

        let est = estimate_v(&constants(), &x0, &opts).unwrap();
        assert!(est.v.dist(&v(&[4.0, 6.0])) <= 1e-12);
        assert!(est.trace.is_empty());
    }

    #[test]
    fn estimate_v_requires_an_iteration() {
        let opts = SolverOptions { max_iter: 0, ..Default::default() };
        assert!(estimate_v(&lines(), &v(&[0.0, 0.0]), &opts).is_err());
    }

    #[test]
    fn trace_is_displacement_monotone_and_exports_csv() {
        let est = estimate_v_traced(&balls(3.0, 1.0), &v(&[0.5, 2.0]), &SolverOptions::default()).unwrap();
        assert!(est.trace.v_diff_monotone(1e-12));
        let mut buf = Vec::new();
        est.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "phase,n,x_0,x_1,shadow_0,shadow_1,displacement_norm,v_diff_norm,v_cesaro_norm"
        );
        assert!(lines.next().unwrap().starts_with("displacement,1,"));
        assert_eq!(text.lines().count(), est.trace.len() + 1);
    }

    #[test]
    fn solve_perturbed_examples() {
        let opts = SolverOptions::default();
        let x0 = v(&[0.0, 0.0]);

        let r = solve_perturbed(&balls(3.0, 2.0), &x0, &x0, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        let z = r.normal_solution.unwrap();
        assert!(z.norm() <= 2.0 + 1e-9 && z.dist(&v(&[3.0, 0.0])) <= 2.0 + 1e-9);
        assert!(r.certificates.unwrap().passed());

        let r = solve_perturbed(&lines(), &v(&[0.0, 1.0]), &v(&[0.7, -3.0]), &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        let z = r.normal_solution.unwrap();
        assert!((z[1] - 1.0).abs() <= 1e-12);
        assert_eq!(z[0], r.governing_point.unwrap()[0]);

        let r = solve_perturbed(&balls(3.0, 1.0), &v(&[1.0, 0.0]), &x0, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!(r.normal_solution.unwrap().dist(&v(&[2.0, 0.0])) <= 1e-9);
    }

    #[test]
    fn solve_perturbed_detects_runaway_iterates() {
        // w outside ran(Id − T) = {(0, 1)}: the shifted map translates forever.
        let opts = SolverOptions { max_iter: 5_000, ..Default::default() };
        let r = solve_perturbed(&lines(), &v(&[0.0, 0.5]), &v(&[0.0, 0.0]), &opts).unwrap();
        assert_eq!(r.status, SolveStatus::NoFixedPointDetected);
        assert!(r.normal_solution.is_none());
    }

    #[test]
    fn solve_perturbed_reports_max_iter_on_slow_convergence() {
        let opts = SolverOptions { max_iter: 3, ..Default::default() };
        let r = solve_perturbed(&balls(3.0, 1.0), &v(&[1.0, 0.0]), &v(&[40.0, 30.0]), &opts).unwrap();
        assert_eq!(r.status, SolveStatus::MaxIter);
        assert_eq!(r.iterations_used, 3);
    }

    #[test]
    fn solve_normal_examples() {
        let opts = SolverOptions::default();
        let x0 = v(&[0.0, 0.0]);
        let r = solve_normal(&balls(3.0, 1.0), &x0, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!(r.v_estimate.unwrap().dist(&v(&[1.0, 0.0])) <= 1e-6);
        assert!(r.normal_solution.unwrap().dist(&v(&[2.0, 0.0])) <= 1e-6);
        assert!(r.iterations_used >= r.v_iterations);

        let consistent = balls(3.0, 2.0);
        let normal = solve_normal(&consistent, &x0, &opts).unwrap();
        let direct = solve_perturbed(&consistent, &x0, &x0, &opts).unwrap();
        assert_eq!(normal.status, direct.status);
        assert!(normal.normal_solution.unwrap().dist(&direct.normal_solution.unwrap()) <= 1e-6);
    }

    #[test]
    fn norm_symmetry_examples() {
        let opts = SolverOptions::default();
        let x0 = v(&[0.0, 0.0]);
        let (f, b) = norm_symmetry_check(&constants(), &x0, &opts).unwrap();
        assert!((f - 52f64.sqrt()).abs() <= 1e-12 && (b - 52f64.sqrt()).abs() <= 1e-12);
        let (f, b) = norm_symmetry_check(&balls(3.0, 1.0), &x0, &opts).unwrap();
        assert!((f - 1.0).abs() <= 1e-6 && (b - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn range_witness_examples() {
        let p = OperatorPair::new(cone(ProjectableSet::ball(v(&[0.0, 0.0]), 1.0).unwrap()), OperatorSpec::Zero, 2).unwrap();
        let w = range_witness(&p, &v(&[2.0, 0.0])).unwrap();
        assert!(w.dist(&v(&[1.0, 0.0])) <= 1e-15);
        let r = solve_perturbed(&p, &w, &v(&[0.0, 0.0]), &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);

        let q = OperatorPair::new(OperatorSpec::Zero, cone(ProjectableSet::horizontal_line(1.0)), 2).unwrap();
        assert_eq!(range_witness(&q, &v(&[4.0, 1.0])).unwrap(), v(&[0.0, 0.0]));

        let c = OperatorPair::new(
            cone(ProjectableSet::ball(v(&[0.0, 0.0]), 1.0).unwrap()),
            OperatorSpec::constant(v(&[0.0, 0.0])),
            2,
        )
        .unwrap();
        assert!(range_witness(&c, &v(&[2.0, 0.0])).unwrap().dist(&v(&[1.0, 0.0])) <= 1e-15);

        let bad = OperatorPair::new(OperatorSpec::Zero, OperatorSpec::constant(v(&[1.0, 0.0])), 2).unwrap();
        assert!(matches!(range_witness(&bad, &v(&[0.0, 0.0])), Err(Error::Precondition(_))));
    }
}
