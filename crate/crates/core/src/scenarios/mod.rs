//! Worked problem instances with reference answers from [`oracle`], and a
//! runner that compares solver output against them.

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{project, rotator, OperatorSpec, ProjectableSet};
use crate::splitting::{estimate_v, solve_normal, OperatorPair, SolveReport, SolveStatus, SolverOptions};
use crate::vecspace::{symmetric_eigenvalues, Matrix, PivotedQr, Vector};

/// Default seed for generated instances.
pub const DEFAULT_SEED: u64 = 20_240_611;

/// Names accepted by [`by_name`].
pub const REGISTRY: &[&str] = &[
    "balls-overlapping",
    "balls-disjoint",
    "two-lines",
    "epigraph",
    "rotators-default",
    "constants-default",
    "least-squares-default",
    "affine-rotator",
    "random-affine",
];

/// What a normal solution is expected to look like.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionTarget {
    /// Every point is a normal solution.
    Any,
    /// The normal solution is unique.
    Point { point: Vector },
    /// Normal solutions are exactly the solutions of `C z = d`.
    Affine { c: Matrix, d: Vector },
    /// Normal solutions are the points common to all listed sets.
    Intersection { sets: Vec<ProjectableSet> },
    /// The normal problem has no solution.
    Nonexistent,
}

impl SolutionTarget {
    /// Distance-like measure of how far `z` is from satisfying the target.
    pub fn deviation(&self, z: &Vector) -> Result<f64> {
        match self {
            SolutionTarget::Any => Ok(0.0),
            SolutionTarget::Point { point } => {
                z.check_dim(point.dim())?;
                Ok(z.dist(point))
            }
            SolutionTarget::Affine { c, d } => Ok(c.matvec(z)?.dist(d)),
            SolutionTarget::Intersection { sets } => {
                sets.iter().try_fold(0.0f64, |acc, s| Ok(acc.max(project(s, z)?.dist(z))))
            }
            SolutionTarget::Nonexistent => Ok(f64::INFINITY),
        }
    }
}

/// Reference values produced by an oracle, with a note on how they were obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    /// `v(A, B)`
    pub v: Option<Vector>,
    /// `v(B, A)`
    pub v_swapped: Option<Vector>,
    pub solution: SolutionTarget,
    /// A representative normal solution, when the oracle produces one.
    pub representative: Option<Vector>,
    pub oracle: String,
    pub v_tolerance: f64,
    pub solution_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub pair: OperatorPair,
    pub expected: Expected,
}

/// Looks up a registered scenario. `seed` only affects `random-affine`.
pub fn by_name(name: &str, seed: u64) -> Result<Scenario> {
    let v = |x: &[f64]| Vector::new(x.to_vec());
    let mut s = match name {
        "balls-overlapping" => scenario_two_sets(
            ProjectableSet::ball(v(&[0.0, 0.0])?, 2.0)?,
            ProjectableSet::ball(v(&[3.0, 0.0])?, 2.0)?,
        )?,
        "balls-disjoint" => {
            let mut s = scenario_two_sets(
                ProjectableSet::ball(v(&[0.0, 0.0])?, 1.0)?,
                ProjectableSet::ball(v(&[3.0, 0.0])?, 1.0)?,
            )?;
            // For two normal cones the swapped displacement vector is −v(A, B).
            s.expected.v_swapped = s.expected.v.as_ref().map(|g| -g);
            s
        }
        "two-lines" => {
            let mut s = scenario_two_sets(ProjectableSet::horizontal_line(0.0), ProjectableSet::horizontal_line(1.0))?;
            s.expected.v_tolerance = 1e-15;
            s.expected.solution_tolerance = 1e-9;
            s.expected.solution = SolutionTarget::Affine { c: Matrix::from_rows(&[vec![0.0, 1.0]])?, d: v(&[1.0])? };
            s
        }
        "epigraph" => {
            let mut s = scenario_two_sets(ProjectableSet::horizontal_line(0.0), ProjectableSet::epigraph_exp(1.0)?)?;
            s.expected.v_tolerance = 5e-2;
            s
        }
        "rotators-default" => scenario_rotators(v(&[1.0, 0.0])?, v(&[0.0, 0.0])?)?,
        "constants-default" => scenario_constants(v(&[1.0, 2.0])?, v(&[3.0, 4.0])?)?,
        "least-squares-default" => {
            scenario_least_squares(Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 0.0])?, v(&[1.0, 1.0])?)?
        }
        "affine-rotator" => {
            let l = rotator();
            scenario_affine(l.clone(), v(&[1.0, 0.0])?, l.scale(-1.0), v(&[0.0, 0.0])?)?
        }
        "random-affine" => random_affine_scenarios(seed, 1)?.remove(0),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    s.name = name.to_string();
    Ok(s)
}

/// Normal cones of `U` and `V`, with the gap vector and V-side limit from
/// alternating projections.
pub fn scenario_two_sets(u: ProjectableSet, v: ProjectableSet) -> Result<Scenario> {
    let pair = OperatorPair::new(OperatorSpec::normal_cone(u.clone()), OperatorSpec::normal_cone(v.clone()), u.dim())?;
    let ap = oracle::alternating_projections(&u, &v, oracle::AP_BUDGET, oracle::AP_TOL)?;
    let consistent = ap.gap.norm() <= 1e-9;
    let solution = if !ap.attained {
        SolutionTarget::Nonexistent
    } else if consistent {
        SolutionTarget::Intersection { sets: vec![u, v] }
    } else {
        SolutionTarget::Point { point: ap.v_point.clone() }
    };
    Ok(Scenario {
        name: "two-sets".into(),
        pair,
        expected: Expected {
            v: Some(ap.gap),
            v_swapped: None,
            solution,
            representative: ap.attained.then_some(ap.v_point),
            oracle: format!(
                "alternating projections, {} rounds, last V-side step {:e}",
                ap.iterations, ap.last_step
            ),
            v_tolerance: 1e-6,
            solution_tolerance: 1e-6,
        },
    })
}

/// `A = L + a*`, `B = −L − b*` with `L` the planar rotator.
pub fn scenario_rotators(astar: Vector, bstar: Vector) -> Result<Scenario> {
    let (forward, backward) = oracle::rotator_closed_form(&astar, &bstar)?;
    let l = rotator();
    let pair = OperatorPair::new(OperatorSpec::affine(l.clone(), astar)?, OperatorSpec::affine(l.scale(-1.0), -bstar)?, 2)?;
    Ok(Scenario {
        name: "rotators".into(),
        pair,
        expected: Expected {
            v: Some(forward),
            v_swapped: Some(backward),
            solution: SolutionTarget::Any,
            representative: None,
            oracle: "closed form ½(Id − L)(a* − b*), ½(Id + L)(a* − b*)".into(),
            v_tolerance: 1e-7,
            solution_tolerance: 1e-6,
        },
    })
}

/// `A ≡ a*`, `B ≡ b*`.
pub fn scenario_constants(astar: Vector, bstar: Vector) -> Result<Scenario> {
    let v = oracle::constants_closed_form(&astar, &bstar)?;
    let dim = astar.dim();
    let pair = OperatorPair::new(OperatorSpec::constant(astar), OperatorSpec::constant(bstar), dim)?;
    Ok(Scenario {
        name: "constants".into(),
        pair,
        expected: Expected {
            v: Some(v.clone()),
            v_swapped: Some(v),
            solution: SolutionTarget::Any,
            representative: None,
            oracle: "closed form a* + b*".into(),
            v_tolerance: 1e-9,
            solution_tolerance: 1e-6,
        },
    })
}

/// `A ≡ −b`, `B = M`: normal solutions are the least-squares solutions of
/// `M x = b`.
pub fn scenario_least_squares(m: Matrix, b: Vector) -> Result<Scenario> {
    let (v, x) = oracle::least_squares_oracle(&m, &b)?;
    let dim = b.dim();
    let mt = m.transpose();
    let target = SolutionTarget::Affine { c: mt.matmul(&m)?, d: mt.matvec(&b)? };
    let pair = OperatorPair::new(OperatorSpec::constant(-b), OperatorSpec::linear(m)?, dim)?;
    Ok(Scenario {
        name: "least-squares".into(),
        pair,
        expected: Expected {
            v: Some(v),
            v_swapped: None,
            solution: target,
            representative: Some(x),
            oracle: "range projection and normal equations MᵀMx = Mᵀb".into(),
            v_tolerance: 1e-7,
            solution_tolerance: 1e-6,
        },
    })
}

/// `A = L + a*`, `B = M + b*`, with `v` and a normal solution from the
/// least-norm quadratic program.
pub fn scenario_affine(l: Matrix, astar: Vector, m: Matrix, bstar: Vector) -> Result<Scenario> {
    let (w, x) = oracle::affine_qp_oracle(&l, &astar, &m, &bstar)?;
    let dim = astar.dim();
    let rhs = Matrix::identity(dim).add(&l)?.matvec(&w)? - &astar - &bstar;
    let target = SolutionTarget::Affine { c: l.add(&m)?, d: rhs };
    let pair = OperatorPair::new(OperatorSpec::affine(l, astar)?, OperatorSpec::affine(m, bstar)?, dim)?;
    Ok(Scenario {
        name: "affine".into(),
        pair,
        expected: Expected {
            v: Some(w),
            v_swapped: None,
            solution: target,
            representative: Some(x),
            oracle: "least-norm w with (Id + L)w − (L + M)x = a* + b*".into(),
            v_tolerance: 1e-5,
            solution_tolerance: 1e-6,
        },
    })
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::new(rows, cols, data).expect("shape matches data length")
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    Vector::new((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).expect("finite samples")
}

/// `E (S + K) Eᵀ` with `E` an orthonormal `n × r` frame, `S ⪰ 0.1 Id` and
/// `K` skew. Monotone, of rank `r`.
fn random_monotone(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Result<Matrix> {
    if r == 0 {
        return Ok(Matrix::zeros(n, n));
    }
    let frame = PivotedQr::factor(&gaussian_matrix(rng, n, r)).range_basis();
    let e = Matrix::from_columns(&frame[..r])?;
    let g = gaussian_matrix(rng, r, r);
    let s = g.matmul(&g.transpose())?.scale(1.0 / r as f64).add(&Matrix::identity(r).scale(0.1))?;
    let h = gaussian_matrix(rng, r, r);
    let k = h.sub(&h.transpose())?.scale(0.5 * rng.random_range(0.0..1.0));
    e.matmul(&s.add(&k)?)?.matmul(&e.transpose())
}

/// Relative singular-value band of `L + M` treated as numerically ambiguous:
/// values above `RANK_ZERO` but below `RANK_GAP` times the largest.
const RANK_ZERO: f64 = 1e-6;
const RANK_GAP: f64 = 1e-3;

/// Whether every singular value of `s` is either numerically zero or at
/// least `RANK_GAP` times the largest. Near-singular sums make the
/// least-norm answer discontinuous in the data.
fn rank_well_separated(s: &Matrix) -> Result<bool> {
    let gram = s.transpose().matmul(s)?;
    let eig = symmetric_eigenvalues(&gram)?;
    let top = eig.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(true);
    }
    Ok(eig.iter().all(|&l| l <= RANK_ZERO * RANK_ZERO * top || l >= RANK_GAP * RANK_GAP * top))
}

/// `count` affine pairs in dimensions 2 to 10. Even-indexed pairs have
/// `rank L + rank M < n`, so their displacement vector is generically nonzero.
/// Draws whose `L + M` is close to losing rank are discarded and redrawn.
pub fn random_affine_scenarios(seed: u64, count: usize) -> Result<Vec<Scenario>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(2..=10);
            let (rl, rm) = if i % 2 == 0 {
                let rl = rng.random_range(0..n);
                (rl, rng.random_range(0..n - rl))
            } else {
                (rng.random_range(1..=n), rng.random_range(1..=n))
            };
            let (l, m) = loop {
                let l = random_monotone(&mut rng, n, rl)?;
                let m = random_monotone(&mut rng, n, rm)?;
                if rank_well_separated(&l.add(&m)?)? {
                    break (l, m);
                }
            };
            let a = gaussian_vector(&mut rng, n);
            let b = gaussian_vector(&mut rng, n);
            let mut s = scenario_affine(l, a, m, b)?;
            s.name = format!("random-affine-{seed}-{i}");
            Ok(s)
        })
        .collect()
}

/// `count` points with independent `N(0, scale²)` coordinates, reproducible
/// from `seed`.
pub fn sample_points(dim: usize, count: usize, seed: u64, scale: f64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| gaussian_vector(&mut rng, dim).scale(scale)).collect()
}

/// One comparison between solver output and the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(label: &str, deviation: f64, tolerance: f64) -> Self {
        Check { label: label.into(), deviation, tolerance, passed: deviation <= tolerance }
    }

    fn flag(label: &str, ok: bool) -> Self {
        Check { label: label.into(), deviation: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, passed: ok }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub report: SolveReport,
    /// Estimate of `v(B, A)`, when the scenario has a reference for it.
    pub v_swapped_estimate: Option<Vector>,
    pub checks: Vec<Check>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Solves the normal problem of `scenario` and compares against its oracle.
pub fn run_scenario(scenario: &Scenario, x0: &Vector, opts: &SolverOptions) -> Result<ScenarioOutcome> {
    let exp = &scenario.expected;
    let report = solve_normal(&scenario.pair, x0, opts)?;
    let mut checks = Vec::new();
    let v_est = report.v_estimate.clone().expect("normal solves estimate v");
    if let Some(v) = &exp.v {
        checks.push(Check::new("v(A,B)", v_est.dist(v), exp.v_tolerance));
    }
    let mut v_swapped_estimate = None;
    if let Some(v) = &exp.v_swapped {
        let est = estimate_v(&scenario.pair.swapped(), x0, opts)?.v;
        checks.push(Check::new("v(B,A)", est.dist(v), exp.v_tolerance));
        v_swapped_estimate = Some(est);
    }
    match &exp.solution {
        SolutionTarget::Nonexistent => {
            checks.push(Check::flag("no fixed point detected", report.status == SolveStatus::NoFixedPointDetected));
        }
        target => {
            checks.push(Check::flag("converged", report.status == SolveStatus::Converged));
            if let Some(z) = &report.normal_solution {
                checks.push(Check::new("normal solution", target.deviation(z)?, exp.solution_tolerance));
                let certified = report.certificates.as_ref().is_some_and(|c| c.passed());
                checks.push(Check::flag("certificates", certified));
            }
        }
    }
    Ok(ScenarioOutcome { report, v_swapped_estimate, checks })
}

/// Whether `m` has a positive semidefinite symmetric part (up to `slack`).
pub fn is_monotone(m: &Matrix, slack: f64) -> Result<bool> {
    let eig = symmetric_eigenvalues(&m.symmetric_part()?)?;
    Ok(eig.first().is_none_or(|&e| e >= -slack))
}
