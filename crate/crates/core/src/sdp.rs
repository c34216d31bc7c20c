//! Small dense semidefinite programs in inequality form:
//!
//! ```text
//! minimize    cᵀz
//! subject to  F0(j) + Σ_i z_i Fi(j) ⪰ 0      for every block j
//! ```
//!
//! Solved with a two-phase log-det barrier method. Phase I lifts every
//! block by `s·I` and drives `s` below zero to find a strictly feasible
//! point; phase II follows the central path of
//! `cᵀz/μ - Σ_j log det F(j)(z)` with damped Newton steps, shrinking `μ`
//! geometrically. Blocks are pre-scaled by `1 / (1 + max|F0|)`, which
//! changes the barrier only by a constant.
//!
//! The solver is meant for problems with a dozen variables and blocks up
//! to about 10×10. No dual certificate is produced: infeasibility is
//! declared from the phase-I margin alone.

use std::fmt;

use thiserror::Error;

use crate::linalg::{cholesky, congruence_solve, min_eigenvalue, LinalgError, Matrix, Qr};

/// Barrier parameter reduction per outer iteration.
const MU_FACTOR: f64 = 0.2;
const MU_START: f64 = 1.0;
/// Newton decrement (λ²/2) below which a point counts as centered.
const CENTERING_TOL: f64 = 1e-11;
const ARMIJO: f64 = 0.01;
const MIN_STEP: f64 = 1e-14;
/// A step shorter than this with a decrement below `STALL_DECREMENT` ends centering.
const STALL_STEP: f64 = 1e-3;
const STALL_DECREMENT: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("{0} contains non-finite entries")]
    NonFinite(String),
    #[error("problem has no LMI blocks")]
    NoBlocks,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `F0 + Σ z_i F_i ⪰ 0` for one symmetric block.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub f0: Matrix,
    pub coeffs: Vec<Matrix>,
}

impl LmiBlock {
    pub fn new(f0: Matrix, coeffs: Vec<Matrix>) -> Self {
        Self { f0, coeffs }
    }

    /// Scalar constraint `f0 + Σ c_i z_i ≥ 0`.
    pub fn scalar(f0: f64, coeffs: &[f64]) -> Self {
        Self {
            f0: Matrix::from_rows(&[[f0]]),
            coeffs: coeffs.iter().map(|&c| Matrix::from_rows(&[[c]])).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.f0.rows()
    }

    pub fn evaluate(&self, z: &[f64]) -> Matrix {
        let mut m = self.f0.clone();
        for (zi, fi) in z.iter().zip(&self.coeffs) {
            if *zi != 0.0 {
                m = &m + &fi.scale(*zi);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    pub var_names: Vec<String>,
}

impl SdpProblem {
    pub fn objective_at(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, x)| c * x).sum()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(LmiBlock::dim).sum()
    }
}

/// Validates dimensions and finiteness and symmetrizes every matrix.
///
/// `var_names` may be empty, in which case names `z0, z1, ...` are used.
pub fn assemble(
    num_vars: usize,
    objective: Vec<f64>,
    blocks: Vec<LmiBlock>,
    var_names: Vec<String>,
) -> Result<SdpProblem, SdpError> {
    if objective.len() != num_vars {
        return Err(SdpError::Dimension {
            what: "objective".into(),
            expected: num_vars,
            got: objective.len(),
        });
    }
    if objective.iter().any(|c| !c.is_finite()) {
        return Err(SdpError::NonFinite("objective".into()));
    }
    if blocks.is_empty() {
        return Err(SdpError::NoBlocks);
    }
    let var_names = if var_names.is_empty() {
        (0..num_vars).map(|i| format!("z{i}")).collect()
    } else if var_names.len() != num_vars {
        return Err(SdpError::Dimension {
            what: "var_names".into(),
            expected: num_vars,
            got: var_names.len(),
        });
    } else {
        var_names
    };

    let mut clean = Vec::with_capacity(blocks.len());
    for (j, block) in blocks.into_iter().enumerate() {
        if block.coeffs.len() != num_vars {
            return Err(SdpError::Dimension {
                what: format!("block {j} coefficient count"),
                expected: num_vars,
                got: block.coeffs.len(),
            });
        }
        let dim = block.f0.rows();
        let f0 = block.f0.checked_symmetric().map_err(|e| tag(e, j, "F0"))?;
        let mut coeffs = Vec::with_capacity(num_vars);
        for (i, c) in block.coeffs.into_iter().enumerate() {
            if c.rows() != dim || c.cols() != dim {
                return Err(SdpError::Dimension {
                    what: format!("block {j} coefficient {i} size"),
                    expected: dim,
                    got: c.rows().max(c.cols()),
                });
            }
            coeffs.push(c.checked_symmetric().map_err(|e| tag(e, j, "coefficient"))?);
        }
        clean.push(LmiBlock { f0, coeffs });
    }
    Ok(SdpProblem {
        num_vars,
        objective,
        blocks: clean,
        var_names,
    })
}

fn tag(e: LinalgError, block: usize, what: &str) -> SdpError {
    match e {
        LinalgError::NonFinite => SdpError::NonFinite(format!("block {block} {what}")),
        other => SdpError::Linalg(other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Largest tolerated negative eigenvalue when judging feasibility.
    pub feas_tol: f64,
    /// Target for `μ · (total barrier dimension)` at termination.
    pub gap_tol: f64,
    /// Margin used by LMI builders to model strict inequalities as `F ⪰ margin·I`.
    pub margin: f64,
    /// Total Newton steps across both phases.
    pub max_newton: usize,
    /// Every variable is kept inside `(-var_bound, var_bound)`, which keeps
    /// the barrier bounded below when the feasible set is unbounded.
    pub var_bound: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            gap_tol: 1e-8,
            margin: 1e-7,
            max_newton: 500,
            var_bound: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::MaxIter => "MaxIter",
            SolveStatus::NumericalFailure => "NumericalFailure",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "Optimal" => Ok(SolveStatus::Optimal),
            "Infeasible" => Ok(SolveStatus::Infeasible),
            "MaxIter" => Ok(SolveStatus::MaxIter),
            "NumericalFailure" => Ok(SolveStatus::NumericalFailure),
            other => Err(format!("unknown solve status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub objective_value: f64,
    /// Smallest eigenvalue of each unscaled block at `z`.
    pub min_eigen_per_block: Vec<f64>,
    /// Newton steps over both phases.
    pub iterations: usize,
    pub phase1_iterations: usize,
    /// Final phase-I lift `s` (negative once a strictly feasible point was found).
    pub phase1_margin: f64,
    /// Objective after each phase-II centering.
    pub central_path: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub min_eigen: Vec<f64>,
    /// `max(0, -min eigenvalue)` over all blocks.
    pub worst_violation: f64,
    pub feasible: bool,
}

/// A-posteriori feasibility of `z`, computed with the Jacobi eigensolver on
/// the unscaled blocks.
pub fn check_solution(problem: &SdpProblem, z: &[f64], feas_tol: f64) -> FeasibilityReport {
    assert_eq!(z.len(), problem.num_vars, "z length must equal num_vars");
    let min_eigen: Vec<f64> = problem
        .blocks
        .iter()
        .map(|b| {
            let m = b.evaluate(z);
            min_eigenvalue(&m).unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let worst_violation = min_eigen.iter().fold(0.0f64, |w, &e| w.max(-e));
    FeasibilityReport {
        feasible: worst_violation <= feas_tol,
        min_eigen,
        worst_violation,
    }
}

/// Block with pre-scaled data and the list of variables that touch it.
struct ScaledBlock {
    f0: Matrix,
    coeffs: Vec<Matrix>,
    active: Vec<usize>,
}

impl ScaledBlock {
    fn evaluate(&self, z: &[f64]) -> Matrix {
        let mut m = self.f0.clone();
        let n = m.rows();
        for &i in &self.active {
            let zi = z[i];
            let c = &self.coeffs[i];
            for r in 0..n {
                for s in 0..n {
                    m[(r, s)] += zi * c[(r, s)];
                }
            }
        }
        m
    }
}

/// Barrier subproblem shared by both phases.
struct Barrier {
    blocks: Vec<ScaledBlock>,
    objective: Vec<f64>,
    /// Per-variable open interval `(lo, hi)`; infinite ends carry no barrier.
    bounds: Vec<(f64, f64)>,
}

enum Failure {
    MaxIter,
    Numerical,
}

impl Barrier {
    fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Total barrier dimension; the central-path gap is `μ` times this.
    fn degree(&self) -> usize {
        let sides: usize = self
            .bounds
            .iter()
            .map(|(lo, hi)| usize::from(lo.is_finite()) + usize::from(hi.is_finite()))
            .sum();
        self.blocks.iter().map(|b| b.f0.rows()).sum::<usize>() + sides
    }

    fn factor(&self, z: &[f64]) -> Option<Vec<Matrix>> {
        for (zi, (lo, hi)) in z.iter().zip(&self.bounds) {
            if !(zi > lo && zi < hi) {
                return None;
            }
        }
        self.blocks
            .iter()
            .map(|b| cholesky(&b.evaluate(z), 0.0).ok().flatten())
            .collect()
    }

    fn potential(&self, z: &[f64], mu: f64) -> Option<f64> {
        let factors = self.factor(z)?;
        let mut v: f64 = self.objective.iter().zip(z).map(|(c, x)| c * x).sum::<f64>() / mu;
        for l in &factors {
            for i in 0..l.rows() {
                v -= 2.0 * l[(i, i)].ln();
            }
        }
        for (zi, (lo, hi)) in z.iter().zip(&self.bounds) {
            if lo.is_finite() {
                v -= (zi - lo).ln();
            }
            if hi.is_finite() {
                v -= (hi - zi).ln();
            }
        }
        v.is_finite().then_some(v)
    }

    /// Newton step for `cᵀz/μ + φ(z)` and the full gradient.
    ///
    /// The barrier Hessian is `JᵀJ` where the rows of `J` stack the
    /// symmetric entries of `G_i = L⁻¹ F_i L⁻ᵀ` (off-diagonal ones weighted
    /// by √2) and one row per finite bound; the barrier gradient is `-Jᵀe`.
    /// Working with a QR factorization of `J` rather than `JᵀJ` keeps the
    /// step accurate when blocks are badly conditioned.
    fn newton_step(&self, z: &[f64], factors: &[Matrix], mu: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.num_vars();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut target: Vec<f64> = Vec::new();
        for (block, l) in self.blocks.iter().zip(factors) {
            let d = l.rows();
            let g: Vec<(usize, Matrix)> = block
                .active
                .iter()
                .map(|&i| (i, congruence_solve(l, &block.coeffs[i])))
                .collect();
            for r in 0..d {
                for c in r..d {
                    let w = if r == c { 1.0 } else { std::f64::consts::SQRT_2 };
                    let mut row = vec![0.0; n];
                    for (i, gi) in &g {
                        row[*i] = w * gi[(r, c)];
                    }
                    rows.push(row);
                    target.push(if r == c { 1.0 } else { 0.0 });
                }
            }
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_finite() {
                let mut row = vec![0.0; n];
                row[i] = 1.0 / (z[i] - lo);
                rows.push(row);
                target.push(1.0);
            }
            if hi.is_finite() {
                let mut row = vec![0.0; n];
                row[i] = -1.0 / (hi - z[i]);
                rows.push(row);
                target.push(1.0);
            }
        }
        let m = rows.len();
        let mut grad: Vec<f64> = self.objective.iter().map(|c| c / mu).collect();
        for (row, e) in rows.iter().zip(&target) {
            if *e != 0.0 {
                for i in 0..n {
                    grad[i] -= row[i] * e;
                }
            }
        }
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let s = rows.iter().map(|r| r[i] * r[i]).sum::<f64>().sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let mut j = Matrix::zeros(m, n);
        for (r, row) in rows.iter().enumerate() {
            for i in 0..n {
                j[(r, i)] = row[i] / scale[i];
            }
        }
        let qr = Qr::new(&j).ok()?;
        // JᵀJ d = Jᵀe - c/μ, split into a least-squares part and the rest.
        let d1 = qr.least_squares(&target);
        let rhs: Vec<f64> = (0..n).map(|i| -self.objective[i] / (mu * scale[i])).collect();
        let d2 = qr.solve_r(&qr.solve_rt(&rhs));
        let dir: Vec<f64> = (0..n).map(|i| (d1[i] + d2[i]) / scale[i]).collect();
        dir.iter().all(|x| x.is_finite()).then_some((dir, grad))
    }

    /// Damped Newton centering at fixed `μ`. Returns once the decrement is
    /// small or the line search can no longer make progress.
    fn center(
        &self,
        z: &mut Vec<f64>,
        mu: f64,
        steps: &mut usize,
        max_steps: usize,
    ) -> Result<(), Failure> {
        loop {
            let factors = self.factor(z).ok_or(Failure::Numerical)?;
            let (dir, grad) = self.newton_step(z, &factors, mu).ok_or(Failure::Numerical)?;
            let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
            if -slope / 2.0 <= CENTERING_TOL {
                return Ok(());
            }
            if *steps >= max_steps {
                return Err(Failure::MaxIter);
            }
            let current = self.potential(z, mu).ok_or(Failure::Numerical)?;
            let mut t = 1.0;
            let next = loop {
                let cand: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                if let Some(v) = self.potential(&cand, mu) {
                    if v < current && v <= current + ARMIJO * t * slope {
                        break Some(cand);
                    }
                }
                t *= 0.5;
                if t < MIN_STEP {
                    break None;
                }
            };
            match next {
                Some(cand) => {
                    *steps += 1;
                    *z = cand;
                    // Ill-conditioned blocks make the direction inaccurate;
                    // a nearly centered point that only admits tiny steps
                    // will not improve further.
                    if t < STALL_STEP && -slope / 2.0 <= STALL_DECREMENT {
                        return Ok(());
                    }
                }
                // Rounding noise in the potential; the point is as central as it gets.
                None => return Ok(()),
            }
        }
    }
}

fn scaled_blocks(problem: &SdpProblem, lift: bool) -> Vec<ScaledBlock> {
    problem
        .blocks
        .iter()
        .map(|b| {
            let scale = 1.0 / (1.0 + b.f0.max_abs());
            let mut coeffs: Vec<Matrix> = b.coeffs.iter().map(|c| c.scale(scale)).collect();
            if lift {
                coeffs.push(Matrix::identity(b.dim()));
            }
            let active = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| c.max_abs() > 0.0)
                .map(|(i, _)| i)
                .collect();
            ScaledBlock {
                f0: b.f0.scale(scale),
                coeffs,
                active,
            }
        })
        .collect()
}

struct Phase1 {
    z: Vec<f64>,
    margin: f64,
    steps: usize,
}

enum Phase1Outcome {
    Feasible(Phase1),
    Infeasible(Phase1),
    NoInterior(Phase1),
    Failed(Failure, Phase1),
}

fn phase1(problem: &SdpProblem, opts: &SolverOptions) -> Phase1Outcome {
    let n = problem.num_vars;
    let plain = Barrier {
        blocks: scaled_blocks(problem, false),
        objective: vec![0.0; n],
        bounds: vec![(-opts.var_bound, opts.var_bound); n],
    };
    let z0 = vec![0.0; n];
    let worst = plain
        .blocks
        .iter()
        .map(|b| min_eigenvalue(&b.evaluate(&z0)).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);
    if worst > 0.0 {
        return Phase1Outcome::Feasible(Phase1 {
            z: z0,
            margin: -worst,
            steps: 0,
        });
    }
    if !worst.is_finite() {
        return Phase1Outcome::Failed(
            Failure::Numerical,
            Phase1 {
                z: z0,
                margin: f64::INFINITY,
                steps: 0,
            },
        );
    }

    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    // The lift never needs to exceed one unit of (scaled) margin.
    let mut bounds = vec![(-opts.var_bound, opts.var_bound); n];
    bounds.push((-1.0, f64::INFINITY));
    let lifted = Barrier {
        blocks: scaled_blocks(problem, true),
        objective,
        bounds,
    };
    let degree = lifted.degree() as f64;
    let mut y = z0;
    y.push(1.0 - worst);
    let mut steps = 0;
    let mut mu = MU_START;
    loop {
        if let Err(f) = lifted.center(&mut y, mu, &mut steps, opts.max_newton) {
            let s = y[n];
            y.truncate(n);
            return Phase1Outcome::Failed(
                f,
                Phase1 {
                    z: y,
                    margin: s,
                    steps,
                },
            );
        }
        let s = y[n];
        let done = |mut y: Vec<f64>| {
            y.truncate(n);
            Phase1 {
                z: y,
                margin: s,
                steps,
            }
        };
        if s < 0.0 {
            return Phase1Outcome::Feasible(done(y));
        }
        // On the central path the optimal lift is at least s - μ·degree.
        if s - mu * degree > opts.feas_tol {
            return Phase1Outcome::Infeasible(done(y));
        }
        if mu * degree <= opts.gap_tol {
            return if s > opts.feas_tol {
                Phase1Outcome::Infeasible(done(y))
            } else {
                Phase1Outcome::NoInterior(done(y))
            };
        }
        mu *= MU_FACTOR;
    }
}

/// Solves the problem; never panics on infeasible or ill-posed input.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let finish = |status, z: Vec<f64>, iterations, p1: usize, margin, path| {
        let report = check_solution(problem, &z, opts.feas_tol);
        SdpSolution {
            status,
            objective_value: problem.objective_at(&z),
            min_eigen_per_block: report.min_eigen,
            z,
            iterations,
            phase1_iterations: p1,
            phase1_margin: margin,
            central_path: path,
        }
    };

    let start = match phase1(problem, opts) {
        Phase1Outcome::Feasible(p) => p,
        Phase1Outcome::Infeasible(p) => {
            return finish(SolveStatus::Infeasible, p.z, p.steps, p.steps, p.margin, vec![])
        }
        Phase1Outcome::NoInterior(p) => {
            return finish(
                SolveStatus::NumericalFailure,
                p.z,
                p.steps,
                p.steps,
                p.margin,
                vec![],
            )
        }
        Phase1Outcome::Failed(f, p) => {
            let status = match f {
                Failure::MaxIter => SolveStatus::MaxIter,
                Failure::Numerical => SolveStatus::NumericalFailure,
            };
            return finish(status, p.z, p.steps, p.steps, p.margin, vec![]);
        }
    };

    let n = problem.num_vars;
    let barrier = Barrier {
        blocks: scaled_blocks(problem, false),
        objective: problem.objective.clone(),
        bounds: vec![(-opts.var_bound, opts.var_bound); n],
    };
    let degree = barrier.degree() as f64;
    let mut z = start.z;
    let mut steps = start.steps;
    let mut mu = MU_START;
    let mut path = Vec::new();
    loop {
        match barrier.center(&mut z, mu, &mut steps, opts.max_newton) {
            Ok(()) => {}
            Err(Failure::MaxIter) => {
                return finish(SolveStatus::MaxIter, z, steps, start.steps, start.margin, path)
            }
            Err(Failure::Numerical) => {
                return finish(
                    SolveStatus::NumericalFailure,
                    z,
                    steps,
                    start.steps,
                    start.margin,
                    path,
                )
            }
        }
        path.push(problem.objective_at(&z));
        if mu * degree <= opts.gap_tol {
            break;
        }
        mu *= MU_FACTOR;
    }
    finish(SolveStatus::Optimal, z, steps, start.steps, start.margin, path)
}
