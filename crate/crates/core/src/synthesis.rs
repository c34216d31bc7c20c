//! Peak-gain controller synthesis.
//!
//! For a fixed multiplier `λ` the invariance condition and the peak-gain
//! condition are both LMIs in `(Q, Y, g_w, σ, t)`:
//!
//! ```text
//! ⎡ (λ-1)Q     0        QAᵀ + YᵀBᵀ  ⎤
//! ⎢   0      -λI₂     B_wᵀ + F_wᵀBᵀ ⎥ ⪯ 0,        F_w = [0  g_w]
//! ⎣ AQ + BY  B_w + BF_w     -Q      ⎦
//!
//! ⎡ Q     0        Yᵀ  ⎤
//! ⎢ 0  (t-σ)I₂    F_wᵀ ⎥ ≻ 0
//! ⎣ Y    F_w       σ   ⎦
//! ```
//!
//! `f(λ)` is the smallest `t` and is searched over `λ ∈ [λ_min, 1]`. The
//! state gain is `F_x = Y Q⁻¹` and the ellipsoid is `{x : xᵀQ⁻¹x ≤ 1}` in
//! coordinates normalized by `ε̂`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{inverse_pd, solve_pd, LinalgError, Matrix};
use crate::model::{DisturbanceBox, PlantMatrices};
use crate::sdp::{self, LmiBlock, SdpProblem, SolveStatus, SolverOptions};

/// Number of decision variables: Q (6), Y (3), g_w, σ, t.
pub const NUM_VARS: usize = 12;
const IDX_Y: usize = 6;
const IDX_G: usize = 9;
const IDX_SIGMA: usize = 10;
const IDX_T: usize = 11;

/// Upper-triangle positions of the six Q entries.
const Q_ENTRIES: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

pub const VAR_NAMES: [&str; NUM_VARS] = [
    "q11", "q12", "q13", "q22", "q23", "q33", "y1", "y2", "y3", "g_w", "sigma", "t",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    /// Every probe failed; `numerical` of them for reasons other than
    /// certified infeasibility.
    #[error("no feasible lambda among {probes} probes ({numerical} numerical failures)")]
    NoFeasibleLambda { probes: usize, numerical: usize },
    #[error("invalid search setting: {0}")]
    InvalidSetting(String),
    #[error("solver returned a degenerate ellipsoid: {0}")]
    Extraction(#[from] LinalgError),
}

/// How the forecast feedthrough is read off the LMI variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtractionMode {
    /// Feedthrough `g_w / √σ`.
    PaperScaled,
    /// Feedthrough `g_w`, the value the invariance LMI was solved with.
    Unscaled,
}

impl fmt::Display for ExtractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtractionMode::PaperScaled => "PaperScaled",
            ExtractionMode::Unscaled => "Unscaled",
        })
    }
}

impl FromStr for ExtractionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "PaperScaled" => Ok(ExtractionMode::PaperScaled),
            "Unscaled" => Ok(ExtractionMode::Unscaled),
            other => Err(format!("unknown extraction mode `{other}`")),
        }
    }
}

/// Decision vector unpacked.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub q: Matrix,
    pub y: [f64; 3],
    pub g_w: f64,
    pub sigma: f64,
    pub t: f64,
}

impl Decision {
    pub fn from_z(z: &[f64]) -> Self {
        assert_eq!(z.len(), NUM_VARS, "decision vector length");
        let mut q = Matrix::zeros(3, 3);
        for (k, &(i, j)) in Q_ENTRIES.iter().enumerate() {
            q[(i, j)] = z[k];
            q[(j, i)] = z[k];
        }
        Self {
            q,
            y: [z[IDX_Y], z[IDX_Y + 1], z[IDX_Y + 2]],
            g_w: z[IDX_G],
            sigma: z[IDX_SIGMA],
            t: z[IDX_T],
        }
    }

    pub fn to_z(&self) -> Vec<f64> {
        let mut z = vec![0.0; NUM_VARS];
        for (k, &(i, j)) in Q_ENTRIES.iter().enumerate() {
            z[k] = self.q[(i, j)];
        }
        z[IDX_Y..IDX_Y + 3].copy_from_slice(&self.y);
        z[IDX_G] = self.g_w;
        z[IDX_SIGMA] = self.sigma;
        z[IDX_T] = self.t;
        z
    }
}

/// The 8×8 invariance matrix (required to be ⪯ 0).
pub fn invariance_matrix(plant: &PlantMatrices, lambda: f64, d: &Decision) -> Matrix {
    let q = &d.q;
    let y = Matrix::row(&d.y);
    let f_w = Matrix::row(&[0.0, d.g_w]);
    let aq_by = &(&plant.a * q) + &(&plant.b * &y);
    let bw_bfw = &plant.b_w + &(&plant.b * &f_w);
    let mut m = Matrix::zeros(8, 8);
    m.set_block(0, 0, &q.scale(lambda - 1.0));
    m.set_block(3, 3, &Matrix::identity(2).scale(-lambda));
    m.set_block(5, 0, &aq_by);
    m.set_block(0, 5, &aq_by.transpose());
    m.set_block(5, 3, &bw_bfw);
    m.set_block(3, 5, &bw_bfw.transpose());
    m.set_block(5, 5, &q.scale(-1.0));
    m
}

/// The 6×6 peak-gain matrix (required to be ≻ 0).
pub fn peak_matrix(d: &Decision) -> Matrix {
    let mut m = Matrix::zeros(6, 6);
    m.set_block(0, 0, &d.q);
    m[(3, 3)] = d.t - d.sigma;
    m[(4, 4)] = d.t - d.sigma;
    for i in 0..3 {
        m[(5, i)] = d.y[i];
        m[(i, 5)] = d.y[i];
    }
    m[(5, 4)] = d.g_w;
    m[(4, 5)] = d.g_w;
    m[(5, 5)] = d.sigma;
    m
}

/// Block matrices as affine functions of the decision vector.
fn block_functions(
    plant: &PlantMatrices,
    lambda: f64,
    margin: f64,
) -> Vec<Box<dyn Fn(&[f64]) -> Matrix + '_>> {
    vec![
        Box::new(move |z: &[f64]| invariance_matrix(plant, lambda, &Decision::from_z(z)).scale(-1.0)),
        Box::new(move |z: &[f64]| {
            &peak_matrix(&Decision::from_z(z)) - &Matrix::identity(6).scale(margin)
        }),
        Box::new(move |z: &[f64]| &Decision::from_z(z).q - &Matrix::identity(3).scale(margin)),
        Box::new(move |z: &[f64]| Matrix::from_diag(&[z[IDX_SIGMA] - margin])),
        Box::new(move |z: &[f64]| Matrix::from_diag(&[z[IDX_T] - margin])),
    ]
}

/// Assembles both LMIs at a fixed `λ`. The blocks are, in order: the negated
/// invariance matrix, the peak matrix minus `margin·I`, `Q - margin·I`,
/// `σ - margin` and `t - margin`. The objective is `t`.
pub fn build_lmis(plant: &PlantMatrices, lambda: f64, margin: f64) -> SdpProblem {
    let zero = vec![0.0; NUM_VARS];
    let blocks = block_functions(plant, lambda, margin)
        .iter()
        .map(|f| {
            let f0 = f(&zero);
            let coeffs = (0..NUM_VARS)
                .map(|i| {
                    let mut e = zero.clone();
                    e[i] = 1.0;
                    &f(&e) - &f0
                })
                .collect();
            LmiBlock::new(f0, coeffs)
        })
        .collect();
    let mut objective = vec![0.0; NUM_VARS];
    objective[IDX_T] = 1.0;
    sdp::assemble(
        NUM_VARS,
        objective,
        blocks,
        VAR_NAMES.iter().map(|s| s.to_string()).collect(),
    )
    .expect("synthesis blocks are well formed")
}

/// One point of `f(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEval {
    pub lambda: f64,
    pub status: SolveStatus,
    /// `√t` when the solve is optimal.
    pub gamma: Option<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub elapsed: Duration,
}

impl LambdaEval {
    /// `t = γ²`, or `+∞` when not optimal.
    pub fn f(&self) -> f64 {
        self.gamma.map_or(f64::INFINITY, |g| g * g)
    }

    pub fn decision(&self) -> Decision {
        Decision::from_z(&self.z)
    }
}

pub fn eval_f(plant: &PlantMatrices, lambda: f64, opts: &SolverOptions) -> LambdaEval {
    let start = Instant::now();
    let problem = build_lmis(plant, lambda, opts.margin);
    let sol = sdp::solve(&problem, opts);
    let gamma = (sol.status == SolveStatus::Optimal).then(|| sol.z[IDX_T].max(0.0).sqrt());
    LambdaEval {
        lambda,
        status: sol.status,
        gamma,
        z: sol.z,
        iterations: sol.iterations,
        elapsed: start.elapsed(),
    }
}

/// State feedback plus forecast feedthrough, `u = F_x x + feedthrough · w₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub f_x: [f64; 3],
    pub y: [f64; 3],
    /// Raw LMI variable; see [`Controller::feedthrough`].
    pub g_w: f64,
    pub sigma: f64,
    /// Ellipsoid shape `Q⁻¹`.
    pub p: Matrix,
    pub q: Matrix,
    pub lambda_star: f64,
    pub gamma_star: f64,
    pub wt_bound: f64,
    pub extraction_mode: ExtractionMode,
    pub eps_hat: f64,
}

impl Controller {
    /// Builds the controller from a solved decision vector.
    pub fn from_eval(
        eval: &LambdaEval,
        mode: ExtractionMode,
        eps_hat: f64,
    ) -> Result<Self, SynthesisError> {
        let gamma = eval.gamma.ok_or(SynthesisError::NoFeasibleLambda {
            probes: 1,
            numerical: usize::from(eval.status != SolveStatus::Infeasible),
        })?;
        let d = eval.decision();
        let p = inverse_pd(&d.q)?;
        // Q F_xᵀ = Yᵀ; solving is more accurate than multiplying by P.
        let f = solve_pd(&d.q, &Matrix::column(&d.y))?;
        let f_x = [f[(0, 0)], f[(1, 0)], f[(2, 0)]];
        Ok(Self {
            f_x,
            y: d.y,
            g_w: d.g_w,
            sigma: d.sigma,
            p,
            q: d.q,
            lambda_star: eval.lambda,
            gamma_star: gamma,
            wt_bound: eps_hat * gamma,
            extraction_mode: mode,
            eps_hat,
        })
    }

    /// Rebuilds a controller from its stored gains and ellipsoid shape.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        f_x: [f64; 3],
        g_w: f64,
        sigma: f64,
        p: Matrix,
        lambda_star: f64,
        gamma_star: f64,
        extraction_mode: ExtractionMode,
        eps_hat: f64,
    ) -> Result<Self, SynthesisError> {
        let p = p.checked_symmetric()?;
        let q = inverse_pd(&p)?;
        let y: Vec<f64> = (0..3)
            .map(|j| (0..3).map(|i| f_x[i] * q[(i, j)]).sum())
            .collect();
        Ok(Self {
            f_x,
            y: [y[0], y[1], y[2]],
            g_w,
            sigma,
            p,
            q,
            lambda_star,
            gamma_star,
            wt_bound: eps_hat * gamma_star,
            extraction_mode,
            eps_hat,
        })
    }

    /// Gain applied to the forecast disturbance `w₂`.
    pub fn feedthrough(&self) -> f64 {
        match self.extraction_mode {
            ExtractionMode::PaperScaled => self.g_w / self.sigma.sqrt(),
            ExtractionMode::Unscaled => self.g_w,
        }
    }

    /// Whether `support_peak ≤ γ*` follows from the peak LMI for the chosen
    /// feedthrough. With `g_w` unscaled the guaranteed bound is
    /// `σ(1 + t - σ)`, which stays below `t` only while `σ ≤ 1`.
    pub fn peak_certified(&self) -> bool {
        match self.extraction_mode {
            ExtractionMode::PaperScaled => true,
            ExtractionMode::Unscaled => self.sigma <= 1.0,
        }
    }

    /// Same controller with the bound recomputed for another disturbance scale.
    pub fn with_eps_hat(&self, eps_hat: f64) -> Self {
        Self {
            eps_hat,
            wt_bound: eps_hat * self.gamma_star,
            ..self.clone()
        }
    }

    /// `u = F_x x + feedthrough · w₂`.
    pub fn control(&self, x: &[f64; 3], w: &[f64; 2]) -> f64 {
        self.f_x[0] * x[0] + self.f_x[1] * x[1] + self.f_x[2] * x[2] + self.feedthrough() * w[1]
    }

    /// Ellipsoid level `xᵀPx`.
    pub fn level(&self, x: &[f64; 3]) -> f64 {
        self.p.quad_form(x)
    }

    /// `max_i |(F_x Q - Y)_i|`.
    pub fn extraction_residual(&self) -> f64 {
        (0..3)
            .map(|j| {
                let fq: f64 = (0..3).map(|i| self.f_x[i] * self.q[(i, j)]).sum();
                (fq - self.y[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub solver: SolverOptions,
    pub lambda_min: f64,
    pub grid_points: usize,
    pub golden_iters: usize,
    /// Golden-section stops once the bracket is narrower than this in `λ`.
    pub bracket_tol: f64,
    pub extraction_mode: ExtractionMode,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            lambda_min: 1e-3,
            grid_points: 9,
            golden_iters: 31,
            bracket_tol: 1e-6,
            extraction_mode: ExtractionMode::Unscaled,
        }
    }
}

impl SearchOptions {
    /// Values of `f` closer than this are treated as equal.
    fn tie_tol(&self) -> f64 {
        10.0 * self.solver.gap_tol
    }
}

/// Best-so-far tracker; ties go to the smaller `λ`.
struct Best {
    eval: Option<LambdaEval>,
    tie: f64,
    probes: usize,
    numerical: usize,
}

impl Best {
    fn new(tie: f64) -> Self {
        Self {
            eval: None,
            tie,
            probes: 0,
            numerical: 0,
        }
    }

    fn offer(&mut self, e: &LambdaEval) {
        self.probes += 1;
        if e.gamma.is_none() {
            self.numerical += usize::from(e.status != SolveStatus::Infeasible);
            return;
        }
        let better = match &self.eval {
            None => true,
            Some(b) => {
                let (fe, fb) = (e.f(), b.f());
                fe < fb - self.tie || (fe <= fb + self.tie && e.lambda < b.lambda)
            }
        };
        if better {
            self.eval = Some(e.clone());
        }
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Minimizes `f(λ)` over `[lambda_min, 1]`: a log-spaced grid brackets the
/// minimizer, then golden-section search in `log λ` refines it.
pub fn minimize_f(plant: &PlantMatrices, opts: &SearchOptions) -> Result<Controller, SynthesisError> {
    if !(opts.lambda_min > 0.0 && opts.lambda_min <= 1.0) {
        return Err(SynthesisError::InvalidSetting(format!(
            "lambda_min must lie in (0, 1], got {}",
            opts.lambda_min
        )));
    }
    if opts.grid_points < 2 {
        return Err(SynthesisError::InvalidSetting("grid needs at least two points".into()));
    }
    let grid = log_grid(opts.lambda_min, 1.0, opts.grid_points);
    let evals: Vec<LambdaEval> = grid.iter().map(|&l| eval_f(plant, l, &opts.solver)).collect();

    let mut best = Best::new(opts.tie_tol());
    for e in &evals {
        best.offer(e);
    }
    let Some(seed) = best.eval.clone() else {
        return Err(SynthesisError::NoFeasibleLambda {
            probes: best.probes,
            numerical: best.numerical,
        });
    };
    let i = grid.iter().position(|&l| l == seed.lambda).unwrap_or(0);
    let mut lo = grid[i.saturating_sub(1)].ln();
    let mut hi = grid[(i + 1).min(grid.len() - 1)].ln();

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let probe = |x: f64, best: &mut Best| {
        let e = eval_f(plant, x.exp(), &opts.solver);
        best.offer(&e);
        e.f()
    };
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let mut fc = probe(c, &mut best);
    let mut fd = probe(d, &mut best);
    for _ in 0..opts.golden_iters {
        if hi.exp() - lo.exp() < opts.bracket_tol {
            break;
        }
        if fc <= fd + opts.tie_tol() {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = probe(c, &mut best);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = probe(d, &mut best);
        }
    }
    let chosen = best.eval.expect("seed is feasible");
    Controller::from_eval(&chosen, opts.extraction_mode, plant.eps_hat)
}

/// Best controller over an explicit list of `λ` values.
pub fn minimize_over_grid(
    plant: &PlantMatrices,
    lambdas: &[f64],
    opts: &SearchOptions,
) -> Result<Controller, SynthesisError> {
    if lambdas.is_empty() {
        return Err(SynthesisError::InvalidSetting("empty lambda grid".into()));
    }
    let mut best = Best::new(opts.tie_tol());
    for &l in lambdas {
        best.offer(&eval_f(plant, l, &opts.solver));
    }
    match best.eval {
        Some(e) => Controller::from_eval(&e, opts.extraction_mode, plant.eps_hat),
        None => Err(SynthesisError::NoFeasibleLambda {
            probes: best.probes,
            numerical: best.numerical,
        }),
    }
}

/// `max_{xᵀPx ≤ r²} |F_x x| + max_{w ∈ box} |feedthrough · w₂|`, where
/// `r = 1` for a scaled box and `r = ε̂` otherwise.
pub fn support_peak(controller: &Controller, bx: &DisturbanceBox) -> f64 {
    let r = if bx.scaled { 1.0 } else { controller.eps_hat };
    let f = &controller.f_x;
    let s: f64 = (0..3)
        .map(|i| (0..3).map(|j| f[i] * controller.q[(i, j)] * f[j]).sum::<f64>())
        .sum();
    r * s.max(0.0).sqrt() + controller.feedthrough().abs() * bx.w2_bound
}

/// Largest `xᵀPx` after one closed-loop step, over `samples` random points
/// on the ellipsoid boundary combined with every corner of `bx`. The level
/// is convex in `(x, w)`, so corners and the boundary are where it peaks.
pub fn sampled_invariance(
    plant: &PlantMatrices,
    controller: &Controller,
    bx: &DisturbanceBox,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = random_boundary_point(&controller.p, &mut rng);
        for w in bx.corners() {
            let u = controller.control(&x, &w);
            worst = worst.max(controller.level(&plant.step(&x, u, &w)));
        }
    }
    worst
}

/// Uniform direction scaled onto `{xᵀPx = 1}`.
pub fn random_boundary_point<R: Rng>(p: &Matrix, rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        let n2 = v.iter().map(|c| c * c).sum::<f64>();
        if n2 > 1e-6 && n2 <= 1.0 {
            let level = p.quad_form(&v);
            let s = 1.0 / level.sqrt();
            return [v[0] * s, v[1] * s, v[2] * s];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::plant_for_rates;
    use approx::assert_abs_diff_eq;

    fn sample_decision() -> Decision {
        Decision {
            q: Matrix::from_rows(&[[2.0, 0.1, 0.2], [0.1, 3.0, 0.3], [0.2, 0.3, 4.0]]),
            y: [0.5, -0.25, 1.0],
            g_w: 0.75,
            sigma: 0.4,
            t: 0.9,
        }
    }

    #[test]
    fn decision_round_trip() {
        let d = sample_decision();
        assert_eq!(Decision::from_z(&d.to_z()), d);
    }

    #[test]
    fn assembled_blocks_reproduce_matrix_functions() {
        let plant = plant_for_rates(0.3, 0.2, 1.0);
        let d = sample_decision();
        let z = d.to_z();
        let prob = build_lmis(&plant, 0.4, 1e-7);
        assert_eq!(prob.blocks.len(), 5);
        let m1 = prob.blocks[0].evaluate(&z);
        let m1_ref = invariance_matrix(&plant, 0.4, &d).scale(-1.0);
        assert!(m1.max_abs_diff(&m1_ref) < 1e-14);
        let m2 = prob.blocks[1].evaluate(&z);
        let m2_ref = &peak_matrix(&d) - &Matrix::identity(6).scale(1e-7);
        assert!(m2.max_abs_diff(&m2_ref) < 1e-14);
        assert_abs_diff_eq!(prob.blocks[4].evaluate(&z)[(0, 0)], 0.9 - 1e-7);
        assert_eq!(prob.objective_at(&z), 0.9);
    }

    #[test]
    fn invariance_matrix_is_symmetric() {
        let plant = plant_for_rates(0.1, 0.1, 1.0);
        let m = invariance_matrix(&plant, 0.3, &sample_decision());
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn unit_lambda_forces_zero_coupling() {
        // With λ = 1 the top-left block vanishes, so feasibility needs
        // AQ + BY = 0, impossible while the first row of A is nonzero.
        let plant = plant_for_rates(0.1, 0.1, 1.0);
        let d = Decision {
            q: &Matrix::identity(3) + &(&plant.b_w * &plant.b_w.transpose()),
            y: [0.0; 3],
            g_w: 0.0,
            sigma: 0.5,
            t: 1.0,
        };
        let prob = build_lmis(&plant, 1.0, 1e-7);
        let report = sdp::check_solution(&prob, &d.to_z(), 1e-7);
        assert!(report.min_eigen[0] < -0.1);
        let e = eval_f(&plant, 1.0, &SolverOptions::default());
        assert_ne!(e.status, SolveStatus::Optimal);
    }

    #[test]
    fn out_of_range_lambda_is_infeasible() {
        let plant = plant_for_rates(0.1, 0.1, 1.0);
        for l in [-0.5, 1.5] {
            let e = eval_f(&plant, l, &SolverOptions::default());
            assert_eq!(e.status, SolveStatus::Infeasible, "lambda {l}");
            assert!(e.gamma.is_none());
        }
    }

    #[test]
    fn interior_lambda_is_optimal_and_consistent() {
        let plant = plant_for_rates(0.5, 0.5, 1.0);
        let opts = SolverOptions::default();
        let e = eval_f(&plant, 0.5, &opts);
        assert_eq!(e.status, SolveStatus::Optimal);
        let d = e.decision();
        assert!(d.sigma > 0.0);
        assert!(crate::linalg::min_eigenvalue(&d.q).unwrap() >= opts.margin * 0.99);
        let c = Controller::from_eval(&e, ExtractionMode::Unscaled, 1.0).unwrap();
        assert!(c.extraction_residual() < 1e-8);
        assert!((&c.p * &c.q).max_abs_diff(&Matrix::identity(3)) < 1e-8);
    }

    #[test]
    fn support_peak_closed_forms() {
        let mut c = Controller::from_parts(
            [1.0, 0.0, 0.0],
            0.0,
            1.0,
            Matrix::identity(3),
            0.5,
            1.0,
            ExtractionMode::Unscaled,
            1.0,
        )
        .unwrap();
        let bx = DisturbanceBox::scaled(1.0, 1.0);
        assert_abs_diff_eq!(support_peak(&c, &bx), 1.0, epsilon = 1e-15);
        c.f_x = [0.0; 3];
        c.g_w = 2.0;
        let half = DisturbanceBox {
            w1_bound: 0.1,
            w2_bound: 0.5,
            scaled: true,
        };
        assert_abs_diff_eq!(support_peak(&c, &half), 1.0, epsilon = 1e-15);
        // Unscaled states live in the ellipsoid grown by ε̂.
        c.f_x = [1.0, 0.0, 0.0];
        c.g_w = 0.0;
        let c = c.with_eps_hat(4.0);
        assert_abs_diff_eq!(support_peak(&c, &DisturbanceBox::unscaled(1.0, 1.0)), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn feedthrough_modes() {
        let mut c = Controller::from_parts(
            [0.0; 3],
            0.6,
            0.25,
            Matrix::identity(3),
            0.5,
            1.0,
            ExtractionMode::PaperScaled,
            2.0,
        )
        .unwrap();
        assert_abs_diff_eq!(c.feedthrough(), 1.2);
        assert!(c.peak_certified());
        c.extraction_mode = ExtractionMode::Unscaled;
        assert_eq!(c.feedthrough(), 0.6);
        assert!(c.peak_certified());
        c.sigma = 2.0;
        assert!(!c.peak_certified());
        assert_eq!(c.wt_bound, 2.0);
    }

    #[test]
    fn extraction_mode_parses() {
        for m in [ExtractionMode::PaperScaled, ExtractionMode::Unscaled] {
            assert_eq!(m.to_string().parse::<ExtractionMode>().unwrap(), m);
        }
        assert!("scaled".parse::<ExtractionMode>().is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1.0, 9);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[8], 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn minimize_rejects_bad_floor() {
        let plant = plant_for_rates(0.1, 0.1, 1.0);
        let opts = SearchOptions {
            lambda_min: 0.0,
            ..SearchOptions::default()
        };
        assert!(matches!(
            minimize_f(&plant, &opts),
            Err(SynthesisError::InvalidSetting(_))
        ));
    }

    #[test]
    fn grid_of_infeasible_points_errors() {
        let plant = plant_for_rates(0.1, 0.1, 1.0);
        let r = minimize_over_grid(&plant, &[1.5, 2.0], &SearchOptions::default());
        assert_eq!(
            r,
            Err(SynthesisError::NoFeasibleLambda {
                probes: 2,
                numerical: 0
            })
        );
    }
}
