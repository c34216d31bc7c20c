//! Single-vendor inventory model.
//!
//! The vendor holds inventory `i(k)` and a pipeline of unfulfilled orders
//! `p(k)`. Each interval a fraction `β` of inventory perishes and a fraction
//! `1 - α` of the pipeline is delivered. Around the equilibrium reached with
//! the steady-state ordering law `o = -γ_I i - γ_P p + γ_D f`, the shifted
//! state `x = (i - i∞, p - p∞, f_prev - d∞)` evolves as
//!
//! ```text
//! x(k+1) = A x(k) + B u(k) + B_w w(k)
//! A   = [[1-β, 1-α, -1], [0, α, 0], [0, 0, 0]]
//! B   = [0, 1, 0]ᵀ
//! B_w = [[-1, 0], [0, 0], [0, 1]]
//! ```
//!
//! with `w1 = d - f(two steps earlier)` the forecast error and
//! `w2 = f - d∞` the forecast deviation.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::Matrix;

/// Determinant magnitude below which the equilibrium system is treated as singular.
pub const SINGULAR_DET_TOL: f64 = 1e-12;

/// Default ratio that makes "much larger than the disturbance" testable.
pub const DEFAULT_ASSUMPTION4_FACTOR: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid vendor parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("equilibrium system is singular (|det| = {0:e})")]
    SingularEquilibrium(f64),
}

/// Vendor parameters and steady-state ordering gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VendorParams {
    /// Backlog rate: share of the pipeline left unfulfilled each interval.
    pub alpha: f64,
    /// Perish rate: share of held inventory that expires each interval.
    pub beta: f64,
    /// Historical average demand.
    pub d_inf: f64,
    /// Bound on |d(k) - d∞|.
    pub eps_d: f64,
    /// Bound on the two-step-ahead forecast error.
    pub eps_f: f64,
    pub gamma_i: f64,
    pub gamma_p: f64,
    pub gamma_d: f64,
}

impl VendorParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        d_inf: f64,
        eps_d: f64,
        eps_f: f64,
        gamma_i: f64,
        gamma_p: f64,
        gamma_d: f64,
    ) -> Result<Self, ModelError> {
        let p = Self {
            alpha,
            beta,
            d_inf,
            eps_d,
            eps_f,
            gamma_i,
            gamma_p,
            gamma_d,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with the dead-beat gains `γ_P = 1 + α - β`,
    /// `γ_I = (1-β)²/(1-α)` that put both closed-loop poles at zero.
    pub fn with_deadbeat_gains(
        alpha: f64,
        beta: f64,
        d_inf: f64,
        eps_d: f64,
        eps_f: f64,
        gamma_d: f64,
    ) -> Result<Self, ModelError> {
        let (gamma_i, gamma_p) = deadbeat_gains(alpha, beta);
        Self::new(alpha, beta, d_inf, eps_d, eps_f, gamma_i, gamma_p, gamma_d)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |name, value, reason| Err(ModelError::InvalidParam { name, value, reason });
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("d_inf", self.d_inf),
            ("eps_d", self.eps_d),
            ("eps_f", self.eps_f),
            ("gamma_I", self.gamma_i),
            ("gamma_P", self.gamma_p),
            ("gamma_D", self.gamma_d),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return bad(name, value, "must be finite");
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", self.alpha, "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta", self.beta, "must lie in [0, 1]");
        }
        if self.d_inf <= 0.0 {
            return bad("d_inf", self.d_inf, "must be positive");
        }
        if self.eps_d < 0.0 {
            return bad("eps_d", self.eps_d, "must be non-negative");
        }
        if self.eps_f < 0.0 {
            return bad("eps_f", self.eps_f, "must be non-negative");
        }
        Ok(())
    }

    /// Scale that normalizes the disturbance box into the unit ball.
    pub fn eps_hat(&self) -> f64 {
        eps_hat(self.eps_d, self.eps_f)
    }
}

/// `(γ_I, γ_P)` placing both steady-state closed-loop poles at the origin.
pub fn deadbeat_gains(alpha: f64, beta: f64) -> (f64, f64) {
    let gamma_p = 1.0 + alpha - beta;
    let gamma_i = (1.0 - beta) * (1.0 - beta) / (1.0 - alpha);
    (gamma_i, gamma_p)
}

/// `√(ε_f² + (ε_d + ε_f)²)`.
pub fn eps_hat(eps_d: f64, eps_f: f64) -> f64 {
    eps_f.hypot(eps_d + eps_f)
}

/// Equilibrium reached under perfect forecasts and stationary demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub i_inf: f64,
    pub p_inf: f64,
    pub o_inf: f64,
    pub d_inf: f64,
}

impl SteadyState {
    fn min_value(&self) -> f64 {
        self.i_inf.min(self.p_inf).min(self.o_inf).min(self.d_inf)
    }
}

/// Solves `[[β, α-1], [γ_I, 1-α+γ_P]] (i, p)ᵀ = (-1, γ_D)ᵀ d∞`.
pub fn steady_state(params: &VendorParams) -> Result<SteadyState, ModelError> {
    params.validate()?;
    let VendorParams {
        alpha,
        beta,
        d_inf,
        gamma_i,
        gamma_p,
        gamma_d,
        ..
    } = *params;
    let (m11, m12) = (beta, alpha - 1.0);
    let (m21, m22) = (gamma_i, 1.0 - alpha + gamma_p);
    let det = m11 * m22 - m12 * m21;
    if det.abs() <= SINGULAR_DET_TOL {
        return Err(ModelError::SingularEquilibrium(det.abs()));
    }
    let (r1, r2) = (-d_inf, gamma_d * d_inf);
    let i_inf = (r1 * m22 - m12 * r2) / det;
    let p_inf = (m11 * r2 - m21 * r1) / det;
    let o_inf = -gamma_i * i_inf - gamma_p * p_inf + gamma_d * d_inf;
    Ok(SteadyState {
        i_inf,
        p_inf,
        o_inf,
        d_inf,
    })
}

/// Poles of the steady-state closed loop `[[1-β, 1-α], [-γ_I, α-γ_P]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub spectral_radius: f64,
    pub stable: bool,
}

/// Closed-form poles of the steady-state loop.
///
/// With `a = γ_P - α` and `b = β - 1` the characteristic polynomial is
/// `z² + (a+b) z + ab + γ_I(1-α)`, so
/// `z± = (-(a+b) ± √((a-b)² - 4γ_I(1-α))) / 2`. `γ_D` only scales the
/// exogenous input and does not enter.
///
/// A discriminant smaller than its own rounding error is snapped to zero:
/// gains meant to produce a double pole would otherwise split it by
/// `√ε ≈ 1e-8`.
pub fn stability(params: &VendorParams) -> StabilityReport {
    let a = params.gamma_p - params.alpha;
    let b = params.beta - 1.0;
    let c = params.gamma_i * (1.0 - params.alpha);
    let diff = a - b;
    let sq = diff * diff;
    let mut disc = sq - 4.0 * c;
    let noise = 16.0 * f64::EPSILON * (sq + 4.0 * c.abs());
    if disc.abs() <= noise {
        disc = 0.0;
    }
    let half_sum = -0.5 * (a + b);
    let root = Complex64::new(disc, 0.0).sqrt() * 0.5;
    let lambda_plus = Complex64::new(half_sum, 0.0) + root;
    let lambda_minus = Complex64::new(half_sum, 0.0) - root;
    let spectral_radius = lambda_plus.norm().max(lambda_minus.norm());
    StabilityReport {
        lambda_plus,
        lambda_minus,
        spectral_radius,
        stable: spectral_radius < 1.0,
    }
}

/// The 2×2 steady-state closed-loop matrix.
pub fn steady_closed_loop(params: &VendorParams) -> Matrix {
    Matrix::from_rows(&[
        [1.0 - params.beta, 1.0 - params.alpha],
        [-params.gamma_i, params.alpha - params.gamma_p],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityCheck {
    pub positive: bool,
    pub values: SteadyState,
}

/// Strict positivity of the steady inventory, pipeline and order.
pub fn check_assumption3(params: &VendorParams) -> Result<PositivityCheck, ModelError> {
    let values = steady_state(params)?;
    let positive = values.i_inf > 0.0 && values.p_inf > 0.0 && values.o_inf > 0.0;
    Ok(PositivityCheck { positive, values })
}

/// `min(d∞, i∞, p∞, o∞) ≥ factor · (ε_d + ε_f)`.
pub fn check_assumption4(params: &VendorParams, factor: f64) -> Result<bool, ModelError> {
    let ss = steady_state(params)?;
    Ok(ss.min_value() >= factor * (params.eps_d + params.eps_f))
}

/// Rank test on `[B, AB] = [[0, 1-α], [1, α]]` of the two-state loop.
pub fn controllability_ok(alpha: f64) -> Result<bool, ModelError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(ModelError::InvalidParam {
            name: "alpha",
            value: alpha,
            reason: "controllability is defined for alpha in [0, 1)",
        });
    }
    let det = 0.0 * alpha - (1.0 - alpha) * 1.0;
    Ok(det.abs() > SINGULAR_DET_TOL)
}

/// Shifted three-state plant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantMatrices {
    pub a: Matrix,
    pub b: Matrix,
    pub b_w: Matrix,
    pub eps_hat: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn build_plant(params: &VendorParams) -> PlantMatrices {
    plant_for_rates(params.alpha, params.beta, params.eps_hat())
}

/// Plant for given rates and disturbance scale; the gains do not enter.
pub fn plant_for_rates(alpha: f64, beta: f64, eps_hat: f64) -> PlantMatrices {
    PlantMatrices {
        a: Matrix::from_rows(&[
            [1.0 - beta, 1.0 - alpha, -1.0],
            [0.0, alpha, 0.0],
            [0.0, 0.0, 0.0],
        ]),
        b: Matrix::column(&[0.0, 1.0, 0.0]),
        b_w: Matrix::from_rows(&[[-1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]),
        eps_hat,
        alpha,
        beta,
    }
}

impl PlantMatrices {
    /// Same dynamics with a different disturbance scale.
    pub fn with_eps_hat(&self, eps_hat: f64) -> Self {
        Self {
            eps_hat,
            ..self.clone()
        }
    }

    /// One step of `x⁺ = A x + B u + B_w w`.
    pub fn step(&self, x: &[f64; 3], u: f64, w: &[f64; 2]) -> [f64; 3] {
        let mut next = [0.0; 3];
        for (r, n) in next.iter_mut().enumerate() {
            *n = self.a[(r, 0)] * x[0]
                + self.a[(r, 1)] * x[1]
                + self.a[(r, 2)] * x[2]
                + self.b[(r, 0)] * u
                + self.b_w[(r, 0)] * w[0]
                + self.b_w[(r, 1)] * w[1];
        }
        next
    }
}

/// Admissible instantaneous disturbances `|w1| ≤ ε_f`, `|w2| ≤ ε_d + ε_f`,
/// optionally normalized by `ε̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceBox {
    pub w1_bound: f64,
    pub w2_bound: f64,
    pub scaled: bool,
}

impl DisturbanceBox {
    pub fn unscaled(eps_d: f64, eps_f: f64) -> Self {
        Self {
            w1_bound: eps_f,
            w2_bound: eps_d + eps_f,
            scaled: false,
        }
    }

    /// The box divided by `ε̂`. The degenerate box `ε̂ = 0` stays `{0}`.
    pub fn scaled(eps_d: f64, eps_f: f64) -> Self {
        let s = eps_hat(eps_d, eps_f);
        let raw = Self::unscaled(eps_d, eps_f);
        if s == 0.0 {
            return Self { scaled: true, ..raw };
        }
        Self {
            w1_bound: raw.w1_bound / s,
            w2_bound: raw.w2_bound / s,
            scaled: true,
        }
    }

    pub fn for_params(params: &VendorParams) -> Self {
        Self::unscaled(params.eps_d, params.eps_f)
    }

    pub fn contains(&self, w: &[f64; 2]) -> bool {
        w[0].abs() <= self.w1_bound && w[1].abs() <= self.w2_bound
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (a, b) = (self.w1_bound, self.w2_bound);
        [[a, b], [a, -b], [-a, b], [-a, -b]]
    }
}
