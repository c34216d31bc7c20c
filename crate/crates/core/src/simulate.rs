//! Closed-loop simulation of the shifted plant under bounded demand and
//! forecast disturbances, and the peak and energy bullwhip metrics.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{eps_hat, DisturbanceBox, PlantMatrices, SteadyState, VendorParams};
use crate::synthesis::{random_boundary_point, Controller};

/// Ellipsoid levels up to `1 + ELLIPSOID_TOL` count as inside.
pub const ELLIPSOID_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state became non-finite at step {step}: {state:?}")]
    Diverged { step: usize, state: [f64; 3] },
    #[error("invalid simulation setting: {0}")]
    InvalidSetting(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Each component uniform on its interval.
    UniformBox,
    /// A uniformly chosen corner of the box every step.
    CornerBangBang,
    /// Full-amplitude sinusoids with a random phase per component.
    Sinusoid,
    Zero,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::UniformBox => "UniformBox",
            PolicyKind::CornerBangBang => "CornerBangBang",
            PolicyKind::Sinusoid => "Sinusoid",
            PolicyKind::Zero => "Zero",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "UniformBox" => Ok(PolicyKind::UniformBox),
            "CornerBangBang" => Ok(PolicyKind::CornerBangBang),
            "Sinusoid" => Ok(PolicyKind::Sinusoid),
            "Zero" => Ok(PolicyKind::Zero),
            other => Err(format!("unknown disturbance policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbancePolicy {
    pub kind: PolicyKind,
    pub seed: u64,
    /// Sinusoid period in steps.
    pub period: usize,
}

impl DisturbancePolicy {
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            period: 20,
        }
    }

    /// Generator for one trial, seeded with `seed + trial`.
    pub fn source(&self, bx: DisturbanceBox, trial: u64) -> DisturbanceSource {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(trial));
        let phase = match self.kind {
            PolicyKind::Sinusoid => [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)],
            _ => [0.0; 2],
        };
        DisturbanceSource {
            kind: self.kind,
            period: self.period.max(1),
            bx,
            rng,
            phase,
        }
    }
}

/// Stream of disturbances `(w₁(k), w₂(k))`, always inside its box.
pub struct DisturbanceSource {
    kind: PolicyKind,
    period: usize,
    bx: DisturbanceBox,
    rng: ChaCha8Rng,
    phase: [f64; 2],
}

impl DisturbanceSource {
    pub fn sample(&mut self, k: usize) -> [f64; 2] {
        let b = [self.bx.w1_bound, self.bx.w2_bound];
        match self.kind {
            PolicyKind::Zero => [0.0; 2],
            PolicyKind::UniformBox => {
                let mut w = [0.0; 2];
                for (wi, bi) in w.iter_mut().zip(b) {
                    if bi > 0.0 {
                        *wi = self.rng.gen_range(-bi..=bi);
                    }
                }
                w
            }
            PolicyKind::CornerBangBang => self.bx.corners()[self.rng.gen_range(0..4)],
            PolicyKind::Sinusoid => {
                let arg = 2.0 * PI * k as f64 / self.period as f64;
                [
                    b[0] * (arg + self.phase[0]).sin(),
                    b[1] * (arg + self.phase[1]).sin(),
                ]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub i: f64,
    pub p: f64,
    pub o: f64,
    pub d: f64,
    pub f: f64,
    pub x: [f64; 3],
    pub w: [f64; 2],
    pub u: f64,
}

/// Per-step record of a run. `x`, `w` and `u` are shifted quantities; `i`,
/// `p`, `o`, `d` and `f` add back the equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
    pub steady: SteadyState,
    /// Scale that maps the simulated coordinates onto the ellipsoid's.
    pub ellipsoid_scale: f64,
}

impl SimTrace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }
}

/// Simulates `x(k+1) = A x + B u + B_w w` with `u = F_x x + feedthrough·w₂`.
///
/// Coordinates follow `bx`: with a scaled box the run lives in the
/// ellipsoid's own coordinates, otherwise the ellipsoid is stretched by the
/// controller's `ε̂`. Demand is recorded as `d(k) = d∞ + w₁(k) + w₂(k-2)`
/// (missing terms count as zero) and the forecast as `f(k) = d∞ + w₂(k)`.
pub fn run(
    plant: &PlantMatrices,
    controller: &Controller,
    steady: &SteadyState,
    bx: DisturbanceBox,
    source: &mut DisturbanceSource,
    horizon: usize,
    x0: [f64; 3],
) -> Result<SimTrace, SimError> {
    if horizon == 0 {
        return Err(SimError::InvalidSetting("horizon must be at least 1".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::InvalidSetting(format!("initial state {x0:?} is not finite")));
    }
    let mut records = Vec::with_capacity(horizon);
    let mut x = x0;
    let mut w2_hist = [0.0; 2];
    for k in 0..horizon {
        let w = source.sample(k);
        let u = controller.control(&x, &w);
        let w2_lag2 = if k >= 2 { w2_hist[k % 2] } else { 0.0 };
        records.push(TraceRecord {
            k,
            i: x[0] + steady.i_inf,
            p: x[1] + steady.p_inf,
            o: u + steady.o_inf,
            d: steady.d_inf + w[0] + w2_lag2,
            f: steady.d_inf + w[1],
            x,
            w,
            u,
        });
        w2_hist[k % 2] = w[1];
        x = plant.step(&x, u, &w);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Diverged { step: k + 1, state: x });
        }
    }
    Ok(SimTrace {
        records,
        steady: *steady,
        ellipsoid_scale: if bx.scaled { 1.0 } else { controller.eps_hat },
    })
}

/// `x₀` on the ellipsoid boundary shrunk by `scale`, in the coordinates of
/// a run with the given `ellipsoid_scale`.
pub fn initial_state(controller: &Controller, scale: f64, ellipsoid_scale: f64, seed: u64) -> [f64; 3] {
    if scale == 0.0 {
        return [0.0; 3];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_boundary_point(&controller.p, &mut rng);
    x.map(|v| v * scale * ellipsoid_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NegativityCounts {
    pub inventory: usize,
    pub pipeline: usize,
    pub orders: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `max |o(k) - o∞|`.
    pub peak_order: f64,
    /// `max |i(k) - i∞|`.
    pub peak_inventory: f64,
    /// `Σ (o - o∞)² / Σ (d - d∞)²`; `0/0` is 0 and `x/0` is `+∞`.
    pub energy_ratio: f64,
    pub energy_unbounded: bool,
    pub wt_bound: f64,
    pub ellipsoid_ok: bool,
    pub max_ellipsoid_level: f64,
    pub negativity: NegativityCounts,
}

pub fn peak_abs(series: &[f64]) -> f64 {
    series.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Ratio of summed squares with `0/0 → 0` and `x/0 → +∞`.
pub fn energy_ratio(order_dev: &[f64], demand_dev: &[f64]) -> f64 {
    let num: f64 = order_dev.iter().map(|v| v * v).sum();
    let den: f64 = demand_dev.iter().map(|v| v * v).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Ellipsoid level of `x` measured in a run with the given scale.
fn level(controller: &Controller, x: &[f64; 3], scale: f64) -> f64 {
    let raw = controller.level(x);
    if scale == 1.0 {
        raw
    } else if scale > 0.0 {
        raw / (scale * scale)
    } else if raw == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn metrics(trace: &SimTrace, controller: &Controller) -> MetricsReport {
    let order: Vec<f64> = trace.records.iter().map(|r| r.u).collect();
    let inventory: Vec<f64> = trace.records.iter().map(|r| r.x[0]).collect();
    let demand: Vec<f64> = trace
        .records
        .iter()
        .enumerate()
        .map(|(k, r)| r.w[0] + if k >= 2 { trace.records[k - 2].w[1] } else { 0.0 })
        .collect();
    let ratio = energy_ratio(&order, &demand);
    let max_level = trace
        .records
        .iter()
        .map(|r| level(controller, &r.x, trace.ellipsoid_scale))
        .fold(0.0, f64::max);
    let mut neg = NegativityCounts::default();
    for r in &trace.records {
        neg.inventory += usize::from(r.i < 0.0);
        neg.pipeline += usize::from(r.p < 0.0);
        neg.orders += usize::from(r.o < 0.0);
    }
    MetricsReport {
        peak_order: peak_abs(&order),
        peak_inventory: peak_abs(&inventory),
        energy_ratio: ratio,
        energy_unbounded: ratio.is_infinite(),
        wt_bound: controller.wt_bound,
        ellipsoid_ok: max_level <= 1.0 + ELLIPSOID_TOL,
        max_ellipsoid_level: max_level,
        negativity: neg,
    }
}

/// Settings shared by every trial of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub policy: DisturbancePolicy,
    pub bx: DisturbanceBox,
    pub horizon: usize,
    pub trials: usize,
    /// Initial states sit on the ellipsoid boundary shrunk by this factor.
    pub init_scale: f64,
}

/// Runs independent trials in parallel; trial `j` uses seed `seed + j`.
/// Results are returned in trial order.
pub fn run_trials(
    plant: &PlantMatrices,
    controller: &Controller,
    steady: &SteadyState,
    spec: &TrialSpec,
) -> Result<Vec<(SimTrace, MetricsReport)>, SimError> {
    let ellipsoid_scale = if spec.bx.scaled { 1.0 } else { controller.eps_hat };
    (0..spec.trials as u64)
        .into_par_iter()
        .map(|j| {
            let seed = spec.policy.seed.wrapping_add(j);
            let x0 = initial_state(controller, spec.init_scale, ellipsoid_scale, seed);
            let mut source = spec.policy.source(spec.bx, j);
            let trace = run(plant, controller, steady, spec.bx, &mut source, spec.horizon, x0)?;
            let m = metrics(&trace, controller);
            Ok((trace, m))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastRow {
    pub eps_f: f64,
    pub peak_order: f64,
    pub peak_inventory: f64,
    pub wt_bound: f64,
}

/// For each forecast error bound, the worst peaks over `trials` runs in
/// unscaled coordinates and the bound `γ*·ε̂(ε_d, ε_f)`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_forecast_error(
    template: &VendorParams,
    plant: &PlantMatrices,
    controller: &Controller,
    steady: &SteadyState,
    eps_f_grid: &[f64],
    policy: DisturbancePolicy,
    horizon: usize,
    trials: usize,
    init_scale: f64,
) -> Result<Vec<ForecastRow>, SimError> {
    if eps_f_grid.is_empty() {
        return Err(SimError::InvalidSetting("forecast error grid is empty".into()));
    }
    let eps_d = template.eps_d;
    eps_f_grid
        .iter()
        .map(|&eps_f| {
            let c = controller.with_eps_hat(eps_hat(eps_d, eps_f));
            let spec = TrialSpec {
                policy,
                bx: DisturbanceBox::unscaled(eps_d, eps_f),
                horizon,
                trials,
                init_scale,
            };
            let runs = run_trials(plant, &c, steady, &spec)?;
            let (po, pi) = runs.iter().fold((0.0f64, 0.0f64), |(a, b), (_, m)| {
                (a.max(m.peak_order), b.max(m.peak_inventory))
            });
            Ok(ForecastRow {
                eps_f,
                peak_order: po,
                peak_inventory: pi,
                wt_bound: c.wt_bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::plant_for_rates;
    use crate::synthesis::ExtractionMode;

    fn controller(f_x: [f64; 3], g: f64) -> Controller {
        Controller::from_parts(
            f_x,
            g,
            0.5,
            Matrix::identity(3),
            0.1,
            1.0,
            ExtractionMode::Unscaled,
            2.0,
        )
        .unwrap()
    }

    fn steady() -> SteadyState {
        SteadyState {
            i_inf: 80.0,
            p_inf: 120.0,
            o_inf: 108.0,
            d_inf: 100.0,
        }
    }

    #[test]
    fn policies_stay_in_box() {
        let bx = DisturbanceBox::unscaled(3.0, 1.0);
        for kind in [
            PolicyKind::UniformBox,
            PolicyKind::CornerBangBang,
            PolicyKind::Sinusoid,
            PolicyKind::Zero,
        ] {
            let mut src = DisturbancePolicy::new(kind, 7).source(bx, 2);
            for k in 0..500 {
                assert!(bx.contains(&src.sample(k)), "{kind}");
            }
        }
    }

    #[test]
    fn policy_kind_parses() {
        for kind in [
            PolicyKind::UniformBox,
            PolicyKind::CornerBangBang,
            PolicyKind::Sinusoid,
            PolicyKind::Zero,
        ] {
            assert_eq!(kind.to_string().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("uniform".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn zero_policy_from_equilibrium_stays_put() {
        let plant = plant_for_rates(0.1, 0.1, 2.0);
        let c = controller([-0.3, -0.3, 0.3], 0.1);
        let s = steady();
        let bx = DisturbanceBox::unscaled(1.0, 1.0);
        let mut src = DisturbancePolicy::new(PolicyKind::Zero, 0).source(bx, 0);
        let t = run(&plant, &c, &s, bx, &mut src, 50, [0.0; 3]).unwrap();
        for r in &t.records {
            assert_eq!(r.x, [0.0; 3]);
            assert_eq!(r.o, s.o_inf);
        }
        let m = metrics(&t, &c);
        assert_eq!(m.peak_order, 0.0);
        assert_eq!(m.energy_ratio, 0.0);
        assert!(!m.energy_unbounded);
        assert!(m.ellipsoid_ok);
    }

    #[test]
    fn bookkeeping_identities_hold() {
        let plant = plant_for_rates(0.2, 0.3, 2.0);
        let c = controller([-0.1, -0.2, 0.1], 0.3);
        let s = steady();
        let bx = DisturbanceBox::unscaled(5.0, 2.0);
        let mut src = DisturbancePolicy::new(PolicyKind::UniformBox, 11).source(bx, 0);
        let t = run(&plant, &c, &s, bx, &mut src, 200, [1.0, -1.0, 0.5]).unwrap();
        for (k, r) in t.records.iter().enumerate() {
            assert_eq!(r.i, r.x[0] + s.i_inf);
            assert_eq!(r.p, r.x[1] + s.p_inf);
            assert_eq!(r.o, r.u + s.o_inf);
            assert_eq!(r.f, s.d_inf + r.w[1]);
            if k >= 2 {
                assert_eq!(r.d, s.d_inf + r.w[0] + t.records[k - 2].w[1]);
            }
            if k + 1 < t.records.len() {
                let next = plant.step(&r.x, r.u, &r.w);
                assert_eq!(next, t.records[k + 1].x);
            }
        }
    }

    #[test]
    fn free_response_decays() {
        let plant = plant_for_rates(0.1, 0.1, 1.0);
        let c = controller([0.0; 3], 0.0);
        let bx = DisturbanceBox::unscaled(0.0, 0.0);
        let mut src = DisturbancePolicy::new(PolicyKind::Zero, 0).source(bx, 0);
        let t = run(&plant, &c, &steady(), bx, &mut src, 400, [1.0, 1.0, 1.0]).unwrap();
        let n = |x: &[f64; 3]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let last = n(&t.records[399].x);
        // Open-loop spectral radius is 0.9.
        assert!(last < 1e-15, "{last}");
    }

    #[test]
    fn divergence_is_reported() {
        let plant = plant_for_rates(0.1, 0.1, 1.0);
        let c = controller([0.0, 1e200, 0.0], 0.0);
        let bx = DisturbanceBox::unscaled(0.0, 0.0);
        let mut src = DisturbancePolicy::new(PolicyKind::Zero, 0).source(bx, 0);
        let err = run(&plant, &c, &steady(), bx, &mut src, 100, [0.0, 1.0, 0.0]).unwrap_err();
        assert!(matches!(err, SimError::Diverged { .. }));
    }

    #[test]
    fn energy_ratio_conventions() {
        let a = [1.0, -2.0, 3.0];
        assert_eq!(energy_ratio(&a, &a), 1.0);
        assert_eq!(energy_ratio(&[0.0; 3], &[0.0; 3]), 0.0);
        assert_eq!(energy_ratio(&a, &[0.0; 3]), f64::INFINITY);
    }

    #[test]
    fn peak_and_energy_can_disagree() {
        // One large spike against a long moderate oscillation.
        let demand = vec![1.0; 10];
        let spike: Vec<f64> = (0..10).map(|k| if k == 0 { 2.0 } else { 0.0 }).collect();
        let steady_swing = vec![1.5; 10];
        assert!(peak_abs(&spike) > peak_abs(&steady_swing));
        assert!(energy_ratio(&spike, &demand) < energy_ratio(&steady_swing, &demand));
    }

    #[test]
    fn same_seed_same_trace() {
        let plant = plant_for_rates(0.1, 0.1, 2.0);
        let c = controller([-0.3, -0.3, 0.3], 0.1);
        let spec = TrialSpec {
            policy: DisturbancePolicy::new(PolicyKind::UniformBox, 42),
            bx: DisturbanceBox::unscaled(1.0, 1.0),
            horizon: 100,
            trials: 4,
            init_scale: 0.5,
        };
        let a = run_trials(&plant, &c, &steady(), &spec).unwrap();
        let b = run_trials(&plant, &c, &steady(), &spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].0, a[1].0);
    }

    #[test]
    fn initial_state_on_scaled_boundary() {
        let c = controller([0.0; 3], 0.0);
        let x = initial_state(&c, 0.5, 2.0, 9);
        let lvl = c.level(&x) / 4.0;
        assert!((lvl - 0.25).abs() < 1e-12);
        assert_eq!(initial_state(&c, 0.0, 2.0, 9), [0.0; 3]);
    }
}
