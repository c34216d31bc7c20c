//! The four experiment commands.

use std::io::Write;
use std::path::{Path, PathBuf};

use bullwhip_core::model::{
    build_plant, check_assumption3, check_assumption4, controllability_ok, plant_for_rates,
    stability, steady_state, DisturbanceBox, ModelError,
};
use bullwhip_core::sdp::SolveStatus;
use bullwhip_core::simulate::{run_trials, sweep_forecast_error, SimError, TrialSpec};
use bullwhip_core::synthesis::{
    eval_f, minimize_f, minimize_over_grid, support_peak, Controller, SynthesisError,
};
use bullwhip_core::{PlantMatrices, VendorParams};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{sorted_unique, ConfigError, RunConfig};
use crate::output::{self, SweepRow, TableError};
use crate::svg::{Chart, Series};

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: TableError },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("synthesis: {0}")]
    Synthesis(#[from] SynthesisError),
    #[error("simulation: {0}")]
    Simulation(#[from] SimError),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Io { .. } | CmdError::Table { .. } | CmdError::Model(_) => 1,
            CmdError::Synthesis(SynthesisError::NoFeasibleLambda { numerical: 0, .. }) => 3,
            CmdError::Synthesis(SynthesisError::InvalidSetting(_)) => 2,
            CmdError::Synthesis(_) => 4,
            CmdError::Simulation(SimError::Diverged { .. }) => 5,
            CmdError::Simulation(SimError::InvalidSetting(_)) => 2,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CmdError {
    CmdError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn table<T>(path: &Path, r: Result<T, TableError>) -> Result<T, CmdError> {
    r.map_err(|source| CmdError::Table {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_dir(dir: &Path) -> Result<(), CmdError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_svg(path: &Path, chart: &Chart) -> Result<(), CmdError> {
    std::fs::write(path, chart.render()).map_err(|e| io_err(path, e))
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) {
    // A closed stdout is not worth failing a finished computation over.
    let _ = writeln!(out, "{line}");
}

/// What `analyze` found; the command succeeds only if `passes()`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeReport {
    pub stable: bool,
    pub assumption3: bool,
    pub assumption4: bool,
    pub controllable: bool,
}

impl AnalyzeReport {
    pub fn passes(&self) -> bool {
        self.stable && self.assumption3 && self.assumption4 && self.controllable
    }
}

pub fn cmd_analyze(cfg: &RunConfig, out: &mut dyn Write) -> Result<AnalyzeReport, CmdError> {
    cfg.validate()?;
    let v = cfg.vendor()?;
    say(
        out,
        format_args!(
            "vendor: alpha={} beta={} gamma_I={} gamma_P={} gamma_D={}",
            v.alpha, v.beta, v.gamma_i, v.gamma_p, v.gamma_d
        ),
    );
    let st = stability(&v);
    say(
        out,
        format_args!(
            "eigenvalues: lambda+ = {:.6e}{:+.6e}i, lambda- = {:.6e}{:+.6e}i, spectral radius {:.6e}",
            st.lambda_plus.re, st.lambda_plus.im, st.lambda_minus.re, st.lambda_minus.im,
            st.spectral_radius
        ),
    );
    say(
        out,
        format_args!("{}", if st.stable { "stable" } else { "not stable" }),
    );
    let a3 = check_assumption3(&v)?;
    let ss = a3.values;
    say(
        out,
        format_args!(
            "steady state: i={:.6e} p={:.6e} o={:.6e} d={:.6e}",
            ss.i_inf, ss.p_inf, ss.o_inf, ss.d_inf
        ),
    );
    say(
        out,
        format_args!(
            "{}",
            if a3.positive {
                "Assumption 3 holds"
            } else {
                "Assumption 3 fails"
            }
        ),
    );
    let a4 = check_assumption4(&v, cfg.assumption4_factor)?;
    say(
        out,
        format_args!(
            "Assumption 4 {} (factor {})",
            if a4 { "holds" } else { "fails" },
            cfg.assumption4_factor
        ),
    );
    let ctrl = controllability_ok(v.alpha)?;
    say(
        out,
        format_args!(
            "{}",
            if ctrl {
                "controllable"
            } else {
                "not controllable"
            }
        ),
    );
    Ok(AnalyzeReport {
        stable: st.stable,
        assumption3: a3.positive,
        assumption4: a4,
        controllable: ctrl,
    })
}

/// Controller for the configured vendor, optimized over `lambda_grid` when
/// given and over the whole window otherwise.
pub fn synthesize(cfg: &RunConfig) -> Result<(VendorParams, PlantMatrices, Controller), CmdError> {
    cfg.validate()?;
    let v = cfg.vendor()?;
    let plant = build_plant(&v);
    let search = cfg.search();
    let c = match &cfg.lambda_grid {
        Some(grid) => minimize_over_grid(&plant, &sorted_unique(grid.clone()), &search)?,
        None => minimize_f(&plant, &search)?,
    };
    Ok((v, plant, c))
}

pub fn cmd_synth(cfg: &RunConfig, out: &mut dyn Write) -> Result<Controller, CmdError> {
    let (_, _, c) = synthesize(cfg)?;
    prepare_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("controller.csv");
    table(&path, output::write_controller(&path, &c))?;
    say(
        out,
        format_args!(
            "lambda* = {:.6e}, gamma* = {:.6e}, F_x = [{:.6e}, {:.6e}, {:.6e}], feedthrough = {:.6e}",
            c.lambda_star,
            c.gamma_star,
            c.f_x[0],
            c.f_x[1],
            c.f_x[2],
            c.feedthrough()
        ),
    );
    if !c.peak_certified() {
        say(
            out,
            format_args!(
                "warning: sigma = {:.6e} > 1, so gamma* does not certify the order peak with {} extraction",
                c.sigma, c.extraction_mode
            ),
        );
    }
    say(out, format_args!("W_T bound: {:.6e}", c.wt_bound));
    say(out, format_args!("wrote {}", path.display()));
    Ok(c)
}

/// One row per `(α, β, λ)` in ascending order. Failed solves become rows.
pub fn sweep_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>, CmdError> {
    cfg.validate()?;
    let opts = cfg.solver();
    let lambdas = cfg.lambdas();
    let mut jobs = Vec::new();
    for a in cfg.alphas() {
        for b in cfg.betas() {
            for &l in &lambdas {
                jobs.push((a, b, l));
            }
        }
    }
    let timing = cfg.timing;
    Ok(jobs
        .par_iter()
        .map(|&(alpha, beta, lambda)| {
            let e = eval_f(&plant_for_rates(alpha, beta, 1.0), lambda, &opts);
            SweepRow {
                alpha,
                beta,
                lambda,
                status: e.status,
                gamma: e.gamma,
                iterations: e.iterations,
                solve_ms: if timing {
                    e.elapsed.as_secs_f64() * 1e3
                } else {
                    0.0
                },
            }
        })
        .collect())
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<Vec<SweepRow>, CmdError> {
    let rows = sweep_rows(cfg)?;
    prepare_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("sweep.csv");
    table(&path, output::write_sweep(&path, &rows))?;
    let optimal = rows
        .iter()
        .filter(|r| r.status == SolveStatus::Optimal)
        .count();
    say(
        out,
        format_args!("{} rows, {} optimal; wrote {}", rows.len(), optimal, path.display()),
    );
    if cfg.emit_svg {
        let mut series: Vec<Series> = Vec::new();
        for r in &rows {
            let label = format!("alpha={} beta={}", r.alpha, r.beta);
            if series.last().map(|s| &s.label) != Some(&label) {
                series.push(Series {
                    label,
                    points: Vec::new(),
                });
            }
            let y = r.gamma.unwrap_or(f64::NAN);
            series.last_mut().unwrap().points.push((r.lambda, y));
        }
        let chart = Chart {
            title: "peak gain versus lambda".into(),
            x_label: "lambda".into(),
            y_label: "gamma".into(),
            log_y: true,
            series,
        };
        write_svg(&cfg.output_dir.join("sweep.svg"), &chart)?;
    }
    Ok(rows)
}

/// Summary of a `simulate` run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub peak_order: f64,
    pub wt_bound: f64,
    pub support_peak: f64,
    pub max_ellipsoid_level: f64,
    pub all_inside: bool,
}

pub fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<SimulateSummary, CmdError> {
    cfg.validate()?;
    let (v, plant, c) = match &cfg.controller {
        Some(path) => {
            let v = cfg.vendor()?;
            let c = table(path, output::read_controller(path, v.eps_hat()))?;
            (v, build_plant(&v), c)
        }
        None => synthesize(cfg)?,
    };
    let steady = steady_state(&v)?;
    let policy = cfg.policy();
    let bx = DisturbanceBox::for_params(&v);
    let spec = TrialSpec {
        policy,
        bx,
        horizon: cfg.horizon,
        trials: cfg.trials,
        init_scale: cfg.init_scale,
    };
    let runs = run_trials(&plant, &c, &steady, &spec)?;
    let grid = sorted_unique(cfg.eps_f_grid.clone());
    let forecast = sweep_forecast_error(
        &v,
        &plant,
        &c,
        &steady,
        &grid,
        policy,
        cfg.horizon,
        cfg.trials,
        cfg.init_scale,
    )?;

    prepare_dir(&cfg.output_dir)?;
    let dir = &cfg.output_dir;
    let trace_path = dir.join("trace.csv");
    table(&trace_path, output::write_trace(&trace_path, &runs[0].0))?;
    let reports: Vec<_> = runs.iter().map(|(_, m)| m.clone()).collect();
    let metrics_path = dir.join("metrics.csv");
    table(&metrics_path, output::write_metrics(&metrics_path, &reports))?;
    let forecast_path = dir.join("forecast_sweep.csv");
    table(&forecast_path, output::write_forecast(&forecast_path, &forecast))?;

    let summary = SimulateSummary {
        peak_order: reports.iter().map(|m| m.peak_order).fold(0.0, f64::max),
        wt_bound: c.wt_bound,
        support_peak: support_peak(&c, &bx),
        max_ellipsoid_level: reports
            .iter()
            .map(|m| m.max_ellipsoid_level)
            .fold(0.0, f64::max),
        all_inside: reports.iter().all(|m| m.ellipsoid_ok),
    };
    say(
        out,
        format_args!(
            "{} trials x {} steps ({}): peak |o - o_inf| = {:.6e}, support peak = {:.6e}, W_T bound = {:.6e}",
            cfg.trials, cfg.horizon, policy.kind, summary.peak_order, summary.support_peak, summary.wt_bound
        ),
    );
    say(
        out,
        format_args!(
            "max ellipsoid level = {:.6e} ({})",
            summary.max_ellipsoid_level,
            if summary.all_inside { "inside" } else { "ESCAPED" }
        ),
    );
    let neg: usize = reports
        .iter()
        .map(|m| m.negativity.inventory + m.negativity.pipeline + m.negativity.orders)
        .sum();
    if neg > 0 {
        say(
            out,
            format_args!("warning: {neg} steps with a negative inventory, pipeline or order"),
        );
    }
    say(out, format_args!("wrote {}, {}, {}", trace_path.display(), metrics_path.display(), forecast_path.display()));

    if cfg.emit_svg {
        let trace = &runs[0].0;
        let pts = |f: &dyn Fn(&bullwhip_core::simulate::TraceRecord) -> f64| {
            trace.records.iter().map(|r| (r.k as f64, f(r))).collect::<Vec<_>>()
        };
        let n = trace.records.len().saturating_sub(1) as f64;
        write_svg(
            &dir.join("trace.svg"),
            &Chart {
                title: "order deviation, trial 0".into(),
                x_label: "k".into(),
                y_label: "o - o_inf".into(),
                log_y: false,
                series: vec![
                    Series {
                        label: "o - o_inf".into(),
                        points: pts(&|r| r.o - steady.o_inf),
                    },
                    Series {
                        label: "+W_T bound".into(),
                        points: vec![(0.0, c.wt_bound), (n, c.wt_bound)],
                    },
                    Series {
                        label: "-W_T bound".into(),
                        points: vec![(0.0, -c.wt_bound), (n, -c.wt_bound)],
                    },
                ],
            },
        )?;
        let col = |f: fn(&bullwhip_core::simulate::ForecastRow) -> f64| {
            forecast.iter().map(|r| (r.eps_f, f(r))).collect::<Vec<_>>()
        };
        write_svg(
            &dir.join("forecast_sweep.svg"),
            &Chart {
                title: "peak order versus forecast error".into(),
                x_label: "eps_f".into(),
                y_label: "order deviation".into(),
                log_y: false,
                series: vec![
                    Series {
                        label: "peak order".into(),
                        points: col(|r| r.peak_order),
                    },
                    Series {
                        label: "W_T bound".into(),
                        points: col(|r| r.wt_bound),
                    },
                ],
            },
        )?;
        write_svg(
            &dir.join("forecast_inventory.svg"),
            &Chart {
                title: "peak inventory versus forecast error".into(),
                x_label: "eps_f".into(),
                y_label: "inventory deviation".into(),
                log_y: false,
                series: vec![Series {
                    label: "peak inventory".into(),
                    points: col(|r| r.peak_inventory),
                }],
            },
        )?;
    }
    Ok(summary)
}
