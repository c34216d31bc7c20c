//! CSV tables written and read by the commands.

use std::path::Path;

use bullwhip_core::linalg::Matrix;
use bullwhip_core::sdp::SolveStatus;
use bullwhip_core::simulate::{ForecastRow, MetricsReport, SimTrace};
use bullwhip_core::synthesis::{Controller, ExtractionMode};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}, column `{column}`: {msg}")]
    Field {
        row: usize,
        column: String,
        msg: String,
    },
}

pub const CONTROLLER_HEADER: &[&str] = &[
    "f_x1",
    "f_x2",
    "f_x3",
    "g_w",
    "sigma",
    "lambda",
    "gamma",
    "wt_bound",
    "extraction_mode",
    "p11",
    "p12",
    "p13",
    "p21",
    "p22",
    "p23",
    "p31",
    "p32",
    "p33",
];
pub const SWEEP_HEADER: &[&str] = &[
    "alpha",
    "beta",
    "lambda",
    "status",
    "gamma",
    "iterations",
    "solve_ms",
];
pub const TRACE_HEADER: &[&str] = &[
    "k", "i", "p", "o", "d", "f", "x1", "x2", "x3", "w1", "w2", "u",
];
pub const METRICS_HEADER: &[&str] = &[
    "trial",
    "peak_order",
    "peak_inventory",
    "energy_ratio",
    "energy_unbounded",
    "wt_bound",
    "ellipsoid_ok",
    "max_ellipsoid_level",
    "negative_inventory",
    "negative_pipeline",
    "negative_orders",
];
pub const FORECAST_HEADER: &[&str] = &["eps_f", "peak_order", "peak_inventory", "wt_bound"];

/// 17 significant digits, enough to round-trip every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), TableError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table and checks its header exactly.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>, TableError> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if found != header {
        return Err(TableError::Header {
            expected: header.join(","),
            found: found.join(","),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(
    row: &[String],
    header: &[&str],
    idx: usize,
    line: usize,
) -> Result<T, TableError> {
    row[idx].parse().map_err(|_| TableError::Field {
        row: line,
        column: header[idx].into(),
        msg: format!("cannot parse `{}`", row[idx]),
    })
}

pub fn write_controller(path: &Path, c: &Controller) -> Result<(), TableError> {
    let mut row = vec![
        fmt_f64(c.f_x[0]),
        fmt_f64(c.f_x[1]),
        fmt_f64(c.f_x[2]),
        fmt_f64(c.g_w),
        fmt_f64(c.sigma),
        fmt_f64(c.lambda_star),
        fmt_f64(c.gamma_star),
        fmt_f64(c.wt_bound),
        c.extraction_mode.to_string(),
    ];
    row.extend(c.p.as_slice().iter().map(|&v| fmt_f64(v)));
    write_table(path, CONTROLLER_HEADER, &[row])
}

/// Loads a controller and rescales its bound to `eps_hat`.
pub fn read_controller(path: &Path, eps_hat: f64) -> Result<Controller, TableError> {
    let rows = read_table(path, CONTROLLER_HEADER)?;
    let [row] = rows.as_slice() else {
        return Err(TableError::Field {
            row: 0,
            column: "f_x1".into(),
            msg: format!("expected exactly one controller row, found {}", rows.len()),
        });
    };
    let h = CONTROLLER_HEADER;
    let f = |i| field::<f64>(row, h, i, 1);
    let mode: ExtractionMode = field(row, h, 8, 1)?;
    let p: Vec<f64> = (9..18).map(f).collect::<Result<_, _>>()?;
    let p = Matrix::from_vec(3, 3, p).map_err(|e| TableError::Field {
        row: 1,
        column: "p11".into(),
        msg: e.to_string(),
    })?;
    Controller::from_parts([f(0)?, f(1)?, f(2)?], f(3)?, f(4)?, p, f(5)?, f(6)?, mode, eps_hat)
        .map_err(|e| TableError::Field {
            row: 1,
            column: "p11".into(),
            msg: e.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub status: SolveStatus,
    /// Present exactly when the solve is optimal.
    pub gamma: Option<f64>,
    pub iterations: usize,
    pub solve_ms: f64,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), TableError> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.alpha),
                fmt_f64(r.beta),
                fmt_f64(r.lambda),
                r.status.to_string(),
                r.gamma.map(fmt_f64).unwrap_or_default(),
                r.iterations.to_string(),
                fmt_f64(r.solve_ms),
            ]
        })
        .collect();
    write_table(path, SWEEP_HEADER, &table)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, TableError> {
    let h = SWEEP_HEADER;
    read_table(path, h)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 1;
            let status: SolveStatus = field(row, h, 3, line)?;
            let gamma = if row[4].is_empty() {
                None
            } else {
                Some(field(row, h, 4, line)?)
            };
            if gamma.is_some() != (status == SolveStatus::Optimal) {
                return Err(TableError::Field {
                    row: line,
                    column: "gamma".into(),
                    msg: "gamma must be present exactly for Optimal rows".into(),
                });
            }
            Ok(SweepRow {
                alpha: field(row, h, 0, line)?,
                beta: field(row, h, 1, line)?,
                lambda: field(row, h, 2, line)?,
                status,
                gamma,
                iterations: field(row, h, 5, line)?,
                solve_ms: field(row, h, 6, line)?,
            })
        })
        .collect()
}

pub fn write_trace(path: &Path, trace: &SimTrace) -> Result<(), TableError> {
    let table: Vec<Vec<String>> = trace
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.k.to_string()];
            row.extend(
                [
                    r.i, r.p, r.o, r.d, r.f, r.x[0], r.x[1], r.x[2], r.w[0], r.w[1], r.u,
                ]
                .map(fmt_f64),
            );
            row
        })
        .collect();
    write_table(path, TRACE_HEADER, &table)
}

/// Trace rows as `k` followed by the eleven numeric columns.
pub fn read_trace(path: &Path) -> Result<Vec<(usize, [f64; 11])>, TableError> {
    let h = TRACE_HEADER;
    read_table(path, h)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut vals = [0.0; 11];
            for (j, v) in vals.iter_mut().enumerate() {
                *v = field(row, h, j + 1, i + 1)?;
            }
            Ok((field(row, h, 0, i + 1)?, vals))
        })
        .collect()
}

pub fn write_metrics(path: &Path, reports: &[MetricsReport]) -> Result<(), TableError> {
    let table: Vec<Vec<String>> = reports
        .iter()
        .enumerate()
        .map(|(t, m)| {
            vec![
                t.to_string(),
                fmt_f64(m.peak_order),
                fmt_f64(m.peak_inventory),
                fmt_f64(m.energy_ratio),
                m.energy_unbounded.to_string(),
                fmt_f64(m.wt_bound),
                m.ellipsoid_ok.to_string(),
                fmt_f64(m.max_ellipsoid_level),
                m.negativity.inventory.to_string(),
                m.negativity.pipeline.to_string(),
                m.negativity.orders.to_string(),
            ]
        })
        .collect();
    write_table(path, METRICS_HEADER, &table)
}

pub fn read_metrics(path: &Path) -> Result<Vec<Vec<String>>, TableError> {
    let h = METRICS_HEADER;
    let rows = read_table(path, h)?;
    for (i, row) in rows.iter().enumerate() {
        for j in [1, 2, 3, 5, 7] {
            field::<f64>(row, h, j, i + 1)?;
        }
        for j in [4, 6] {
            field::<bool>(row, h, j, i + 1)?;
        }
        for j in [0, 8, 9, 10] {
            field::<usize>(row, h, j, i + 1)?;
        }
    }
    Ok(rows)
}

pub fn write_forecast(path: &Path, rows: &[ForecastRow]) -> Result<(), TableError> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| [r.eps_f, r.peak_order, r.peak_inventory, r.wt_bound].map(fmt_f64).to_vec())
        .collect();
    write_table(path, FORECAST_HEADER, &table)
}

pub fn read_forecast(path: &Path) -> Result<Vec<ForecastRow>, TableError> {
    let h = FORECAST_HEADER;
    read_table(path, h)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(ForecastRow {
                eps_f: field(row, h, 0, i + 1)?,
                peak_order: field(row, h, 1, i + 1)?,
                peak_inventory: field(row, h, 2, i + 1)?,
                wt_bound: field(row, h, 3, i + 1)?,
            })
        })
        .collect()
}
