//! CSV writers for trajectories, schedules, training logs and datasets.
//!
//! Floats are written in shortest round-trip scientific notation, so a file
//! read back yields bit-identical values and reruns are byte-identical.

use std::path::Path;

use ctap_core::agent::EpochRecord;
use ctap_core::analysis::TransitionDataset;
use ctap_core::env::{action_labels, state_labels};
use ctap_core::pulses::PulseSchedule;
use ctap_core::quantum::Trajectory;

use crate::error::{Result, WorkbenchError};

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn csv_err(path: &Path, e: csv::Error) -> WorkbenchError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => WorkbenchError::io(path, io),
        other => WorkbenchError::config(path, format!("{other:?}")),
    }
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| WorkbenchError::io(path, e))
}

/// `t`, the dot-block state, the vacuum population when loss is modelled,
/// and the full trace.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let first = traj.final_state();
    let n = first.n_dots();
    let vacuum = first.include_vacuum();
    let mut header = vec!["t".to_string()];
    header.extend(state_labels(n));
    if vacuum {
        header.push("rho00".into());
    }
    header.push("trace".into());
    let rows = traj.times.iter().zip(&traj.states).map(|(&t, s)| {
        let mut row = vec![num(t)];
        row.extend(ctap_core::env::state_features(s).into_iter().map(num));
        if vacuum {
            row.push(num(s.vacuum_population()));
        }
        row.push(num(s.trace()));
        row
    });
    write_rows(path, &header, rows)
}

/// One row per control interval: index, start and end time, controls.
pub fn write_schedule(path: &Path, schedule: &PulseSchedule) -> Result<()> {
    let n_dots = if schedule.n_channels() == 2 { 3 } else { 5 };
    let mut header = vec!["step".to_string(), "t_start".into(), "t_end".into()];
    header.extend(action_labels(n_dots));
    let dt = schedule.dt();
    let rows = (0..schedule.n_steps()).map(|k| {
        let mut row = vec![k.to_string(), num(k as f64 * dt), num((k + 1) as f64 * dt)];
        row.extend(schedule.controls_at(k).into_iter().map(num));
        row
    });
    write_rows(path, &header, rows)
}

pub const TRAINING_LOG_HEADER: [&str; 8] =
    ["epoch", "mean_return", "mean_final_rho33", "max_rho22", "kl", "accepted", "eval_final_rho33", "eval_max_rho22"];

pub fn write_training_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let header: Vec<String> = TRAINING_LOG_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = log.iter().map(|r| {
        vec![
            r.epoch.to_string(),
            num(r.mean_return),
            num(r.mean_final_fidelity),
            num(r.max_rho22),
            num(r.kl),
            u8::from(r.accepted).to_string(),
            num(r.eval_final_fidelity),
            num(r.eval_max_rho22),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_dataset(path: &Path, ds: &TransitionDataset) -> Result<()> {
    let rows = (0..ds.n_rows()).map(|r| ds.row(r).into_iter().map(num).collect());
    write_rows(path, ds.columns(), rows)
}

pub fn read_dataset(path: &Path) -> Result<TransitionDataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| WorkbenchError::config(path, e.to_string()))?;
    let columns: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.trim().parse::<f64>().map_err(|_| {
                    WorkbenchError::config(path, format!("line {}: column `{}` holds `{v}`, not a number", i + 2, columns[j]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    TransitionDataset::from_rows(columns, &rows).map_err(|e| WorkbenchError::config(path, e.to_string()))
}
