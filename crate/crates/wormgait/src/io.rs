//! CSV schemas for every pipeline artifact. Headers are fixed; floats are
//! written with Rust's shortest round-trip formatting so identical runs
//! produce identical bytes.

use crate::actuation::BodyLengthTrace;
use crate::energy::GaitMetrics;
use crate::error::{Error, Result};
use crate::hybrid::{SimTrace, SwitchEvent};
use crate::identify::{FitReport, PowerLog, TrackingLog};
use crate::model::GaitParams;
use crate::optimize::{MarginScanResult, ParetoPoint};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const SIM_TRACE_HEADER: &str = "t,x1,x2,v1,v2,a1,a2,L,F_c";
pub const SWITCH_EVENTS_HEADER: &str = "t,anchor,direction";
pub const BODY_TRACE_HEADER: &str = "t,delta_l,dl_dt,d2l_dt2";
pub const POWER_ENERGY_HEADER: &str = "t,P,E";
pub const METRICS_HEADER: &str = "S,f,delta_m,v_avg,P_avg,cot";
pub const FRONT_HEADER: &str = "S,f,v_avg,P_avg,cot,rank";
pub const SELECTED_HEADER: &str = "role,S,f,v_avg,P_avg,cot";
pub const MARGIN_SCAN_HEADER: &str = "delta_m,optimal_cot,S_opt,f_opt";
pub const MARGIN_SCAN_JPM_HEADER: &str = "delta_m,optimal_jpm,S_opt,f_opt";
pub const TRACKING_LOG_HEADER: &str = "t,x1,L";
pub const POWER_LOG_HEADER: &str = "t,P";

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_sim_trace(path: &Path, trace: &SimTrace) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{SIM_TRACE_HEADER}")?;
    for i in 0..trace.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            trace.times[i],
            trace.x1[i],
            trace.x2[i],
            trace.v1[i],
            trace.v2[i],
            trace.a1[i],
            trace.a2[i],
            trace.body_length[i],
            trace.cable_force[i]
        )?;
    }
    Ok(())
}

pub fn write_switch_events(path: &Path, events: &[SwitchEvent]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{SWITCH_EVENTS_HEADER}")?;
    for e in events {
        writeln!(w, "{},{},{}", e.t, e.anchor, e.direction)?;
    }
    Ok(())
}

pub fn write_body_trace(path: &Path, trace: &BodyLengthTrace) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{BODY_TRACE_HEADER}")?;
    for i in 0..trace.len() {
        writeln!(
            w,
            "{},{},{},{}",
            trace.times[i], trace.delta_l[i], trace.dl_dt[i], trace.d2l_dt2[i]
        )?;
    }
    Ok(())
}

pub fn write_power_energy(path: &Path, times: &[f64], power: &[f64], energy: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{POWER_ENERGY_HEADER}")?;
    for i in 0..times.len() {
        writeln!(w, "{},{},{}", times[i], power[i], energy[i])?;
    }
    Ok(())
}

pub fn write_metrics(
    path: &Path,
    gait: &GaitParams,
    delta_m: f64,
    metrics: &GaitMetrics,
) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{METRICS_HEADER}")?;
    writeln!(
        w,
        "{},{},{},{},{},{}",
        gait.stroke_s, gait.freq_f, delta_m, metrics.avg_speed, metrics.avg_power, metrics.cot
    )?;
    Ok(())
}

pub fn write_front(path: &Path, front: &[ParetoPoint]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{FRONT_HEADER}")?;
    for p in front {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.gait.stroke_s,
            p.gait.freq_f,
            p.metrics.avg_speed,
            p.metrics.avg_power,
            p.metrics.cot,
            p.rank
        )?;
    }
    Ok(())
}

pub fn write_selected_points(path: &Path, selected: &[(&str, &ParetoPoint)]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{SELECTED_HEADER}")?;
    for (role, p) in selected {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            role,
            p.gait.stroke_s,
            p.gait.freq_f,
            p.metrics.avg_speed,
            p.metrics.avg_power,
            p.metrics.cot
        )?;
    }
    Ok(())
}

pub fn write_margin_scan(path: &Path, scan: &MarginScanResult) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{MARGIN_SCAN_HEADER}")?;
    for e in &scan.entries {
        let (s, f) = match e.best_gait {
            Some(g) => (g.stroke_s, g.freq_f),
            None => (f64::NAN, f64::NAN),
        };
        writeln!(w, "{},{},{},{}", e.delta_m, e.optimal_cot, s, f)?;
    }
    Ok(())
}

/// Sidecar with the energy-per-distance alternative, for cliff analysis
/// under the unnormalized transport-cost definition.
pub fn write_margin_scan_jpm(path: &Path, scan: &MarginScanResult) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{MARGIN_SCAN_JPM_HEADER}")?;
    for e in &scan.entries {
        let (s, f) = match e.best_gait {
            Some(g) => (g.stroke_s, g.freq_f),
            None => (f64::NAN, f64::NAN),
        };
        writeln!(w, "{},{},{},{}", e.delta_m, e.optimal_jpm, s, f)?;
    }
    Ok(())
}

pub fn write_fit_report(path: &Path, report: &FitReport) -> Result<()> {
    let mut w = writer(path)?;
    for (name, value) in report.names.iter().zip(report.values.iter()) {
        writeln!(w, "{name} = {value}")?;
    }
    writeln!(w, "cost = {}", report.cost)?;
    writeln!(w, "residual_rms = {}", report.residual_rms)?;
    writeln!(w, "iterations = {}", report.iterations)?;
    writeln!(w, "converged = {}", report.converged)?;
    writeln!(w, "bound_hit = {}", report.bound_hit)?;
    Ok(())
}

pub fn write_residuals(path: &Path, times: &[f64], residuals: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "t,residual")?;
    for (t, r) in times.iter().zip(residuals.iter()) {
        writeln!(w, "{t},{r}")?;
    }
    Ok(())
}

fn read_numeric_csv(path: &Path, header: &str) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        reason: "empty file".into(),
    })?;
    if first.trim() != header {
        return Err(Error::Parse {
            path: path.display().to_string(),
            reason: format!("expected header `{header}`, got `{}`", first.trim()),
        });
    }
    let cols = header.split(',').count();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: path.display().to_string(),
                reason: format!("line {}: {e}", lineno + 2),
            })?;
        if row.len() != cols {
            return Err(Error::Parse {
                path: path.display().to_string(),
                reason: format!("line {}: expected {cols} columns, got {}", lineno + 2, row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_tracking_log(path: &Path) -> Result<TrackingLog> {
    let rows = read_numeric_csv(path, TRACKING_LOG_HEADER)?;
    Ok(TrackingLog {
        times: rows.iter().map(|r| r[0]).collect(),
        x1_meas: rows.iter().map(|r| r[1]).collect(),
        l_meas: rows.iter().map(|r| r[2]).collect(),
    })
}

pub fn read_power_log(path: &Path) -> Result<PowerLog> {
    let rows = read_numeric_csv(path, POWER_LOG_HEADER)?;
    Ok(PowerLog {
        times: rows.iter().map(|r| r[0]).collect(),
        p_meas: rows.iter().map(|r| r[1]).collect(),
    })
}

pub fn read_body_trace(path: &Path) -> Result<BodyLengthTrace> {
    let rows = read_numeric_csv(path, BODY_TRACE_HEADER)?;
    Ok(BodyLengthTrace {
        times: rows.iter().map(|r| r[0]).collect(),
        delta_l: rows.iter().map(|r| r[1]).collect(),
        dl_dt: rows.iter().map(|r| r[2]).collect(),
        d2l_dt2: rows.iter().map(|r| r[3]).collect(),
    })
}

pub fn write_tracking_log(path: &Path, log: &TrackingLog) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{TRACKING_LOG_HEADER}")?;
    for i in 0..log.times.len() {
        writeln!(w, "{},{},{}", log.times[i], log.x1_meas[i], log.l_meas[i])?;
    }
    Ok(())
}

pub fn write_power_log(path: &Path, log: &PowerLog) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{POWER_LOG_HEADER}")?;
    for i in 0..log.times.len() {
        writeln!(w, "{},{}", log.times[i], log.p_meas[i])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("wormgait_io_{}_{name}", std::process::id()));
        p
    }

    #[test]
    fn tracking_log_roundtrip() {
        let path = tmp("tracking.csv");
        let log = TrackingLog {
            times: vec![0.0, 0.04, 0.08],
            x1_meas: vec![0.0, 0.001, 0.0025],
            l_meas: vec![0.3, 0.299, 0.2975],
        };
        write_tracking_log(&path, &log).unwrap();
        let back = read_tracking_log(&path).unwrap();
        assert_eq!(log, back);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn header_mismatch_is_reported() {
        let path = tmp("bad_header.csv");
        std::fs::write(&path, "time,pos,len\n0,0,0.3\n").unwrap();
        let err = read_tracking_log(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t,x1,L"), "message should name the expected header: {msg}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn malformed_cell_is_reported_with_line() {
        let path = tmp("bad_cell.csv");
        std::fs::write(&path, "t,P\n0,0.5\n0.1,oops\n").unwrap();
        let err = read_power_log(&path).unwrap_err();
        assert!(err.to_string().contains("line 3"));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn infinity_written_readably() {
        let path = tmp("metrics.csv");
        let gait = GaitParams::new(0.07, 0.2);
        let metrics = GaitMetrics {
            avg_speed: 0.0,
            avg_power: 0.82,
            cot: f64::INFINITY,
            energy_per_distance: f64::INFINITY,
            eval_window: (10.0, 25.0),
        };
        write_metrics(&path, &gait, 0.0, &metrics).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",inf"));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn body_trace_roundtrip() {
        let path = tmp("body.csv");
        let tr = BodyLengthTrace {
            times: vec![0.0, 0.001, 0.002],
            delta_l: vec![0.0, -1e-5, -3.9e-5],
            dl_dt: vec![0.0, -0.01, -0.02],
            d2l_dt2: vec![-10.0, -9.9, -9.7],
        };
        write_body_trace(&path, &tr).unwrap();
        let back = read_body_trace(&path).unwrap();
        assert_eq!(tr, back);
        std::fs::remove_file(&path).ok();
    }
}
