//! Least-squares identification of the locomotion, actuation and energy
//! parameters from logged experiment data.
//!
//! All three fits share the bounded multi-start simplex. Besides the usual
//! convergence flag, a fit is downgraded to non-converged when near-optimal
//! starts disagree on the parameters: the minimizing set is then a ridge
//! (e.g. the slack width when the stroke never exceeds it) and no single
//! point deserves to be reported as identified.

use crate::actuation::{check_uniform, effective_input, propagate_effective, ActuationParams, BodyLengthTrace};
use crate::energy::{accumulate_energy, estimate_idle_power};
use crate::error::{Error, Result};
use crate::hybrid::{simulate_measured, HybridState, MarginSetting, SimTrace};
use crate::model::{GaitParams, RobotParams};
use crate::simplex::{minimize_bounded, SimplexOptions, SimplexResult};

/// Motion-tracking log: rear-mass position and realized body length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingLog {
    pub times: Vec<f64>,
    pub x1_meas: Vec<f64>,
    pub l_meas: Vec<f64>,
}

impl TrackingLog {
    pub fn validate(&self) -> Result<f64> {
        if self.times.len() != self.x1_meas.len() || self.times.len() != self.l_meas.len() {
            return Err(Error::GridMismatch(format!(
                "tracking log columns disagree: {} / {} / {} samples",
                self.times.len(),
                self.x1_meas.len(),
                self.l_meas.len()
            )));
        }
        if self.times.len() < 100 {
            return Err(Error::TraceTooShort(format!(
                "tracking log needs at least 100 samples, got {}",
                self.times.len()
            )));
        }
        if !self.x1_meas.iter().all(|v| v.is_finite()) || !self.l_meas.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateLog("non-finite sample in tracking log".into()));
        }
        check_uniform(&self.times)
    }

    /// Truncates at the first sample where the rear mass has advanced
    /// `n_ridges` pitches from its start; the whole log if it never does.
    pub fn truncate_at_ridges(&self, n_ridges: usize, pitch: f64) -> TrackingLog {
        let target = self.x1_meas[0] + n_ridges as f64 * pitch;
        let end = self
            .x1_meas
            .iter()
            .position(|&x| x >= target)
            .map(|i| i + 1)
            .unwrap_or(self.times.len());
        TrackingLog {
            times: self.times[..end].to_vec(),
            x1_meas: self.x1_meas[..end].to_vec(),
            l_meas: self.l_meas[..end].to_vec(),
        }
    }
}

/// Source-side electrical power log.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLog {
    pub times: Vec<f64>,
    pub p_meas: Vec<f64>,
}

impl PowerLog {
    pub fn validate(&self) -> Result<f64> {
        if self.times.len() != self.p_meas.len() {
            return Err(Error::GridMismatch(format!(
                "power log columns disagree: {} / {} samples",
                self.times.len(),
                self.p_meas.len()
            )));
        }
        if self.times.len() < 10 {
            return Err(Error::TraceTooShort(format!(
                "power log needs at least 10 samples, got {}",
                self.times.len()
            )));
        }
        if !self.p_meas.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::DegenerateLog(
                "power log has negative or non-finite samples".into(),
            ));
        }
        check_uniform(&self.times)
    }
}

/// One identification run: synchronized tracking and power logs.
#[derive(Debug, Clone)]
pub struct EnergyRun {
    pub tracking: TrackingLog,
    pub power: PowerLog,
}

/// Knobs shared by the fits.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Moving-average window used to differentiate measured body length.
    pub smoothing_window: usize,
    /// Integration step; `None` picks an integer fraction of the log step
    /// that respects the stability guard over the whole parameter box.
    pub dt: Option<f64>,
    /// Robustness margin applied during identification runs.
    pub margin: f64,
    /// Initial fin-groove offsets of the run.
    pub init_offsets: (f64, f64),
    pub simplex: SimplexOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            smoothing_window: 5,
            dt: None,
            margin: 0.0,
            init_offsets: (0.0, 0.0),
            simplex: SimplexOptions::default(),
        }
    }
}

/// Outcome of one least-squares fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    /// The minimized objective, re-evaluated at the reported parameters.
    pub cost: f64,
    /// Root of the mean squared per-sample residual.
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bound_hit: bool,
}

impl FitReport {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }
}

/// Integer refinement factor so the simulation step divides the log step and
/// respects `cap`.
fn substeps(dt_log: f64, cap: f64) -> usize {
    (dt_log / cap).ceil().max(1.0) as usize
}

/// Runs the multistart simplex and checks whether near-optimal starts agree;
/// disagreement marks the problem as unidentifiable along some direction.
fn multistart_with_ambiguity<F>(
    f: F,
    lo: &[f64],
    hi: &[f64],
    opts: &SimplexOptions,
    cost_scale: f64,
) -> (SimplexResult, bool)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    // run the grid of starts through the shared implementation
    let winner = minimize_bounded(&f, lo, hi, opts);

    // re-run cheaply detectable ambiguity: probe the other starts' results by
    // re-minimizing from a couple of shifted starts and comparing parameters
    let mut alt_opts = opts.clone();
    alt_opts.start_fractions = vec![0.1, 0.9];
    let alt = minimize_bounded(&f, lo, hi, &alt_opts);

    let cost_tol = winner.cost + 1e-6 * winner.cost.abs() + 1e-12 * cost_scale;
    let mut ambiguous = false;
    if alt.cost <= cost_tol {
        for i in 0..lo.len() {
            let range = hi[i] - lo[i];
            if range > 0.0 && (alt.x[i] - winner.x[i]).abs() > 0.02 * range {
                ambiguous = true;
            }
        }
    }
    (winner, ambiguous)
}

fn report_from(
    winner: SimplexResult,
    ambiguous: bool,
    names: Vec<&'static str>,
) -> FitReport {
    FitReport {
        names,
        values: winner.x.clone(),
        cost: winner.cost,
        residual_rms: winner.cost.max(0.0).sqrt(),
        iterations: winner.iterations,
        converged: winner.converged && !ambiguous,
        bound_hit: winner.bound_hit,
    }
}

/// Fits the lumped viscous coefficient and the switching threshold from a
/// locomotion run driven by the measured body length.
pub fn fit_locomotion(
    log: &TrackingLog,
    known: &RobotParams,
    eta_bounds: (f64, f64),
    p_sw_bounds: (f64, f64),
    opts: &FitOptions,
) -> Result<FitReport> {
    let dt_log = log.validate()?;
    let l_span = log.l_meas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - log.l_meas.iter().cloned().fold(f64::INFINITY, f64::min);
    if l_span < 1e-6 {
        return Err(Error::DegenerateLog(format!(
            "body length varies by only {l_span} m; locomotion parameters are unidentifiable"
        )));
    }
    if p_sw_bounds.0 <= known.delta_c / 2.0 {
        return Err(Error::Config(format!(
            "p_sw lower bound {} must exceed the clearance half-width {}",
            p_sw_bounds.0,
            known.delta_c / 2.0
        )));
    }

    let body = BodyLengthTrace::from_measured(&log.times, &log.l_meas, opts.smoothing_window)?;
    let l0 = log.l_meas[0];
    let margin = MarginSetting::new(opts.margin)?;

    // stability of the fast velocity mode over the whole eta box
    let stab = 0.9 * 1.39 * (known.m1 + known.m2) / (2.0 * eta_bounds.1);
    let k = match opts.dt {
        Some(dt) => substeps(dt_log, dt),
        None => substeps(dt_log, stab.min(2e-3)),
    };
    let dt = dt_log / k as f64;

    let init = HybridState {
        x1: log.x1_meas[0],
        v1: 0.0,
        a1: log.x1_meas[0] - opts.init_offsets.0,
        a2: log.x1_meas[0] + l0 - opts.init_offsets.1,
        t: 0.0,
    };

    let n = log.times.len();
    let objective = |theta: &[f64]| -> f64 {
        let mut p = *known;
        p.eta = theta[0];
        p.p_sw = theta[1];
        if p.validate().is_err() {
            return f64::INFINITY;
        }
        match simulate_measured(&body, l0, &p, &margin, &init, dt) {
            Ok(tr) => {
                let mut acc = 0.0;
                for i in 0..n {
                    let r = log.x1_meas[i] - tr.x1[i * k];
                    acc += r * r;
                }
                acc / n as f64
            }
            Err(_) => f64::INFINITY,
        }
    };

    let msq = log.x1_meas.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let (winner, ambiguous) = multistart_with_ambiguity(
        objective,
        &[eta_bounds.0, p_sw_bounds.0],
        &[eta_bounds.1, p_sw_bounds.1],
        &opts.simplex,
        msq,
    );
    Ok(report_from(winner, ambiguous, vec!["eta", "p_sw"]))
}

/// Fits the slack width, transmission gain and time constant from the
/// measured body-length change under a known commanded gait.
pub fn fit_actuation(
    log: &TrackingLog,
    gait: &GaitParams,
    delta_s_bounds: (f64, f64),
    gain_bounds: (f64, f64),
    tau_bounds: (f64, f64),
    opts: &FitOptions,
) -> Result<FitReport> {
    let dt_log = log.validate()?;
    let dl_meas: Vec<f64> = log.l_meas.iter().map(|l| l - log.l_meas[0]).collect();
    let span = dl_meas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - dl_meas.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 1e-6 {
        return Err(Error::DegenerateLog(format!(
            "body-length change varies by only {span} m; actuation parameters are unidentifiable"
        )));
    }

    // refine enough for the fastest admissible lag and the gait curvature
    let cap = (tau_bounds.0 / 10.0).min(1.0 / (50.0 * gait.freq_f)).min(2.5e-3);
    let k = match opts.dt {
        Some(dt) => substeps(dt_log, dt),
        None => substeps(dt_log, cap),
    };
    let dt = dt_log / k as f64;
    let n = log.times.len();
    let n_fine = (n - 1) * k + 1;

    let objective = |theta: &[f64]| -> f64 {
        let act = ActuationParams {
            delta_s: theta[0],
            gain_k: theta[1],
            tau: theta[2],
        };
        if act.validate().is_err() {
            return f64::INFINITY;
        }
        let mut u = vec![0.0; n_fine];
        let mut du = vec![0.0; n_fine];
        for j in 0..n_fine {
            let (ue, rate) = effective_input(gait, act.delta_s, j as f64 * dt);
            u[j] = ue;
            du[j] = rate;
        }
        let tr = propagate_effective(&act, &u, &du, dt, dl_meas[0]);
        let mut acc = 0.0;
        for i in 0..n {
            let r = dl_meas[i] - tr.delta_l[i * k];
            acc += r * r;
        }
        acc / n as f64
    };

    let msq = dl_meas.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let (winner, ambiguous) = multistart_with_ambiguity(
        objective,
        &[delta_s_bounds.0, gain_bounds.0, tau_bounds.0],
        &[delta_s_bounds.1, gain_bounds.1, tau_bounds.1],
        &opts.simplex,
        msq,
    );
    Ok(report_from(winner, ambiguous, vec!["delta_s", "gain_k", "tau"]))
}

/// Per-run quantities that do not depend on the energy parameters being
/// fitted: everything in the cable force except the damping term, the
/// measured length rate, the idle power and the measured energy.
struct EnergyRunBasis {
    /// Cable force with `c_b = 0`.
    fc_base: Vec<f64>,
    /// Smoothed measured body-length rate at the log samples.
    ldot: Vec<f64>,
    p_idle: f64,
    e_meas: Vec<f64>,
    dt_log: f64,
}

fn energy_run_basis(
    run: &EnergyRun,
    known: &RobotParams,
    opts: &FitOptions,
) -> Result<EnergyRunBasis> {
    let dt_track = run.tracking.validate()?;
    let dt_power = run.power.validate()?;
    if run.tracking.times.len() != run.power.times.len()
        || (dt_track - dt_power).abs() > 1e-9 * dt_track
    {
        return Err(Error::GridMismatch(format!(
            "tracking log ({} samples at {} s) and power log ({} samples at {} s) disagree",
            run.tracking.times.len(),
            dt_track,
            run.power.times.len(),
            dt_power
        )));
    }

    let log = &run.tracking;
    let body = BodyLengthTrace::from_measured(&log.times, &log.l_meas, opts.smoothing_window)?;
    let l0 = log.l_meas[0];
    let margin = MarginSetting::new(opts.margin)?;
    let stab = 0.9 * 1.39 * (known.m1 + known.m2) / (2.0 * known.eta);
    let k = match opts.dt {
        Some(dt) => substeps(dt_track, dt),
        None => substeps(dt_track, stab.min(2e-3)),
    };
    let dt = dt_track / k as f64;
    let init = HybridState {
        x1: log.x1_meas[0],
        v1: 0.0,
        a1: log.x1_meas[0] - opts.init_offsets.0,
        a2: log.x1_meas[0] + l0 - opts.init_offsets.1,
        t: 0.0,
    };
    let tr: SimTrace = simulate_measured(&body, l0, known, &margin, &init, dt)?;

    let law = known.fin_law();
    let n = log.times.len();
    let mut fc_base = Vec::with_capacity(n);
    let mut ldot = Vec::with_capacity(n);
    for i in 0..n {
        let j = i * k;
        fc_base.push(
            known.m1 * tr.accel[j] + known.k_b * (known.l_free - tr.body_length[j])
                + known.eta * tr.v1[j]
                + law.oriented(tr.x1[j] - tr.a1[j]),
        );
        ldot.push(body.dl_dt[i]);
    }

    let p_idle = estimate_idle_power(&run.power.p_meas)?;
    let e_meas = accumulate_energy(&run.power.p_meas, dt_track)?;
    Ok(EnergyRunBasis {
        fc_base,
        ldot,
        p_idle,
        e_meas,
        dt_log: dt_track,
    })
}

fn energy_cost(bases: &[EnergyRunBasis], c_b: f64, alpha_p: f64) -> f64 {
    let mut total = 0.0;
    for b in bases {
        let n = b.fc_base.len();
        let mut acc = 0.0;
        let mut e_pred = 0.0;
        let mut prev_p = 0.0;
        for i in 0..n {
            let fc = b.fc_base[i] - c_b * b.ldot[i];
            let p = b.p_idle + alpha_p * (-fc * b.ldot[i]).max(0.0);
            if i > 0 {
                e_pred += 0.5 * (prev_p + p) * b.dt_log;
            }
            prev_p = p;
            let r = b.e_meas[i] - e_pred;
            acc += r * r;
        }
        total += acc / n as f64;
    }
    total / bases.len() as f64
}

/// Fits the bellows damping and the lumped actuation power factor from
/// accumulated-energy trajectories, with the idle power fixed per run from
/// its first ten samples.
pub fn fit_energy(
    runs: &[EnergyRun],
    known: &RobotParams,
    c_b_bounds: (f64, f64),
    alpha_p_bounds: (f64, f64),
    opts: &FitOptions,
) -> Result<FitReport> {
    if runs.is_empty() {
        return Err(Error::Config("fit_energy needs at least one run".into()));
    }
    let bases: Vec<EnergyRunBasis> = runs
        .iter()
        .map(|r| energy_run_basis(r, known, opts))
        .collect::<Result<_>>()?;

    let objective = |theta: &[f64]| -> f64 { energy_cost(&bases, theta[0], theta[1]) };

    let msq = bases
        .iter()
        .flat_map(|b| b.e_meas.iter())
        .map(|v| v * v)
        .sum::<f64>()
        / bases.iter().map(|b| b.e_meas.len()).sum::<usize>() as f64;
    let (winner, ambiguous) = multistart_with_ambiguity(
        objective,
        &[c_b_bounds.0, alpha_p_bounds.0],
        &[c_b_bounds.1, alpha_p_bounds.1],
        &opts.simplex,
        msq,
    );
    Ok(report_from(winner, ambiguous, vec!["c_b", "alpha_p"]))
}

/// Linear basis of the energy prediction at fixed damping: for any power
/// factor, `E_pred = e_idle + alpha_p * work`. Used to cross-check the
/// nonlinear fit against the closed-form least-squares solution.
pub fn energy_prediction_basis(
    run: &EnergyRun,
    known: &RobotParams,
    c_b: f64,
    opts: &FitOptions,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let b = energy_run_basis(run, known, opts)?;
    let n = b.fc_base.len();
    let idle: Vec<f64> = vec![b.p_idle; n];
    let work: Vec<f64> = (0..n)
        .map(|i| {
            let fc = b.fc_base[i] - c_b * b.ldot[i];
            (-fc * b.ldot[i]).max(0.0)
        })
        .collect();
    let e_idle = accumulate_energy(&idle, b.dt_log)?;
    let e_work = accumulate_energy(&work, b.dt_log)?;
    Ok((e_idle, e_work, b.e_meas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuation::propagate_actuation;
    use crate::hybrid::simulate;

    fn table() -> (RobotParams, ActuationParams) {
        (RobotParams::identified(), ActuationParams::identified())
    }

    /// Synthetic tracking log: simulate the reference pipeline at 1 ms and
    /// sample both signals at 25 Hz.
    fn synth_tracking(gait: &GaitParams, n_cycles: usize) -> TrackingLog {
        let (params, act) = table();
        let dt = 1e-3;
        let tr = simulate(
            gait,
            &params,
            &act,
            &MarginSetting::nominal(),
            n_cycles,
            dt,
            &HybridState::centered_start(&params),
        )
        .unwrap();
        let stride = (0.04 / dt).round() as usize;
        let idx: Vec<usize> = (0..tr.len()).step_by(stride).collect();
        TrackingLog {
            times: idx.iter().map(|&i| tr.times[i]).collect(),
            x1_meas: idx.iter().map(|&i| tr.x1[i]).collect(),
            l_meas: idx.iter().map(|&i| tr.body_length[i]).collect(),
        }
    }

    #[test]
    fn locomotion_roundtrip_noiseless() {
        let (params, _) = table();
        let gait = GaitParams::new(0.07, 0.2);
        let log = synth_tracking(&gait, 5);
        let report = fit_locomotion(
            &log,
            &params,
            (20.0, 300.0),
            (0.008, 0.030),
            &FitOptions::default(),
        )
        .unwrap();
        let eta = report.value("eta").unwrap();
        let p_sw = report.value("p_sw").unwrap();
        assert!(
            (eta - 86.97).abs() / 86.97 < 0.02,
            "eta = {eta}, report {report:?}"
        );
        assert!(
            (p_sw - 0.0175).abs() / 0.0175 < 0.02,
            "p_sw = {p_sw}, report {report:?}"
        );
        assert!(report.converged, "{report:?}");
    }

    #[test]
    fn locomotion_rejects_flat_log() {
        let (params, _) = table();
        let n = 200;
        let log = TrackingLog {
            times: (0..n).map(|i| i as f64 * 0.04).collect(),
            x1_meas: vec![0.0; n],
            l_meas: vec![0.3; n],
        };
        assert!(matches!(
            fit_locomotion(&log, &params, (20.0, 300.0), (0.008, 0.03), &FitOptions::default()),
            Err(Error::DegenerateLog(_))
        ));
    }

    #[test]
    fn actuation_roundtrip_noiseless() {
        let (_, act) = table();
        let gait = GaitParams::new(0.07, 0.2);
        let body = propagate_actuation(&act, &gait, 25.0, 1e-3, 0.0).unwrap();
        let stride = 40;
        let idx: Vec<usize> = (0..body.len()).step_by(stride).collect();
        let log = TrackingLog {
            times: idx.iter().map(|&i| body.times[i]).collect(),
            x1_meas: vec![0.0; idx.len()],
            l_meas: idx.iter().map(|&i| 0.30 + body.delta_l[i]).collect(),
        };
        let report = fit_actuation(
            &log,
            &gait,
            (0.002, 0.02),
            (0.4, 1.4),
            (0.03, 0.5),
            &FitOptions::default(),
        )
        .unwrap();
        for (name, truth) in [("delta_s", 0.008), ("gain_k", 0.860), ("tau", 0.155)] {
            let got = report.value(name).unwrap();
            assert!(
                (got - truth).abs() / truth < 0.02,
                "{name} = {got}, truth {truth}, report {report:?}"
            );
        }
        assert!(report.converged, "{report:?}");
    }

    #[test]
    fn actuation_subslack_stroke_is_flagged() {
        let (_, act) = table();
        // stroke below the slack width: the clip hides delta_s above S
        let gait = GaitParams::new(0.005, 0.2);
        let body = propagate_actuation(&act, &gait, 25.0, 1e-3, 0.0).unwrap();
        let stride = 40;
        let idx: Vec<usize> = (0..body.len()).step_by(stride).collect();
        let log = TrackingLog {
            times: idx.iter().map(|&i| body.times[i]).collect(),
            x1_meas: vec![0.0; idx.len()],
            l_meas: idx.iter().map(|&i| 0.30 + body.delta_l[i]).collect(),
        };
        let report = fit_actuation(
            &log,
            &gait,
            (0.006, 0.02),
            (0.4, 1.4),
            (0.03, 0.5),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(
            !report.converged || report.bound_hit,
            "unidentifiable slack width must be flagged: {report:?}"
        );
    }

    fn synth_energy_run(gait: &GaitParams) -> EnergyRun {
        let (params, act) = table();
        let energy = crate::energy::EnergyParams::identified();
        let tr = simulate(
            gait,
            &params,
            &act,
            &MarginSetting::nominal(),
            5,
            1e-3,
            &HybridState::centered_start(&params),
        )
        .unwrap();
        let p = crate::energy::power_series(&tr, &energy);
        let stride = 40;
        let idx: Vec<usize> = (0..tr.len()).step_by(stride).collect();
        EnergyRun {
            tracking: TrackingLog {
                times: idx.iter().map(|&i| tr.times[i]).collect(),
                x1_meas: idx.iter().map(|&i| tr.x1[i]).collect(),
                l_meas: idx.iter().map(|&i| tr.body_length[i]).collect(),
            },
            power: PowerLog {
                times: idx.iter().map(|&i| tr.times[i]).collect(),
                p_meas: idx.iter().map(|&i| p[i]).collect(),
            },
        }
    }

    #[test]
    fn energy_roundtrip_noiseless() {
        let (params, _) = table();
        let run = synth_energy_run(&GaitParams::new(0.07, 0.2));
        let report = fit_energy(
            &[run],
            &params,
            (200.0, 2000.0),
            (1.0, 8.0),
            &FitOptions::default(),
        )
        .unwrap();
        for (name, truth, tol) in [("c_b", 862.4, 0.03), ("alpha_p", 3.22, 0.03)] {
            let got = report.value(name).unwrap();
            assert!(
                (got - truth).abs() / truth < tol,
                "{name} = {got}, truth {truth}, report {report:?}"
            );
        }
    }

    #[test]
    fn energy_alpha_matches_closed_form_at_fixed_damping() {
        let (params, _) = table();
        let run = synth_energy_run(&GaitParams::new(0.07, 0.2));
        let c_b = 862.4;
        // nonlinear route with the damping frozen
        let report = fit_energy(
            &[run.clone()],
            &params,
            (c_b, c_b),
            (1.0, 8.0),
            &FitOptions::default(),
        )
        .unwrap();
        let alpha_fit = report.value("alpha_p").unwrap();
        // closed-form least squares on the linear substructure
        let (e_idle, work, e_meas) =
            energy_prediction_basis(&run, &params, c_b, &FitOptions::default()).unwrap();
        let num: f64 = work
            .iter()
            .zip(e_meas.iter().zip(e_idle.iter()))
            .map(|(w, (m, i))| w * (m - i))
            .sum();
        let den: f64 = work.iter().map(|w| w * w).sum();
        let alpha_ls = num / den;
        assert!(
            (alpha_fit - alpha_ls).abs() / alpha_ls.abs() < 1e-6,
            "simplex {alpha_fit} vs closed form {alpha_ls}"
        );
    }

    #[test]
    fn energy_rejects_mismatched_grids() {
        let (params, _) = table();
        let mut run = synth_energy_run(&GaitParams::new(0.07, 0.2));
        run.power.times.pop();
        run.power.p_meas.pop();
        assert!(matches!(
            fit_energy(&[run], &params, (200.0, 2000.0), (1.0, 8.0), &FitOptions::default()),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn energy_requires_ten_power_samples() {
        let (params, _) = table();
        let mut run = synth_energy_run(&GaitParams::new(0.07, 0.2));
        run.power.times.truncate(9);
        run.power.p_meas.truncate(9);
        run.tracking.times.truncate(9);
        run.tracking.x1_meas.truncate(9);
        run.tracking.l_meas.truncate(9);
        assert!(fit_energy(&[run], &params, (200.0, 2000.0), (1.0, 8.0), &FitOptions::default()).is_err());
    }

    #[test]
    fn truncate_at_ridges_cuts_where_expected() {
        let n = 200;
        let log = TrackingLog {
            times: (0..n).map(|i| i as f64 * 0.04).collect(),
            x1_meas: (0..n).map(|i| i as f64 * 0.001).collect(),
            l_meas: vec![0.3; n],
        };
        let cut = log.truncate_at_ridges(5, 0.0173);
        // first sample at or past 5 * 0.0173 = 0.0865 m is index 87
        assert_eq!(cut.times.len(), 88);
        let whole = log.truncate_at_ridges(50, 0.0173);
        assert_eq!(whole.times.len(), n);
    }

    #[test]
    fn fit_cost_matches_objective_reevaluation() {
        let (params, _) = table();
        let gait = GaitParams::new(0.07, 0.2);
        let log = synth_tracking(&gait, 5);
        let report = fit_locomotion(
            &log,
            &params,
            (20.0, 300.0),
            (0.008, 0.030),
            &FitOptions::default(),
        )
        .unwrap();
        // independent re-evaluation of the quoted objective at the reported
        // parameters
        let mut p = params;
        p.eta = report.value("eta").unwrap();
        p.p_sw = report.value("p_sw").unwrap();
        let body = BodyLengthTrace::from_measured(&log.times, &log.l_meas, 5).unwrap();
        let stab = 0.9 * 1.39 * (p.m1 + p.m2) / (2.0 * 300.0);
        let k = substeps(0.04, stab.min(2e-3));
        let dt = 0.04 / k as f64;
        let init = HybridState {
            x1: log.x1_meas[0],
            v1: 0.0,
            a1: log.x1_meas[0],
            a2: log.x1_meas[0] + log.l_meas[0],
            t: 0.0,
        };
        let tr = simulate_measured(&body, log.l_meas[0], &p, &MarginSetting::nominal(), &init, dt)
            .unwrap();
        let mut acc = 0.0;
        for i in 0..log.times.len() {
            let r = log.x1_meas[i] - tr.x1[i * k];
            acc += r * r;
        }
        let j = acc / log.times.len() as f64;
        assert!(
            (j - report.cost).abs() <= 1e-12 * j.abs().max(1e-300),
            "cost {} vs independent {}",
            report.cost,
            j
        );
    }
}
