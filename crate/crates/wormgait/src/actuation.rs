//! Slack-aware actuation: maps the commanded gait input to the realized
//! body-length change through a one-sided slack clip and first-order linear
//! dynamics.

use crate::error::{Error, Result};
use crate::model::{commanded_gait, commanded_gait_rate, GaitParams};

/// Parameters of the slack-aware actuation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationParams {
    /// Slack width (m). The effective input never rises above `-delta_s`.
    pub delta_s: f64,
    /// Steady-state transmission gain (dimensionless).
    pub gain_k: f64,
    /// Actuation time constant (s).
    pub tau: f64,
}

impl ActuationParams {
    /// The identified parameter set of the physical robot.
    pub fn identified() -> Self {
        ActuationParams {
            delta_s: 0.008,
            gain_k: 0.860,
            tau: 0.155,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta_s", self.delta_s),
            ("gain_k", self.gain_k),
            ("tau", self.tau),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must be strictly positive, got {v}"),
                });
            }
        }
        if self.gain_k > 1.5 {
            return Err(Error::InvalidParam {
                name: "gain_k",
                reason: format!("transmission gain {} exceeds the 1.5 sanity bound", self.gain_k),
            });
        }
        Ok(())
    }
}

/// One-sided slack clip: the effective input stays at the preload level
/// `-delta_s` until the commanded contraction exceeds the slack width.
pub fn slack_clip(u_cmd: f64, delta_s: f64) -> f64 {
    u_cmd.min(-delta_s)
}

/// Effective input and its one-sided rate at `t+`.
///
/// The rate is 0 on the clipped branch and the commanded rate on the
/// pass-through branch; exactly at the crossing the branch active just after
/// `t` is chosen by the sign of the commanded rate.
pub fn effective_input(gait: &GaitParams, delta_s: f64, t: f64) -> (f64, f64) {
    let uc = commanded_gait(gait, t);
    let ue = slack_clip(uc, delta_s);
    let rate = if uc > -delta_s {
        0.0
    } else if uc < -delta_s {
        commanded_gait_rate(gait, t)
    } else {
        let duc = commanded_gait_rate(gait, t);
        if duc >= 0.0 {
            0.0
        } else {
            duc
        }
    };
    (ue, rate)
}

/// Uniformly sampled realized body-length change with its first two
/// derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyLengthTrace {
    pub times: Vec<f64>,
    /// Realized body-length change (m, non-positive in normal operation).
    pub delta_l: Vec<f64>,
    /// First derivative (m/s).
    pub dl_dt: Vec<f64>,
    /// Second derivative (m/s²).
    pub d2l_dt2: Vec<f64>,
}

impl BodyLengthTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Uniform sampling step.
    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            // times are built as k * dt; the first gap is the step
            self.times[1] - self.times[0]
        }
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Builds a trace from raw measured body-length samples.
    ///
    /// The samples are smoothed by a centered moving average of odd `window`
    /// (shrinking symmetrically at the edges), then differentiated with
    /// second-order central differences. `delta_l` is taken relative to the
    /// first sample, matching the convention that the initial body length is
    /// the first measurement. `window == 1` disables smoothing.
    pub fn from_measured(times: &[f64], l_meas: &[f64], window: usize) -> Result<BodyLengthTrace> {
        if times.len() != l_meas.len() {
            return Err(Error::GridMismatch(format!(
                "times has {} samples, lengths {}",
                times.len(),
                l_meas.len()
            )));
        }
        if times.len() < 3 {
            return Err(Error::TraceTooShort(format!(
                "need at least 3 samples to differentiate, got {}",
                times.len()
            )));
        }
        if window % 2 == 0 {
            return Err(Error::Config(format!(
                "smoothing window must be odd, got {window}"
            )));
        }
        let dt = check_uniform(times)?;
        let n = times.len();
        let l0 = l_meas[0];

        let half = window / 2;
        let mut smooth = vec![0.0; n];
        for i in 0..n {
            let h = half.min(i).min(n - 1 - i);
            let mut acc = 0.0;
            for j in i - h..=i + h {
                acc += l_meas[j] - l0;
            }
            smooth[i] = acc / (2 * h + 1) as f64;
        }

        let mut dl_dt = vec![0.0; n];
        let mut d2l = vec![0.0; n];
        for i in 1..n - 1 {
            dl_dt[i] = (smooth[i + 1] - smooth[i - 1]) / (2.0 * dt);
            d2l[i] = (smooth[i + 1] - 2.0 * smooth[i] + smooth[i - 1]) / (dt * dt);
        }
        dl_dt[0] = (-3.0 * smooth[0] + 4.0 * smooth[1] - smooth[2]) / (2.0 * dt);
        dl_dt[n - 1] = (3.0 * smooth[n - 1] - 4.0 * smooth[n - 2] + smooth[n - 3]) / (2.0 * dt);
        d2l[0] = d2l[1];
        d2l[n - 1] = d2l[n - 2];

        Ok(BodyLengthTrace {
            times: times.to_vec(),
            delta_l: smooth,
            dl_dt,
            d2l_dt2: d2l,
        })
    }
}

/// Checks that `times` is a uniform, strictly increasing grid and returns its
/// step.
pub fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::TraceTooShort(
            "need at least 2 samples to define a grid".into(),
        ));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::NonUniformGrid {
            index: 1,
            got: dt,
            expected: f64::NAN,
        });
    }
    let tol = 1e-6 * dt;
    for i in 1..times.len() {
        let step = times[i] - times[i - 1];
        if (step - dt).abs() > tol {
            return Err(Error::NonUniformGrid {
                index: i,
                got: step,
                expected: dt,
            });
        }
    }
    Ok(dt)
}

/// Propagates the first-order actuation dynamics over `n_steps` steps of
/// `dt`, driven by sampled effective input `u_eff` and its one-sided rate.
///
/// The update is the closed-form solution of the first-order system for an
/// input that is linear within each step, so the only discretization error is
/// the linear interpolation of the input between samples. `dl_dt` comes
/// exactly from the governing equation and `d2l_dt2` from its differentiated
/// form with the one-sided input rate.
pub fn propagate_effective(
    act: &ActuationParams,
    u_eff: &[f64],
    du_eff: &[f64],
    dt: f64,
    dl0: f64,
) -> BodyLengthTrace {
    let n = u_eff.len();
    assert_eq!(n, du_eff.len(), "input and rate arrays must match");
    assert!(n >= 1);
    let k = act.gain_k;
    let tau = act.tau;
    let decay = (-dt / tau).exp();

    let mut delta_l = vec![0.0; n];
    delta_l[0] = dl0;
    for i in 0..n - 1 {
        let a = u_eff[i];
        let b = (u_eff[i + 1] - u_eff[i]) / dt;
        let c0 = delta_l[i] - k * a + k * b * tau;
        delta_l[i + 1] = c0 * decay + k * (a + b * dt) - k * b * tau;
    }

    let mut dl_dt = vec![0.0; n];
    let mut d2l = vec![0.0; n];
    for i in 0..n {
        dl_dt[i] = (k * u_eff[i] - delta_l[i]) / tau;
        d2l[i] = (k * du_eff[i] - dl_dt[i]) / tau;
    }

    let times = (0..n).map(|i| i as f64 * dt).collect();
    BodyLengthTrace {
        times,
        delta_l,
        dl_dt,
        d2l_dt2: d2l,
    }
}

/// Propagates the actuation model for `n_steps` integration steps of `dt`
/// under the commanded gait, starting from body-length change `dl0`.
pub fn propagate_actuation_steps(
    act: &ActuationParams,
    gait: &GaitParams,
    n_steps: usize,
    dt: f64,
    dl0: f64,
) -> Result<BodyLengthTrace> {
    act.validate()?;
    let max_dt = act.tau / 10.0;
    if !(dt > 0.0) || dt > max_dt {
        return Err(Error::Resolution { dt, max: max_dt });
    }
    if n_steps == 0 {
        return Err(Error::TraceTooShort("need at least one step".into()));
    }
    let n = n_steps + 1;
    let mut u = vec![0.0; n];
    let mut du = vec![0.0; n];
    for i in 0..n {
        let (ue, rate) = effective_input(gait, act.delta_s, i as f64 * dt);
        u[i] = ue;
        du[i] = rate;
    }
    Ok(propagate_effective(act, &u, &du, dt, dl0))
}

/// Propagates the actuation model from 0 to `t_end`.
pub fn propagate_actuation(
    act: &ActuationParams,
    gait: &GaitParams,
    t_end: f64,
    dt: f64,
    dl0: f64,
) -> Result<BodyLengthTrace> {
    if !(t_end >= dt) {
        return Err(Error::TraceTooShort(format!(
            "t_end = {t_end} shorter than one step {dt}"
        )));
    }
    let n_steps = (t_end / dt).round() as usize;
    propagate_actuation_steps(act, gait, n_steps, dt, dl0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act() -> ActuationParams {
        ActuationParams::identified()
    }

    #[test]
    fn slack_clip_spot_values() {
        assert_eq!(slack_clip(-0.002, 0.008), -0.008);
        assert_eq!(slack_clip(-0.008, 0.008), -0.008);
        assert_eq!(slack_clip(-0.050, 0.008), -0.050);
    }

    #[test]
    fn constant_input_reaches_steady_state() {
        let a = act();
        let n = 5000;
        let u = vec![-0.05; n];
        let du = vec![0.0; n];
        let tr = propagate_effective(&a, &u, &du, 1e-3, 0.0);
        let last = *tr.delta_l.last().unwrap();
        assert!((last - (-0.043)).abs() < 1e-9, "steady state {last}");
    }

    #[test]
    fn step_response_matches_analytic() {
        let a = act();
        let dt = 1e-3;
        let n_steps = (a.tau / dt).round() as usize;
        let n = n_steps + 1;
        let u = vec![-0.05; n];
        let du = vec![0.0; n];
        let tr = propagate_effective(&a, &u, &du, dt, 0.0);
        // value at t = n_steps * dt = 0.155 s = tau
        let analytic = -0.043 * (1.0 - (-1.0f64).exp());
        let got = tr.delta_l[n_steps];
        assert!(
            (got - analytic).abs() < 1e-4,
            "step response {got} vs analytic {analytic}"
        );
        // piecewise-constant input makes the update exact
        assert!((got - analytic).abs() < 1e-12);
    }

    #[test]
    fn clipped_preload_is_an_equilibrium() {
        let a = act();
        // zero stroke commands u_cmd = 0, clipped to -delta_s
        let gait = GaitParams::new(0.0, 0.2);
        let dl0 = -a.gain_k * a.delta_s;
        let tr = propagate_actuation(&a, &gait, 10.0, 1e-3, dl0).unwrap();
        for (i, &v) in tr.delta_l.iter().enumerate() {
            assert!(
                (v - (-0.00688)).abs() < 1e-12,
                "drifted to {v} at sample {i}"
            );
        }
    }

    #[test]
    fn resolution_guard_rejects_coarse_steps() {
        let a = act();
        let gait = GaitParams::new(0.07, 0.2);
        assert!(matches!(
            propagate_actuation(&a, &gait, 10.0, 0.02, 0.0),
            Err(Error::Resolution { .. })
        ));
        assert!(matches!(
            propagate_actuation(&a, &gait, 10.0, -1e-3, 0.0),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn monotone_approach_without_overshoot() {
        let a = act();
        let n = 3000;
        let u = vec![-0.05; n];
        let du = vec![0.0; n];
        let tr = propagate_effective(&a, &u, &du, 1e-3, 0.0);
        let target = a.gain_k * -0.05;
        for i in 1..n {
            let prev = (tr.delta_l[i - 1] - target).abs();
            let cur = (tr.delta_l[i] - target).abs();
            assert!(cur <= prev + 1e-15, "overshoot at sample {i}");
            assert!(tr.delta_l[i] >= target - 1e-15);
        }
    }

    #[test]
    fn clip_dominance_pointwise() {
        let a = act();
        let gait = GaitParams::new(0.07, 0.2);
        let dt = 1e-3;
        let n = 25_001;
        let mut u_clip = vec![0.0; n];
        let mut u_raw = vec![0.0; n];
        let zeros = vec![0.0; n];
        for i in 0..n {
            let t = i as f64 * dt;
            u_raw[i] = commanded_gait(&gait, t);
            u_clip[i] = slack_clip(u_raw[i], a.delta_s);
        }
        let clipped = propagate_effective(&a, &u_clip, &zeros, dt, 0.0);
        let raw = propagate_effective(&a, &u_raw, &zeros, dt, 0.0);
        // clipped input is pointwise at least as contracted
        for i in 0..n {
            assert!(clipped.delta_l[i] <= raw.delta_l[i] + 1e-12);
        }
    }

    #[test]
    fn boundedness_under_gait_drive() {
        let a = act();
        for (s, f) in [(0.01, 0.4), (0.05, 0.2), (0.09, 0.08)] {
            let gait = GaitParams::new(s, f);
            let tr = propagate_actuation(&a, &gait, 3.0 / f, 1e-3, 0.0).unwrap();
            let bound = a.gain_k * s + 1e-12;
            for &v in &tr.delta_l {
                assert!(v.abs() <= bound, "|{v}| > K*S = {bound} for S={s}, f={f}");
            }
        }
    }

    #[test]
    fn derivatives_pass_finite_difference_residual() {
        let a = act();
        let gait = GaitParams::new(0.07, 0.2);
        let dt = 1e-3;
        let tr = propagate_actuation(&a, &gait, 10.0, dt, 0.0).unwrap();
        let n = tr.len();
        let mut worst: f64 = 0.0;
        for i in 1..n - 1 {
            let fd = (tr.delta_l[i + 1] - tr.delta_l[i - 1]) / (2.0 * dt);
            worst = worst.max((fd - tr.dl_dt[i]).abs());
        }
        // central difference of the exact solution agrees to O(dt^2)
        assert!(worst < 5e-6, "max derivative residual {worst}");
    }

    #[test]
    fn from_measured_recovers_sine_derivatives() {
        let dt = 0.02;
        let n = 501;
        let om = 2.0 * std::f64::consts::PI * 0.2;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let l: Vec<f64> = times.iter().map(|&t| 0.3 - 0.01 * (om * t).sin()).collect();
        let tr = BodyLengthTrace::from_measured(&times, &l, 1).unwrap();
        for i in 10..n - 10 {
            let t = times[i];
            let want_d = -0.01 * om * (om * t).cos();
            let want_dd = 0.01 * om * om * (om * t).sin();
            assert!((tr.dl_dt[i] - want_d).abs() < 1e-4);
            assert!((tr.d2l_dt2[i] - want_dd).abs() < 1e-3);
        }
        assert_eq!(tr.delta_l[0], 0.0);
    }

    #[test]
    fn from_measured_rejects_bad_inputs() {
        let times = [0.0, 0.1, 0.25, 0.3];
        let l = [0.3, 0.3, 0.3, 0.3];
        assert!(matches!(
            BodyLengthTrace::from_measured(&times, &l, 1),
            Err(Error::NonUniformGrid { .. })
        ));
        let times = [0.0, 0.1, 0.2, 0.3];
        assert!(matches!(
            BodyLengthTrace::from_measured(&times, &l, 4),
            Err(Error::Config(_))
        ));
        assert!(BodyLengthTrace::from_measured(&times[..2], &l[..2], 1).is_err());
    }
}
