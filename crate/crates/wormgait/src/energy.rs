//! System power model, energy accumulation and the per-gait performance
//! metrics (average speed, average power, cost of transport).

use crate::error::{Error, Result};
use crate::hybrid::SimTrace;
use crate::model::{GaitParams, RobotParams};

/// Standard gravity used in the weight-normalized cost of transport;
/// overridable through the config file.
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Parameters of the source-side power model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Idle baseline power (W).
    pub p_idle: f64,
    /// Lumped actuation power factor (dimensionless).
    pub alpha_p: f64,
}

impl EnergyParams {
    /// The identified parameter set of the physical robot.
    pub fn identified() -> Self {
        EnergyParams {
            p_idle: 0.82,
            alpha_p: 3.22,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p_idle.is_finite() || self.p_idle < 0.0 {
            return Err(Error::InvalidParam {
                name: "p_idle",
                reason: format!("must be nonnegative, got {}", self.p_idle),
            });
        }
        if !self.alpha_p.is_finite() || self.alpha_p < 1.0 {
            return Err(Error::InvalidParam {
                name: "alpha_p",
                reason: format!(
                    "lumped losses cannot make electrical power less than mechanical; need alpha_p >= 1, got {}",
                    self.alpha_p
                ),
            });
        }
        Ok(())
    }
}

/// Instantaneous source-side power: idle baseline plus the positive
/// mechanical cable power scaled by the lumped actuation factor.
pub fn instantaneous_power(f_c: f64, l_dot: f64, params: &EnergyParams) -> f64 {
    params.p_idle + params.alpha_p * (-f_c * l_dot).max(0.0)
}

/// Power along a simulated trace.
pub fn power_series(trace: &SimTrace, params: &EnergyParams) -> Vec<f64> {
    trace
        .cable_force
        .iter()
        .zip(trace.ldot.iter())
        .map(|(&fc, &ld)| instantaneous_power(fc, ld, params))
        .collect()
}

/// Cumulative trapezoidal integral of a uniformly sampled power signal.
/// `E[0] = 0`.
pub fn accumulate_energy(power: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(power.len());
    let mut acc = 0.0;
    for i in 0..power.len() {
        if i > 0 {
            acc += 0.5 * (power[i - 1] + power[i]) * dt;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Average of the first ten power samples; the instrument reads idle power
/// before actuation onset.
pub fn estimate_idle_power(p_meas: &[f64]) -> Result<f64> {
    if p_meas.len() < 10 {
        return Err(Error::TraceTooShort(format!(
            "idle-power estimate needs 10 samples, got {}",
            p_meas.len()
        )));
    }
    Ok(p_meas[..10].iter().sum::<f64>() / 10.0)
}

/// Performance metrics of one evaluated gait.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitMetrics {
    /// Average speed over the evaluation window (m/s).
    pub avg_speed: f64,
    /// Average power over the evaluation window (W).
    pub avg_power: f64,
    /// Weight-normalized cost of transport; `+inf` when the gait does not
    /// advance.
    pub cot: f64,
    /// Energy per distance (J/m), the alternative unnormalized indicator;
    /// `+inf` when the gait does not advance.
    pub energy_per_distance: f64,
    /// Evaluation window (s).
    pub eval_window: (f64, f64),
}

/// Speed below which a gait counts as stationary and the transport costs
/// degenerate to the infinity sentinel.
pub const SPEED_SENTINEL: f64 = 1e-9;

/// Metrics over the last three cycles of a simulated run of at least five
/// cycles: transients die out in the first two.
pub fn gait_metrics(
    trace: &SimTrace,
    power: &[f64],
    gait: &GaitParams,
    robot: &RobotParams,
    gravity: f64,
) -> Result<GaitMetrics> {
    if power.len() != trace.len() {
        return Err(Error::GridMismatch(format!(
            "power series has {} samples, trace {}",
            power.len(),
            trace.len()
        )));
    }
    if trace.len() < 2 {
        return Err(Error::TraceTooShort("trace has fewer than 2 samples".into()));
    }
    let dt = trace.dt();
    let duration = *trace.times.last().unwrap();
    let period = gait.period();
    // the step count rounds, so allow a deficit of up to one step
    if duration < 5.0 * period - dt - 1e-9 {
        return Err(Error::TraceTooShort(format!(
            "metrics need at least five cycles ({} s), trace spans {} s",
            5.0 * period,
            duration
        )));
    }
    let window = 3.0 * period;
    let t_start = duration - window;
    let i0 = (t_start / dt).round() as usize;
    let t0 = trace.times[i0];

    let avg_speed = (trace.x1[trace.len() - 1] - trace.x1[i0]) / window;

    let mut energy = 0.0;
    for i in i0 + 1..trace.len() {
        energy += 0.5 * (power[i - 1] + power[i]) * dt;
    }
    let avg_power = energy / (duration - t0);

    let (cot, energy_per_distance) = if avg_speed > SPEED_SENTINEL {
        (
            avg_power / (robot.total_mass() * gravity * avg_speed),
            avg_power / avg_speed,
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };

    Ok(GaitMetrics {
        avg_speed,
        avg_power,
        cot,
        energy_per_distance,
        eval_window: (t0, duration),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuation::ActuationParams;
    use crate::hybrid::{simulate, HybridState, MarginSetting};

    fn energy() -> EnergyParams {
        EnergyParams::identified()
    }

    #[test]
    fn power_spot_values() {
        let p = energy();
        // expansion stroke: cable does no positive work, clamp to idle
        assert_eq!(instantaneous_power(10.0, 0.02, &p), 0.82);
        // contraction under tension
        let got = instantaneous_power(10.0, -0.02, &p);
        assert!((got - 1.464).abs() < 1e-12, "got {got}");
        // no cable force
        assert_eq!(instantaneous_power(0.0, -0.5, &p), 0.82);
        assert_eq!(instantaneous_power(0.0, 0.5, &p), 0.82);
    }

    #[test]
    fn power_never_below_idle() {
        let p = energy();
        for k in -100..100 {
            let fc = k as f64 * 0.7;
            let ld = ((k * 37) % 17) as f64 * 0.003;
            assert!(instantaneous_power(fc, ld, &p) >= p.p_idle);
        }
    }

    #[test]
    fn accumulate_constant_power() {
        let p = vec![0.82; 101];
        let e = accumulate_energy(&p, 0.1).unwrap();
        assert_eq!(e[0], 0.0);
        assert!((e[100] - 8.2).abs() < 1e-12);
    }

    #[test]
    fn accumulate_zero_power() {
        let e = accumulate_energy(&vec![0.0; 50], 0.01).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn accumulate_triangular_pulse() {
        // rises 0 -> 2 W over 0.5 s, falls back over 0.5 s: exactly 1 J
        let n = 1001;
        let dt = 1e-3;
        let p: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                if t <= 0.5 {
                    4.0 * t
                } else {
                    4.0 * (1.0 - t).max(0.0)
                }
            })
            .collect();
        let e = accumulate_energy(&p, dt).unwrap();
        assert!((e[n - 1] - 1.0).abs() < 1e-9, "got {}", e[n - 1]);
        // monotone nondecreasing
        for i in 1..n {
            assert!(e[i] >= e[i - 1]);
        }
    }

    #[test]
    fn accumulate_rejects_bad_dt() {
        assert!(accumulate_energy(&[1.0, 2.0], 0.0).is_err());
        assert!(accumulate_energy(&[1.0, 2.0], -0.1).is_err());
    }

    #[test]
    fn idle_power_estimates() {
        assert!((estimate_idle_power(&[0.82; 10]).unwrap() - 0.82).abs() < 1e-15);
        let ramp: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        assert_eq!(estimate_idle_power(&ramp).unwrap(), 5.5);
        // samples beyond the tenth are ignored
        let mut long = ramp.clone();
        long.push(100.0);
        long.push(100.0);
        assert_eq!(estimate_idle_power(&long).unwrap(), 5.5);
        assert!(estimate_idle_power(&[1.0; 9]).is_err());
    }

    fn ramp_trace(rate: f64, f: f64, n_cycles: f64, dt: f64) -> SimTrace {
        let n = (n_cycles / f / dt).round() as usize + 1;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let x1: Vec<f64> = times.iter().map(|&t| rate * t).collect();
        SimTrace {
            x2: x1.iter().map(|x| x + 0.3).collect(),
            v1: vec![rate; n],
            v2: vec![rate; n],
            a1: vec![0.0; n],
            a2: vec![0.3; n],
            body_length: vec![0.3; n],
            ldot: vec![0.0; n],
            lddot: vec![0.0; n],
            accel: vec![0.0; n],
            cable_force: vec![0.0; n],
            switch_events: Vec::new(),
            times,
            x1,
        }
    }

    #[test]
    fn metrics_speed_from_three_ridges() {
        let robot = RobotParams::identified();
        let gait = GaitParams::new(0.07, 0.2);
        // advance exactly 3 d over the last three cycles (15 s)
        let rate = 3.0 * robot.d / 15.0;
        let tr = ramp_trace(rate, 0.2, 5.0, 1e-2);
        let power = vec![0.82; tr.len()];
        let m = gait_metrics(&tr, &power, &gait, &robot, STANDARD_GRAVITY).unwrap();
        assert!((m.avg_speed - 0.00346).abs() < 1e-9, "v = {}", m.avg_speed);
        assert!((m.avg_power - 0.82).abs() < 1e-12);
        assert!(m.cot.is_finite());
    }

    #[test]
    fn metrics_zero_displacement_gets_sentinel() {
        let robot = RobotParams::identified();
        let gait = GaitParams::new(0.07, 0.2);
        let tr = ramp_trace(0.0, 0.2, 5.0, 1e-2);
        let power = vec![0.82; tr.len()];
        let m = gait_metrics(&tr, &power, &gait, &robot, STANDARD_GRAVITY).unwrap();
        assert_eq!(m.avg_speed, 0.0);
        assert!(m.cot.is_infinite());
        assert!(m.energy_per_distance.is_infinite());
    }

    #[test]
    fn metrics_cot_formula() {
        let robot = RobotParams::identified();
        let gait = GaitParams::new(0.07, 0.2);
        let tr = ramp_trace(0.005, 0.2, 5.0, 1e-2);
        let power = vec![1.464; tr.len()];
        let m = gait_metrics(&tr, &power, &gait, &robot, STANDARD_GRAVITY).unwrap();
        let expect = 1.464 / (0.858 * 9.81 * 0.005);
        assert!((m.cot - expect).abs() < 1e-9);
        assert!((m.cot - 34.78).abs() < 0.01);
        assert!((m.energy_per_distance - 1.464 / 0.005).abs() < 1e-9);
    }

    #[test]
    fn metrics_reject_short_trace() {
        let robot = RobotParams::identified();
        let gait = GaitParams::new(0.07, 0.2);
        let tr = ramp_trace(0.005, 0.2, 4.0, 1e-2);
        let power = vec![0.82; tr.len()];
        assert!(matches!(
            gait_metrics(&tr, &power, &gait, &robot, STANDARD_GRAVITY),
            Err(Error::TraceTooShort(_))
        ));
    }

    #[test]
    fn alpha_scaling_doubles_excess_power() {
        let params = RobotParams::identified();
        let act = ActuationParams::identified();
        let gait = GaitParams::new(0.07, 0.2);
        let tr = simulate(
            &gait,
            &params,
            &act,
            &MarginSetting::nominal(),
            5,
            2e-3,
            &HybridState::centered_start(&params),
        )
        .unwrap();
        let e1 = EnergyParams { p_idle: 0.82, alpha_p: 3.22 };
        let e2 = EnergyParams { p_idle: 0.82, alpha_p: 6.44 };
        let p1 = power_series(&tr, &e1);
        let p2 = power_series(&tr, &e2);
        let m1 = gait_metrics(&tr, &p1, &gait, &params, STANDARD_GRAVITY).unwrap();
        let m2 = gait_metrics(&tr, &p2, &gait, &params, STANDARD_GRAVITY).unwrap();
        let excess1 = m1.avg_power - e1.p_idle;
        let excess2 = m2.avg_power - e2.p_idle;
        assert!((excess2 - 2.0 * excess1).abs() < 1e-12 * excess1.abs().max(1.0));
        assert!(excess1 > 0.0, "reference gait must draw actuation power");
    }

    #[test]
    fn speed_from_either_mass_agrees_on_integer_cycles() {
        let params = RobotParams::identified();
        let act = ActuationParams::identified();
        let gait = GaitParams::new(0.07, 0.2);
        let tr = simulate(
            &gait,
            &params,
            &act,
            &MarginSetting::nominal(),
            5,
            1e-3,
            &HybridState::centered_start(&params),
        )
        .unwrap();
        let dt = tr.dt();
        let i0 = ((2.0 / 0.2) / dt).round() as usize;
        let window = 15.0;
        let v_x1 = (tr.x1.last().unwrap() - tr.x1[i0]) / window;
        let v_x2 = (tr.x2.last().unwrap() - tr.x2[i0]) / window;
        assert!((v_x1 - v_x2).abs() < 1e-9, "{v_x1} vs {v_x2}");
    }

    #[test]
    fn energy_params_validation() {
        assert!(energy().validate().is_ok());
        assert!(EnergyParams { p_idle: -0.1, alpha_p: 3.0 }.validate().is_err());
        assert!(EnergyParams { p_idle: 0.5, alpha_p: 0.9 }.validate().is_err());
    }
}
