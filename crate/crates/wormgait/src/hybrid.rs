//! Hybrid locomotion model: continuous two-state dynamics within grooves,
//! discrete anchoring-position switching between grooves, and cable-force
//! recovery.
//!
//! Anchors live on the pitch lattice. The integrator is classical fixed-step
//! RK4 with the switching map applied as a fixpoint after every step; the
//! body-length input is supplied on a half-step grid so every RK4 stage sees
//! an exact sample rather than an interpolated one.

use crate::actuation::{check_uniform, propagate_actuation_steps, ActuationParams, BodyLengthTrace};
use crate::error::{Error, Result};
use crate::model::{GaitParams, RobotParams};

/// Kinematic robustness margin added to the switching threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginSetting {
    pub delta_m: f64,
}

impl MarginSetting {
    pub fn new(delta_m: f64) -> Result<Self> {
        if !delta_m.is_finite() || delta_m < 0.0 {
            return Err(Error::InvalidParam {
                name: "delta_m",
                reason: format!("margin must be nonnegative, got {delta_m}"),
            });
        }
        Ok(MarginSetting { delta_m })
    }

    /// Nominal switching (no margin).
    pub fn nominal() -> Self {
        MarginSetting { delta_m: 0.0 }
    }
}

/// Continuous state plus discrete anchors at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    /// Rear mass position (m).
    pub x1: f64,
    /// Rear mass velocity (m/s).
    pub v1: f64,
    /// Rear anchoring position (m).
    pub a1: f64,
    /// Front anchoring position (m).
    pub a2: f64,
    /// Time (s).
    pub t: f64,
}

impl HybridState {
    /// Rest start with both fins centered in their grooves: anchors at the
    /// initial fin-root positions.
    pub fn centered_start(params: &RobotParams) -> Self {
        HybridState {
            x1: 0.0,
            v1: 0.0,
            a1: 0.0,
            a2: params.l0,
            t: 0.0,
        }
    }

    /// Rest start with prescribed initial fin-groove offsets
    /// (`offset = fin root - anchor`).
    pub fn offset_start(params: &RobotParams, offset1: f64, offset2: f64) -> Self {
        HybridState {
            x1: 0.0,
            v1: 0.0,
            a1: -offset1,
            a2: params.l0 - offset2,
            t: 0.0,
        }
    }
}

/// One anchoring-position update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    /// 1 = rear anchor, 2 = front anchor.
    pub anchor: u8,
    /// +1 for a jump of +d, -1 for -d.
    pub direction: i8,
}

/// Simulated trajectory on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    /// Absolute body length L (m).
    pub body_length: Vec<f64>,
    /// Body-length rate (m/s).
    pub ldot: Vec<f64>,
    /// Body-length acceleration (m/s²).
    pub lddot: Vec<f64>,
    /// Rear-mass acceleration from the stored RK4 right-hand side (m/s²).
    pub accel: Vec<f64>,
    /// Recovered cable force (N).
    pub cable_force: Vec<f64>,
    pub switch_events: Vec<SwitchEvent>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }
}

/// Right-hand side of the reduced two-state dynamics: the rear mass carries
/// the whole system with both fin forces, the environmental drag of both
/// moving masses and the inertial reaction of the prescribed body-length
/// motion.
pub fn reduced_dynamics(
    state: &HybridState,
    params: &RobotParams,
    l_abs: f64,
    ldot: f64,
    lddot: f64,
) -> (f64, f64) {
    let law = params.fin_law();
    let f1 = law.oriented(state.x1 - state.a1);
    let f2 = law.oriented(state.x1 + l_abs - state.a2);
    let dv = (-2.0 * params.eta * state.v1 - f1 - f2 - params.eta * ldot - params.m2 * lddot)
        / (params.m1 + params.m2);
    (state.v1, dv)
}

/// Applies the anchoring-position updates to a post-step state until no
/// condition fires, recording each jump. Guarded against livelock.
pub fn apply_switching(
    state: &HybridState,
    l_abs: f64,
    params: &RobotParams,
    margin: &MarginSetting,
) -> Result<(HybridState, Vec<SwitchEvent>)> {
    let thr = params.p_sw + margin.delta_m;
    let mut a1 = state.a1;
    let mut a2 = state.a2;
    let mut events = Vec::new();
    loop {
        let mut fired = false;
        let off1 = state.x1 - a1;
        if off1 > thr {
            a1 += params.d;
            events.push(SwitchEvent { t: state.t, anchor: 1, direction: 1 });
            fired = true;
        } else if off1 < -thr {
            a1 -= params.d;
            events.push(SwitchEvent { t: state.t, anchor: 1, direction: -1 });
            fired = true;
        }
        let off2 = state.x1 + l_abs - a2;
        if off2 > thr {
            a2 += params.d;
            events.push(SwitchEvent { t: state.t, anchor: 2, direction: 1 });
            fired = true;
        } else if off2 < -thr {
            a2 -= params.d;
            events.push(SwitchEvent { t: state.t, anchor: 2, direction: -1 });
            fired = true;
        }
        if !fired {
            break;
        }
        if events.len() > 10 {
            return Err(Error::SwitchLivelock {
                t: state.t,
                count: events.len(),
            });
        }
    }
    Ok((
        HybridState { a1, a2, ..*state },
        events,
    ))
}

/// Resamples a body-length trace onto the integration half grid
/// (`2 * n_steps + 1` samples spaced `dt / 2`).
///
/// When the source grid already coincides with the half grid, samples pass
/// through bit-exactly; otherwise all three channels are linearly
/// interpolated.
pub fn resample_half_grid(
    body: &BodyLengthTrace,
    n_steps: usize,
    dt: f64,
) -> Result<BodyLengthTrace> {
    let src_dt = check_uniform(&body.times)?;
    let half = dt / 2.0;
    let n_half = 2 * n_steps;
    let need = n_half as f64 * half;
    if need > body.duration() + 1e-9 * dt.max(1.0) {
        return Err(Error::TraceTooShort(format!(
            "trace spans {} s, need {} s",
            body.duration(),
            need
        )));
    }
    if (half / src_dt - 1.0).abs() < 1e-12 && body.len() == n_half + 1 {
        return Ok(body.clone());
    }
    let lerp = |ys: &[f64], pos: f64| -> f64 {
        let i = (pos.floor() as usize).min(ys.len() - 2);
        let frac = pos - i as f64;
        ys[i] + frac * (ys[i + 1] - ys[i])
    };
    let mut times = Vec::with_capacity(n_half + 1);
    let mut delta_l = Vec::with_capacity(n_half + 1);
    let mut dl_dt = Vec::with_capacity(n_half + 1);
    let mut d2l = Vec::with_capacity(n_half + 1);
    for j in 0..=n_half {
        let t = j as f64 * half;
        let pos = t / src_dt;
        times.push(t);
        delta_l.push(lerp(&body.delta_l, pos));
        dl_dt.push(lerp(&body.dl_dt, pos));
        d2l.push(lerp(&body.d2l_dt2, pos));
    }
    Ok(BodyLengthTrace {
        times,
        delta_l,
        dl_dt,
        d2l_dt2: d2l,
    })
}

/// Integrates the reduced dynamics with the body-length input sampled on the
/// half grid. Core shared by the gait-driven and measured-length entry
/// points.
fn integrate_half_grid(
    half: &BodyLengthTrace,
    l0: f64,
    params: &RobotParams,
    margin: &MarginSetting,
    init: &HybridState,
    dt: f64,
) -> Result<SimTrace> {
    params.validate()?;
    debug_assert!(half.len() % 2 == 1, "half grid must have 2n+1 samples");
    let n = (half.len() - 1) / 2;
    let law = params.fin_law();
    let eta = params.eta;
    let m2 = params.m2;
    let msum = params.m1 + params.m2;
    let thr = params.p_sw + margin.delta_m;
    let d = params.d;

    // anchors tracked as lattice indices so every recorded value is exactly
    // init + k * d
    let a1_init = init.a1;
    let a2_init = init.a2;
    let mut i1: i64 = 0;
    let mut i2: i64 = 0;
    let mut x = init.x1;
    let mut v = init.v1;

    let l_at = |j: usize| l0 + half.delta_l[j];
    let rhs = |x: f64, v: f64, a1: f64, a2: f64, j: usize| -> f64 {
        let f1 = law.oriented(x - a1);
        let f2 = law.oriented(x + l_at(j) - a2);
        (-2.0 * eta * v - f1 - f2 - eta * half.dl_dt[j] - m2 * half.d2l_dt2[j]) / msum
    };

    let len = n + 1;
    let mut out = SimTrace {
        times: Vec::with_capacity(len),
        x1: Vec::with_capacity(len),
        x2: Vec::with_capacity(len),
        v1: Vec::with_capacity(len),
        v2: Vec::with_capacity(len),
        a1: Vec::with_capacity(len),
        a2: Vec::with_capacity(len),
        body_length: Vec::with_capacity(len),
        ldot: Vec::with_capacity(len),
        lddot: Vec::with_capacity(len),
        accel: Vec::with_capacity(len),
        cable_force: Vec::with_capacity(len),
        switch_events: Vec::new(),
    };

    let mut push_sample = |k: usize, x: f64, v: f64, a1: f64, a2: f64, acc: f64| {
        let j = 2 * k;
        let l = l_at(j);
        let ld = half.dl_dt[j];
        out.times.push(k as f64 * dt);
        out.x1.push(x);
        out.x2.push(x + l);
        out.v1.push(v);
        out.v2.push(v + ld);
        out.a1.push(a1);
        out.a2.push(a2);
        out.body_length.push(l);
        out.ldot.push(ld);
        out.lddot.push(half.d2l_dt2[j]);
        out.accel.push(acc);
        out.cable_force.push(
            params.m1 * acc + params.k_b * (params.l_free - l) - params.c_b * ld
                + eta * v
                + law.oriented(x - a1),
        );
    };

    let mut a1 = a1_init;
    let mut a2 = a2_init;
    push_sample(0, x, v, a1, a2, rhs(x, v, a1, a2, 0));

    for k in 0..n {
        let (j0, j1, j2) = (2 * k, 2 * k + 1, 2 * k + 2);
        let k1v = rhs(x, v, a1, a2, j0);
        let k1x = v;
        let k2v = rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v, a1, a2, j1);
        let k2x = v + 0.5 * dt * k1v;
        let k3v = rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v, a1, a2, j1);
        let k3x = v + 0.5 * dt * k2v;
        let k4v = rhs(x + dt * k3x, v + dt * k3v, a1, a2, j2);
        let k4x = v + dt * k3v;
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);

        // discrete anchor updates on the post-step state
        let t_now = (k + 1) as f64 * dt;
        let l_now = l_at(j2);
        let events_before = out.switch_events.len();
        loop {
            let mut fired = false;
            if x - a1 > thr {
                i1 += 1;
                a1 = a1_init + i1 as f64 * d;
                out.switch_events.push(SwitchEvent { t: t_now, anchor: 1, direction: 1 });
                fired = true;
            } else if x - a1 < -thr {
                i1 -= 1;
                a1 = a1_init + i1 as f64 * d;
                out.switch_events.push(SwitchEvent { t: t_now, anchor: 1, direction: -1 });
                fired = true;
            }
            if x + l_now - a2 > thr {
                i2 += 1;
                a2 = a2_init + i2 as f64 * d;
                out.switch_events.push(SwitchEvent { t: t_now, anchor: 2, direction: 1 });
                fired = true;
            } else if x + l_now - a2 < -thr {
                i2 -= 1;
                a2 = a2_init + i2 as f64 * d;
                out.switch_events.push(SwitchEvent { t: t_now, anchor: 2, direction: -1 });
                fired = true;
            }
            if !fired {
                break;
            }
            let fired_this_step = out.switch_events.len() - events_before;
            if fired_this_step > 10 {
                return Err(Error::SwitchLivelock {
                    t: t_now,
                    count: fired_this_step,
                });
            }
        }

        push_sample(k + 1, x, v, a1, a2, rhs(x, v, a1, a2, j2));
    }

    Ok(out)
}

/// Simulates the full gait pipeline: commanded gait through the slack-aware
/// actuation model, then the hybrid locomotion dynamics with robust
/// switching.
pub fn simulate(
    gait: &GaitParams,
    params: &RobotParams,
    act: &ActuationParams,
    margin: &MarginSetting,
    n_cycles: usize,
    dt: f64,
    init: &HybridState,
) -> Result<SimTrace> {
    if n_cycles < 1 {
        return Err(Error::Config("n_cycles must be at least 1".into()));
    }
    if !(gait.freq_f > 0.0) {
        return Err(Error::InvalidParam {
            name: "freq_f",
            reason: format!("must be positive, got {}", gait.freq_f),
        });
    }
    let max_dt = act.tau.min(gait.period()) / 50.0;
    if !(dt > 0.0) || dt > max_dt {
        return Err(Error::Resolution { dt, max: max_dt });
    }
    let t_end = n_cycles as f64 * gait.period();
    let n_steps = (t_end / dt).round().max(1.0) as usize;
    // body-length input on the half grid: exact at all RK4 stage points
    let body = propagate_actuation_steps(act, gait, 2 * n_steps, dt / 2.0, 0.0)?;
    integrate_half_grid(&body, params.l0, params, margin, init, dt)
}

/// Simulates the hybrid dynamics driven by a supplied body-length trace (a
/// measured run, or any externally constructed input).
///
/// `l0` is the absolute length corresponding to `delta_l = 0`; for measured
/// data built with [`BodyLengthTrace::from_measured`] that is the first
/// length sample. The trace is resampled onto the integration half grid; a
/// trace already on that grid passes through bit-exactly.
pub fn simulate_measured(
    body: &BodyLengthTrace,
    l0: f64,
    params: &RobotParams,
    margin: &MarginSetting,
    init: &HybridState,
    dt: f64,
) -> Result<SimTrace> {
    // explicit damping-stability guard: RK4 loses the fast velocity mode
    // above ~2.8 / (2 eta / (M1 + M2)); stay at half that
    let max_dt = 1.39 * (params.m1 + params.m2) / (2.0 * params.eta);
    if !(dt > 0.0) || dt > max_dt {
        return Err(Error::Resolution { dt, max: max_dt });
    }
    let n_steps = ((body.duration() / dt) + 1e-9).floor() as usize;
    if n_steps == 0 {
        return Err(Error::TraceTooShort(format!(
            "trace spans {} s, shorter than one integration step {} s",
            body.duration(),
            dt
        )));
    }
    let half = resample_half_grid(body, n_steps, dt)?;
    integrate_half_grid(&half, l0, params, margin, init, dt)
}

/// Recovers the cable traction force along a simulated trace from the stored
/// accelerations (not re-differenced).
pub fn recover_cable_force(
    trace: &SimTrace,
    params: &RobotParams,
    body: &BodyLengthTrace,
) -> Result<Vec<f64>> {
    if body.len() != trace.len() {
        return Err(Error::GridMismatch(format!(
            "trace has {} samples, body-length trace {}",
            trace.len(),
            body.len()
        )));
    }
    for (i, (&a, &b)) in trace.times.iter().zip(body.times.iter()).enumerate() {
        if (a - b).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "time grids differ at sample {i}: {a} vs {b}"
            )));
        }
    }
    let law = params.fin_law();
    Ok((0..trace.len())
        .map(|i| {
            params.m1 * trace.accel[i] + params.k_b * (params.l_free - trace.body_length[i])
                - params.c_b * body.dl_dt[i]
                + params.eta * trace.v1[i]
                + law.oriented(trace.x1[i] - trace.a1[i])
        })
        .collect())
}

/// Pointwise residual of the front-mass equation of the original two-mass
/// model, using the recovered cable force. Certifies that the two-state
/// reduction plus cable-force recovery reproduces the four-state model.
pub fn front_mass_residual(trace: &SimTrace, params: &RobotParams) -> Vec<f64> {
    let law = params.fin_law();
    (0..trace.len())
        .map(|i| {
            let x2dd = trace.accel[i] + trace.lddot[i];
            params.m2 * x2dd
                + trace.cable_force[i]
                + params.k_b * (trace.body_length[i] - params.l_free)
                + params.c_b * trace.ldot[i]
                + params.eta * trace.v2[i]
                + law.oriented(trace.x2[i] - trace.a2[i])
        })
        .collect()
}
