//! Shared domain types: physical parameter set, commanded gait signal and the
//! clearance-aware fin-groove interaction law.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Physical constants of the robot-pipe system.
///
/// Distances and stiffnesses are SI (m, N/m, N·s/m, kg) throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    /// Mass of the rear end module (kg).
    pub m1: f64,
    /// Mass of the front end module (kg).
    pub m2: f64,
    /// Unstressed body length (m).
    pub l_free: f64,
    /// Initial body length (m); defaults to `l_free` (unstressed start).
    pub l0: f64,
    /// Bellows stiffness (N/m).
    pub k_b: f64,
    /// Bellows damping (N·s/m).
    pub c_b: f64,
    /// Lumped viscous friction coefficient (N·s/m).
    pub eta: f64,
    /// Spatial pitch of the pipe ridges (m).
    pub d: f64,
    /// Fin deformation stiffness, anchoring engagement (N/m).
    pub k_eng: f64,
    /// Fin deformation stiffness, anchoring disengagement (N/m).
    pub k_dis: f64,
    /// Anchoring-position switching threshold (m).
    pub p_sw: f64,
    /// Groove clearance dead-zone width (m).
    pub delta_c: f64,
}

impl RobotParams {
    /// The identified parameter set of the physical robot.
    pub fn identified() -> Self {
        RobotParams {
            m1: 0.429,
            m2: 0.429,
            l_free: 0.30,
            l0: 0.30,
            k_b: 968.8,
            c_b: 862.4,
            eta: 86.97,
            d: 0.0173,
            k_eng: 1833.1,
            k_dis: 442.0,
            p_sw: 0.0175,
            delta_c: 0.00753,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l_free", self.l_free),
            ("l0", self.l0),
            ("k_b", self.k_b),
            ("c_b", self.c_b),
            ("eta", self.eta),
            ("d", self.d),
            ("k_eng", self.k_eng),
            ("k_dis", self.k_dis),
            ("p_sw", self.p_sw),
            ("delta_c", self.delta_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must be strictly positive, got {v}"),
                });
            }
        }
        if self.k_eng <= self.k_dis {
            return Err(Error::InvalidParam {
                name: "k_eng",
                reason: format!(
                    "anisotropy requires k_eng > k_dis, got {} <= {}",
                    self.k_eng, self.k_dis
                ),
            });
        }
        if self.delta_c / 2.0 >= self.p_sw {
            return Err(Error::InvalidParam {
                name: "p_sw",
                reason: format!(
                    "switching threshold must exceed the clearance half-width, got {} <= {}",
                    self.p_sw,
                    self.delta_c / 2.0
                ),
            });
        }
        Ok(())
    }

    pub fn fin_law(&self) -> FinForceLaw {
        FinForceLaw {
            k_eng: self.k_eng,
            k_dis: self.k_dis,
            delta_c: self.delta_c,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }
}

/// Gait decision vector: contraction stroke and operation frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitParams {
    /// Contraction stroke S (m).
    pub stroke_s: f64,
    /// Operation frequency f (Hz).
    pub freq_f: f64,
}

impl GaitParams {
    pub fn new(stroke_s: f64, freq_f: f64) -> Self {
        GaitParams { stroke_s, freq_f }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.freq_f
    }

    pub fn validate(&self, bounds: &GaitBounds) -> Result<()> {
        if !self.stroke_s.is_finite() || self.stroke_s < bounds.s_min || self.stroke_s > bounds.s_max {
            return Err(Error::InvalidParam {
                name: "stroke_s",
                reason: format!(
                    "stroke {} m outside [{}, {}] m",
                    self.stroke_s, bounds.s_min, bounds.s_max
                ),
            });
        }
        if !self.freq_f.is_finite() || self.freq_f < bounds.f_min || self.freq_f > bounds.f_max {
            return Err(Error::InvalidParam {
                name: "freq_f",
                reason: format!(
                    "frequency {} Hz outside [{}, {}] Hz",
                    self.freq_f, bounds.f_min, bounds.f_max
                ),
            });
        }
        Ok(())
    }
}

/// Admissible gait box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitBounds {
    pub s_min: f64,
    pub s_max: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for GaitBounds {
    fn default() -> Self {
        GaitBounds {
            s_min: 0.01,
            s_max: 0.09,
            f_min: 0.08,
            f_max: 0.4,
        }
    }
}

/// Commanded body-length change at time `t`: a raised-cosine contraction,
/// zero at t = 0, reaching -S at the half period.
pub fn commanded_gait(gait: &GaitParams, t: f64) -> f64 {
    -(gait.stroke_s / 2.0) * (1.0 - (2.0 * PI * gait.freq_f * t).cos())
}

/// Time derivative of [`commanded_gait`].
pub fn commanded_gait_rate(gait: &GaitParams, t: f64) -> f64 {
    -(gait.stroke_s / 2.0) * 2.0 * PI * gait.freq_f * (2.0 * PI * gait.freq_f * t).sin()
}

/// Clearance-aware piecewise linear fin-groove interaction law, as identified
/// on the fin test bench: a dead zone of width `delta_c` around the anchor,
/// the engaged stiffness on the positive branch and the disengaged stiffness
/// on the negative branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinForceLaw {
    pub k_eng: f64,
    pub k_dis: f64,
    pub delta_c: f64,
}

impl FinForceLaw {
    /// Bench-frame force at relative displacement `x` from the anchor.
    pub fn force(&self, x: f64) -> f64 {
        let h = self.delta_c / 2.0;
        if x > h {
            self.k_eng * (x - h)
        } else if x < -h {
            self.k_dis * (x + h)
        } else {
            0.0
        }
    }

    /// World-frame force for a fin mounted in the forward-travel
    /// configuration.
    ///
    /// The bench law above is measured with the stiff (engaged) side opposing
    /// positive displacement. Mounted for forward travel, the fin presents
    /// that stiff side against backward slip and the soft side toward the
    /// next ridge, which mirrors the law: `F(x) = -force(-x)`. Disengagement
    /// (easy slip) then points in the direction of locomotion and the anchors
    /// ratchet forward.
    pub fn oriented(&self, x: f64) -> f64 {
        -self.force(-x)
    }
}

/// Free function mirror of [`FinForceLaw::force`], kept for call sites that
/// hold the parameters rather than the law.
pub fn fin_force(law: &FinForceLaw, x: f64) -> f64 {
    law.force(x)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        // monotone nondecreasing in x, hence also f(0)=0 separates the signs
        #[test]
        fn fin_force_monotone(a in -0.05f64..0.05, b in -0.05f64..0.05) {
            let l = RobotParams::identified().fin_law();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(l.force(lo) <= l.force(hi));
        }

        // engagement dominates disengagement in magnitude
        #[test]
        fn fin_force_anisotropy(x in 0.004f64..0.08) {
            let l = RobotParams::identified().fin_law();
            prop_assert!(l.force(x) >= -l.force(-x));
        }

        #[test]
        fn commanded_gait_stays_in_band(s in 0.01f64..0.09, f in 0.08f64..0.4, t in 0.0f64..100.0) {
            let g = GaitParams::new(s, f);
            let u = commanded_gait(&g, t);
            prop_assert!(u <= 1e-15 && u >= -s - 1e-15);
        }
    }
}
