//! Cosine-ramp flux pulses.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Flux pulse: cosine ramp from `phi_off` to `phi_on` over `t_r`, plateau for
/// `t_p`, mirrored ramp back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub phi_off: f64,
    pub phi_on: f64,
    pub t_r: f64,
    pub t_p: f64,
}

impl PulseSpec {
    pub fn new(phi_off: f64, phi_on: f64, t_r: f64, t_p: f64) -> Result<Self> {
        let p = PulseSpec { phi_off, phi_on, t_r, t_p };
        p.validate()?;
        Ok(p)
    }

    /// Pulse with total duration `t_g` and ramp time `t_r`.
    pub fn with_gate_time(phi_off: f64, phi_on: f64, t_r: f64, t_g: f64) -> Result<Self> {
        let t_p = t_g - 2.0 * t_r;
        if t_p < 0.0 && t_p > -1e-12 {
            return Self::new(phi_off, phi_on, t_r, 0.0);
        }
        Self::new(phi_off, phi_on, t_r, t_p)
    }

    pub fn idle(phi: f64, duration: f64) -> Result<Self> {
        Self::new(phi, phi, 0.0, duration)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.phi_off, self.phi_on, self.t_r, self.t_p].iter().all(|x| x.is_finite());
        if !finite || self.t_r < 0.0 || self.t_p < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "pulse needs finite values with t_r >= 0 and t_p >= 0 (got t_r={}, t_p={})",
                self.t_r, self.t_p
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_p + 2.0 * self.t_r
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let tg = self.duration();
        if !(0.0..=tg).contains(&t) {
            return Err(Error::Domain(format!("pulse time {t} outside [0, {tg}]")));
        }
        Ok(self.value_clamped(t))
    }

    /// Value with `t` clamped into the pulse window.
    pub fn value_clamped(&self, t: f64) -> f64 {
        let tg = self.duration();
        let t = t.clamp(0.0, tg);
        if t == 0.0 || t == tg {
            return self.phi_off;
        }
        let ramp = |s: f64| {
            self.phi_off + (self.phi_on - self.phi_off) * (1.0 - (std::f64::consts::PI * s / self.t_r).cos()) / 2.0
        };
        if t < self.t_r {
            ramp(t)
        } else if t <= self.t_r + self.t_p {
            self.phi_on
        } else {
            ramp(tg - t)
        }
    }
}

/// Simultaneous flux pulses on the coupler and, optionally, either qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    pub coupler: PulseSpec,
    pub qubit_a: Option<PulseSpec>,
    pub qubit_b: Option<PulseSpec>,
}

impl DriveSchedule {
    pub fn coupler_only(coupler: PulseSpec) -> Self {
        DriveSchedule { coupler, qubit_a: None, qubit_b: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.coupler.validate()?;
        for p in [self.qubit_a, self.qubit_b].into_iter().flatten() {
            p.validate()?;
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        [Some(self.coupler), self.qubit_a, self.qubit_b]
            .into_iter()
            .flatten()
            .map(|p| p.duration())
            .fold(0.0, f64::max)
    }

    /// (Φ_S, Φ_A, Φ_B) at time `t`; a pulse past its end holds its off value.
    pub fn fluxes(&self, t: f64) -> (f64, Option<f64>, Option<f64>) {
        (
            self.coupler.value_clamped(t),
            self.qubit_a.map(|p| p.value_clamped(t)),
            self.qubit_b.map(|p| p.value_clamped(t)),
        )
    }

    /// Piecewise breakpoints where some pulse changes segment.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0, self.duration()];
        for p in [Some(self.coupler), self.qubit_a, self.qubit_b].into_iter().flatten() {
            pts.extend([p.t_r, p.t_r + p.t_p, p.duration()]);
        }
        pts.retain(|x| *x >= 0.0 && *x <= self.duration());
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        pts
    }

    /// Interval on which every pulse sits on its plateau, if any.
    pub fn common_plateau(&self) -> Option<(f64, f64)> {
        let mut lo: f64 = 0.0;
        let mut hi = self.duration();
        for p in [Some(self.coupler), self.qubit_a, self.qubit_b].into_iter().flatten() {
            lo = lo.max(p.t_r);
            hi = hi.min(p.t_r + p.t_p);
        }
        (hi > lo).then_some((lo, hi))
    }
}
