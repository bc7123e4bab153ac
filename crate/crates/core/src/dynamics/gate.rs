//! Gate simulation, error landscapes and gate-time optimization.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evolve::{
    jump_operators, propagate_columns, propagate_lindblad_many, propagator_segmented, DrivenSystem, NoiseModel,
};
use super::ode::Tolerances;
use super::pulse::{DriveSchedule, PulseSpec};
use super::tomography::{
    basis_images_from_qpt, extract_conditional_phase, gate_fidelity, qpt_inputs, remove_local_z_frames, swap_angle,
    LocalFrames, ProcessMatrix,
};
use crate::circuit::CircuitDesign;
use crate::composite::{diagonalize_and_label, CircuitSpec};
use crate::linalg::{self, Eigh};
use crate::zz::golden_min_tol;
use crate::{CMat, Error, Result, C64};

/// Leakage above this raises the warning flag on a report.
pub const LEAKAGE_WARNING: f64 = 0.05;

/// Target swap angle of the √iSWAP-like gate.
pub const TARGET_THETA: f64 = FRAC_PI_2;

/// Which states count as |00⟩, |01⟩, |10⟩, |11⟩.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisChoice {
    /// Bare product states of the parked qubit eigenbases.
    #[default]
    Bare,
    /// Labeled eigenstates of the full Hamiltonian at the off point.
    Dressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateScheme {
    /// Only the coupler flux is pulsed; x is Φ_S during the plateau.
    CouplerOnly,
    /// Coupler to a fixed Φ_S plus qubit A detuned; x is Φ_A during the plateau.
    Detuned,
}

impl std::fmt::Display for GateScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GateScheme::CouplerOnly => "coupler_only",
            GateScheme::Detuned => "detuned",
        })
    }
}

/// Fixed pulse parameters of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSettings {
    pub t_r: f64,
    /// Coupler plateau flux in the detuned scheme.
    pub detuned_phi_s_on: f64,
}

impl SchemeSettings {
    pub fn default_for(scheme: GateScheme) -> Self {
        match scheme {
            GateScheme::CouplerOnly => SchemeSettings { t_r: 2.0, detuned_phi_s_on: 0.49 },
            GateScheme::Detuned => SchemeSettings { t_r: 6.0, detuned_phi_s_on: 0.49 },
        }
    }
}

/// Pulse amplitudes and shared ramp time; the plateau follows from t_g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePlan {
    /// (off, on) coupler flux.
    pub coupler: (f64, f64),
    pub qubit_a: Option<(f64, f64)>,
    pub qubit_b: Option<(f64, f64)>,
    pub t_r: f64,
}

impl GatePlan {
    pub fn for_scheme(scheme: GateScheme, x: f64, settings: &SchemeSettings, model: &GateModel) -> Self {
        let off = model.phi_s_off;
        match scheme {
            GateScheme::CouplerOnly => GatePlan { coupler: (off, x), qubit_a: None, qubit_b: None, t_r: settings.t_r },
            GateScheme::Detuned => GatePlan {
                coupler: (off, settings.detuned_phi_s_on),
                qubit_a: Some((model.driven.park[0], x)),
                qubit_b: None,
                t_r: settings.t_r,
            },
        }
    }

    pub fn schedule(&self, t_g: f64) -> Result<DriveSchedule> {
        let mk = |(off, on): (f64, f64)| PulseSpec::with_gate_time(off, on, self.t_r, t_g);
        Ok(DriveSchedule {
            coupler: mk(self.coupler)?,
            qubit_a: self.qubit_a.map(mk).transpose()?,
            qubit_b: self.qubit_b.map(mk).transpose()?,
        })
    }

    /// Shortest allowed gate time (no plateau).
    pub fn min_gate_time(&self) -> f64 {
        2.0 * self.t_r
    }
}

/// Outcome of one simulated gate.
#[derive(Debug, Clone)]
pub struct GateReport {
    pub t_g: f64,
    pub theta: f64,
    pub xi: f64,
    /// 1 − mean population kept in the computational subspace.
    pub leakage: f64,
    pub fidelity: f64,
    pub leakage_warning: bool,
    /// Frame-corrected computational-subspace propagator (closed dynamics).
    pub propagator: CMat,
    pub chi: ProcessMatrix,
    pub noise: Option<NoiseModel>,
}

impl GateReport {
    pub fn error(&self) -> f64 {
        1.0 - self.fidelity
    }
}

/// Driven system together with its computational subspace.
#[derive(Debug, Clone)]
pub struct GateModel {
    pub driven: DrivenSystem,
    pub basis: BasisChoice,
    pub phi_s_off: f64,
    pub tol: Tolerances,
    /// Columns |00⟩, |01⟩, |10⟩, |11⟩.
    comp: CMat,
    /// Energies used for the rotating frame of the computational states.
    frame_energies: [f64; 4],
}

impl GateModel {
    /// The coupler off point is the system's stored Φ_S.
    pub fn new(driven: DrivenSystem, basis: BasisChoice, tol: Tolerances) -> Result<Self> {
        tol.validate()?;
        let phi_s_off = driven.system.squid.phi_s;
        let system = &driven.system;
        let labels: Vec<Vec<usize>> = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|l| {
                let mut v = l.to_vec();
                if system.design == CircuitDesign::Floating {
                    v.push(0);
                }
                v
            })
            .collect();
        let n = system.dim();
        let mut comp = CMat::zeros(n, 4);
        match basis {
            BasisChoice::Bare => {
                for (k, l) in labels.iter().enumerate() {
                    comp[(system.flat_index(l)?, k)] = C64::new(1.0, 0.0);
                }
            }
            BasisChoice::Dressed => {
                let spec = diagonalize_and_label(system, phi_s_off)?;
                for (k, l) in labels.iter().enumerate() {
                    let idx = spec.index_of(l)?;
                    comp.set_column(k, &spec.vectors.column(idx));
                }
            }
        }
        let h_off = driven.hamiltonian_with_fluxes(phi_s_off, None, None);
        let mut frame_energies = [0.0; 4];
        for (k, e) in frame_energies.iter_mut().enumerate() {
            let v = comp.column(k);
            *e = (v.adjoint() * &h_off * v)[(0, 0)].re;
        }
        Ok(GateModel { driven, basis, phi_s_off, tol, comp, frame_energies })
    }

    pub fn from_spec(spec: &CircuitSpec, basis: BasisChoice, tol: Tolerances) -> Result<Self> {
        Self::new(DrivenSystem::from_spec(spec)?, basis, tol)
    }

    pub fn computational_vectors(&self) -> &CMat {
        &self.comp
    }

    fn frame(&self, t_g: f64) -> [C64; 4] {
        self.frame_energies.map(|e| C64::from_polar(1.0, TAU * e * t_g))
    }

    /// 4×4 block ⟨c_i|U|c_j⟩ in the frame rotating with the computational energies.
    pub fn project(&self, u_full: &CMat, t_g: f64) -> CMat {
        let r = self.frame(t_g);
        let mut u = self.comp.adjoint() * u_full * &self.comp;
        for i in 0..4 {
            for j in 0..4 {
                u[(i, j)] *= r[i];
            }
        }
        u
    }

    fn lift(&self, rho4: &CMat) -> CMat {
        &self.comp * rho4 * self.comp.adjoint()
    }

    fn lower(&self, rho: &CMat, t_g: f64) -> CMat {
        let r = self.frame(t_g);
        let mut m = self.comp.adjoint() * rho * &self.comp;
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] *= r[i] * r[j].conj();
            }
        }
        m
    }

    /// Report for a known full-space propagator of duration `t_g`.
    pub fn closed_report(&self, u_full: &CMat, t_g: f64) -> Result<GateReport> {
        let u4 = self.project(u_full, t_g);
        let (fixed, _, xi) = self.frames(&u4)?;
        let leakage = 1.0 - u4.norm_squared() / 4.0;
        let chi = ProcessMatrix::from_operator(&fixed)?;
        let fidelity = gate_fidelity(&chi, TARGET_THETA, xi)?;
        Ok(GateReport {
            t_g,
            theta: swap_angle(&fixed),
            xi,
            leakage,
            fidelity,
            leakage_warning: leakage > LEAKAGE_WARNING,
            propagator: fixed,
            chi,
            noise: None,
        })
    }

    fn frames(&self, u4: &CMat) -> Result<(CMat, LocalFrames, f64)> {
        let xi = extract_conditional_phase(u4)?;
        let (fixed, frames) = remove_local_z_frames(u4)?;
        Ok((fixed, frames, xi))
    }

    /// Simulates the schedule; with `noise`, runs Lindblad tomography using
    /// the local frames of the noiseless gate.
    pub fn simulate(&self, schedule: &DriveSchedule, noise: Option<&NoiseModel>) -> Result<GateReport> {
        let t_g = schedule.duration();
        let u_full = propagator_segmented(&self.driven, schedule, self.tol)?;
        let closed = self.closed_report(&u_full, t_g)?;
        let Some(noise) = noise else { return Ok(closed) };
        let u4 = self.project(&u_full, t_g);
        let (_, frames, xi) = self.frames(&u4)?;
        let jumps = jump_operators(noise, &self.driven)?;
        let inputs = qpt_inputs();
        let lifted: Vec<CMat> = inputs.iter().map(|r| self.lift(r)).collect();
        let finals = propagate_lindblad_many(&self.driven, schedule, &jumps, &lifted, self.tol)?;
        let outputs: Vec<CMat> = finals.iter().map(|r| self.lower(r, t_g)).collect();
        // inputs 0, 1, 4, 5 are |00⟩, |01⟩, |10⟩, |11⟩
        let kept: f64 = [0, 1, 4, 5].iter().map(|&k| outputs[k].trace().re).sum::<f64>() / 4.0;
        let images = frames.apply_to_images(&basis_images_from_qpt(&inputs, &outputs)?);
        let chi = ProcessMatrix::from_basis_images(&images)?;
        let fidelity = gate_fidelity(&chi, TARGET_THETA, xi)?;
        Ok(GateReport {
            fidelity,
            leakage: 1.0 - kept,
            leakage_warning: 1.0 - kept > LEAKAGE_WARNING,
            chi,
            noise: Some(*noise),
            ..closed
        })
    }

    /// Precomputes the ramps of `plan` so many gate times can be evaluated cheaply.
    pub fn ramp_cache(&self, plan: &GatePlan) -> Result<RampCache<'_>> {
        let t_r = plan.t_r;
        let base = plan.schedule(plan.min_gate_time())?;
        let n = self.driven.dim();
        let id = linalg::identity(n);
        let (u_up, u_down) = if t_r > 0.0 {
            (
                propagate_columns(&self.driven, &base, 0.0, t_r, &id, self.tol)?,
                propagate_columns(&self.driven, &base, t_r, 2.0 * t_r, &id, self.tol)?,
            )
        } else {
            (id.clone(), id)
        };
        let (s, a, b) = (
            plan.coupler.1,
            plan.qubit_a.map(|p| p.1),
            plan.qubit_b.map(|p| p.1),
        );
        let plateau = linalg::eigh(&self.driven.hamiltonian_with_fluxes(s, a, b))?;
        Ok(RampCache { model: self, plan: *plan, u_up, u_down, plateau })
    }
}

/// Ramp propagators of one plan; the plateau is exponentiated exactly.
#[derive(Debug, Clone)]
pub struct RampCache<'a> {
    model: &'a GateModel,
    pub plan: GatePlan,
    u_up: CMat,
    u_down: CMat,
    plateau: Eigh,
}

impl RampCache<'_> {
    pub fn propagator(&self, t_g: f64) -> Result<CMat> {
        let t_p = t_g - self.plan.min_gate_time();
        if t_p < -1e-12 || !t_p.is_finite() {
            return Err(Error::Domain(format!(
                "gate time {t_g} shorter than the two ramps ({} ns)",
                self.plan.min_gate_time()
            )));
        }
        let mid = linalg::propagator_from_eigh(&self.plateau, t_p.max(0.0));
        Ok(&self.u_down * mid * &self.u_up)
    }

    pub fn report(&self, t_g: f64) -> Result<GateReport> {
        self.model.closed_report(&self.propagator(t_g)?, t_g)
    }

    pub fn error(&self, t_g: f64) -> Result<f64> {
        Ok(self.report(t_g)?.error())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub x: f64,
    pub t_g: f64,
    pub error: f64,
}

/// Closed-system error on the x × t_g grid, x-major.
pub fn error_landscape(
    model: &GateModel,
    scheme: GateScheme,
    settings: &SchemeSettings,
    x_grid: &[f64],
    t_g_grid: &[f64],
) -> Result<Vec<LandscapePoint>> {
    let rows: Vec<Result<Vec<LandscapePoint>>> = x_grid
        .par_iter()
        .map(|&x| {
            let plan = GatePlan::for_scheme(scheme, x, settings, model);
            let cache = model.ramp_cache(&plan)?;
            t_g_grid
                .iter()
                .map(|&t_g| Ok(LandscapePoint { x, t_g, error: cache.error(t_g)? }))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(x_grid.len() * t_g_grid.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Coarse gate-time grid spacing (ns).
    pub coarse_step: f64,
    /// Final bracket width of the golden-section refinement (ns).
    pub refine_tol: f64,
    pub bins: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { coarse_step: 0.05, refine_tol: 1e-3, bins: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizedPoint {
    pub x: f64,
    pub d: f64,
    pub t_g: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub x_bin_center: f64,
    pub d: f64,
    pub err_mean: f64,
    pub err_min: f64,
    pub err_max: f64,
    pub count: usize,
}

/// Minimum of `f` on [lo, hi]: coarse grid then golden section around the best point.
pub fn minimize_gate_time(
    f: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    opts: &OptimizeOptions,
) -> Result<(f64, f64)> {
    if !(hi >= lo) || !(opts.coarse_step > 0.0) || !(opts.refine_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad gate-time search window [{lo}, {hi}] with step {}",
            opts.coarse_step
        )));
    }
    let steps = ((hi - lo) / opts.coarse_step).round().max(1.0) as usize;
    let mut best = (lo, f(lo)?);
    for k in 1..=steps {
        let t = (lo + (hi - lo) * k as f64 / steps as f64).min(hi);
        let e = f(t)?;
        if e < best.1 {
            best = (t, e);
        }
    }
    let h = (hi - lo) / steps as f64;
    let a = (best.0 - h).max(lo);
    let b = (best.0 + h).min(hi);
    let refined = golden_min_tol(&f, a, b, opts.refine_tol)?;
    Ok(if refined.1 < best.1 { refined } else { best })
}

/// Optimized gate time for each x of one model, in grid order.
pub fn optimize_points(
    model: &GateModel,
    scheme: GateScheme,
    settings: &SchemeSettings,
    x_grid: &[f64],
    t_g_range: (f64, f64),
    opts: &OptimizeOptions,
) -> Vec<Result<OptimizedPoint>> {
    let d = model.driven.system.squid.d;
    x_grid
        .par_iter()
        .map(|&x| {
            let plan = GatePlan::for_scheme(scheme, x, settings, model);
            let lo = t_g_range.0.max(plan.min_gate_time());
            let cache = model.ramp_cache(&plan)?;
            let (t_g, error) = minimize_gate_time(|t| cache.error(t), lo, t_g_range.1, opts)?;
            Ok(OptimizedPoint { x, d, t_g, error })
        })
        .collect()
}

/// Gate model of `spec` with asymmetry `d`, reusing prebuilt qubit modes.
pub fn model_with_asymmetry(
    spec: &CircuitSpec,
    modes: &(crate::circuit::ModeOperators, crate::circuit::ModeOperators),
    d: f64,
    basis: BasisChoice,
    tol: Tolerances,
) -> Result<GateModel> {
    if !(0.0..=0.05).contains(&d) {
        return Err(Error::InvalidParameter(format!("asymmetry d = {d} outside [0, 0.05]")));
    }
    let mut s = *spec;
    s.squid.d = d;
    let system = s.build_with(modes.0.clone(), modes.1.clone())?;
    GateModel::new(DrivenSystem::new(system, &s.qubit_a, &s.qubit_b)?, basis, tol)
}

/// Optimizes the gate time for every (x, d) pair and bins the results in x.
#[allow(clippy::too_many_arguments)]
pub fn optimize_gate(
    spec: &CircuitSpec,
    basis: BasisChoice,
    tol: Tolerances,
    scheme: GateScheme,
    settings: &SchemeSettings,
    x_grid: &[f64],
    t_g_range: (f64, f64),
    d_values: &[f64],
    opts: &OptimizeOptions,
) -> Result<(Vec<OptimizedPoint>, Vec<BinSummary>)> {
    if opts.bins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    let modes = spec.qubit_modes()?;
    let mut points = Vec::with_capacity(x_grid.len() * d_values.len());
    for &d in d_values {
        let model = model_with_asymmetry(spec, &modes, d, basis, tol)?;
        for p in optimize_points(&model, scheme, settings, x_grid, t_g_range, opts) {
            points.push(p?);
        }
    }
    let bins = bin_points(&points, d_values, opts.bins);
    Ok((points, bins))
}

/// Equal-width bins over the x range, reported per d; empty bins are skipped.
pub fn bin_points(points: &[OptimizedPoint], d_values: &[f64], bins: usize) -> Vec<BinSummary> {
    if points.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out = Vec::new();
    for &d in d_values {
        for b in 0..bins {
            let members: Vec<f64> = points
                .iter()
                .filter(|p| p.d == d)
                .filter(|p| {
                    let idx = if hi > lo { (((p.x - lo) / width) as usize).min(bins - 1) } else { 0 };
                    idx == b
                })
                .map(|p| p.error)
                .collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len();
            out.push(BinSummary {
                x_bin_center: lo + width * (b as f64 + 0.5),
                d,
                err_mean: members.iter().sum::<f64>() / n as f64,
                err_min: members.iter().copied().fold(f64::INFINITY, f64::min),
                err_max: members.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                count: n,
            });
        }
    }
    out
}
