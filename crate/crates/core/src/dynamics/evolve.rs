//! Time-dependent Hamiltonian, closed and open propagation.

use std::f64::consts::TAU;

use nalgebra::{DMatrixView, DMatrixViewMut};
use serde::{Deserialize, Serialize};

use super::ode::{integrate, Tolerances};
use super::pulse::DriveSchedule;
use crate::circuit::QubitParams;
use crate::composite::{CircuitSpec, CompositeSystem};
use crate::linalg::{self, identity};
use crate::{CMat, Error, Result, C64};

const NORM_TOLERANCE: f64 = 1e-8;
const NS_PER_US: f64 = 1e3;

/// Composite system plus what the qubit flux drives need.
#[derive(Debug, Clone)]
pub struct DrivenSystem {
    pub system: CompositeSystem,
    /// Parked external fluxes of qubits A and B.
    pub park: [f64; 2],
    pub e_l: [f64; 2],
    phi_embedded: [CMat; 2],
}

impl DrivenSystem {
    /// `qubit_a`/`qubit_b` must be the parameters the qubit modes were built from.
    pub fn new(system: CompositeSystem, qubit_a: &QubitParams, qubit_b: &QubitParams) -> Result<Self> {
        let pa = system.embed(0, system.modes[0].phi()?);
        let pb = system.embed(1, system.modes[1].phi()?);
        Ok(DrivenSystem {
            park: [qubit_a.phi_ext, qubit_b.phi_ext],
            e_l: [qubit_a.e_l, qubit_b.e_l],
            phi_embedded: [pa, pb],
            system,
        })
    }

    pub fn from_spec(spec: &CircuitSpec) -> Result<Self> {
        Self::new(spec.build()?, &spec.qubit_a, &spec.qubit_b)
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Hamiltonian at explicit fluxes; `None` leaves a qubit parked.
    pub fn hamiltonian_with_fluxes(&self, phi_s: f64, phi_a: Option<f64>, phi_b: Option<f64>) -> CMat {
        let mut h = self.system.hamiltonian(phi_s);
        for (q, phi) in [phi_a, phi_b].into_iter().enumerate() {
            let Some(phi) = phi else { continue };
            let shift = phi - self.park[q];
            if shift == 0.0 {
                continue;
            }
            let el = self.e_l[q];
            h += &self.phi_embedded[q] * C64::new(el * TAU * shift, 0.0);
            let scalar = 0.5 * el * TAU * TAU * (phi * phi - self.park[q] * self.park[q]);
            for i in 0..h.nrows() {
                h[(i, i)] += C64::new(scalar, 0.0);
            }
        }
        h
    }

    pub fn hamiltonian_at(&self, schedule: &DriveSchedule, t: f64) -> Result<CMat> {
        let tg = schedule.duration();
        if !(0.0..=tg).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside schedule [0, {tg}]")));
        }
        let (s, a, b) = schedule.fluxes(t);
        Ok(self.hamiltonian_with_fluxes(s, a, b))
    }

    /// Hamiltonian with every pulse at its off value.
    pub fn off_hamiltonian(&self, schedule: &DriveSchedule) -> CMat {
        self.hamiltonian_with_fluxes(
            schedule.coupler.phi_off,
            schedule.qubit_a.map(|p| p.phi_off),
            schedule.qubit_b.map(|p| p.phi_off),
        )
    }

    /// Embedded projector-free operator |i⟩⟨j| on qubit `q` (0 = A, 1 = B).
    fn qubit_transition(&self, q: usize, i: usize, j: usize) -> CMat {
        let n = self.system.dims[q];
        let mut op = CMat::zeros(n, n);
        op[(i, j)] = C64::new(1.0, 0.0);
        self.system.embed(q, &op)
    }
}

/// Relaxation and pure-dephasing times of each qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// µs
    pub t1: f64,
    /// µs
    pub t_phi: f64,
}

impl NoiseModel {
    pub fn new(t1: f64, t_phi: f64) -> Result<Self> {
        let n = NoiseModel { t1, t_phi };
        n.validate()?;
        Ok(n)
    }

    /// T_φ = 2·T_1.
    pub fn from_t1(t1: f64) -> Result<Self> {
        Self::new(t1, 2.0 * t1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t_phi > 0.0) || self.t1.is_nan() || self.t_phi.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "noise times must be positive (t1 = {} µs, t_phi = {} µs)",
                self.t1, self.t_phi
            )));
        }
        Ok(())
    }
}

/// L_1 and L_φ for qubits A and B in the parked eigenbasis, in 1/√ns.
pub fn jump_operators(noise: &NoiseModel, driven: &DrivenSystem) -> Result<Vec<CMat>> {
    noise.validate()?;
    let relax = (1.0 / (noise.t1 * NS_PER_US)).sqrt();
    let dephase = (2.0 / (noise.t_phi * NS_PER_US)).sqrt();
    let mut ops = Vec::with_capacity(4);
    for q in 0..2 {
        ops.push(driven.qubit_transition(q, 0, 1) * C64::new(relax, 0.0));
        let z = driven.qubit_transition(q, 0, 0) - driven.qubit_transition(q, 1, 1);
        ops.push(z * C64::new(dephase, 0.0));
    }
    Ok(ops)
}

fn check_normalized(psi: &[C64]) -> Result<()> {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidParameter(format!("initial state norm {norm} is not 1")));
    }
    Ok(())
}

/// Propagates the columns of `y0` (n × m) under the schedule between `t0` and `t1`.
pub fn propagate_columns(
    driven: &DrivenSystem,
    schedule: &DriveSchedule,
    t0: f64,
    t1: f64,
    y0: &CMat,
    tol: Tolerances,
) -> Result<CMat> {
    let n = driven.dim();
    if y0.nrows() != n {
        return Err(Error::InvalidParameter(format!("state has {} rows, system dimension is {n}", y0.nrows())));
    }
    let m = y0.ncols();
    let mut y: Vec<C64> = y0.as_slice().to_vec();
    let mut h = CMat::zeros(n, n);
    integrate(
        |t, y, dy| {
            let (s, a, b) = schedule.fluxes(t);
            h = driven.hamiltonian_with_fluxes(s, a, b);
            let yv = DMatrixView::from_slice(y, n, m);
            let mut out = DMatrixViewMut::from_slice(dy, n, m);
            out.gemm(C64::new(0.0, -TAU), &h, &yv, C64::new(0.0, 0.0));
        },
        |_| {},
        t0,
        t1,
        &mut y,
        tol,
    )?;
    Ok(CMat::from_vec(n, m, y))
}

/// Schrödinger propagation of a normalized state over the whole schedule.
pub fn propagate_closed(
    driven: &DrivenSystem,
    schedule: &DriveSchedule,
    initial: &[C64],
    tol: Tolerances,
) -> Result<Vec<C64>> {
    schedule.validate()?;
    check_normalized(initial)?;
    let y0 = CMat::from_column_slice(initial.len(), 1, initial);
    let y = propagate_columns(driven, schedule, 0.0, schedule.duration(), &y0, tol)?;
    Ok(y.as_slice().to_vec())
}

/// Full-space propagator, integrating ramps and exponentiating plateaus where
/// every flux is constant.
pub fn propagator_segmented(driven: &DrivenSystem, schedule: &DriveSchedule, tol: Tolerances) -> Result<CMat> {
    schedule.validate()?;
    let n = driven.dim();
    let pts = schedule.breakpoints();
    let mut u = identity(n);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        if segment_is_constant(schedule, a, b) {
            let (s, fa, fb) = schedule.fluxes(mid);
            let h = driven.hamiltonian_with_fluxes(s, fa, fb);
            u = linalg::propagator(&h, b - a)? * u;
        } else {
            u = propagate_columns(driven, schedule, a, b, &u, tol)?;
        }
    }
    Ok(u)
}

/// Full-space propagator by direct integration over the whole schedule.
pub fn propagator_direct(driven: &DrivenSystem, schedule: &DriveSchedule, tol: Tolerances) -> Result<CMat> {
    schedule.validate()?;
    propagate_columns(driven, schedule, 0.0, schedule.duration(), &identity(driven.dim()), tol)
}

fn segment_is_constant(schedule: &DriveSchedule, a: f64, b: f64) -> bool {
    let pulses = [Some(schedule.coupler), schedule.qubit_a, schedule.qubit_b];
    pulses.into_iter().flatten().all(|p| {
        let flat = p.phi_on == p.phi_off;
        let on_plateau = a >= p.t_r - 1e-12 && b <= p.t_r + p.t_p + 1e-12;
        let off = a >= p.duration() - 1e-12 || (p.t_r == 0.0 && p.t_p == 0.0);
        flat || on_plateau || off
    })
}

/// Jump operator kept as its nonzero entries.
#[derive(Debug, Clone)]
struct SparseOp {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    fn from_dense(m: &CMat) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != C64::new(0.0, 0.0) {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        SparseOp { entries }
    }

    /// out += L ρ L† for a column-major n × n block.
    fn sandwich_add(&self, rho: &[C64], out: &mut [C64], n: usize) {
        for &(r, c, v) in &self.entries {
            for &(r2, c2, v2) in &self.entries {
                out[r + n * r2] += v * rho[c + n * c2] * v2.conj();
            }
        }
    }
}

/// Lindblad propagation of several density matrices at once.
pub fn propagate_lindblad_many(
    driven: &DrivenSystem,
    schedule: &DriveSchedule,
    jumps: &[CMat],
    initial: &[CMat],
    tol: Tolerances,
) -> Result<Vec<CMat>> {
    schedule.validate()?;
    let n = driven.dim();
    for rho in initial {
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::InvalidParameter(format!("density matrix must be {n}x{n}")));
        }
    }
    for l in jumps {
        if l.nrows() != n || l.ncols() != n {
            return Err(Error::InvalidParameter(format!("jump operator must be {n}x{n}")));
        }
    }
    let k = initial.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    // H_eff = 2πH − (i/2)ΣL†L, so dρ = −i(H_eff ρ − (H_eff ρ)†) + Σ LρL† for Hermitian ρ.
    let mut decay = CMat::zeros(n, n);
    for l in jumps {
        decay += l.adjoint() * l;
    }
    let decay = decay * C64::new(0.0, -0.5);
    let sparse: Vec<SparseOp> = jumps.iter().map(SparseOp::from_dense).collect();
    let mut y: Vec<C64> = Vec::with_capacity(n * n * k);
    for rho in initial {
        y.extend_from_slice(rho.as_slice());
    }
    let mut h_eff = CMat::zeros(n, n);
    let mut x = CMat::zeros(n, n * k);
    let block = n * n;
    integrate(
        |t, y, dy| {
            let (s, a, b) = schedule.fluxes(t);
            h_eff = driven.hamiltonian_with_fluxes(s, a, b) * C64::new(TAU, 0.0) + &decay;
            let yv = DMatrixView::from_slice(y, n, n * k);
            x.gemm(C64::new(1.0, 0.0), &h_eff, &yv, C64::new(0.0, 0.0));
            let xs = x.as_slice();
            for kk in 0..k {
                let off = kk * block;
                for j in 0..n {
                    for i in 0..n {
                        let xij = xs[off + i + n * j];
                        let xji = xs[off + j + n * i];
                        dy[off + i + n * j] = C64::new(0.0, -1.0) * (xij - xji.conj());
                    }
                }
                for op in &sparse {
                    op.sandwich_add(&y[off..off + block], &mut dy[off..off + block], n);
                }
            }
        },
        |y| {
            for kk in 0..k {
                let rho = &mut y[kk * block..(kk + 1) * block];
                for j in 0..n {
                    for i in 0..j {
                        let avg = 0.5 * (rho[i + n * j] + rho[j + n * i].conj());
                        rho[i + n * j] = avg;
                        rho[j + n * i] = avg.conj();
                    }
                    rho[j + n * j].im = 0.0;
                }
            }
        },
        0.0,
        schedule.duration(),
        &mut y,
        tol,
    )?;
    Ok(y.chunks(block).map(|c| CMat::from_column_slice(n, n, c)).collect())
}

/// Lindblad propagation of one density matrix.
pub fn propagate_lindblad(
    driven: &DrivenSystem,
    schedule: &DriveSchedule,
    noise: &NoiseModel,
    initial: &CMat,
    tol: Tolerances,
) -> Result<CMat> {
    let tr = initial.trace();
    if (tr.re - 1.0).abs() > NORM_TOLERANCE || tr.im.abs() > NORM_TOLERANCE {
        return Err(Error::InvalidParameter(format!("initial density matrix has trace {tr}")));
    }
    if linalg::hermiticity_defect(initial) > NORM_TOLERANCE {
        return Err(Error::InvalidParameter("initial density matrix is not Hermitian".into()));
    }
    let jumps = jump_operators(noise, driven)?;
    let mut out = propagate_lindblad_many(driven, schedule, &jumps, std::slice::from_ref(initial), tol)?;
    Ok(out.remove(0))
}

