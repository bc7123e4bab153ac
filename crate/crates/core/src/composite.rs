//! Composite Hamiltonians in the product of kept single-mode eigenbases and
//! dressed-state labeling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::{
    build_fluxonium_mode, build_sloshing_mode, CircuitDesign, ModeLabel, ModeOperators, QubitParams,
    SloshingParams, SquidParams, Truncation,
};
use crate::linalg::{self, antiherm_part, herm_part, identity, kron, kron3};
use crate::{CMat, Error, Result, C64};

/// Overlap differences below this are treated as ties during labeling.
pub const LABEL_TIE: f64 = 1e-9;

/// Assembled Hamiltonian with the coupler flux kept as a free parameter.
#[derive(Debug, Clone)]
pub struct CompositeSystem {
    pub design: CircuitDesign,
    pub modes: Vec<ModeOperators>,
    pub squid: SquidParams,
    /// Bare mode Hamiltonians plus charge couplings.
    pub h_static: CMat,
    /// cos of the coupler phase drop, without its flux coefficient.
    pub op_cos: CMat,
    /// sin of the coupler phase drop, without its flux coefficient.
    pub op_sin: CMat,
    pub dims: Vec<usize>,
}

impl CompositeSystem {
    pub fn dim(&self) -> usize {
        self.h_static.nrows()
    }

    /// H = h_static − E_JΣcos(πΦ_S)·op_cos − d·E_JΣsin(πΦ_S)·op_sin
    pub fn hamiltonian(&self, phi_s: f64) -> CMat {
        let (c, s) = self.coupler_coefficients(phi_s);
        &self.h_static + &self.op_cos * C64::new(c, 0.0) + &self.op_sin * C64::new(s, 0.0)
    }

    /// Hamiltonian at the coupler flux stored in `squid`.
    pub fn hamiltonian_at_bias(&self) -> CMat {
        self.hamiltonian(self.squid.phi_s)
    }

    /// Scalar prefactors of op_cos and op_sin at coupler flux `phi_s`.
    pub fn coupler_coefficients(&self, phi_s: f64) -> (f64, f64) {
        let e = self.squid.e_j_sigma;
        (-e * (PI * phi_s).cos(), -self.squid.d * e * (PI * phi_s).sin())
    }

    /// Embed a single-mode operator by tensoring identities on the others.
    pub fn embed(&self, mode: usize, op: &CMat) -> CMat {
        let mut out = CMat::identity(1, 1);
        for (i, &n) in self.dims.iter().enumerate() {
            let factor = if i == mode { op.clone() } else { identity(n) };
            out = kron(&out, &factor);
        }
        out
    }

    /// Row-major flat index of a bare product label.
    pub fn flat_index(&self, label: &[usize]) -> Result<usize> {
        flat_index(&self.dims, label)
    }
}

pub(crate) fn flat_index(dims: &[usize], label: &[usize]) -> Result<usize> {
    if label.len() != dims.len() || label.iter().zip(dims).any(|(l, d)| l >= d) {
        return Err(Error::InvalidParameter(format!("label {label:?} outside dimensions {dims:?}")));
    }
    Ok(label.iter().zip(dims).fold(0, |acc, (l, d)| acc * d + l))
}

fn unflatten(dims: &[usize], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = idx % d;
        idx /= d;
    }
    out
}

fn fluxonium_kind(mode: &ModeOperators) -> Result<()> {
    if mode.phi_op.is_none() || mode.exp_ihalf_phi.is_none() {
        return Err(Error::InvalidParameter(format!("mode {} is not a fluxonium mode", mode.label)));
    }
    Ok(())
}

/// Grounded layout: two fluxonium modes joined by the SQUID.
pub fn assemble_grounded(mode_a: ModeOperators, mode_b: ModeOperators, squid: &SquidParams) -> Result<CompositeSystem> {
    squid.validate()?;
    fluxonium_kind(&mode_a)?;
    fluxonium_kind(&mode_b)?;
    let (na, nb) = (mode_a.n_keep, mode_b.n_keep);
    let h_static = kron(&mode_a.hamiltonian(), &identity(nb))
        + kron(&identity(na), &mode_b.hamiltonian())
        + kron(&mode_a.n_op, &mode_b.n_op) * C64::new(squid.j_c, 0.0);
    let m = kron(&mode_a.exp_iphi, &mode_b.exp_iphi.adjoint());
    Ok(CompositeSystem {
        design: CircuitDesign::Grounded,
        modes: vec![mode_a, mode_b],
        squid: *squid,
        h_static: herm_part(&h_static),
        op_cos: herm_part(&m),
        op_sin: antiherm_part(&m),
        dims: vec![na, nb],
    })
}

/// Floating layout in unsplit form: the sloshing mode carries only its
/// charging term, and the full coupler cos/sin of (φ_A − φ_B)/2 − φ_sl is
/// kept as one operator.
pub fn assemble_floating(
    mode_a: ModeOperators,
    mode_b: ModeOperators,
    mode_sl: ModeOperators,
    squid: &SquidParams,
    sloshing: &SloshingParams,
) -> Result<CompositeSystem> {
    squid.validate()?;
    sloshing.validate()?;
    fluxonium_kind(&mode_a)?;
    fluxonium_kind(&mode_b)?;
    let charging = mode_sl
        .charging_term
        .clone()
        .ok_or_else(|| Error::InvalidParameter("third mode must be the sloshing mode".into()))?;
    let (na, nb, ns) = (mode_a.n_keep, mode_b.n_keep, mode_sl.n_keep);
    let (ia, ib, is) = (identity(na), identity(nb), identity(ns));
    let h_static = kron3(&mode_a.hamiltonian(), &ib, &is)
        + kron3(&ia, &mode_b.hamiltonian(), &is)
        + kron3(&ia, &ib, &charging)
        + kron3(&mode_a.n_op, &mode_b.n_op, &is) * C64::new(squid.j_c, 0.0)
        + (kron3(&mode_a.n_op, &ib, &mode_sl.n_op) - kron3(&ia, &mode_b.n_op, &mode_sl.n_op))
            * C64::new(sloshing.j_sl, 0.0);
    let va = mode_a.exp_ihalf_phi.as_ref().expect("checked above");
    let vb = mode_b.exp_ihalf_phi.as_ref().expect("checked above");
    let m = kron3(va, &vb.adjoint(), &mode_sl.exp_iphi.adjoint());
    Ok(CompositeSystem {
        design: CircuitDesign::Floating,
        modes: vec![mode_a, mode_b, mode_sl],
        squid: *squid,
        h_static: herm_part(&h_static),
        op_cos: herm_part(&m),
        op_sin: antiherm_part(&m),
        dims: vec![na, nb, ns],
    })
}

/// Everything needed to build a composite system from scratch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub design: CircuitDesign,
    pub qubit_a: QubitParams,
    pub qubit_b: QubitParams,
    pub squid: SquidParams,
    pub sloshing: SloshingParams,
    pub truncation: Truncation,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        CircuitSpec {
            design: CircuitDesign::Grounded,
            qubit_a: QubitParams::DEFAULT_A,
            qubit_b: QubitParams::DEFAULT_B,
            squid: SquidParams::DEFAULT,
            sloshing: SloshingParams::DEFAULT,
            truncation: Truncation::default(),
        }
    }
}

impl CircuitSpec {
    pub fn build(&self) -> Result<CompositeSystem> {
        let (a, b) = self.qubit_modes()?;
        self.build_with(a, b)
    }

    /// The two fluxonium modes, which do not depend on the coupler settings.
    pub fn qubit_modes(&self) -> Result<(ModeOperators, ModeOperators)> {
        let t = &self.truncation;
        let a = build_fluxonium_mode(&self.qubit_a, t.n_fock, t.n_keep, ModeLabel::A)?;
        let b = build_fluxonium_mode(&self.qubit_b, t.n_fock, t.n_keep, ModeLabel::B)?;
        Ok((a, b))
    }

    /// Assemble from prebuilt qubit modes (built from this spec's qubits).
    pub fn build_with(&self, a: ModeOperators, b: ModeOperators) -> Result<CompositeSystem> {
        let t = &self.truncation;
        match self.design {
            CircuitDesign::Grounded => assemble_grounded(a, b, &self.squid),
            CircuitDesign::Floating => {
                let sl = build_sloshing_mode(&self.sloshing, &self.squid, t.n_charge_cut, t.n_keep_sl)?;
                assemble_floating(a, b, sl, &self.squid, &self.sloshing)
            }
        }
    }

    pub fn with_coupler_flux(mut self, phi_s: f64) -> Self {
        self.squid.phi_s = phi_s;
        self
    }
}

/// Eigenpairs with bare-state labels.
#[derive(Debug, Clone)]
pub struct LabeledSpectrum {
    pub dims: Vec<usize>,
    /// Ascending eigenenergies (GHz).
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, same order as `energies`.
    pub vectors: CMat,
    /// Bare label of each eigenstate.
    pub labels: Vec<Vec<usize>>,
    /// |⟨bare label|eigenstate⟩| of each eigenstate.
    pub overlaps: Vec<f64>,
    /// Eigen index carrying each flat bare label.
    by_label: Vec<usize>,
}

impl LabeledSpectrum {
    pub fn index_of(&self, label: &[usize]) -> Result<usize> {
        Ok(self.by_label[flat_index(&self.dims, label)?])
    }

    pub fn energy(&self, label: &[usize]) -> Result<f64> {
        Ok(self.energies[self.index_of(label)?])
    }

    fn from_assignment(dims: Vec<usize>, energies: Vec<f64>, vectors: CMat, by_label: Vec<usize>) -> Self {
        let n = energies.len();
        let mut labels = vec![Vec::new(); n];
        let mut overlaps = vec![0.0; n];
        for (b, &k) in by_label.iter().enumerate() {
            labels[k] = unflatten(&dims, b);
            overlaps[k] = vectors[(b, k)].norm();
        }
        LabeledSpectrum { dims, energies, vectors, labels, overlaps, by_label }
    }
}

/// Greedy bijection on a reference×eigenstate overlap table: repeatedly take
/// the largest remaining overlap; near-ties go to the lower-energy eigenstate.
/// Returns, for each reference row, the eigen column assigned to it.
pub fn greedy_assignment(overlap: &nalgebra::DMatrix<f64>) -> Result<Vec<usize>> {
    let n = overlap.nrows();
    if overlap.ncols() != n {
        return Err(Error::AmbiguousLabel("overlap table must be square".into()));
    }
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut assign = vec![usize::MAX; n];
    for _ in 0..n {
        let best = (0..n)
            .filter(|&r| !row_used[r])
            .flat_map(|r| (0..n).filter(|&c| !col_used[c]).map(move |c| (r, c)))
            .map(|(r, c)| overlap[(r, c)])
            .fold(f64::NEG_INFINITY, f64::max);
        if !best.is_finite() {
            return Err(Error::AmbiguousLabel("non-finite overlap".into()));
        }
        let (r, c) = (0..n)
            .filter(|&c| !col_used[c])
            .flat_map(|c| (0..n).filter(|&r| !row_used[r]).map(move |r| (r, c)))
            .find(|&(r, c)| overlap[(r, c)] >= best - LABEL_TIE)
            .expect("a maximal pair exists");
        row_used[r] = true;
        col_used[c] = true;
        assign[r] = c;
    }
    Ok(assign)
}

/// Diagonalize H(Φ_S) and label every eigenstate by its bare product state.
pub fn diagonalize_and_label(system: &CompositeSystem, phi_s: f64) -> Result<LabeledSpectrum> {
    let e = linalg::eigh(&system.hamiltonian(phi_s))?;
    let overlap = e.vectors.map(|z| z.norm());
    let by_label = greedy_assignment(&overlap)?;
    Ok(LabeledSpectrum::from_assignment(system.dims.clone(), e.values, e.vectors, by_label))
}

/// Label a spectrum by continuity with an already labeled neighbour.
pub fn label_by_continuation(previous: &LabeledSpectrum, eig: linalg::Eigh) -> Result<LabeledSpectrum> {
    let n = eig.values.len();
    if previous.energies.len() != n {
        return Err(Error::AmbiguousLabel("neighbouring spectra differ in dimension".into()));
    }
    // rows: previous eigenstates (in label order), columns: new eigenstates
    let overlap = (previous.vectors.adjoint() * &eig.vectors).map(|z| z.norm());
    let prev_to_new = greedy_assignment(&overlap)?;
    let by_label = previous.by_label.iter().map(|&k_prev| prev_to_new[k_prev]).collect();
    Ok(LabeledSpectrum::from_assignment(previous.dims.clone(), eig.values, eig.vectors, by_label))
}

/// Labeled spectra over a coupler-flux grid.
///
/// The point closest to the off-point (Φ_S = 1/2 mod 1) is labeled by bare
/// overlaps and every other point inherits labels from its neighbour towards
/// that anchor, so the table does not depend on the grid direction.
pub fn spectrum_vs_flux(system: &CompositeSystem, flux_grid: &[f64]) -> Result<Vec<LabeledSpectrum>> {
    use rayon::prelude::*;
    if flux_grid.is_empty() {
        return Ok(Vec::new());
    }
    let increasing = flux_grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = flux_grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidParameter("flux grid must be strictly monotone".into()));
    }
    let eigs: Vec<linalg::Eigh> = flux_grid
        .par_iter()
        .map(|&phi| linalg::eigh(&system.hamiltonian(phi)))
        .collect::<Result<_>>()?;
    let distance = |phi: f64| {
        let x = (phi - 0.5).rem_euclid(1.0);
        x.min(1.0 - x)
    };
    let anchor = (0..flux_grid.len())
        .min_by(|&i, &j| {
            distance(flux_grid[i])
                .total_cmp(&distance(flux_grid[j]))
                .then(flux_grid[i].total_cmp(&flux_grid[j]))
        })
        .expect("grid is non-empty");

    let mut out: Vec<Option<LabeledSpectrum>> = vec![None; flux_grid.len()];
    let mut eigs: Vec<Option<linalg::Eigh>> = eigs.into_iter().map(Some).collect();
    let first = eigs[anchor].take().expect("fresh");
    let overlap = first.vectors.map(|z| z.norm());
    let by_label = greedy_assignment(&overlap)?;
    out[anchor] = Some(LabeledSpectrum::from_assignment(system.dims.clone(), first.values, first.vectors, by_label));
    for i in (anchor + 1)..flux_grid.len() {
        let prev = out[i - 1].as_ref().expect("filled");
        out[i] = Some(label_by_continuation(prev, eigs[i].take().expect("fresh"))?);
    }
    for i in (0..anchor).rev() {
        let prev = out[i + 1].as_ref().expect("filled");
        out[i] = Some(label_by_continuation(prev, eigs[i].take().expect("fresh"))?);
    }
    Ok(out.into_iter().map(|s| s.expect("filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_index_round_trip() {
        let dims = [4, 4, 5];
        for idx in 0..80 {
            let l = unflatten(&dims, idx);
            assert_eq!(flat_index(&dims, &l).unwrap(), idx);
        }
        assert!(flat_index(&dims, &[4, 0, 0]).is_err());
    }

    #[test]
    fn greedy_prefers_lower_energy_on_ties() {
        let o = nalgebra::DMatrix::from_row_slice(2, 2, &[0.7, 0.7, 0.7, 0.7]);
        let a = greedy_assignment(&o).unwrap();
        assert_eq!(a, vec![0, 1]);
    }

    #[test]
    fn greedy_is_a_bijection() {
        let o = nalgebra::DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0);
        let mut a = greedy_assignment(&o).unwrap();
        a.sort();
        assert_eq!(a, (0..6).collect::<Vec<_>>());
    }
}
