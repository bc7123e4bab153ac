//! Two-level reduction of the grounded circuit and the multinomial expansion
//! of the SQUID coupling terms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitDesign, ModeOperators, QubitParams, SquidParams};
use crate::linalg::{self, kron};
use crate::{CMat, Error, Result, C64};

/// Tolerance on the sweet-spot flux for the reduction.
const SWEET_SPOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelModel {
    pub omega_a: f64,
    pub omega_b: f64,
    /// |⟨0|φ|1⟩| per qubit.
    pub a_x_a: f64,
    pub a_x_b: f64,
    /// ⟨0|φ|0⟩ per qubit, −π at the sweet spot.
    pub a_i_a: f64,
    pub a_i_b: f64,
    /// XX coupling −(E_JΣ/4)·a_x^A·a_x^B·cos(πΦ_S).
    pub g_sq: f64,
    /// YY coupling |J_c⟨0|n_A|1⟩⟨0|n_B|1⟩|.
    pub g_c: f64,
    /// −d·E_JΣ·sin(πΦ_S)
    pub g_sq_asym: f64,
    pub delta_sq_a: f64,
    pub delta_sq_b: f64,
}

fn at_sweet_spot(q: &QubitParams) -> bool {
    ((q.phi_ext - 0.5).rem_euclid(1.0)).min((0.5 - q.phi_ext).rem_euclid(1.0)) < SWEET_SPOT_TOL
}

/// Reduce both qubits to their lowest two levels at the coupler flux of `squid`.
pub fn reduce_to_two_level(
    qa: &QubitParams,
    qb: &QubitParams,
    squid: &SquidParams,
    mode_a: &ModeOperators,
    mode_b: &ModeOperators,
) -> Result<TwoLevelModel> {
    if !at_sweet_spot(qa) || !at_sweet_spot(qb) {
        return Err(Error::Domain(format!(
            "two-level reduction needs both qubits at half a flux quantum, got {} and {}",
            qa.phi_ext, qb.phi_ext
        )));
    }
    squid.validate()?;
    let (pa, pb) = (mode_a.phi()?, mode_b.phi()?);
    let a_x_a = pa[(0, 1)].norm();
    let a_x_b = pb[(0, 1)].norm();
    let c = (PI * squid.phi_s).cos();
    let s = (PI * squid.phi_s).sin();
    let g_sq = -(squid.e_j_sigma / 4.0) * a_x_a * a_x_b * c;
    let g_c = (squid.j_c * mode_a.n_op[(0, 1)] * mode_b.n_op[(0, 1)]).norm();
    let half = squid.d * squid.e_j_sigma / 2.0 * s;
    Ok(TwoLevelModel {
        omega_a: mode_a.gap(),
        omega_b: mode_b.gap(),
        a_x_a,
        a_x_b,
        a_i_a: pa[(0, 0)].re,
        a_i_b: pb[(0, 0)].re,
        g_sq,
        g_c,
        g_sq_asym: -squid.d * squid.e_j_sigma * s,
        delta_sq_a: a_x_a * half,
        delta_sq_b: -a_x_b * half,
    })
}

fn pauli() -> (CMat, CMat, CMat, CMat) {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    (
        CMat::from_row_slice(2, 2, &[o, z, z, o]),
        CMat::from_row_slice(2, 2, &[z, o, o, z]),
        CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        CMat::from_row_slice(2, 2, &[o, z, z, -o]),
    )
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Coupler part in the two-level space with the re-summed constants:
/// g_SQ·sin²(1)·XX + g_asym·(sin 2 / 2)·(XI − IX).
pub fn two_level_squid_hamiltonian(model: &TwoLevelModel) -> CMat {
    let (id, x, _, _) = pauli();
    let xx = kron(&x, &x);
    let xi_minus_ix = kron(&x, &id) - kron(&id, &x);
    xx * real(model.g_sq * 1f64.sin().powi(2)) + xi_minus_ix * real(model.g_sq_asym * 2f64.sin() / 2.0)
}

impl TwoLevelModel {
    /// Full model: −(ω_A/2)Z⊗I − (ω_B/2)I⊗Z + g_SQ·XX + g_c·YY + Δ_A·XI + Δ_B·IX.
    pub fn hamiltonian(&self) -> CMat {
        let (id, x, y, z) = pauli();
        kron(&z, &id) * real(-self.omega_a / 2.0)
            + kron(&id, &z) * real(-self.omega_b / 2.0)
            + kron(&x, &x) * real(self.g_sq)
            + kron(&y, &y) * real(self.g_c)
            + kron(&x, &id) * real(self.delta_sq_a)
            + kron(&id, &x) * real(self.delta_sq_b)
    }

    /// Gap between the two single-excitation eigenstates of the model.
    pub fn single_excitation_gap(&self) -> Result<f64> {
        let e = linalg::eigh(&self.hamiltonian())?;
        Ok(e.values[2] - e.values[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    /// Even terms from the cosine.
    Symmetric,
    /// Odd terms from the sine.
    Asymmetric,
}

/// One monomial Π φ_μ^{p_μ} with its coefficient. Mode order: A, B[, sl].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub powers: Vec<u32>,
    pub coefficient: f64,
}

/// Mixed-product terms up to total degree `order` of cos(u) or sin(u),
/// u = φ_A − φ_B (grounded) or φ_A/2 − φ_B/2 − φ_sl (floating).
///
/// Single-mode terms are dropped because they re-sum into the mode
/// potentials. Coefficients multiply g_SQ (or g_SQ^asym).
pub fn expansion_coefficients(order: u32, kind: CouplingKind, design: CircuitDesign) -> Result<Vec<ExpansionTerm>> {
    if !(2..=6).contains(&order) {
        return Err(Error::Domain(format!("expansion order must be in 2..=6, got {order}")));
    }
    let weights: &[f64] = match design {
        CircuitDesign::Grounded => &[1.0, -1.0],
        CircuitDesign::Floating => &[0.5, -0.5, -1.0],
    };
    let derivative = |n: u32| -> f64 {
        // n-th derivative at zero of cos or sin
        match (kind, n % 4) {
            (CouplingKind::Symmetric, 0) => 1.0,
            (CouplingKind::Symmetric, 2) => -1.0,
            (CouplingKind::Asymmetric, 1) => 1.0,
            (CouplingKind::Asymmetric, 3) => -1.0,
            _ => 0.0,
        }
    };
    let mut terms = Vec::new();
    for n in 2..=order {
        let f_n = derivative(n);
        if f_n == 0.0 {
            continue;
        }
        for powers in compositions(n, weights.len()) {
            if powers.iter().filter(|&&p| p > 0).count() < 2 {
                continue;
            }
            let coefficient = powers
                .iter()
                .zip(weights)
                .fold(f_n, |acc, (&p, &w)| acc * w.powi(p as i32) / factorial(p));
            terms.push(ExpansionTerm { powers, coefficient });
        }
    }
    Ok(terms)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// All ways to write n as an ordered sum of `parts` non-negative integers,
/// in descending lexicographic order.
fn compositions(n: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .rev()
        .flat_map(|first| {
            compositions(n - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// Coefficient of a given monomial, zero when absent.
pub fn coefficient_of(terms: &[ExpansionTerm], powers: &[u32]) -> f64 {
    terms.iter().find(|t| t.powers == powers).map_or(0.0, |t| t.coefficient)
}
