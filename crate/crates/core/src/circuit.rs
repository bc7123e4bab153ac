//! Single-mode Hamiltonians, projected operators and capacitance formulas.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, from_real};
use crate::{CMat, Error, Result, C64};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const PLANCK: f64 = 6.626_070_15e-34;
const FEMTO: f64 = 1e-15;

/// Maximum level shift allowed when the basis is enlarged by half.
pub const BASIS_TOLERANCE_GHZ: f64 = 1e-9;

/// Fluxonium qubit parameters. Energies in GHz, flux in flux quanta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub e_j: f64,
    pub e_c: f64,
    pub e_l: f64,
    pub phi_ext: f64,
}

impl QubitParams {
    /// Qubit A of the reference device.
    pub const DEFAULT_A: QubitParams = QubitParams { e_j: 3.8, e_c: 1.0, e_l: 1.0, phi_ext: 0.5 };
    /// Qubit B of the reference device.
    pub const DEFAULT_B: QubitParams = QubitParams { e_j: 3.2, e_c: 1.0, e_l: 1.0, phi_ext: 0.5 };

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.e_j >= 0.0 && self.e_j.is_finite()) {
            problems.push(format!("e_j must be finite and >= 0, got {}", self.e_j));
        }
        if !(self.e_c > 0.0 && self.e_c.is_finite()) {
            problems.push(format!("e_c must be finite and > 0, got {}", self.e_c));
        }
        if !(self.e_l > 0.0 && self.e_l.is_finite()) {
            problems.push(format!("e_l must be finite and > 0, got {}", self.e_l));
        }
        if !self.phi_ext.is_finite() {
            problems.push(format!("phi_ext must be finite, got {}", self.phi_ext));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    pub fn with_flux(self, phi_ext: f64) -> Self {
        QubitParams { phi_ext, ..self }
    }
}

/// dc-SQUID coupler: total junction energy, asymmetry d, loop flux, and
/// the direct charge coupling J_c set by the shunt capacitance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquidParams {
    pub e_j_sigma: f64,
    pub d: f64,
    pub phi_s: f64,
    pub j_c: f64,
}

impl SquidParams {
    pub const DEFAULT: SquidParams = SquidParams { e_j_sigma: 7.0, d: 0.0, phi_s: 0.5, j_c: 0.0 };

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.e_j_sigma >= 0.0 && self.e_j_sigma.is_finite()) {
            problems.push(format!("e_j_sigma must be finite and >= 0, got {}", self.e_j_sigma));
        }
        if !(self.d.abs() <= 1.0) {
            problems.push(format!("asymmetry d must lie in [-1, 1], got {}", self.d));
        }
        if !self.phi_s.is_finite() {
            problems.push(format!("phi_s must be finite, got {}", self.phi_s));
        }
        if !self.j_c.is_finite() {
            problems.push(format!("j_c must be finite, got {}", self.j_c));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    pub fn with_flux(self, phi_s: f64) -> Self {
        SquidParams { phi_s, ..self }
    }

    /// E_JΣ cos(πΦ_S), the symmetric coupling scale.
    pub fn symmetric_scale(&self) -> f64 {
        self.e_j_sigma * (PI * self.phi_s).cos()
    }

    /// d·E_JΣ sin(πΦ_S), the asymmetric coupling scale.
    pub fn asymmetric_scale(&self) -> f64 {
        self.d * self.e_j_sigma * (PI * self.phi_s).sin()
    }
}

/// Sloshing mode of the floating layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloshingParams {
    pub e_c_sl: f64,
    pub n_g: f64,
    pub j_sl: f64,
}

impl SloshingParams {
    pub const DEFAULT: SloshingParams = SloshingParams { e_c_sl: 3.4, n_g: 0.5, j_sl: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.e_c_sl > 0.0 && self.e_c_sl.is_finite()) {
            return Err(Error::InvalidParameter(format!("e_c_sl must be > 0, got {}", self.e_c_sl)));
        }
        if !self.n_g.is_finite() || !self.j_sl.is_finite() {
            return Err(Error::InvalidParameter("n_g and j_sl must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitDesign {
    Grounded,
    Floating,
}

impl std::fmt::Display for CircuitDesign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CircuitDesign::Grounded => "grounded",
            CircuitDesign::Floating => "floating",
        })
    }
}

/// Circuit capacitances in fF. `c_g` is only used by the floating layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceSet {
    pub c: f64,
    pub c_c: f64,
    pub c_g: Option<f64>,
}

/// Truncation of the single-mode bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    /// Oscillator states used to diagonalize each fluxonium.
    pub n_fock: usize,
    /// Fluxonium eigenstates kept in the composite space.
    pub n_keep: usize,
    /// Charge states n in [-n_charge_cut, n_charge_cut] for the sloshing mode.
    pub n_charge_cut: usize,
    /// Sloshing eigenstates kept in the composite space.
    pub n_keep_sl: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { n_fock: 110, n_keep: 4, n_charge_cut: 15, n_keep_sl: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    A,
    B,
    Sl,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModeLabel::A => "A",
            ModeLabel::B => "B",
            ModeLabel::Sl => "sl",
        })
    }
}

/// Full-basis data kept around so further phase functions can be projected.
#[derive(Debug, Clone)]
enum FullBasis {
    /// Oscillator basis: eigenvalues of the truncated phase operator and the
    /// kept eigenstates expressed in its eigenbasis.
    Oscillator { nodes: Vec<f64>, kept: CMat },
    /// Charge basis: kept eigenstates in the charge states -cut..=cut.
    Charge { kept: CMat },
}

/// Operators of one mode projected onto its lowest `n_keep` eigenstates.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub label: ModeLabel,
    pub n_keep: usize,
    /// Eigenenergies in GHz, ascending.
    pub energies: Vec<f64>,
    /// Projected phase operator. The charge-basis sloshing mode has none.
    pub phi_op: Option<CMat>,
    pub n_op: CMat,
    /// Projection of e^{iφ}.
    pub exp_iphi: CMat,
    /// Projection of e^{iφ/2} (fluxonium modes only).
    pub exp_ihalf_phi: Option<CMat>,
    /// Projected charging term 4E_C(n − n_g)² (sloshing mode only).
    pub charging_term: Option<CMat>,
    basis: FullBasis,
}

impl ModeOperators {
    /// Diagonal energy matrix of the kept levels.
    pub fn hamiltonian(&self) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.n_keep,
            self.energies.iter().map(|&e| C64::new(e, 0.0)),
        ))
    }

    pub fn gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    pub fn phi(&self) -> Result<&CMat> {
        self.phi_op
            .as_ref()
            .ok_or_else(|| Error::Domain(format!("mode {} has no phase operator", self.label)))
    }

    /// Projection of f(φ) computed in the full basis.
    pub fn phase_function(&self, f: impl Fn(f64) -> C64) -> Result<CMat> {
        match &self.basis {
            FullBasis::Oscillator { nodes, kept } => {
                let mut scaled = kept.clone();
                for (i, &x) in nodes.iter().enumerate() {
                    let fx = f(x);
                    scaled.row_mut(i).iter_mut().for_each(|z| *z *= fx);
                }
                Ok(kept.adjoint() * scaled)
            }
            FullBasis::Charge { .. } => Err(Error::Domain(format!(
                "arbitrary phase functions are not defined in the charge basis of mode {}",
                self.label
            ))),
        }
    }

    /// Projection of e^{iαφ}. The charge basis supports integer α only.
    pub fn phase_exponential(&self, alpha: f64) -> Result<CMat> {
        match &self.basis {
            FullBasis::Oscillator { .. } => self.phase_function(|x| C64::from_polar(1.0, alpha * x)),
            FullBasis::Charge { kept } => {
                if alpha.fract() != 0.0 {
                    return Err(Error::Domain(format!(
                        "charge basis only supports integer phase exponents, got {alpha}"
                    )));
                }
                let shift = charge_shift(kept.nrows(), alpha as i64);
                Ok(kept.adjoint() * shift * kept)
            }
        }
    }

    /// Projection of φ^k computed in the full basis.
    pub fn phase_moment(&self, k: u32) -> Result<CMat> {
        self.phase_function(|x| C64::new(x.powi(k as i32), 0.0))
    }
}

/// Shift operator Σ|n+k⟩⟨n| on a charge ladder of dimension `dim`.
fn charge_shift(dim: usize, k: i64) -> CMat {
    let mut s = CMat::zeros(dim, dim);
    for n in 0..dim as i64 {
        let m = n + k;
        if (0..dim as i64).contains(&m) {
            s[(m as usize, n as usize)] = C64::new(1.0, 0.0);
        }
    }
    s
}

struct FluxoniumData {
    energies: Vec<f64>,
    nodes: Vec<f64>,
    /// Full-basis eigenvectors of H (oscillator basis), kept columns only.
    kept_osc: DMatrix<f64>,
    /// Phase-operator eigenvectors (oscillator basis).
    phi_vecs: DMatrix<f64>,
    phi: DMatrix<f64>,
    n_imag: DMatrix<f64>,
}

/// φ = φ_zpf(a + a†) and n/i, with n = i n_zpf (a† − a), in an oscillator
/// basis of `n_fock` states built on (E_C, E_L).
fn oscillator_real(e_c: f64, e_l: f64, n_fock: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let ratio = (8.0 * e_c / e_l).powf(0.25);
    let phi_zpf = ratio / 2f64.sqrt();
    let n_zpf = 1.0 / (ratio * 2f64.sqrt());
    let mut phi = DMatrix::<f64>::zeros(n_fock, n_fock);
    let mut n_imag = DMatrix::<f64>::zeros(n_fock, n_fock);
    for k in 1..n_fock {
        let s = (k as f64).sqrt();
        phi[(k - 1, k)] = phi_zpf * s;
        phi[(k, k - 1)] = phi_zpf * s;
        n_imag[(k, k - 1)] = n_zpf * s;
        n_imag[(k - 1, k)] = -n_zpf * s;
    }
    (phi, n_imag)
}

/// Untruncated-basis phase and charge operators of a fluxonium, before any projection.
pub fn oscillator_operators(p: &QubitParams, n_fock: usize) -> Result<(CMat, CMat)> {
    p.validate()?;
    let (phi, n_imag) = oscillator_real(p.e_c, p.e_l, n_fock);
    Ok((from_real(&phi), from_real(&n_imag) * C64::new(0.0, 1.0)))
}

fn fluxonium_data(p: &QubitParams, n_fock: usize, n_keep: usize) -> Result<FluxoniumData> {
    let (phi, n_imag) = oscillator_real(p.e_c, p.e_l, n_fock);
    let (nodes, phi_vecs) = linalg::eigh_real(&phi)?;
    let cos_phi = {
        let mut scaled = phi_vecs.clone();
        for (j, &x) in nodes.iter().enumerate() {
            scaled.column_mut(j).scale_mut(x.cos());
        }
        &scaled * phi_vecs.transpose()
    };
    // n² = −(n/i)²
    let n_sq = -(&n_imag * &n_imag);
    let shifted = &phi + DMatrix::<f64>::identity(n_fock, n_fock) * (TAU * p.phi_ext);
    let h = n_sq * (4.0 * p.e_c) + (&shifted * &shifted) * (0.5 * p.e_l) - cos_phi * p.e_j;
    let (energies, vecs) = linalg::eigh_real(&h)?;
    Ok(FluxoniumData {
        energies: energies[..n_keep].to_vec(),
        nodes,
        kept_osc: vecs.columns(0, n_keep).into_owned(),
        phi_vecs,
        phi,
        n_imag,
    })
}

fn check_fock(n_fock: usize, n_keep: usize) -> Result<()> {
    if n_fock < 50 || n_keep < 2 || 4 * n_keep > n_fock {
        return Err(Error::InvalidParameter(format!(
            "fluxonium basis needs n_fock >= 50 and 2 <= n_keep <= n_fock/4, got n_fock = {n_fock}, n_keep = {n_keep}"
        )));
    }
    Ok(())
}

fn check_charge(cut: usize, n_keep: usize) -> Result<()> {
    if cut < 10 || n_keep < 2 || n_keep > 2 * cut + 1 {
        return Err(Error::InvalidParameter(format!(
            "sloshing basis needs n_charge_cut >= 10 and 2 <= n_keep <= 2*cut+1, got cut = {cut}, n_keep = {n_keep}"
        )));
    }
    Ok(())
}

fn enlarged(n: usize) -> usize {
    (3 * n).div_ceil(2)
}

/// Diagonalize a fluxonium in an oscillator basis of `n_fock` states and
/// project its operators onto the lowest `n_keep` levels.
///
/// The energies are checked against a basis enlarged by half; a shift larger
/// than [`BASIS_TOLERANCE_GHZ`] is reported as a convergence error.
pub fn build_fluxonium_mode(
    p: &QubitParams,
    n_fock: usize,
    n_keep: usize,
    label: ModeLabel,
) -> Result<ModeOperators> {
    p.validate()?;
    check_fock(n_fock, n_keep)?;
    let data = fluxonium_data(p, n_fock, n_keep)?;
    let check = fluxonium_data(p, enlarged(n_fock), n_keep)?;
    let delta = level_shift(&data.energies, &check.energies);
    if delta > BASIS_TOLERANCE_GHZ {
        return Err(Error::BasisConvergence { mode: label.to_string(), delta, tol: BASIS_TOLERANCE_GHZ });
    }

    let v = &data.kept_osc;
    let phi_op = from_real(&(v.transpose() * &data.phi * v));
    let n_op = from_real(&(v.transpose() * &data.n_imag * v)) * C64::new(0.0, 1.0);
    let kept = from_real(&(data.phi_vecs.transpose() * v));
    let mut mode = ModeOperators {
        label,
        n_keep,
        energies: data.energies,
        phi_op: Some(linalg::herm_part(&phi_op)),
        n_op: linalg::herm_part(&n_op),
        exp_iphi: CMat::zeros(n_keep, n_keep),
        exp_ihalf_phi: None,
        charging_term: None,
        basis: FullBasis::Oscillator { nodes: data.nodes, kept },
    };
    mode.exp_iphi = mode.phase_exponential(1.0)?;
    mode.exp_ihalf_phi = Some(mode.phase_exponential(0.5)?);
    Ok(mode)
}

fn level_shift(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct SloshingData {
    energies: Vec<f64>,
    kept: CMat,
    charging: CMat,
    charges: Vec<f64>,
}

fn sloshing_data(p: &SloshingParams, squid: &SquidParams, cut: usize, n_keep: usize) -> Result<SloshingData> {
    let dim = 2 * cut + 1;
    let charges: Vec<f64> = (0..dim).map(|i| i as f64 - cut as f64).collect();
    let charging = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        charges.iter().map(|&n| C64::new(4.0 * p.e_c_sl * (n - p.n_g).powi(2), 0.0)),
    ));
    let raise = charge_shift(dim, 1);
    let cos_phi = linalg::herm_part(&raise);
    let sin_phi = linalg::antiherm_part(&raise);
    let h = &charging
        - (cos_phi * C64::new(squid.symmetric_scale(), 0.0) - sin_phi * C64::new(squid.asymmetric_scale(), 0.0));
    let e = linalg::eigh(&h)?;
    Ok(SloshingData {
        energies: e.values[..n_keep].to_vec(),
        kept: e.vectors.columns(0, n_keep).into_owned(),
        charging,
        charges,
    })
}

/// Diagonalize the sloshing mode in the charge basis at the coupler's flux
/// and asymmetry, and project onto the lowest `n_keep` levels.
pub fn build_sloshing_mode(
    p: &SloshingParams,
    squid: &SquidParams,
    n_charge_cut: usize,
    n_keep: usize,
) -> Result<ModeOperators> {
    p.validate()?;
    squid.validate()?;
    check_charge(n_charge_cut, n_keep)?;
    let data = sloshing_data(p, squid, n_charge_cut, n_keep)?;
    let check = sloshing_data(p, squid, enlarged(n_charge_cut), n_keep)?;
    let delta = level_shift(&data.energies, &check.energies);
    if delta > BASIS_TOLERANCE_GHZ {
        return Err(Error::BasisConvergence { mode: ModeLabel::Sl.to_string(), delta, tol: BASIS_TOLERANCE_GHZ });
    }
    let dim = data.charges.len();
    let n_diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        data.charges.iter().map(|&n| C64::new(n, 0.0)),
    ));
    let kept = &data.kept;
    let project = |m: &CMat| linalg::herm_part(&(kept.adjoint() * m * kept));
    let n_op = project(&n_diag);
    let charging = project(&data.charging);
    let exp_iphi = kept.adjoint() * charge_shift(dim, 1) * kept;
    Ok(ModeOperators {
        label: ModeLabel::Sl,
        n_keep,
        energies: data.energies,
        phi_op: None,
        n_op,
        exp_iphi,
        exp_ihalf_phi: None,
        charging_term: Some(charging),
        basis: FullBasis::Charge { kept: data.kept },
    })
}

/// Largest change of the kept energies when the basis grows by half.
pub fn fluxonium_basis_shift(p: &QubitParams, n_fock: usize, n_keep: usize) -> Result<f64> {
    p.validate()?;
    check_fock(n_fock, n_keep)?;
    let a = fluxonium_data(p, n_fock, n_keep)?;
    let b = fluxonium_data(p, enlarged(n_fock), n_keep)?;
    Ok(level_shift(&a.energies, &b.energies))
}

/// Charging energies and couplings derived from capacitances, in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingEnergies {
    pub e_c: f64,
    pub j_c: f64,
    /// Sloshing charging energy (floating layout only).
    pub e_c_sl: Option<f64>,
    /// Sloshing-qubit charge coupling (floating layout only).
    pub j_sl: Option<f64>,
}

/// e²/(h·1 fF) expressed in GHz.
fn e2_over_h_ff() -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (PLANCK * FEMTO) * 1e-9
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("capacitance {name} must be > 0, got {x}")))
    }
}

/// E_C and J_c of the grounded layout (capacitances in fF).
pub fn grounded_charging_energies(c: f64, c_c: f64) -> Result<ChargingEnergies> {
    positive("C", c)?;
    if !(c_c >= 0.0 && c_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("capacitance C_c must be >= 0, got {c_c}")));
    }
    let k = e2_over_h_ff();
    let den = c * (c + 2.0 * c_c);
    Ok(ChargingEnergies {
        e_c: k * (c + c_c) / (2.0 * den),
        j_c: 4.0 * k * c_c / den,
        e_c_sl: None,
        j_sl: None,
    })
}

/// E_C, J_c, E_Csl and J_sl of the floating layout (capacitances in fF).
pub fn floating_charging_energies(c: f64, c_c: f64, c_g: f64) -> Result<ChargingEnergies> {
    positive("C", c)?;
    positive("C_c", c_c)?;
    positive("C_g", c_g)?;
    let k = e2_over_h_ff();
    let c_sigma = c + c_g + c_c;
    let c_q3 = (2.0 * c + c_g).powi(2) * (c_c + c_g) + c_c * c_g * (2.0 * c + c_g);
    let c_sl2 = c_sigma * c_sigma - c_c * c_c - c * c;
    Ok(ChargingEnergies {
        e_c: k * (4.0 * c * c_c + 4.0 * c * c_g + 3.0 * c_c * c_g + 2.0 * c_g * c_g) / (2.0 * c_q3),
        j_c: 4.0 * k * c_c * c_g / c_q3,
        e_c_sl: Some(k * (c + c_sigma) / (2.0 * c_sl2)),
        j_sl: Some(4.0 * k * c_c / c_sl2),
    })
}

pub fn charging_energies(design: CircuitDesign, caps: &CapacitanceSet) -> Result<ChargingEnergies> {
    match design {
        CircuitDesign::Grounded => grounded_charging_energies(caps.c, caps.c_c),
        CircuitDesign::Floating => {
            let c_g = caps.c_g.ok_or_else(|| {
                Error::InvalidParameter("floating layout needs the grounding capacitance C_g".into())
            })?;
            floating_charging_energies(caps.c, caps.c_c, c_g)
        }
    }
}

/// Node transformation to (φ_A, φ_B, φ_sl, φ_Σ) of the floating layout.
pub fn floating_mode_transform() -> Matrix4<f64> {
    Matrix4::new(
        1.0, -1.0, 0.0, 0.0, //
        0.0, 0.0, -1.0, 1.0, //
        0.5, 0.5, -0.5, -0.5, //
        1.0, 1.0, 1.0, 1.0,
    )
}

/// Node capacitance matrix of the floating layout.
pub fn floating_node_capacitance(c: f64, c_c: f64, c_g: f64) -> Matrix4<f64> {
    Matrix4::new(
        c + c_g, -c, 0.0, 0.0, //
        -c, c + c_c + c_g, -c_c, 0.0, //
        0.0, -c_c, c + c_c + c_g, -c, //
        0.0, 0.0, -c, c + c_g,
    )
}

/// K = (M⁻¹)ᵀ C M⁻¹ for a node capacitance matrix C.
pub fn transform_capacitance_matrix(c: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let m_inv = floating_mode_transform()
        .try_inverse()
        .ok_or_else(|| Error::Domain("mode transformation is singular".into()))?;
    Ok(m_inv.transpose() * c * m_inv)
}

/// Sloshing charge coupling check: the common mode must decouple (K rows
/// mixing φ_Σ with the other modes vanish) for equal grounding capacitors.
pub fn common_mode_leakage(k: &Matrix4<f64>) -> f64 {
    (0..3).map(|i| k[(i, 3)].abs().max(k[(3, i)].abs())).fold(0.0, f64::max)
}
