//! Two-qubit process tomography, the fSim target family and local-Z gauge fixing.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{CMat, Error, Result, C64};

const REFERENCE_FLOOR: f64 = 1e-6;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn single_paulis() -> [CMat; 4] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMat::from_row_slice(2, 2, &[one, z, z, one]),
        CMat::from_row_slice(2, 2, &[z, one, one, z]),
        CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        CMat::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// {I,X,Y,Z}⊗{I,X,Y,Z}, qubit A first, index 4·a + b.
pub fn pauli_basis() -> &'static [CMat] {
    static BASIS: OnceLock<Vec<CMat>> = OnceLock::new();
    BASIS.get_or_init(|| {
        let p = single_paulis();
        let mut out = Vec::with_capacity(16);
        for a in &p {
            for b in &p {
                out.push(a.kronecker(b));
            }
        }
        out
    })
}

/// The 16 separable inputs built from {|0⟩, |1⟩, |+⟩, |+i⟩} on each qubit.
pub fn qpt_inputs() -> Vec<CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let kets = [
        [c(1.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0)],
        [c(s, 0.0), c(s, 0.0)],
        [c(s, 0.0), c(0.0, s)],
    ];
    let mut out = Vec::with_capacity(16);
    for ka in &kets {
        for kb in &kets {
            let v = nalgebra::DVector::from_iterator(4, ka.iter().flat_map(|x| kb.iter().map(move |y| x * y)));
            out.push(&v * v.adjoint());
        }
    }
    out
}

/// E_ij = |i⟩⟨j| in the 4-dimensional computational space, index 4·i + j.
fn unit_operator(i: usize, j: usize) -> CMat {
    let mut e = CMat::zeros(4, 4);
    e[(i, j)] = c(1.0, 0.0);
    e
}

/// Process matrix in the Pauli basis, normalized so a trace-preserving map has trace 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub chi: CMat,
}

impl ProcessMatrix {
    /// From the images Λ(|i⟩⟨j|), index 4·i + j.
    pub fn from_basis_images(images: &[CMat]) -> Result<Self> {
        if images.len() != 16 || images.iter().any(|m| m.nrows() != 4 || m.ncols() != 4) {
            return Err(Error::Tomography("need 16 images of 4x4 basis operators".into()));
        }
        // Choi matrix C = Σ_ij Λ(E_ij) ⊗ E_ij with row-stacked vec, then
        // χ_mn = ⟨⟨P_m|C|P_n⟩⟩ / 16.
        let mut choi = CMat::zeros(16, 16);
        for i in 0..4 {
            for j in 0..4 {
                let img = &images[4 * i + j];
                for k in 0..4 {
                    for l in 0..4 {
                        choi[(4 * k + i, 4 * l + j)] = img[(k, l)];
                    }
                }
            }
        }
        let paulis = pauli_basis();
        let v = CMat::from_fn(16, 16, |row, m| {
            let p = &paulis[m];
            p[(row / 4, row % 4)]
        });
        let chi = v.adjoint() * choi * v / c(16.0, 0.0);
        Ok(ProcessMatrix { chi })
    }

    /// ρ ↦ UρU† for a 4×4 (possibly non-unitary) U.
    pub fn from_operator(u: &CMat) -> Result<Self> {
        check_four(u)?;
        let images: Vec<CMat> =
            (0..16).map(|k| u * unit_operator(k / 4, k % 4) * u.adjoint()).collect();
        Self::from_basis_images(&images)
    }

    pub fn trace(&self) -> C64 {
        self.chi.trace()
    }

    /// Hermitian, positive semidefinite to −1e-9, trace ≤ 1 + 1e-9.
    pub fn validate(&self) -> Result<()> {
        let herm = crate::linalg::hermiticity_defect(&self.chi);
        if herm > 1e-9 {
            return Err(Error::Tomography(format!("process matrix not Hermitian (defect {herm:e})")));
        }
        let tr = self.trace().re;
        if tr > 1.0 + 1e-9 {
            return Err(Error::Tomography(format!("process matrix trace {tr} exceeds 1")));
        }
        let eig = crate::linalg::eigh(&self.chi)?;
        if eig.values[0] < -1e-9 {
            return Err(Error::Tomography(format!("process matrix has eigenvalue {}", eig.values[0])));
        }
        Ok(())
    }

    /// Number of eigenvalues above `floor`.
    pub fn rank(&self, floor: f64) -> Result<usize> {
        Ok(crate::linalg::eigh(&self.chi)?.values.iter().filter(|&&x| x > floor).count())
    }
}

/// Images Λ(E_ij) from measured outputs of the standard inputs by linear inversion.
pub fn basis_images_from_qpt(inputs: &[CMat], outputs: &[CMat]) -> Result<Vec<CMat>> {
    if inputs.len() != 16 || outputs.len() != 16 {
        return Err(Error::Tomography(format!(
            "need 16 input/output pairs, got {}/{}",
            inputs.len(),
            outputs.len()
        )));
    }
    for m in inputs.iter().chain(outputs) {
        check_four(m)?;
    }
    let r = CMat::from_fn(16, 16, |row, k| inputs[k][(row / 4, row % 4)]);
    let lu = r.lu();
    let mut images = Vec::with_capacity(16);
    for idx in 0..16 {
        let mut target = nalgebra::DVector::<C64>::zeros(16);
        target[idx] = c(1.0, 0.0);
        let coeff = lu
            .solve(&target)
            .ok_or_else(|| Error::Tomography("tomography inputs do not span the operator space".into()))?;
        let mut img = CMat::zeros(4, 4);
        for (k, out) in outputs.iter().enumerate() {
            img += out * coeff[k];
        }
        images.push(img);
    }
    Ok(images)
}

/// Linear-inversion process tomography.
pub fn chi_from_qpt(inputs: &[CMat], outputs: &[CMat]) -> Result<ProcessMatrix> {
    ProcessMatrix::from_basis_images(&basis_images_from_qpt(inputs, outputs)?)
}

/// fSim-type target: swap angle θ in the single-excitation block and
/// e^{−iξ/2} on |00⟩ and |11⟩.
pub fn u_ideal(theta: f64, xi: f64) -> CMat {
    let mut u = CMat::zeros(4, 4);
    let ph = C64::from_polar(1.0, -xi / 2.0);
    u[(0, 0)] = ph;
    u[(3, 3)] = ph;
    u[(1, 1)] = c((theta / 2.0).cos(), 0.0);
    u[(2, 2)] = c((theta / 2.0).cos(), 0.0);
    u[(1, 2)] = c(0.0, -(theta / 2.0).sin());
    u[(2, 1)] = c(0.0, -(theta / 2.0).sin());
    u
}

/// F = (4·Tr(χ_ideal χ_sim) + Tr χ_sim) / 5.
pub fn gate_fidelity(chi_sim: &ProcessMatrix, theta: f64, xi: f64) -> Result<f64> {
    let ideal = ProcessMatrix::from_operator(&u_ideal(theta, xi))?;
    let overlap = (&ideal.chi * &chi_sim.chi).trace().re;
    Ok((4.0 * overlap + chi_sim.trace().re) / 5.0)
}

fn check_four(u: &CMat) -> Result<()> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::Tomography(format!("expected a 4x4 matrix, got {}x{}", u.nrows(), u.ncols())));
    }
    Ok(())
}

fn swap_dominant(u: &CMat) -> bool {
    (u[(1, 2)] * u[(2, 1)]).norm() > (u[(1, 1)] * u[(2, 2)]).norm()
}

/// Conditional phase ξ, invariant under local Z rotations on either side.
pub fn extract_conditional_phase(u: &CMat) -> Result<f64> {
    check_four(u)?;
    let outer = u[(0, 0)] * u[(3, 3)];
    let diag = u[(1, 1)] * u[(2, 2)];
    let swap = -u[(1, 2)] * u[(2, 1)];
    let reference = if swap_dominant(u) { swap } else { diag };
    if outer.norm() < REFERENCE_FLOOR * REFERENCE_FLOOR || reference.norm() < REFERENCE_FLOOR * REFERENCE_FLOOR {
        return Err(Error::Tomography("conditional phase reference elements vanish".into()));
    }
    Ok(-(outer / reference).arg())
}

/// Swap angle θ of a frame-fixed propagator.
pub fn swap_angle(u: &CMat) -> f64 {
    let off = 0.5 * (u[(1, 2)].norm() + u[(2, 1)].norm());
    let on = 0.5 * (u[(1, 1)].norm() + u[(2, 2)].norm());
    2.0 * off.atan2(on)
}

/// Local Z corrections D(p)·U·D(q); `post` and `pre` are the diagonal phases
/// (global phase folded into `post`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrames {
    pub post: [f64; 4],
    pub pre: [f64; 4],
}

impl LocalFrames {
    pub fn apply(&self, u: &CMat) -> CMat {
        CMat::from_fn(4, 4, |i, j| u[(i, j)] * C64::from_polar(1.0, self.post[i] + self.pre[j]))
    }

    /// Same correction on a channel image Λ(|i⟩⟨j|) → D(p)Λ(D(q)|i⟩⟨j|D(q)†)D(p)†.
    pub fn apply_to_images(&self, images: &[CMat]) -> Vec<CMat> {
        images
            .iter()
            .enumerate()
            .map(|(k, img)| {
                let (i, j) = (k / 4, k % 4);
                let pre = C64::from_polar(1.0, self.pre[i] - self.pre[j]);
                CMat::from_fn(4, 4, |a, b| img[(a, b)] * C64::from_polar(1.0, self.post[a] - self.post[b]) * pre)
            })
            .collect()
    }
}

fn local_pattern(alpha: f64, beta: f64) -> [f64; 4] {
    [alpha + beta, alpha - beta, -alpha + beta, -alpha - beta]
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Brings U into the U_ideal(θ, ξ) pattern by local Z rotations before and
/// after the gate plus a global phase.
///
/// The swap pair gets phase −π/2, the single-excitation diagonals a common
/// real positive value, |00⟩ and |11⟩ a common phase −ξ/2. The larger of the
/// two single-excitation pairs fixes the global phase.
pub fn remove_local_z_frames(u: &CMat) -> Result<(CMat, LocalFrames)> {
    check_four(u)?;
    let arg = |i: usize, j: usize| u[(i, j)].arg();
    for (i, j) in [(0, 0), (3, 3)] {
        if u[(i, j)].norm() < REFERENCE_FLOOR {
            return Err(Error::Tomography(format!("element ({i},{j}) vanishes, cannot fix local frames")));
        }
    }
    let swap_ok = u[(1, 2)].norm() >= REFERENCE_FLOOR && u[(2, 1)].norm() >= REFERENCE_FLOOR;
    let diag_ok = u[(1, 1)].norm() >= REFERENCE_FLOOR && u[(2, 2)].norm() >= REFERENCE_FLOOR;
    if !swap_ok && !diag_ok {
        return Err(Error::Tomography("single-excitation block vanishes, cannot fix local frames".into()));
    }
    let xi = extract_conditional_phase(u)?;

    // With A = α+α', B = β+β' and Δ = (α−α') − (β−β'):
    //   00: g + A + B, 33: g − A − B, 11: g + A − B, 22: g − A + B,
    //   12: g + Δ,     21: g − Δ.
    let sum_ab = (arg(3, 3) - arg(0, 0)) / 2.0;
    let diff_ab = (arg(2, 2) - arg(1, 1)) / 2.0;
    let (g, mut delta);
    let use_swap = swap_ok && (!diag_ok || swap_dominant(u));
    if use_swap {
        delta = (arg(2, 1) - arg(1, 2)) / 2.0;
        g = -FRAC_PI_2 - (arg(1, 2) + arg(2, 1)) / 2.0;
    } else {
        g = -(arg(1, 1) + arg(2, 2)) / 2.0;
        delta = if swap_ok { (arg(2, 1) - arg(1, 2)) / 2.0 } else { 0.0 };
    }
    let mut diff_ab = diff_ab;
    let build = |g: f64, sum_ab: f64, diff_ab: f64, delta: f64| {
        let a = (sum_ab + diff_ab) / 2.0;
        let b = (sum_ab - diff_ab) / 2.0;
        // Δα + Δβ is unobservable in the blocks above; split Δ evenly.
        let (da, db) = (delta / 2.0, -delta / 2.0);
        let (alpha, alpha_p) = ((a + da) / 2.0, (a - da) / 2.0);
        let (beta, beta_p) = ((b + db) / 2.0, (b - db) / 2.0);
        let mut post = local_pattern(alpha, beta);
        post.iter_mut().for_each(|x| *x += g);
        LocalFrames { post, pre: local_pattern(alpha_p, beta_p) }
    };
    let mut frames = build(g, sum_ab, diff_ab, delta);
    let mut fixed = frames.apply(u);
    if use_swap {
        if fixed[(1, 1)].re < 0.0 {
            diff_ab += PI;
        }
    } else if swap_ok && fixed[(1, 2)].im > 0.0 {
        delta += PI;
    }
    frames = build(g, sum_ab, diff_ab, delta);
    fixed = frames.apply(u);
    let target = -xi / 2.0;
    let mut sum_ab = sum_ab;
    if wrap(fixed[(0, 0)].arg() - target).abs() > FRAC_PI_2 {
        sum_ab += PI;
        frames = build(g, sum_ab, diff_ab, delta);
        fixed = frames.apply(u);
    }
    Ok((fixed, frames))
}
