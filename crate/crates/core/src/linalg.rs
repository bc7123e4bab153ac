//! Small dense linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{CMat, Error, Result, C64};

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: CMat,
}

pub fn eigh(h: &CMat) -> Result<Eigh> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "eigh needs a non-empty square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence("non-finite matrix entry".into()));
    }
    let sym = herm_part(h);
    let eig = SymmetricEigen::try_new(sym, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::NonConvergence(format!("hermitian {n}x{n}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        fix_phase(col.as_mut_slice());
        vectors.set_column(dst, &col);
    }
    Ok(Eigh { values, vectors })
}

/// Real symmetric variant used for the large single-mode bases.
pub fn eigh_real(h: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonConvergence("non-finite matrix entry".into()));
    }
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::NonConvergence(format!("symmetric {n}x{n}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let pivot = col.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Rotate a vector so its largest component is real and positive.
fn fix_phase(v: &mut [C64]) {
    let Some(pivot) = v
        .iter()
        .copied()
        .reduce(|m, z| if z.norm() > m.norm() + 1e-12 { z } else { m })
    else {
        return;
    };
    if pivot.norm() == 0.0 {
        return;
    }
    let rot = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|z| *z *= rot);
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// (M + M†)/2
pub fn herm_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// (M − M†)/(2i)
pub fn antiherm_part(m: &CMat) -> CMat {
    (m - m.adjoint()) * C64::new(0.0, -0.5)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron3(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    a.kronecker(b).kronecker(c)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Largest entry of |M − M†|.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// exp(−i·2π·H·t) for Hermitian H in GHz and t in ns.
pub fn propagator(h: &CMat, t: f64) -> Result<CMat> {
    let e = eigh(h)?;
    Ok(propagator_from_eigh(&e, t))
}

pub fn propagator_from_eigh(e: &Eigh, t: f64) -> CMat {
    let n = e.values.len();
    let mut scaled = e.vectors.clone();
    for (j, &w) in e.values.iter().enumerate() {
        let ph = C64::from_polar(1.0, -std::f64::consts::TAU * w * t);
        for i in 0..n {
            scaled[(i, j)] *= ph;
        }
    }
    &scaled * e.vectors.adjoint()
}

/// Apply a scalar function to a Hermitian matrix through its spectrum.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> C64) -> Result<CMat> {
    let e = eigh(h)?;
    let n = e.values.len();
    let mut scaled = e.vectors.clone();
    for (j, &w) in e.values.iter().enumerate() {
        let fw = f(w);
        for i in 0..n {
            scaled[(i, j)] *= fw;
        }
    }
    Ok(&scaled * e.vectors.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMat::from_fn(n, n, |_, _| C64::new(next(), next()));
        herm_part(&m)
    }

    #[test]
    fn eigh_reconstructs() {
        let h = random_hermitian(7, 3);
        let e = eigh(&h).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            7,
            e.values.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let r = &e.vectors * d * e.vectors.adjoint();
        assert!(max_abs(&(r - h)) < 1e-12);
    }

    #[test]
    fn propagator_is_unitary_and_composes() {
        let h = random_hermitian(5, 11);
        let u1 = propagator(&h, 0.3).unwrap();
        let u2 = propagator(&h, 0.7).unwrap();
        let u = propagator(&h, 1.0).unwrap();
        assert!(max_abs(&(&u1 * &u2 - &u)) < 1e-12);
        assert!(max_abs(&(u.adjoint() * &u - identity(5))) < 1e-12);
    }

    #[test]
    fn herm_and_antiherm_parts_rebuild_matrix() {
        let m = CMat::from_fn(4, 4, |i, j| C64::new(i as f64 - j as f64 * 0.3, (i * j) as f64 * 0.1));
        let h = herm_part(&m);
        let a = antiherm_part(&m);
        assert!(hermiticity_defect(&h) < 1e-15);
        assert!(hermiticity_defect(&a) < 1e-15);
        let rebuilt = h + a * C64::new(0.0, 1.0);
        assert!(max_abs(&(rebuilt - m)) < 1e-14);
    }

    #[test]
    fn kron_dimensions_and_values() {
        let a = CMat::from_fn(2, 2, |i, j| C64::new((i + 2 * j) as f64, 0.0));
        let b = identity(3);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        assert_eq!(k[(3, 0)], a[(1, 0)]);
        assert_eq!(k[(4, 1)], a[(1, 0)]);
        assert_eq!(k[(4, 0)], C64::new(0.0, 0.0));
    }
}
