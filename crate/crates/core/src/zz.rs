//! Static ZZ shift, (E_JΣ, d) maps and the shunt-coupling search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitDesign, ModeOperators};
use crate::composite::{diagonalize_and_label, CircuitSpec, CompositeSystem, LabeledSpectrum};
use crate::{Error, Result};

/// Default upper end of the J_c search (GHz).
pub const J_MAX_DEFAULT: f64 = 1.0;
/// Default ZZ budget (GHz), i.e. 1 kHz.
pub const ZZ_TOLERANCE_DEFAULT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZzResult {
    /// Signed ζ in GHz.
    pub zeta: f64,
    pub design: CircuitDesign,
    pub spec: CircuitSpec,
}

fn computational_labels(design: CircuitDesign) -> [Vec<usize>; 4] {
    match design {
        CircuitDesign::Grounded => [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        CircuitDesign::Floating => [vec![0, 0, 0], vec![0, 1, 0], vec![1, 0, 0], vec![1, 1, 0]],
    }
}

/// ζ = E11 − E01 − E10 + E00 (sloshing index held at 0 for the floating layout).
///
/// Fails if any of the four states is less than half its bare label.
pub fn zz_from_spectrum(spectrum: &LabeledSpectrum, design: CircuitDesign) -> Result<f64> {
    let [l00, l01, l10, l11] = computational_labels(design);
    let mut energies = [0.0; 4];
    for (slot, label) in energies.iter_mut().zip([&l00, &l01, &l10, &l11]) {
        let k = spectrum.index_of(label)?;
        let weight = spectrum.overlaps[k].powi(2);
        if weight < 0.5 {
            return Err(Error::AmbiguousLabel(format!(
                "state {label:?} keeps only {weight:.3} of its bare weight"
            )));
        }
        *slot = spectrum.energies[k];
    }
    Ok(energies[3] - energies[1] - energies[2] + energies[0])
}

pub fn zz_of_system(system: &CompositeSystem, phi_s: f64) -> Result<f64> {
    let spectrum = diagonalize_and_label(system, phi_s)?;
    zz_from_spectrum(&spectrum, system.design)
}

/// ζ at the coupler flux stored in the spec.
pub fn static_zz(spec: &CircuitSpec) -> Result<ZzResult> {
    let system = spec.build()?;
    Ok(ZzResult { zeta: zz_of_system(&system, spec.squid.phi_s)?, design: spec.design, spec: *spec })
}

fn zz_with_modes(spec: &CircuitSpec, modes: &(ModeOperators, ModeOperators)) -> Result<f64> {
    let system = spec.build_with(modes.0.clone(), modes.1.clone())?;
    zz_of_system(&system, spec.squid.phi_s)
}

/// ζ over an (E_JΣ, d) grid, rows ordered by E_JΣ then d.
pub fn zz_map(spec: &CircuitSpec, e_j_sigma_grid: &[f64], d_grid: &[f64]) -> Result<Vec<ZzResult>> {
    let results: Vec<Result<ZzResult>> = zz_map_points(spec, e_j_sigma_grid, d_grid);
    results.into_iter().collect()
}

/// Same as [`zz_map`] but keeps per-point failures, in grid order.
pub fn zz_map_points(spec: &CircuitSpec, e_j_sigma_grid: &[f64], d_grid: &[f64]) -> Vec<Result<ZzResult>> {
    let modes = match spec.qubit_modes() {
        Ok(m) => m,
        Err(e) => return vec![Err(e)],
    };
    let points: Vec<(f64, f64)> = e_j_sigma_grid
        .iter()
        .flat_map(|&e| d_grid.iter().map(move |&d| (e, d)))
        .collect();
    points
        .par_iter()
        .map(|&(e, d)| {
            let mut s = *spec;
            s.squid.e_j_sigma = e;
            s.squid.d = d;
            Ok(ZzResult { zeta: zz_with_modes(&s, &modes)?, design: s.design, spec: s })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcStar {
    pub e_j_sigma: f64,
    pub d: f64,
    /// Smallest J_c (GHz) with |ζ| below tolerance, if one exists.
    pub j_c_star: Option<f64>,
    /// Interval of J_c around the solution where |ζ| stays below tolerance.
    pub band: Option<(f64, f64)>,
    /// Best point seen when no solution exists (or the solution itself).
    pub best_j_c: f64,
    pub best_abs_zeta: f64,
}

impl JcStar {
    pub fn converged(&self) -> bool {
        self.j_c_star.is_some()
    }
}

const COARSE_STEPS: usize = 20;
const GOLDEN_ITERS: usize = 80;

/// Search J_c ∈ [0, j_max] for the shunt coupling that cancels ζ at the
/// coupler off-point of a grounded circuit.
pub fn find_jc_star(spec: &CircuitSpec, e_j_sigma: f64, d: f64, tolerance: f64, j_max: f64) -> Result<JcStar> {
    if spec.design != CircuitDesign::Grounded {
        return Err(Error::Domain("the shunt-capacitor search applies to the grounded layout".into()));
    }
    if !(tolerance > 0.0 && j_max > 0.0) {
        return Err(Error::InvalidParameter("tolerance and j_max must be positive".into()));
    }
    let mut base = *spec;
    base.squid.e_j_sigma = e_j_sigma;
    base.squid.d = d;
    base.squid.phi_s = 0.5;
    let modes = base.qubit_modes()?;
    let zeta = |j: f64| -> Result<f64> {
        let mut s = base;
        s.squid.j_c = j;
        zz_with_modes(&s, &modes)
    };
    search_root(zeta, tolerance, j_max).map(|r| JcStar { e_j_sigma, d, ..r })
}

fn search_root(zeta: impl Fn(f64) -> Result<f64>, tol: f64, j_max: f64) -> Result<JcStar> {
    let grid: Vec<f64> = (0..=COARSE_STEPS).map(|i| j_max * i as f64 / COARSE_STEPS as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&j| zeta(j)).collect::<Result<_>>()?;
    let found = |j: f64, z: f64, band| JcStar {
        e_j_sigma: 0.0,
        d: 0.0,
        j_c_star: Some(j),
        band: Some(band),
        best_j_c: j,
        best_abs_zeta: z.abs(),
    };
    if values[0].abs() < tol {
        let hi = edge(&zeta, 0.0, j_max, tol)?;
        return Ok(found(0.0, values[0], (0.0, hi)));
    }

    if let Some(i) = (0..COARSE_STEPS).find(|&i| values[i].signum() != values[i + 1].signum()) {
        let (mut lo, mut hi, mut z_lo) = (grid[i], grid[i + 1], values[i]);
        let mut root = 0.5 * (lo + hi);
        for _ in 0..200 {
            root = 0.5 * (lo + hi);
            let z = zeta(root)?;
            if z.abs() < 1e-3 * tol || hi - lo < 1e-12 {
                break;
            }
            if z.signum() == z_lo.signum() {
                lo = root;
                z_lo = z;
            } else {
                hi = root;
            }
        }
        let z_root = zeta(root)?;
        if z_root.abs() >= tol {
            return Ok(not_found(root, z_root));
        }
        let left = edge(&zeta, root, grid[i], tol)?;
        let right = edge(&zeta, root, grid[i + 1], tol)?;
        return Ok(JcStar { best_abs_zeta: z_root.abs(), ..found(left, zeta(left)?, (left, right)) });
    }

    // No sign change: refine the smallest |ζ| on the coarse grid.
    let k = (0..grid.len())
        .min_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()))
        .expect("grid non-empty");
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(COARSE_STEPS)];
    let (j_best, z_best) = golden_min(|j| zeta(j).map(f64::abs), lo, hi)?;
    if z_best < tol {
        let left = edge(&zeta, j_best, lo, tol)?;
        let right = edge(&zeta, j_best, hi, tol)?;
        Ok(JcStar { best_abs_zeta: z_best, ..found(left, zeta(left)?, (left, right)) })
    } else {
        Ok(not_found(j_best, z_best))
    }
}

fn not_found(j: f64, z: f64) -> JcStar {
    JcStar { e_j_sigma: 0.0, d: 0.0, j_c_star: None, band: None, best_j_c: j, best_abs_zeta: z.abs() }
}

/// Walk from `inside` (|ζ| < tol) towards `outside` and return the last J
/// still inside the tolerance, by bisection on the predicate.
fn edge(zeta: &impl Fn(f64) -> Result<f64>, inside: f64, outside: f64, tol: f64) -> Result<f64> {
    if zeta(outside)?.abs() < tol {
        return Ok(outside);
    }
    let (mut a, mut b) = (inside, outside);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if zeta(m)?.abs() < tol {
            a = m;
        } else {
            b = m;
        }
        if (a - b).abs() < 1e-9 {
            break;
        }
    }
    Ok(a)
}

pub(crate) fn golden_min(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<(f64, f64)> {
    golden_min_tol(f, lo, hi, 1e-10)
}

/// Golden-section minimization on [lo, hi] to the given bracket width.
pub fn golden_min_tol(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, width: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..GOLDEN_ITERS {
        if hi - lo < width {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_search_on_linear_model() {
        let r = search_root(|j| Ok(2e-3 - 6e-3 * j), 1e-6, 1.0).unwrap();
        let j = r.j_c_star.unwrap();
        assert!((j - 1.0 / 3.0).abs() < 2e-4);
        assert!(j <= 1.0 / 3.0);
        let (lo, hi) = r.band.unwrap();
        assert!(lo <= 1.0 / 3.0 && hi >= 1.0 / 3.0);
    }

    #[test]
    fn root_search_reports_best_when_unreachable() {
        let r = search_root(|j| Ok(1e-3 + (j - 0.4).powi(2)), 1e-6, 1.0).unwrap();
        assert!(r.j_c_star.is_none());
        assert!((r.best_j_c - 0.4).abs() < 1e-4);
        assert!((r.best_abs_zeta - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn root_search_touching_minimum() {
        let r = search_root(|j| Ok((j - 0.25).powi(2)), 1e-6, 1.0).unwrap();
        let j = r.j_c_star.unwrap();
        assert!((j - 0.249).abs() < 1e-6);
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_min(|x| Ok((x - 0.3).abs() + 1.0), 0.0, 1.0).unwrap();
        assert!((x - 0.3).abs() < 1e-9);
        assert!((fx - 1.0).abs() < 1e-9);
    }
}
