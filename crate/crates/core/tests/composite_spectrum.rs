use approx::assert_relative_eq;
use fluxsquid::circuit::*;
use fluxsquid::composite::*;
use fluxsquid::effective::{expansion_coefficients, CouplingKind};
use fluxsquid::linalg::{self, antiherm_part, herm_part, identity, kron};
use fluxsquid::{CMat, C64};

fn grounded(phi_s: f64, d: f64) -> CompositeSystem {
    let mut spec = CircuitSpec::default();
    spec.squid.d = d;
    spec.with_coupler_flux(phi_s).build().unwrap()
}

fn floating(phi_s: f64, d: f64) -> CompositeSystem {
    let mut spec = CircuitSpec { design: CircuitDesign::Floating, ..CircuitSpec::default() };
    spec.squid.d = d;
    spec.with_coupler_flux(phi_s).build().unwrap()
}

fn bare_sums(system: &CompositeSystem) -> Vec<f64> {
    let mut sums = vec![0.0];
    for m in &system.modes {
        let levels: Vec<f64> = match &m.charging_term {
            Some(c) => linalg::eigh(c).unwrap().values,
            None => m.energies.clone(),
        };
        sums = sums.iter().flat_map(|s| levels.iter().map(move |e| s + e)).collect();
    }
    sums.sort_by(f64::total_cmp);
    sums
}

#[test]
fn grounded_off_point_is_decoupled() {
    let sys = grounded(0.5, 0.0);
    let sp = diagonalize_and_label(&sys, 0.5).unwrap();
    for (e, b) in sp.energies.iter().zip(bare_sums(&sys)) {
        assert!((e - b).abs() < 1e-12, "{e} vs {b}");
    }
    assert!(sp.overlaps.iter().all(|&o| (o - 1.0).abs() < 1e-12));
    for (k, label) in sp.labels.iter().enumerate() {
        let want = sys.modes[0].energies[label[0]] + sys.modes[1].energies[label[1]];
        assert!((sp.energies[k] - want).abs() < 1e-12);
    }
}

#[test]
fn floating_off_point_is_decoupled() {
    let sys = floating(0.5, 0.0);
    let sp = diagonalize_and_label(&sys, 0.5).unwrap();
    for (e, b) in sp.energies.iter().zip(bare_sums(&sys)) {
        assert!((e - b).abs() < 1e-12, "{e} vs {b}");
    }
}

#[test]
fn assembled_hamiltonians_are_hermitian() {
    for sys in [grounded(0.5, 0.03), floating(0.5, 0.03)] {
        for m in [&sys.h_static, &sys.op_cos, &sys.op_sin] {
            assert!(linalg::hermiticity_defect(m) <= 1e-12 * m.norm().max(1.0));
        }
        for phi in [0.0, 0.3, 0.47, 0.5, 0.8] {
            let h = sys.hamiltonian(phi);
            assert!(linalg::hermiticity_defect(&h) <= 1e-12 * h.norm());
        }
        let dims: usize = sys.dims.iter().product();
        assert_eq!(sys.dim(), dims);
    }
}

#[test]
fn single_excitation_splitting_grows_away_from_off_point() {
    let sys = grounded(0.5, 0.0);
    let grid: Vec<f64> = (0..=20).map(|i| 0.3 + 0.01 * i as f64).collect();
    let spectra = spectrum_vs_flux(&sys, &grid).unwrap();
    let split: Vec<f64> = spectra
        .iter()
        .map(|s| (s.energy(&[1, 0]).unwrap() - s.energy(&[0, 1]).unwrap()).abs())
        .collect();
    for w in split.windows(2) {
        assert!(w[0] > w[1], "{split:?}");
    }
}

#[test]
fn computational_labels_stable_under_truncation() {
    // Each computational label must land on the n_keep = 6 eigenstate nearest
    // in energy to the n_keep = 4 one.
    let mut spec = CircuitSpec::default().with_coupler_flux(0.47);
    let small = diagonalize_and_label(&spec.build().unwrap(), 0.47).unwrap();
    spec.truncation.n_keep = 6;
    let big = diagonalize_and_label(&spec.build().unwrap(), 0.47).unwrap();
    for l in [[0, 0], [0, 1], [1, 0], [1, 1]] {
        let e = small.energy(&l).unwrap();
        let nearest = (0..big.energies.len())
            .min_by(|&i, &j| (big.energies[i] - e).abs().total_cmp(&(big.energies[j] - e).abs()))
            .unwrap();
        assert_eq!(big.index_of(&l).unwrap(), nearest, "label {l:?}");
    }
}

#[test]
fn floating_hybridized_labeling_is_a_bijection() {
    let sys = floating(0.3, 0.0);
    let sp = diagonalize_and_label(&sys, 0.3).unwrap();
    let mut flat: Vec<usize> = sp.labels.iter().map(|l| sys.flat_index(l).unwrap()).collect();
    flat.sort();
    assert_eq!(flat, (0..sys.dim()).collect::<Vec<_>>());
    assert!(sp.overlaps.iter().all(|&o| o > 0.0 && o <= 1.0 + 1e-12));
}

#[test]
fn floating_qubit_a_level_is_flat_while_b_tunes() {
    let sys = floating(0.5, 0.0);
    let grid: Vec<f64> = (0..=10).map(|i| 0.4 + 0.01 * i as f64).collect();
    let spectra = spectrum_vs_flux(&sys, &grid).unwrap();
    let rel = |l: [usize; 3]| {
        let e0 = spectra.last().unwrap().energy(&l).unwrap() - spectra.last().unwrap().energy(&[0, 0, 0]).unwrap();
        let e1 = spectra[0].energy(&l).unwrap() - spectra[0].energy(&[0, 0, 0]).unwrap();
        (e1 - e0).abs()
    };
    let a = rel([1, 0, 0]);
    let b = rel([0, 1, 0]);
    assert!(a < 0.1 * b, "A moved {a:.3e}, B moved {b:.3e}");
}

#[test]
fn spectrum_table_independent_of_grid_direction() {
    let sys = grounded(0.5, 0.02);
    let grid: Vec<f64> = (0..=8).map(|i| 0.42 + 0.01 * i as f64).collect();
    let rev: Vec<f64> = grid.iter().rev().copied().collect();
    let a = spectrum_vs_flux(&sys, &grid).unwrap();
    let b = spectrum_vs_flux(&sys, &rev).unwrap();
    for (x, y) in a.iter().zip(b.iter().rev()) {
        assert_eq!(x.energies, y.energies);
        assert_eq!(x.labels, y.labels);
    }
    let single = spectrum_vs_flux(&sys, &[0.5]).unwrap();
    assert_eq!(single[0].energies, diagonalize_and_label(&sys, 0.5).unwrap().energies);
    assert!(spectrum_vs_flux(&sys, &[0.4, 0.45, 0.42]).is_err());
}

#[test]
fn doubly_excited_level_not_mirror_symmetric() {
    let sys = grounded(0.5, 0.0);
    let grid: Vec<f64> = (0..=20).map(|i| 0.3 + 0.02 * i as f64).collect();
    let spectra = spectrum_vs_flux(&sys, &grid).unwrap();
    let e11 = |k: usize| spectra[k].energy(&[1, 1]).unwrap();
    // 0.3 and 0.7 sit at indices 0 and 20
    assert!((e11(0) - e11(20)).abs() > 1e-6);
}

/// Exact coupler operators against their single-mode parts plus the
/// multinomial mixed expansion, with the phases scaled by ε.
fn taylor_residuals(eps: f64) -> (f64, f64) {
    let sys = grounded(0.5, 0.0);
    let (a, b) = (&sys.modes[0], &sys.modes[1]);
    let f = |m: &ModeOperators, g: fn(f64) -> C64| m.phase_function(move |x| g(eps * x)).unwrap();
    let ea = f(a, |x| C64::from_polar(1.0, x));
    let eb = f(b, |x| C64::from_polar(1.0, x));
    let m = kron(&ea, &eb.adjoint());
    let i4 = identity(4);
    let (ca, cb) = (f(a, |x| C64::new(x.cos(), 0.0)), f(b, |x| C64::new(x.cos(), 0.0)));
    let (sa, sb) = (f(a, |x| C64::new(x.sin(), 0.0)), f(b, |x| C64::new(x.sin(), 0.0)));
    let single_cos = kron(&ca, &i4) + kron(&i4, &cb) - kron(&i4, &i4);
    let single_sin = kron(&sa, &i4) - kron(&i4, &sb);
    let mut out = [0.0; 2];
    for (slot, (kind, exact, single)) in [
        (CouplingKind::Symmetric, herm_part(&m), single_cos),
        (CouplingKind::Asymmetric, antiherm_part(&m), single_sin),
    ]
    .into_iter()
    .enumerate()
    {
        let mut approx = single;
        for t in expansion_coefficients(4, kind, CircuitDesign::Grounded).unwrap() {
            let n = t.powers.iter().sum::<u32>() as i32;
            approx += kron(&a.phase_moment(t.powers[0]).unwrap(), &b.phase_moment(t.powers[1]).unwrap())
                * C64::new(t.coefficient * eps.powi(n), 0.0);
        }
        out[slot] = linalg::max_abs(&(&exact - approx)) / linalg::max_abs(&exact);
    }
    (out[0], out[1])
}

#[test]
fn fourth_order_expansion_matches_exact_coupler() {
    let (c, s) = taylor_residuals(0.05);
    assert!(c < 1e-4 && s < 1e-4, "cos {c:.3e}, sin {s:.3e}");
    // halving ε: the sine remainder is fifth order, the cosine one sixth
    let (c2, s2) = taylor_residuals(0.025);
    let ratio_sin = s / s2;
    let ratio_cos = c / c2;
    assert!(ratio_sin > 14.0, "sin ratio {ratio_sin}");
    assert!(ratio_cos > 40.0, "cos ratio {ratio_cos}");
}

#[test]
fn floating_coupling_coefficients_small_phase_limit() {
    // Heavy, nearly harmonic qubits at zero flux keep the phases small, so the
    // coupler operator exposes its leading bilinear coefficients directly.
    let q = QubitParams { e_j: 0.01, e_c: 0.002, e_l: 20.0, phi_ext: 0.0 };
    let a = build_fluxonium_mode(&q, 60, 2, ModeLabel::A).unwrap();
    let b = build_fluxonium_mode(&q, 60, 2, ModeLabel::B).unwrap();
    let squid = SquidParams::DEFAULT.with_flux(0.45);
    let sl = build_sloshing_mode(&SloshingParams::DEFAULT, &squid, 15, 3).unwrap();
    let cos_sl = herm_part(&sl.exp_iphi);
    let sin_sl = antiherm_part(&sl.exp_iphi);
    let (xa, xb) = (a.phi().unwrap()[(1, 0)].norm(), b.phi().unwrap()[(0, 1)].norm());
    let sys = assemble_floating(a, b, sl, &squid, &SloshingParams::DEFAULT).unwrap();
    let idx = |l: [usize; 3]| sys.flat_index(&l).unwrap();
    let op: &CMat = &sys.op_cos;
    // A–B exchange between (1,0,m) and (0,1,m)
    let ab = op[(idx([1, 0, 0]), idx([0, 1, 0]))].norm() / (xa * xb * cos_sl[(0, 0)].norm());
    // A–sloshing between (1,0,m) and (0,0,n), m != n
    let (m, n) = (0, 1);
    let a_sl = op[(idx([1, 0, m]), idx([0, 0, n]))].norm() / (xa * sin_sl[(m, n)].norm());
    assert_relative_eq!(ab, 0.25, max_relative = 0.1);
    assert_relative_eq!(a_sl / ab, 2.0, max_relative = 0.1);
}
