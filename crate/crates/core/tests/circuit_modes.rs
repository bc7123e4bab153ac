use std::f64::consts::PI;

use approx::assert_relative_eq;
use fluxsquid::circuit::*;
use fluxsquid::linalg;
use fluxsquid::C64;
use nalgebra::{DMatrix, Matrix2, Matrix4};
use proptest::prelude::*;

fn mode_a() -> ModeOperators {
    build_fluxonium_mode(&QubitParams::DEFAULT_A, 110, 4, ModeLabel::A).unwrap()
}

fn e2_over_h_ff() -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (PLANCK * 1e-15) * 1e-9
}

/// Sinc-DVR grid Hamiltonian of a fluxonium, lowest two eigenvectors.
fn grid_oracle(p: &QubitParams, points: usize, half_width: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let centre = -2.0 * PI * p.phi_ext;
    let h = 2.0 * half_width / (points - 1) as f64;
    let x: Vec<f64> = (0..points).map(|i| centre - half_width + i as f64 * h).collect();
    let kin = 4.0 * p.e_c / (h * h);
    let ham = DMatrix::from_fn(points, points, |i, j| {
        if i == j {
            let v = 0.5 * p.e_l * (x[i] + 2.0 * PI * p.phi_ext).powi(2) - p.e_j * x[i].cos();
            kin * PI * PI / 3.0 + v
        } else {
            let k = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            kin * 2.0 * sign / (k * k)
        }
    });
    let eig = ham.symmetric_eigen();
    let mut order: Vec<usize> = (0..points).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let v0 = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let v1 = eig.eigenvectors.column(order[1]).iter().copied().collect();
    (x, v0, v1)
}

#[test]
fn qubit_frequencies_match_reference_device() {
    let b = build_fluxonium_mode(&QubitParams::DEFAULT_B, 110, 4, ModeLabel::B).unwrap();
    assert_relative_eq!(mode_a().gap(), 0.646, max_relative = 0.01);
    assert_relative_eq!(b.gap(), 0.876, max_relative = 0.01);
}

#[test]
fn phase_matrix_element_matches_position_grid() {
    let a = mode_a();
    let (x, v0, v1) = grid_oracle(&QubitParams::DEFAULT_A, 2001, 5.0 * PI);
    let oracle: f64 = x.iter().zip(&v0).zip(&v1).map(|((x, a), b)| a * x * b).sum::<f64>().abs();
    let got = a.phi().unwrap()[(0, 1)].norm();
    assert_relative_eq!(got, oracle, max_relative = 1e-6);
}

#[test]
fn harmonic_ladder_without_junction() {
    let p = QubitParams { e_j: 0.0, e_c: 1.0, e_l: 1.0, phi_ext: 0.0 };
    let m = build_fluxonium_mode(&p, 110, 4, ModeLabel::A).unwrap();
    for w in m.energies.windows(2) {
        assert_relative_eq!(w[1] - w[0], 8f64.sqrt(), max_relative = 1e-10);
    }
}

#[test]
fn projected_operators_are_hermitian_and_exponential_contracts() {
    let a = mode_a();
    for op in [a.phi().unwrap(), &a.n_op] {
        assert!(linalg::hermiticity_defect(op) <= 1e-12 * op.norm());
    }
    for u in [&a.exp_iphi, a.exp_ihalf_phi.as_ref().unwrap()] {
        let s = u.clone().svd(false, false).singular_values;
        assert!(s.iter().all(|&v| v <= 1.0 + 1e-10));
    }
}

#[test]
fn sweet_spot_phase_diagonal_is_minus_pi() {
    let phi = mode_a().phi().unwrap().clone();
    assert!((phi[(0, 0)].re + PI).abs() < 1e-6);
    assert!((phi[(1, 1)].re + PI).abs() < 1e-6);
}

#[test]
fn commutator_is_canonical_away_from_basis_edge() {
    let n_fock = 80;
    let (phi, n) = oscillator_operators(&QubitParams::DEFAULT_A, n_fock).unwrap();
    let c = &phi * &n - &n * &phi;
    for i in 0..n_fock - 1 {
        for j in 0..n_fock - 1 {
            let want = if i == j { C64::new(0.0, 1.0) } else { C64::new(0.0, 0.0) };
            assert!((c[(i, j)] - want).norm() < 1e-12, "({i},{j}) = {}", c[(i, j)]);
        }
    }
    assert!((c[(n_fock - 1, n_fock - 1)] - C64::new(0.0, 1.0)).norm() > 1.0);
}

#[test]
fn integer_flux_shift_leaves_spectrum_unchanged() {
    // The shifted well sits 2π away from the origin, so the basis is enlarged.
    let p = QubitParams::DEFAULT_A;
    let a = build_fluxonium_mode(&p, 160, 4, ModeLabel::A).unwrap();
    let b = build_fluxonium_mode(&p.with_flux(1.5), 160, 4, ModeLabel::A).unwrap();
    for (x, y) in a.energies.iter().zip(&b.energies) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

#[test]
fn basis_convergence_check_holds_at_defaults() {
    assert!(fluxonium_basis_shift(&QubitParams::DEFAULT_A, 110, 4).unwrap() < BASIS_TOLERANCE_GHZ);
    assert!(fluxonium_basis_shift(&QubitParams::DEFAULT_B, 110, 4).unwrap() < BASIS_TOLERANCE_GHZ);
}

#[test]
fn exponential_defect_shrinks_with_basis() {
    let defect = |n_fock| {
        let m = build_fluxonium_mode(&QubitParams::DEFAULT_A, n_fock, 4, ModeLabel::A);
        // Small bases fail the convergence check; the projection itself is still defined.
        let m = match m {
            Ok(m) => m,
            Err(_) => return None,
        };
        let u = &m.exp_iphi;
        Some(linalg::max_abs(&(u.adjoint() * u - linalg::identity(4))))
    };
    let sizes = [110, 140, 180];
    let d: Vec<f64> = sizes.iter().filter_map(|&n| defect(n)).collect();
    assert_eq!(d.len(), sizes.len());
    for w in d.windows(2) {
        assert!(w[1] <= w[0] + 1e-14, "{d:?}");
    }
}

#[test]
fn sloshing_free_rotor_levels() {
    let squid = SquidParams::DEFAULT;
    let half = build_sloshing_mode(&SloshingParams::DEFAULT, &squid, 15, 5).unwrap();
    assert_eq!(half.energies[1] - half.energies[0], 0.0);
    let zero = SloshingParams { n_g: 0.0, ..SloshingParams::DEFAULT };
    let m = build_sloshing_mode(&zero, &squid, 15, 5).unwrap();
    assert_relative_eq!(m.energies[1] - m.energies[0], 13.6, max_relative = 1e-12);
}

#[test]
fn sloshing_spectrum_converged_in_charge_cut() {
    let squid = SquidParams::DEFAULT.with_flux(0.45);
    let a = build_sloshing_mode(&SloshingParams::DEFAULT, &squid, 15, 5).unwrap();
    let b = build_sloshing_mode(&SloshingParams::DEFAULT, &squid, 30, 5).unwrap();
    for (x, y) in a.energies.iter().zip(&b.energies) {
        assert_relative_eq!(*x, *y, max_relative = 1e-10);
    }
}

#[test]
fn grounded_charging_from_capacitance_inverse() {
    let k = e2_over_h_ff();
    for (c, cc) in [(19.4, 0.0), (30.0, 2.0), (10.0, 25.0)] {
        let e = grounded_charging_energies(c, cc).unwrap();
        let inv = Matrix2::new(c + cc, -cc, -cc, c + cc).try_inverse().unwrap();
        assert_relative_eq!(e.e_c, k / 2.0 * inv[(0, 0)], max_relative = 1e-12);
        assert_relative_eq!(e.j_c, 4.0 * k * inv[(0, 1)], max_relative = 1e-12, epsilon = 1e-15);
    }
    let e = grounded_charging_energies(19.4, 0.0).unwrap();
    assert_eq!(e.j_c, 0.0);
    assert_relative_eq!(e.e_c, 1.0, max_relative = 2e-3);
    assert!(grounded_charging_energies(0.0, 1.0).is_err());
}

#[test]
fn floating_charging_from_transformed_inverse() {
    let k = e2_over_h_ff();
    for (c, cc, cg) in [(50.0, 3.0, 7.0), (20.0, 10.0, 2.0), (5.0, 40.0, 15.0)] {
        let e = floating_charging_energies(c, cc, cg).unwrap();
        let inv = transform_capacitance_matrix(&floating_node_capacitance(c, cc, cg))
            .unwrap()
            .try_inverse()
            .unwrap();
        assert_relative_eq!(e.e_c, k / 2.0 * inv[(0, 0)], max_relative = 1e-12);
        assert_relative_eq!(e.e_c, k / 2.0 * inv[(1, 1)], max_relative = 1e-12);
        assert_relative_eq!(e.j_c, 4.0 * k * inv[(0, 1)], max_relative = 1e-12);
        assert_relative_eq!(e.e_c_sl.unwrap(), k / 2.0 * inv[(2, 2)], max_relative = 1e-12);
        assert_relative_eq!(e.j_sl.unwrap(), 4.0 * k * inv[(0, 2)], max_relative = 1e-12);
        assert_relative_eq!(e.j_sl.unwrap(), -4.0 * k * inv[(1, 2)], max_relative = 1e-12);
    }
}

#[test]
fn floating_couplings_vanish_without_shunt() {
    // C_c must be positive, so approach the limit.
    let e = floating_charging_energies(20.0, 1e-12, 5.0).unwrap();
    assert!(e.j_c.abs() < 1e-12 && e.j_sl.unwrap().abs() < 1e-12);
}

#[test]
fn floating_mirror_symmetry() {
    // Swapping the branches maps the node matrix onto itself with reversed node order.
    let (c, cc, cg) = (30.0, 4.0, 9.0);
    let node = floating_node_capacitance(c, cc, cg);
    let rev = Matrix4::from_fn(|i, j| node[(3 - i, 3 - j)]);
    assert_eq!(node, rev);
    let k = transform_capacitance_matrix(&node).unwrap().try_inverse().unwrap();
    assert_relative_eq!(k[(0, 0)], k[(1, 1)], max_relative = 1e-12);
    assert_relative_eq!(k[(0, 2)].abs(), k[(1, 2)].abs(), max_relative = 1e-12);
}

#[test]
fn transformed_matrix_common_mode_block() {
    let (c, cc, cg) = (25.0, 6.0, 8.0);
    let k = transform_capacitance_matrix(&floating_node_capacitance(c, cc, cg)).unwrap();
    assert!(common_mode_leakage(&k) < 1e-12);
    assert_relative_eq!(k[(3, 3)], cg / 4.0, max_relative = 1e-12);
}

#[test]
fn decoupled_branches_limit() {
    let k = transform_capacitance_matrix(&floating_node_capacitance(12.0, 0.0, 0.0)).unwrap();
    assert_relative_eq!(k[(0, 0)], 12.0, max_relative = 1e-12);
    assert_relative_eq!(k[(1, 1)], 12.0, max_relative = 1e-12);
    assert_eq!(k[(0, 1)], 0.0);
}

proptest! {
    #[test]
    fn congruence_preserves_positive_definiteness(entries in proptest::collection::vec(-1.0f64..1.0, 16)) {
        let a = Matrix4::from_row_slice(&entries);
        let spd = a * a.transpose() + Matrix4::identity() * 0.1;
        let k = transform_capacitance_matrix(&spd).unwrap();
        prop_assert!((k - k.transpose()).abs().max() < 1e-12);
        prop_assert!(k.symmetric_eigenvalues().iter().all(|&v| v > 0.0));
    }
}
