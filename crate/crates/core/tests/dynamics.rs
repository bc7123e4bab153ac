use std::f64::consts::{FRAC_PI_2, TAU};

use fluxsquid::circuit::{oscillator_operators, QubitParams};
use fluxsquid::composite::CircuitSpec;
use fluxsquid::dynamics::*;
use fluxsquid::linalg::{self, identity};
use fluxsquid::{CMat, C64};

const X_ON: f64 = 0.47;

fn driven() -> DrivenSystem {
    DrivenSystem::from_spec(&CircuitSpec::default()).unwrap()
}

fn model() -> GateModel {
    GateModel::from_spec(&CircuitSpec::default(), BasisChoice::Bare, Tolerances::default()).unwrap()
}

fn coupler_plan(m: &GateModel) -> GatePlan {
    GatePlan::for_scheme(GateScheme::CouplerOnly, X_ON, &SchemeSettings::default_for(GateScheme::CouplerOnly), m)
}

/// Closed-system optimum of the coupler-only gate near 10 ns.
fn optimum(m: &GateModel) -> f64 {
    let cache = m.ramp_cache(&coupler_plan(m)).unwrap();
    let opts = OptimizeOptions { coarse_step: 0.05, refine_tol: 1e-4, bins: 1 };
    gate::minimize_gate_time(|t| cache.error(t), 9.8, 11.0, &opts).unwrap().0
}

fn basis_state(n: usize, k: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[k] = C64::new(1.0, 0.0);
    v
}

fn ket_bra(v: &[C64]) -> CMat {
    let c = CMat::from_column_slice(v.len(), 1, v);
    &c * c.adjoint()
}

fn flat(sys: &DrivenSystem, l: [usize; 2]) -> usize {
    sys.system.flat_index(&l).unwrap()
}

#[test]
fn drive_at_off_values_gives_static_hamiltonian() {
    let d = driven();
    let sched = coupler_plan(&model()).schedule(10.0).unwrap();
    assert_eq!(d.hamiltonian_at(&sched, 0.0).unwrap(), d.system.hamiltonian(0.5));
    assert_eq!(d.hamiltonian_at(&sched, 10.0).unwrap(), d.system.hamiltonian(0.5));
    assert!(d.hamiltonian_at(&sched, 10.5).is_err());
}

#[test]
fn coupler_plateau_matches_static_assembly() {
    let d = driven();
    let sched = coupler_plan(&model()).schedule(10.0).unwrap();
    let h = d.hamiltonian_at(&sched, 5.0).unwrap();
    let stat = CircuitSpec::default().with_coupler_flux(X_ON).build().unwrap();
    assert!(linalg::max_abs(&(h - stat.hamiltonian(X_ON))) < 1e-12);
}

#[test]
fn inductor_gauge_shift_is_exact_in_full_basis() {
    // H(Φ) − H(Φ₀) = E_L·2π(Φ − Φ₀)·φ + const, with no truncation involved.
    let p = QubitParams::DEFAULT_A;
    let (phi, n) = oscillator_operators(&p, 110).unwrap();
    let cos = linalg::hermitian_function(&phi, |x| C64::new(x.cos(), 0.0)).unwrap();
    let full = |f: f64| {
        let shifted = &phi + identity(110) * C64::new(TAU * f, 0.0);
        &n * &n * C64::new(4.0 * p.e_c, 0.0) + &shifted * &shifted * C64::new(0.5 * p.e_l, 0.0)
            - &cos * C64::new(p.e_j, 0.0)
    };
    let (f0, f1) = (0.5, 0.523);
    let scalar = 0.5 * p.e_l * TAU * TAU * (f1 * f1 - f0 * f0);
    let linear = &phi * C64::new(p.e_l * TAU * (f1 - f0), 0.0) + identity(110) * C64::new(scalar, 0.0);
    let diff = full(f1) - full(f0) - linear;
    assert!(linalg::max_abs(&diff) < 1e-9 * linalg::max_abs(&full(f1)));
}

#[test]
fn qubit_drive_enters_linearly() {
    let d = driven();
    let h0 = d.hamiltonian_with_fluxes(0.5, None, None);
    let h1 = d.hamiltonian_with_fluxes(0.5, Some(0.51), None);
    let h2 = d.hamiltonian_with_fluxes(0.5, Some(0.52), None);
    // the operator part is linear in the shift, the scalar part quadratic
    let second = &h2 - &h1 * C64::new(2.0, 0.0) + &h0;
    let want = 0.5 * d.e_l[0] * TAU * TAU * 2.0 * 0.01 * 0.01;
    for i in 0..d.dim() {
        for j in 0..d.dim() {
            let w = if i == j { want } else { 0.0 };
            assert!((second[(i, j)] - C64::new(w, 0.0)).norm() < 1e-10);
        }
    }
    assert_eq!(d.hamiltonian_with_fluxes(0.5, Some(0.5), Some(0.5)), h0);
}

#[test]
fn zero_duration_schedule_is_identity() {
    let d = driven();
    let sched = DriveSchedule::coupler_only(PulseSpec::idle(0.5, 0.0).unwrap());
    let psi = basis_state(d.dim(), 5);
    assert_eq!(propagate_closed(&d, &sched, &psi, Tolerances::default()).unwrap(), psi);
    assert_eq!(propagator_direct(&d, &sched, Tolerances::default()).unwrap(), identity(d.dim()));
}

#[test]
fn static_propagation_matches_matrix_exponential() {
    let d = driven();
    let t = 7.3;
    let sched = DriveSchedule::coupler_only(PulseSpec::idle(X_ON, t).unwrap());
    let n = d.dim();
    let mut psi: Vec<C64> = (0..n).map(|k| C64::new(1.0 + k as f64, 0.5 * k as f64)).collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
    let got = propagate_closed(&d, &sched, &psi, Tolerances::default()).unwrap();
    let u = linalg::propagator(&d.system.hamiltonian(X_ON), t).unwrap();
    let want = &u * CMat::from_column_slice(n, 1, &psi);
    let overlap: C64 = got.iter().zip(want.iter()).map(|(a, b)| a.conj() * b).sum();
    assert!(1.0 - overlap.norm_sqr() < 1e-8);
}

#[test]
fn norm_conserved_over_long_gate() {
    let m = model();
    let sched = coupler_plan(&m).schedule(20.0).unwrap();
    let psi = basis_state(m.driven.dim(), flat(&m.driven, [0, 1]));
    let out = propagate_closed(&m.driven, &sched, &psi, m.tol).unwrap();
    let norm: f64 = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-8);
}

#[test]
fn unnormalized_state_rejected() {
    let d = driven();
    let sched = DriveSchedule::coupler_only(PulseSpec::idle(0.5, 1.0).unwrap());
    let mut psi = basis_state(d.dim(), 0);
    psi[0] = C64::new(2.0, 0.0);
    assert!(propagate_closed(&d, &sched, &psi, Tolerances::default()).is_err());
}

#[test]
fn full_space_propagator_is_unitary() {
    let m = model();
    for scheme in [GateScheme::CouplerOnly, GateScheme::Detuned] {
        let x = if scheme == GateScheme::Detuned { 0.523 } else { X_ON };
        let plan = GatePlan::for_scheme(scheme, x, &SchemeSettings::default_for(scheme), &m);
        let u = propagator_segmented(&m.driven, &plan.schedule(17.0).unwrap(), m.tol).unwrap();
        let defect = (u.adjoint() * &u - identity(m.driven.dim())).norm();
        assert!(defect < 1e-7, "{scheme}: {defect:.2e}");
    }
}

#[test]
fn segmented_and_direct_propagators_agree() {
    let m = model();
    let sched = coupler_plan(&m).schedule(10.4).unwrap();
    // the fast phases of the upper levels need tight tolerances for 1e-8 agreement
    let tight = m.tol.scaled(1e-2);
    let a = propagator_segmented(&m.driven, &sched, tight).unwrap();
    let b = propagator_direct(&m.driven, &sched, tight).unwrap();
    let diff = linalg::max_abs(&(&a - &b));
    assert!(diff < 1e-8, "{diff:.2e}");
    let cached = m.ramp_cache(&coupler_plan(&m)).unwrap().propagator(10.4).unwrap();
    assert!(linalg::max_abs(&(&a - &cached)) < 1e-7);
}

#[test]
fn jump_operator_normalization() {
    let d = driven();
    let ops = jump_operators(&NoiseModel::new(10.0, 20.0).unwrap(), &d).unwrap();
    assert_eq!(ops.len(), 4);
    // ‖L₁‖² = 1/T₁ in 1/ns
    for l in [&ops[0], &ops[2]] {
        let s = l.clone().svd(false, false).singular_values.max();
        assert!((s * s - 1e-4).abs() < 1e-16);
    }
    let g = d.dim();
    let ground = CMat::from_column_slice(g, 1, &basis_state(g, flat(&d, [0, 0])));
    assert_eq!((&ops[0] * &ground).norm(), 0.0);
    assert_eq!((&ops[2] * &ground).norm(), 0.0);
    let quiet = jump_operators(&NoiseModel::from_t1(1e12).unwrap(), &d).unwrap();
    assert!(quiet.iter().all(|l| l.norm() < 1e-5));
    assert!(NoiseModel::new(0.0, 1.0).is_err());
}

#[test]
fn weak_noise_lindblad_matches_closed() {
    let m = model();
    let sched = coupler_plan(&m).schedule(10.4).unwrap();
    let psi = basis_state(m.driven.dim(), flat(&m.driven, [0, 1]));
    let closed = propagate_closed(&m.driven, &sched, &psi, m.tol).unwrap();
    let want = ket_bra(&closed);
    let rho0 = ket_bra(&psi);
    let weak = propagate_lindblad(&m.driven, &sched, &NoiseModel::from_t1(1e12).unwrap(), &rho0, m.tol).unwrap();
    assert!(linalg::max_abs(&(&weak - &want)) < 1e-8);
    let none = propagate_lindblad_many(&m.driven, &sched, &[], std::slice::from_ref(&rho0), m.tol).unwrap();
    assert!(linalg::max_abs(&(&none[0] - &want)) < 1e-8);
}

#[test]
fn lindblad_preserves_trace_and_positivity() {
    let m = model();
    let sched = coupler_plan(&m).schedule(10.4).unwrap();
    let n = m.driven.dim();
    let mut psi = vec![C64::new(0.0, 0.0); n];
    psi[flat(&m.driven, [1, 0])] = C64::new(0.6, 0.0);
    psi[flat(&m.driven, [1, 1])] = C64::new(0.0, 0.8);
    let rho = propagate_lindblad(&m.driven, &sched, &NoiseModel::new(10.0, 20.0).unwrap(), &ket_bra(&psi), m.tol)
        .unwrap();
    assert!((rho.trace().re - 1.0).abs() < 1e-8 && rho.trace().im.abs() < 1e-12);
    assert!(linalg::hermiticity_defect(&rho) < 1e-14);
    let min = linalg::eigh(&rho).unwrap().values[0];
    assert!(min > -1e-8, "{min}");
}

#[test]
fn relaxation_follows_exponential_decay() {
    // At the off point with symmetric junctions the Hamiltonian is diagonal, so
    // populations only see the jump terms.
    let d = driven();
    let t1 = 10.0;
    let t = 1000.0;
    let sched = DriveSchedule::coupler_only(PulseSpec::idle(0.5, t).unwrap());
    let k = flat(&d, [1, 0]);
    let rho0 = ket_bra(&basis_state(d.dim(), k));
    let rho = propagate_lindblad(&d, &sched, &NoiseModel::new(t1, 1e12).unwrap(), &rho0, Tolerances::default())
        .unwrap();
    let want = (-t / (t1 * 1e3)).exp();
    assert!((rho[(k, k)].re - want).abs() < 1e-6, "{} vs {want}", rho[(k, k)].re);
    let g = flat(&d, [0, 0]);
    assert!((rho[(g, g)].re - (1.0 - want)).abs() < 1e-6);
}

#[test]
fn dephasing_follows_analytic_rate() {
    let d = driven();
    let t_phi = 20.0;
    let t = 100.0;
    let sched = DriveSchedule::coupler_only(PulseSpec::idle(0.5, t).unwrap());
    let (g, e) = (flat(&d, [0, 0]), flat(&d, [1, 0]));
    let mut psi = vec![C64::new(0.0, 0.0); d.dim()];
    psi[g] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[e] = psi[g];
    let rho = propagate_lindblad(&d, &sched, &NoiseModel::new(1e12, t_phi).unwrap(), &ket_bra(&psi), Tolerances::default())
        .unwrap();
    let want = 0.5 * (-4.0 * t / (t_phi * 1e3)).exp();
    assert!((rho[(g, e)].norm() - want).abs() < 1e-8, "{} vs {want}", rho[(g, e)].norm());
    assert!((rho[(e, e)].re - 0.5).abs() < 1e-10);
}

#[test]
fn idle_schedule_is_identity_after_frames() {
    let m = model();
    let plan = GatePlan { coupler: (0.5, 0.5), qubit_a: None, qubit_b: None, t_r: 2.0 };
    let r = m.simulate(&plan.schedule(10.0).unwrap(), None).unwrap();
    // the swap angle is zero, so the frames act on the diagonal reference
    assert!(r.theta.abs() < 1e-8);
    let u = &r.propagator;
    let ph = u[(1, 1)];
    assert!(linalg::max_abs(&(u - identity(4) * ph)) < 1e-8);
}

#[test]
fn closed_chi_is_a_pure_channel() {
    let m = model();
    let r = m.ramp_cache(&coupler_plan(&m)).unwrap().report(10.4).unwrap();
    // leakage out of the subspace is the only trace deficit
    assert!((r.chi.trace() - C64::new(1.0 - r.leakage, 0.0)).norm() < 1e-12);
    assert_eq!(r.chi.rank(1e-8).unwrap(), 1);
    let plan = GatePlan { coupler: (0.5, 0.5), qubit_a: None, qubit_b: None, t_r: 2.0 };
    let idle = m.simulate(&plan.schedule(10.0).unwrap(), None).unwrap();
    assert!((idle.chi.trace() - C64::new(1.0, 0.0)).norm() < 1e-8);
    assert_eq!(idle.chi.rank(1e-8).unwrap(), 1);
}

#[test]
fn chi_fidelity_equals_propagator_overlap() {
    let m = model();
    let r = m.ramp_cache(&coupler_plan(&m)).unwrap().report(10.4).unwrap();
    let ideal = u_ideal(FRAC_PI_2, r.xi);
    let tr = (ideal.adjoint() * &r.propagator).trace().norm_sqr();
    // (|Tr U_ideal†U|² + d)/(d(d+1)), with d replaced by ‖U‖² once the block leaks
    let overlap = (tr + r.propagator.norm_squared()) / 20.0;
    assert!((r.fidelity - overlap).abs() < 1e-10, "{} vs {overlap}", r.fidelity);
}

#[test]
fn optimum_is_a_sqrt_iswap_without_leakage() {
    let m = model();
    let t = optimum(&m);
    let r = m.simulate(&coupler_plan(&m).schedule(t).unwrap(), None).unwrap();
    assert!((r.theta - FRAC_PI_2).abs() < 0.02 * FRAC_PI_2, "theta {}", r.theta);
    assert!(r.leakage < 1e-3, "leakage {:.2e}", r.leakage);
    assert!(!r.leakage_warning);
}

#[test]
fn halving_tolerances_leaves_error_unchanged() {
    let m = model();
    let t = optimum(&m);
    let sched = coupler_plan(&m).schedule(t).unwrap();
    let e1 = m.simulate(&sched, None).unwrap().error();
    let mut tight = m.clone();
    tight.tol = m.tol.scaled(0.5);
    let e2 = tight.simulate(&sched, None).unwrap().error();
    assert!((e1 - e2).abs() < 1e-7, "{e1} vs {e2}");
}

#[test]
fn error_grows_as_coherence_shrinks() {
    let m = model();
    let sched = coupler_plan(&m).schedule(optimum(&m)).unwrap();
    let closed = m.simulate(&sched, None).unwrap().error();
    let e100 = m.simulate(&sched, Some(&NoiseModel::from_t1(100.0).unwrap())).unwrap().error();
    let e10 = m.simulate(&sched, Some(&NoiseModel::from_t1(10.0).unwrap())).unwrap().error();
    assert!(closed <= e100 && e100 <= e10, "{closed} {e100} {e10}");
}

#[test]
fn noiseless_tomography_reproduces_closed_fidelity() {
    let m = model();
    let sched = coupler_plan(&m).schedule(10.4).unwrap();
    let closed = m.simulate(&sched, None).unwrap();
    let open = m.simulate(&sched, Some(&NoiseModel::from_t1(1e12).unwrap())).unwrap();
    assert!((closed.fidelity - open.fidelity).abs() < 1e-7);
}

#[test]
fn landscape_is_x_major_and_bounded() {
    let m = model();
    let settings = SchemeSettings::default_for(GateScheme::CouplerOnly);
    let xs = [0.46, 0.47];
    let ts = [8.0, 10.0, 12.0];
    let pts = error_landscape(&m, GateScheme::CouplerOnly, &settings, &xs, &ts).unwrap();
    assert_eq!(pts.len(), 6);
    assert_eq!((pts[1].x, pts[1].t_g), (0.46, 10.0));
    assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.error)));
    assert!(error_landscape(&m, GateScheme::CouplerOnly, &settings, &xs, &[3.0]).is_err());
}

#[test]
fn optimizer_rejects_asymmetry_outside_range() {
    let spec = CircuitSpec::default();
    let modes = spec.qubit_modes().unwrap();
    assert!(model_with_asymmetry(&spec, &modes, 0.06, BasisChoice::Bare, Tolerances::default()).is_err());
    assert!(model_with_asymmetry(&spec, &modes, -0.01, BasisChoice::Bare, Tolerances::default()).is_err());
}

#[test]
fn binning_reports_mean_and_range() {
    let p = |x, e| OptimizedPoint { x, d: 0.0, t_g: 10.0, error: e };
    let pts = [p(0.40, 1.0), p(0.41, 3.0), p(0.50, 5.0)];
    let bins = bin_points(&pts, &[0.0], 2);
    assert_eq!(bins.len(), 2);
    assert_eq!((bins[0].count, bins[0].err_mean, bins[0].err_min, bins[0].err_max), (2, 2.0, 1.0, 3.0));
    assert_eq!(bins[1].count, 1);
}
