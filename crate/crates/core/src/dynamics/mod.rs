//! Flux-pulsed gate dynamics.

pub mod evolve;
pub mod gate;
pub mod ode;
pub mod pulse;
pub mod tomography;

pub use evolve::{
    jump_operators, propagate_closed, propagate_lindblad, propagate_lindblad_many, propagator_direct,
    propagator_segmented, DrivenSystem, NoiseModel,
};
pub use gate::{
    bin_points, error_landscape, model_with_asymmetry, optimize_gate, optimize_points, BasisChoice, BinSummary, GateModel, GatePlan, GateReport, GateScheme,
    LandscapePoint, OptimizeOptions, OptimizedPoint, SchemeSettings,
};
pub use ode::{integrate, OdeStats, Tolerances};
pub use pulse::{DriveSchedule, PulseSpec};
pub use tomography::{
    chi_from_qpt, extract_conditional_phase, gate_fidelity, remove_local_z_frames, u_ideal, ProcessMatrix,
};
