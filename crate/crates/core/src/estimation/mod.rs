//! Phase estimation pipeline for dual-quadrature Ramsey readout.
//!
//! Per shot, the two quadrature populations are inverted to a phase on
//! `(−π, π]`. Deviations from a fitted mean-phase curve are then summarized
//! per interrogation time by the width of a folded (wrapped) Gaussian, from
//! which the phase-slip probability, Ramsey decay envelope, maximum
//! interrogation time and metrological gain follow in closed form.

mod folded;
mod phase;
mod shots;
mod slip;

pub use folded::{fit_folded_gaussian, fit_folded_gaussian_histogram, folded_gaussian_density, sample_folded_gaussian};
pub use phase::{
    estimate_phase, estimate_phase_from_contrasts, estimate_single_basis, mean_phase_curve, phase_deviation,
    wrap_phase, MeanPhaseCurve,
};
pub use shots::{Quadrature, ShotRecord, ShotRow, ShotTable, SHOT_TABLE_HEADER};
pub use slip::{
    decay_envelope, fit_sigma_growth, gain_db_from_tmax_ratio, metrological_gain_db, phase_slip_probability,
    subtract_qpn, t_max, DynamicRange, PhaseFit, QpnSubtracted, DEFAULT_SIGMA_QPN,
};
