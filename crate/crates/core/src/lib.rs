//! Analysis, simulation and stabilization of a piezoelectric structure
//! controlled by a digital vibration absorber (DVA).
//!
//! The crate covers four workflows:
//! - equal-peak tuning of the emulated series RL shunt ([`model`]),
//! - frequency-domain analysis of the sampled loop, including stability
//!   margins and delayed frequency response functions ([`freq_analysis`]),
//! - delay-induced stability limits: root loci of the transcendental
//!   characteristic equation, critical sampling periods and the explicit
//!   series bounds ([`delay_stability`]),
//! - anticipation of the sampling delay by least-squares retuning of the
//!   admittance coefficients ([`stabilization`]), verified by sampled-data
//!   time simulation ([`simulate`]).
//!
//! All quantities are SI; frequencies are rad/s unless a name says Hz.

// `!(x > 0.0)` in argument validation is deliberate: it rejects NaN, which
// `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay_stability;
pub mod error;
pub mod freq_analysis;
pub mod model;
pub mod simulate;
pub mod stabilization;

mod poly;

pub use error::{Error, Result};
pub use freq_analysis::{
    closed_loop_frf, delayed_admittance, find_frf_peaks, loop_transfer, open_loop_tf,
    passivity_loss_delay, stability_margins, zoh_response, DelayModel, FreqGrid, FrfCurve,
    FrfPeak, MarginReport, Normalization,
};
pub use model::{
    dynamic_capacitance, eemcf, max_tunable_kc, shunt_admittance, tune_series_rl,
    tune_series_rl_linearized, PiezoModel, RationalTF, ShuntParams,
};

pub use delay_stability::{
    admittance_poles, critical_delay_numeric, critical_delay_series, max_sampling_period,
    nominal_poles, root_locus, CriticalDelayResult, CriticalMethod, DelayVariant, RootLocus,
};
pub use simulate::{
    extract_envelope, simulate_swept_sine, tustin_discretize, DiscreteTF, SampledSimulator,
    SimResult, SweepConfig, SweepLaw,
};
pub use stabilization::{
    apply_modification, build_modification_system, extract_modification, solve_modification,
    verify_pole_placement, ModificationFactors, ModificationSystem, PlacementCheck,
};
