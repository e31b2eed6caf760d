//! Wave-equation moment functionals: regimes, convergent-regime moments and
//! the divergence functional of the ill-posed regime.

pub mod amplitude;
pub mod divergence;
pub mod mc;
pub mod moments;
pub mod regime;
pub mod testfn;

pub use amplitude::{duhamel_energy, point_amplitude, resonant_amplitude, wave_amplitude};
pub use divergence::{
    divergence_functional, divergence_split, divergence_sweep, threshold_scan, DivergenceSplit, ThresholdPoint,
};
pub use mc::{mc_pair, mc_single, McBudget, SpecPoint};
pub use moments::{
    cherry_moment_ia, cherry_moment_ib, kh_double_integral, kh_weight, recov_decay_probe, recov_integral,
    recov_predicted_exponent, CherryIa,
};
pub use regime::{
    classify_regime, frontier, reparametrize_h_prime, valid_exponent_range, ConeCd, ExponentRange, HPrime, RegimeLabel,
    WeightKind, WeightSpec,
};
pub use testfn::ClassETestFunction;
