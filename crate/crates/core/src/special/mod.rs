//! Special functions: Gamma and the two-parameter Mittag-Leffler function.

pub mod gamma;
pub mod mittag_leffler;

pub use gamma::{gamma, ln_gamma, rgamma, sin_pi};
pub use mittag_leffler::{
    ml, ml_e1_decay_bound, DecayBound, MittagLeffler, MlQuery, DEFAULT_REL_TOL, MIN_REL_TOL,
};
