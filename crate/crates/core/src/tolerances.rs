//! Central table of numerical defaults.
//!
//! | constant | value | used for |
//! |---|---|---|
//! | [`SIMPLE_EIG`] | 1e-9 | eigenvalue simplicity / dominance gap, relative to max(1, ρ) |
//! | [`PERRON_POSITIVE`] | 1e-9 | minimum entry of an ∞-normalised Perron vector |
//! | [`REGIME`] | 1e-9 | critical vs strict regime, relative to max(1, ρ) |
//! | [`NSD_REL`] | 1e-8 | `λ_max(H) ≤ NSD_REL·‖H‖₂` counts as negative semidefinite |
//! | [`RANK_REL`] | 1e-8 | singular values below `RANK_REL·s_max` count as zero |
//! | [`JACOBIAN_FD_STEP`] | 1e-6 | finite-difference fallback for custom susceptibilities |
//! | [`CLAMP_ABORT`] | 1e-6 | box excursion beyond which integration aborts |
//! | [`STEP`] | 1e-2 | RK4 step |
//! | [`T_MAX`] | 200 | integration horizon |
//! | [`CONVERGENCE`] | 1e-9 | field residual and stagnation threshold |
//! | [`STAGNATION_WINDOW`] | 10 | steps over which stagnation is measured |
//! | [`TIE`] | 1e-9 | relative tie tolerance for the argmax set of v_r |
//! | [`ALPHA_SLACK`] | 1e-6 | slack at closed endpoints of α intervals |
//! | [`SAMPLING_MARGIN`] | 1e-3 | distance kept from open region boundaries when sampling |
//! | [`GAMMA_BUDGET`] | 5000 | objective evaluations for the Γ search |
//! | [`ORACLE_KMAX`] | 500 | matrix powers checked by the eventual-positivity oracle |

pub const SIMPLE_EIG: f64 = 1e-9;
pub const PERRON_POSITIVE: f64 = 1e-9;
pub const REGIME: f64 = 1e-9;
pub const NSD_REL: f64 = 1e-8;
pub const RANK_REL: f64 = 1e-8;
pub const JACOBIAN_FD_STEP: f64 = 1e-6;
pub const CLAMP_ABORT: f64 = 1e-6;
pub const STEP: f64 = 1e-2;
pub const T_MAX: f64 = 200.0;
pub const CONVERGENCE: f64 = 1e-9;
pub const STAGNATION_WINDOW: usize = 10;
pub const TIE: f64 = 1e-9;
pub const ALPHA_SLACK: f64 = 1e-6;
pub const SAMPLING_MARGIN: f64 = 1e-3;
pub const GAMMA_BUDGET: usize = 5000;
pub const ORACLE_KMAX: usize = 500;
