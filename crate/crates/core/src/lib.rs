//! Finite reflection groups, Brownian motion killed on chamber walls, and
//! semi-static hedging of multi-asset knock-out options with cone barriers.
//!
//! The crate is organised bottom-up:
//!
//! * [`reflection`]: fundamental systems, group enumeration, chambers.
//! * [`density`]: killed heat kernel by the method of images, survival probabilities.
//! * [`market`]: the multi-asset Black-Scholes model and the cone barrier.
//! * [`hedge`]: the replicating portfolio and Monte Carlo verification.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod density;
pub mod error;
pub mod hedge;
pub mod linalg;
pub mod market;
pub mod mc;
pub mod payoff;
pub mod reflection;

pub use density::{gaussian_kernel, mc_survival, KilledKernel, QuadratureSpec};
pub use error::{Error, Result};
pub use hedge::{
    build_portfolio, price_knockout_mc, price_portfolio_mc, put_call_symmetry_case, verify_hedge_identity,
    HedgePortfolio, HedgeReport, HedgeTerm, SymmetryReport,
};
pub use market::{ConeBarrier, MarketModel};
pub use mc::{Estimate, McConfig};
pub use payoff::PayoffSpec;
pub use reflection::{
    canonicalize_to_chamber, chamber_contains, full_root_system, generate_group, reflect, FundamentalSystem,
    GroupElement, ReflectionGroup, RootSystem,
};
