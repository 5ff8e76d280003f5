//! Advertiser-demand estimation as a contextual bandit.
//!
//! The pieces, bottom up:
//!
//! - [`bidlog`]: synthetic auction logs and their CSV persistence.
//! - [`bidding`]: the budget-constrained bidding oracle mapping a demand vector to the
//!   best achievable KPI report.
//! - [`env`]: simulated advertisers with latent demands and a conditional-logit adoption
//!   model.
//! - [`agent`]: a small MLP that proposes demand vectors, trained on adoption feedback,
//!   exploring through dropout-sampled networks.
//! - [`harness`]: the experiment loop, regret/adoption metrics, sweeps and plots.

pub mod agent;
pub mod bidding;
pub mod bidlog;
pub mod env;
pub mod error;
mod fsutil;
pub mod harness;
pub mod numeric;

pub use bidding::{simulate_bidding, BiddingOutcome, DemandVector, KpiVector};
pub use bidlog::{generate_log, load_log, save_log, BidLog, Impression, LogGenParams, N_KPI};
pub use env::{AdUnit, AdoptionModelParams, DemandBasis, EnvStep, Environment};
pub use error::{Error, Result};
