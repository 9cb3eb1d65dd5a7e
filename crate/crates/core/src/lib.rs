//! Evolving Takagi-Sugeno fuzzy forecasters for streaming time series.
//!
//! Three online learners share one [`OnlineLearner`] interface:
//! [`ets::EtsLearner`] (potential-based clustering with RLS consequents),
//! [`safis::SafisLearner`] (distance/influence growth with EKF updates and
//! pruning) and [`mcfis::McfisLearner`] (meta-cognitive sample deletion,
//! learning and reserve). The `bench` module wires them into the
//! windowed, normalized benchmark protocol and [`stats`] scores and ranks
//! the results.

pub mod bench;
pub mod error;
pub mod ets;
pub mod fuzzy;
pub mod learner;
pub mod mcfis;
pub mod safis;
pub mod stats;
pub mod timeseries;

pub use error::{Error, Result};
pub use learner::OnlineLearner;
