//! Economic value of behind-the-meter rooftop PV and storage for households
//! and for an aggregator that coordinates them.

pub mod analytic;
pub mod calendar;
pub mod coordination;
pub mod devices;
pub mod dispatch;
pub mod error;
pub mod exec;
pub mod forecast;
pub mod ingest;
pub mod lp;
pub mod metrics;
pub mod pipeline;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub(crate) mod pwl;
pub mod seed;
pub mod synth;
pub mod tariffs;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
