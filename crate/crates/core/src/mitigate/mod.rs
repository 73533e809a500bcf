//! Bias-mitigation methods: quantile repair of features, per-group
//! thresholds, reject-option flipping and randomized label mixing.

mod dir;
mod eop;
pub mod lp;
mod reject;
mod threshold;

pub use dir::{disparate_impact_remove, quantile_at, repair_values, RepairedDataset};
pub use eop::{
    apply_mixing, derived_rates, fit_equalized_odds_post, ConfusionCounts, DerivedRates, EopFit, MixingRates,
};
pub use reject::{apply_reject_option, reject_option_classify, CriticalRegion, RejectOptionFit, THETA_STEPS};
pub use threshold::{apply_thresholds, fit_threshold_optimizer, FairnessTarget, GroupThresholds};

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Seventeen significant digits: enough for an exact `f64` round trip.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_artifact<A: DeserializeOwned>(text: &str, what: &str) -> Result<A> {
    toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("malformed {what}: {e}")))
}
