//! Canonical streams to daily, group-tagged feature vectors.
//!
//! Each user-day is split into Night `[00:00, 09:00)`, Day `[09:00, 18:00)`
//! and Evening `[18:00, 24:00)` local time. Sampled state streams (WiFi
//! location, activity, audio, GPS indoor flag) use carry-forward
//! attribution: a sample's state holds until the next sample, midnight, or
//! `max_carry_s` later. Columns are governed by a [`FeatureRegistry`].

mod carry;
mod extract;
pub mod geo;
mod matrix;
mod period;
mod registry;
mod standardize;

use thiserror::Error;

pub use carry::{attribute_states, carry_spans};
pub use extract::{
    academic_features, activity_features, audio_features, gps_features, phonelog_features, social_features,
    wifi_dwell, wifi_features, ExtractOptions, GroupBlock, TopLocations,
};
pub use matrix::{build_feature_matrix, FeatureMatrix, FeatureVector, FitScope, LocationRanking};
pub use period::{period_of, split_span, DayPeriod, PeriodSlot};
pub use registry::{FeatureDef, FeatureGroup, FeatureRegistry};
pub use standardize::{standardize, Standardizer};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("registry mismatch for group {group}: {message}")]
    RegistryMismatch { group: FeatureGroup, message: String },
    #[error("registry manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("standardization needs at least one fit row")]
    EmptyFit,
    #[error("dataset has no study range (no dataset.meta dates and no events)")]
    NoStudyRange,
}
