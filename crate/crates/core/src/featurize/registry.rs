use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::period::{DayPeriod, PeriodSlot};
use super::FeatureError;

/// Sensor / behaviour group a feature belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Wifi,
    Gps,
    Social,
    PhoneLog,
    Activity,
    Audio,
    Academic,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 7] = [
        FeatureGroup::Wifi,
        FeatureGroup::Gps,
        FeatureGroup::Social,
        FeatureGroup::PhoneLog,
        FeatureGroup::Activity,
        FeatureGroup::Audio,
        FeatureGroup::Academic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Wifi => "wifi",
            FeatureGroup::Gps => "gps",
            FeatureGroup::Social => "social",
            FeatureGroup::PhoneLog => "phonelog",
            FeatureGroup::Activity => "activity",
            FeatureGroup::Audio => "audio",
            FeatureGroup::Academic => "academic",
        }
    }

    /// Feature names this group's extractor emits, in emission order.
    pub fn feature_names(self) -> Vec<(String, PeriodSlot)> {
        let per_period = |stems: &[&str]| -> Vec<(String, PeriodSlot)> {
            DayPeriod::ALL
                .iter()
                .flat_map(|p| {
                    stems
                        .iter()
                        .map(move |s| (format!("{}_{}_{}", self.as_str(), p, s), PeriodSlot::Period(*p)))
                })
                .collect()
        };
        let daily = |stems: &[&str]| -> Vec<(String, PeriodSlot)> {
            stems
                .iter()
                .map(|s| (format!("{}_daily_{}", self.as_str(), s), PeriodSlot::Daily))
                .collect()
        };
        match self {
            FeatureGroup::Wifi => per_period(&WIFI_STEMS),
            FeatureGroup::Gps => per_period(&GPS_STEMS),
            FeatureGroup::Social => per_period(&SOCIAL_STEMS),
            FeatureGroup::PhoneLog => {
                let mut v = per_period(&PHONE_PERIOD_STEMS);
                v.extend(daily(&PHONE_DAILY_STEMS));
                v
            }
            FeatureGroup::Activity => per_period(&ACTIVITY_STEMS),
            FeatureGroup::Audio => per_period(&AUDIO_STEMS),
            FeatureGroup::Academic => daily(&ACADEMIC_STEMS),
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let s = match s.as_str() {
            "phone_log" | "phone log" => "phonelog",
            other => other,
        };
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown feature group '{s}'"))
    }
}

pub(crate) const WIFI_STEMS: [&str; 12] = [
    "n_locations",
    "dwell_variance",
    "user_top1_s",
    "user_top2_s",
    "user_top3_s",
    "global_top1_s",
    "global_top2_s",
    "global_top3_s",
    "global_top4_s",
    "global_top5_s",
    "global_top6_s",
    "global_top7_s",
];
pub(crate) const GPS_STEMS: [&str; 10] = [
    "max_step_m",
    "total_distance_m",
    "step_distance_var",
    "mean_speed_mps",
    "speed_var",
    "hull_area_m2",
    "indoor_s",
    "outdoor_s",
    "n_fixes",
    "moving_fraction",
];
pub(crate) const SOCIAL_STEMS: [&str; 3] = ["comm_count", "ambient_social_count", "call_duration_s"];
pub(crate) const PHONE_PERIOD_STEMS: [&str; 3] = ["charging_s", "locked_s", "dark_s"];
pub(crate) const PHONE_DAILY_STEMS: [&str; 5] =
    ["charging_s", "locked_s", "dark_s", "charge_sessions", "lock_sessions"];
pub(crate) const ACTIVITY_STEMS: [&str; 4] = ["stationary_s", "walking_s", "running_s", "unknown_s"];
pub(crate) const AUDIO_STEMS: [&str; 3] = ["silence_s", "voice_s", "noise_s"];
pub(crate) const ACADEMIC_STEMS: [&str; 13] = [
    "gpa",
    "page_views",
    "contributions",
    "questions",
    "notes",
    "answers",
    "days_to_deadline",
    "class_hours",
    "mon_thu",
    "friday",
    "saturday",
    "sunday",
    "deadline_day",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub group: FeatureGroup,
    pub period: PeriodSlot,
    pub index: usize,
}

/// Ordered, named, group-tagged feature columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRegistry {
    defs: Vec<FeatureDef>,
}

impl FeatureRegistry {
    /// Every extractor output, groups in canonical order: 123 columns.
    pub fn default_registry() -> Self {
        let entries = FeatureGroup::ALL
            .iter()
            .flat_map(|g| g.feature_names().into_iter().map(move |(n, p)| (n, *g, p)))
            .collect();
        Self::from_entries(entries).expect("built-in names are unique")
    }

    pub fn from_entries(entries: Vec<(String, FeatureGroup, PeriodSlot)>) -> Result<Self, FeatureError> {
        let mut seen = HashSet::new();
        let mut defs = Vec::with_capacity(entries.len());
        for (index, (name, group, period)) in entries.into_iter().enumerate() {
            if !seen.insert(name.clone()) {
                return Err(FeatureError::Manifest {
                    line: index + 1,
                    message: format!("duplicate feature name '{name}'"),
                });
            }
            defs.push(FeatureDef { name, group, period, index });
        }
        Ok(Self { defs })
    }

    /// Parses `name,group,period` lines. Blank lines and `#` comments are
    /// skipped.
    pub fn from_manifest(text: &str) -> Result<Self, FeatureError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| FeatureError::Manifest { line: i + 1, message };
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let [name, group, period] = parts[..] else {
                return Err(err(format!("expected name,group,period, found '{line}'")));
            };
            if name.is_empty() {
                return Err(err("empty feature name".into()));
            }
            entries.push((name.to_string(), group.parse().map_err(err)?, period.parse().map_err(err)?));
        }
        Self::from_entries(entries)
    }

    pub fn to_manifest(&self) -> String {
        self.defs
            .iter()
            .map(|d| format!("{},{},{}\n", d.name, d.group, d.period))
            .collect()
    }

    /// Short content hash of the manifest, for report provenance.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_manifest().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn defs(&self) -> &[FeatureDef] {
        &self.defs
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.iter().map(|d| d.name.as_str())
    }

    /// Column indices of one group, in registry order.
    pub fn group_columns(&self, group: FeatureGroup) -> Vec<usize> {
        self.defs.iter().filter(|d| d.group == group).map(|d| d.index).collect()
    }

    pub fn group_sizes(&self) -> BTreeMap<FeatureGroup, usize> {
        let mut out = BTreeMap::new();
        for d in &self.defs {
            *out.entry(d.group).or_default() += 1;
        }
        out
    }

    /// Groups present in the registry, in canonical order.
    pub fn groups(&self) -> Vec<FeatureGroup> {
        let sizes = self.group_sizes();
        FeatureGroup::ALL.into_iter().filter(|g| sizes.contains_key(g)).collect()
    }
}

impl Default for FeatureRegistry {
    fn default() -> Self {
        Self::default_registry()
    }
}
