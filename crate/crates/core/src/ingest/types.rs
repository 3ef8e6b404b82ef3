use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::time::weekday_index;

/// Opaque participant identifier. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Option<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            None
        } else {
            Some(Self(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Interned WiFi location name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocationId(pub u32);

/// Location names, indexed by [`LocationId`] in lexicographic name order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocationTable {
    names: Vec<String>,
    index: HashMap<String, LocationId>,
}

impl LocationTable {
    /// Builds a table whose ids follow sorted name order, so ids do not
    /// depend on the order rows were read in.
    pub fn from_names<I: IntoIterator<Item = String>>(names: I) -> Self {
        let mut names: Vec<String> = names.into_iter().collect();
        names.sort();
        names.dedup();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), LocationId(i as u32)))
            .collect();
        Self { names, index }
    }

    pub fn id(&self, name: &str) -> Option<LocationId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: LocationId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WifiScan {
    pub t: i64,
    pub location: LocationId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    /// `Some(true)` only when an indoor inference exists and is positive.
    pub indoor: Option<bool>,
}

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($token => Ok($name::$variant),)+
                    other => Err(format!("unknown {} '{}'", stringify!($name), other)),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum!(
    /// Physical activity inference class.
    ActivityClass {
        Stationary => "stationary",
        Walking => "walking",
        Running => "running",
        Unknown => "unknown",
    }
);

token_enum!(
    /// Ambient audio inference class.
    AudioClass {
        Silence => "silence",
        Voice => "voice",
        Noise => "noise",
    }
);

token_enum!(
    PhoneState {
        Charging => "charging",
        Locked => "locked",
        Dark => "dark",
    }
);

token_enum!(
    CommKind {
        Sms => "sms",
        Call => "call",
        AppUsage => "app_usage",
        BluetoothContact => "bluetooth_contact",
    }
);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivitySample {
    pub t: i64,
    pub class: ActivityClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AudioSample {
    pub t: i64,
    pub class: AudioClass,
}

/// Half-open `[start, end)` interval in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhoneStateInterval {
    pub start: i64,
    pub end: i64,
    pub kind: PhoneState,
}

/// Point communication event. `duration_s` is non-zero only for calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommEvent {
    pub t: i64,
    pub kind: CommKind,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcademicRecord {
    pub date: NaiveDate,
    pub gpa: f64,
    pub page_views: u32,
    pub contributions: u32,
    pub questions: u32,
    pub notes: u32,
    pub answers: u32,
    pub days_to_deadline: u32,
    pub class_hours: f64,
}

impl AcademicRecord {
    /// 0 = Monday .. 6 = Sunday, always consistent with `date`.
    pub fn day_of_week(&self) -> u8 {
        weekday_index(self.date)
    }
}

/// One answer to the daily 1-5 stress item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmaStress {
    pub t: i64,
    pub level: u8,
}

/// PHQ-9 total, 0..=27.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Phq9Score(pub u8);

impl Phq9Score {
    pub const MAX: u8 = 27;
}
