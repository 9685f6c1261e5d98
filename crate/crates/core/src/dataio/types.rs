use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::YearMonth;

/// ISO-3166 alpha-3 country code (three ASCII capitals).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CountryCode(String);

impl CountryCode {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        (s.len() == 3 && s.bytes().all(|b| b.is_ascii_uppercase())).then(|| Self(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CountryCode {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        CountryCode::parse(&s).ok_or_else(|| format!("invalid country code '{s}'"))
    }
}

impl From<CountryCode> for String {
    fn from(c: CountryCode) -> String {
        c.0
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($label => Ok($name::$variant),)+
                    other => Err(format!(
                        "'{}' is not one of: {}",
                        other,
                        [$($label),+].join(", ")
                    )),
                }
            }
        }
    };
}

label_enum!(Sex { Male => "male", Female => "female" });

label_enum!(IncomeGroup {
    Low => "low",
    LowerMiddle => "lower-middle",
    UpperMiddle => "upper-middle",
    High => "high",
});

label_enum!(
    /// The four hazard types tracked by the disaster kernel.
    Hazard {
        Flood => "flood",
        Storm => "storm",
        Earthquake => "earthquake",
        Drought => "drought",
    }
);

label_enum!(SplitTag { Train => "train", Test => "test", Unassigned => "unassigned" });

impl Sex {
    pub fn index(self) -> usize {
        match self {
            Sex::Male => 0,
            Sex::Female => 1,
        }
    }
}

/// Youngest and oldest age tracked by the cohort model.
pub const MAX_AGE: usize = 100;
pub const N_AGES: usize = MAX_AGE + 1;

/// The three UN stock years used as interpolation nodes.
pub const ANCHOR_YEARS: [i32; 3] = [2010, 2015, 2020];

/// Country key used for the fallback surplus profile.
pub const GLOBAL_DEFAULT: &str = "GLOBAL_DEFAULT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryEconomics {
    pub country: CountryCode,
    pub year: i32,
    pub gdp_per_capita: f64,
    pub population: f64,
    pub income_group: IncomeGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrantStockRecord {
    pub origin: CountryCode,
    pub destination: CountryCode,
    pub sex: Sex,
    pub anchor_year: i32,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeProfile {
    pub sex: Sex,
    pub age: u8,
    pub share: f64,
}

/// Which country a surplus profile row belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SurplusScope {
    Country(CountryCode),
    GlobalDefault,
}

impl fmt::Display for SurplusScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurplusScope::Country(c) => c.fmt(f),
            SurplusScope::GlobalDefault => f.write_str(GLOBAL_DEFAULT),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurplusProfile {
    pub scope: SurplusScope,
    pub age: u8,
    pub surplus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisasterEvent {
    pub event_id: String,
    pub country: CountryCode,
    pub onset_month: YearMonth,
    pub hazard: Hazard,
    pub affected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub sender: CountryCode,
    pub recipient: CountryCode,
    pub month: YearMonth,
    pub amount_usd: f64,
    pub split_tag: SplitTag,
}
