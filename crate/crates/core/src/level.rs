use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Qualitative severity. Ordering is `Annoyance < Low < Medium < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HazardLevel {
    Annoyance,
    Low,
    Medium,
    High,
}

impl HazardLevel {
    pub const ALL: [HazardLevel; 4] = [
        HazardLevel::Annoyance,
        HazardLevel::Low,
        HazardLevel::Medium,
        HazardLevel::High,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HazardLevel::Annoyance => "Annoyance",
            HazardLevel::Low => "Low",
            HazardLevel::Medium => "Medium",
            HazardLevel::High => "High",
        }
    }
}

impl fmt::Display for HazardLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown hazard level `{0}`")]
pub struct UnknownLevel(pub String);

impl FromStr for HazardLevel {
    type Err = UnknownLevel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HazardLevel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownLevel(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_parse() {
        assert!(HazardLevel::Annoyance < HazardLevel::Low);
        assert!(HazardLevel::Medium < HazardLevel::High);
        assert_eq!("high".parse::<HazardLevel>().unwrap(), HazardLevel::High);
        assert!("Catastrophic".parse::<HazardLevel>().is_err());
    }
}
