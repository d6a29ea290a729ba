//! Identifiers, enumerations and record types shared across the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors produced when parsing the textual forms of model types.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("expected 14 digits, got {0} characters")]
    NotFourteenDigits(usize),
    #[error("expected 7 digits, got {0} characters")]
    NotSevenDigits(usize),
    #[error("non-digit character {0:?}")]
    NonDigitCharacter(char),
    #[error("unknown assessment {0:?}")]
    UnknownAssessment(String),
    #[error("unknown grade {0:?}; expected 5, 7 or 9")]
    UnknownGrade(String),
}

fn digits<const N: usize>(text: &str, wrong_len: fn(usize) -> ModelError) -> Result<[u8; N], ModelError> {
    let len = text.chars().count();
    if len != N {
        return Err(wrong_len(len));
    }
    let mut out = [0u8; N];
    for (slot, c) in out.iter_mut().zip(text.chars()) {
        if !c.is_ascii_digit() {
            return Err(ModelError::NonDigitCharacter(c));
        }
        *slot = c as u8;
    }
    Ok(out)
}

/// County-District-School code: 2 + 5 + 7 decimal digits.
///
/// A school part of `0000000` identifies a district-level entity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CdsCode([u8; 14]);

impl CdsCode {
    const SCHOOL_ZERO: &'static [u8] = b"0000000";

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        digits::<14>(text, ModelError::NotFourteenDigits).map(CdsCode)
    }

    pub fn as_str(&self) -> &str {
        // only ASCII digits are ever stored
        std::str::from_utf8(&self.0).expect("ascii digits")
    }

    pub fn county(&self) -> &str {
        &self.as_str()[..2]
    }

    pub fn district(&self) -> &str {
        &self.as_str()[2..7]
    }

    pub fn school(&self) -> &str {
        &self.as_str()[7..]
    }

    /// Same county and district with the school part zeroed. Idempotent.
    pub fn district_of(&self) -> CdsCode {
        let mut out = self.0;
        out[7..].copy_from_slice(Self::SCHOOL_ZERO);
        CdsCode(out)
    }

    pub fn is_district(&self) -> bool {
        &self.0[7..] == Self::SCHOOL_ZERO
    }

    pub fn level(&self) -> Level {
        if self.is_district() {
            Level::District
        } else {
            Level::School
        }
    }
}

/// Free-function form of [`CdsCode::parse`].
pub fn parse_cdscode(text: &str) -> Result<CdsCode, ModelError> {
    CdsCode::parse(text)
}

/// Free-function form of [`CdsCode::district_of`].
pub fn district_of(code: CdsCode) -> CdsCode {
    code.district_of()
}

impl fmt::Display for CdsCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CdsCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CdsCode({})", self.as_str())
    }
}

impl FromStr for CdsCode {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// NCES local education agency id (7 digits).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Leaid([u8; 7]);

impl Leaid {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        digits::<7>(text, ModelError::NotSevenDigits).map(Leaid)
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("ascii digits")
    }
}

impl fmt::Display for Leaid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Leaid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Leaid({})", self.as_str())
    }
}

impl FromStr for Leaid {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

macro_rules! serde_as_str {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_as_str!(CdsCode);
serde_as_str!(Leaid);
serde_as_str!(Assessment);

/// The six fitness test areas reported in the research files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assessment {
    AerobicCapacity,
    BodyComposition,
    UpperBodyStrength,
    AbdominalStrength,
    Flexibility,
    TrunkLift,
}

impl Assessment {
    pub const ALL: [Assessment; 6] = [
        Assessment::AerobicCapacity,
        Assessment::BodyComposition,
        Assessment::UpperBodyStrength,
        Assessment::AbdominalStrength,
        Assessment::Flexibility,
        Assessment::TrunkLift,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Assessment::AerobicCapacity => "aerobic_capacity",
            Assessment::BodyComposition => "body_composition",
            Assessment::UpperBodyStrength => "upper_body_strength",
            Assessment::AbdominalStrength => "abdominal_strength",
            Assessment::Flexibility => "flexibility",
            Assessment::TrunkLift => "trunk_lift",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Assessment::AerobicCapacity => "Aerobic Capacity",
            Assessment::BodyComposition => "Body Composition",
            Assessment::UpperBodyStrength => "Upper Body Strength",
            Assessment::AbdominalStrength => "Abdominal Strength",
            Assessment::Flexibility => "Flexibility",
            Assessment::TrunkLift => "Trunk Lift",
        }
    }
}

impl fmt::Display for Assessment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Assessment {
    type Err = ModelError;

    /// Accepts the snake-case token, and also display names with spaces or
    /// hyphens in any letter case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                ' ' | '-' => '_',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        Assessment::ALL
            .into_iter()
            .find(|a| a.token() == norm)
            .ok_or_else(|| ModelError::UnknownAssessment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Grade {
    Five,
    Seven,
    Nine,
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::Five, Grade::Seven, Grade::Nine];

    pub fn number(self) -> u8 {
        match self {
            Grade::Five => 5,
            Grade::Seven => 7,
            Grade::Nine => 9,
        }
    }
}

impl TryFrom<u8> for Grade {
    type Error = ModelError;
    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            5 => Ok(Grade::Five),
            7 => Ok(Grade::Seven),
            9 => Ok(Grade::Nine),
            other => Err(ModelError::UnknownGrade(other.to_string())),
        }
    }
}

impl From<Grade> for u8 {
    fn from(g: Grade) -> u8 {
        g.number()
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Grade {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        t.parse::<u8>()
            .ok()
            .and_then(|n| Grade::try_from(n).ok())
            .ok_or_else(|| ModelError::UnknownGrade(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    School,
    District,
}

impl Level {
    pub fn token(self) -> &'static str {
        match self {
            Level::School => "school",
            Level::District => "district",
        }
    }
}

/// First and last school years (keyed by ending calendar year) present in the
/// public research files.
pub const FIRST_YEAR: u16 = 1999;
pub const LAST_YEAR: u16 = 2019;

/// Student counts per fitness zone. A `None` cell was suppressed or empty in
/// the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ZoneCounts {
    pub tested: Option<u32>,
    pub hfz: Option<u32>,
    pub needs_improvement: Option<u32>,
    pub high_risk: Option<u32>,
}

impl ZoneCounts {
    pub fn new(tested: u32, hfz: u32, needs_improvement: u32, high_risk: u32) -> Self {
        ZoneCounts {
            tested: Some(tested),
            hfz: Some(hfz),
            needs_improvement: Some(needs_improvement),
            high_risk: Some(high_risk),
        }
    }

    /// All cells missing.
    pub fn suppressed() -> Self {
        ZoneCounts::default()
    }

    /// Sum of the known zone cells does not exceed `tested` (when known).
    pub fn is_consistent(&self) -> bool {
        let Some(tested) = self.tested else {
            return true;
        };
        let zones: u64 =
            [self.hfz, self.needs_improvement, self.high_risk].iter().flatten().map(|&c| u64::from(c)).sum();
        zones <= u64::from(tested)
    }
}

/// Percentage of tested students in the Healthy Fitness Zone, at full
/// precision. Missing when nothing was tested or a needed cell is missing.
pub fn pct_hfz(counts: &ZoneCounts) -> Option<f64> {
    match (counts.tested, counts.hfz) {
        (Some(tested), Some(hfz)) if tested > 0 => Some(100.0 * f64::from(hfz) / f64::from(tested)),
        _ => None,
    }
}

/// One (entity, year, grade, assessment) observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessRecord {
    pub entity: CdsCode,
    pub level: Level,
    pub school_year: u16,
    pub grade: Grade,
    pub assessment: Assessment,
    pub counts: ZoneCounts,
    pub pct_hfz: Option<f64>,
}

/// Unique lookup key of a [`FitnessRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub entity: CdsCode,
    pub school_year: u16,
    pub grade: Grade,
    pub assessment: Assessment,
}

impl FitnessRecord {
    /// Level and percentage are derived from the code and the counts.
    pub fn new(entity: CdsCode, school_year: u16, grade: Grade, assessment: Assessment, counts: ZoneCounts) -> Self {
        FitnessRecord {
            entity,
            level: entity.level(),
            school_year,
            grade,
            assessment,
            counts,
            pct_hfz: pct_hfz(&counts),
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey { entity: self.entity, school_year: self.school_year, grade: self.grade, assessment: self.assessment }
    }
}
