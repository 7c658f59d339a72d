//! Heterogeneous crime-record ingestion.
//!
//! Each supported source is described by an [`Adapter`]: the columns it is
//! known to carry, a signature subset used to recognize its header, a
//! column-to-canonical-field mapping, a date rule and the tokens it uses for
//! "unknown". Adapting a row fills every canonical field the source has and
//! leaves the rest null.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceKind {
    BostonCrime,
    ChicagoCrime,
    DenverCrime,
    PhillyCrime,
    SanFranciscoCrime,
    FatalPoliceShootings,
    HomicideReports,
    GlobalTerrorism,
    MassShootings,
    Canonical,
}

impl SourceKind {
    pub const ALL: [SourceKind; 10] = [
        Self::BostonCrime,
        Self::ChicagoCrime,
        Self::DenverCrime,
        Self::PhillyCrime,
        Self::SanFranciscoCrime,
        Self::FatalPoliceShootings,
        Self::HomicideReports,
        Self::GlobalTerrorism,
        Self::MassShootings,
        Self::Canonical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BostonCrime => "BostonCrime",
            Self::ChicagoCrime => "ChicagoCrime",
            Self::DenverCrime => "DenverCrime",
            Self::PhillyCrime => "PhillyCrime",
            Self::SanFranciscoCrime => "SanFranciscoCrime",
            Self::FatalPoliceShootings => "FatalPoliceShootings",
            Self::HomicideReports => "HomicideReports",
            Self::GlobalTerrorism => "GlobalTerrorism",
            Self::MassShootings => "MassShootings",
            Self::Canonical => "Canonical",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::malformed("DataBase", s, "unknown source kind"))
    }
}

/// The nullable canonical attributes, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Date,
    CrimeType,
    CrimeDetail,
    Lat,
    Long,
    LocDescription,
    City,
    Street,
    State,
    VictimAge,
    VictimRace,
    VictimGender,
    VictimDescription,
    TotalVictims,
    PerpeMental,
    PerpeFlee,
    PerpeRace,
    PerpeGender,
    PerpeAge,
    PerpeNationality,
    PerpeVicRelation,
    Weapon,
    Motivation,
    NewsCoverage,
    PropertyDamage,
}

impl Field {
    pub const ALL: [Field; 25] = [
        Field::Date,
        Field::CrimeType,
        Field::CrimeDetail,
        Field::Lat,
        Field::Long,
        Field::LocDescription,
        Field::City,
        Field::Street,
        Field::State,
        Field::VictimAge,
        Field::VictimRace,
        Field::VictimGender,
        Field::VictimDescription,
        Field::TotalVictims,
        Field::PerpeMental,
        Field::PerpeFlee,
        Field::PerpeRace,
        Field::PerpeGender,
        Field::PerpeAge,
        Field::PerpeNationality,
        Field::PerpeVicRelation,
        Field::Weapon,
        Field::Motivation,
        Field::NewsCoverage,
        Field::PropertyDamage,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Field::Date => "Date",
            Field::CrimeType => "CrimeType",
            Field::CrimeDetail => "CrimeDetail",
            Field::Lat => "Lat",
            Field::Long => "Long",
            Field::LocDescription => "LocDescription",
            Field::City => "City",
            Field::Street => "Street",
            Field::State => "State",
            Field::VictimAge => "VictimAge",
            Field::VictimRace => "VictimRace",
            Field::VictimGender => "VictimGender",
            Field::VictimDescription => "VictimDescription",
            Field::TotalVictims => "TotalVictims",
            Field::PerpeMental => "PerpeMental",
            Field::PerpeFlee => "PerpeFlee",
            Field::PerpeRace => "PerpeRace",
            Field::PerpeGender => "PerpeGender",
            Field::PerpeAge => "PerpeAge",
            Field::PerpeNationality => "PerpeNationality",
            Field::PerpeVicRelation => "PerpeVicRelation",
            Field::Weapon => "Weapon",
            Field::Motivation => "Motivation",
            Field::NewsCoverage => "NewsCoverage",
            Field::PropertyDamage => "PropertyDamage",
        }
    }
}

pub const DATABASE_COLUMN: &str = "DataBase";

/// Canonical header: the attribute table read column by column, source tag last.
pub fn canonical_header() -> Vec<&'static str> {
    Field::ALL
        .iter()
        .map(|f| f.column())
        .chain(std::iter::once(DATABASE_COLUMN))
        .collect()
}

const CANONICAL_DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrimeRecord {
    pub date: Option<NaiveDate>,
    pub crime_type: Option<String>,
    pub crime_detail: Option<String>,
    pub lat: Option<f64>,
    pub long: Option<f64>,
    pub loc_description: Option<String>,
    pub city: Option<String>,
    pub street: Option<String>,
    pub state: Option<String>,
    pub victim_age: Option<u32>,
    pub victim_race: Option<String>,
    pub victim_gender: Option<String>,
    pub victim_description: Option<String>,
    pub total_victims: Option<u32>,
    pub perpe_mental: Option<String>,
    pub perpe_flee: Option<String>,
    pub perpe_race: Option<String>,
    pub perpe_gender: Option<String>,
    pub perpe_age: Option<u32>,
    pub perpe_nationality: Option<String>,
    pub perpe_vic_relation: Option<String>,
    pub weapon: Option<String>,
    pub motivation: Option<String>,
    pub news_coverage: Option<String>,
    pub property_damage: Option<String>,
    pub database: SourceKind,
}

const MAX_AGE: u32 = 130;

impl CrimeRecord {
    /// All attributes null.
    pub fn new(database: SourceKind) -> Self {
        Self {
            date: None,
            crime_type: None,
            crime_detail: None,
            lat: None,
            long: None,
            loc_description: None,
            city: None,
            street: None,
            state: None,
            victim_age: None,
            victim_race: None,
            victim_gender: None,
            victim_description: None,
            total_victims: None,
            perpe_mental: None,
            perpe_flee: None,
            perpe_race: None,
            perpe_gender: None,
            perpe_age: None,
            perpe_nationality: None,
            perpe_vic_relation: None,
            weapon: None,
            motivation: None,
            news_coverage: None,
            property_damage: None,
            database,
        }
    }

    fn text_ref(&self, field: Field) -> Option<&Option<String>> {
        Some(match field {
            Field::CrimeType => &self.crime_type,
            Field::CrimeDetail => &self.crime_detail,
            Field::LocDescription => &self.loc_description,
            Field::City => &self.city,
            Field::Street => &self.street,
            Field::State => &self.state,
            Field::VictimRace => &self.victim_race,
            Field::VictimGender => &self.victim_gender,
            Field::VictimDescription => &self.victim_description,
            Field::PerpeMental => &self.perpe_mental,
            Field::PerpeFlee => &self.perpe_flee,
            Field::PerpeRace => &self.perpe_race,
            Field::PerpeGender => &self.perpe_gender,
            Field::PerpeNationality => &self.perpe_nationality,
            Field::PerpeVicRelation => &self.perpe_vic_relation,
            Field::Weapon => &self.weapon,
            Field::Motivation => &self.motivation,
            Field::NewsCoverage => &self.news_coverage,
            Field::PropertyDamage => &self.property_damage,
            _ => return None,
        })
    }

    fn text_slot(&mut self, field: Field) -> Option<&mut Option<String>> {
        Some(match field {
            Field::CrimeType => &mut self.crime_type,
            Field::CrimeDetail => &mut self.crime_detail,
            Field::LocDescription => &mut self.loc_description,
            Field::City => &mut self.city,
            Field::Street => &mut self.street,
            Field::State => &mut self.state,
            Field::VictimRace => &mut self.victim_race,
            Field::VictimGender => &mut self.victim_gender,
            Field::VictimDescription => &mut self.victim_description,
            Field::PerpeMental => &mut self.perpe_mental,
            Field::PerpeFlee => &mut self.perpe_flee,
            Field::PerpeRace => &mut self.perpe_race,
            Field::PerpeGender => &mut self.perpe_gender,
            Field::PerpeNationality => &mut self.perpe_nationality,
            Field::PerpeVicRelation => &mut self.perpe_vic_relation,
            Field::Weapon => &mut self.weapon,
            Field::Motivation => &mut self.motivation,
            Field::NewsCoverage => &mut self.news_coverage,
            Field::PropertyDamage => &mut self.property_damage,
            _ => return None,
        })
    }

    /// Field value as canonical text; `None` for null.
    pub fn get(&self, field: Field) -> Option<String> {
        match field {
            Field::Date => self.date.map(|d| d.format(CANONICAL_DATE_FORMAT).to_string()),
            Field::Lat => self.lat.map(|v| v.to_string()),
            Field::Long => self.long.map(|v| v.to_string()),
            Field::VictimAge => self.victim_age.map(|v| v.to_string()),
            Field::PerpeAge => self.perpe_age.map(|v| v.to_string()),
            Field::TotalVictims => self.total_victims.map(|v| v.to_string()),
            other => self.text_ref(other).and_then(Clone::clone),
        }
    }

    pub fn is_null(&self, field: Field) -> bool {
        self.get(field).is_none()
    }

    pub fn null_count(&self) -> usize {
        Field::ALL.iter().filter(|&&f| self.is_null(f)).count()
    }

    /// Parses `value` into `field`, enforcing the range invariants.
    /// Dates are handled by the adapter's date rule, not here.
    fn set_parsed(&mut self, field: Field, column: &str, value: &str) -> Result<()> {
        match field {
            Field::Lat => self.lat = Some(parse_coordinate(column, value, 90.0)?),
            Field::Long => self.long = Some(parse_coordinate(column, value, 180.0)?),
            Field::VictimAge => self.victim_age = Some(parse_age(column, value)?),
            Field::PerpeAge => self.perpe_age = Some(parse_age(column, value)?),
            Field::TotalVictims => self.total_victims = Some(parse_count(column, value)?),
            Field::Date => {
                let d = NaiveDate::parse_from_str(value, CANONICAL_DATE_FORMAT)
                    .map_err(|e| Error::malformed(column, value, e.to_string()))?;
                self.date = Some(d);
            }
            text => {
                if let Some(slot) = self.text_slot(text) {
                    *slot = Some(value.to_string());
                }
            }
        }
        Ok(())
    }
}

fn parse_f64(column: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::malformed(column, value, "not a number"))?;
    if !v.is_finite() {
        return Err(Error::malformed(column, value, "not finite"));
    }
    Ok(v)
}

fn parse_coordinate(column: &str, value: &str, bound: f64) -> Result<f64> {
    let v = parse_f64(column, value)?;
    if !(-bound..=bound).contains(&v) {
        return Err(Error::malformed(column, value, format!("outside [-{bound}, {bound}]")));
    }
    Ok(v)
}

fn parse_whole(column: &str, value: &str) -> Result<u32> {
    if let Ok(v) = value.parse::<u32>() {
        return Ok(v);
    }
    let v = parse_f64(column, value)?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::malformed(column, value, "not a non-negative whole number"));
    }
    Ok(v as u32)
}

fn parse_age(column: &str, value: &str) -> Result<u32> {
    let v = parse_whole(column, value)?;
    if v > MAX_AGE {
        return Err(Error::malformed(column, value, format!("age above {MAX_AGE}")));
    }
    Ok(v)
}

fn parse_count(column: &str, value: &str) -> Result<u32> {
    parse_whole(column, value)
}

#[derive(Debug, Clone, Copy)]
enum DateRule {
    None,
    /// Single column; `with_time` selects datetime parsing.
    Column {
        column: &'static str,
        format: &'static str,
        with_time: bool,
    },
    /// Numeric year plus English month name; day is the 1st.
    YearMonthName {
        year: &'static str,
        month: &'static str,
    },
    /// Numeric year/month/day where 0 means unknown: unknown month makes
    /// the date null, unknown day falls back to the 1st.
    YearMonthDay {
        year: &'static str,
        month: &'static str,
        day: &'static str,
    },
}

/// Registered description of one source format.
#[derive(Debug)]
pub struct Adapter {
    pub kind: SourceKind,
    pub signature: &'static [&'static str],
    pub columns: &'static [&'static str],
    mappings: &'static [(&'static str, Field)],
    date: DateRule,
    null_tokens: &'static [&'static str],
}

const BOSTON: Adapter = Adapter {
    kind: SourceKind::BostonCrime,
    signature: &["OFFENSE_CODE_GROUP", "OCCURRED_ON_DATE", "REPORTING_AREA"],
    columns: &[
        "INCIDENT_NUMBER", "OFFENSE_CODE", "OFFENSE_CODE_GROUP", "OFFENSE_DESCRIPTION",
        "DISTRICT", "REPORTING_AREA", "SHOOTING", "OCCURRED_ON_DATE", "YEAR", "MONTH",
        "DAY_OF_WEEK", "HOUR", "UCR_PART", "STREET", "Lat", "Long", "Location",
    ],
    mappings: &[
        ("OFFENSE_CODE_GROUP", Field::CrimeType),
        ("OFFENSE_DESCRIPTION", Field::CrimeDetail),
        ("DISTRICT", Field::LocDescription),
        ("STREET", Field::Street),
        ("Lat", Field::Lat),
        ("Long", Field::Long),
    ],
    date: DateRule::Column { column: "OCCURRED_ON_DATE", format: "%Y-%m-%d %H:%M:%S", with_time: true },
    null_tokens: &[],
};

const CHICAGO: Adapter = Adapter {
    kind: SourceKind::ChicagoCrime,
    signature: &["Primary Type", "Location Description", "IUCR"],
    columns: &[
        "ID", "Case Number", "Date", "Block", "IUCR", "Primary Type", "Description",
        "Location Description", "Arrest", "Domestic", "Beat", "District", "Ward",
        "Community Area", "FBI Code", "X Coordinate", "Y Coordinate", "Year", "Updated On",
        "Latitude", "Longitude", "Location",
    ],
    mappings: &[
        ("Primary Type", Field::CrimeType),
        ("Description", Field::CrimeDetail),
        ("Location Description", Field::LocDescription),
        ("Block", Field::Street),
        ("Latitude", Field::Lat),
        ("Longitude", Field::Long),
    ],
    date: DateRule::Column { column: "Date", format: "%m/%d/%Y %I:%M:%S %p", with_time: true },
    null_tokens: &[],
};

const DENVER: Adapter = Adapter {
    kind: SourceKind::DenverCrime,
    signature: &["OFFENSE_CATEGORY_ID", "FIRST_OCCURRENCE_DATE", "GEO_LAT"],
    columns: &[
        "INCIDENT_ID", "OFFENSE_ID", "OFFENSE_CODE", "OFFENSE_CODE_EXTENSION", "OFFENSE_TYPE_ID",
        "OFFENSE_CATEGORY_ID", "FIRST_OCCURRENCE_DATE", "LAST_OCCURRENCE_DATE", "REPORTED_DATE",
        "INCIDENT_ADDRESS", "GEO_X", "GEO_Y", "GEO_LON", "GEO_LAT", "DISTRICT_ID",
        "PRECINCT_ID", "NEIGHBORHOOD_ID", "IS_CRIME", "IS_TRAFFIC",
    ],
    mappings: &[
        ("OFFENSE_CATEGORY_ID", Field::CrimeType),
        ("OFFENSE_TYPE_ID", Field::CrimeDetail),
        ("NEIGHBORHOOD_ID", Field::LocDescription),
        ("INCIDENT_ADDRESS", Field::Street),
        ("GEO_LAT", Field::Lat),
        ("GEO_LON", Field::Long),
    ],
    date: DateRule::Column { column: "FIRST_OCCURRENCE_DATE", format: "%m/%d/%Y %I:%M:%S %p", with_time: true },
    null_tokens: &[],
};

const PHILLY: Adapter = Adapter {
    kind: SourceKind::PhillyCrime,
    signature: &["Dc_Key", "Text_General_Code", "Dispatch_Date"],
    columns: &[
        "Dc_Dist", "Psa", "Dispatch_Date_Time", "Dispatch_Date", "Dispatch_Time", "Hour",
        "Dc_Key", "Location_Block", "UCR_General", "Text_General_Code", "Police_Districts",
        "Month", "Lon", "Lat",
    ],
    mappings: &[
        ("Text_General_Code", Field::CrimeType),
        ("Location_Block", Field::Street),
        ("Lat", Field::Lat),
        ("Lon", Field::Long),
    ],
    date: DateRule::Column { column: "Dispatch_Date", format: "%Y-%m-%d", with_time: false },
    null_tokens: &[],
};

const SAN_FRANCISCO: Adapter = Adapter {
    kind: SourceKind::SanFranciscoCrime,
    signature: &["IncidntNum", "Descript", "PdDistrict"],
    columns: &[
        "IncidntNum", "Category", "Descript", "DayOfWeek", "Date", "Time", "PdDistrict",
        "Resolution", "Address", "X", "Y", "Location", "PdId",
    ],
    mappings: &[
        ("Category", Field::CrimeType),
        ("Descript", Field::CrimeDetail),
        ("PdDistrict", Field::LocDescription),
        ("Address", Field::Street),
        ("Y", Field::Lat),
        ("X", Field::Long),
    ],
    date: DateRule::Column { column: "Date", format: "%m/%d/%Y", with_time: false },
    null_tokens: &[],
};

// The person shot is recorded on the perpetrator side of the schema.
const POLICE_SHOOTINGS: Adapter = Adapter {
    kind: SourceKind::FatalPoliceShootings,
    signature: &["manner_of_death", "signs_of_mental_illness", "body_camera"],
    columns: &[
        "id", "name", "date", "manner_of_death", "armed", "age", "gender", "race", "city",
        "state", "signs_of_mental_illness", "threat_level", "flee", "body_camera",
    ],
    mappings: &[
        ("manner_of_death", Field::CrimeDetail),
        ("armed", Field::Weapon),
        ("age", Field::PerpeAge),
        ("gender", Field::PerpeGender),
        ("race", Field::PerpeRace),
        ("city", Field::City),
        ("state", Field::State),
        ("signs_of_mental_illness", Field::PerpeMental),
        ("flee", Field::PerpeFlee),
    ],
    date: DateRule::Column { column: "date", format: "%d/%m/%y", with_time: false },
    null_tokens: &[],
};

const HOMICIDE: Adapter = Adapter {
    kind: SourceKind::HomicideReports,
    signature: &["Victim Age", "Perpetrator Race", "Crime Solved"],
    columns: &[
        "Record ID", "Agency Code", "Agency Name", "Agency Type", "City", "State", "Year",
        "Month", "Incident", "Crime Type", "Crime Solved", "Victim Sex", "Victim Age",
        "Victim Race", "Victim Ethnicity", "Perpetrator Sex", "Perpetrator Age",
        "Perpetrator Race", "Perpetrator Ethnicity", "Relationship", "Weapon", "Victim Count",
        "Perpetrator Count", "Record Source",
    ],
    mappings: &[
        ("Crime Type", Field::CrimeType),
        ("City", Field::City),
        ("State", Field::State),
        ("Victim Sex", Field::VictimGender),
        ("Victim Age", Field::VictimAge),
        ("Victim Race", Field::VictimRace),
        ("Perpetrator Sex", Field::PerpeGender),
        ("Perpetrator Age", Field::PerpeAge),
        ("Perpetrator Race", Field::PerpeRace),
        ("Relationship", Field::PerpeVicRelation),
        ("Weapon", Field::Weapon),
        ("Victim Count", Field::TotalVictims),
    ],
    date: DateRule::YearMonthName { year: "Year", month: "Month" },
    // 998 is the source's code for an unknown victim age
    null_tokens: &["Unknown", "998"],
};

const TERRORISM: Adapter = Adapter {
    kind: SourceKind::GlobalTerrorism,
    signature: &["eventid", "country_txt", "attacktype1_txt"],
    columns: &[
        "eventid", "iyear", "imonth", "iday", "country_txt", "region_txt", "provstate", "city",
        "latitude", "longitude", "attacktype1_txt", "targtype1_txt", "gname", "motive",
        "weaptype1_txt", "nkill", "nwound", "property", "propextent_txt", "summary",
    ],
    mappings: &[
        ("attacktype1_txt", Field::CrimeType),
        ("summary", Field::CrimeDetail),
        ("provstate", Field::State),
        ("city", Field::City),
        ("latitude", Field::Lat),
        ("longitude", Field::Long),
        ("targtype1_txt", Field::VictimDescription),
        ("weaptype1_txt", Field::Weapon),
        ("motive", Field::Motivation),
        ("propextent_txt", Field::PropertyDamage),
    ],
    date: DateRule::YearMonthDay { year: "iyear", month: "imonth", day: "iday" },
    null_tokens: &["Unknown"],
};

const MASS_SHOOTINGS: Adapter = Adapter {
    kind: SourceKind::MassShootings,
    signature: &["Mental Health Issues", "Total victims", "Fatalities"],
    columns: &[
        "S#", "Title", "Location", "Date", "Summary", "Fatalities", "Injured", "Total victims",
        "Mental Health Issues", "Race", "Gender", "Latitude", "Longitude",
    ],
    mappings: &[
        ("Summary", Field::CrimeDetail),
        ("Location", Field::LocDescription),
        ("Total victims", Field::TotalVictims),
        ("Mental Health Issues", Field::PerpeMental),
        ("Race", Field::PerpeRace),
        ("Gender", Field::PerpeGender),
        ("Latitude", Field::Lat),
        ("Longitude", Field::Long),
    ],
    date: DateRule::Column { column: "Date", format: "%m/%d/%Y", with_time: false },
    null_tokens: &["Unknown"],
};

const CANONICAL_COLUMNS: [&str; 26] = [
    "Date", "CrimeType", "CrimeDetail", "Lat", "Long", "LocDescription", "City", "Street",
    "State", "VictimAge", "VictimRace", "VictimGender", "VictimDescription", "TotalVictims",
    "PerpeMental", "PerpeFlee", "PerpeRace", "PerpeGender", "PerpeAge", "PerpeNationality",
    "PerpeVicRelation", "Weapon", "Motivation", "NewsCoverage", "PropertyDamage", "DataBase",
];

const CANONICAL: Adapter = Adapter {
    kind: SourceKind::Canonical,
    signature: &["CrimeType", "PerpeVicRelation", "DataBase"],
    columns: &CANONICAL_COLUMNS,
    mappings: &[
        ("Date", Field::Date),
        ("CrimeType", Field::CrimeType),
        ("CrimeDetail", Field::CrimeDetail),
        ("Lat", Field::Lat),
        ("Long", Field::Long),
        ("LocDescription", Field::LocDescription),
        ("City", Field::City),
        ("Street", Field::Street),
        ("State", Field::State),
        ("VictimAge", Field::VictimAge),
        ("VictimRace", Field::VictimRace),
        ("VictimGender", Field::VictimGender),
        ("VictimDescription", Field::VictimDescription),
        ("TotalVictims", Field::TotalVictims),
        ("PerpeMental", Field::PerpeMental),
        ("PerpeFlee", Field::PerpeFlee),
        ("PerpeRace", Field::PerpeRace),
        ("PerpeGender", Field::PerpeGender),
        ("PerpeAge", Field::PerpeAge),
        ("PerpeNationality", Field::PerpeNationality),
        ("PerpeVicRelation", Field::PerpeVicRelation),
        ("Weapon", Field::Weapon),
        ("Motivation", Field::Motivation),
        ("NewsCoverage", Field::NewsCoverage),
        ("PropertyDamage", Field::PropertyDamage),
    ],
    date: DateRule::None,
    null_tokens: &[],
};

static REGISTRY: [&Adapter; 10] = [
    &BOSTON,
    &CHICAGO,
    &DENVER,
    &PHILLY,
    &SAN_FRANCISCO,
    &POLICE_SHOOTINGS,
    &HOMICIDE,
    &TERRORISM,
    &MASS_SHOOTINGS,
    &CANONICAL,
];

pub fn adapter(kind: SourceKind) -> &'static Adapter {
    REGISTRY
        .iter()
        .copied()
        .find(|a| a.kind == kind)
        .expect("every source kind is registered")
}

pub fn detect_schema<S: AsRef<str>>(header: &[S]) -> Result<SourceKind> {
    let cols: Vec<&str> = header
        .iter()
        .map(|h| h.as_ref().trim_start_matches('\u{feff}').trim())
        .collect();
    if cols.is_empty() {
        return Err(Error::UnrecognizedSchema);
    }
    let matches: Vec<SourceKind> = REGISTRY
        .iter()
        .filter(|a| a.signature.iter().all(|s| cols.contains(s)))
        .map(|a| a.kind)
        .collect();
    match matches.as_slice() {
        [] => Err(Error::UnrecognizedSchema),
        [one] => Ok(*one),
        many => Err(Error::AmbiguousSchema(
            many.iter().map(|k| k.to_string()).collect(),
        )),
    }
}

/// One input row: column name → raw text.
pub type RawRecord = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub enum Adapted {
    Record(Box<CrimeRecord>),
    Dropped(String),
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

impl Adapter {
    fn value<'a>(&self, raw: &'a RawRecord, column: &str) -> Option<&'a str> {
        let v = raw.get(column)?.trim();
        if v.is_empty() || self.null_tokens.contains(&v) {
            None
        } else {
            Some(v)
        }
    }

    fn parse_date(&self, raw: &RawRecord) -> Result<Option<NaiveDate>> {
        match self.date {
            DateRule::None => Ok(None),
            DateRule::Column { column, format, with_time } => {
                let Some(v) = self.value(raw, column) else {
                    return Ok(None);
                };
                let parsed = if with_time {
                    NaiveDateTime::parse_from_str(v, format).map(|dt| dt.date())
                } else {
                    NaiveDate::parse_from_str(v, format)
                };
                parsed
                    .map(Some)
                    .map_err(|e| Error::malformed(column, v, format!("expected {format}: {e}")))
            }
            DateRule::YearMonthName { year, month } => {
                let (Some(y), Some(m)) = (self.value(raw, year), self.value(raw, month)) else {
                    return Ok(None);
                };
                let y: i32 = y.parse().map_err(|_| Error::malformed(year, y, "not a year"))?;
                let mi = MONTHS
                    .iter()
                    .position(|name| name.eq_ignore_ascii_case(m))
                    .ok_or_else(|| Error::malformed(month, m, "not a month name"))?;
                NaiveDate::from_ymd_opt(y, mi as u32 + 1, 1)
                    .map(Some)
                    .ok_or_else(|| Error::malformed(year, &y.to_string(), "date out of range"))
            }
            DateRule::YearMonthDay { year, month, day } => {
                let (Some(y), Some(m)) = (self.value(raw, year), self.value(raw, month)) else {
                    return Ok(None);
                };
                let y: i32 = y.parse().map_err(|_| Error::malformed(year, y, "not a year"))?;
                let m: u32 = m.parse().map_err(|_| Error::malformed(month, m, "not a month"))?;
                if m == 0 {
                    return Ok(None);
                }
                let d = match self.value(raw, day) {
                    Some(d) => d.parse::<u32>().map_err(|_| Error::malformed(day, d, "not a day"))?,
                    None => 0,
                };
                NaiveDate::from_ymd_opt(y, m, d.max(1))
                    .map(Some)
                    .ok_or_else(|| Error::malformed(day, &format!("{y}-{m}-{d}"), "no such date"))
            }
        }
    }

    /// Adapts one raw row. Missing attributes stay null.
    pub fn adapt(&self, raw: &RawRecord) -> Result<Adapted> {
        if self.kind == SourceKind::GlobalTerrorism {
            let country = raw.get("country_txt").map(|s| s.trim()).unwrap_or("");
            if country != "United States" {
                return Ok(Adapted::Dropped(format!("non-US event ({country})")));
            }
        }

        let database = match self.kind {
            SourceKind::Canonical => {
                let v = self
                    .value(raw, DATABASE_COLUMN)
                    .ok_or_else(|| Error::malformed(DATABASE_COLUMN, "", "source tag is required"))?;
                v.parse()?
            }
            kind => kind,
        };
        let mut rec = CrimeRecord::new(database);
        rec.date = self.parse_date(raw)?;
        for &(column, field) in self.mappings {
            if let Some(v) = self.value(raw, column) {
                rec.set_parsed(field, column, v)?;
            }
        }

        match self.kind {
            SourceKind::GlobalTerrorism => {
                let mut total = None;
                for col in ["nkill", "nwound"] {
                    if let Some(v) = self.value(raw, col) {
                        let n = parse_f64(col, v)?;
                        if n < 0.0 {
                            return Err(Error::malformed(col, v, "negative count"));
                        }
                        total = Some(total.unwrap_or(0.0) + n);
                    }
                }
                rec.total_victims = total.map(|t: f64| t.round() as u32);
            }
            SourceKind::MassShootings => {
                if let Some(loc) = self.value(raw, "Location") {
                    if let Some((city, state)) = loc.rsplit_once(',') {
                        let (city, state) = (city.trim(), state.trim());
                        if !city.is_empty() && !state.is_empty() {
                            rec.city = Some(city.to_string());
                            rec.state = Some(state.to_string());
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(Adapted::Record(Box::new(rec)))
    }
}

pub fn adapt_record(raw: &RawRecord, source: SourceKind) -> Result<Adapted> {
    adapter(source).adapt(raw)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergedCrimeDataset {
    pub records: Vec<CrimeRecord>,
    pub provenance: BTreeMap<SourceKind, usize>,
}

impl MergedCrimeDataset {
    pub fn push(&mut self, record: CrimeRecord) {
        *self.provenance.entry(record.database).or_default() += 1;
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// A parsed input file, already recognized.
#[derive(Debug, Clone)]
pub struct SourceInput {
    pub kind: SourceKind,
    pub name: String,
    /// (1-based data row number, row)
    pub rows: Vec<(usize, RawRecord)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub source: SourceKind,
    pub input: String,
    pub row: usize,
    pub reason: String,
    pub raw: RawRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTally {
    pub input: String,
    pub kind: Option<SourceKind>,
    pub total: usize,
    pub retained: usize,
    pub dropped: usize,
    pub quarantined: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MergeOutcome {
    pub dataset: MergedCrimeDataset,
    pub quarantine: Vec<QuarantineEntry>,
    pub tallies: Vec<SourceTally>,
}

/// Adapts every input (in parallel) and concatenates in input order.
pub fn merge_sources(inputs: &[SourceInput]) -> MergeOutcome {
    let parts: Vec<(Vec<CrimeRecord>, Vec<QuarantineEntry>, SourceTally)> = inputs
        .par_iter()
        .map(|input| {
            let adapter = adapter(input.kind);
            let mut records = Vec::new();
            let mut quarantine = Vec::new();
            let mut tally = SourceTally {
                input: input.name.clone(),
                kind: Some(input.kind),
                total: input.rows.len(),
                ..Default::default()
            };
            for (row, raw) in &input.rows {
                match adapter.adapt(raw) {
                    Ok(Adapted::Record(r)) => {
                        tally.retained += 1;
                        records.push(*r);
                    }
                    Ok(Adapted::Dropped(_)) => tally.dropped += 1,
                    Err(e) => {
                        tally.quarantined += 1;
                        quarantine.push(QuarantineEntry {
                            source: input.kind,
                            input: input.name.clone(),
                            row: *row,
                            reason: e.to_string(),
                            raw: raw.clone(),
                        });
                    }
                }
            }
            (records, quarantine, tally)
        })
        .collect();

    let mut out = MergeOutcome::default();
    for (records, quarantine, tally) in parts {
        for r in records {
            out.dataset.push(r);
        }
        out.quarantine.extend(quarantine);
        out.tallies.push(tally);
    }
    out
}

pub fn source_distribution(d: &MergedCrimeDataset) -> Result<BTreeMap<SourceKind, f64>> {
    let total: usize = d.provenance.values().sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(d
        .provenance
        .iter()
        .map(|(&k, &n)| (k, n as f64 / total as f64))
        .collect())
}

// ---- file IO ----

/// Reads a CSV file and recognizes its schema from the header.
pub fn read_source(path: &Path) -> Result<SourceInput> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_string())
        .collect();
    let kind = detect_schema(&header)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let raw: RawRecord = header
            .iter()
            .zip(rec.iter())
            .map(|(h, v)| (h.clone(), v.to_string()))
            .collect();
        rows.push((i + 1, raw));
    }
    Ok(SourceInput {
        kind,
        name: path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
        rows,
    })
}

pub fn write_canonical<W: std::io::Write>(out: W, d: &MergedCrimeDataset) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(canonical_header())?;
    for rec in &d.records {
        let mut row: Vec<String> = Field::ALL
            .iter()
            .map(|&f| rec.get(f).unwrap_or_default())
            .collect();
        row.push(rec.database.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_canonical_file(path: &Path, d: &MergedCrimeDataset) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_canonical(std::io::BufWriter::new(f), d).map_err(|e| Error::csv(path, e))
}

/// Loads a canonical CSV written by [`write_canonical_file`].
pub fn read_canonical_file(path: &Path) -> Result<MergeOutcome> {
    let input = read_source(path)?;
    if input.kind != SourceKind::Canonical {
        return Err(Error::malformed("header", &input.kind.to_string(), "expected canonical crime CSV"));
    }
    Ok(merge_sources(&[input]))
}

pub fn write_quarantine_file(path: &Path, entries: &[QuarantineEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let io = |e| Error::csv(path, e);
    w.write_record(["source", "input", "row", "reason", "raw"]).map_err(io)?;
    for q in entries {
        let raw = serde_json::to_string(&q.raw).map_err(|e| Error::json("quarantine row", e))?;
        w.write_record([q.source.as_str(), &q.input, &q.row.to_string(), &q.reason, &raw])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceReport {
    pub inputs: Vec<SourceTally>,
    pub provenance: BTreeMap<SourceKind, usize>,
    pub total_records: usize,
}

impl MergeOutcome {
    pub fn provenance_report(&self) -> ProvenanceReport {
        ProvenanceReport {
            inputs: self.tallies.clone(),
            provenance: self.dataset.provenance.clone(),
            total_records: self.dataset.len(),
        }
    }
}
