//! Sensitivity ledger: measured slopes and curvatures of the mean and
//! differential ellipse angle, contrast and bias with respect to the
//! monitored experimental parameters, together with their typical RMS
//! fluctuations over one ellipse acquisition and over one day.
//!
//! The ledger ships as a versioned CSV (`data/sensitivity_ledger.csv`,
//! embedded at compile time) with all values normalized to rad (or absolute
//! fraction) per tabulated unit; the `note` column keeps the original
//! tabulated strings for audit. Upper-limit entries are marked `bound = 1`
//! and never treated as measured slopes.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_CSV: &str = include_str!("../data/sensitivity_ledger.csv");

/// Observable a sensitivity row acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Average ellipse angle of the two mass configurations.
    MeanPhase,
    /// Difference of the ellipse angles between mass configurations.
    DiffPhase,
    /// Fringe amplitude.
    Contrast,
    /// Fringe center.
    Bias,
}

/// Order of the sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Linear,
    Quadratic,
}

/// One sensitivity entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerRow {
    pub parameter: String,
    pub target: Target,
    pub kind: Kind,
    /// 1 when the value is an upper limit rather than a measured slope.
    #[serde(deserialize_with = "bool_from_int", serialize_with = "int_from_bool")]
    pub bound: bool,
    /// rad (phase targets) or absolute fraction (contrast/bias) per unit^k.
    pub value: f64,
    /// Parameter unit the value and RMS columns refer to (percent, mA, mrad).
    pub unit: String,
    /// Typical RMS over one ellipse acquisition, in `unit`.
    pub rms_te: f64,
    /// Typical RMS over one day, in `unit`.
    pub rms_day: f64,
    /// Original tabulated string.
    #[serde(default)]
    pub note: String,
}

fn bool_from_int<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let v = u8::deserialize(d)?;
    Ok(v != 0)
}

fn int_from_bool<S: serde::Serializer>(b: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*b))
}

/// The full sensitivity table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityLedger {
    rows: Vec<LedgerRow>,
}

impl SensitivityLedger {
    /// The table bundled with the crate.
    pub fn bundled() -> Self {
        Self::from_csv_reader(BUNDLED_CSV.as_bytes()).expect("bundled ledger parses")
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let rows = csv_reader
            .deserialize::<LedgerRow>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(Error::Config("sensitivity ledger has no rows".into()));
        }
        Ok(Self { rows })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn parameters(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.parameter.as_str()).collect()
    }

    pub fn contains(&self, parameter: &str) -> bool {
        self.rows.iter().any(|r| r.parameter == parameter)
    }

    pub fn rows_for<'a>(&'a self, parameter: &'a str) -> impl Iterator<Item = &'a LedgerRow> {
        self.rows.iter().filter(move |r| r.parameter == parameter)
    }

    pub fn find(&self, parameter: &str, target: Target) -> Option<&LedgerRow> {
        self.rows
            .iter()
            .find(|r| r.parameter == parameter && r.target == target)
    }

    /// RMS of `parameter` at the given timescale, in the row's unit.
    pub fn rms(&self, parameter: &str, timescale: Timescale) -> Result<f64> {
        self.rows_for(parameter)
            .next()
            .map(|r| match timescale {
                Timescale::Te => r.rms_te,
                Timescale::Day => r.rms_day,
            })
            .ok_or_else(|| Error::UnknownParameter(parameter.to_string()))
    }
}

/// Timescale a budget or RMS lookup refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Timescale {
    /// One ellipse acquisition (~0.5 hr).
    Te,
    /// One day.
    Day,
}

impl std::fmt::Display for Timescale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Timescale::Te => write!(f, "te"),
            Timescale::Day => write!(f, "day"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_ledger_parses() {
        let ledger = SensitivityLedger::bundled();
        assert_eq!(ledger.parameters().len(), 11);
        assert!(ledger.contains("raman_mirror_tilt_ew"));
        assert!(ledger.contains("mot_power_ratio"));
    }

    #[test]
    fn tilt_row_values() {
        let ledger = SensitivityLedger::bundled();
        let row = ledger
            .find("raman_mirror_tilt_ew", Target::MeanPhase)
            .unwrap();
        assert_eq!(row.kind, Kind::Linear);
        assert!(!row.bound);
        assert_eq!(row.value, 3.7e-2); // 37 mrad per mrad of tilt
        assert_eq!(row.rms_day, 0.01); // 10 urad in mrad
    }

    #[test]
    fn bound_rows_marked() {
        let ledger = SensitivityLedger::bundled();
        let row = ledger.find("mot_total_power", Target::MeanPhase).unwrap();
        assert!(row.bound);
        // Static solenoid has phase data only.
        assert!(ledger
            .find("bias_solenoid_static", Target::DiffPhase)
            .is_none());
        assert_eq!(ledger.rows_for("bias_solenoid_static").count(), 1);
    }

    #[test]
    fn quadratic_rows_present() {
        let ledger = SensitivityLedger::bundled();
        for (param, target) in [
            ("raman_intensity_ratio", Target::MeanPhase),
            ("mot_power_ratio", Target::DiffPhase),
            ("mot_vertical_coil", Target::MeanPhase),
            ("bias_solenoid_static", Target::MeanPhase),
        ] {
            let row = ledger.find(param, target).unwrap();
            assert_eq!(row.kind, Kind::Quadratic, "{param}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let ledger = SensitivityLedger::bundled();
        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        let back = SensitivityLedger::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back.rows().len(), ledger.rows().len());
        for (a, b) in ledger.rows().iter().zip(back.rows()) {
            assert_eq!(a.parameter, b.parameter);
            assert_eq!(a.value, b.value);
            assert_eq!(a.bound, b.bound);
        }
    }

    #[test]
    fn unknown_parameter_rms_errors() {
        let ledger = SensitivityLedger::bundled();
        assert!(matches!(
            ledger.rms("nonexistent", Timescale::Day),
            Err(Error::UnknownParameter(_))
        ));
    }
}
