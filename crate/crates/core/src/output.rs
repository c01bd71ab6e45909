//! Tensile-curve CSV output and the per-run manifest.
//!
//! Numbers are written with Rust's shortest round-trip float formatting, so
//! parsing a written file recovers every value bit-for-bit — which in
//! particular means 15-significant-digit fidelity. Line endings are LF and
//! the decimal separator is always `.`, independent of locale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{SecondsFormat, Utc};

use crate::config::{parse_config, serialize_config};
use crate::driver::{ScenarioConfig, TensileRecord, TensileRow};
use crate::error::{Error, Result};

/// Column layout of a curve file. Stress is reported in MPa (stored in Pa);
/// everything else is SI.
pub const CURVE_HEADER: &str =
    "time_s,eng_strain,eng_stress_MPa,neck_radius_m,max_f,max_epbar,CL_center_molm3,total_H_mol";

/// Render a record as CSV text.
pub fn curve_csv_string(record: &TensileRecord) -> String {
    let mut s = String::with_capacity(64 * (record.rows.len() + 1));
    s.push_str(CURVE_HEADER);
    s.push('\n');
    for row in &record.rows {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            row.time,
            row.eng_strain,
            row.eng_stress / 1e6,
            row.neck_radius,
            row.max_f,
            row.max_eps_p_bar,
            row.c_l_center,
            row.total_h,
        );
    }
    s
}

/// Write a non-empty record to `path`.
pub fn write_curve_csv(record: &TensileRecord, path: &Path) -> Result<()> {
    if record.rows.is_empty() {
        return Err(Error::InvalidParam("refusing to write an empty curve".into()));
    }
    fs::write(path, curve_csv_string(record))?;
    Ok(())
}

/// Parse curve CSV text back into rows (the inverse of [`curve_csv_string`]).
pub fn parse_curve_csv(text: &str) -> Result<Vec<TensileRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CURVE_HEADER => {}
        other => {
            return Err(Error::ConfigGeneral(format!(
                "not a curve file: header is {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::ConfigGeneral(format!("curve row {}: {e}", i + 2)))?;
        if fields.len() != 8 {
            return Err(Error::ConfigGeneral(format!(
                "curve row {}: expected 8 columns, got {}",
                i + 2,
                fields.len()
            )));
        }
        rows.push(TensileRow {
            time: fields[0],
            eng_strain: fields[1],
            eng_stress: fields[2] * 1e6,
            neck_radius: fields[3],
            max_f: fields[4],
            max_eps_p_bar: fields[5],
            c_l_center: fields[6],
            total_h: fields[7],
        });
    }
    Ok(rows)
}

/// What a run produced: tool version, wall-clock timestamp, the preset (or
/// `custom`), every emitted CSV, and the fully resolved configuration. The
/// embedded config re-parses to a scenario equal to the one that ran.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub version: String,
    /// RFC 3339 UTC wall-clock time the run finished.
    pub timestamp: String,
    pub preset: String,
    pub outputs: Vec<String>,
    pub config: ScenarioConfig,
}

impl RunManifest {
    pub fn new(preset: &str, outputs: Vec<String>, config: ScenarioConfig) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            preset: preset.to_string(),
            outputs,
            config,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "timestamp = {}", self.timestamp);
        let _ = writeln!(s, "preset = {}", self.preset);
        for out in &self.outputs {
            let _ = writeln!(s, "output = {out}");
        }
        s.push('\n');
        s.push_str(&serialize_config(&self.config));
        s
    }

    /// Parse a manifest written by [`RunManifest::to_text`]. The header ends
    /// at the first section bracket; the rest is the config snapshot.
    pub fn from_text(text: &str) -> Result<RunManifest> {
        let config_start = text
            .find("\n[")
            .ok_or_else(|| Error::ConfigGeneral("manifest has no config snapshot".into()))?
            + 1;
        let (head, config_text) = text.split_at(config_start);
        let mut version = None;
        let mut timestamp = None;
        let mut preset = None;
        let mut outputs = Vec::new();
        for line in head.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::ConfigGeneral(format!("bad manifest line: {line}")))?;
            let value = value.trim().to_string();
            match key.trim() {
                "version" => version = Some(value),
                "timestamp" => timestamp = Some(value),
                "preset" => preset = Some(value),
                "output" => outputs.push(value),
                other => {
                    return Err(Error::ConfigGeneral(format!(
                        "unknown manifest key: {other}"
                    )))
                }
            }
        }
        Ok(RunManifest {
            version: version
                .ok_or_else(|| Error::ConfigGeneral("manifest missing version".into()))?,
            timestamp: timestamp
                .ok_or_else(|| Error::ConfigGeneral("manifest missing timestamp".into()))?,
            preset: preset
                .ok_or_else(|| Error::ConfigGeneral("manifest missing preset".into()))?,
            outputs,
            config: parse_config(config_text)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> TensileRecord {
        let rows = (0..12)
            .map(|i| {
                let t = 100.0 * i as f64;
                TensileRow {
                    time: t,
                    eng_strain: 1e-5 * t,
                    eng_stress: 4.17e8 * (1e-5 * t).tanh() * 1e3,
                    neck_radius: 1.5875e-3 * (1.0 - 1e-6 * t),
                    max_f: 1e-4 + 1e-7 * t,
                    max_eps_p_bar: 1.3e-5 * t,
                    c_l_center: 12.689571651612 + 1e-4 * t,
                    total_h: 3.1878e-6,
                }
            })
            .collect();
        TensileRecord {
            rows,
            uts: 5.1e8,
            e_f: Some(0.17),
            failure: None,
            max_hydrogen_cov: 0.03,
        }
    }

    #[test]
    fn csv_round_trips_every_bit() {
        let record = sample_record();
        let text = curve_csv_string(&record);
        assert!(text.starts_with(CURVE_HEADER));
        assert!(!text.contains('\r'));
        let back = parse_curve_csv(&text).unwrap();
        assert_eq!(back.len(), record.rows.len());
        for (a, b) in back.iter().zip(&record.rows) {
            assert_eq!(a.time.to_bits(), b.time.to_bits());
            assert_eq!(a.eng_strain.to_bits(), b.eng_strain.to_bits());
            // Stress crosses a /1e6 and back; exact for these values would be
            // luck, but 15 significant digits must survive.
            assert!((a.eng_stress - b.eng_stress).abs() <= 1e-14 * b.eng_stress.abs());
            assert_eq!(a.neck_radius.to_bits(), b.neck_radius.to_bits());
            assert_eq!(a.max_f.to_bits(), b.max_f.to_bits());
            assert_eq!(a.max_eps_p_bar.to_bits(), b.max_eps_p_bar.to_bits());
            assert_eq!(a.c_l_center.to_bits(), b.c_l_center.to_bits());
            assert_eq!(a.total_h.to_bits(), b.total_h.to_bits());
        }
    }

    #[test]
    fn single_step_record_is_two_lines() {
        let mut record = sample_record();
        record.rows.truncate(1);
        let text = curve_csv_string(&record);
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn empty_record_is_refused() {
        let mut record = sample_record();
        record.rows.clear();
        let dir = std::env::temp_dir().join("hembrit-empty-csv");
        std::fs::create_dir_all(&dir).unwrap();
        assert!(write_curve_csv(&record, &dir.join("x.csv")).is_err());
    }

    #[test]
    fn manifest_round_trips_and_lists_outputs() {
        let cfg = ScenarioConfig::x65_bar(31.5);
        let manifest = RunManifest::new(
            "h1",
            vec!["h1.csv".to_string()],
            cfg.clone(),
        );
        let text = manifest.to_text();
        let back = RunManifest::from_text(&text).unwrap();
        assert_eq!(back, manifest);
        assert_eq!(back.config, cfg);
        assert_eq!(back.outputs, ["h1.csv"]);
        assert_eq!(back.version, env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn foreign_text_is_rejected() {
        assert!(parse_curve_csv("nonsense\n1,2,3\n").is_err());
        assert!(RunManifest::from_text("just text, no config").is_err());
        let missing_version = "preset = h1\n\n[run]\ndt = 50 s\n";
        assert!(RunManifest::from_text(missing_version).is_err());
    }
}
