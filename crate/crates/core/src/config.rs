//! Plain key-value scenario configuration with explicit unit suffixes.
//!
//! ```ini
//! # in-air tensile test
//! [geometry]
//! radius = 1.5875 mm
//! gage = 25.4 mm
//!
//! [gurson]
//! sigma0 = 420 MPa
//! c_c = inf mol/m3
//!
//! [run]
//! strain_rate = 1e-5 1/s
//! ```
//!
//! Every dimensional key must carry a unit from its dimension's table (so a
//! bare `sigma0 = 420` is rejected rather than silently misread), while
//! dimensionless keys must stay bare. Unknown sections, unknown keys,
//! duplicated keys, malformed numbers, and out-of-range values are all
//! reported with their line number. Omitted keys fall back to the calibrated
//! X65 defaults; an empty or missing `[hydrogen]` section therefore means an
//! uncharged, in-air test. `q3` defaults to `q1²` after `q1` is resolved.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::driver::{HydrogenMeasure, ScenarioConfig};
use crate::error::{Error, Result};
use crate::tensor::ElasticConstants;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Dim {
    Length,
    Pressure,
    Concentration,
    MolarVolume,
    MolarEnergy,
    Diffusivity,
    Temperature,
    Rate,
    Time,
    PerArea,
}

impl Dim {
    fn factor(self, unit: &str) -> Option<f64> {
        let table: &[(&str, f64)] = match self {
            Dim::Length => &[("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9)],
            Dim::Pressure => &[("Pa", 1.0), ("kPa", 1e3), ("MPa", 1e6), ("GPa", 1e9)],
            Dim::Concentration => &[("mol/m3", 1.0)],
            Dim::MolarVolume => &[("m3/mol", 1.0), ("cm3/mol", 1e-6)],
            Dim::MolarEnergy => &[("J/mol", 1.0), ("kJ/mol", 1e3)],
            Dim::Diffusivity => &[("m2/s", 1.0)],
            Dim::Temperature => &[("K", 1.0)],
            Dim::Rate => &[("1/s", 1.0)],
            Dim::Time => &[("s", 1.0), ("min", 60.0), ("h", 3600.0)],
            Dim::PerArea => &[("1/m2", 1.0)],
        };
        table.iter().find(|(u, _)| *u == unit).map(|(_, f)| *f)
    }

    fn expectation(self) -> &'static str {
        match self {
            Dim::Length => "a length unit (m, mm, um, nm)",
            Dim::Pressure => "a pressure unit (Pa, kPa, MPa, GPa)",
            Dim::Concentration => "a concentration unit (mol/m3)",
            Dim::MolarVolume => "a molar volume unit (m3/mol, cm3/mol)",
            Dim::MolarEnergy => "a molar energy unit (J/mol, kJ/mol)",
            Dim::Diffusivity => "a diffusivity unit (m2/s)",
            Dim::Temperature => "a temperature unit (K)",
            Dim::Rate => "a rate unit (1/s)",
            Dim::Time => "a time unit (s, min, h)",
            Dim::PerArea => "an areal density unit (1/m2)",
        }
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

/// A dimensional value: number + mandatory unit, converted to SI.
fn dimensional(line: usize, value: &str, dim: Dim, allow_inf: bool) -> Result<f64> {
    let mut parts = value.split_whitespace();
    let num = parts.next().ok_or_else(|| err(line, "missing value"))?;
    let v: f64 = num
        .parse()
        .map_err(|_| err(line, format!("`{num}` is not a number")))?;
    if v.is_nan() {
        return Err(err(line, "NaN is not a valid value"));
    }
    if v.is_infinite() && !allow_inf {
        return Err(err(line, "infinite value not allowed here"));
    }
    let unit = match parts.next() {
        Some(u) => u,
        None if v.is_infinite() => return Ok(v), // `c_c = inf` needs no unit
        None => {
            return Err(err(
                line,
                format!("missing unit: expected {}", dim.expectation()),
            ))
        }
    };
    if parts.next().is_some() {
        return Err(err(line, "trailing tokens after the unit"));
    }
    let factor = dim
        .factor(unit)
        .ok_or_else(|| err(line, format!("unit `{unit}` does not match: expected {}", dim.expectation())))?;
    Ok(v * factor)
}

/// A bare dimensionless value; units are rejected.
fn bare(line: usize, value: &str, allow_inf: bool) -> Result<f64> {
    let mut parts = value.split_whitespace();
    let num = parts.next().ok_or_else(|| err(line, "missing value"))?;
    if parts.next().is_some() {
        return Err(err(line, "this key is dimensionless; remove the unit"));
    }
    let v: f64 = num
        .parse()
        .map_err(|_| err(line, format!("`{num}` is not a number")))?;
    if v.is_nan() || (v.is_infinite() && !allow_inf) {
        return Err(err(line, format!("`{num}` is out of range")));
    }
    Ok(v)
}

fn count(line: usize, value: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| err(line, format!("`{}` is not a positive integer", value.trim())))
}

fn check(line: usize, ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(err(line, msg.to_string()))
    }
}

/// Parse a configuration into a fully resolved scenario. Starts from the
/// calibrated in-air defaults; every present key overrides one field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::x65_bar(0.0);
    let mut gage = 2.0 * cfg.half_gage;
    let mut elastic_e = cfg.elastic.e;
    let mut elastic_nu = cfg.elastic.nu;
    let mut q3: Option<f64> = None;
    let mut section: Option<String> = None;
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?
                .trim()
                .to_string();
            const SECTIONS: [&str; 7] =
                ["geometry", "mesh", "elastic", "gurson", "hydrogen", "traps", "run"];
            if !SECTIONS.contains(&name.as_str()) {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            section = Some(name);
            continue;
        }
        let sec = section
            .as_deref()
            .ok_or_else(|| err(line, "key outside of any [section]"))?;
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, "expected `key = value`"))?;
        let key = key.trim().to_string();
        let value = value.trim();
        if !seen.insert((sec.to_string(), key.clone())) {
            return Err(err(line, format!("duplicate key `{key}` in [{sec}]")));
        }

        match (sec, key.as_str()) {
            ("geometry", "radius") => {
                cfg.radius = dimensional(line, value, Dim::Length, false)?;
                check(line, cfg.radius > 0.0, "radius must be positive")?;
            }
            ("geometry", "gage") => {
                gage = dimensional(line, value, Dim::Length, false)?;
                check(line, gage > 0.0, "gage length must be positive")?;
            }
            ("mesh", "nr") => cfg.nr = count(line, value)?,
            ("mesh", "nz") => cfg.nz = count(line, value)?,
            ("mesh", "grading") => {
                cfg.grading = bare(line, value, false)?;
                check(line, cfg.grading >= 1.0, "axial grading ratio must be >= 1")?;
            }
            ("mesh", "imperfection") => {
                cfg.imperfection = bare(line, value, false)?;
                check(
                    line,
                    (0.0..0.5).contains(&cfg.imperfection),
                    "imperfection must lie in [0, 0.5)",
                )?;
            }
            ("elastic", "e") => {
                elastic_e = dimensional(line, value, Dim::Pressure, false)?;
                check(line, elastic_e > 0.0, "Young's modulus must be positive")?;
            }
            ("elastic", "nu") => {
                elastic_nu = bare(line, value, false)?;
                check(
                    line,
                    elastic_nu > -1.0 && elastic_nu < 0.5,
                    "Poisson's ratio must lie in (-1, 0.5)",
                )?;
            }
            ("gurson", "q1") => cfg.gurson.q1 = bare(line, value, false)?,
            ("gurson", "q2") => cfg.gurson.q2 = bare(line, value, false)?,
            ("gurson", "q3") => q3 = Some(bare(line, value, false)?),
            ("gurson", "f0") => cfg.gurson.f0 = bare(line, value, false)?,
            ("gurson", "fc") => cfg.gurson.fc = bare(line, value, false)?,
            ("gurson", "ff") => cfg.gurson.ff = bare(line, value, false)?,
            ("gurson", "sigma0") => {
                cfg.gurson.sigma0 = dimensional(line, value, Dim::Pressure, false)?
            }
            ("gurson", "eps0") => cfg.gurson.eps0 = bare(line, value, false)?,
            ("gurson", "n") => cfg.gurson.n_hard = bare(line, value, false)?,
            ("gurson", "c_c") => {
                cfg.gurson.c_c = dimensional(line, value, Dim::Concentration, true)?;
                check(line, cfg.gurson.c_c > 0.0, "critical concentration must be positive")?;
            }
            ("gurson", "f_n") => cfg.gurson.f_n = bare(line, value, false)?,
            ("gurson", "eps_n") => cfg.gurson.eps_n = bare(line, value, false)?,
            ("gurson", "s_n") => cfg.gurson.s_n = bare(line, value, false)?,
            ("gurson", "b") => {
                cfg.gurson.b_h = dimensional(line, value, Dim::MolarVolume, false)?;
                check(line, cfg.gurson.b_h >= 0.0, "B must be non-negative")?;
            }
            ("hydrogen", "c_total") => {
                cfg.c_total = dimensional(line, value, Dim::Concentration, false)?;
                check(line, cfg.c_total >= 0.0, "total hydrogen must be non-negative")?;
            }
            ("traps", "w_b") => cfg.traps.w_b = dimensional(line, value, Dim::MolarEnergy, false)?,
            ("traps", "alpha") => cfg.traps.alpha = bare(line, value, false)?,
            ("traps", "beta") => cfg.traps.beta = bare(line, value, false)?,
            ("traps", "v_m") => cfg.traps.v_m = dimensional(line, value, Dim::MolarVolume, false)?,
            ("traps", "v_h") => cfg.traps.v_h = dimensional(line, value, Dim::MolarVolume, false)?,
            ("traps", "d") => {
                cfg.traps.diffusivity = dimensional(line, value, Dim::Diffusivity, false)?
            }
            ("traps", "t") => {
                cfg.traps.temperature = dimensional(line, value, Dim::Temperature, false)?
            }
            ("traps", "lattice_spacing") => {
                cfg.traps.lattice_spacing = dimensional(line, value, Dim::Length, false)?
            }
            ("traps", "rho0") => cfg.traps.rho0 = dimensional(line, value, Dim::PerArea, false)?,
            ("traps", "gamma") => cfg.traps.gamma = dimensional(line, value, Dim::PerArea, false)?,
            ("traps", "eps_p_sat") => cfg.traps.eps_p_sat = bare(line, value, false)?,
            ("run", "strain_rate") => {
                cfg.strain_rate = dimensional(line, value, Dim::Rate, false)?
            }
            ("run", "dt") => cfg.dt_initial = dimensional(line, value, Dim::Time, false)?,
            ("run", "max_strain") => cfg.max_eng_strain = bare(line, value, false)?,
            ("run", "hydrogen_measure") => {
                cfg.hydrogen_measure = match value {
                    "lattice" => HydrogenMeasure::Lattice,
                    "lattice_plus_traps" => HydrogenMeasure::LatticePlusTraps,
                    other => {
                        return Err(err(
                            line,
                            format!(
                                "unknown hydrogen measure `{other}` \
                                 (expected lattice or lattice_plus_traps)"
                            ),
                        ))
                    }
                }
            }
            ("run", "output_every") => cfg.output_every = count(line, value)?,
            (sec, key) => return Err(err(line, format!("unknown key `{key}` in [{sec}]"))),
        }
    }

    cfg.half_gage = 0.5 * gage;
    cfg.elastic = ElasticConstants::new(elastic_e, elastic_nu)?;
    cfg.gurson.q3 = q3.unwrap_or(cfg.gurson.q1 * cfg.gurson.q1);
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:?}")
    }
}

/// Canonical serialization: every resolved field, SI units, round-trippable
/// through [`parse_config`] to an identical scenario.
pub fn serialize_config(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let f = fmt_f64;
    let _ = writeln!(s, "[geometry]");
    let _ = writeln!(s, "radius = {} m", f(cfg.radius));
    let _ = writeln!(s, "gage = {} m", f(2.0 * cfg.half_gage));
    let _ = writeln!(s, "\n[mesh]");
    let _ = writeln!(s, "nr = {}", cfg.nr);
    let _ = writeln!(s, "nz = {}", cfg.nz);
    let _ = writeln!(s, "grading = {}", f(cfg.grading));
    let _ = writeln!(s, "imperfection = {}", f(cfg.imperfection));
    let _ = writeln!(s, "\n[elastic]");
    let _ = writeln!(s, "e = {} Pa", f(cfg.elastic.e));
    let _ = writeln!(s, "nu = {}", f(cfg.elastic.nu));
    let _ = writeln!(s, "\n[gurson]");
    let _ = writeln!(s, "q1 = {}", f(cfg.gurson.q1));
    let _ = writeln!(s, "q2 = {}", f(cfg.gurson.q2));
    let _ = writeln!(s, "q3 = {}", f(cfg.gurson.q3));
    let _ = writeln!(s, "f0 = {}", f(cfg.gurson.f0));
    let _ = writeln!(s, "fc = {}", f(cfg.gurson.fc));
    let _ = writeln!(s, "ff = {}", f(cfg.gurson.ff));
    let _ = writeln!(s, "sigma0 = {} Pa", f(cfg.gurson.sigma0));
    let _ = writeln!(s, "eps0 = {}", f(cfg.gurson.eps0));
    let _ = writeln!(s, "n = {}", f(cfg.gurson.n_hard));
    if cfg.gurson.c_c.is_finite() {
        let _ = writeln!(s, "c_c = {} mol/m3", f(cfg.gurson.c_c));
    } else {
        let _ = writeln!(s, "c_c = inf");
    }
    let _ = writeln!(s, "f_n = {}", f(cfg.gurson.f_n));
    let _ = writeln!(s, "eps_n = {}", f(cfg.gurson.eps_n));
    let _ = writeln!(s, "s_n = {}", f(cfg.gurson.s_n));
    let _ = writeln!(s, "b = {} m3/mol", f(cfg.gurson.b_h));
    let _ = writeln!(s, "\n[hydrogen]");
    let _ = writeln!(s, "c_total = {} mol/m3", f(cfg.c_total));
    let _ = writeln!(s, "\n[traps]");
    let _ = writeln!(s, "w_b = {} J/mol", f(cfg.traps.w_b));
    let _ = writeln!(s, "alpha = {}", f(cfg.traps.alpha));
    let _ = writeln!(s, "beta = {}", f(cfg.traps.beta));
    let _ = writeln!(s, "v_m = {} m3/mol", f(cfg.traps.v_m));
    let _ = writeln!(s, "v_h = {} m3/mol", f(cfg.traps.v_h));
    let _ = writeln!(s, "d = {} m2/s", f(cfg.traps.diffusivity));
    let _ = writeln!(s, "t = {} K", f(cfg.traps.temperature));
    let _ = writeln!(s, "lattice_spacing = {} m", f(cfg.traps.lattice_spacing));
    let _ = writeln!(s, "rho0 = {} 1/m2", f(cfg.traps.rho0));
    let _ = writeln!(s, "gamma = {} 1/m2", f(cfg.traps.gamma));
    let _ = writeln!(s, "eps_p_sat = {}", f(cfg.traps.eps_p_sat));
    let _ = writeln!(s, "\n[run]");
    let _ = writeln!(s, "strain_rate = {} 1/s", f(cfg.strain_rate));
    let _ = writeln!(s, "dt = {} s", f(cfg.dt_initial));
    let _ = writeln!(s, "max_strain = {}", f(cfg.max_eng_strain));
    let measure = match cfg.hydrogen_measure {
        HydrogenMeasure::Lattice => "lattice",
        HydrogenMeasure::LatticePlusTraps => "lattice_plus_traps",
    };
    let _ = writeln!(s, "hydrogen_measure = {measure}");
    let _ = writeln!(s, "output_every = {}", cfg.output_every);
    s
}
