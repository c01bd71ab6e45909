//! Named batch scenarios: the three tensile tests, the two mechanism sweeps,
//! and the constitutive self-audit.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::driver::{run_tensile, sweep, ScenarioConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::gurson::proportional_path_deviations;
use crate::output::{write_curve_csv, RunManifest};

/// Largest relative axial-stress deviation `validate-point` tolerates between
/// the implicit update and the explicit oracle.
pub const VALIDATE_POINT_TOL: f64 = 5.0e-3;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Preset {
    /// Uncharged round-bar tensile test.
    InAir,
    /// 31.5 mol/m³ pre-charge.
    H1,
    /// 126 mol/m³ pre-charge.
    H2,
    /// Flow-softening sweep: relative concentration 0 … 1 at the H1 charge,
    /// hydrogen-assisted nucleation off.
    SweepCRel,
    /// Nucleation sweep: B = 1…4×10⁻³ m³/mol at the H1 charge, softening off.
    SweepB,
    /// Implicit-vs-oracle audit on random proportional strain paths.
    ValidatePoint,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::InAir,
        Preset::H1,
        Preset::H2,
        Preset::SweepCRel,
        Preset::SweepB,
        Preset::ValidatePoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::InAir => "in-air",
            Preset::H1 => "h1",
            Preset::H2 => "h2",
            Preset::SweepCRel => "sweep-crel",
            Preset::SweepB => "sweep-b",
            Preset::ValidatePoint => "validate-point",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::ConfigGeneral(format!("unknown preset `{s}`")))
    }
}

/// Run a preset, writing per-scenario CSVs plus a manifest into `out_dir`
/// (created if absent). Returns the names of all files written.
pub fn execute_preset(preset: Preset, out_dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir)?;
    match preset {
        Preset::InAir => run_single(preset, ScenarioConfig::x65_bar(0.0), out_dir),
        Preset::H1 => run_single(preset, ScenarioConfig::x65_bar(31.5), out_dir),
        Preset::H2 => run_single(preset, ScenarioConfig::x65_bar(126.0), out_dir),
        Preset::SweepCRel => run_sweep(
            preset,
            ScenarioConfig::x65_bar(31.5),
            SweepAxis::CRel,
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            out_dir,
        ),
        Preset::SweepB => run_sweep(
            preset,
            ScenarioConfig::x65_bar(31.5),
            SweepAxis::BNucleation,
            &[1.0e-3, 2.0e-3, 3.0e-3, 4.0e-3],
            out_dir,
        ),
        Preset::ValidatePoint => validate_point(out_dir),
    }
}

/// Run one scenario from a parsed config file (the `run` subcommand); `stem`
/// names the output files.
pub fn execute_config(cfg: ScenarioConfig, stem: &str, out_dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir)?;
    let record = run_tensile(&cfg)?;
    let csv = format!("{stem}.csv");
    write_curve_csv(&record, &out_dir.join(&csv))?;
    let manifest_name = format!("{stem}-manifest.txt");
    RunManifest::new("custom", vec![csv.clone()], cfg).write(&out_dir.join(&manifest_name))?;
    Ok(vec![csv, manifest_name])
}

/// Sweep one axis of a parsed base config over explicit values (the `sweep`
/// subcommand); `stem` prefixes the output files.
pub fn execute_sweep(
    base: ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    stem: &str,
    out_dir: &Path,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir)?;
    let records = sweep(&base, axis, values)?;
    let mut csvs = Vec::with_capacity(values.len());
    for (value, record) in values.iter().zip(&records) {
        let csv = format!("{stem}-{}-{value:?}.csv", axis.name());
        write_curve_csv(record, &out_dir.join(&csv))?;
        csvs.push(csv);
    }
    let manifest_name = format!("{stem}-manifest.txt");
    RunManifest::new("custom", csvs.clone(), base).write(&out_dir.join(&manifest_name))?;
    csvs.push(manifest_name);
    Ok(csvs)
}

fn run_single(preset: Preset, cfg: ScenarioConfig, out_dir: &Path) -> Result<Vec<String>> {
    let record = run_tensile(&cfg)?;
    let csv = format!("{preset}.csv");
    write_curve_csv(&record, &out_dir.join(&csv))?;
    let manifest_name = format!("{preset}-manifest.txt");
    RunManifest::new(preset.name(), vec![csv.clone()], cfg).write(&out_dir.join(&manifest_name))?;
    Ok(vec![csv, manifest_name])
}

fn run_sweep(
    preset: Preset,
    base: ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
) -> Result<Vec<String>> {
    let records = sweep(&base, axis, values)?;
    let mut csvs = Vec::with_capacity(values.len());
    for (value, record) in values.iter().zip(&records) {
        let csv = format!("{preset}-{value:?}.csv");
        write_curve_csv(record, &out_dir.join(&csv))?;
        csvs.push(csv);
    }
    let manifest_name = format!("{preset}-manifest.txt");
    RunManifest::new(preset.name(), csvs.clone(), base).write(&out_dir.join(&manifest_name))?;
    csvs.push(manifest_name);
    Ok(csvs)
}

/// 50 random proportional strain paths through the implicit update and the
/// explicit oracle; writes the per-path deviations and fails if any exceeds
/// [`VALIDATE_POINT_TOL`].
fn validate_point(out_dir: &Path) -> Result<Vec<String>> {
    let cfg = ScenarioConfig::x65_bar(0.0);
    let deviations = proportional_path_deviations(&cfg.gurson, &cfg.elastic, 50, 42)?;
    let mut text = String::from("path,axial_stress_rel_deviation\n");
    for (i, d) in deviations.iter().enumerate() {
        let _ = writeln!(text, "{i},{d:?}");
    }
    let csv = "validate-point.csv".to_string();
    std::fs::write(out_dir.join(&csv), text)?;
    let manifest_name = "validate-point-manifest.txt".to_string();
    RunManifest::new("validate-point", vec![csv.clone()], cfg)
        .write(&out_dir.join(&manifest_name))?;
    let worst = deviations.iter().cloned().fold(0.0f64, f64::max);
    if worst > VALIDATE_POINT_TOL {
        return Err(Error::Equilibrium(format!(
            "implicit/oracle axial-stress deviation {worst:.3e} exceeds {VALIDATE_POINT_TOL:.1e}"
        )));
    }
    Ok(vec![csv, manifest_name])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("inair".parse::<Preset>().is_err());
        assert!("".parse::<Preset>().is_err());
    }

    #[test]
    fn validate_point_writes_files_and_passes() {
        let dir = std::env::temp_dir().join("hembrit-validate-point");
        let files = execute_preset(Preset::ValidatePoint, &dir).unwrap();
        assert_eq!(files, ["validate-point.csv", "validate-point-manifest.txt"]);
        let body = std::fs::read_to_string(dir.join(&files[0])).unwrap();
        assert_eq!(body.lines().count(), 51); // header + 50 paths
        let manifest =
            RunManifest::from_text(&std::fs::read_to_string(dir.join(&files[1])).unwrap())
                .unwrap();
        assert_eq!(manifest.preset, "validate-point");
        assert_eq!(manifest.outputs, [files[0].clone()]);
    }
}
