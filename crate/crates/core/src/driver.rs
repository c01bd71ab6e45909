//! Staggered tensile-test driver.
//!
//! Each time increment advances the coupled problem in a fixed order:
//!
//! 1. build the lattice-dilatation strain increment per material point from
//!    the hydrogen rate of the *previous* transport step (first-order lagged
//!    splitting) and subtract it from the kinematic strain increment,
//! 2. solve mechanical equilibrium with hydrogen frozen,
//! 3. advance hydrogen transport on the deformed mesh with the converged
//!    mean-stress field and plastic strains,
//! 4. re-equilibrate trap occupancies and record the response.
//!
//! The time step is halved whenever the equilibrium solve fails outright and
//! regrown gently afterwards, which concentrates resolution around necking
//! and final failure. Sweeps run fully isolated scenarios in parallel.

use std::f64::consts::PI;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    interpolate_to_points, lumped_volumes, project_to_nodes, solve_equilibrium_increment,
    FemFields, PointInputs,
};
use crate::gurson::{GursonParams, PointState};
use crate::hydrogen::{hydrogen_strain_increment, TrapParams};
use crate::mesh::{self, build_graded_mesh, Mesh};
use crate::tensor::{ElasticConstants, SymTensor2};
use crate::transport::{advance_transport, TransportState};

/// Hard cap on accepted increments per scenario.
const MAX_INCREMENTS: usize = 200_000;
/// The time step may shrink this far below its initial value before the run
/// is abandoned.
const DT_SHRINK_LIMIT: f64 = 1.0 / 1024.0;

/// Which hydrogen population the material responds to (softening, nucleation,
/// dilatation). Trapped hydrogen dilates and embrittles the lattice just as
/// lattice hydrogen does in the default measure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HydrogenMeasure {
    /// Lattice concentration `C_L` only.
    Lattice,
    /// Total dissolved hydrogen `C_L + C_T`.
    #[default]
    LatticePlusTraps,
}

/// Complete description of one tensile simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Bar radius, m.
    pub radius: f64,
    /// Half gage length (the modeled quarter's height), m.
    pub half_gage: f64,
    pub nr: usize,
    pub nz: usize,
    /// Axial coarse-to-fine grading ratio (1 = uniform spacing); the finest
    /// cells sit at the mid-plane where the neck localizes.
    pub grading: f64,
    /// Mid-plane radius reduction as a fraction of the radius.
    pub imperfection: f64,
    pub gurson: GursonParams,
    pub elastic: ElasticConstants,
    pub traps: TrapParams,
    /// Homogeneous total hydrogen pre-charge, mol/m³.
    pub c_total: f64,
    /// Applied engineering strain rate, 1/s.
    pub strain_rate: f64,
    /// Initial (and maximum) time step, s.
    pub dt_initial: f64,
    /// Stop once the engineering strain reaches this value.
    pub max_eng_strain: f64,
    pub hydrogen_measure: HydrogenMeasure,
    /// Record every k-th accepted increment (the final one is always kept).
    pub output_every: usize,
}

impl ScenarioConfig {
    /// The calibrated X65 round-bar test: R = 1.5875 mm, gage 25.4 mm,
    /// 0.5% mid-plane imperfection, 10⁻⁵/s strain rate.
    pub fn x65_bar(c_total: f64) -> Self {
        ScenarioConfig {
            radius: 1.5875e-3,
            half_gage: 1.27e-2,
            nr: 8,
            nz: 40,
            grading: mesh::AXIAL_GRADING,
            imperfection: 0.005,
            gurson: GursonParams::x65(),
            elastic: ElasticConstants::new(200.0e9, 0.3).unwrap(),
            traps: TrapParams::x65(),
            c_total,
            strain_rate: 1.0e-5,
            dt_initial: 100.0,
            max_eng_strain: 0.25,
            hydrogen_measure: HydrogenMeasure::default(),
            output_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strain_rate > 0.0) {
            return Err(Error::InvalidParam(format!(
                "strain rate must be positive, got {}",
                self.strain_rate
            )));
        }
        if !(self.dt_initial > 0.0) {
            return Err(Error::InvalidParam(format!(
                "initial time step must be positive, got {}",
                self.dt_initial
            )));
        }
        let inc_strain = self.dt_initial * self.strain_rate;
        if inc_strain > 1.0e-3 * (1.0 + 1e-12) {
            return Err(Error::InvalidParam(format!(
                "dt_initial x strain_rate = {inc_strain:.3e} exceeds the 1e-3 increment cap"
            )));
        }
        if !(self.max_eng_strain > 0.0 && self.max_eng_strain <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "max engineering strain must lie in (0, 1], got {}",
                self.max_eng_strain
            )));
        }
        if !(self.c_total >= 0.0) || !self.c_total.is_finite() {
            return Err(Error::InvalidParam(format!(
                "total hydrogen must be non-negative, got {}",
                self.c_total
            )));
        }
        if !(self.imperfection >= 0.0 && self.imperfection < 0.5) {
            return Err(Error::InvalidParam(format!(
                "imperfection fraction must lie in [0, 0.5), got {}",
                self.imperfection
            )));
        }
        if !(self.grading >= 1.0) || !self.grading.is_finite() {
            return Err(Error::InvalidParam(format!(
                "axial grading ratio must be >= 1, got {}",
                self.grading
            )));
        }
        if self.output_every == 0 {
            return Err(Error::InvalidParam("output cadence must be at least 1".into()));
        }
        for (name, v) in [("K", self.elastic.k), ("G", self.elastic.g)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("elastic {name} must be positive, got {v}")));
            }
        }
        self.gurson.validate()?;
        self.traps.validate()?;
        Ok(())
    }
}

/// One recorded output step.
#[derive(Clone, Copy, Debug)]
pub struct TensileRow {
    pub time: f64,
    pub eng_strain: f64,
    /// Engineering stress (reaction over original area), Pa.
    pub eng_stress: f64,
    /// Current outer radius at the mid-plane, m.
    pub neck_radius: f64,
    pub max_f: f64,
    pub max_eps_p_bar: f64,
    /// Lattice concentration at the neck center (axis ∩ mid-plane), mol/m³.
    pub c_l_center: f64,
    /// Total hydrogen in the modeled quarter, mol.
    pub total_h: f64,
}

/// Which failure rule ended the test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureRule {
    /// A contiguous band of failed material points spans the mid-plane
    /// ligament.
    LigamentFailed,
    /// Engineering stress fell below half the running peak.
    LoadDrop,
}

/// Full response of one tensile test.
#[derive(Clone, Debug)]
pub struct TensileRecord {
    pub rows: Vec<TensileRow>,
    /// Peak engineering stress, Pa.
    pub uts: f64,
    /// Engineering strain at failure, if the specimen failed.
    pub e_f: Option<f64>,
    pub failure: Option<FailureRule>,
    /// Largest spatial coefficient of variation of total hydrogen seen at any
    /// recorded time (volume-weighted).
    pub max_hydrogen_cov: f64,
}

/// Failure check after an accepted increment: rule (a) — every mid-plane
/// element carries at least one failed point, so the failed band spans the
/// ligament; rule (b) — the load has collapsed to half its running peak.
pub fn detect_failure(
    mesh: &Mesh,
    points: &[PointState],
    eng_stress: f64,
    running_uts: f64,
) -> Option<FailureRule> {
    let spanned = mesh.midplane_row_elems.iter().all(|&e| {
        (0..4).any(|k| points[4 * e + k].failed)
    });
    if spanned {
        return Some(FailureRule::LigamentFailed);
    }
    if eng_stress < 0.5 * running_uts {
        return Some(FailureRule::LoadDrop);
    }
    None
}

fn hydrogen_measure_nodal(
    state: &TransportState,
    measure: HydrogenMeasure,
    p: &TrapParams,
) -> Vec<f64> {
    match measure {
        HydrogenMeasure::Lattice => state.c_l.clone(),
        HydrogenMeasure::LatticePlusTraps => {
            (0..state.c_l.len()).map(|i| state.c_l[i] + state.c_t(i, p)).collect()
        }
    }
}

/// Volume-weighted coefficient of variation of nodal total hydrogen.
fn hydrogen_cov(mesh: &Mesh, coords: &[[f64; 2]], state: &TransportState, p: &TrapParams) -> f64 {
    let m = match lumped_volumes(mesh, coords) {
        Ok(m) => m,
        Err(_) => return 0.0,
    };
    let tot: Vec<f64> = (0..state.c_l.len()).map(|i| state.c_l[i] + state.c_t(i, p)).collect();
    let vsum: f64 = m.iter().sum();
    let mean = m.iter().zip(&tot).map(|(mi, ci)| mi * ci).sum::<f64>() / vsum;
    if mean <= 0.0 {
        return 0.0;
    }
    let var = m
        .iter()
        .zip(&tot)
        .map(|(mi, ci)| mi * (ci - mean) * (ci - mean))
        .sum::<f64>()
        / vsum;
    var.sqrt() / mean
}

/// Run one tensile test to failure or to the configured strain.
pub fn run_tensile(cfg: &ScenarioConfig) -> Result<TensileRecord> {
    cfg.validate()?;
    let mesh =
        build_graded_mesh(cfg.nr, cfg.nz, cfg.radius, cfg.half_gage, cfg.imperfection, cfg.grading)?;
    let mut fields = FemFields::new(&mesh, &cfg.gurson);
    let mut tstate = TransportState::uniform(&mesh, cfg.c_total, &cfg.traps)?;

    let n_gp = mesh.n_elems() * 4;
    let mut c_h_gp = interpolate_to_points(
        &mesh,
        &hydrogen_measure_nodal(&tstate, cfg.hydrogen_measure, &cfg.traps),
    );
    // Hydrogen rate per point from the previous transport step (mol/m³/s);
    // zero at start — the pre-charge belongs to the unstressed reference.
    let mut c_h_rate = vec![0.0f64; n_gp];

    let area = PI * cfg.radius * cfg.radius;
    let mut dt = cfg.dt_initial;
    let dt_min = cfg.dt_initial * DT_SHRINK_LIMIT;
    let mut time = 0.0f64;
    let mut end_disp = 0.0f64;
    let mut uts = 0.0f64;
    let mut max_cov = hydrogen_cov(&mesh, &fields.coords, &tstate, &cfg.traps);
    let mut rows: Vec<TensileRow> = Vec::new();

    for inc in 1..=MAX_INCREMENTS {
        // (1) + (2): mechanics at frozen hydrogen, retrying on a finer time
        // step when the equilibrium search fails outright.
        let rep = loop {
            let d_end = cfg.strain_rate * dt * cfg.half_gage;
            let d_eps_h: Vec<SymTensor2> = (0..n_gp)
                .map(|k| hydrogen_strain_increment(c_h_rate[k] * dt, c_h_gp[k], &cfg.traps))
                .collect();
            let inputs = PointInputs { c_h: &c_h_gp, d_eps_h: &d_eps_h };
            match solve_equilibrium_increment(&mesh, &mut fields, d_end, &inputs, &cfg.gurson, &cfg.elastic)
            {
                Ok(rep) => break rep,
                Err(e) => {
                    dt *= 0.5;
                    if dt < dt_min {
                        return Err(Error::Equilibrium(format!(
                            "increment {inc} (t = {time:.6e} s, strain = {:.6e}) failed at the \
                             minimum time step: {e}",
                            end_disp / cfg.half_gage
                        )));
                    }
                }
            }
        };
        let d_end = cfg.strain_rate * dt * cfg.half_gage;
        time += dt;
        end_disp += d_end;

        // (3): transport with the converged mean stress and plastic strain.
        let sigma_h_gp: Vec<f64> = fields.points.iter().map(|p| p.sigma.trace() / 3.0).collect();
        let sigma_h = project_to_nodes(&mesh, &fields.coords, &sigma_h_gp)?;
        let epb_gp: Vec<f64> = fields.points.iter().map(|p| p.eps_p_bar).collect();
        let epb = project_to_nodes(&mesh, &fields.coords, &epb_gp)?;
        advance_transport(&mesh, &fields.coords, &mut tstate, &epb, &sigma_h, dt, &cfg.traps)?;

        // (4): re-equilibrated hydrogen measure and its lagged rate.
        let measure = hydrogen_measure_nodal(&tstate, cfg.hydrogen_measure, &cfg.traps);
        let new_c_h_gp = interpolate_to_points(&mesh, &measure);
        for k in 0..n_gp {
            c_h_rate[k] = (new_c_h_gp[k] - c_h_gp[k]) / dt;
        }
        c_h_gp = new_c_h_gp;

        let eng_strain = end_disp / cfg.half_gage;
        let eng_stress = rep.reaction / area;
        uts = uts.max(eng_stress);
        max_cov = max_cov.max(hydrogen_cov(&mesh, &fields.coords, &tstate, &cfg.traps));

        let row = TensileRow {
            time,
            eng_strain,
            eng_stress,
            neck_radius: fields.coords[*mesh.midplane_nodes.last().unwrap()][0],
            max_f: fields.points.iter().map(|p| p.f).fold(0.0, f64::max),
            max_eps_p_bar: fields.points.iter().map(|p| p.eps_p_bar).fold(0.0, f64::max),
            c_l_center: tstate.c_l[mesh.midplane_nodes[0]],
            total_h: tstate.total_hydrogen(&mesh, &fields.coords, &cfg.traps)?,
        };

        let failure = detect_failure(&mesh, &fields.points, eng_stress, uts);
        let done = failure.is_some() || eng_strain >= cfg.max_eng_strain * (1.0 - 1e-12);
        if inc % cfg.output_every == 0 || done {
            rows.push(row);
        }
        if done {
            return Ok(TensileRecord {
                rows,
                uts,
                e_f: failure.map(|_| eng_strain),
                failure,
                max_hydrogen_cov: max_cov,
            });
        }
        dt = (dt * 1.5).min(cfg.dt_initial);
    }
    Err(Error::Equilibrium(format!(
        "no termination within {MAX_INCREMENTS} increments (strain = {:.4e})",
        end_disp / cfg.half_gage
    )))
}

/// Swept parameter of a sensitivity study. Sweeping one hydrogen mechanism
/// disables the other so the studied effect is isolated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Relative softening level `C_rel = C_total/C_c`, applied by choosing
    /// `C_c` at fixed charge; hydrogen-assisted nucleation is disabled.
    CRel,
    /// Nucleation coefficient B (m³/mol); hydrogen softening is disabled.
    BNucleation,
    /// Total pre-charge (mol/m³) with both mechanisms active.
    CTotal,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::CRel => "crel",
            SweepAxis::BNucleation => "b",
            SweepAxis::CTotal => "ctotal",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "").as_str() {
            "crel" => Ok(SweepAxis::CRel),
            "b" => Ok(SweepAxis::BNucleation),
            "ctotal" => Ok(SweepAxis::CTotal),
            other => Err(Error::InvalidParam(format!(
                "unknown sweep axis `{other}` (expected one of: crel, b, ctotal)"
            ))),
        }
    }
}

fn scenario_for(base: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::CRel => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParam(format!(
                    "C_rel must lie in [0, 1], got {value}"
                )));
            }
            cfg.gurson.b_h = 0.0;
            cfg.gurson.c_c = if value == 0.0 {
                f64::INFINITY
            } else {
                if !(base.c_total > 0.0) {
                    return Err(Error::InvalidParam(
                        "a C_rel sweep needs a hydrogen charge in the base scenario".into(),
                    ));
                }
                base.c_total / value
            };
        }
        SweepAxis::BNucleation => {
            if !(value >= 0.0) {
                return Err(Error::InvalidParam(format!("B must be non-negative, got {value}")));
            }
            cfg.gurson.c_c = f64::INFINITY;
            cfg.gurson.b_h = value;
        }
        SweepAxis::CTotal => {
            if !(value >= 0.0) {
                return Err(Error::InvalidParam(format!(
                    "total hydrogen must be non-negative, got {value}"
                )));
            }
            cfg.c_total = value;
        }
    }
    Ok(cfg)
}

/// Run one scenario per value, in parallel, with identical mesh and stepping.
pub fn sweep(base: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<TensileRecord>> {
    let scenarios: Vec<ScenarioConfig> =
        values.iter().map(|&v| scenario_for(base, axis, v)).collect::<Result<_>>()?;
    scenarios.par_iter().map(run_tensile).collect()
}
