//! Axisymmetric finite elements for the quarter-bar equilibrium problem.
//!
//! 4-node quads with 2×2 Gauss integration and mean-dilatation B-bar (the
//! plastic regime is nearly incompressible). The kinematics are updated
//! Lagrangian: strain increments come from the midpoint-configuration
//! gradient of the displacement increment, the stored stress is rotated with
//! the Hughes–Winget increment before the constitutive update, and internal
//! forces and stiffness are integrated over the end-of-increment
//! configuration (material tangent plus initial-stress geometric term).
//!
//! The global Newton loop uses the consistent material tangent, a residual
//! line search (halving, max 5), and automatic increment bisection (max 8
//! levels) when an attempt does not converge.

use rayon::prelude::*;

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::gurson::{stress_update, GursonParams, PointState};
use crate::mesh::Mesh;
use crate::tensor::{ElasticConstants, SymTensor2};

/// Integration points per element (2×2 Gauss).
pub const GAUSS_PER_ELEM: usize = 4;

const MAX_NEWTON: usize = 25;
const MAX_BISECT: usize = 8;
const MAX_HALVINGS: usize = 5;
/// Residual tolerance relative to the internal-force magnitude.
const FORCE_TOL: f64 = 1.0e-6;
/// Newton-correction tolerance relative to the gage length.
const DISP_TOL: f64 = 1.0e-8;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn gauss_abscissae() -> [(f64, f64); GAUSS_PER_ELEM] {
    let a = 1.0 / 3.0f64.sqrt();
    [(-a, -a), (a, -a), (a, a), (-a, a)]
}

fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

/// `[dN/dxi, dN/deta]` per node.
fn shape_derivs(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ]
}

#[derive(Clone, Copy, Default)]
pub(crate) struct GpGeom {
    pub(crate) n: [f64; 4],
    pub(crate) dndr: [f64; 4],
    pub(crate) dndz: [f64; 4],
    pub(crate) r: f64,
    /// Volume weight `2π r w det(J)`.
    pub(crate) vol: f64,
}

pub(crate) fn element_geometry(elem: usize, xy: &[[f64; 2]; 4]) -> Result<[GpGeom; GAUSS_PER_ELEM]> {
    let mut out = [GpGeom::default(); GAUSS_PER_ELEM];
    for (k, (xi, eta)) in gauss_abscissae().into_iter().enumerate() {
        let n = shape(xi, eta);
        let dn = shape_derivs(xi, eta);
        // J = d(r,z)/d(xi,eta)
        let mut j = [[0.0f64; 2]; 2];
        for i in 0..4 {
            j[0][0] += dn[i][0] * xy[i][0];
            j[0][1] += dn[i][1] * xy[i][0];
            j[1][0] += dn[i][0] * xy[i][1];
            j[1][1] += dn[i][1] * xy[i][1];
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det > 0.0) {
            return Err(Error::BadJacobian { elem, det });
        }
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        let mut g = GpGeom { n, ..GpGeom::default() };
        for i in 0..4 {
            g.dndr[i] = inv[0][0] * dn[i][0] + inv[1][0] * dn[i][1];
            g.dndz[i] = inv[0][1] * dn[i][0] + inv[1][1] * dn[i][1];
            g.r += n[i] * xy[i][0];
        }
        g.vol = TWO_PI * g.r * det;
        out[k] = g;
    }
    Ok(out)
}

/// Strain-displacement rows (rr, zz, tt, γ_rz) per node and component, with
/// the volumetric part replaced by its element mean (B-bar).
#[derive(Clone, Copy, Default)]
struct BBar {
    rows: [[[f64; 2]; 4]; 4],
}

fn bbar_at(geom: &[GpGeom; GAUSS_PER_ELEM]) -> [BBar; GAUSS_PER_ELEM] {
    let mut vtot = 0.0;
    let mut mean = [[0.0f64; 2]; 4];
    for g in geom {
        vtot += g.vol;
        for i in 0..4 {
            mean[i][0] += (g.dndr[i] + g.n[i] / g.r) * g.vol;
            mean[i][1] += g.dndz[i] * g.vol;
        }
    }
    for row in &mut mean {
        row[0] /= vtot;
        row[1] /= vtot;
    }
    let mut out = [BBar::default(); GAUSS_PER_ELEM];
    for (k, g) in geom.iter().enumerate() {
        for i in 0..4 {
            let bv = [g.dndr[i] + g.n[i] / g.r, g.dndz[i]];
            let cr = [(mean[i][0] - bv[0]) / 3.0, (mean[i][1] - bv[1]) / 3.0];
            out[k].rows[0][i] = [g.dndr[i] + cr[0], cr[1]];
            out[k].rows[1][i] = [cr[0], g.dndz[i] + cr[1]];
            out[k].rows[2][i] = [g.n[i] / g.r + cr[0], cr[1]];
            out[k].rows[3][i] = [g.dndz[i], g.dndr[i]];
        }
    }
    out
}

fn strain_of(b: &BBar, du: &[[f64; 2]; 4]) -> SymTensor2 {
    let mut e = [0.0f64; 4];
    for (row, er) in e.iter_mut().enumerate() {
        for i in 0..4 {
            *er += b.rows[row][i][0] * du[i][0] + b.rows[row][i][1] * du[i][1];
        }
    }
    SymTensor2 { rr: e[0], zz: e[1], tt: e[2], rz: 0.5 * e[3] }
}

/// Hughes–Winget incremental rotation (Cayley form, exactly orthogonal) for
/// the in-plane spin `w`; the hoop direction is unaffected.
fn rotate_stress(s: &SymTensor2, w: f64) -> SymTensor2 {
    if w == 0.0 {
        return *s;
    }
    let den = 1.0 + 0.25 * w * w;
    let (c, q) = ((1.0 - 0.25 * w * w) / den, w / den);
    // R = [[c, q], [-q, c]], sigma' = R sigma R^T on the (r, z) block.
    let (srr, szz, srz) = (s.rr, s.zz, s.rz);
    SymTensor2 {
        rr: c * c * srr + 2.0 * c * q * srz + q * q * szz,
        zz: q * q * srr - 2.0 * c * q * srz + c * c * szz,
        tt: s.tt,
        rz: c * c * srz - q * q * srz + c * q * (szz - srr),
    }
}

/// Per-integration-point hydrogen inputs for one mechanical increment: the
/// concentration entering the flow stress and nucleation law, and the lagged
/// hydrogen dilatation strain increment to subtract from the kinematics.
pub struct PointInputs<'a> {
    pub c_h: &'a [f64],
    pub d_eps_h: &'a [SymTensor2],
}

struct ElemEval {
    f: [f64; 8],
    k: [[f64; 8]; 8],
    states: [PointState; GAUSS_PER_ELEM],
}

#[allow(clippy::too_many_arguments)]
fn evaluate_element(
    elem: usize,
    xy0: &[[f64; 2]; 4],
    du: &[[f64; 2]; 4],
    states: &[PointState],
    c_h: &[f64],
    d_eps_h: &[SymTensor2],
    eps_scale: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<ElemEval> {
    let mut xy_mid = *xy0;
    let mut xy_new = *xy0;
    for i in 0..4 {
        for c in 0..2 {
            xy_mid[i][c] += 0.5 * du[i][c];
            xy_new[i][c] += du[i][c];
        }
    }
    let geom_mid = element_geometry(elem, &xy_mid)?;
    let geom_new = element_geometry(elem, &xy_new)?;
    let b_mid = bbar_at(&geom_mid);
    let b_new = bbar_at(&geom_new);

    let mut out = ElemEval {
        f: [0.0; 8],
        k: [[0.0; 8]; 8],
        states: [states[0]; GAUSS_PER_ELEM],
    };
    for k in 0..GAUSS_PER_ELEM {
        let d_eps_kin = strain_of(&b_mid[k], du);
        let gm = &geom_mid[k];
        let (mut durdz, mut duzdr) = (0.0, 0.0);
        for i in 0..4 {
            durdz += gm.dndz[i] * du[i][0];
            duzdr += gm.dndr[i] * du[i][1];
        }
        let spin = 0.5 * (durdz - duzdr);
        let mut s_old = states[k];
        s_old.sigma = rotate_stress(&states[k].sigma, spin);
        let d_eps = d_eps_kin - d_eps_h[k] * eps_scale;
        let (s_new, dd) = stress_update(&s_old, d_eps, c_h[k], gp, el)?;
        out.states[k] = s_new;

        let bn = &b_new[k];
        let gn = &geom_new[k];
        let sv = s_new.sigma.to_stress_vec();
        for i in 0..4 {
            for c in 0..2 {
                let mut v = 0.0;
                for row in 0..4 {
                    v += bn.rows[row][i][c] * sv[row];
                }
                out.f[2 * i + c] += v * gn.vol;
            }
        }
        // Material stiffness B^T D B.
        for j in 0..4 {
            for cj in 0..2 {
                let mut t = [0.0f64; 4];
                for (row, tr) in t.iter_mut().enumerate() {
                    for row2 in 0..4 {
                        *tr += dd.0[row][row2] * bn.rows[row2][j][cj];
                    }
                }
                for i in 0..4 {
                    for ci in 0..2 {
                        let mut v = 0.0;
                        for row in 0..4 {
                            v += bn.rows[row][i][ci] * t[row];
                        }
                        out.k[2 * i + ci][2 * j + cj] += v * gn.vol;
                    }
                }
            }
        }
        // Initial-stress (geometric) stiffness, including the hoop term.
        let s = &s_new.sigma;
        for i in 0..4 {
            for j in 0..4 {
                let a = gn.dndr[i] * (s.rr * gn.dndr[j] + s.rz * gn.dndz[j])
                    + gn.dndz[i] * (s.rz * gn.dndr[j] + s.zz * gn.dndz[j]);
                let hoop = (gn.n[i] / gn.r) * (gn.n[j] / gn.r) * s.tt;
                out.k[2 * i][2 * j] += (a + hoop) * gn.vol;
                out.k[2 * i + 1][2 * j + 1] += a * gn.vol;
            }
        }
    }
    Ok(out)
}

/// Result of one equilibrium assembly at a trial displacement increment.
pub struct Assembled {
    /// Internal nodal forces (2 dofs per node); the out-of-balance residual
    /// is `-f_int` in the absence of applied tractions.
    pub f_int: Vec<f64>,
    pub stiffness: BandMatrix,
    /// Trial end-of-increment states at every integration point.
    pub new_points: Vec<PointState>,
}

/// Assemble internal forces, consistent stiffness, and trial point states for
/// a displacement increment `du` from the configuration `coords` carrying
/// `points`. `eps_scale` scales the per-point hydrogen dilatation increments
/// (sub-increments apply a proportional share).
#[allow(clippy::too_many_arguments)]
pub fn assemble_equilibrium(
    mesh: &Mesh,
    coords: &[[f64; 2]],
    points: &[PointState],
    du: &[f64],
    inputs: &PointInputs,
    eps_scale: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<Assembled> {
    let ndof = 2 * mesh.n_nodes();
    let evals: Vec<Result<ElemEval>> = mesh
        .elems
        .par_iter()
        .enumerate()
        .map(|(e, nodes)| {
            let xy0 = [
                coords[nodes[0]],
                coords[nodes[1]],
                coords[nodes[2]],
                coords[nodes[3]],
            ];
            let due = [
                [du[2 * nodes[0]], du[2 * nodes[0] + 1]],
                [du[2 * nodes[1]], du[2 * nodes[1] + 1]],
                [du[2 * nodes[2]], du[2 * nodes[2] + 1]],
                [du[2 * nodes[3]], du[2 * nodes[3] + 1]],
            ];
            let lo = e * GAUSS_PER_ELEM;
            let hi = lo + GAUSS_PER_ELEM;
            evaluate_element(
                e,
                &xy0,
                &due,
                &points[lo..hi],
                &inputs.c_h[lo..hi],
                &inputs.d_eps_h[lo..hi],
                eps_scale,
                gp,
                el,
            )
        })
        .collect();

    let hb = mesh.mech_half_bandwidth();
    let mut f_int = vec![0.0; ndof];
    let mut stiffness = BandMatrix::new(ndof, hb, hb);
    let mut new_points = points.to_vec();
    // Sequential element-order reduction keeps the result bitwise independent
    // of the worker count.
    for (e, ev) in evals.into_iter().enumerate() {
        let ev = ev?;
        let nodes = mesh.elems[e];
        for (i, &ni) in nodes.iter().enumerate() {
            for ci in 0..2 {
                f_int[2 * ni + ci] += ev.f[2 * i + ci];
                for (j, &nj) in nodes.iter().enumerate() {
                    for cj in 0..2 {
                        stiffness.add(2 * ni + ci, 2 * nj + cj, ev.k[2 * i + ci][2 * j + cj]);
                    }
                }
            }
        }
        new_points[e * GAUSS_PER_ELEM..(e + 1) * GAUSS_PER_ELEM].copy_from_slice(&ev.states);
    }
    Ok(Assembled { f_int, stiffness, new_points })
}

/// Nodal displacement/coordinate fields plus the per-integration-point
/// material states, i.e. the committed mechanical state of the bar.
#[derive(Clone)]
pub struct FemFields {
    pub disp: Vec<[f64; 2]>,
    /// Current (deformed) nodal coordinates.
    pub coords: Vec<[f64; 2]>,
    pub points: Vec<PointState>,
}

impl FemFields {
    pub fn new(mesh: &Mesh, gp: &GursonParams) -> Self {
        FemFields {
            disp: vec![[0.0; 2]; mesh.n_nodes()],
            coords: mesh.coords.clone(),
            points: vec![PointState::initial(gp); mesh.n_elems() * GAUSS_PER_ELEM],
        }
    }
}

/// Diagnostics of one converged (possibly bisected) end-displacement
/// increment.
pub struct MechReport {
    pub newton_iterations: usize,
    pub bisections: usize,
    /// Residual norms of the last Newton attempt, one entry per iteration.
    pub residual_history: Vec<f64>,
    /// Total axial force transmitted through the loaded end (N).
    pub reaction: f64,
}

fn constraints(mesh: &Mesh, d_end: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for &n in &mesh.axis_nodes {
        out.push((2 * n, 0.0));
    }
    for &n in &mesh.midplane_nodes {
        out.push((2 * n + 1, 0.0));
    }
    for &n in &mesh.top_nodes {
        out.push((2 * n + 1, d_end));
    }
    out
}

struct NewtonAttempt {
    du: Vec<f64>,
    new_points: Vec<PointState>,
    f_int: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
}

#[allow(clippy::too_many_arguments)]
fn newton_attempt(
    mesh: &Mesh,
    fields: &FemFields,
    d_end: f64,
    inputs: &PointInputs,
    eps_scale: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<NewtonAttempt> {
    let ndof = 2 * mesh.n_nodes();
    let cons = constraints(mesh, d_end);
    // Linear axial ramp as the initial guess: smooth first trial strains
    // instead of piling the whole increment into the top element row.
    let z_top = fields.coords[mesh.top_nodes[0]][1];
    let mut du = vec![0.0; ndof];
    for (n, c) in fields.coords.iter().enumerate() {
        du[2 * n + 1] = d_end * c[1] / z_top;
    }
    for &(d, v) in &cons {
        du[d] = v;
    }
    let gage = 2.0 * mesh.half_gage;
    let force_floor = el.e * 1.0e-14 * mesh.radius * mesh.radius;

    let resid_norm = |f_int: &[f64]| -> f64 {
        let mut s = 0.0;
        let mut skip = vec![false; ndof];
        for &(d, _) in &cons {
            skip[d] = true;
        }
        for (d, v) in f_int.iter().enumerate() {
            if !skip[d] {
                s += v * v;
            }
        }
        s.sqrt()
    };

    let mut asm = assemble_equilibrium(mesh, &fields.coords, &fields.points, &du, inputs, eps_scale, gp, el)?;
    let mut history = Vec::new();
    let mut last_step = f64::INFINITY;
    for it in 0..MAX_NEWTON {
        let r_norm = resid_norm(&asm.f_int);
        history.push(r_norm);
        let f_ref = asm.f_int.iter().map(|v| v * v).sum::<f64>().sqrt().max(force_floor);
        if r_norm <= FORCE_TOL * f_ref && last_step <= DISP_TOL * gage {
            return Ok(NewtonAttempt {
                du,
                new_points: asm.new_points,
                f_int: asm.f_int,
                history,
                iterations: it,
            });
        }
        let mut kmat = asm.stiffness;
        let mut dmax = 0.0f64;
        for d in 0..ndof {
            dmax = dmax.max(kmat.get(d, d).abs());
        }
        for &(d, _) in &cons {
            kmat.apply_dirichlet(d, dmax.max(1.0));
        }
        kmat.factor()?;
        let mut delta = vec![0.0; ndof];
        for (i, v) in delta.iter_mut().enumerate() {
            *v = -asm.f_int[i];
        }
        for &(d, _) in &cons {
            delta[d] = 0.0;
        }
        kmat.solve(&mut delta);
        // Line search: halve until the residual norm does not grow.
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = du.clone();
            for (t, d) in trial.iter_mut().zip(delta.iter()) {
                *t += alpha * d;
            }
            for &(d, v) in &cons {
                trial[d] = v;
            }
            match assemble_equilibrium(mesh, &fields.coords, &fields.points, &trial, inputs, eps_scale, gp, el) {
                Ok(a2) => {
                    if resid_norm(&a2.f_int) <= r_norm * (1.0 + 1.0e-12) {
                        next = Some((trial, a2, alpha));
                        break;
                    }
                }
                Err(_) => {}
            }
            alpha *= 0.5;
        }
        let Some((ndu, nasm, aused)) = next else {
            return Err(Error::Equilibrium(format!(
                "line search found no residual decrease at iteration {it} (|r| = {r_norm:.3e})"
            )));
        };
        last_step = aused * delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        du = ndu;
        asm = nasm;
    }
    let worst = (0..ndof).max_by(|&a, &b| {
        asm.f_int[a].abs().partial_cmp(&asm.f_int[b].abs()).unwrap()
    });
    Err(Error::Equilibrium(format!(
        "no convergence in {MAX_NEWTON} iterations; worst dof {} (node {}), residual history {:?}",
        worst.unwrap_or(0),
        worst.unwrap_or(0) / 2,
        &history[history.len().saturating_sub(4)..]
    )))
}

fn commit(fields: &mut FemFields, att: &NewtonAttempt) {
    for (n, d) in fields.disp.iter_mut().enumerate() {
        d[0] += att.du[2 * n];
        d[1] += att.du[2 * n + 1];
    }
    for (n, c) in fields.coords.iter_mut().enumerate() {
        c[0] += att.du[2 * n];
        c[1] += att.du[2 * n + 1];
    }
    fields.points.copy_from_slice(&att.new_points);
}

#[allow(clippy::too_many_arguments)]
fn advance(
    mesh: &Mesh,
    fields: &mut FemFields,
    d_end: f64,
    inputs: &PointInputs,
    eps_scale: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
    depth: usize,
    rep: &mut MechReport,
) -> Result<()> {
    match newton_attempt(mesh, fields, d_end, inputs, eps_scale, gp, el) {
        Ok(att) => {
            commit(fields, &att);
            rep.newton_iterations += att.iterations;
            rep.residual_history = att.history;
            rep.reaction = mesh
                .top_nodes
                .iter()
                .map(|&n| att.f_int[2 * n + 1])
                .sum();
            Ok(())
        }
        Err(e) => {
            if depth >= MAX_BISECT {
                return Err(e);
            }
            rep.bisections += 1;
            advance(mesh, fields, 0.5 * d_end, inputs, 0.5 * eps_scale, gp, el, depth + 1, rep)?;
            advance(mesh, fields, 0.5 * d_end, inputs, 0.5 * eps_scale, gp, el, depth + 1, rep)
        }
    }
}

/// Advance the mechanical fields by one applied end-displacement increment,
/// with automatic bisection on non-convergence. `inputs` carries the frozen
/// hydrogen state for this increment (concentration per point plus the lagged
/// dilatation strain increments, which bisection scales proportionally).
pub fn solve_equilibrium_increment(
    mesh: &Mesh,
    fields: &mut FemFields,
    d_end: f64,
    inputs: &PointInputs,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<MechReport> {
    let mut rep = MechReport {
        newton_iterations: 0,
        bisections: 0,
        residual_history: Vec::new(),
        reaction: 0.0,
    };
    advance(mesh, fields, d_end, inputs, 1.0, gp, el, 0, &mut rep)?;
    Ok(rep)
}

/// Lumped (volume-weighted) projection of integration-point values to nodes.
pub fn project_to_nodes(mesh: &Mesh, coords: &[[f64; 2]], values: &[f64]) -> Result<Vec<f64>> {
    let mut num = vec![0.0; mesh.n_nodes()];
    let mut den = vec![0.0; mesh.n_nodes()];
    for (e, nodes) in mesh.elems.iter().enumerate() {
        let xy = [coords[nodes[0]], coords[nodes[1]], coords[nodes[2]], coords[nodes[3]]];
        let geom = element_geometry(e, &xy)?;
        for (k, g) in geom.iter().enumerate() {
            let v = values[e * GAUSS_PER_ELEM + k];
            for i in 0..4 {
                num[nodes[i]] += g.n[i] * g.vol * v;
                den[nodes[i]] += g.n[i] * g.vol;
            }
        }
    }
    Ok(num.iter().zip(den.iter()).map(|(a, b)| a / b).collect())
}

/// Lumped nodal volumes `m_i = ∫ N_i 2πr dA` on the given configuration.
pub fn lumped_volumes(mesh: &Mesh, coords: &[[f64; 2]]) -> Result<Vec<f64>> {
    let mut m = vec![0.0; mesh.n_nodes()];
    for (e, nodes) in mesh.elems.iter().enumerate() {
        let xy = [coords[nodes[0]], coords[nodes[1]], coords[nodes[2]], coords[nodes[3]]];
        let geom = element_geometry(e, &xy)?;
        for g in &geom {
            for i in 0..4 {
                m[nodes[i]] += g.n[i] * g.vol;
            }
        }
    }
    Ok(m)
}

/// Evaluate a nodal field at every integration point (bilinear interpolation;
/// geometry-independent).
pub fn interpolate_to_points(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_elems() * GAUSS_PER_ELEM];
    for (e, nodes) in mesh.elems.iter().enumerate() {
        for (k, (xi, eta)) in gauss_abscissae().into_iter().enumerate() {
            let n = shape(xi, eta);
            out[e * GAUSS_PER_ELEM + k] =
                (0..4).map(|i| n[i] * nodal[nodes[i]]).sum();
        }
    }
    out
}
