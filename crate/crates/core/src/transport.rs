//! Hydrogen transport on the deforming mesh: backward-Euler lattice diffusion
//! with stress-gradient drift and a lumped lattice+trap capacity.
//!
//! The unknowns are nodal lattice concentrations `C_L`. Trapped hydrogen is
//! slaved to the lattice through Oriani equilibrium, so each node carries a
//! nonlinear capacity `C_L + C_T(C_L, N_T(ε̄p))` and the balance per node reads
//!
//! ```text
//! m_i · [ (C_L + C_T)_new − (C_L + C_T)_old ] / Δt  +  Σ_j A_ij · C_L,j = 0
//! ```
//!
//! with `m_i = ∫ N_i 2πr dA` the lumped volume and `A` the consistent
//! diffusion + drift matrix
//!
//! ```text
//! A_ij = ∫ D ∇N_i·∇N_j 2πr dA  −  ∫ (D·V_H/(R·T)) (∇N_i·∇σ_h) N_j 2πr dA,
//! ```
//!
//! where `σ_h` is the mean (hydrostatic) stress and `D` the lattice
//! diffusivity — trapping retards transport through the capacity factor, not
//! through `D`. All boundaries are impermeable (natural zero-flux), so the
//! column sums of `A` vanish and total hydrogen is conserved to solver
//! tolerance. Trap creation during plastic flow enters through the new trap
//! density in the implicit capacity: freshly created traps fill by draining
//! the lattice within the step.

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::fem::{self, element_geometry};
use crate::hydrogen::{
    total_to_lattice, transport_coefficients, trap_density, trapped_concentration, TrapParams,
    R_GAS,
};
use crate::mesh::Mesh;

const MAX_NEWTON: usize = 30;
const MAX_HALVINGS: usize = 12;
/// Convergence: ‖R‖_∞ below this fraction of the natural residual scale.
const RES_TOL: f64 = 1e-12;
/// Nodal concentrations this far below zero (relative to the field maximum)
/// are treated as roundoff undershoot and clamped; anything worse is an error.
const NEG_TOL: f64 = 1e-10;

/// Nodal hydrogen fields carried between increments.
#[derive(Clone, Debug)]
pub struct TransportState {
    /// Lattice concentration, mol/m³.
    pub c_l: Vec<f64>,
    /// Equivalent plastic strain the trap density was last equilibrated at.
    pub eps_p_bar: Vec<f64>,
}

impl TransportState {
    /// Uniform pre-charge: the total content `c_total` (mol/m³) is split into
    /// its equilibrium lattice part at zero plastic strain.
    pub fn uniform(mesh: &Mesh, c_total: f64, p: &TrapParams) -> Result<Self> {
        let c_l = total_to_lattice(c_total, 0.0, p)?;
        let n = mesh.n_nodes();
        Ok(TransportState { c_l: vec![c_l; n], eps_p_bar: vec![0.0; n] })
    }

    /// Trapped concentration at node `i` for the current state.
    pub fn c_t(&self, i: usize, p: &TrapParams) -> f64 {
        trapped_concentration(self.c_l[i], trap_density(self.eps_p_bar[i], p), p)
    }

    /// Total hydrogen content (mol) by lumped integration on the given
    /// configuration.
    pub fn total_hydrogen(&self, mesh: &Mesh, coords: &[[f64; 2]], p: &TrapParams) -> Result<f64> {
        let m = fem::lumped_volumes(mesh, coords)?;
        let mut total = 0.0;
        for i in 0..mesh.n_nodes() {
            total += m[i] * (self.c_l[i] + self.c_t(i, p));
        }
        Ok(total)
    }
}

/// Summary of one implicit transport solve.
#[derive(Clone, Copy, Debug)]
pub struct TransportReport {
    pub newton_iterations: usize,
    /// Converged residual, as a fraction of the residual scale.
    pub residual: f64,
}

/// Consistent diffusion + drift matrix on the given configuration.
///
/// `sigma_h` is the nodal mean stress (tension positive, Pa); pass zeros for
/// pure diffusion. Exposed separately so its structure can be inspected.
pub fn assemble_transport_matrix(
    mesh: &Mesh,
    coords: &[[f64; 2]],
    sigma_h: &[f64],
    p: &TrapParams,
) -> Result<BandMatrix> {
    let hw = mesh.transport_half_bandwidth();
    let mut a = BandMatrix::new(mesh.n_nodes(), hw, hw);
    let drift_coef = p.diffusivity * p.v_h / (R_GAS * p.temperature);
    for (e, nodes) in mesh.elems.iter().enumerate() {
        let xy = [
            coords[nodes[0]],
            coords[nodes[1]],
            coords[nodes[2]],
            coords[nodes[3]],
        ];
        let geom = element_geometry(e, &xy)?;
        for g in &geom {
            // ∇σ_h at the Gauss point from the nodal field.
            let mut gsr = 0.0;
            let mut gsz = 0.0;
            for i in 0..4 {
                gsr += g.dndr[i] * sigma_h[nodes[i]];
                gsz += g.dndz[i] * sigma_h[nodes[i]];
            }
            for i in 0..4 {
                let adv = drift_coef * (g.dndr[i] * gsr + g.dndz[i] * gsz);
                for j in 0..4 {
                    let diff = p.diffusivity * (g.dndr[i] * g.dndr[j] + g.dndz[i] * g.dndz[j]);
                    a.add(nodes[i], nodes[j], (diff - adv * g.n[j]) * g.vol);
                }
            }
        }
    }
    Ok(a)
}

/// Advance the lattice concentration by one implicit step of length `dt` on
/// the configuration `coords`, with the trap density updated to `eps_p_new`
/// and drift driven by the nodal mean stress `sigma_h`.
///
/// On success the state holds the converged concentrations and the new
/// plastic strains.
pub fn advance_transport(
    mesh: &Mesh,
    coords: &[[f64; 2]],
    state: &mut TransportState,
    eps_p_new: &[f64],
    sigma_h: &[f64],
    dt: f64,
    p: &TrapParams,
) -> Result<TransportReport> {
    let n = mesh.n_nodes();
    assert_eq!(state.c_l.len(), n);
    assert_eq!(eps_p_new.len(), n);
    assert_eq!(sigma_h.len(), n);
    if !(dt > 0.0) {
        return Err(Error::Transport(format!("non-positive time step {dt}")));
    }

    let m = fem::lumped_volumes(mesh, coords)?;
    let a = assemble_transport_matrix(mesh, coords, sigma_h, p)?;

    let n_t_new: Vec<f64> = eps_p_new.iter().map(|&e| trap_density(e, p)).collect();
    // Old content per node, with the trap density the old concentrations were
    // equilibrated at.
    let tot_old: Vec<f64> = (0..n)
        .map(|i| {
            state.c_l[i] + trapped_concentration(state.c_l[i], trap_density(state.eps_p_bar[i], p), p)
        })
        .collect();

    let c_max = tot_old.iter().cloned().fold(0.0f64, f64::max);
    let m_max = m.iter().cloned().fold(0.0f64, f64::max);
    // Natural residual magnitude: capacity terms scale with m·c/dt, transport
    // terms with diag(A)·c — the latter keeps the tolerance above the rounding
    // floor of A·c when steps are long and the field is near steady state.
    let mut a_diag_max = 0.0f64;
    for i in 0..n {
        a_diag_max = a_diag_max.max(a.get(i, i).abs());
    }
    let scale = ((m_max / dt + a_diag_max) * c_max).max(1e-300);

    let residual = |c: &[f64]| -> Result<(Vec<f64>, f64)> {
        let mut r = a.mul_vec(c);
        let mut worst = 0.0f64;
        for i in 0..n {
            if c[i] >= p.n_lattice() {
                return Err(Error::Transport(format!(
                    "lattice saturation at node {i}: C_L = {}",
                    c[i]
                )));
            }
            r[i] += m[i] * (c[i] + trapped_concentration(c[i], n_t_new[i], p) - tot_old[i]) / dt;
            worst = worst.max(r[i].abs());
        }
        Ok((r, worst))
    };

    let mut c = state.c_l.clone();
    let (mut r, mut r_norm) = residual(&c)?;
    let mut iters = 0;
    while r_norm > RES_TOL * scale {
        if iters >= MAX_NEWTON {
            return Err(Error::Transport(format!(
                "no convergence after {MAX_NEWTON} iterations: |R| = {:.3e} (tol {:.3e})",
                r_norm,
                RES_TOL * scale
            )));
        }
        let mut jac = a.clone();
        for i in 0..n {
            let (dct, _) = transport_coefficients(c[i].max(0.0), n_t_new[i], p)?;
            jac.add(i, i, m[i] * (1.0 + dct) / dt);
        }
        jac.factor()?;
        let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
        jac.solve(&mut delta);

        // Damped update: halve until the residual decreases.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = (0..n).map(|i| c[i] + alpha * delta[i]).collect();
            match residual(&trial) {
                Ok((rt, rtn)) if rtn <= r_norm * (1.0 + 1e-12) => {
                    c = trial;
                    r = rt;
                    r_norm = rtn;
                    accepted = true;
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        if !accepted {
            return Err(Error::Transport(format!(
                "stalled at |R| = {:.3e} (tol {:.3e})",
                r_norm,
                RES_TOL * scale
            )));
        }
        iters += 1;
    }

    // Backward Euler with a lumped capacity keeps concentrations non-negative
    // on meshes whose transport matrix is an M-matrix; on strongly graded
    // meshes tiny undershoots can appear and are clamped as roundoff.
    let floor = -NEG_TOL * c_max.max(1e-30);
    for v in &mut c {
        if *v < 0.0 {
            if *v < floor {
                return Err(Error::Transport(format!(
                    "negative lattice concentration {v} after transport step"
                )));
            }
            *v = 0.0;
        }
    }

    state.c_l = c;
    state.eps_p_bar = eps_p_new.to_vec();
    Ok(TransportReport { newton_iterations: iters, residual: r_norm / scale })
}
