//! Porous-metal plasticity at a material point: Gurson yield surface with
//! Tvergaard–Needleman coalescence, a hydrogen-softened matrix flow stress,
//! and void nucleation driven by both plastic strain and dissolved hydrogen.
//!
//! The implicit update ([`stress_update`]) solves the four-equation backward-Euler
//! return map (volumetric and deviatoric plastic increments, matrix plastic
//! strain, porosity) with a monolithic Newton iteration and returns the exact
//! consistent tangent from the converged Jacobian. [`oracle_integrate`] is a
//! deliberately independent forward-Euler/bisection integrator used to
//! cross-check the implicit route; keep the two implementations decoupled.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::tensor::{elastic_stress, invariants, ElasticConstants, Modulus, SymTensor2};

/// Yield-surface, hardening, coalescence, and nucleation parameters.
///
/// Stresses in Pa, concentrations in mol/m³, `b_h` in m³/mol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GursonParams {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Initial void volume fraction.
    pub f0: f64,
    /// Porosity at the onset of coalescence.
    pub fc: f64,
    /// Porosity at final failure.
    pub ff: f64,
    /// Matrix yield stress at zero plastic strain (and zero hydrogen).
    pub sigma0: f64,
    /// Reference strain of the power-law hardening term.
    pub eps0: f64,
    /// Hardening exponent.
    pub n_hard: f64,
    /// Hydrogen concentration that saturates the softening (mol/m³; may be
    /// `f64::INFINITY` to disable softening).
    pub c_c: f64,
    /// Volume fraction of void-nucleating particles.
    pub f_n: f64,
    /// Mean nucleation strain.
    pub eps_n: f64,
    /// Standard deviation of the nucleation strain.
    pub s_n: f64,
    /// Hydrogen-assisted nucleation coefficient (m³/mol).
    pub b_h: f64,
}

impl GursonParams {
    /// Parameter set calibrated for the X65-class pipeline steel presets.
    pub fn x65() -> Self {
        GursonParams {
            q1: 1.5,
            q2: 1.0,
            q3: 2.25,
            f0: 1.0e-4,
            fc: 0.15,
            ff: 0.25,
            sigma0: 420.0e6,
            eps0: 0.012,
            n_hard: 0.13,
            c_c: 1500.0,
            f_n: 0.05,
            eps_n: 1.0,
            s_n: 0.1,
            b_h: 3.0e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        if !(self.q1 > 0.0) || !(self.q2 > 0.0) || !(self.q3 >= 0.0) {
            return bad(format!("q1={} q2={} q3={} must be positive", self.q1, self.q2, self.q3));
        }
        if !(self.f0 >= 0.0 && self.f0 < 1.0) {
            return bad(format!("f0={} must lie in [0,1)", self.f0));
        }
        if !(self.fc > 0.0 && self.ff > self.fc && self.ff < 1.0) {
            return bad(format!("need 0 < fc < ff < 1, got fc={} ff={}", self.fc, self.ff));
        }
        if self.fc >= 1.0 / self.q1 {
            return bad(format!("fc={} must be below the coalescence limit 1/q1={}", self.fc, 1.0 / self.q1));
        }
        if !(self.sigma0 > 0.0) || !(self.eps0 > 0.0) {
            return bad(format!("sigma0={} eps0={} must be positive", self.sigma0, self.eps0));
        }
        if !(self.n_hard > 0.0 && self.n_hard < 1.0) {
            return bad(format!("hardening exponent n={} must lie in (0,1)", self.n_hard));
        }
        if !(self.c_c > 0.0) {
            return bad(format!("c_c={} must be positive (inf disables softening)", self.c_c));
        }
        if !(self.f_n >= 0.0) || !(self.s_n > 0.0) || !(self.eps_n > 0.0) || !(self.b_h >= 0.0) {
            return bad(format!(
                "nucleation parameters f_n={} eps_n={} s_n={} b_h={} out of range",
                self.f_n, self.eps_n, self.s_n, self.b_h
            ));
        }
        Ok(())
    }

    /// Slope of the coalescence branch of `f*`.
    pub fn kappa(&self) -> f64 {
        (1.0 / self.q1 - self.fc) / (self.ff - self.fc)
    }

    /// Effective (coalescence-accelerated) porosity.
    pub fn f_star(&self, f: f64) -> f64 {
        if f <= self.fc {
            f
        } else if f < self.ff {
            self.fc + self.kappa() * (f - self.fc)
        } else {
            1.0 / self.q1
        }
    }

    /// `d f*/d f`; takes the coalescence slope on `[fc, ff)`.
    pub fn f_star_slope(&self, f: f64) -> f64 {
        if f < self.fc {
            1.0
        } else if f < self.ff {
            self.kappa()
        } else {
            0.0
        }
    }
}

impl Default for GursonParams {
    fn default() -> Self {
        Self::x65()
    }
}

/// Complete mechanical state of one material point. Pure-value semantics:
/// updates return a new state, so a rejected global increment can simply be
/// retried from the old one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointState {
    /// Cauchy stress (tension positive).
    pub sigma: SymTensor2,
    /// Matrix equivalent plastic strain.
    pub eps_p_bar: f64,
    /// Void volume fraction.
    pub f: f64,
    /// Accumulated volumetric plastic strain.
    pub eps_p_trace: f64,
    /// Hydrogen concentration the point saw in its last update (mol/m³).
    pub c_h_seen: f64,
    /// Set once `f` reaches `ff`; the stress then ramps to zero.
    pub failed: bool,
    /// Number of accepted increments since failure triggered.
    pub fail_steps: u32,
}

impl PointState {
    pub fn initial(gp: &GursonParams) -> Self {
        PointState {
            sigma: SymTensor2::ZERO,
            eps_p_bar: 0.0,
            f: gp.f0,
            eps_p_trace: 0.0,
            c_h_seen: 0.0,
            failed: false,
            fail_steps: 0,
        }
    }
}

/// Matrix flow stress `sigma0 * [1 + (eps_p_bar/eps0) * (1 - C/C_c)]^n`,
/// with the concentration ratio clamped to [0, 1]. Never drops below `sigma0`.
pub fn flow_stress(eps_p_bar: f64, c_h: f64, gp: &GursonParams) -> f64 {
    let c_rel = (c_h / gp.c_c).clamp(0.0, 1.0);
    gp.sigma0 * (1.0 + eps_p_bar / gp.eps0 * (1.0 - c_rel)).powf(gp.n_hard)
}

/// `d(flow_stress)/d(eps_p_bar)` at fixed concentration.
pub fn flow_stress_deriv(eps_p_bar: f64, c_h: f64, gp: &GursonParams) -> f64 {
    let c_rel = (c_h / gp.c_c).clamp(0.0, 1.0);
    let soft = 1.0 - c_rel;
    let base = 1.0 + eps_p_bar / gp.eps0 * soft;
    gp.sigma0 * gp.n_hard * soft / gp.eps0 * base.powf(gp.n_hard - 1.0)
}

/// Yield function value. `p` is the tension-positive mean stress, `q` the von
/// Mises equivalent, `sigma_f` the matrix flow stress, `f_star` the effective
/// porosity. Even in `p` and in `q`.
pub fn yield_value(p: f64, q: f64, sigma_f: f64, f_star: f64, gp: &GursonParams) -> f64 {
    let eta = -1.5 * gp.q2 * p / sigma_f;
    (q / sigma_f).powi(2) + 2.0 * gp.q1 * f_star * eta.cosh() - (1.0 + gp.q3 * f_star * f_star)
}

/// First and second partials of the yield function needed by the return map
/// and the consistent tangent.
#[derive(Clone, Copy, Debug)]
struct YieldPartials {
    phi: f64,
    dp: f64,
    dq: f64,
    dsf: f64,
    dfs: f64,
    dpp: f64,
    dqq: f64,
    dpsf: f64,
    dpfs: f64,
    dqsf: f64,
}

fn yield_partials(p: f64, q: f64, sf: f64, fs: f64, gp: &GursonParams) -> YieldPartials {
    let (q1, q2, q3) = (gp.q1, gp.q2, gp.q3);
    let eta = -1.5 * q2 * p / sf;
    let ch = eta.cosh();
    let sh = eta.sinh();
    YieldPartials {
        phi: (q / sf).powi(2) + 2.0 * q1 * fs * ch - (1.0 + q3 * fs * fs),
        dp: -(3.0 * q1 * q2 * fs / sf) * sh,
        dq: 2.0 * q / (sf * sf),
        dsf: -2.0 * q * q / (sf * sf * sf) + 3.0 * q1 * q2 * fs * p / (sf * sf) * sh,
        dfs: 2.0 * q1 * ch - 2.0 * q3 * fs,
        dpp: 4.5 * q1 * q2 * q2 * fs / (sf * sf) * ch,
        dqq: 2.0 / (sf * sf),
        dpsf: 3.0 * q1 * q2 * fs / (sf * sf) * sh - 4.5 * q1 * q2 * q2 * fs * p / (sf * sf * sf) * ch,
        dpfs: -(3.0 * q1 * q2 / sf) * sh,
        dqsf: -4.0 * q / (sf * sf * sf),
    }
}

/// Strain-controlled nucleation intensity `A(eps_p_bar)` (normal distribution
/// in plastic strain).
pub fn nucleation_rate(eps_p_bar: f64, gp: &GursonParams) -> f64 {
    let z = (eps_p_bar - gp.eps_n) / gp.s_n;
    gp.f_n / (gp.s_n * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp()
}

/// Porosity nucleated over a plastic-strain increment:
/// `(A(eps_p_bar) + B * C_H) * d_eps_p_bar`.
pub fn nucleation_increment(eps_p_bar: f64, d_eps_p_bar: f64, c_h: f64, gp: &GursonParams) -> f64 {
    (nucleation_rate(eps_p_bar, gp) + gp.b_h * c_h) * d_eps_p_bar
}

/// Porosity growth from plastic dilatation: `(1 - f) * d_eps_p_kk`.
pub fn growth_increment(f: f64, d_eps_p_kk: f64) -> f64 {
    (1.0 - f) * d_eps_p_kk
}

const NEWTON_TOL: f64 = 1.0e-12;
const STALL_TOL: f64 = 1.0e-10;
const MAX_ITER: usize = 40;
/// Trial states with the yield value below this are taken as elastic.
const YIELD_TOL: f64 = 1.0e-10;
/// Accepted increments over which the stress of a failed point ramps to zero.
const RAMP_STEPS: u32 = 10;

fn ramp_factor(fail_steps: u32) -> f64 {
    (1.0 - f64::from(fail_steps) / f64::from(RAMP_STEPS)).max(0.0)
}

/// Converged return-map solution plus the pieces the tangent assembly needs.
struct ReturnMap {
    dep: f64,
    depb: f64,
    f: f64,
    p: f64,
    q: f64,
    /// Sensitivities (d dep/d p_t, d dep/d q_t, d deq/d p_t, d deq/d q_t).
    dep_dpt: f64,
    dep_dqt: f64,
    deq_dpt: f64,
    deq_dqt: f64,
}

struct ResidualParts {
    f_vec: Vector4<f64>,
    jac: Matrix4<f64>,
    scaled_norm: f64,
}

fn residual_and_jacobian(
    u: &Vector4<f64>,
    p_t: f64,
    q_t: f64,
    eps_p_bar0: f64,
    f_old: f64,
    c_h: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> ResidualParts {
    let (dep, deq, depb, f) = (u[0], u[1], u[2], u[3]);
    let (k, g) = (el.k, el.g);
    let p = p_t - k * dep;
    let q = q_t - 3.0 * g * deq;
    let epb = eps_p_bar0 + depb;
    let sf = flow_stress(epb, c_h, gp);
    let sfp = flow_stress_deriv(epb, c_h, gp);
    let fs = gp.f_star(f);
    let fsp = gp.f_star_slope(f);
    let y = yield_partials(p, q, sf, fs, gp);
    let a_n = nucleation_rate(epb, gp);
    let a_np = a_n * (-(epb - gp.eps_n) / (gp.s_n * gp.s_n));
    let bc = gp.b_h * c_h;

    let f_vec = Vector4::new(
        y.phi,
        dep * y.dq - deq * y.dp,
        (1.0 - f) * sf * depb - (p * dep + q * deq),
        f - f_old - (a_n + bc) * depb - (1.0 - f) * dep,
    );
    let jac = Matrix4::new(
        -k * y.dp,
        -3.0 * g * y.dq,
        sfp * y.dsf,
        fsp * y.dfs,
        //
        y.dq + deq * k * y.dpp,
        -3.0 * g * dep * y.dqq - y.dp,
        sfp * (dep * y.dqsf - deq * y.dpsf),
        -deq * fsp * y.dpfs,
        //
        -p + k * dep,
        -q + 3.0 * g * deq,
        (1.0 - f) * (sf + depb * sfp),
        -sf * depb,
        //
        -(1.0 - f),
        0.0,
        -(a_n + bc) - depb * a_np,
        1.0 + dep,
    );
    let scaled_norm = f_vec[0]
        .abs()
        .max(f_vec[1].abs() * sf)
        .max(f_vec[2].abs() / sf)
        .max(f_vec[3].abs());
    ResidualParts { f_vec, jac, scaled_norm }
}

fn nonconvergence(state: &PointState, p_t: f64, q_t: f64, phi: f64) -> Error {
    Error::MaterialNonConvergence {
        state: Box::new(*state),
        p_trial: p_t,
        q_trial: q_t,
        phi_residual: phi,
    }
}

fn solve_return_map(
    state: &PointState,
    p_t: f64,
    q_t: f64,
    c_h: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<ReturnMap> {
    let (k, g) = (el.k, el.g);
    let deq_max = q_t / (3.0 * g) * (1.0 - 1.0e-12);
    // Damped Newton on the one-step system at a given (possibly scaled) trial
    // state. Each step is projected into the physical box (deq in [0, q/3G],
    // depb >= 0, f in [0, 0.999]) and then backtracked until the scaled
    // residual actually drops. Snap-back states (softening faster than
    // elastic unloading) never produce a drop; they stall and are reported
    // through the stall path below.
    let attempt = |u0: Vector4<f64>, ps: f64, qs: f64| -> (Vector4<f64>, f64, bool) {
        let deq_cap = qs / (3.0 * g) * (1.0 - 1.0e-12);
        let mut u = u0;
        u[1] = u[1].clamp(0.0, deq_cap);
        let mut best_u = u;
        let mut best_norm = f64::INFINITY;
        for _ in 0..MAX_ITER {
            let parts = residual_and_jacobian(&u, ps, qs, state.eps_p_bar, state.f, c_h, gp, el);
            if parts.scaled_norm < best_norm {
                best_norm = parts.scaled_norm;
                best_u = u;
            }
            if parts.scaled_norm < NEWTON_TOL {
                return (u, parts.scaled_norm, true);
            }
            let Some(delta) = parts.jac.lu().solve(&(-parts.f_vec)) else {
                break;
            };
            let clamped = |alpha: f64| -> Vector4<f64> {
                let mut t = u + delta * alpha;
                t[1] = t[1].clamp(0.0, deq_cap);
                t[2] = t[2].max(0.0);
                t[3] = t[3].clamp(0.0, 0.999);
                t
            };
            let mut alpha = 1.0;
            let mut took_step = false;
            for _ in 0..30 {
                let t = clamped(alpha);
                if t.iter().all(|v| v.is_finite()) {
                    let trial =
                        residual_and_jacobian(&t, ps, qs, state.eps_p_bar, state.f, c_h, gp, el);
                    if trial.scaled_norm <= (1.0 - 1.0e-4 * alpha) * parts.scaled_norm {
                        u = t;
                        took_step = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !took_step {
                break;
            }
        }
        (best_u, best_norm, false)
    };
    // Multi-start: a von Mises radial-return estimate first (close to the
    // deviatoric solution under large elastic overshoot, where the cosh term
    // dominates the Jacobian at the origin), falling back to the zero guess.
    let sf0 = flow_stress(state.eps_p_bar, c_h, gp);
    let deq0 = (0.95 * (q_t - sf0) / (3.0 * g)).clamp(0.0, deq_max);
    let starts = [
        Vector4::new(0.0, deq0, deq0, state.f),
        Vector4::new(0.0, 0.0, 0.0, state.f),
    ];
    let mut u = starts[0];
    let mut best_norm = f64::INFINITY;
    let mut converged = false;
    for (i, start) in starts.iter().enumerate() {
        if i > 0 && (converged || deq0 == 0.0) {
            break;
        }
        let (cand, norm, ok) = attempt(*start, p_t, q_t);
        if ok || norm < best_norm {
            u = cand;
            best_norm = norm;
        }
        converged = ok;
    }
    if !converged {
        // Homotopy fallback: scale the trial invariants from the point where
        // the ray (s*p_t, s*q_t) crosses the current yield surface up to the
        // full trial, warm-starting Newton at each stage. When the local
        // problem is stable its solution is a continuous curve in s, so the
        // march stays inside Newton's basin even when the full-step root is
        // far from any simple guess (e.g. a large one-step porosity jump).
        let fs_old = gp.f_star(state.f);
        let phi_of = |s: f64| yield_value(s * p_t, s * q_t, sf0, fs_old, gp);
        let mut lo = 0.0;
        let mut hi = 1.0;
        if phi_of(0.0) < 0.0 && phi_of(1.0) > 0.0 {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if phi_of(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        } else {
            lo = 0.0;
        }
        let s_yield = lo;
        'ladder: for stages in [8usize, 32, 128] {
            let mut w = Vector4::new(0.0, 0.0, 0.0, state.f);
            for j in 1..=stages {
                let s = s_yield + (1.0 - s_yield) * (j as f64) / (stages as f64);
                let (cand, norm, ok) = attempt(w, s * p_t, s * q_t);
                if !ok {
                    continue 'ladder;
                }
                w = cand;
                if j == stages {
                    u = cand;
                    best_norm = norm;
                    converged = true;
                    break 'ladder;
                }
            }
        }
    }
    // A stalled iterate that is already essentially on the surface is kept
    // under a slightly looser acceptance.
    if !converged && best_norm >= STALL_TOL {
        let parts = residual_and_jacobian(&u, p_t, q_t, state.eps_p_bar, state.f, c_h, gp, el);
        return Err(nonconvergence(state, p_t, q_t, parts.f_vec[0]));
    }
    let parts = residual_and_jacobian(&u, p_t, q_t, state.eps_p_bar, state.f, c_h, gp, el);
    // Sensitivities of the converged solution to the trial invariants, for the
    // consistent tangent: J * du/dp_t = -dF/dp_t, J * du/dq_t = -dF/dq_t.
    let (dep, deq) = (u[0], u[1]);
    let p = p_t - k * dep;
    let q = q_t - 3.0 * g * deq;
    let sf = flow_stress(state.eps_p_bar + u[2], c_h, gp);
    let fs = gp.f_star(u[3]);
    let y = yield_partials(p, q, sf, fs, gp);
    let lu = parts.jac.lu();
    let rhs_p = Vector4::new(y.dp, -deq * y.dpp, -dep, 0.0);
    let rhs_q = Vector4::new(y.dq, dep * y.dqq, -deq, 0.0);
    let (du_dpt, du_dqt) = match (lu.solve(&(-rhs_p)), lu.solve(&(-rhs_q))) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(nonconvergence(state, p_t, q_t, parts.f_vec[0])),
    };
    Ok(ReturnMap {
        dep,
        depb: u[2],
        f: u[3],
        p,
        q,
        dep_dpt: du_dpt[0],
        dep_dqt: du_dqt[0],
        deq_dpt: du_dpt[1],
        deq_dqt: du_dqt[1],
    })
}

/// Return map for a (nearly) deviator-free trial state: the deviatoric
/// increment is identically zero and the system reduces to three equations in
/// (dep, depb, f).
fn solve_return_map_hydrostatic(
    state: &PointState,
    p_t: f64,
    c_h: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<ReturnMap> {
    let k = el.k;
    let mut u = Vector3::new(0.0, 0.0, state.f);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let full = Vector4::new(u[0], 0.0, u[1], u[2]);
        let parts = residual_and_jacobian(&full, p_t, 0.0, state.eps_p_bar, state.f, c_h, gp, el);
        let f_red = Vector3::new(parts.f_vec[0], parts.f_vec[2], parts.f_vec[3]);
        let norm = f_red[0].abs().max(f_red[1].abs() / gp.sigma0).max(f_red[2].abs());
        if norm < NEWTON_TOL {
            converged = true;
            break;
        }
        let j = &parts.jac;
        let j_red = Matrix3::new(
            j[(0, 0)], j[(0, 2)], j[(0, 3)],
            j[(2, 0)], j[(2, 2)], j[(2, 3)],
            j[(3, 0)], j[(3, 2)], j[(3, 3)],
        );
        let Some(delta) = j_red.lu().solve(&(-f_red)) else {
            return Err(nonconvergence(state, p_t, 0.0, parts.f_vec[0]));
        };
        u += delta;
        u[1] = u[1].max(0.0);
        u[2] = u[2].clamp(0.0, 0.999);
    }
    if !converged {
        let full = Vector4::new(u[0], 0.0, u[1], u[2]);
        let parts = residual_and_jacobian(&full, p_t, 0.0, state.eps_p_bar, state.f, c_h, gp, el);
        if parts.scaled_norm >= STALL_TOL {
            return Err(nonconvergence(state, p_t, 0.0, parts.f_vec[0]));
        }
    }
    // Volumetric sensitivity only; the deviatoric response stays elastic.
    let full = Vector4::new(u[0], 0.0, u[1], u[2]);
    let parts = residual_and_jacobian(&full, p_t, 0.0, state.eps_p_bar, state.f, c_h, gp, el);
    let j = &parts.jac;
    let j_red = Matrix3::new(
        j[(0, 0)], j[(0, 2)], j[(0, 3)],
        j[(2, 0)], j[(2, 2)], j[(2, 3)],
        j[(3, 0)], j[(3, 2)], j[(3, 3)],
    );
    let sf = flow_stress(state.eps_p_bar + u[1], c_h, gp);
    let fs = gp.f_star(u[2]);
    let y = yield_partials(p_t - k * u[0], 0.0, sf, fs, gp);
    let rhs = Vector3::new(y.dp, -u[0], 0.0);
    let dep_dpt = j_red.lu().solve(&(-rhs)).map_or(0.0, |v| v[0]);
    Ok(ReturnMap {
        dep: u[0],
        depb: u[1],
        f: u[2],
        p: p_t - k * u[0],
        q: 0.0,
        dep_dpt,
        dep_dqt: 0.0,
        deq_dpt: 0.0,
        deq_dqt: 0.0,
    })
}

/// Assemble the consistent tangent in engineering-Voigt order
/// `[rr, zz, tt, rz]` from the return-map sensitivities.
fn consistent_tangent(
    rm: &ReturnMap,
    q_t: f64,
    s_trial: SymTensor2,
    el: &ElasticConstants,
) -> Modulus {
    let (k, g) = (el.k, el.g);
    let ident = [1.0, 1.0, 1.0, 0.0];
    let mut d = [[0.0; 4]; 4];
    // Deviatoric projector, engineering shear convention.
    let pdev = [
        [2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 0.0],
        [-1.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0, 0.0],
        [-1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0, 0.0],
        [0.0, 0.0, 0.0, 0.5],
    ];
    let (ratio, n) = if q_t > 0.0 {
        let c = 1.5 / q_t;
        (rm.q / q_t, [c * s_trial.rr, c * s_trial.zz, c * s_trial.tt, c * s_trial.rz])
    } else {
        (1.0, [0.0; 4])
    };
    let c_ii = k * (1.0 - k * rm.dep_dpt);
    let c_in = -2.0 * g * k * rm.dep_dqt;
    let c_ni = -2.0 * g * k * rm.deq_dpt;
    let c_nn = 4.0 * g / 3.0 * ((1.0 - 3.0 * g * rm.deq_dqt) - ratio);
    for i in 0..4 {
        for j in 0..4 {
            d[i][j] = 2.0 * g * ratio * pdev[i][j]
                + c_ii * ident[i] * ident[j]
                + c_in * ident[i] * n[j]
                + c_ni * n[i] * ident[j]
                + c_nn * n[i] * n[j];
        }
    }
    Modulus(d)
}

fn update_failed(state: &PointState, c_h: f64, el: &ElasticConstants) -> (PointState, Modulus) {
    let k = state.fail_steps;
    let old = ramp_factor(k);
    let new = ramp_factor(k.saturating_add(1));
    let scale = if old > 0.0 { new / old } else { 0.0 };
    let mut out = *state;
    out.sigma = out.sigma * scale;
    out.fail_steps = k.saturating_add(1);
    out.c_h_seen = c_h;
    (out, Modulus::elastic(el).scale(new.max(1.0e-6)))
}

fn stress_update_once(
    state: &PointState,
    d_eps: SymTensor2,
    c_h: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<(PointState, Modulus)> {
    if state.failed {
        return Ok(update_failed(state, c_h, el));
    }
    let sigma_trial = state.sigma + elastic_stress(&d_eps, el);
    let (p_t, q_t) = invariants(&sigma_trial);
    let sf0 = flow_stress(state.eps_p_bar, c_h, gp);
    let phi_trial = yield_value(p_t, q_t, sf0, gp.f_star(state.f), gp);
    if phi_trial <= YIELD_TOL {
        let mut out = *state;
        out.sigma = sigma_trial;
        out.c_h_seen = c_h;
        return Ok((out, Modulus::elastic(el)));
    }

    let q_tiny = 1.0e-9 * (sf0 + p_t.abs());
    let rm = if q_t <= q_tiny {
        solve_return_map_hydrostatic(state, p_t, c_h, gp, el)?
    } else {
        solve_return_map(state, p_t, q_t, c_h, gp, el)?
    };

    let s_trial = sigma_trial.dev();
    let sigma_new = if q_t > 0.0 {
        SymTensor2::spherical(rm.p) + s_trial * (rm.q / q_t)
    } else {
        SymTensor2::spherical(rm.p)
    };
    let mut out = PointState {
        sigma: sigma_new,
        eps_p_bar: state.eps_p_bar + rm.depb,
        f: rm.f,
        eps_p_trace: state.eps_p_trace + rm.dep,
        c_h_seen: c_h,
        failed: false,
        fail_steps: 0,
    };
    let mut tangent = consistent_tangent(&rm, q_t, s_trial, el);
    if out.f >= gp.ff {
        out.failed = true;
        out.fail_steps = 1;
        let factor = ramp_factor(1);
        out.sigma = out.sigma * factor;
        tangent = Modulus::elastic(el).scale(factor.max(1.0e-6));
    }
    Ok((out, tangent))
}

/// Implicit stress update over a total strain increment at frozen hydrogen
/// concentration. Returns the new state and the consistent tangent.
///
/// If the monolithic Newton fails on the full increment, the increment is
/// retried in 10 and then 100 equal sub-increments (the tangent then comes
/// from the last sub-increment).
pub fn stress_update(
    state: &PointState,
    d_eps: SymTensor2,
    c_h: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<(PointState, Modulus)> {
    match stress_update_once(state, d_eps, c_h, gp, el) {
        Ok(r) => Ok(r),
        Err(first_err) => {
            for n_sub in [10u32, 100] {
                let sub = d_eps * (1.0 / f64::from(n_sub));
                let mut s = *state;
                let mut result = None;
                for _ in 0..n_sub {
                    match stress_update_once(&s, sub, c_h, gp, el) {
                        Ok((s2, t2)) => {
                            let failed_now = s2.failed && !s.failed;
                            s = s2;
                            result = Some((s, t2));
                            if failed_now {
                                // The ramp advances per accepted *increment*,
                                // not per sub-increment.
                                break;
                            }
                        }
                        Err(_) => {
                            result = None;
                            break;
                        }
                    }
                }
                if let Some(r) = result {
                    return Ok(r);
                }
            }
            Err(first_err)
        }
    }
}

/// Independent explicit integrator for cross-checking [`stress_update`].
///
/// Walks a path of strain increments, splitting each into `substeps`
/// forward-Euler substeps; each plastic substep projects the trial stress back
/// to the yield surface along the trial-state flow direction, with the plastic
/// multiplier found by bisection and the internal variables updated with
/// start-of-substep coefficients. No consistent tangent, no failure ramp.
pub fn oracle_integrate(
    state: &PointState,
    path: &[SymTensor2],
    c_h: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
    substeps: usize,
) -> Result<PointState> {
    assert!(substeps > 0);
    let mut sigma = state.sigma;
    let mut epb = state.eps_p_bar;
    let mut f = state.f;
    let mut trace_acc = state.eps_p_trace;
    for sub in path.iter().flat_map(|inc| {
        let s = *inc * (1.0 / substeps as f64);
        std::iter::repeat(s).take(substeps)
    }) {
        let sigma_trial = sigma + elastic_stress(&sub, el);
        let (p_t, q_t) = invariants(&sigma_trial);
        let sf0 = flow_stress(epb, c_h, gp);
        let fs0 = gp.f_star(f);
        if yield_value(p_t, q_t, sf0, fs0, gp) <= 1.0e-14 {
            sigma = sigma_trial;
            continue;
        }
        let y = yield_partials(p_t, q_t, sf0, fs0, gp);
        let a_n = nucleation_rate(epb, gp) + gp.b_h * c_h;
        let s_t = sigma_trial.dev();
        // State after a multiplier lam: stress moves along the elastic image of
        // the trial flow direction, internal variables follow explicitly.
        let probe = |lam: f64| -> (f64, f64, f64, f64) {
            let p = p_t - lam * el.k * y.dp;
            let q = if q_t > 0.0 { q_t - 3.0 * el.g * y.dq * lam } else { 0.0 };
            let depb = lam * (p * y.dp + q * y.dq) / ((1.0 - f) * sf0);
            let df = a_n * depb + (1.0 - f) * lam * y.dp;
            (p, q, depb, df)
        };
        let phi_at = |lam: f64| -> f64 {
            let (p, q, depb, df) = probe(lam);
            yield_value(p, q, flow_stress(epb + depb, c_h, gp), gp.f_star(f + df), gp)
        };
        let mut hi = 1.0e-12;
        let mut grew = false;
        for _ in 0..120 {
            if phi_at(hi) < 0.0 {
                grew = true;
                break;
            }
            hi *= 2.0;
        }
        if !grew {
            return Err(Error::MaterialNonConvergence {
                state: Box::new(*state),
                p_trial: p_t,
                q_trial: q_t,
                phi_residual: phi_at(hi),
            });
        }
        let mut lo = 0.0;
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if phi_at(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        let (p, q, depb, df) = probe(lam);
        sigma = if q_t > 0.0 {
            SymTensor2::spherical(p) + s_t * (q / q_t)
        } else {
            SymTensor2::spherical(p)
        };
        epb += depb;
        f = (f + df).clamp(0.0, 0.999);
        trace_acc += lam * y.dp;
    }
    Ok(PointState {
        sigma,
        eps_p_bar: epb,
        f,
        eps_p_trace: trace_acc,
        c_h_seen: c_h,
        failed: state.failed,
        fail_steps: state.fail_steps,
    })
}

/// Audit the implicit update against the explicit oracle on random
/// proportional strain paths (hydrogen-free, hydrogen nucleation off).
///
/// Each path fixes a random multiaxial direction — axial-dominant with a
/// lateral/axial ratio in [-0.6, 0.1] and some shear — and walks 20–40 equal
/// increments of per-step norm ≤ 2×10⁻³, well into the plastic range. The
/// total volumetric strain of a path is capped so the pressure stays in the
/// regime a necking bar actually visits (≲ 1.2 GPa): past that, the
/// sinh-driven void growth is so stiff that any two consistent integrators
/// drift apart at finite step size and the comparison would measure step-size
/// sensitivity instead of return-map correctness. Both routes integrate the
/// same path from the same virgin state; the returned vector holds one
/// relative axial-stress deviation per path.
pub fn proportional_path_deviations(
    gp: &GursonParams,
    el: &ElasticConstants,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let gp = GursonParams { b_h: 0.0, ..*gp };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut deviations = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let biax: f64 = rng.gen_range(-0.6..0.1);
        let shear: f64 = rng.gen_range(-0.3..0.3);
        let dir = SymTensor2 { rr: biax, zz: 1.0, tt: biax, rz: shear };
        let mut step_norm: f64 = rng.gen_range(5.0e-4..2.0e-3);
        let steps: usize = rng.gen_range(20..=40);
        let trace_frac = (1.0 + 2.0 * biax).abs() / dir.norm();
        let total_trace = steps as f64 * step_norm * trace_frac;
        if total_trace > 7.0e-3 {
            step_norm *= 7.0e-3 / total_trace;
        }
        let step = dir * (step_norm / dir.norm());
        let path = vec![step; steps];
        let mut implicit = PointState::initial(&gp);
        for inc in &path {
            implicit = stress_update(&implicit, *inc, 0.0, &gp, el)?.0;
        }
        let oracle = oracle_integrate(&PointState::initial(&gp), &path, 0.0, &gp, el, 240)?;
        deviations.push((implicit.sigma.zz - oracle.sigma.zz).abs() / oracle.sigma.zz.abs());
    }
    Ok(deviations)
}

/// One axial-strain-controlled, laterally traction-free step (uniaxial stress):
/// finds the lateral strain increment that zeroes the radial stress and applies
/// [`stress_update`]. Returns the new state, the tangent, and the lateral
/// strain increment it settled on.
pub fn uniaxial_step(
    state: &PointState,
    d_eps_zz: f64,
    c_h: f64,
    gp: &GursonParams,
    el: &ElasticConstants,
) -> Result<(PointState, Modulus, f64)> {
    let apply = |x: f64| -> Result<(PointState, Modulus)> {
        let d_eps = SymTensor2 { rr: x, zz: d_eps_zz, tt: x, rz: 0.0 };
        stress_update(state, d_eps, c_h, gp, el)
    };
    if state.failed {
        let x = -0.5 * d_eps_zz;
        let (s, t) = apply(x)?;
        return Ok((s, t, x));
    }
    // sigma_rr after the step grows monotonically with the lateral strain;
    // bracket the root and bisect.
    let scale = d_eps_zz.abs().max(1.0e-8);
    let mut lo = -0.55 * d_eps_zz - scale;
    let mut hi = -0.55 * d_eps_zz + scale;
    let mut r_lo = apply(lo)?.0.sigma.rr;
    let mut r_hi = apply(hi)?.0.sigma.rr;
    let mut width = scale;
    for _ in 0..60 {
        if r_lo <= 0.0 && r_hi >= 0.0 {
            break;
        }
        width *= 2.0;
        if r_lo > 0.0 {
            lo -= width;
            r_lo = apply(lo)?.0.sigma.rr;
        }
        if r_hi < 0.0 {
            hi += width;
            r_hi = apply(hi)?.0.sigma.rr;
        }
    }
    if !(r_lo <= 0.0 && r_hi >= 0.0) {
        return Err(Error::Equilibrium(format!(
            "uniaxial lateral-strain bracket failed: sigma_rr in [{r_lo:.3e}, {r_hi:.3e}]"
        )));
    }
    let tol = 1.0e-7 * gp.sigma0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        x = 0.5 * (lo + hi);
        let r = apply(x)?.0.sigma.rr;
        if r.abs() <= tol {
            break;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if (hi - lo).abs() <= 1.0e-16 + 1.0e-12 * x.abs() {
            break;
        }
    }
    let (s, t) = apply(x)?;
    Ok((s, t, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn el() -> ElasticConstants {
        ElasticConstants::new(200.0e9, 0.3).unwrap()
    }

    fn gp() -> GursonParams {
        GursonParams { fc: 0.15, ff: 0.25, ..GursonParams::x65() }
    }

    #[test]
    fn defaults_validate() {
        GursonParams::x65().validate().unwrap();
        assert!(GursonParams { fc: 0.3, ff: 0.2, ..gp() }.validate().is_err());
        assert!(GursonParams { n_hard: 1.2, ..gp() }.validate().is_err());
        assert!(GursonParams { fc: 0.7, ff: 0.8, ..gp() }.validate().is_err());
    }

    #[test]
    fn f_star_piecewise() {
        let g = gp();
        assert_eq!(g.f_star(0.05), 0.05);
        assert_eq!(g.f_star(0.15), 0.15);
        assert_relative_eq!(g.kappa(), 31.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(g.f_star(0.20), 0.15 + 31.0 / 6.0 * 0.05, max_relative = 1e-14);
        assert_relative_eq!(g.f_star(0.25), 1.0 / 1.5, max_relative = 1e-14);
        assert_eq!(g.f_star(0.40), g.f_star(0.25));
        assert_eq!(g.f_star_slope(0.05), 1.0);
        assert_relative_eq!(g.f_star_slope(0.2), 31.0 / 6.0, max_relative = 1e-14);
        assert_eq!(g.f_star_slope(0.3), 0.0);
    }

    // Reference values in the next few tests were frozen from a 30-digit
    // scripted evaluation of the same closed formulas.

    #[test]
    fn flow_stress_frozen_values() {
        let g = gp();
        assert_relative_eq!(flow_stress(0.012, 750.0, &g), 442_732_245.491_484_8, max_relative = 1e-12);
        assert_relative_eq!(flow_stress(0.5, 0.0, &g), 684_164_953.106_098_8, max_relative = 1e-12);
        assert_relative_eq!(
            flow_stress_deriv(0.012, 750.0, &g),
            1.598_755_330_941_473e9,
            max_relative = 1e-10
        );
        // Saturated softening pins the flow stress at sigma0.
        assert_eq!(flow_stress(0.3, 1500.0, &g), g.sigma0);
        assert_eq!(flow_stress(0.3, 9000.0, &g), g.sigma0);
        assert_eq!(flow_stress_deriv(0.3, 1500.0, &g), 0.0);
        // Infinite c_c disables softening entirely.
        let g_inf = GursonParams { c_c: f64::INFINITY, ..g };
        assert_eq!(flow_stress(0.5, 500.0, &g_inf), flow_stress(0.5, 0.0, &g));
    }

    #[test]
    fn flow_stress_deriv_matches_finite_difference() {
        let g = gp();
        for &(e, c) in &[(0.0, 0.0), (0.05, 0.0), (0.3, 400.0), (1.2, 1200.0)] {
            let h = 1e-7;
            let fd = (flow_stress(e + h, c, &g) - flow_stress(e - h, c, &g)) / (2.0 * h);
            assert_relative_eq!(flow_stress_deriv(e, c, &g), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn yield_value_frozen_point() {
        let g = gp();
        let phi = yield_value(200.0e6, 300.0e6, 420.0e6, 0.01, &g);
        assert_relative_eq!(phi, -0.452_036_887_420_000_5, max_relative = 1e-12);
    }

    #[test]
    fn yield_root_on_deviatoric_axis() {
        // At p = 0 the yield condition solves in closed form:
        // q = sf * sqrt(1 + q3 fs^2 - 2 q1 fs); for fs=0.05, sf=500 MPa this
        // is exactly 462.5 MPa.
        let g = gp();
        let phi = yield_value(0.0, 462.5e6, 500.0e6, 0.05, &g);
        assert!(phi.abs() < 1e-12, "phi = {phi}");
    }

    #[test]
    fn yield_partials_match_finite_differences() {
        let g = gp();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = rng.gen_range(-8.0e8..8.0e8);
            let q = rng.gen_range(1.0e6..9.0e8);
            let sf = rng.gen_range(3.0e8..7.0e8);
            let fs = rng.gen_range(1.0e-4..0.4);
            let y = yield_partials(p, q, sf, fs, &g);
            let hs = 1e-5 * sf;
            let fd_p = (yield_value(p + hs, q, sf, fs, &g) - yield_value(p - hs, q, sf, fs, &g)) / (2.0 * hs);
            let fd_q = (yield_value(p, q + hs, sf, fs, &g) - yield_value(p, q - hs, sf, fs, &g)) / (2.0 * hs);
            let fd_sf = (yield_value(p, q, sf + hs, fs, &g) - yield_value(p, q, sf - hs, fs, &g)) / (2.0 * hs);
            let hf = 1e-6;
            let fd_fs = (yield_value(p, q, sf, fs + hf, &g) - yield_value(p, q, sf, fs - hf, &g)) / (2.0 * hf);
            assert_relative_eq!(y.dp, fd_p, max_relative = 1e-4, epsilon = 1e-14);
            assert_relative_eq!(y.dq, fd_q, max_relative = 1e-4, epsilon = 1e-14);
            assert_relative_eq!(y.dsf, fd_sf, max_relative = 1e-4, epsilon = 1e-14);
            assert_relative_eq!(y.dfs, fd_fs, max_relative = 1e-4, epsilon = 1e-12);
            // Second partials against first-partial differences.
            let fd_pp = (yield_partials(p + hs, q, sf, fs, &g).dp - yield_partials(p - hs, q, sf, fs, &g).dp) / (2.0 * hs);
            let fd_qq = (yield_partials(p, q + hs, sf, fs, &g).dq - yield_partials(p, q - hs, sf, fs, &g).dq) / (2.0 * hs);
            let fd_psf = (yield_partials(p, q, sf + hs, fs, &g).dp - yield_partials(p, q, sf - hs, fs, &g).dp) / (2.0 * hs);
            let fd_pfs = (yield_partials(p, q, sf, fs + hf, &g).dp - yield_partials(p, q, sf, fs - hf, &g).dp) / (2.0 * hf);
            let fd_qsf = (yield_partials(p, q, sf + hs, fs, &g).dq - yield_partials(p, q, sf - hs, fs, &g).dq) / (2.0 * hs);
            assert_relative_eq!(y.dpp, fd_pp, max_relative = 1e-4, epsilon = 1e-22);
            assert_relative_eq!(y.dqq, fd_qq, max_relative = 1e-4, epsilon = 1e-22);
            assert_relative_eq!(y.dpsf, fd_psf, max_relative = 1e-4, epsilon = 1e-22);
            assert_relative_eq!(y.dpfs, fd_pfs, max_relative = 1e-4, epsilon = 1e-20);
            assert_relative_eq!(y.dqsf, fd_qsf, max_relative = 1e-4, epsilon = 1e-22);
        }
    }

    #[test]
    fn nucleation_frozen_values() {
        let g = gp();
        assert_relative_eq!(nucleation_rate(1.0, &g), 0.199_471_140_200_716_3, max_relative = 1e-12);
        assert_relative_eq!(
            nucleation_increment(1.0, 0.005, 0.0, &g),
            9.973_557_010_035_817e-4,
            max_relative = 1e-12
        );
        // Hydrogen term alone: B * C_H * d_eps.
        let g_nostrain = GursonParams { f_n: 0.0, ..g };
        assert_relative_eq!(
            nucleation_increment(1.0, 0.005, 31.5, &g_nostrain),
            4.725e-4,
            max_relative = 1e-12
        );
        assert_relative_eq!(growth_increment(0.1, 2.0e-3), 1.8e-3, max_relative = 1e-14);
    }

    #[test]
    fn elastic_step_is_exact() {
        let g = gp();
        let e = el();
        let s0 = PointState::initial(&g);
        let d_eps = SymTensor2 { rr: -3.0e-4, zz: 1.0e-3, tt: -3.0e-4, rz: 1.0e-4 };
        let (s1, tang) = stress_update(&s0, d_eps, 10.0, &g, &e).unwrap();
        let expect = elastic_stress(&d_eps, &e);
        assert_eq!(s1.sigma, expect);
        assert_eq!(s1.eps_p_bar, 0.0);
        assert_eq!(s1.f, g.f0);
        assert_eq!(s1.c_h_seen, 10.0);
        let c = Modulus::elastic(&e);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(tang.0[i][j], c.0[i][j]);
            }
        }
    }

    #[test]
    fn return_map_frozen_solution() {
        // Trial stress diag(50, 680, 50) MPa + 30 MPa shear from eps_p_bar=0.05,
        // f=0.001, no hydrogen. Reference solved independently to 30 digits.
        let g = gp();
        let e = el();
        let state = PointState {
            sigma: SymTensor2::ZERO,
            eps_p_bar: 0.05,
            f: 0.001,
            eps_p_trace: 0.0,
            c_h_seen: 0.0,
            failed: false,
            fail_steps: 0,
        };
        let (srr, szz, stt, srz) = (50.0e6, 680.0e6, 50.0e6, 30.0e6);
        let d_eps = SymTensor2 {
            rr: (srr - e.nu * (szz + stt)) / e.e,
            zz: (szz - e.nu * (srr + stt)) / e.e,
            tt: (stt - e.nu * (srr + szz)) / e.e,
            rz: srz / (2.0 * e.g),
        };
        // Sanity: this strain really produces the intended trial stress.
        let trial = elastic_stress(&d_eps, &e);
        assert_relative_eq!(trial.zz, szz, max_relative = 1e-12);
        assert_relative_eq!(trial.rz, srz, max_relative = 1e-12);
        let (p_t, q_t) = invariants(&trial);
        assert_relative_eq!(p_t, 2.6e8, max_relative = 1e-12);
        assert_relative_eq!(q_t, 6.321_392_251_711_643e8, max_relative = 1e-12);

        let (s1, _) = stress_update(&state, d_eps, 0.0, &g, &e).unwrap();
        assert_relative_eq!(s1.eps_p_bar - 0.05, 4.882_025_205_203_752e-4, max_relative = 1e-8);
        assert_relative_eq!(s1.eps_p_trace, 9.042_518_608_115_238e-7, max_relative = 1e-8);
        assert_relative_eq!(s1.f, 1.000_903_346_792_097_7e-3, max_relative = 1e-8);
        assert_relative_eq!(s1.sigma.rr, 8.727_690_216_275_575e7, max_relative = 1e-8);
        assert_relative_eq!(s1.sigma.zz, 6.049_940_697_440_827e8, max_relative = 1e-8);
        assert_relative_eq!(s1.sigma.tt, 8.727_690_216_275_575e7, max_relative = 1e-8);
        assert_relative_eq!(s1.sigma.rz, 2.465_319_845_625_366e7, max_relative = 1e-8);
        // The updated stress sits on the yield surface.
        let (p, q) = invariants(&s1.sigma);
        let phi = yield_value(p, q, flow_stress(s1.eps_p_bar, 0.0, &g), g.f_star(s1.f), &g);
        assert!(phi.abs() < 1e-10, "phi = {phi}");
    }

    #[test]
    fn consistent_tangent_matches_finite_differences() {
        let g = gp();
        let e = el();
        let state = PointState {
            sigma: SymTensor2 { rr: 20.0e6, zz: 380.0e6, tt: 20.0e6, rz: 10.0e6 },
            eps_p_bar: 0.02,
            f: 5.0e-4,
            eps_p_trace: 0.0,
            c_h_seen: 0.0,
            failed: false,
            fail_steps: 0,
        };
        let d_eps = SymTensor2 { rr: -8.0e-4, zz: 2.4e-3, tt: -8.0e-4, rz: 3.0e-4 };
        let (_, tang) = stress_update(&state, d_eps, 100.0, &g, &e).unwrap();
        let dmax = tang.0.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
        let h = 1.0e-8;
        // Columns correspond to engineering strain components.
        for j in 0..4 {
            let mut pert = [0.0; 4];
            pert[j] = h;
            let to_tensor = |v: [f64; 4]| SymTensor2 { rr: v[0], zz: v[1], tt: v[2], rz: v[3] / 2.0 };
            let dp = d_eps + to_tensor(pert);
            let dm = d_eps + to_tensor([-pert[0], -pert[1], -pert[2], -pert[3]]);
            let sp = stress_update(&state, dp, 100.0, &g, &e).unwrap().0.sigma.to_stress_vec();
            let sm = stress_update(&state, dm, 100.0, &g, &e).unwrap().0.sigma.to_stress_vec();
            for i in 0..4 {
                let fd = (sp[i] - sm[i]) / (2.0 * h);
                assert!(
                    (tang.0[i][j] - fd).abs() <= 1.0e-4 * dmax,
                    "tangent[{i}][{j}] = {} vs fd {}",
                    tang.0[i][j],
                    fd
                );
            }
        }
    }

    #[test]
    fn implicit_and_oracle_routes_agree() {
        // Hydrogen-free, nucleation B off, per-step norm at the 2e-3 cap:
        // axial stress from the two routes stays within 0.5%.
        let g = GursonParams { b_h: 0.0, ..gp() };
        let e = el();
        let dir = SymTensor2 { rr: -4.5e-1, zz: 1.0, tt: -4.5e-1, rz: 1.0e-1 };
        let step = dir * (2.0e-3 / dir.norm());
        let path = vec![step; 30];
        let mut s_imp = PointState::initial(&g);
        for inc in &path {
            s_imp = stress_update(&s_imp, *inc, 0.0, &g, &e).unwrap().0;
        }
        let s_ora = oracle_integrate(&PointState::initial(&g), &path, 0.0, &g, &e, 60).unwrap();
        assert_relative_eq!(s_imp.sigma.zz, s_ora.sigma.zz, max_relative = 5e-3);
        // The other state variables track closely too; porosity is compared
        // through its change, since f itself barely moves from f0 here.
        assert_relative_eq!(s_imp.eps_p_bar, s_ora.eps_p_bar, max_relative = 1e-2);
        // Porosity growth is a first-order-in-step-size micro-quantity here
        // (~3e-5); the two routes approach each other under refinement.
        assert_relative_eq!(s_imp.f - g.f0, s_ora.f - g.f0, max_relative = 1e-1);
    }

    #[test]
    fn random_proportional_paths_agree_between_routes() {
        let devs = proportional_path_deviations(&gp(), &el(), 10, 7).unwrap();
        assert_eq!(devs.len(), 10);
        for (i, d) in devs.iter().enumerate() {
            assert!(*d <= 5.0e-3, "path {i}: axial deviation {d:.3e}");
        }
    }

    #[test]
    fn oracle_on_empty_or_elastic_paths() {
        let g = gp();
        let e = el();
        let s0 = PointState::initial(&g);
        let unchanged = oracle_integrate(&s0, &[], 0.0, &g, &e, 10).unwrap();
        assert_eq!(unchanged, s0);
        let tiny = SymTensor2 { rr: 1.0e-5, zz: 2.0e-5, tt: -1.0e-5, rz: 5.0e-6 };
        let s1 = oracle_integrate(&s0, &[tiny, tiny], 0.0, &g, &e, 7).unwrap();
        let expect = elastic_stress(&tiny, &e) * 2.0;
        assert_relative_eq!(s1.sigma.zz, expect.zz, max_relative = 1e-12);
        assert_eq!(s1.eps_p_bar, 0.0);
        assert_eq!(s1.f, g.f0);
    }

    #[test]
    fn near_perfect_plasticity_at_saturated_hydrogen() {
        // At C_H = c_c the matrix never hardens, so past yield the equivalent
        // stress holds near sigma0 (porosity correction is ~1e-4). Nucleation
        // is disabled so porosity cannot run away at saturated concentration.
        let g = GursonParams { b_h: 0.0, f_n: 0.0, ..gp() };
        let e = el();
        let mut s = PointState::initial(&g);
        for _ in 0..50 {
            s = uniaxial_step(&s, 2.0e-3, g.c_c, &g, &e).unwrap().0;
        }
        assert!(s.eps_p_bar > 0.08);
        let (_, q) = invariants(&s.sigma);
        assert_relative_eq!(q, g.sigma0, max_relative = 1e-2);
    }

    #[test]
    fn large_increment_survives_via_subincrementation() {
        let g = gp();
        let e = el();
        let s0 = PointState::initial(&g);
        let d_eps = SymTensor2 { rr: -0.05, zz: 0.12, tt: -0.05, rz: 0.0 };
        let (s1, _) = stress_update(&s0, d_eps, 0.0, &g, &e).unwrap();
        assert!(s1.eps_p_bar > 0.05);
        assert!(s1.f > g.f0);
        let (p, q) = invariants(&s1.sigma);
        let phi = yield_value(p, q, flow_stress(s1.eps_p_bar, 0.0, &g), g.f_star(s1.f), &g);
        assert!(phi.abs() < 1e-8, "phi = {phi}");
    }

    #[test]
    fn failure_ramp_reaches_zero_in_ten_increments() {
        let g = gp();
        let e = el();
        let sigma0 = SymTensor2 { rr: 1.0e8, zz: 4.0e8, tt: 1.0e8, rz: 0.0 };
        let mut s = PointState {
            sigma: sigma0,
            eps_p_bar: 0.9,
            f: 0.2,
            eps_p_trace: 0.01,
            c_h_seen: 0.0,
            failed: true,
            fail_steps: 1,
        };
        // fail_steps=1 means the stress already carries one 0.9 factor.
        let mut expected = 0.9;
        for k in 2..=10u32 {
            let (s2, tang) = stress_update(&s, SymTensor2::ZERO, 0.0, &g, &e).unwrap();
            let factor = 1.0 - f64::from(k) / 10.0;
            assert_relative_eq!(s2.sigma.zz, s.sigma.zz * factor / expected, max_relative = 1e-12);
            expected = factor;
            assert_eq!(s2.fail_steps, k);
            // Tangent stays a scaled elastic stiffness, floored for solvability.
            let want = Modulus::elastic(&e).scale(factor.max(1e-6));
            assert_relative_eq!(tang.0[1][1], want.0[1][1], max_relative = 1e-12);
            s = s2;
        }
        assert_eq!(s.sigma, SymTensor2::ZERO);
        // Once at zero the stress stays there and the tangent keeps its floor.
        for _ in 0..2 {
            let (s2, tang) = stress_update(&s, SymTensor2::ZERO, 0.0, &g, &e).unwrap();
            assert_eq!(s2.sigma, SymTensor2::ZERO);
            let want = Modulus::elastic(&e).scale(1e-6);
            assert_relative_eq!(tang.0[1][1], want.0[1][1], max_relative = 1e-12);
            s = s2;
        }
    }

    #[test]
    fn crossing_ff_triggers_failure_once() {
        let g = GursonParams { fc: 0.02, ff: 0.03, f0: 0.0295, ..gp() };
        let e = el();
        let mut s = PointState::initial(&g);
        let d_eps = SymTensor2 { rr: -2.0e-3, zz: 6.0e-3, tt: -2.0e-3, rz: 0.0 };
        let mut triggered = None;
        for i in 0..200 {
            let (s2, _) = stress_update(&s, d_eps, 0.0, &g, &e).unwrap();
            if s2.failed {
                triggered = Some((i, s2));
                break;
            }
            s = s2;
        }
        let (_, s_fail) = triggered.expect("porosity never reached ff");
        assert_eq!(s_fail.fail_steps, 1);
        assert!(s_fail.f >= g.ff);
        // Stress right at the trigger is the converged value scaled once by 0.9.
        assert!(s_fail.sigma.zz > 0.0);
        assert!(s_fail.sigma.zz < s.sigma.zz + 1.0e9);
    }

    #[test]
    fn uniaxial_driver_holds_lateral_stress_at_zero() {
        let g = gp();
        let e = el();
        let mut s = PointState::initial(&g);
        for _ in 0..30 {
            let (s2, _, _) = uniaxial_step(&s, 1.0e-3, 0.0, &g, &e).unwrap();
            s = s2;
        }
        assert!(s.sigma.rr.abs() <= 1.0e-6 * g.sigma0 * 10.0, "sigma_rr = {}", s.sigma.rr);
        assert!(s.sigma.tt.abs() <= 1.0e-6 * g.sigma0 * 10.0);
        assert!(s.sigma.zz > 4.2e8);
        assert!(s.eps_p_bar > 0.02);
    }

    #[test]
    fn uniaxial_engineering_stress_peaks_near_considere_load() {
        // For this hardening law the engineering-stress maximum of a uniform
        // bar computes in closed form to about 508.8 MPa.
        let g = gp();
        let e = el();
        let mut s = PointState::initial(&g);
        let mut lateral = 0.0;
        let mut peak = 0.0f64;
        for _ in 0..100 {
            let (s2, _, x) = uniaxial_step(&s, 2.5e-3, 0.0, &g, &e).unwrap();
            s = s2;
            lateral += x;
            let eng = s.sigma.zz * (2.0 * lateral).exp();
            peak = peak.max(eng);
        }
        assert!(peak > 5.00e8 && peak < 5.17e8, "peak engineering stress = {peak}");
    }

    #[test]
    fn hydrogen_softening_lowers_the_stress_response() {
        let g = gp();
        let e = el();
        let mut dry = PointState::initial(&g);
        let mut wet = PointState::initial(&g);
        for _ in 0..25 {
            dry = uniaxial_step(&dry, 1.0e-3, 0.0, &g, &e).unwrap().0;
            wet = uniaxial_step(&wet, 1.0e-3, 750.0, &g, &e).unwrap().0;
        }
        assert!(wet.sigma.zz < dry.sigma.zz);
        assert!(wet.f > dry.f, "hydrogen must accelerate nucleation: {} vs {}", wet.f, dry.f);
    }

    proptest! {
        #[test]
        fn flow_stress_never_below_sigma0(e in 0.0..3.0f64, c in 0.0..1.0e5f64) {
            let g = gp();
            prop_assert!(flow_stress(e, c, &g) >= g.sigma0 * (1.0 - 1e-12));
        }

        #[test]
        fn yield_is_even_in_pressure(
            p in -9.0e8..9.0e8f64, q in 0.0..9.0e8f64,
            sf in 3.0e8..8.0e8f64, fs in 0.0..0.6f64) {
            let g = gp();
            let a = yield_value(p, q, sf, fs, &g);
            let b = yield_value(-p, q, sf, fs, &g);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn plastic_updates_land_on_the_yield_surface(
            ezz in 5.0e-3..1.2e-2f64, biax in -0.2..0.35f64, shear in 0.0..0.3f64,
            ch in 0.0..800.0f64) {
            // The domain is capped at moderate size and triaxiality/hydrogen:
            // bigger increments may legitimately fall back to internal
            // sub-increments (breaking the one-step normality reconstruction
            // below), and beyond the stability limit the damage feedback
            // outruns elastic unloading and no implicit solution exists.
            // Capping the volumetric part keeps the trial pressure below the
            // growth-driven branch of that instability (~1.5 GPa here).
            prop_assume!(ezz * (1.0 + 2.0 * biax) < 8.0e-3);
            let g = gp();
            let e = el();
            let s0 = PointState::initial(&g);
            let d_eps = SymTensor2 {
                rr: biax * ezz, zz: ezz, tt: biax * ezz, rz: shear * ezz };
            let (s1, _) = stress_update(&s0, d_eps, ch, &g, &e).unwrap();
            prop_assert!(s1.eps_p_bar > 0.0);
            prop_assert!(s1.f >= 0.0 && s1.f < 1.0);
            // Monotone damage in tension, and the accumulated volumetric
            // plastic strain is consistent with the porosity growth direction.
            prop_assert!(s1.f >= s0.f || s1.eps_p_trace < 0.0);
            let (p, q) = invariants(&s1.sigma);
            let sf = flow_stress(s1.eps_p_bar, ch, &g);
            let phi = yield_value(p, q, sf, g.f_star(s1.f), &g);
            prop_assert!(phi.abs() < 1e-8, "phi = {}", phi);
            // Direction (normality) residual, reconstructed from the state:
            // dep*dPhi/dq - deq*dPhi/dp = 0 in scaled form.
            let trial = s0.sigma + elastic_stress(&d_eps, &e);
            let (_, q_t) = invariants(&trial);
            let dep = s1.eps_p_trace - s0.eps_p_trace;
            let deq = (q_t - q) / (3.0 * e.g);
            let y_q = 2.0 * q / (sf * sf);
            let eta = -1.5 * g.q2 * p / sf;
            let y_p = -(3.0 * g.q1 * g.q2 * g.f_star(s1.f) / sf) * eta.sinh();
            prop_assert!((dep * y_q - deq * y_p).abs() * sf < 1e-9,
                "direction residual = {}", (dep * y_q - deq * y_p) * sf);
        }
    }
}
