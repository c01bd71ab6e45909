//! Hydrogen partitioning between lattice and trap sites, effective diffusivity,
//! and hydrogen-induced lattice dilatation.
//!
//! Trap sites live at dislocations; the trap density grows with plastic strain
//! through the dislocation density `ρ(ε̄p) = ρ0 + 2γ·min(ε̄p, ε_sat)`. Lattice
//! and trap occupancy are related by Oriani equilibrium,
//! `θ_T/(1−θ_T) = K_T·θ_L/(1−θ_L)`, with `K_T = exp(W_B/(R·T))` and `W_B` the
//! (positive) trap binding energy. All site densities are carried in molar form
//! (mol/m³): `n_L = β/V_M` for the lattice and `n_T = α·N_T/N_A` for traps.

use crate::error::{Error, Result};
use crate::tensor::SymTensor2;

/// Universal gas constant, J/(mol·K).
pub const R_GAS: f64 = 8.314;
/// Avogadro's number, 1/mol.
pub const AVOGADRO: f64 = 6.022e23;

/// Trap-chemistry and diffusion parameters. SI base units throughout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapParams {
    /// Trap binding energy, J/mol, stored as a positive magnitude.
    pub w_b: f64,
    /// Trap sites per trap (dislocation) site count.
    pub alpha: f64,
    /// Lattice (interstitial) sites per solvent atom.
    pub beta: f64,
    /// Molar volume of the host lattice, m³/mol.
    pub v_m: f64,
    /// Partial molar volume of hydrogen in solution, m³/mol.
    pub v_h: f64,
    /// Lattice diffusion coefficient of hydrogen, m²/s.
    pub diffusivity: f64,
    /// Absolute temperature, K.
    pub temperature: f64,
    /// Lattice spacing along a dislocation line, m (converts dislocation
    /// density to trap-site count).
    pub lattice_spacing: f64,
    /// Dislocation density at zero plastic strain, m⁻².
    pub rho0: f64,
    /// Dislocation density growth rate with plastic strain, m⁻².
    pub gamma: f64,
    /// Plastic strain beyond which the dislocation density saturates.
    pub eps_p_sat: f64,
}

impl TrapParams {
    /// Parameter set for the X65-class ferritic pipeline steel used by the
    /// bundled presets.
    pub fn x65() -> Self {
        TrapParams {
            w_b: 20.2e3,
            alpha: 1.0,
            beta: 1.0,
            v_m: 7.116e-6,
            v_h: 2.0e-6,
            diffusivity: 1.271e-8,
            temperature: 300.0,
            lattice_spacing: 2.86e-10,
            rho0: 1.0e10,
            gamma: 1.0e16,
            eps_p_sat: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("W_B", self.w_b),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("V_M", self.v_m),
            ("V_H", self.v_h),
            ("D", self.diffusivity),
            ("T", self.temperature),
            ("lattice spacing", self.lattice_spacing),
            ("eps_p_sat", self.eps_p_sat),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("rho0", self.rho0), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Molar density of lattice interstitial sites, mol/m³.
    pub fn n_lattice(&self) -> f64 {
        self.beta / self.v_m
    }

    /// Oriani equilibrium constant (dimensionless, > 1 for binding traps).
    pub fn k_trap(&self) -> f64 {
        (self.w_b / (R_GAS * self.temperature)).exp()
    }

    /// Molar density of trap sites at a given trap-site number density.
    pub fn n_trap(&self, n_t_number: f64) -> f64 {
        self.alpha * n_t_number / AVOGADRO
    }
}

/// Hydrogen state at one material point. Concentrations in mol/m³, occupancies
/// dimensionless, `n_t` is the trap-site *number* density in m⁻³.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HydrogenPointState {
    pub c_l: f64,
    pub c_t: f64,
    pub n_t: f64,
    pub theta_l: f64,
    pub theta_t: f64,
}

impl HydrogenPointState {
    pub fn total(&self) -> f64 {
        self.c_l + self.c_t
    }
}

/// Trap-site number density (m⁻³) from plastic strain:
/// `N_T = sqrt(2)·ρ/d` with `ρ = ρ0 + 2γ·min(ε̄p, ε_sat)`.
pub fn trap_density(eps_p_bar: f64, p: &TrapParams) -> f64 {
    debug_assert!(eps_p_bar >= 0.0);
    let rho = p.rho0 + 2.0 * p.gamma * eps_p_bar.min(p.eps_p_sat);
    std::f64::consts::SQRT_2 * rho / p.lattice_spacing
}

/// Equilibrium partitioning for a given lattice concentration and trap density.
///
/// Errors if `c_l` is negative or at/above the lattice saturation `n_L`.
pub fn trap_equilibrium(c_l: f64, n_t: f64, p: &TrapParams) -> Result<HydrogenPointState> {
    let n_l = p.n_lattice();
    if !(c_l >= 0.0) {
        return Err(Error::Hydrogen(format!("negative lattice concentration {c_l}")));
    }
    if c_l >= n_l {
        return Err(Error::Hydrogen(format!(
            "lattice concentration {c_l} mol/m^3 saturates the lattice (n_L = {n_l})"
        )));
    }
    let theta_l = c_l / n_l;
    // θ_T/(1−θ_T) = K_T θ_L/(1−θ_L), solved in closed form.
    let x = p.k_trap() * theta_l / (1.0 - theta_l);
    let theta_t = x / (1.0 + x);
    let c_t = theta_t * p.n_trap(n_t);
    Ok(HydrogenPointState { c_l, c_t, n_t, theta_l, theta_t })
}

/// `(∂C_T/∂C_L, D_eff)` at the given lattice concentration and trap density.
///
/// `∂C_T/∂C_L = n_T·K_T·n_L / (n_L + (K_T−1)·C_L)²` and
/// `D_eff = D / (1 + ∂C_T/∂C_L)`.
pub fn transport_coefficients(c_l: f64, n_t: f64, p: &TrapParams) -> Result<(f64, f64)> {
    let n_l = p.n_lattice();
    if !(c_l >= 0.0) || c_l >= n_l {
        return Err(Error::Hydrogen(format!("lattice concentration {c_l} out of [0, n_L)")));
    }
    let k_t = p.k_trap();
    let n_t_mol = p.n_trap(n_t);
    let den = n_l + (k_t - 1.0) * c_l;
    let dct_dcl = n_t_mol * k_t * n_l / (den * den);
    let d_eff = p.diffusivity / (1.0 + dct_dcl);
    Ok((dct_dcl, d_eff))
}

/// Trapped concentration as a closed-form function of `c_l` (mol/m³); the same
/// function `trap_equilibrium` evaluates, exposed for the transport assembly.
pub fn trapped_concentration(c_l: f64, n_t: f64, p: &TrapParams) -> f64 {
    let n_l = p.n_lattice();
    let k_t = p.k_trap();
    p.n_trap(n_t) * k_t * c_l / (n_l + (k_t - 1.0) * c_l)
}

/// Isotropic lattice-dilatation strain increment caused by a change `ΔC_H` of
/// dissolved hydrogen at current concentration `c_h`. Each diagonal component is
/// `[(V_H/3V_M) / (1/V_M + C_H·V_H/(3V_M))]·ΔC_H`.
pub fn hydrogen_strain_increment(delta_c_h: f64, c_h: f64, p: &TrapParams) -> SymTensor2 {
    let a = p.v_h / (3.0 * p.v_m);
    let factor = a / (1.0 / p.v_m + c_h * a);
    SymTensor2::spherical(factor * delta_c_h)
}

/// Split a total hydrogen content into the equilibrium lattice part at the
/// given plastic strain: solves `C_L + C_T(C_L) = C_total` by bisection.
///
/// Errors if the total exceeds lattice + trap capacity.
pub fn total_to_lattice(c_total: f64, eps_p_bar: f64, p: &TrapParams) -> Result<f64> {
    if !(c_total >= 0.0) {
        return Err(Error::Hydrogen(format!("negative total concentration {c_total}")));
    }
    if c_total == 0.0 {
        return Ok(0.0);
    }
    let n_t = trap_density(eps_p_bar, p);
    let n_l = p.n_lattice();
    let capacity = n_l + p.n_trap(n_t);
    if c_total >= capacity {
        return Err(Error::Hydrogen(format!(
            "total concentration {c_total} mol/m^3 exceeds lattice+trap capacity {capacity}"
        )));
    }
    let g = |c_l: f64| c_l + trapped_concentration(c_l, n_t, p) - c_total;
    // g is strictly increasing; root lies in [0, min(c_total, n_L)).
    let mut lo = 0.0;
    let mut hi = c_total.min(n_l * (1.0 - 1e-14));
    debug_assert!(g(lo) <= 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Frozen oracle values below were computed independently (high-precision
    // scripted evaluation of the same closed formulas) before the module was
    // written.

    #[test]
    fn lattice_site_density() {
        assert_relative_eq!(TrapParams::x65().n_lattice(), 1.4052838673e5, max_relative = 1e-9);
    }

    #[test]
    fn equilibrium_constant_at_room_temperature() {
        assert_relative_eq!(TrapParams::x65().k_trap(), 3290.4815174, max_relative = 1e-9);
    }

    #[test]
    fn trap_density_at_zero_and_saturated_strain() {
        let p = TrapParams::x65();
        assert_relative_eq!(trap_density(0.0, &p), 4.9448026656e19, max_relative = 1e-9);
        assert_relative_eq!(trap_density(0.5, &p), 4.9448076104e25, max_relative = 1e-9);
        // Saturation: density constant beyond eps_p_sat.
        assert_eq!(trap_density(0.5, &p), trap_density(0.8, &p));
        assert_eq!(trap_density(0.5, &p), trap_density(5.0, &p));
    }

    #[test]
    fn equilibrium_partitioning_uncharged_traps() {
        // C_L = 31.5 mol/m³ at zero plastic strain.
        let p = TrapParams::x65();
        let n_t = trap_density(0.0, &p);
        let h = trap_equilibrium(31.5, n_t, &p).unwrap();
        assert_relative_eq!(h.theta_l, 2.24154e-4, max_relative = 1e-6);
        assert_relative_eq!(h.theta_t, 0.4245399069, max_relative = 1e-9);
        assert_relative_eq!(h.c_t, 3.4859947912e-5, max_relative = 1e-9);
    }

    #[test]
    fn oriani_residual_is_machine_zero() {
        let p = TrapParams::x65();
        for &epb in &[0.0, 0.1, 0.3, 0.5, 1.0] {
            for &cl in &[0.1, 1.0, 31.5, 126.0, 1000.0] {
                let h = trap_equilibrium(cl, trap_density(epb, &p), &p).unwrap();
                let lhs = h.theta_t / (1.0 - h.theta_t);
                let rhs = p.k_trap() * h.theta_l / (1.0 - h.theta_l);
                assert!(
                    ((lhs - rhs) / rhs).abs() < 1e-12,
                    "equilibrium residual too large at epb={epb} cl={cl}"
                );
            }
        }
    }

    #[test]
    fn transport_coefficients_at_saturated_traps() {
        // ε̄p = 0.5, C_L → 0: n_T = 82.1 mol/m³, ∂C_T/∂C_L = 1.92, D_eff = 0.342·D.
        let p = TrapParams::x65();
        let n_t = trap_density(0.5, &p);
        assert_relative_eq!(p.n_trap(n_t), 82.1123814, max_relative = 1e-8);
        let (dct, d_eff) = transport_coefficients(0.0, n_t, &p).unwrap();
        assert_relative_eq!(dct, 1.9226668701, max_relative = 1e-9);
        assert_relative_eq!(d_eff, 0.3421532609 * p.diffusivity, max_relative = 1e-9);
    }

    #[test]
    fn capacity_derivative_matches_finite_difference() {
        let p = TrapParams::x65();
        let n_t = trap_density(0.3, &p);
        for &cl in &[0.5, 5.0, 31.5, 200.0] {
            let (dct, _) = transport_coefficients(cl, n_t, &p).unwrap();
            let h = 1e-4 * cl;
            let fd = (trapped_concentration(cl + h, n_t, &p)
                - trapped_concentration(cl - h, n_t, &p))
                / (2.0 * h);
            assert_relative_eq!(dct, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn dilatation_increment_for_precharge() {
        // ΔC_H = C_H = 31.5 mol/m³ → 2.09996e-5 on each diagonal component.
        let e = hydrogen_strain_increment(31.5, 31.5, &TrapParams::x65());
        assert_relative_eq!(e.rr, 2.0999559009e-5, max_relative = 1e-9);
        assert_eq!(e.rr, e.zz);
        assert_eq!(e.rr, e.tt);
        assert_eq!(e.rz, 0.0);
        assert_relative_eq!(e.trace(), 3.0 * e.rr, max_relative = 1e-15);
    }

    #[test]
    fn total_splits_between_lattice_and_traps() {
        let p = TrapParams::x65();
        // Unstrained traps hold almost nothing.
        let cl0 = total_to_lattice(31.5, 0.0, &p).unwrap();
        assert_relative_eq!(cl0, 31.5 - 3.486e-5, max_relative = 1e-6);
        // Saturated dislocation traps hold most of it.
        let cl5 = total_to_lattice(31.5, 0.5, &p).unwrap();
        assert_relative_eq!(cl5, 12.6895716516, max_relative = 1e-6);
        let ct5 = trapped_concentration(cl5, trap_density(0.5, &p), &p);
        assert_relative_eq!(ct5, 18.8104283484, max_relative = 1e-6);
    }

    #[test]
    fn saturation_and_negative_inputs_rejected() {
        let p = TrapParams::x65();
        let n_t = trap_density(0.0, &p);
        assert!(trap_equilibrium(-1.0, n_t, &p).is_err());
        assert!(trap_equilibrium(p.n_lattice(), n_t, &p).is_err());
        assert!(total_to_lattice(-5.0, 0.0, &p).is_err());
        assert!(total_to_lattice(2.0 * p.n_lattice(), 0.0, &p).is_err());
    }

    proptest! {
        #[test]
        fn trapped_concentration_monotone_and_saturating(
            cl in 0.0..1.0e5f64, epb in 0.0..2.0f64) {
            let p = TrapParams::x65();
            let n_t = trap_density(epb, &p);
            let c1 = trapped_concentration(cl, n_t, &p);
            let c2 = trapped_concentration(cl * 1.01 + 1e-9, n_t, &p);
            prop_assert!(c2 >= c1);
            prop_assert!(c1 <= p.n_trap(n_t) * (1.0 + 1e-12));
        }

        #[test]
        fn effective_diffusivity_bounded(cl in 0.0..1.0e5f64, epb in 0.0..2.0f64) {
            let p = TrapParams::x65();
            let n_t = trap_density(epb, &p);
            let (dct, d_eff) = transport_coefficients(cl, n_t, &p).unwrap();
            prop_assert!(dct >= 0.0);
            prop_assert!(d_eff > 0.0 && d_eff <= p.diffusivity);
        }

        #[test]
        fn total_to_lattice_round_trips(total in 1e-6..5.0e4f64, epb in 0.0..2.0f64) {
            let p = TrapParams::x65();
            let cl = total_to_lattice(total, epb, &p).unwrap();
            let back = cl + trapped_concentration(cl, trap_density(epb, &p), &p);
            prop_assert!((back - total).abs() <= 1e-9 * total,
                "round trip {back} vs {total}");
        }
    }
}
