//! Symmetric second-order tensors and isotropic elasticity in the axisymmetric
//! setting.
//!
//! [`SymTensor2`] carries the four components that survive axisymmetry,
//! `(rr, zz, tt, rz)`, with `rz` stored as the *tensor* shear component (not the
//! engineering shear `γ = 2·ε_rz`). Voigt/engineering conversions happen only at
//! the finite-element boundary via [`SymTensor2::to_eng_strain`] and the 4×4
//! [`Modulus`], which follows the usual engineering convention (its shear column
//! multiplies `γ`).
//!
//! Sign convention used throughout the crate: the mean stress
//! `p = tr(σ)/3` is **positive in tension**.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Symmetric tensor in cylindrical components `(rr, zz, tt, rz)`; `rz` is the
/// tensor component.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor2 {
    pub rr: f64,
    pub zz: f64,
    pub tt: f64,
    pub rz: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 { rr: 0.0, zz: 0.0, tt: 0.0, rz: 0.0 };

    pub fn new(rr: f64, zz: f64, tt: f64, rz: f64) -> Self {
        SymTensor2 { rr, zz, tt, rz }
    }

    /// `s` on every diagonal component, zero shear.
    pub fn spherical(s: f64) -> Self {
        SymTensor2 { rr: s, zz: s, tt: s, rz: 0.0 }
    }

    pub fn trace(&self) -> f64 {
        self.rr + self.zz + self.tt
    }

    /// Deviatoric part.
    pub fn dev(&self) -> Self {
        let m = self.trace() / 3.0;
        SymTensor2 { rr: self.rr - m, zz: self.zz - m, tt: self.tt - m, rz: self.rz }
    }

    /// Full contraction `a : b` (the off-diagonal pair counts twice).
    pub fn double_dot(&self, o: &SymTensor2) -> f64 {
        self.rr * o.rr + self.zz * o.zz + self.tt * o.tt + 2.0 * self.rz * o.rz
    }

    /// Frobenius norm `sqrt(a : a)`.
    pub fn norm(&self) -> f64 {
        self.double_dot(self).sqrt()
    }

    /// Engineering (Voigt) strain vector `[rr, zz, tt, 2·rz]`.
    pub fn to_eng_strain(&self) -> [f64; 4] {
        [self.rr, self.zz, self.tt, 2.0 * self.rz]
    }

    /// Stress vector `[rr, zz, tt, rz]` work-conjugate to the engineering
    /// strain vector above.
    pub fn to_stress_vec(&self) -> [f64; 4] {
        [self.rr, self.zz, self.tt, self.rz]
    }

    pub fn from_stress_vec(v: [f64; 4]) -> Self {
        SymTensor2 { rr: v[0], zz: v[1], tt: v[2], rz: v[3] }
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.rr + o.rr, self.zz + o.zz, self.tt + o.tt, self.rz + o.rz)
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, o: SymTensor2) {
        *self = *self + o;
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.rr - o.rr, self.zz - o.zz, self.tt - o.tt, self.rz - o.rz)
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, k: f64) -> SymTensor2 {
        SymTensor2::new(self.rr * k, self.zz * k, self.tt * k, self.rz * k)
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        self * -1.0
    }
}

/// Stress invariants `(p, q)`: mean stress `p = tr(σ)/3` (tension positive) and
/// von Mises equivalent `q = sqrt(3/2 s:s)`.
pub fn invariants(sigma: &SymTensor2) -> (f64, f64) {
    let p = sigma.trace() / 3.0;
    let s = sigma.dev();
    let q = (1.5 * s.double_dot(&s)).sqrt();
    (p, q)
}

/// Isotropic elastic constants. `k` and `g` are derived from `(e, nu)` once at
/// construction so hot loops never recompute them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticConstants {
    pub e: f64,
    pub nu: f64,
    pub k: f64,
    pub g: f64,
}

impl ElasticConstants {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0) {
            return Err(Error::InvalidParam(format!("Young's modulus must be positive, got {e}")));
        }
        if !(nu > -1.0 && nu < 0.5) {
            return Err(Error::InvalidParam(format!(
                "Poisson ratio must lie in (-1, 0.5), got {nu}"
            )));
        }
        Ok(ElasticConstants {
            e,
            nu,
            k: e / (3.0 * (1.0 - 2.0 * nu)),
            g: e / (2.0 * (1.0 + nu)),
        })
    }
}

/// Linear-elastic stress increment `Δσ = K tr(Δε) I + 2G dev(Δε)`.
pub fn elastic_stress(delta_eps: &SymTensor2, c: &ElasticConstants) -> SymTensor2 {
    let vol = c.k * delta_eps.trace();
    delta_eps.dev() * (2.0 * c.g) + SymTensor2::spherical(vol)
}

/// 4×4 constitutive matrix in engineering (Voigt) notation, basis
/// `(rr, zz, tt, rz)`; the shear column multiplies `γ_rz = 2 ε_rz` and the
/// shear row yields the single stress component `σ_rz`.
#[derive(Clone, Copy, Debug)]
pub struct Modulus(pub [[f64; 4]; 4]);

impl Modulus {
    pub const ZERO: Modulus = Modulus([[0.0; 4]; 4]);

    pub fn elastic(c: &ElasticConstants) -> Self {
        let (k, g) = (c.k, c.g);
        let a = k + 4.0 * g / 3.0;
        let b = k - 2.0 * g / 3.0;
        Modulus([
            [a, b, b, 0.0],
            [b, a, b, 0.0],
            [b, b, a, 0.0],
            [0.0, 0.0, 0.0, g],
        ])
    }

    /// Matrix-vector product on an engineering strain vector.
    pub fn apply(&self, eng: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row[0] * eng[0] + row[1] * eng[1] + row[2] * eng[2] + row[3] * eng[3];
        }
        out
    }

    pub fn scale(&self, k: f64) -> Modulus {
        let mut m = self.0;
        for row in &mut m {
            for v in row {
                *v *= k;
            }
        }
        Modulus(m)
    }
}

/// Full six-component symmetric tensor `(xx, yy, zz, xy, yz, zx)` for checks
/// that need arbitrary 3-D orientations (rotational invariance of the stress
/// invariants, for instance).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym6(pub [f64; 6]);

impl Sym6 {
    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    pub fn double_dot(&self, o: &Sym6) -> f64 {
        let a = &self.0;
        let b = &o.0;
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5])
    }

    fn dev(&self) -> Sym6 {
        let m = self.trace() / 3.0;
        let a = self.0;
        Sym6([a[0] - m, a[1] - m, a[2] - m, a[3], a[4], a[5]])
    }

    /// `(p, q)` invariants; identical definitions to [`invariants`].
    pub fn invariants(&self) -> (f64, f64) {
        let p = self.trace() / 3.0;
        let d = self.dev();
        (p, (1.5 * d.double_dot(&d)).sqrt())
    }

    /// `Q σ Qᵀ` for a 3×3 rotation matrix `q` in row-major order.
    pub fn rotated(&self, q: &[[f64; 3]; 3]) -> Sym6 {
        let a = self.0;
        let full = [
            [a[0], a[3], a[5]],
            [a[3], a[1], a[4]],
            [a[5], a[4], a[2]],
        ];
        let mut tmp = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                tmp[i][j] = (0..3).map(|k| q[i][k] * full[k][j]).sum();
            }
        }
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| tmp[i][k] * q[j][k]).sum();
            }
        }
        Sym6([out[0][0], out[1][1], out[2][2], out[0][1], out[1][2], out[0][2]])
    }
}

/// Rotation matrix from an axis (unit vector) and angle, for test use.
pub fn rotation_about(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn steel() -> ElasticConstants {
        ElasticConstants::new(200e9, 0.3).unwrap()
    }

    #[test]
    fn invariants_of_uniaxial_stress() {
        // σ_zz = 420 MPa uniaxial: p = 140 MPa, q = 420 MPa.
        let s = SymTensor2::new(0.0, 420e6, 0.0, 0.0);
        let (p, q) = invariants(&s);
        assert_relative_eq!(p, 140e6, max_relative = 1e-14);
        assert_relative_eq!(q, 420e6, max_relative = 1e-14);
    }

    #[test]
    fn invariants_of_pure_shear() {
        let s = SymTensor2::new(0.0, 0.0, 0.0, 100e6);
        let (p, q) = invariants(&s);
        assert_eq!(p, 0.0);
        // q = sqrt(3) * |σ_rz| for pure shear.
        assert_relative_eq!(q, 3f64.sqrt() * 100e6, max_relative = 1e-14);
    }

    #[test]
    fn uniaxial_strain_increment_stress() {
        // Δε_zz = 0.001, E = 200 GPa, ν = 0.3:
        // Δσ_zz = 269.23 MPa, Δσ_rr = Δσ_tt = 115.38 MPa.
        let d = SymTensor2::new(0.0, 1.0e-3, 0.0, 0.0);
        let s = elastic_stress(&d, &steel());
        assert_relative_eq!(s.zz, 2.6923076923e8, max_relative = 1e-10);
        assert_relative_eq!(s.rr, 1.1538461538e8, max_relative = 1e-10);
        assert_relative_eq!(s.tt, 1.1538461538e8, max_relative = 1e-10);
        assert_eq!(s.rz, 0.0);
    }

    #[test]
    fn pure_shear_strain_increment_stress() {
        // Tensor shear ε_rz = 0.001 (γ = 0.002): σ_rz = 2G·0.001 = 153.85 MPa,
        // diagonal untouched.
        let d = SymTensor2::new(0.0, 0.0, 0.0, 1.0e-3);
        let s = elastic_stress(&d, &steel());
        assert_relative_eq!(s.rz, 1.5384615385e8, max_relative = 1e-10);
        assert_eq!(s.rr, 0.0);
        assert_eq!(s.zz, 0.0);
        assert_eq!(s.tt, 0.0);
    }

    #[test]
    fn elastic_modulus_matches_elastic_stress() {
        let c = steel();
        let m = Modulus::elastic(&c);
        let d = SymTensor2::new(3.0e-4, -1.0e-4, 2.0e-4, 5.0e-4);
        let via_matrix = m.apply(d.to_eng_strain());
        let direct = elastic_stress(&d, &c);
        for (a, b) in via_matrix.iter().zip(direct.to_stress_vec()) {
            assert_relative_eq!(*a, b, max_relative = 1e-13);
        }
    }

    #[test]
    fn elastic_constants_validation() {
        assert!(ElasticConstants::new(-1.0, 0.3).is_err());
        assert!(ElasticConstants::new(200e9, 0.5).is_err());
        assert!(ElasticConstants::new(200e9, -1.0).is_err());
    }

    #[test]
    fn invariants_rotation_invariant_in_3d() {
        // The axisymmetric invariants must agree with the full 3-D definition
        // under arbitrary rotation.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..500 {
            let t = Sym6([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]);
            let axis = [
                rng.gen_range(-1.0..1.0f64),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            if axis.iter().map(|x| x * x).sum::<f64>() < 1e-3 {
                continue;
            }
            let q = rotation_about(axis, rng.gen_range(0.0..std::f64::consts::TAU));
            let (p0, q0) = t.invariants();
            let (p1, q1) = t.rotated(&q).invariants();
            assert_relative_eq!(p0, p1, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(q0, q1, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn axisym_tensor_embeds_in_3d() {
        // (rr, zz, tt, rz) embedded as a full tensor gives identical invariants.
        let t4 = SymTensor2::new(2.0e8, -1.0e8, 0.5e8, 0.7e8);
        let t6 = Sym6([t4.rr, t4.tt, t4.zz, 0.0, 0.0, t4.rz]);
        // Embedding: x=r, y=θ, z=z; the only shear is (x,z) = rz.
        let (p4, q4) = invariants(&t4);
        let (p6, q6) = t6.invariants();
        assert_relative_eq!(p4, p6, max_relative = 1e-14);
        assert_relative_eq!(q4, q6, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn dev_plus_spherical_reconstructs(rr in -1.0..1.0f64, zz in -1.0..1.0f64,
                                           tt in -1.0..1.0f64, rz in -1.0..1.0f64) {
            let t = SymTensor2::new(rr, zz, tt, rz);
            let rebuilt = t.dev() + SymTensor2::spherical(t.trace() / 3.0);
            prop_assert!((rebuilt.rr - t.rr).abs() < 1e-15);
            prop_assert!((rebuilt.zz - t.zz).abs() < 1e-15);
            prop_assert!((rebuilt.tt - t.tt).abs() < 1e-15);
            prop_assert!((rebuilt.rz - t.rz).abs() < 1e-15);
            prop_assert!(t.dev().trace().abs() < 1e-15);
        }

        #[test]
        fn elastic_stress_is_linear(a in -1e-3..1e-3f64, b in -1e-3..1e-3f64,
                                    c in -1e-3..1e-3f64, d in -1e-3..1e-3f64,
                                    k in -2.0..2.0f64) {
            let el = ElasticConstants::new(200e9, 0.3).unwrap();
            let e1 = SymTensor2::new(a, b, c, d);
            let scaled = elastic_stress(&(e1 * k), &el);
            let direct = elastic_stress(&e1, &el) * k;
            let tol = 1e-9 * (direct.norm() + 1.0);
            prop_assert!((scaled - direct).norm() <= tol);
        }
    }
}
