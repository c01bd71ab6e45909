//! Structured axisymmetric quad mesh of one quadrant of a round tensile bar.
//!
//! The modeled domain is `0 <= r <= R_outer(z)`, `0 <= z <= half_gage`, with
//! symmetry planes on the axis and the mid-plane. A shallow cosine radius
//! reduction near the mid-plane seeds necking, and the axial spacing is graded
//! geometrically (3:1, fine toward the mid-plane) where the gradients live.

use crate::error::{Error, Result};

/// Node `(i, j)` has id `j * (nr + 1) + i`: radial index fastest, which keeps
/// the assembled half-bandwidth at `nr + 2` node columns.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub nr: usize,
    pub nz: usize,
    pub radius: f64,
    pub half_gage: f64,
    pub imperfection: f64,
    /// Node coordinates `(r, z)` in the reference configuration.
    pub coords: Vec<[f64; 2]>,
    /// Counter-clockwise corner nodes of each 4-node quad.
    pub elems: Vec<[usize; 4]>,
    pub axis_nodes: Vec<usize>,
    pub midplane_nodes: Vec<usize>,
    pub top_nodes: Vec<usize>,
    pub surface_nodes: Vec<usize>,
    /// Elements touching the mid-plane (the necking row).
    pub midplane_row_elems: Vec<usize>,
}

/// Fraction of the half-gage over which the radius imperfection blends out.
pub const IMPERFECTION_EXTENT: f64 = 0.4;
/// Axial coarse-to-fine grading ratio (coarsest cell over finest).
pub const AXIAL_GRADING: f64 = 3.0;

/// Outer radius profile: a cosine-blended reduction `delta` at the mid-plane,
/// fading to the nominal radius at `z = IMPERFECTION_EXTENT * half_gage`.
pub fn outer_radius(z: f64, radius: f64, half_gage: f64, imperfection: f64) -> f64 {
    let l_b = IMPERFECTION_EXTENT * half_gage;
    if z >= l_b {
        radius
    } else {
        radius * (1.0 - imperfection * 0.5 * (1.0 + (std::f64::consts::PI * z / l_b).cos()))
    }
}

pub fn build_round_bar_mesh(
    nr: usize,
    nz: usize,
    radius: f64,
    half_gage: f64,
    imperfection: f64,
) -> Result<Mesh> {
    build_graded_mesh(nr, nz, radius, half_gage, imperfection, AXIAL_GRADING)
}

/// Like [`build_round_bar_mesh`] but with an explicit coarse-to-fine axial
/// grading ratio (`1.0` gives uniform spacing, useful in discretization
/// studies and tests).
pub fn build_graded_mesh(
    nr: usize,
    nz: usize,
    radius: f64,
    half_gage: f64,
    imperfection: f64,
    grading: f64,
) -> Result<Mesh> {
    if nr < 2 || nz < 2 {
        return Err(Error::InvalidParam(format!("mesh needs nr >= 2 and nz >= 2, got {nr}x{nz}")));
    }
    if !(radius > 0.0) || !(half_gage > 0.0) {
        return Err(Error::InvalidParam(format!(
            "radius={radius} and half_gage={half_gage} must be positive"
        )));
    }
    if !(0.0..0.5).contains(&imperfection) {
        return Err(Error::InvalidParam(format!("imperfection={imperfection} out of [0, 0.5)")));
    }
    if !(grading >= 1.0) {
        return Err(Error::InvalidParam(format!("grading={grading} must be >= 1")));
    }

    // Geometric axial spacing h_j = h0 * g^j, finest at the mid-plane, with
    // h_{nz-1} / h_0 = grading.
    let g = grading.powf(1.0 / (nz as f64 - 1.0));
    let h0 = if g > 1.0 + 1e-12 {
        half_gage * (g - 1.0) / (g.powi(nz as i32) - 1.0)
    } else {
        half_gage / nz as f64
    };
    let mut z = vec![0.0; nz + 1];
    let mut h = h0;
    for j in 0..nz {
        z[j + 1] = z[j] + h;
        h *= g;
    }
    z[nz] = half_gage;

    let mut coords = Vec::with_capacity((nr + 1) * (nz + 1));
    for zj in z.iter().copied() {
        let r_out = outer_radius(zj, radius, half_gage, imperfection);
        for i in 0..=nr {
            coords.push([i as f64 / nr as f64 * r_out, zj]);
        }
    }

    let node = |i: usize, j: usize| j * (nr + 1) + i;
    let mut elems = Vec::with_capacity(nr * nz);
    for j in 0..nz {
        for i in 0..nr {
            elems.push([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
        }
    }

    let axis_nodes = (0..=nz).map(|j| node(0, j)).collect();
    let midplane_nodes = (0..=nr).map(|i| node(i, 0)).collect();
    let top_nodes = (0..=nr).map(|i| node(i, nz)).collect();
    let surface_nodes = (0..=nz).map(|j| node(nr, j)).collect();
    let midplane_row_elems = (0..nr).collect();

    Ok(Mesh {
        nr,
        nz,
        radius,
        half_gage,
        imperfection,
        coords,
        elems,
        axis_nodes,
        midplane_nodes,
        top_nodes,
        surface_nodes,
        midplane_row_elems,
    })
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elems(&self) -> usize {
        self.elems.len()
    }

    /// Half-bandwidth (sub- or super-diagonals) of the two-dof-per-node
    /// mechanical system under this node numbering.
    pub fn mech_half_bandwidth(&self) -> usize {
        2 * (self.nr + 2) + 1
    }

    /// Half-bandwidth of the one-dof-per-node transport system.
    pub fn transport_half_bandwidth(&self) -> usize {
        self.nr + 2
    }
}
