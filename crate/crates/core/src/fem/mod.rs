//! Piecewise linear finite elements on the ball and its boundary sphere.

mod sparse;

pub use sparse::{SparseBuilder, SparseOperator};

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::kinetics::CouplingParams;
use crate::mesh::{sub, tet_signed_volume, triangle_area, BulkSurfaceMesh, Point};
use crate::timestep::SystemState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    #[default]
    Consistent,
    /// Row-sum lumped (diagonal) mass matrices.
    Lumped,
}

/// Discrete operators of the coupled bulk-surface weak form.
#[derive(Debug, Clone)]
pub struct CoupledSystemOperators {
    pub mass_kind: MassKind,
    pub m_bulk: SparseOperator,
    pub k_bulk: SparseOperator,
    pub m_surf: SparseOperator,
    pub k_surf: SparseOperator,
    /// Boundary mass over surface DOFs, acting on bulk traces.
    pub m_trace: SparseOperator,
    /// Lumped masses, used for vertex quadrature of the kinetics.
    pub lumped_bulk: Vec<f64>,
    pub lumped_surf: Vec<f64>,
    /// Bulk vertex of each surface DOF.
    pub trace: Vec<usize>,
}

impl CoupledSystemOperators {
    pub fn n_bulk(&self) -> usize {
        self.m_bulk.rows()
    }

    pub fn n_surf(&self) -> usize {
        self.m_surf.rows()
    }

    /// Restriction of a bulk vector to the boundary.
    pub fn trace_of(&self, bulk: &[f64]) -> Vec<f64> {
        self.trace.iter().map(|&k| bulk[k]).collect()
    }
}

fn tet_local(p: [&Point; 4], index: usize) -> Result<(f64, [[f64; 4]; 4])> {
    let e = [sub(p[1], p[0]), sub(p[2], p[0]), sub(p[3], p[0])];
    let jac = Matrix3::from_columns(&[
        Vector3::from(e[0]),
        Vector3::from(e[1]),
        Vector3::from(e[2]),
    ]);
    let vol = jac.determinant() / 6.0;
    let inv = match jac.try_inverse() {
        Some(inv) if vol > 0.0 => inv,
        _ => {
            return Err(Error::DegenerateElement {
                kind: "tetrahedron",
                index,
                measure: vol,
            })
        }
    };
    // rows of J⁻¹ are the gradients of barycentrics 1..3
    let mut g = [[0.0; 3]; 4];
    for i in 0..3 {
        for d in 0..3 {
            g[i + 1][d] = inv[(i, d)];
            g[0][d] -= inv[(i, d)];
        }
    }
    let mut k = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            k[i][j] = vol * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
        }
    }
    Ok((vol, k))
}

fn tri_local(p: [&Point; 3], index: usize) -> Result<(f64, [[f64; 3]; 3])> {
    let e1 = sub(p[1], p[0]);
    let e2 = sub(p[2], p[0]);
    let d = |a: &Point, b: &Point| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let gram = Matrix2::new(d(&e1, &e1), d(&e1, &e2), d(&e1, &e2), d(&e2, &e2));
    let area = 0.5 * gram.determinant().max(0.0).sqrt();
    let inv = match gram.try_inverse() {
        Some(inv) if area > 0.0 => inv,
        _ => {
            return Err(Error::DegenerateElement {
                kind: "triangle",
                index,
                measure: area,
            })
        }
    };
    let mut k = [[0.0; 3]; 3];
    for i in 0..2 {
        for j in 0..2 {
            k[i + 1][j + 1] = area * inv[(i, j)];
        }
    }
    for i in 1..3 {
        k[0][i] = -(k[1][i] + k[2][i]);
        k[i][0] = k[0][i];
    }
    k[0][0] = -(k[0][1] + k[0][2]);
    Ok((area, k))
}

fn finish_mass(b: SparseBuilder, kind: MassKind) -> (SparseOperator, Vec<f64>) {
    let m = b.build();
    let lumped = m.row_sums();
    match kind {
        MassKind::Consistent => (m, lumped),
        MassKind::Lumped => (SparseOperator::from_diagonal(&lumped), lumped),
    }
}

/// Assembles all operators with consistent mass matrices.
pub fn assemble_operators(mesh: &BulkSurfaceMesh) -> Result<CoupledSystemOperators> {
    assemble_operators_with(mesh, MassKind::Consistent)
}

pub fn assemble_operators_with(
    mesh: &BulkSurfaceMesh,
    mass_kind: MassKind,
) -> Result<CoupledSystemOperators> {
    let nb = mesh.n_vertices();
    let ns = mesh.n_surface();
    let v = &mesh.vertices;

    let mut mb = SparseBuilder::with_capacity(nb, nb, 10 * mesh.tets.len());
    let mut kb = SparseBuilder::with_capacity(nb, nb, 10 * mesh.tets.len());
    for (idx, t) in mesh.tets.iter().enumerate() {
        let (vol, k) = tet_local([&v[t[0]], &v[t[1]], &v[t[2]], &v[t[3]]], idx)?;
        for i in 0..4 {
            for j in i..4 {
                let m = if i == j { vol / 10.0 } else { vol / 20.0 };
                mb.add_symmetric(t[i], t[j], m);
                kb.add_symmetric(t[i], t[j], k[i][j]);
            }
        }
    }

    let tris = mesh.surface_tris_local();
    let mut ms = SparseBuilder::with_capacity(ns, ns, 6 * tris.len());
    let mut ks = SparseBuilder::with_capacity(ns, ns, 6 * tris.len());
    for (idx, (t, tb)) in tris.iter().zip(&mesh.surface_tris).enumerate() {
        let (area, k) = tri_local([&v[tb[0]], &v[tb[1]], &v[tb[2]]], idx)?;
        for i in 0..3 {
            for j in i..3 {
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                ms.add_symmetric(t[i], t[j], m);
                ks.add_symmetric(t[i], t[j], k[i][j]);
            }
        }
    }

    let (m_bulk, lumped_bulk) = finish_mass(mb, mass_kind);
    let (m_surf, lumped_surf) = finish_mass(ms, mass_kind);
    Ok(CoupledSystemOperators {
        mass_kind,
        m_bulk,
        k_bulk: kb.build(),
        m_trace: m_surf.clone(),
        m_surf,
        k_surf: ks.build(),
        lumped_bulk,
        lumped_surf,
        trace: mesh.surface_vertex_ids.clone(),
    })
}

/// Exchange loads; `u` and `v` are bulk vectors, `r` and `s` surface vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingLoads {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

/// Nodal exchange terms `(h1, h2)` on the surface DOFs.
pub fn exchange_terms(
    ops: &CoupledSystemOperators,
    c: &CouplingParams,
    state: &SystemState,
) -> (Vec<f64>, Vec<f64>) {
    ops.trace
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let (u, v, r, s) = (state.u[k], state.v[k], state.r[j], state.s[j]);
            (
                c.alpha1 * r - c.beta1 * u - c.kappa1 * v,
                c.alpha2 * s - c.beta2 * u - c.kappa2 * v,
            )
        })
        .unzip()
}

/// Boundary loads from the exchange terms: `γ M_trace h` enters the bulk
/// equations at the boundary vertices and `-γ M_trace h` the surface ones.
pub fn apply_coupling(
    ops: &CoupledSystemOperators,
    c: &CouplingParams,
    gamma_surf: f64,
    state: &SystemState,
) -> Result<CouplingLoads> {
    state.check_sizes(ops.n_bulk(), ops.n_surf())?;
    let (h1, h2) = exchange_terms(ops, c, state);
    let mut r = ops.m_trace.mul_vec(&h1)?;
    let mut s = ops.m_trace.mul_vec(&h2)?;
    let mut u = vec![0.0; ops.n_bulk()];
    let mut v = vec![0.0; ops.n_bulk()];
    for (j, &k) in ops.trace.iter().enumerate() {
        u[k] = gamma_surf * r[j];
        v[k] = gamma_surf * s[j];
        r[j] *= -gamma_surf;
        s[j] *= -gamma_surf;
    }
    Ok(CouplingLoads { u, v, r, s })
}

/// Total measure checks used by tests and diagnostics.
pub fn mesh_measures(mesh: &BulkSurfaceMesh) -> (f64, f64) {
    let vol = mesh
        .tets
        .iter()
        .map(|t| tet_signed_volume(&mesh.vertices, t))
        .sum();
    let area = mesh
        .surface_tris
        .iter()
        .map(|t| triangle_area(&mesh.vertices, t))
        .sum();
    (vol, area)
}
