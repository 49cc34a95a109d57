//! Tetrahedral meshes of the unit ball with the induced boundary triangulation.
//!
//! The seed is the icosahedron inscribed in the unit sphere, split into twenty
//! tetrahedra around the origin. Each level applies red refinement (every
//! tetrahedron into eight) and projects the new boundary vertices radially onto
//! the unit sphere.

mod io;

pub use io::{read_text, write_text, write_vtk_surface, write_vtk_volume};

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Deepest refinement accepted by [`generate_ball_mesh`]; level 7 already has
/// about 4.2e7 tetrahedra.
pub const MAX_REFINEMENT: usize = 7;

/// Tolerance on `| |x| - 1 |` for boundary vertices.
pub const SPHERE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BulkSurfaceMesh {
    pub vertices: Vec<Point>,
    /// Positively oriented tetrahedra.
    pub tets: Vec<[usize; 4]>,
    /// Boundary triangles as bulk vertex indices, normals pointing outward.
    pub surface_tris: Vec<[usize; 3]>,
    /// Sorted bulk indices of the boundary vertices; position = surface DOF.
    pub surface_vertex_ids: Vec<usize>,
    /// Surface DOF of each bulk vertex, if it lies on the boundary.
    pub bulk_to_surface: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub vertices: usize,
    pub tets: usize,
    pub surface_vertices: usize,
    pub surface_tris: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub volume: f64,
    pub area: f64,
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn tet_signed_volume(v: &[Point], t: &[usize; 4]) -> f64 {
    let e1 = sub(&v[t[1]], &v[t[0]]);
    let e2 = sub(&v[t[2]], &v[t[0]]);
    let e3 = sub(&v[t[3]], &v[t[0]]);
    dot(&cross(&e1, &e2), &e3) / 6.0
}

pub fn triangle_area(v: &[Point], t: &[usize; 3]) -> f64 {
    let e1 = sub(&v[t[1]], &v[t[0]]);
    let e2 = sub(&v[t[2]], &v[t[0]]);
    0.5 * norm(&cross(&e1, &e2))
}

fn triangle_normal(v: &[Point], t: &[usize; 3]) -> Point {
    cross(&sub(&v[t[1]], &v[t[0]]), &sub(&v[t[2]], &v[t[0]]))
}

fn face_key(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

/// Faces of a tetrahedron paired with the vertex opposite each one.
fn tet_faces(t: &[usize; 4]) -> [([usize; 3], usize); 4] {
    [
        ([t[1], t[2], t[3]], t[0]),
        ([t[0], t[2], t[3]], t[1]),
        ([t[0], t[1], t[3]], t[2]),
        ([t[0], t[1], t[2]], t[3]),
    ]
}

/// Boundary faces of a tetrahedral mesh (faces owned by exactly one
/// tetrahedron), oriented away from the opposite vertex.
///
/// Fails when a face is shared by more than two tetrahedra or when a boundary
/// edge is not shared by exactly two boundary faces.
pub fn extract_surface(vertices: &[Point], tets: &[[usize; 4]]) -> Result<Vec<[usize; 3]>> {
    let mut owners: HashMap<[usize; 3], (usize, [usize; 3], usize)> = HashMap::new();
    let mut bad = Vec::new();
    for t in tets {
        for (face, opposite) in tet_faces(t) {
            let e = owners.entry(face_key(face)).or_insert((0, face, opposite));
            e.0 += 1;
            if e.0 == 3 {
                bad.push(face_key(face));
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::NonManifold { faces: bad });
    }
    let mut boundary: Vec<([usize; 3], [usize; 3])> = owners
        .into_iter()
        .filter(|(_, (count, _, _))| *count == 1)
        .map(|(key, (_, mut face, opposite))| {
            let n = triangle_normal(vertices, &face);
            if dot(&n, &sub(&vertices[opposite], &vertices[face[0]])) > 0.0 {
                face.swap(1, 2);
            }
            (key, face)
        })
        .collect();
    boundary.sort_unstable_by_key(|(key, _)| *key);

    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for (_, f) in &boundary {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let bad: Vec<[usize; 3]> = boundary
        .iter()
        .filter(|(_, f)| {
            (0..3).any(|k| {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edge_count[&(a.min(b), a.max(b))] != 2
            })
        })
        .map(|(_, f)| *f)
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonManifold { faces: bad });
    }
    Ok(boundary.into_iter().map(|(_, f)| f).collect())
}

/// Red refinement of one tetrahedron given its six edge midpoints, keeping the
/// vertex ordering that bounds the number of congruence classes.
fn red_children(t: [usize; 4], mid: impl Fn(usize, usize) -> usize) -> [[usize; 4]; 8] {
    let [x0, x1, x2, x3] = t;
    let (m01, m02, m03) = (mid(x0, x1), mid(x0, x2), mid(x0, x3));
    let (m12, m13, m23) = (mid(x1, x2), mid(x1, x3), mid(x2, x3));
    [
        [x0, m01, m02, m03],
        [m01, x1, m12, m13],
        [m02, m12, x2, m23],
        [m03, m13, m23, x3],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ]
}

fn refine(vertices: &mut Vec<Point>, tets: &[[usize; 4]]) -> Vec<[usize; 4]> {
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut out = Vec::with_capacity(tets.len() * 8);
    for &t in tets {
        // Midpoints first; `red_children` then only looks them up.
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (a, b) = (t[i].min(t[j]), t[i].max(t[j]));
                midpoints.entry((a, b)).or_insert_with(|| {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    vertices.push([
                        0.5 * (pa[0] + pb[0]),
                        0.5 * (pa[1] + pb[1]),
                        0.5 * (pa[2] + pb[2]),
                    ]);
                    vertices.len() - 1
                });
            }
        }
        out.extend(red_children(t, |a, b| midpoints[&(a.min(b), a.max(b))]));
    }
    out
}

/// Origin plus the twelve icosahedron vertices, one tetrahedron per face. The
/// icosahedron `(0, ±1, ±φ)` and its cyclic permutations is symmetric under
/// every coordinate reflection.
fn icosahedron_seed() -> (Vec<Point>, Vec<[usize; 4]>) {
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let mut vertices = vec![[0.0; 3]];
    for &(a, b) in &[(1.0, phi), (1.0, -phi), (-1.0, phi), (-1.0, -phi)] {
        vertices.push([0.0, a, b]);
        vertices.push([a, b, 0.0]);
        vertices.push([b, 0.0, a]);
    }
    // faces are the triples at mutual distance 2
    let adjacent = |i: usize, j: usize| {
        let d = sub(&vertices[i], &vertices[j]);
        (dot(&d, &d) - 4.0).abs() < 1e-9
    };
    let mut tets = Vec::with_capacity(20);
    for i in 1..13 {
        for j in (i + 1)..13 {
            for k in (j + 1)..13 {
                if adjacent(i, j) && adjacent(j, k) && adjacent(i, k) {
                    tets.push([0, i, j, k]);
                }
            }
        }
    }
    debug_assert_eq!(tets.len(), 20);
    let r = (1.0 + phi * phi).sqrt();
    for p in vertices.iter_mut().skip(1) {
        *p = p.map(|x| x / r);
    }
    (vertices, tets)
}

fn boundary_vertices(tets: &[[usize; 4]]) -> Vec<usize> {
    let mut count: HashMap<[usize; 3], u8> = HashMap::new();
    for t in tets {
        for (face, _) in tet_faces(t) {
            *count.entry(face_key(face)).or_default() += 1;
        }
    }
    let mut ids: Vec<usize> = count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .flat_map(|(f, _)| f)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Uniformly refined tetrahedral mesh of the unit ball. New boundary vertices
/// are pushed onto the unit sphere after every refinement step.
pub fn generate_ball_mesh(level: usize) -> Result<BulkSurfaceMesh> {
    if level > MAX_REFINEMENT {
        return Err(Error::RefinementTooDeep {
            level,
            max: MAX_REFINEMENT,
        });
    }
    let (mut vertices, mut tets) = icosahedron_seed();
    for _ in 0..level {
        tets = refine(&mut vertices, &tets);
        for k in boundary_vertices(&tets) {
            let p = vertices[k];
            let n = norm(&p);
            vertices[k] = [p[0] / n, p[1] / n, p[2] / n];
        }
    }
    BulkSurfaceMesh::from_parts(vertices, tets)
}

impl BulkSurfaceMesh {
    /// Builds the induced surface and DOF maps from a tetrahedral mesh and
    /// checks every invariant. Negatively oriented tetrahedra are flipped.
    pub fn from_parts(vertices: Vec<Point>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        let nv = vertices.len();
        for (i, t) in tets.iter_mut().enumerate() {
            if t.iter().any(|&k| k >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "tetrahedron {i} references a vertex out of range"
                )));
            }
            if tet_signed_volume(&vertices, t) < 0.0 {
                t.swap(2, 3);
            }
        }
        let surface_tris = extract_surface(&vertices, &tets)?;
        let mut ids: Vec<usize> = surface_tris.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        let mut bulk_to_surface = vec![None; nv];
        for (dof, &id) in ids.iter().enumerate() {
            bulk_to_surface[id] = Some(dof);
        }
        let mesh = Self {
            vertices,
            tets,
            surface_tris,
            surface_vertex_ids: ids,
            bulk_to_surface,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_surface(&self) -> usize {
        self.surface_vertex_ids.len()
    }

    /// Surface triangles in surface DOF numbering.
    pub fn surface_tris_local(&self) -> Vec<[usize; 3]> {
        self.surface_tris
            .iter()
            .map(|t| t.map(|k| self.bulk_to_surface[k].expect("surface vertex")))
            .collect()
    }

    pub fn surface_points(&self) -> Vec<Point> {
        self.surface_vertex_ids
            .iter()
            .map(|&k| self.vertices[k])
            .collect()
    }

    /// Checks all structural and geometric invariants of a ball mesh.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if self.bulk_to_surface.len() != nv {
            return Err(Error::InvalidMesh("bulk_to_surface has wrong length".into()));
        }
        for (i, t) in self.tets.iter().enumerate() {
            let vol = tet_signed_volume(&self.vertices, t);
            if !(vol > 0.0) {
                return Err(Error::DegenerateElement {
                    kind: "tetrahedron",
                    index: i,
                    measure: vol,
                });
            }
        }
        if !self.surface_vertex_ids.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidMesh("surface vertex ids are not sorted".into()));
        }
        let mut seen = 0;
        for (k, m) in self.bulk_to_surface.iter().enumerate() {
            if let Some(dof) = *m {
                if self.surface_vertex_ids.get(dof) != Some(&k) {
                    return Err(Error::InvalidMesh(format!(
                        "bulk_to_surface[{k}] = {dof} is not the inverse of surface_vertex_ids"
                    )));
                }
                seen += 1;
            }
        }
        if seen != self.surface_vertex_ids.len() {
            return Err(Error::InvalidMesh("bulk_to_surface is not a bijection".into()));
        }
        for t in &self.surface_tris {
            if t.iter().any(|&k| self.bulk_to_surface[k].is_none()) {
                return Err(Error::InvalidMesh(format!(
                    "surface triangle {t:?} uses a non-surface vertex"
                )));
            }
        }
        for &k in &self.surface_vertex_ids {
            let r = norm(&self.vertices[k]);
            if (r - 1.0).abs() > SPHERE_TOLERANCE {
                return Err(Error::InvalidMesh(format!(
                    "surface vertex {k} at radius {r} is off the unit sphere"
                )));
            }
        }
        for (i, t) in self.surface_tris.iter().enumerate() {
            let n = triangle_normal(&self.vertices, t);
            let c = centroid3(&self.vertices, t);
            if dot(&n, &c) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "surface triangle {i} is not oriented outward"
                )));
            }
        }
        let extracted = extract_surface(&self.vertices, &self.tets)?;
        let mut a: Vec<_> = extracted.into_iter().map(face_key).collect();
        let mut b: Vec<_> = self.surface_tris.iter().copied().map(face_key).collect();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::InvalidMesh(
                "stored surface differs from the tetrahedra boundary".into(),
            ));
        }
        let chi = self.surface_euler_characteristic();
        if chi != 2 {
            return Err(Error::InvalidMesh(format!(
                "surface Euler characteristic {chi}, expected 2"
            )));
        }
        Ok(())
    }

    pub fn surface_euler_characteristic(&self) -> i64 {
        let mut edges: Vec<(usize, usize)> = self
            .surface_tris
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        self.surface_vertex_ids.len() as i64 - edges.len() as i64 + self.surface_tris.len() as i64
    }

    pub fn stats(&self) -> MeshStats {
        mesh_stats(self)
    }
}

fn centroid3(v: &[Point], t: &[usize; 3]) -> Point {
    let mut c = [0.0; 3];
    for &k in t {
        for d in 0..3 {
            c[d] += v[k][d] / 3.0;
        }
    }
    c
}

pub fn mesh_stats(mesh: &BulkSurfaceMesh) -> MeshStats {
    let mut h_min = f64::INFINITY;
    let mut h_max: f64 = 0.0;
    for t in &mesh.tets {
        for i in 0..4 {
            for j in (i + 1)..4 {
                let h = norm(&sub(&mesh.vertices[t[i]], &mesh.vertices[t[j]]));
                h_min = h_min.min(h);
                h_max = h_max.max(h);
            }
        }
    }
    MeshStats {
        vertices: mesh.vertices.len(),
        tets: mesh.tets.len(),
        surface_vertices: mesh.surface_vertex_ids.len(),
        surface_tris: mesh.surface_tris.len(),
        h_min,
        h_max,
        volume: mesh
            .tets
            .iter()
            .map(|t| tet_signed_volume(&mesh.vertices, t))
            .sum(),
        area: mesh
            .surface_tris
            .iter()
            .map(|t| triangle_area(&mesh.vertices, t))
            .sum(),
    }
}
