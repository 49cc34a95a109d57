use std::io::{BufRead, Write};

use super::{BulkSurfaceMesh, Point};
use crate::error::{Error, Result};

const TEXT_MAGIC: &str = "# bsturing mesh v1";

fn check_len(what: &'static str, data: &[f64], expected: usize) -> Result<()> {
    if data.len() != expected {
        return Err(Error::SizeMismatch {
            what,
            got: data.len(),
            expected,
        });
    }
    Ok(())
}

fn write_points<W: Write>(w: &mut W, pts: impl ExactSizeIterator<Item = Point>) -> Result<()> {
    writeln!(w, "POINTS {} double", pts.len())?;
    for p in pts {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    Ok(())
}

fn write_fields<W: Write>(w: &mut W, n: usize, fields: &[(&str, &[f64])]) -> Result<()> {
    if fields.is_empty() {
        return Ok(());
    }
    writeln!(w, "POINT_DATA {n}")?;
    for (name, data) in fields {
        check_len("point field", data, n)?;
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for x in *data {
            writeln!(w, "{x:.17e}")?;
        }
    }
    Ok(())
}

/// Legacy ASCII VTK unstructured grid of the tetrahedra with one scalar per
/// bulk vertex for each field.
pub fn write_vtk_volume<W: Write>(
    mesh: &BulkSurfaceMesh,
    fields: &[(&str, &[f64])],
    w: &mut W,
) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "bulk")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    write_points(w, mesh.vertices.iter().copied())?;
    let n = mesh.tets.len();
    writeln!(w, "CELLS {n} {}", 5 * n)?;
    for t in &mesh.tets {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(w, "10")?;
    }
    write_fields(w, mesh.n_vertices(), fields)
}

/// Legacy ASCII VTK polydata of the boundary triangles in surface numbering,
/// with one scalar per surface DOF for each field.
pub fn write_vtk_surface<W: Write>(
    mesh: &BulkSurfaceMesh,
    fields: &[(&str, &[f64])],
    w: &mut W,
) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "surface")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    write_points(w, mesh.surface_points().into_iter())?;
    let tris = mesh.surface_tris_local();
    writeln!(w, "POLYGONS {} {}", tris.len(), 4 * tris.len())?;
    for t in &tris {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    write_fields(w, mesh.n_surface(), fields)
}

/// Plain-text mesh: vertex and tetrahedron lists. The surface is rebuilt on
/// load.
pub fn write_text<W: Write>(mesh: &BulkSurfaceMesh, w: &mut W) -> Result<()> {
    writeln!(w, "{TEXT_MAGIC}")?;
    writeln!(w, "vertices {}", mesh.vertices.len())?;
    for p in &mesh.vertices {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    writeln!(w, "tets {}", mesh.tets.len())?;
    for t in &mesh.tets {
        writeln!(w, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_content(&mut self) -> Result<Option<String>> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(Some(t.to_string()));
            }
        }
        Ok(None)
    }

    fn expect(&mut self, what: &str) -> Result<String> {
        self.next_content()?.ok_or_else(|| Error::Config {
            line: self.line,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, msg: String) -> Error {
        Error::Config {
            line: self.line,
            msg,
        }
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let l = self.expect(keyword)?;
        let mut it = l.split_whitespace();
        match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
            (Some(k), Some(Ok(n)), None) if k == keyword => Ok(n),
            _ => Err(self.err(format!("expected `{keyword} <count>`, got `{l}`"))),
        }
    }

    fn numbers<T: std::str::FromStr, const N: usize>(&mut self, what: &str) -> Result<[T; N]> {
        let l = self.expect(what)?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != N {
            return Err(self.err(format!("expected {N} values for {what}, got {}", parts.len())));
        }
        let mut vals = Vec::with_capacity(N);
        for p in parts {
            vals.push(
                p.parse::<T>()
                    .map_err(|_| self.err(format!("cannot parse `{p}` in {what}")))?,
            );
        }
        Ok(vals.try_into().ok().expect("length checked"))
    }
}

/// Reads a mesh written by [`write_text`] and validates it.
pub fn read_text<R: BufRead>(r: R) -> Result<BulkSurfaceMesh> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    let nv = lines.header("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let p: [f64; 3] = lines.numbers("vertex")?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(lines.err("non-finite vertex coordinate".into()));
        }
        vertices.push(p);
    }
    let nt = lines.header("tets")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let t: [usize; 4] = lines.numbers("tetrahedron")?;
        if t.iter().any(|&k| k >= nv) {
            return Err(lines.err(format!("tetrahedron {t:?} references a missing vertex")));
        }
        tets.push(t);
    }
    if let Some(extra) = lines.next_content()? {
        return Err(lines.err(format!("trailing content `{extra}`")));
    }
    BulkSurfaceMesh::from_parts(vertices, tets)
}
