//! Legacy ASCII VTK writers for meshes, fields and level sets.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::level_set::LevelSet;
use crate::mesh::Mesh;

/// Named data arrays attached to a mesh.
#[derive(Clone, Debug, Default)]
pub struct Attributes<'a> {
    pub cell_scalars: Vec<(&'a str, &'a [f64])>,
    pub point_scalars: Vec<(&'a str, &'a [f64])>,
    pub point_vectors: Vec<(&'a str, &'a [[f64; 2]])>,
}

fn check(name: &str, len: usize, expected: usize) -> Result<()> {
    if len != expected {
        return Err(Error::Parameter(format!(
            "array '{name}' has {len} entries, expected {expected}"
        )));
    }
    Ok(())
}

/// Unstructured grid with triangle cells (VTK type 5).
pub fn unstructured_grid(mesh: &Mesh, title: &str, data: &Attributes) -> Result<String> {
    let (nv, nt) = (mesh.n_vertices(), mesh.n_triangles());
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "{title}").unwrap();
    writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {nv} double").unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:e} {:e} 0", p[0], p[1]).unwrap();
    }
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        writeln!(s, "5").unwrap();
    }
    if !data.cell_scalars.is_empty() {
        writeln!(s, "CELL_DATA {nt}").unwrap();
        for (name, values) in &data.cell_scalars {
            check(name, values.len(), nt)?;
            scalars(&mut s, name, values);
        }
    }
    if !data.point_scalars.is_empty() || !data.point_vectors.is_empty() {
        writeln!(s, "POINT_DATA {nv}").unwrap();
        for (name, values) in &data.point_scalars {
            check(name, values.len(), nv)?;
            scalars(&mut s, name, values);
        }
        for (name, values) in &data.point_vectors {
            check(name, values.len(), nv)?;
            writeln!(s, "VECTORS {name} double").unwrap();
            for v in values.iter() {
                writeln!(s, "{:e} {:e} 0", v[0], v[1]).unwrap();
            }
        }
    }
    Ok(s)
}

fn scalars(s: &mut String, name: &str, values: &[f64]) {
    writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
    for v in values {
        writeln!(s, "{v:e}").unwrap();
    }
}

/// Level-set values as structured points.
pub fn structured_points(level_set: &LevelSet, title: &str) -> String {
    let (nx, ny) = level_set.dims();
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_POINTS").unwrap();
    writeln!(s, "DIMENSIONS {} {} 1", nx + 1, ny + 1).unwrap();
    writeln!(s, "ORIGIN 0 0 0").unwrap();
    writeln!(s, "SPACING {:e} {:e} 1", level_set.dx(), level_set.dy()).unwrap();
    writeln!(s, "POINT_DATA {}", (nx + 1) * (ny + 1)).unwrap();
    scalars(&mut s, "psi", level_set.values());
    s
}

/// Writes `contents` to `path`, reporting the path on failure.
pub fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unstructured_layout() {
        let mesh = Mesh::crossed_untagged(1, 1, 1.0, 1.0).unwrap();
        let flags = [1.0, 0.0, 1.0, 0.0];
        let psi = [0.0; 5];
        let data = Attributes {
            cell_scalars: vec![("material", &flags)],
            point_scalars: vec![("psi", &psi)],
            point_vectors: vec![],
        };
        let s = unstructured_grid(&mesh, "t", &data).unwrap();
        assert!(s.contains("POINTS 5 double"));
        assert!(s.contains("CELLS 4 16"));
        assert!(s.contains("CELL_DATA 4"));
        assert!(s.contains("POINT_DATA 5"));
        assert_eq!(s.lines().filter(|l| *l == "5").count(), 4);
        let bad = Attributes {
            cell_scalars: vec![("material", &flags[..2])],
            ..Default::default()
        };
        assert!(unstructured_grid(&mesh, "t", &bad).is_err());
    }

    #[test]
    fn structured_layout() {
        let ls = LevelSet::init(2, 3, [1.0, 1.5], |p| p[0]).unwrap();
        let s = structured_points(&ls, "psi");
        assert!(s.contains("DIMENSIONS 3 4 1"));
        assert!(s.contains("POINT_DATA 12"));
    }
}
