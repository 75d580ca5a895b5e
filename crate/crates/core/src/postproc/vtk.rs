//! Legacy ASCII VTK unstructured grid output and a reader for the same subset.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{gradient_field, PostprocError};
use crate::fem::SeepageSolution;
use crate::geometry::Point;

const VTK_TRIANGLE: u32 = 5;

pub fn write_vtk<W: Write>(solution: &SeepageSolution, mut w: W) -> Result<(), PostprocError> {
    let mesh = &solution.mesh;
    let field = gradient_field(solution);
    let n = mesh.nodes.len();
    let ne = mesh.elements.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "steady seepage solution")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n} double")?;
    for p in &mesh.nodes {
        writeln!(w, "{:.16e} {:.16e} 0", p.x, p.y)?;
    }
    writeln!(w, "CELLS {ne} {}", 4 * ne)?;
    for el in &mesh.elements {
        let [a, b, c] = el.nodes;
        writeln!(w, "3 {a} {b} {c}")?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    writeln!(w, "POINT_DATA {n}")?;
    for (name, values) in [
        ("head", solution.head()),
        ("pressure_head", &solution.head_field.pressure_head[..]),
    ] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{v:.16e}")?;
        }
    }
    writeln!(w, "CELL_DATA {ne}")?;
    writeln!(w, "VECTORS velocity double")?;
    for v in &field.velocity {
        writeln!(w, "{:.16e} {:.16e} 0", v[0], v[1])?;
    }
    writeln!(w, "SCALARS k_r double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in &solution.head_field.saturation {
        writeln!(w, "{v:.16e}")?;
    }
    writeln!(w, "SCALARS zone int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for el in &mesh.elements {
        writeln!(w, "{}", el.zone)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub point_scalars: BTreeMap<String, Vec<f64>>,
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
    pub cell_vectors: BTreeMap<String, Vec<[f64; 3]>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Point,
    Cell,
}

/// Reads files in the layout produced by [`write_vtk`].
pub fn read_vtk<R: BufRead>(r: R) -> Result<VtkData, PostprocError> {
    let mut tokens: Vec<String> = Vec::new();
    let mut lines = r.lines();
    for _ in 0..3 {
        lines.next().transpose()?;
    }
    for line in lines {
        tokens.extend(line?.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let bad = |m: &str| PostprocError::Parse(m.to_owned());
    let mut next = || it.next();
    let num = |t: Option<String>| -> Result<f64, PostprocError> {
        let t = t.ok_or_else(|| bad("unexpected end of file"))?;
        t.parse().map_err(|_| bad(&format!("bad number '{t}'")))
    };
    let int = |t: Option<String>| -> Result<usize, PostprocError> {
        let t = t.ok_or_else(|| bad("unexpected end of file"))?;
        t.parse().map_err(|_| bad(&format!("bad integer '{t}'")))
    };
    let mut out = VtkData::default();
    let mut section = Section::None;
    let (mut np, mut nc) = (0, 0);
    while let Some(key) = next() {
        match key.as_str() {
            "DATASET" => {
                let kind = next().unwrap_or_default();
                if kind != "UNSTRUCTURED_GRID" {
                    return Err(bad(&format!("unsupported dataset {kind}")));
                }
            }
            "POINTS" => {
                np = int(next())?;
                next();
                for _ in 0..np {
                    let x = num(next())?;
                    let y = num(next())?;
                    num(next())?;
                    out.points.push(Point::new(x, y));
                }
            }
            "CELLS" => {
                nc = int(next())?;
                int(next())?;
                for _ in 0..nc {
                    let k = int(next())?;
                    let cell = (0..k).map(|_| int(next())).collect::<Result<_, _>>()?;
                    out.cells.push(cell);
                }
            }
            "CELL_TYPES" => {
                for _ in 0..int(next())? {
                    int(next())?;
                }
            }
            "POINT_DATA" => {
                int(next())?;
                section = Section::Point;
            }
            "CELL_DATA" => {
                int(next())?;
                section = Section::Cell;
            }
            "SCALARS" => {
                let name = next().ok_or_else(|| bad("scalar without name"))?;
                next();
                next();
                if next().as_deref() != Some("LOOKUP_TABLE") {
                    return Err(bad("expected LOOKUP_TABLE"));
                }
                next();
                let count = if section == Section::Point { np } else { nc };
                let v = (0..count).map(|_| num(next())).collect::<Result<Vec<_>, _>>()?;
                match section {
                    Section::Point => out.point_scalars.insert(name, v),
                    Section::Cell => out.cell_scalars.insert(name, v),
                    Section::None => return Err(bad("scalars outside a data section")),
                };
            }
            "VECTORS" => {
                let name = next().ok_or_else(|| bad("vector without name"))?;
                next();
                let count = if section == Section::Point { np } else { nc };
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    v.push([num(next())?, num(next())?, num(next())?]);
                }
                out.cell_vectors.insert(name, v);
            }
            other => return Err(bad(&format!("unexpected token '{other}'"))),
        }
    }
    Ok(out)
}
