//! ASCII tetrahedral mesh format.
//!
//! ```text
//! tetmesh 1
//! <nNodes> <nTets> <nBFacets>
//! x y z                 (nNodes lines)
//! i0 i1 i2 i3           (nTets lines)
//! i0 i1 i2 tag          (nBFacets lines, tag 1 = outer, 2 = cavity)
//! ```
//!
//! Indices are 0-based. Coordinates are written with 17 significant digits,
//! so a write/read round trip is exact.

use crate::error::{CliError, Stage};
use std::fmt::Write as _;
use std::path::Path;
use thermo_enclosure_core::geometry::{Mesh, Tag};

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(64 * (mesh.nodes.len() + mesh.tets.len()));
    s.push_str("tetmesh 1\n");
    let _ = writeln!(s, "{} {} {}", mesh.nodes.len(), mesh.tets.len(), mesh.facets.len());
    for x in &mesh.nodes {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]);
    }
    for t in &mesh.tets {
        let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    for (f, tag) in &mesh.facets {
        let _ = writeln!(s, "{} {} {} {}", f[0], f[1], f[2], tag.code());
    }
    s
}

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::stage(Stage::Mesh, format!("line {line}: {msg}"))
}

/// Parse and validate a mesh.
pub fn parse_mesh(text: &str) -> Result<Mesh, CliError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| CliError::stage(Stage::Mesh, format!("unexpected end of file, expected {what}")));
    let (ln, header) = next("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["tetmesh", "1"] {
        return Err(err(ln, "expected header `tetmesh 1`"));
    }
    let (ln, counts) = next("counts")?;
    let counts: Vec<usize> = counts.split_whitespace().map(|t| t.parse().map_err(|_| err(ln, format!("bad count {t:?}")))).collect::<Result<_, _>>()?;
    let [nn, nt, nf] = counts[..] else {
        return Err(err(ln, "expected three counts"));
    };
    let mut nodes = Vec::with_capacity(nn);
    for _ in 0..nn {
        let (ln, l) = next("node")?;
        let v: Vec<f64> = l.split_whitespace().map(|t| t.parse().map_err(|_| err(ln, format!("bad coordinate {t:?}")))).collect::<Result<_, _>>()?;
        let [x, y, z] = v[..] else {
            return Err(err(ln, "node needs three coordinates"));
        };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(err(ln, "non-finite coordinate"));
        }
        nodes.push([x, y, z]);
    }
    let index = |ln: usize, t: &str| -> Result<usize, CliError> {
        let i: usize = t.parse().map_err(|_| err(ln, format!("bad index {t:?}")))?;
        if i >= nn {
            return Err(err(ln, format!("index {i} out of range (mesh has {nn} nodes)")));
        }
        Ok(i)
    };
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = next("tetrahedron")?;
        let v: Vec<usize> = l.split_whitespace().map(|t| index(ln, t)).collect::<Result<_, _>>()?;
        let [a, b, c, d] = v[..] else {
            return Err(err(ln, "tetrahedron needs four indices"));
        };
        tets.push([a, b, c, d]);
    }
    let mut facets = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = next("boundary facet")?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 4 {
            return Err(err(ln, "boundary facet needs three indices and a tag"));
        }
        let tag = t[3].parse::<u8>().ok().and_then(Tag::from_code).ok_or_else(|| err(ln, format!("bad tag {:?} (1 = outer, 2 = cavity)", t[3])))?;
        facets.push(([index(ln, t[0])?, index(ln, t[1])?, index(ln, t[2])?], tag));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing content after the declared counts"));
    }
    let mesh = Mesh { nodes, tets, facets };
    mesh.validate().map_err(|e| CliError::core(Stage::Mesh, e))?;
    Ok(mesh)
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<(), CliError> {
    std::fs::write(path, format_mesh(mesh)).map_err(|e| CliError::io(path, e))
}

pub fn read_mesh(path: &Path) -> Result<Mesh, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_mesh(&text)
}
