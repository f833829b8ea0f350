//! Plain-text mesh, function and matrix formats.
//!
//! Mesh (`dgfem-mesh 1`):
//! ```text
//! dgfem-mesh 1
//! dim 2
//! nodes 4
//! 0 0 0
//! ...
//! elements 2
//! 0 0 1 3
//! ...
//! ```
//! Element vertices are written in bisection order; boundary nodes are inferred
//! from facet incidence on reading.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::mesh::Triangulation;

pub fn mesh_to_string(mesh: &Triangulation) -> String {
    let n = mesh.dim();
    let mut s = String::new();
    let _ = writeln!(s, "dgfem-mesh 1");
    let _ = writeln!(s, "dim {n}");
    let _ = writeln!(s, "nodes {}", mesh.num_nodes());
    for (i, p) in mesh.coords().iter().enumerate() {
        let _ = write!(s, "{i}");
        for x in &p[..n] {
            let _ = write!(s, " {x}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "elements {}", mesh.num_cells());
    for t in 0..mesh.num_cells() {
        let (o, _) = mesh.refine_state(t);
        let _ = write!(s, "{t}");
        for v in &o[..=n] {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_mesh(mesh: &Triangulation, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Triangulation> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-empty line split into tokens, with its 1-based line number.
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.split('#').next().unwrap_or("");
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((i + 1, toks));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next_tokens().ok_or_else(|| Error::Parse {
            line: self.last + 1,
            message: format!("unexpected end of input, expected {what}"),
        })
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn keyword_count(lines: &mut Lines<'_>, key: &str) -> Result<(usize, usize)> {
    let (ln, t) = lines.expect(key)?;
    if t.len() != 2 || t[0] != key {
        return Err(perr(ln, format!("expected `{key} <count>`")));
    }
    let c = t[1]
        .parse::<usize>()
        .map_err(|_| perr(ln, format!("invalid {key} count `{}`", t[1])))?;
    Ok((ln, c))
}

pub fn parse_mesh(text: &str) -> Result<Triangulation> {
    let mut lines = Lines::new(text);
    let (ln, t) = lines.expect("header")?;
    if t.len() != 2 || t[0] != "dgfem-mesh" {
        return Err(perr(ln, "missing `dgfem-mesh 1` header"));
    }
    if t[1] != "1" {
        return Err(perr(ln, format!("unsupported format version {}", t[1])));
    }
    let (ln, dim) = keyword_count(&mut lines, "dim")?;
    if dim != 2 && dim != 3 {
        let _ = ln;
        return Err(Error::UnsupportedDimension(dim));
    }
    let (_, nn) = keyword_count(&mut lines, "nodes")?;
    let mut coords = Vec::with_capacity(nn);
    for k in 0..nn {
        let (ln, t) = lines.expect("node line")?;
        if t.len() != dim + 1 {
            return Err(perr(ln, format!("node line needs {} fields, found {}", dim + 1, t.len())));
        }
        let id: usize = t[0].parse().map_err(|_| perr(ln, "invalid node id"))?;
        if id != k {
            return Err(perr(ln, format!("node ids must be dense; expected {k}, found {id}")));
        }
        let mut p = [0.0; 3];
        for a in 0..dim {
            p[a] = t[a + 1]
                .parse::<f64>()
                .map_err(|_| perr(ln, format!("invalid coordinate `{}`", t[a + 1])))?;
            if !p[a].is_finite() {
                return Err(perr(ln, "non-finite coordinate"));
            }
        }
        coords.push(p);
    }
    let (_, ne) = keyword_count(&mut lines, "elements")?;
    let mut cells = Vec::with_capacity(ne);
    for k in 0..ne {
        let (ln, t) = lines.expect("element line")?;
        if t.len() != dim + 2 {
            return Err(perr(ln, format!("element line needs {} fields, found {}", dim + 2, t.len())));
        }
        let id: usize = t[0].parse().map_err(|_| perr(ln, "invalid element id"))?;
        if id != k {
            return Err(perr(ln, format!("element ids must be dense; expected {k}, found {id}")));
        }
        let mut c = Vec::with_capacity(dim + 1);
        for tok in &t[1..] {
            let v: usize = tok.parse().map_err(|_| perr(ln, format!("invalid vertex id `{tok}`")))?;
            if v >= nn {
                return Err(perr(ln, format!("vertex id {v} out of range (nodes {nn})")));
            }
            c.push(v);
        }
        cells.push(c);
    }
    if let Some((ln, _)) = lines.next_tokens() {
        return Err(perr(ln, "trailing content after elements"));
    }
    Triangulation::new(dim, coords, cells)
}

pub fn function_to_string(values: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "nodes {}", values.len());
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{i} {v}");
    }
    s
}

pub fn parse_function(text: &str) -> Result<Vec<f64>> {
    let mut lines = Lines::new(text);
    let (ln, t) = lines.expect("nodes")?;
    let t = if t.first() == Some(&"dgfem-fun") {
        lines.expect("nodes")?.1
    } else {
        t
    };
    if t.len() != 2 || t[0] != "nodes" {
        return Err(perr(ln, "expected `nodes <count>`"));
    }
    let n: usize = t[1].parse().map_err(|_| perr(ln, "invalid node count"))?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (ln, t) = lines.expect("value line")?;
        if t.len() != 2 || t[0].parse::<usize>().ok() != Some(k) {
            return Err(perr(ln, format!("expected `{k} <value>`")));
        }
        out.push(t[1].parse().map_err(|_| perr(ln, "invalid value"))?);
    }
    Ok(out)
}

/// Coordinate triplets `row col value`, preceded by `rows cols nnz`.
pub fn matrix_to_triplets(m: &CsrMatrix) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", m.rows(), m.rows(), m.nnz());
    for i in 0..m.rows() {
        for (j, v) in m.row(i) {
            let _ = writeln!(s, "{i} {j} {v}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxDomain;

    #[test]
    fn round_trip() {
        let m = Triangulation::kuhn(2, 1, BoxDomain::unit()).unwrap();
        let s = mesh_to_string(&m);
        assert!(s.starts_with("dgfem-mesh 1\ndim 2\nnodes 4\n"));
        let r = parse_mesh(&s).unwrap();
        assert_eq!(r.coords(), m.coords());
        for t in 0..m.num_cells() {
            assert_eq!(r.cell(t), m.cell(t));
            assert_eq!(r.refinement_edge(t), m.refinement_edge(t));
        }
    }

    #[test]
    fn shortest_decimals_round_trip() {
        let m = Triangulation::kuhn(3, 3, BoxDomain::new([0.1, -0.3, 0.7], [1.0 / 3.0, 0.2, 2.9])).unwrap();
        let r = parse_mesh(&mesh_to_string(&m)).unwrap();
        assert_eq!(r.coords(), m.coords());
    }

    #[test]
    fn errors_carry_lines() {
        let bad = "dgfem-mesh 1\ndim 2\nnodes 3\n0 0 0\n1 1 0\n2 0 1\nelements 1\n0 0 1 3\n";
        match parse_mesh(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_mesh("dgfem-mesh 1\ndim 4\n"),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(matches!(parse_mesh("dgfem-mesh 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_mesh("dgfem-mesh 1\ndim 2\nnodes 1\n0 1\n"),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn function_round_trip() {
        let v = vec![0.1, -2.5, 1e-300, 3.0];
        assert_eq!(parse_function(&function_to_string(&v)).unwrap(), v);
    }
}
