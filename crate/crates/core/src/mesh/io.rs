//! Plain-text mesh format.
//!
//! ```text
//! <vertex count>
//! x y                 (one row per vertex)
//! <triangle count>
//! a b c e             (counterclockwise vertices, refinement edge e = (v_e, v_e+1))
//! a b L               (boundary edges until end of file, L in {D, N})
//! ```

use std::io::{BufRead, Write};

use super::{BoundaryKind, Mesh, MeshError, Point};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<(), MeshError> {
    let io = |e: std::io::Error| MeshError::Io(e.to_string());
    writeln!(out, "{}", mesh.num_vertices()).map_err(io)?;
    for p in mesh.points() {
        writeln!(out, "{} {}", p.x, p.y).map_err(io)?;
    }
    writeln!(out, "{}", mesh.num_elements()).map_err(io)?;
    for tri in mesh.triangles() {
        let [a, b, c] = tri.vertices;
        writeln!(out, "{a} {b} {c} {}", tri.refinement_edge()).map_err(io)?;
    }
    for ([a, b], kind) in mesh.boundary_edges() {
        writeln!(out, "{a} {b} {}", kind.symbol()).map_err(io)?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh, MeshError> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
    let mut next = |what: &str| -> Result<(usize, String), MeshError> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((_, Err(e))) => Err(MeshError::Io(e.to_string())),
            None => Err(MeshError::Parse {
                line: 0,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    };
    fn parse<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, MeshError> {
        tok.and_then(|t| t.parse().ok()).ok_or_else(|| MeshError::Parse {
            line,
            message: format!("expected {what}"),
        })
    }

    let (n, l) = next("vertex count")?;
    let nv: usize = parse(n, l.split_whitespace().next(), "vertex count")?;
    let mut points = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = next("vertex row")?;
        let mut it = l.split_whitespace();
        let x = parse(n, it.next(), "x coordinate")?;
        let y = parse(n, it.next(), "y coordinate")?;
        points.push(Point::new(x, y));
    }
    let (n, l) = next("triangle count")?;
    let nt: usize = parse(n, l.split_whitespace().next(), "triangle count")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (n, l) = next("triangle row")?;
        let mut it = l.split_whitespace();
        let a = parse(n, it.next(), "vertex index")?;
        let b = parse(n, it.next(), "vertex index")?;
        let c = parse(n, it.next(), "vertex index")?;
        let e = parse(n, it.next(), "refinement edge index")?;
        triangles.push(([a, b, c], e));
    }
    let mut boundary = Vec::new();
    loop {
        let (n, l) = match next("boundary row") {
            Ok(row) => row,
            Err(MeshError::Parse { line: 0, .. }) => break,
            Err(e) => return Err(e),
        };
        let mut it = l.split_whitespace();
        let a = parse(n, it.next(), "vertex index")?;
        let b = parse(n, it.next(), "vertex index")?;
        let kind = match it.next() {
            Some("D") => BoundaryKind::Dirichlet,
            Some("N") => BoundaryKind::Neumann,
            _ => {
                return Err(MeshError::Parse {
                    line: n,
                    message: "boundary label must be D or N".into(),
                })
            }
        };
        boundary.push(([a, b], kind));
    }
    Mesh::with_refinement_edges(points, &triangles, &boundary)
}
