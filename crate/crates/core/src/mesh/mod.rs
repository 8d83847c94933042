//! Conforming triangulations with newest-vertex bisection.
//!
//! Every [`Triangle`] stores its vertices counterclockwise and rotated so that
//! `(v0, v1)` is the refinement edge and `v2` the newest vertex. Local edge
//! `k` of a triangle is `(v_k, v_{k+1 mod 3})`, hence local edge 0 is always
//! the refinement edge.
//!
//! Vertex indices are stable under refinement: new vertices are appended, and
//! each new vertex remembers the two endpoints of the edge it bisected. That
//! is all the prolongation between nested P1 spaces needs.

mod io;
mod refine;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use io::{read_mesh, write_mesh};
pub use refine::{closure_ratio, sons_estimate_holds, RefinementRecord};

/// Marker for "no element" in [`Mesh::edge_elements`].
pub const NO_ELEMENT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

impl BoundaryKind {
    pub fn symbol(self) -> char {
        match self {
            BoundaryKind::Dirichlet => 'D',
            BoundaryKind::Neumann => 'N',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    /// Counterclockwise; `(vertices[0], vertices[1])` is the refinement edge.
    pub vertices: [usize; 3],
    /// Number of bisections separating this element from its initial ancestor.
    pub generation: u32,
}

impl Triangle {
    /// Local index of the refinement edge. Always 0 by the storage convention.
    pub const fn refinement_edge(&self) -> usize {
        0
    }

    pub fn local_edge(&self, k: usize) -> [usize; 2] {
        [self.vertices[k], self.vertices[(k + 1) % 3]]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {vertex}, but only {count} vertices exist")]
    InvalidVertex {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("vertex {0} has non-finite coordinates")]
    NonFiniteVertex(usize),
    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),
    #[error("non-conforming mesh at edge ({}, {}): {reason}", .edge[0], .edge[1])]
    NonConforming { edge: [usize; 2], reason: String },
    #[error("inconsistent boundary label on edge ({}, {}): {reason}", .edge[0], .edge[1])]
    InconsistentBoundary { edge: [usize; 2], reason: String },
    #[error("refinement edge index {index} of triangle {triangle} is not in 0..3")]
    InvalidRefinementEdge { triangle: usize, index: usize },
    #[error("marked element {index} is out of range (mesh has {count} elements)")]
    MarkedOutOfRange { index: usize, count: usize },
    #[error("closure ratio undefined: no element has been marked")]
    NothingMarked,
    #[error("mesh format error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh i/o: {0}")]
    Io(String),
}

/// A conforming triangulation together with its edge adjacency.
#[derive(Debug, Clone)]
pub struct Mesh {
    points: Vec<Point>,
    triangles: Vec<Triangle>,
    /// Sorted endpoint pairs.
    edges: Vec<[usize; 2]>,
    edge_labels: Vec<Option<BoundaryKind>>,
    /// The (one or two) elements containing each edge; [`NO_ELEMENT`] pads.
    edge_elements: Vec<[usize; 2]>,
    /// Global edge index of each local edge.
    element_edges: Vec<[usize; 3]>,
    /// For vertices created by bisection: the endpoints of the bisected edge.
    vertex_parents: Vec<Option<[usize; 2]>>,
    refinement: Option<RefinementRecord>,
}

/// Result of [`check_conformity`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConformityReport {
    pub violations: Vec<Violation>,
}

impl ConformityReport {
    pub fn is_conforming(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveArea { element: usize },
    /// An edge is claimed by more than two elements, or an element's local
    /// edge does not match the edge table.
    EdgeTopology { edge: [usize; 2], reason: String },
    /// The two elements across an edge do not see each other.
    Adjacency { edge: [usize; 2] },
    HangingVertex { vertex: usize, edge: [usize; 2] },
    UnlabelledBoundaryEdge { edge: [usize; 2] },
    LabelledInteriorEdge { edge: [usize; 2] },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveArea { element } => {
                write!(f, "element {element} has non-positive area")
            }
            Violation::EdgeTopology { edge, reason } => {
                write!(f, "edge ({}, {}): {reason}", edge[0], edge[1])
            }
            Violation::Adjacency { edge } => {
                write!(f, "edge ({}, {}): adjacency is inconsistent", edge[0], edge[1])
            }
            Violation::HangingVertex { vertex, edge } => write!(
                f,
                "vertex {vertex} hangs on edge ({}, {})",
                edge[0], edge[1]
            ),
            Violation::UnlabelledBoundaryEdge { edge } => {
                write!(f, "boundary edge ({}, {}) has no label", edge[0], edge[1])
            }
            Violation::LabelledInteriorEdge { edge } => {
                write!(f, "interior edge ({}, {}) carries a label", edge[0], edge[1])
            }
        }
    }
}

fn sorted(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn signed_area2(p: [Point; 3]) -> f64 {
    (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x)
}

impl Mesh {
    /// Builds the initial mesh `T_0`.
    ///
    /// Triangles may be given in either orientation. The refinement edge of
    /// each triangle is its longest edge; ties go to the edge with the
    /// lexicographically smallest sorted vertex pair.
    pub fn build_initial(
        points: Vec<Point>,
        triangles: &[[usize; 3]],
        boundary: &[([usize; 2], BoundaryKind)],
    ) -> Result<Mesh, MeshError> {
        validate_points(&points)?;
        let mut elements = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut v = *tri;
            check_indices(t, &v, points.len())?;
            let area2 = signed_area2(v.map(|i| points[i]));
            if area2 == 0.0 || !area2.is_finite() {
                return Err(MeshError::DegenerateTriangle(t));
            }
            if area2 < 0.0 {
                v.swap(1, 2);
            }
            let mut best = 0;
            let mut best_len = -1.0;
            let mut best_key = [usize::MAX; 2];
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let len = points[a].distance(points[b]);
                let key = sorted(a, b);
                if len > best_len || (len == best_len && key < best_key) {
                    best = k;
                    best_len = len;
                    best_key = key;
                }
            }
            v.rotate_left(best);
            elements.push(Triangle {
                vertices: v,
                generation: 0,
            });
        }
        let n = points.len();
        Mesh::assemble(points, elements, boundary, vec![None; n], None)
    }

    /// Builds a mesh with explicitly prescribed refinement edges; `edge`
    /// index `k` denotes local edge `(v_k, v_{k+1})` of the given counterclockwise
    /// vertex triple.
    pub fn with_refinement_edges(
        points: Vec<Point>,
        triangles: &[([usize; 3], usize)],
        boundary: &[([usize; 2], BoundaryKind)],
    ) -> Result<Mesh, MeshError> {
        validate_points(&points)?;
        let mut elements = Vec::with_capacity(triangles.len());
        for (t, &(tri, edge)) in triangles.iter().enumerate() {
            check_indices(t, &tri, points.len())?;
            if edge > 2 {
                return Err(MeshError::InvalidRefinementEdge {
                    triangle: t,
                    index: edge,
                });
            }
            let area2 = signed_area2(tri.map(|i| points[i]));
            if area2 <= 0.0 || !area2.is_finite() {
                return Err(MeshError::DegenerateTriangle(t));
            }
            let mut v = tri;
            v.rotate_left(edge);
            elements.push(Triangle {
                vertices: v,
                generation: 0,
            });
        }
        let n = points.len();
        Mesh::assemble(points, elements, boundary, vec![None; n], None)
    }

    /// Builds edge tables and validates conformity and boundary labels.
    fn assemble(
        points: Vec<Point>,
        triangles: Vec<Triangle>,
        boundary: &[([usize; 2], BoundaryKind)],
        vertex_parents: Vec<Option<[usize; 2]>>,
        refinement: Option<RefinementRecord>,
    ) -> Result<Mesh, MeshError> {
        let mut lookup: HashMap<[usize; 2], usize> =
            HashMap::with_capacity(triangles.len() * 3 / 2 + 8);
        let mut edges = Vec::with_capacity(triangles.len() * 3 / 2 + 8);
        let mut edge_elements: Vec<[usize; 2]> = Vec::with_capacity(edges.capacity());
        let mut element_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let [a, b] = tri.local_edge(k);
                let key = sorted(a, b);
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_elements.push([NO_ELEMENT; 2]);
                    edges.len() - 1
                });
                let owners = &mut edge_elements[id];
                if owners[0] == NO_ELEMENT {
                    owners[0] = t;
                } else if owners[1] == NO_ELEMENT {
                    // A conforming, consistently oriented mesh traverses a
                    // shared edge in opposite directions from its two sides.
                    let other = triangles[owners[0]];
                    let same_direction = (0..3).any(|j| other.local_edge(j) == [a, b]);
                    if same_direction {
                        return Err(MeshError::NonConforming {
                            edge: key,
                            reason: "elements overlap across this edge".into(),
                        });
                    }
                    owners[1] = t;
                } else {
                    return Err(MeshError::NonConforming {
                        edge: key,
                        reason: "more than two elements share this edge".into(),
                    });
                }
                *slot = id;
            }
            element_edges.push(local);
        }

        let mut edge_labels = vec![None; edges.len()];
        for &([a, b], kind) in boundary {
            let key = sorted(a, b);
            let Some(&id) = lookup.get(&key) else {
                return Err(MeshError::InconsistentBoundary {
                    edge: key,
                    reason: "labelled edge is not an edge of the mesh".into(),
                });
            };
            if edge_elements[id][1] != NO_ELEMENT {
                return Err(MeshError::InconsistentBoundary {
                    edge: key,
                    reason: "interior edge carries a boundary label".into(),
                });
            }
            if edge_labels[id].is_some() {
                return Err(MeshError::InconsistentBoundary {
                    edge: key,
                    reason: "edge labelled twice".into(),
                });
            }
            edge_labels[id] = Some(kind);
        }

        let mesh = Mesh {
            points,
            triangles,
            edges,
            edge_labels,
            edge_elements,
            element_edges,
            vertex_parents,
            refinement,
        };
        let unlabelled: Vec<usize> = (0..mesh.edges.len())
            .filter(|&e| mesh.edge_elements[e][1] == NO_ELEMENT && mesh.edge_labels[e].is_none())
            .collect();
        if let Some(&e) = unlabelled.first() {
            let hanging = mesh.hanging_vertices();
            if let Some(&(vertex, edge)) = hanging.first() {
                return Err(MeshError::NonConforming {
                    edge,
                    reason: format!("vertex {vertex} hangs on this edge"),
                });
            }
            return Err(MeshError::InconsistentBoundary {
                edge: mesh.edges[e],
                reason: "boundary edge has no label".into(),
            });
        }
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_label(&self, edge: usize) -> Option<BoundaryKind> {
        self.edge_labels[edge]
    }

    pub fn edge_elements(&self, edge: usize) -> [usize; 2] {
        self.edge_elements[edge]
    }

    pub fn element_edges(&self, element: usize) -> [usize; 3] {
        self.element_edges[element]
    }

    /// Element across local edge `k` of `element`, if any.
    pub fn neighbor(&self, element: usize, k: usize) -> Option<usize> {
        let [a, b] = self.edge_elements[self.element_edges[element][k]];
        let other = if a == element { b } else { a };
        (other != NO_ELEMENT).then_some(other)
    }

    pub fn vertex_parents(&self, vertex: usize) -> Option<[usize; 2]> {
        self.vertex_parents[vertex]
    }

    /// Provenance of this mesh if it was produced by [`Mesh::refine`].
    pub fn refinement(&self) -> Option<&RefinementRecord> {
        self.refinement.as_ref()
    }

    pub fn element_points(&self, element: usize) -> [Point; 3] {
        self.triangles[element].vertices.map(|v| self.points[v])
    }

    pub fn area(&self, element: usize) -> f64 {
        0.5 * signed_area2(self.element_points(element))
    }

    pub fn centroid(&self, element: usize) -> Point {
        let [a, b, c] = self.element_points(element);
        Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    /// Boundary edges as `(endpoints, label)` in edge order.
    pub fn boundary_edges(&self) -> Vec<([usize; 2], BoundaryKind)> {
        (0..self.edges.len())
            .filter_map(|e| self.edge_labels[e].map(|k| (self.edges[e], k)))
            .collect()
    }

    /// `true` for vertices on a Dirichlet edge.
    pub fn dirichlet_vertices(&self) -> Vec<bool> {
        let mut constrained = vec![false; self.points.len()];
        for (e, label) in self.edge_labels.iter().enumerate() {
            if *label == Some(BoundaryKind::Dirichlet) {
                constrained[self.edges[e][0]] = true;
                constrained[self.edges[e][1]] = true;
            }
        }
        constrained
    }

    /// Smallest interior angle over all elements, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let p = self.element_points(t);
                (0..3)
                    .map(|k| {
                        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                        let u = (b.x - a.x, b.y - a.y);
                        let v = (c.x - a.x, c.y - a.y);
                        let cross = u.0 * v.1 - u.1 * v.0;
                        let dot = u.0 * v.0 + u.1 * v.1;
                        cross.abs().atan2(dot)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Vertices lying strictly inside an edge that has a single incident
    /// element. Such vertices are hanging nodes.
    fn hanging_vertices(&self) -> Vec<(usize, [usize; 2])> {
        if self.points.is_empty() {
            return Vec::new();
        }
        let grid = PointGrid::new(&self.points);
        let mut found = Vec::new();
        for (e, owners) in self.edge_elements.iter().enumerate() {
            if owners[1] != NO_ELEMENT {
                continue;
            }
            let [a, b] = self.edges[e];
            let (pa, pb) = (self.points[a], self.points[b]);
            let len2 = (pb.x - pa.x).powi(2) + (pb.y - pa.y).powi(2);
            let tol = 1e-10 * len2.sqrt();
            grid.for_each_near_segment(pa, pb, |v| {
                if v == a || v == b {
                    return;
                }
                let p = self.points[v];
                let t = ((p.x - pa.x) * (pb.x - pa.x) + (p.y - pa.y) * (pb.y - pa.y)) / len2;
                if t <= 1e-10 || t >= 1.0 - 1e-10 {
                    return;
                }
                let cross = (pb.x - pa.x) * (p.y - pa.y) - (pb.y - pa.y) * (p.x - pa.x);
                if cross.abs() / len2.sqrt() <= tol {
                    found.push((v, [a, b]));
                }
            });
        }
        found.sort_unstable();
        found
    }
}

fn validate_points(points: &[Point]) -> Result<(), MeshError> {
    match points.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
        Some(i) => Err(MeshError::NonFiniteVertex(i)),
        None => Ok(()),
    }
}

fn check_indices(t: usize, tri: &[usize; 3], count: usize) -> Result<(), MeshError> {
    for &v in tri {
        if v >= count {
            return Err(MeshError::InvalidVertex {
                triangle: t,
                vertex: v,
                count,
            });
        }
    }
    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
        return Err(MeshError::DegenerateTriangle(t));
    }
    Ok(())
}

/// Uniform bucket grid over the vertex cloud.
struct PointGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl PointGrid {
    fn new(points: &[Point]) -> Self {
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
        let per_side = (points.len() as f64).sqrt().ceil().max(1.0);
        let cell = extent / per_side;
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut counts = vec![0usize; nx * ny + 1];
        let cell_of = |p: &Point| {
            let i = (((p.x - lo.x) / cell) as usize).min(nx - 1);
            let j = (((p.y - lo.y) / cell) as usize).min(ny - 1);
            j * nx + i
        };
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for c in 1..counts.len() {
            counts[c] += counts[c - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0; points.len()];
        for (v, p) in points.iter().enumerate() {
            let c = cell_of(p);
            items[fill[c]] = v;
            fill[c] += 1;
        }
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            start: counts,
            items,
        }
    }

    fn for_each_near_segment(&self, a: Point, b: Point, mut visit: impl FnMut(usize)) {
        let to_cell = |x: f64, o: f64, n: usize| -> usize {
            let c = ((x - o) / self.cell).floor();
            if c < 0.0 {
                0
            } else {
                (c as usize).min(n - 1)
            }
        };
        let i0 = to_cell(a.x.min(b.x), self.origin.x, self.nx);
        let i1 = to_cell(a.x.max(b.x), self.origin.x, self.nx);
        let j0 = to_cell(a.y.min(b.y), self.origin.y, self.ny);
        let j1 = to_cell(a.y.max(b.y), self.origin.y, self.ny);
        for j in j0.saturating_sub(1)..=(j1 + 1).min(self.ny - 1) {
            for i in i0.saturating_sub(1)..=(i1 + 1).min(self.nx - 1) {
                let c = j * self.nx + i;
                for &v in &self.items[self.start[c]..self.start[c + 1]] {
                    visit(v);
                }
            }
        }
    }
}

/// Checks that `mesh` is a conforming triangulation with consistent
/// adjacency and boundary labels.
pub fn check_conformity(mesh: &Mesh) -> ConformityReport {
    let mut violations = Vec::new();
    for t in 0..mesh.triangles.len() {
        if !(mesh.area(t) > 0.0) {
            violations.push(Violation::NonPositiveArea { element: t });
        }
    }
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let [a, b] = tri.local_edge(k);
            let id = mesh.element_edges[t][k];
            if id >= mesh.edges.len() || mesh.edges[id] != sorted(a, b) {
                violations.push(Violation::EdgeTopology {
                    edge: sorted(a, b),
                    reason: format!("local edge {k} of element {t} is not in the edge table"),
                });
                continue;
            }
            if !mesh.edge_elements[id].contains(&t) {
                violations.push(Violation::Adjacency { edge: mesh.edges[id] });
            }
        }
    }
    for (e, owners) in mesh.edge_elements.iter().enumerate() {
        let edge = mesh.edges[e];
        for &t in owners.iter().filter(|&&t| t != NO_ELEMENT) {
            if t >= mesh.triangles.len() || !mesh.element_edges[t].contains(&e) {
                violations.push(Violation::Adjacency { edge });
            }
        }
        if owners[0] == NO_ELEMENT || owners[0] == owners[1] {
            violations.push(Violation::Adjacency { edge });
        }
        let interior = owners[1] != NO_ELEMENT;
        match (interior, mesh.edge_labels[e]) {
            (true, Some(_)) => violations.push(Violation::LabelledInteriorEdge { edge }),
            (false, None) => violations.push(Violation::UnlabelledBoundaryEdge { edge }),
            _ => {}
        }
    }
    for (vertex, edge) in mesh.hanging_vertices() {
        violations.push(Violation::HangingVertex { vertex, edge });
    }
    violations.dedup();
    ConformityReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Mesh {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let bnd = [
            ([0, 1], BoundaryKind::Dirichlet),
            ([1, 2], BoundaryKind::Dirichlet),
            ([2, 0], BoundaryKind::Dirichlet),
        ];
        Mesh::build_initial(pts, &[[0, 1, 2]], &bnd).unwrap()
    }

    /// Unit square split by both diagonals.
    fn crossed_square() -> Mesh {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.5, 0.5),
        ];
        let tris = [[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        let bnd = [
            ([0, 1], BoundaryKind::Dirichlet),
            ([1, 2], BoundaryKind::Dirichlet),
            ([2, 3], BoundaryKind::Dirichlet),
            ([3, 0], BoundaryKind::Dirichlet),
        ];
        Mesh::build_initial(pts, &tris, &bnd).unwrap()
    }

    #[test]
    fn crossed_square_is_conforming() {
        let mesh = crossed_square();
        assert_eq!(mesh.num_elements(), 4);
        assert_eq!(mesh.num_edges(), 8);
        assert!(check_conformity(&mesh).is_conforming());
        // Longest edge is the outer side.
        for tri in mesh.triangles() {
            assert!(!tri.vertices[..2].contains(&4));
            assert_eq!(tri.vertices[2], 4);
        }
    }

    #[test]
    fn single_triangle_uses_hypotenuse_as_refinement_edge() {
        let mesh = unit_triangle();
        assert_eq!(mesh.num_elements(), 1);
        assert_eq!(mesh.triangles()[0].vertices, [1, 2, 0]);
        assert!((mesh.area(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let bnd = [
            ([0, 1], BoundaryKind::Neumann),
            ([1, 2], BoundaryKind::Neumann),
            ([2, 0], BoundaryKind::Dirichlet),
        ];
        let mesh = Mesh::build_initial(pts, &[[0, 2, 1]], &bnd).unwrap();
        assert!(mesh.area(0) > 0.0);
    }

    #[test]
    fn hanging_node_is_rejected() {
        // Big triangle on the left of x = 1, two small ones on the right that
        // meet it with a vertex at the middle of its edge.
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 2.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 1.0),
        ];
        let tris = [[0, 1, 2], [1, 4, 3], [3, 4, 2]];
        let bnd = [
            ([0, 1], BoundaryKind::Dirichlet),
            ([2, 0], BoundaryKind::Dirichlet),
            ([1, 4], BoundaryKind::Dirichlet),
            ([4, 2], BoundaryKind::Dirichlet),
        ];
        let err = Mesh::build_initial(pts, &tris, &bnd).unwrap_err();
        assert!(matches!(err, MeshError::NonConforming { .. }), "{err}");
    }

    #[test]
    fn degenerate_and_invalid_input() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        let err = Mesh::build_initial(pts.clone(), &[[0, 1, 2]], &[]).unwrap_err();
        assert_eq!(err, MeshError::DegenerateTriangle(0));
        let err = Mesh::build_initial(pts, &[[0, 1, 7]], &[]).unwrap_err();
        assert!(matches!(err, MeshError::InvalidVertex { vertex: 7, .. }));
    }

    #[test]
    fn boundary_label_errors() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        // Missing label.
        let err = Mesh::build_initial(
            pts.clone(),
            &[[0, 1, 2]],
            &[([0, 1], BoundaryKind::Dirichlet), ([1, 2], BoundaryKind::Dirichlet)],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::InconsistentBoundary { .. }));
        // Label on an interior edge.
        let mesh = crossed_square();
        let mut bnd = mesh.boundary_edges();
        bnd.push(([0, 4], BoundaryKind::Neumann));
        let err = Mesh::build_initial(mesh.points().to_vec(), &[[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]], &bnd)
            .unwrap_err();
        assert!(matches!(err, MeshError::InconsistentBoundary { .. }));
        // Label on a non-edge.
        let err = Mesh::build_initial(pts, &[[0, 1, 2]], &[([0, 5], BoundaryKind::Neumann)]).unwrap_err();
        assert!(matches!(err, MeshError::InconsistentBoundary { .. }));
    }

    #[test]
    fn corrupted_adjacency_is_reported() {
        let mut mesh = crossed_square();
        let interior = (0..mesh.num_edges())
            .find(|&e| mesh.edge_elements[e][1] != NO_ELEMENT)
            .unwrap();
        let edge = mesh.edges[interior];
        mesh.edge_elements[interior] = [mesh.edge_elements[interior][0], NO_ELEMENT];
        let report = check_conformity(&mesh);
        assert!(!report.is_conforming());
        assert!(report
            .violations.contains(&Violation::Adjacency { edge }));
    }

    #[test]
    fn neighbors_are_symmetric() {
        let mesh = crossed_square();
        for t in 0..mesh.num_elements() {
            for k in 0..3 {
                if let Some(n) = mesh.neighbor(t, k) {
                    let back = (0..3).filter_map(|j| mesh.neighbor(n, j)).any(|x| x == t);
                    assert!(back);
                }
            }
        }
    }
}
