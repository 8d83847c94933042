//! Newest-vertex bisection with conforming closure.

use super::{BoundaryKind, Mesh, MeshError, Point, Triangle, NO_ELEMENT};

/// How a refined mesh relates to its predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRecord {
    /// Parent (index in the previous mesh) of every element.
    pub parents: Vec<usize>,
    pub previous_vertex_count: usize,
    pub previous_element_count: usize,
    /// Number of elements of the previous mesh that were refined, marked or
    /// added by closure.
    pub refined_elements: usize,
    /// Endpoints of every edge bisected in this step, in vertex-creation
    /// order (the midpoint of entry `i` is vertex `previous_vertex_count + i`).
    pub bisected_edges: Vec<[usize; 2]>,
}

impl Mesh {
    /// Refines all `marked` elements by newest-vertex bisection and closes
    /// the result conformingly. Returns the coarsest conforming NVB
    /// refinement in which every marked element has been bisected at least
    /// once.
    ///
    /// Closure works on edges: marking an edge forces the refinement edge of
    /// every element containing it, until the set is stable. Each element is
    /// then split into 2, 3 or 4 children depending on which of its edges are
    /// marked; the refinement edge is always among them.
    pub fn refine(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        let n_elem = self.triangles.len();
        let mut edge_marked = vec![false; self.edges.len()];
        let mut stack = Vec::new();
        for &t in marked {
            if t >= n_elem {
                return Err(MeshError::MarkedOutOfRange {
                    index: t,
                    count: n_elem,
                });
            }
            let e = self.element_edges[t][0];
            if !edge_marked[e] {
                edge_marked[e] = true;
                stack.push(e);
            }
        }
        while let Some(e) = stack.pop() {
            for t in self.edge_elements[e] {
                if t == NO_ELEMENT {
                    continue;
                }
                let r = self.element_edges[t][0];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    stack.push(r);
                }
            }
        }

        let mut points = self.points.clone();
        let mut vertex_parents = self.vertex_parents.clone();
        let mut midpoint = vec![usize::MAX; self.edges.len()];
        let mut bisected_edges = Vec::new();
        for (e, &is_marked) in edge_marked.iter().enumerate() {
            if is_marked {
                let [a, b] = self.edges[e];
                midpoint[e] = points.len();
                points.push(self.points[a].midpoint(self.points[b]));
                vertex_parents.push(Some([a, b]));
                bisected_edges.push([a, b]);
            }
        }

        let mut triangles = Vec::with_capacity(n_elem + 2 * bisected_edges.len());
        let mut parents = Vec::with_capacity(triangles.capacity());
        let mut refined_elements = 0;
        for (t, tri) in self.triangles.iter().enumerate() {
            let [e0, e1, e2] = self.element_edges[t];
            let [v0, v1, v2] = tri.vertices;
            let g = tri.generation;
            if !edge_marked[e0] {
                triangles.push(*tri);
                parents.push(t);
                continue;
            }
            refined_elements += 1;
            let m = midpoint[e0];
            // Children of the first bisection: (v2, v0, m) and (v1, v2, m),
            // each with refinement edge opposite the new vertex m.
            let mut push = |vertices: [usize; 3], generation: u32| {
                triangles.push(Triangle {
                    vertices,
                    generation,
                });
                parents.push(t);
            };
            if edge_marked[e2] {
                let m2 = midpoint[e2];
                push([m, v2, m2], g + 2);
                push([v0, m, m2], g + 2);
            } else {
                push([v2, v0, m], g + 1);
            }
            if edge_marked[e1] {
                let m1 = midpoint[e1];
                push([m, v1, m1], g + 2);
                push([v2, m, m1], g + 2);
            } else {
                push([v1, v2, m], g + 1);
            }
        }

        let mut boundary: Vec<([usize; 2], BoundaryKind)> = Vec::new();
        for (e, label) in self.edge_labels.iter().enumerate() {
            if let Some(kind) = *label {
                let [a, b] = self.edges[e];
                if edge_marked[e] {
                    boundary.push(([a, midpoint[e]], kind));
                    boundary.push(([midpoint[e], b], kind));
                } else {
                    boundary.push(([a, b], kind));
                }
            }
        }

        let record = RefinementRecord {
            parents,
            previous_vertex_count: self.points.len(),
            previous_element_count: n_elem,
            refined_elements,
            bisected_edges,
        };
        Mesh::assemble(points, triangles, &boundary, vertex_parents, Some(record))
    }

    /// Refines every element once (each element bisected at least once).
    pub fn refine_uniform(&self) -> Result<Mesh, MeshError> {
        let all: Vec<usize> = (0..self.num_elements()).collect();
        self.refine(&all)
    }

    /// Interpolates vertex values from an ancestor mesh with
    /// `coarse.len()` vertices onto this mesh. Exact for P1 functions.
    pub fn prolongate(&self, coarse: &[f64]) -> Vec<f64> {
        assert!(coarse.len() <= self.points.len(), "coarse vector larger than mesh");
        let mut fine = Vec::with_capacity(self.points.len());
        fine.extend_from_slice(coarse);
        for v in coarse.len()..self.points.len() {
            let [a, b] = self.vertex_parents[v].expect("vertex without parents beyond the coarse mesh");
            fine.push(0.5 * (fine[a] + fine[b]));
        }
        fine
    }

    /// Point-wise evaluation helper for nodal vectors (linear interpolation
    /// inside `element`).
    pub fn interpolate_in(&self, element: usize, nodal: &[f64], lambda: [f64; 3]) -> f64 {
        let v = self.triangles[element].vertices;
        lambda[0] * nodal[v[0]] + lambda[1] * nodal[v[1]] + lambda[2] * nodal[v[2]]
    }

    pub fn point_at(&self, element: usize, lambda: [f64; 3]) -> Point {
        let p = self.element_points(element);
        Point::new(
            lambda[0] * p[0].x + lambda[1] * p[1].x + lambda[2] * p[2].x,
            lambda[0] * p[0].y + lambda[1] * p[1].y + lambda[2] * p[2].y,
        )
    }
}

/// Sons estimate `#(T_H \ T_h) + #T_H <= #T_h` for one refinement step.
pub fn sons_estimate_holds(coarse: &Mesh, fine: &Mesh) -> bool {
    let refined = fine
        .refinement()
        .map(|r| r.refined_elements)
        .unwrap_or(0);
    refined + coarse.num_elements() <= fine.num_elements()
}

/// `(#T_l - #T_0) / sum_j #M_j`, the empirical mesh-closure constant.
pub fn closure_ratio(
    marked_counts: &[usize],
    current_elements: usize,
    initial_elements: usize,
) -> Result<f64, MeshError> {
    let total: usize = marked_counts.iter().sum();
    if total == 0 {
        return Err(MeshError::NothingMarked);
    }
    Ok((current_elements as f64 - initial_elements as f64) / total as f64)
}
