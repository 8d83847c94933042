//! Lowest-order (P1) conforming finite element assembly.
//!
//! Dirichlet vertices are eliminated: all vectors and operators live on the
//! free vertices enumerated by a [`DofMap`]. Coefficients are frozen per
//! element at the centroid; loads use the triangle rule of the configured
//! degree and a Gauss rule on Neumann edges.

mod fields;
mod operator;

use thiserror::Error;

pub use fields::{
    CoefficientField, GoalData, MatrixFn, NeumannFn, ProblemData, RegionFn, ScalarFn, VectorField, VectorFn,
};
pub use operator::{direct_solve, dot, DirectSolver, DofMap, FemVector, SparseSymmetricOperator};

use crate::mesh::{BoundaryKind, Mesh};
use crate::quadrature::{EdgeRule, TriangleRule};

/// Default quadrature degree (3-point rule on triangles, 2-point Gauss on edges).
pub const DEFAULT_QUADRATURE_DEGREE: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coefficient on element {element}: {reason}")]
    InvalidCoefficient { element: usize, reason: String },
    #[error("negative quadratic form vᵀAv = {0}")]
    NegativeQuadraticForm(f64),
    #[error("factorization failed: {0}")]
    Factorization(String),
}

/// Area and barycentric gradients of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    /// `grads[i]` is the gradient of the hat function of local vertex `i`.
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn of(mesh: &Mesh, element: usize) -> Self {
        let [p0, p1, p2] = mesh.element_points(element);
        let det = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
        let grads = [
            [(p1.y - p2.y) / det, (p2.x - p1.x) / det],
            [(p2.y - p0.y) / det, (p0.x - p2.x) / det],
            [(p0.y - p1.y) / det, (p1.x - p0.x) / det],
        ];
        Self {
            area: 0.5 * det,
            grads,
        }
    }

    /// Gradient of the P1 function with the given local nodal values.
    pub fn gradient(&self, local: [f64; 3]) -> [f64; 2] {
        [
            local[0] * self.grads[0][0] + local[1] * self.grads[1][0] + local[2] * self.grads[2][0],
            local[0] * self.grads[0][1] + local[1] * self.grads[1][1] + local[2] * self.grads[2][1],
        ]
    }
}

/// Frozen per-element coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementCoefficients {
    pub diffusion: [[f64; 2]; 2],
    pub reaction: f64,
}

impl ElementCoefficients {
    pub fn apply(&self, g: [f64; 2]) -> [f64; 2] {
        let a = self.diffusion;
        [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]]
    }
}

impl CoefficientField {
    /// Evaluates `A` and `c` at every centroid and checks that `A` is
    /// symmetric positive definite and `c >= 0`.
    pub fn evaluate(&self, mesh: &Mesh) -> Result<Vec<ElementCoefficients>, AssemblyError> {
        (0..mesh.num_elements())
            .map(|t| {
                let x = mesh.centroid(t);
                let a = (self.diffusion)(x);
                let c = (self.reaction)(x);
                let scale = a[0][0].abs().max(a[1][1].abs()).max(f64::MIN_POSITIVE);
                if (a[0][1] - a[1][0]).abs() > 1e-12 * scale {
                    return Err(AssemblyError::InvalidCoefficient {
                        element: t,
                        reason: "diffusion matrix is not symmetric".into(),
                    });
                }
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                if !(a[0][0] > 0.0 && det > 0.0) {
                    return Err(AssemblyError::InvalidCoefficient {
                        element: t,
                        reason: "diffusion matrix is not positive definite".into(),
                    });
                }
                if !(c >= 0.0) {
                    return Err(AssemblyError::InvalidCoefficient {
                        element: t,
                        reason: format!("reaction coefficient {c} is negative"),
                    });
                }
                Ok(ElementCoefficients {
                    diffusion: a,
                    reaction: c,
                })
            })
            .collect()
    }
}

fn check_dofmap(mesh: &Mesh, dofmap: &DofMap) -> Result<(), AssemblyError> {
    if dofmap.num_vertices() != mesh.num_vertices() {
        return Err(AssemblyError::DimensionMismatch {
            expected: mesh.num_vertices(),
            found: dofmap.num_vertices(),
        });
    }
    Ok(())
}

/// Local matrix `|T| ∇φ_i·A∇φ_j + c ∫_T φ_i φ_j`.
pub fn local_stiffness(geo: &ElementGeometry, coeff: &ElementCoefficients) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    let mass = coeff.reaction * geo.area / 12.0;
    for i in 0..3 {
        let ag = coeff.apply(geo.grads[i]);
        for j in 0..3 {
            let gj = geo.grads[j];
            k[i][j] = geo.area * (ag[0] * gj[0] + ag[1] * gj[1]) + mass * if i == j { 2.0 } else { 1.0 };
        }
    }
    k
}

/// Assembles `a(φ_i, φ_j)` over the free vertices.
pub fn assemble_operator(
    mesh: &Mesh,
    coefficients: &CoefficientField,
    dofmap: &DofMap,
) -> Result<SparseSymmetricOperator, AssemblyError> {
    let coeffs = coefficients.evaluate(mesh)?;
    assemble_operator_with(mesh, &coeffs, dofmap)
}

/// As [`assemble_operator`] with pre-evaluated element coefficients.
pub fn assemble_operator_with(
    mesh: &Mesh,
    coeffs: &[ElementCoefficients],
    dofmap: &DofMap,
) -> Result<SparseSymmetricOperator, AssemblyError> {
    check_dofmap(mesh, dofmap)?;
    if coeffs.len() != mesh.num_elements() {
        return Err(AssemblyError::DimensionMismatch {
            expected: mesh.num_elements(),
            found: coeffs.len(),
        });
    }
    let mut rows: Vec<Vec<usize>> = (0..dofmap.num_dofs()).map(|i| vec![i]).collect();
    for &[a, b] in mesh.edges() {
        if let (Some(i), Some(j)) = (dofmap.dof(a), dofmap.dof(b)) {
            rows[i].push(j);
            rows[j].push(i);
        }
    }
    for row in &mut rows {
        row.sort_unstable();
    }
    let mut op = SparseSymmetricOperator::with_pattern(rows);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let geo = ElementGeometry::of(mesh, t);
        let k = local_stiffness(&geo, &coeffs[t]);
        let dofs = tri.vertices.map(|v| dofmap.dof(v));
        for i in 0..3 {
            let Some(di) = dofs[i] else { continue };
            for j in 0..3 {
                if let Some(dj) = dofs[j] {
                    op.add(di, dj, k[i][j]);
                }
            }
        }
    }
    Ok(op)
}

/// Nodal load `∫ s φ_i - ∫ 𝒗·∇φ_i` over the selected elements, plus the
/// Neumann term `∫_{Γ_N} φ φ_i` when given.
fn assemble_nodal_load(
    mesh: &Mesh,
    source: Option<&ScalarFn>,
    flux: Option<&VectorFn>,
    neumann: Option<&NeumannFn>,
    include: impl Fn(usize) -> bool,
    degree: u32,
) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    if source.is_some() || flux.is_some() {
        let rule = TriangleRule::with_degree(degree);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if !include(t) {
                continue;
            }
            let geo = ElementGeometry::of(mesh, t);
            let mut local = [0.0; 3];
            for (lambda, w) in rule.points.iter().zip(&rule.weights) {
                let x = mesh.point_at(t, *lambda);
                let wa = w * geo.area;
                if let Some(f) = source {
                    let fx = f(x);
                    for i in 0..3 {
                        local[i] += wa * fx * lambda[i];
                    }
                }
                if let Some(v) = flux {
                    let vx = v(x);
                    for i in 0..3 {
                        local[i] -= wa * (vx[0] * geo.grads[i][0] + vx[1] * geo.grads[i][1]);
                    }
                }
            }
            for i in 0..3 {
                load[tri.vertices[i]] += local[i];
            }
        }
    }
    if let Some(phi) = neumann {
        let rule = EdgeRule::with_degree(degree + 1);
        for e in 0..mesh.num_edges() {
            if mesh.edge_label(e) != Some(BoundaryKind::Neumann) {
                continue;
            }
            let (a, b, normal, len) = oriented_boundary_edge(mesh, e);
            let (pa, pb) = (mesh.points()[a], mesh.points()[b]);
            for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                let x = crate::mesh::Point::new(pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y));
                let g = w * len * phi(x, normal);
                load[a] += g * (1.0 - s);
                load[b] += g * s;
            }
        }
    }
    load
}

/// Endpoints `(a, b)` of boundary edge `e` in the counterclockwise sense of
/// its element, with the outward unit normal and the length.
pub fn oriented_boundary_edge(mesh: &Mesh, e: usize) -> (usize, usize, [f64; 2], f64) {
    let t = mesh.edge_elements(e)[0];
    let tri = mesh.triangles()[t];
    let k = (0..3)
        .find(|&k| mesh.element_edges(t)[k] == e)
        .expect("edge not in its element");
    let [a, b] = tri.local_edge(k);
    let (pa, pb) = (mesh.points()[a], mesh.points()[b]);
    let len = pa.distance(pb);
    // Counterclockwise traversal: the outward normal is the tangent rotated clockwise.
    let normal = [(pb.y - pa.y) / len, -(pb.x - pa.x) / len];
    (a, b, normal, len)
}

/// Primal load vector `F(φ_i) = ∫ f φ_i - ∫ 𝒇·∇φ_i + ∫_{Γ_N} φ φ_i`.
pub fn assemble_primal_load(mesh: &Mesh, problem: &ProblemData, dofmap: &DofMap, degree: u32) -> FemVector {
    let nodal = assemble_nodal_load(
        mesh,
        problem.source.as_ref(),
        problem.flux.as_ref().map(|f| &f.value),
        problem.neumann.as_ref(),
        |_| true,
        degree,
    );
    dofmap.restrict(&nodal)
}

/// Dual load vector `G(φ_i) = ∫_ω g φ_i - ∫_ω 𝒈·∇φ_i`.
pub fn assemble_dual_load(mesh: &Mesh, goal: &GoalData, dofmap: &DofMap, degree: u32) -> FemVector {
    let inside: Vec<bool> = (0..mesh.num_elements()).map(|t| goal.in_region(mesh.centroid(t))).collect();
    let nodal = assemble_nodal_load(
        mesh,
        goal.weight.as_ref(),
        goal.gradient_weight.as_ref().map(|g| &g.value),
        None,
        |t| inside[t],
        degree,
    );
    dofmap.restrict(&nodal)
}

/// `G(v)` for the P1 function with free coefficients `v`, by the same
/// quadrature as [`assemble_dual_load`].
pub fn evaluate_goal(mesh: &Mesh, dofmap: &DofMap, v: &[f64], goal: &GoalData, degree: u32) -> f64 {
    let nodal = dofmap.expand(v);
    let rule = TriangleRule::with_degree(degree);
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if !goal.in_region(mesh.centroid(t)) {
            continue;
        }
        let geo = ElementGeometry::of(mesh, t);
        let local = tri.vertices.map(|i| nodal[i]);
        let grad = geo.gradient(local);
        for (lambda, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_at(t, *lambda);
            let wa = w * geo.area;
            if let Some(g) = &goal.weight {
                total += wa * g(x) * (lambda[0] * local[0] + lambda[1] * local[1] + lambda[2] * local[2]);
            }
            if let Some(gv) = &goal.gradient_weight {
                let gx = (gv.value)(x);
                total -= wa * (gx[0] * grad[0] + gx[1] * grad[1]);
            }
        }
    }
    total
}

/// `sqrt(vᵀ A v)`.
pub fn energy_norm(op: &SparseSymmetricOperator, v: &[f64]) -> Result<f64, AssemblyError> {
    if v.len() != op.dim() {
        return Err(AssemblyError::DimensionMismatch {
            expected: op.dim(),
            found: v.len(),
        });
    }
    let q = op.bilinear(v, v);
    if q >= 0.0 {
        return Ok(q.sqrt());
    }
    // Cancellation in vᵀAv can leave a tiny negative value.
    let scale: f64 = op.diagonal().iter().zip(v).map(|(d, x)| d.abs() * x * x).sum();
    if q >= -1e-12 * scale {
        Ok(0.0)
    } else {
        Err(AssemblyError::NegativeQuadraticForm(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryKind, Point};

    fn unit_triangle(kind: BoundaryKind) -> Mesh {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let bnd = [([0, 1], kind), ([1, 2], kind), ([2, 0], kind)];
        Mesh::build_initial(pts, &[[0, 1, 2]], &bnd).unwrap()
    }

    #[test]
    fn local_stiffness_of_unit_triangle() {
        let mesh = unit_triangle(BoundaryKind::Neumann);
        let dofs = DofMap::new(&mesh);
        assert_eq!(dofs.num_dofs(), 3);
        let op = assemble_operator(&mesh, &CoefficientField::laplace(), &dofs).unwrap();
        // Indexed by the original vertex numbers (dof i == vertex i here).
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((op.get(i, j) - expected[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn mass_part_of_unit_triangle() {
        let mesh = unit_triangle(BoundaryKind::Neumann);
        let dofs = DofMap::new(&mesh);
        let eps = 1e-9;
        let coeff = CoefficientField::constant([[eps, 0.0], [0.0, eps]], 1.0);
        let op = assemble_operator(&mesh, &coeff, &dofs).unwrap();
        let stiff = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                let mass = 0.5 / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((op.get(i, j) - eps * stiff[i][j] - mass).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn invalid_coefficients_are_rejected() {
        let mesh = unit_triangle(BoundaryKind::Neumann);
        let dofs = DofMap::new(&mesh);
        let bad = CoefficientField::constant([[0.0, 0.0], [0.0, 0.0]], 1.0);
        assert!(matches!(
            assemble_operator(&mesh, &bad, &dofs),
            Err(AssemblyError::InvalidCoefficient { .. })
        ));
        let bad = CoefficientField::constant([[1.0, 0.0], [0.0, 1.0]], -1.0);
        assert!(assemble_operator(&mesh, &bad, &dofs).is_err());
    }

    #[test]
    fn dofmap_mismatch_is_an_error() {
        let mesh = unit_triangle(BoundaryKind::Neumann);
        let other = DofMap::new(&mesh.refine(&[0]).unwrap());
        assert!(matches!(
            assemble_operator(&mesh, &CoefficientField::laplace(), &other),
            Err(AssemblyError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_source_load() {
        let mesh = unit_triangle(BoundaryKind::Neumann);
        let dofs = DofMap::new(&mesh);
        let zero = assemble_primal_load(&mesh, &ProblemData::default(), &dofs, 2);
        assert!(zero.iter().all(|&v| v == 0.0));
        let data = ProblemData::default().with_source(|_| 1.0);
        let load = assemble_primal_load(&mesh, &data, &dofs, 2);
        for v in load.iter() {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_flux_load_sums_to_zero() {
        // Interior vertex of the crossed square: Σ_i ∇φ_i = 0 on every element.
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.5, 0.5),
        ];
        let bnd: Vec<_> = [[0, 1], [1, 2], [2, 3], [3, 0]]
            .into_iter()
            .map(|e| (e, BoundaryKind::Neumann))
            .collect();
        let mesh = Mesh::build_initial(pts, &[[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]], &bnd).unwrap();
        let dofs = DofMap::new(&mesh);
        let data = ProblemData::default().with_flux(VectorField::constant([0.3, -1.7]));
        let load = assemble_primal_load(&mesh, &data, &dofs, 2);
        assert!(load.iter().sum::<f64>().abs() < 1e-14);
        // The interior vertex alone: ∫ ∇φ_4 = 0 over its closed patch.
        assert!(load[4].abs() < 1e-14);
    }

    #[test]
    fn neumann_load_of_constant_flux() {
        // φ = 1 on the hypotenuse of length sqrt 2: each endpoint gets sqrt(2)/2.
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let bnd = [
            ([0, 1], BoundaryKind::Dirichlet),
            ([1, 2], BoundaryKind::Neumann),
            ([2, 0], BoundaryKind::Dirichlet),
        ];
        let mesh = Mesh::build_initial(pts, &[[0, 1, 2]], &bnd).unwrap();
        let nodal = assemble_nodal_load(&mesh, None, None, Some(&(std::sync::Arc::new(|_, n: [f64; 2]| {
            // Outward normal of the hypotenuse.
            assert!((n[0] - 0.5f64.sqrt()).abs() < 1e-15 && (n[1] - 0.5f64.sqrt()).abs() < 1e-15);
            1.0
        }) as NeumannFn)), |_| true, 2);
        assert!((nodal[1] - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert!((nodal[2] - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(nodal[0], 0.0);
    }

    #[test]
    fn goal_matches_dual_load() {
        let mesh = unit_triangle(BoundaryKind::Neumann).refine(&[0]).unwrap().refine(&[0, 1]).unwrap();
        let dofs = DofMap::new(&mesh);
        let goal = GoalData::default()
            .with_weight(|p| 1.0 + p.x * p.y)
            .with_gradient_weight(VectorField::constant([-1.0, 0.5]))
            .with_region(|p| p.x > 0.2);
        let load = assemble_dual_load(&mesh, &goal, &dofs, 2);
        let v: Vec<f64> = (0..dofs.num_dofs()).map(|i| (i as f64 * 0.37).sin()).collect();
        let direct = evaluate_goal(&mesh, &dofs, &v, &goal, 2);
        let via_load = load.dot(&v);
        assert!((direct - via_load).abs() <= 1e-12 * direct.abs().max(1e-300));
        assert_eq!(evaluate_goal(&mesh, &dofs, &vec![0.0; v.len()], &goal, 2), 0.0);
    }

    #[test]
    fn energy_norm_basics() {
        let op = SparseSymmetricOperator::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        assert_eq!(energy_norm(&op, &[0.0, 0.0]).unwrap(), 0.0);
        assert!((energy_norm(&op, &[1.0, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let bad = SparseSymmetricOperator::from_dense(&[vec![-1.0]]);
        assert!(matches!(energy_norm(&bad, &[1.0]), Err(AssemblyError::NegativeQuadraticForm(_))));
        assert!(energy_norm(&op, &[1.0]).is_err());
    }
}
