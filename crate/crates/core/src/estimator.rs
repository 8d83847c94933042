//! Weighted residual error indicators for the primal and the dual problem.
//!
//! For `-div(A∇u + 𝒇) + c u = f` with Neumann datum `φ` the indicator is
//!
//! ```text
//! η(T)² = h_T² ‖f + div 𝒇 - c u_h‖²_T
//!       + h_T ‖⟦(A∇u_h + 𝒇)·n⟧‖²_{∂T∩Ω}
//!       + h_T ‖φ - (A∇u_h + 𝒇)·n‖²_{∂T∩Γ_N}
//! ```
//!
//! with `h_T = |T|^{1/2}`. Every interior jump counts fully for both
//! neighbours. The dual indicator uses `g` and `-𝒈 χ_ω` in place of `f` and
//! `𝒇` and has no Neumann term.
//!
//! The data-dependent parts are precomputed once per mesh in a
//! [`ResidualEstimator`], so re-estimating after every solver step is a
//! cheap sweep over edges and elements.

use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{
    oriented_boundary_edge, AssemblyError, CoefficientField, DofMap, ElementCoefficients, ElementGeometry,
    GoalData, ProblemData, ScalarFn, VectorField,
};
use crate::mesh::{BoundaryKind, Mesh, Point, NO_ELEMENT};
use crate::quadrature::{EdgeRule, TriangleRule};

const PAR_MIN: usize = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("element index {index} out of range for {count} elements")]
    OutOfRange { index: usize, count: usize },
    #[error("indicator {index} is negative or not finite: {value}")]
    InvalidValue { index: usize, value: f64 },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Squared per-element indicators with their cached sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Indicators {
    values: Vec<f64>,
    total_sq: f64,
}

impl Indicators {
    /// Wraps squared indicators; all must be finite and nonnegative.
    pub fn new(values: Vec<f64>) -> Result<Self, EstimatorError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(EstimatorError::InvalidValue { index, value });
        }
        let total_sq = values.iter().sum();
        Ok(Self { values, total_sq })
    }

    /// `μ(T)²` for every element.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `μ = (Σ_T μ(T)²)^{1/2}`.
    pub fn total(&self) -> f64 {
        self.total_sq.sqrt()
    }

    pub fn total_squared(&self) -> f64 {
        self.total_sq
    }

    /// `μ(𝒰) = (Σ_{T∈𝒰} μ(T)²)^{1/2}`.
    pub fn restricted_total(&self, subset: &[usize]) -> Result<f64, EstimatorError> {
        let mut s = 0.0;
        for &t in subset {
            s += self.values.get(t).ok_or(EstimatorError::OutOfRange {
                index: t,
                count: self.values.len(),
            })?;
        }
        Ok(s.sqrt())
    }
}

#[derive(Debug, Clone)]
struct EdgeData {
    elements: [usize; 2],
    normal: [f64; 2],
    length: f64,
    /// Interior: `(𝒇_0 - 𝒇_1)·n` at the quadrature points. Neumann:
    /// `φ - 𝒇_0·n`. Empty for Dirichlet edges.
    data: Vec<f64>,
}

/// Per-mesh precomputation of everything that does not depend on `u_h`.
pub struct ResidualEstimator {
    geometry: Vec<ElementGeometry>,
    coeffs: Vec<ElementCoefficients>,
    vertices: Vec<[usize; 3]>,
    /// Volume residual data `f + div 𝒇` at the triangle quadrature points.
    volume_data: Vec<Vec<f64>>,
    /// `h_T² ‖f + div 𝒇‖²`, valid when no element has a reaction term.
    volume_const: Option<Vec<f64>>,
    element_edges: Vec<[usize; 3]>,
    edges: Vec<EdgeData>,
    tri_rule: TriangleRule,
    edge_weights: Vec<f64>,
}

struct Data<'a> {
    source: Option<&'a ScalarFn>,
    flux: Option<&'a VectorField>,
    region: Option<&'a (dyn Fn(usize) -> bool + Sync)>,
    neumann: Option<&'a crate::assembly::NeumannFn>,
    /// Whether Neumann edges carry a residual term.
    boundary_residual: bool,
}

impl ResidualEstimator {
    /// Context for the primal indicators `η`.
    pub fn primal(mesh: &Mesh, problem: &ProblemData, degree: u32) -> Result<Self, EstimatorError> {
        let data = Data {
            source: problem.source.as_ref(),
            flux: problem.flux.as_ref(),
            region: None,
            neumann: problem.neumann.as_ref(),
            boundary_residual: true,
        };
        Self::build(mesh, &problem.coefficients, data, degree)
    }

    /// Context for the dual indicators `ζ`; `coefficients` are those of the
    /// (symmetric) bilinear form.
    pub fn dual(
        mesh: &Mesh,
        goal: &GoalData,
        coefficients: &CoefficientField,
        degree: u32,
    ) -> Result<Self, EstimatorError> {
        let inside: Vec<bool> = (0..mesh.num_elements()).map(|t| goal.in_region(mesh.centroid(t))).collect();
        let region = move |t: usize| inside[t];
        // The goal enters the weak form as -𝒈·∇v, i.e. with flux -𝒈.
        let flux = goal.gradient_weight.as_ref().map(|g| {
            let value = g.value.clone();
            let mut neg = VectorField::new(move |x| {
                let v = value(x);
                [-v[0], -v[1]]
            });
            if let Some(div) = g.divergence.clone() {
                neg = neg.with_divergence(move |x| -div(x));
            }
            neg
        });
        let data = Data {
            source: goal.weight.as_ref(),
            flux: flux.as_ref(),
            region: Some(&region),
            neumann: None,
            boundary_residual: false,
        };
        Self::build(mesh, coefficients, data, degree)
    }

    fn build(mesh: &Mesh, coefficients: &CoefficientField, src: Data<'_>, degree: u32) -> Result<Self, EstimatorError> {
        let coeffs = coefficients.evaluate(mesh)?;
        let n = mesh.num_elements();
        let tri_rule = TriangleRule::with_degree(degree);
        let edge_rule = EdgeRule::with_degree(degree + 1);
        let active = |t: usize| src.region.is_none_or(|r| r(t));
        let flux_at = |t: usize, x: Point| -> [f64; 2] {
            match src.flux {
                Some(f) if active(t) => (f.value)(x),
                _ => [0.0, 0.0],
            }
        };

        let geometry: Vec<ElementGeometry> = (0..n).map(|t| ElementGeometry::of(mesh, t)).collect();
        let volume_data: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                tri_rule
                    .points
                    .iter()
                    .map(|&lambda| {
                        if !active(t) {
                            return 0.0;
                        }
                        let x = mesh.point_at(t, lambda);
                        let mut r = src.source.map_or(0.0, |f| f(x));
                        if let Some(div) = src.flux.and_then(|f| f.divergence.as_ref()) {
                            r += div(x);
                        }
                        r
                    })
                    .collect()
            })
            .collect();
        let volume_const = coeffs.iter().all(|c| c.reaction == 0.0).then(|| {
            (0..n)
                .map(|t| {
                    let area = geometry[t].area;
                    let l2: f64 = volume_data[t].iter().zip(&tri_rule.weights).map(|(r, w)| w * area * r * r).sum();
                    area * l2
                })
                .collect()
        });

        let mut edges = Vec::with_capacity(mesh.num_edges());
        for e in 0..mesh.num_edges() {
            let [a, b] = mesh.edges()[e];
            let (pa, pb) = (mesh.points()[a], mesh.points()[b]);
            let elements = mesh.edge_elements(e);
            let along = |s: f64| Point::new(pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y));
            let entry = match mesh.edge_label(e) {
                None => {
                    let (t0, t1) = (elements[0], elements[1]);
                    // Normal pointing out of t0.
                    let c = mesh.centroid(t0);
                    let length = pa.distance(pb);
                    let mut normal = [(pb.y - pa.y) / length, -(pb.x - pa.x) / length];
                    if normal[0] * (c.x - pa.x) + normal[1] * (c.y - pa.y) > 0.0 {
                        normal = [-normal[0], -normal[1]];
                    }
                    let data = edge_rule
                        .points
                        .iter()
                        .map(|&s| {
                            let x = along(s);
                            let (f0, f1) = (flux_at(t0, x), flux_at(t1, x));
                            (f0[0] - f1[0]) * normal[0] + (f0[1] - f1[1]) * normal[1]
                        })
                        .collect();
                    EdgeData {
                        elements,
                        normal,
                        length,
                        data,
                    }
                }
                Some(BoundaryKind::Neumann) if src.boundary_residual => {
                    let (a, b, normal, length) = oriented_boundary_edge(mesh, e);
                    let (pa, pb) = (mesh.points()[a], mesh.points()[b]);
                    let t0 = elements[0];
                    let data = edge_rule
                        .points
                        .iter()
                        .map(|&s| {
                            let x = Point::new(pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y));
                            let f = flux_at(t0, x);
                            let phi = src.neumann.map_or(0.0, |p| p(x, normal));
                            phi - f[0] * normal[0] - f[1] * normal[1]
                        })
                        .collect();
                    EdgeData {
                        elements,
                        normal,
                        length,
                        data,
                    }
                }
                Some(_) => EdgeData {
                    elements,
                    normal: [0.0, 0.0],
                    length: 0.0,
                    data: Vec::new(),
                },
            };
            edges.push(entry);
        }

        Ok(Self {
            geometry,
            coeffs,
            vertices: mesh.triangles().iter().map(|t| t.vertices).collect(),
            volume_data,
            volume_const,
            element_edges: (0..n).map(|t| mesh.element_edges(t)).collect(),
            edges,
            tri_rule,
            edge_weights: edge_rule.weights,
        })
    }
}

impl ResidualEstimator {
    pub fn num_elements(&self) -> usize {
        self.geometry.len()
    }

    /// Indicators of the P1 function with free coefficients `u`.
    pub fn evaluate(&self, dofmap: &DofMap, u: &[f64]) -> Result<Indicators, EstimatorError> {
        if u.len() != dofmap.num_dofs() {
            return Err(EstimatorError::DimensionMismatch {
                expected: dofmap.num_dofs(),
                found: u.len(),
            });
        }
        let nodal = dofmap.expand(u);
        let n = self.geometry.len();
        // Discrete flux A∇u_h, constant per element.
        let sigma_of = |t: usize| {
            let local = self.vertices[t].map(|v| nodal[v]);
            self.coeffs[t].apply(self.geometry[t].gradient(local))
        };
        let sigma: Vec<[f64; 2]> = if n >= PAR_MIN {
            (0..n).into_par_iter().map(sigma_of).collect()
        } else {
            (0..n).map(sigma_of).collect()
        };
        let edge_term = |e: &EdgeData| -> f64 {
            if e.data.is_empty() {
                return 0.0;
            }
            let s0 = sigma[e.elements[0]];
            let jump_sigma = if e.elements[1] == NO_ELEMENT {
                // Neumann: φ - (σ + 𝒇)·n.
                -(s0[0] * e.normal[0] + s0[1] * e.normal[1])
            } else {
                let s1 = sigma[e.elements[1]];
                (s0[0] - s1[0]) * e.normal[0] + (s0[1] - s1[1]) * e.normal[1]
            };
            let sq: f64 = e
                .data
                .iter()
                .zip(&self.edge_weights)
                .map(|(d, w)| {
                    let j = jump_sigma + d;
                    w * j * j
                })
                .sum();
            e.length * sq
        };
        let edge_sq: Vec<f64> = if self.edges.len() >= PAR_MIN {
            self.edges.par_iter().map(edge_term).collect()
        } else {
            self.edges.iter().map(edge_term).collect()
        };
        let element_term = |t: usize| -> f64 {
            let geo = &self.geometry[t];
            let h = geo.area.sqrt();
            let volume = match &self.volume_const {
                Some(v) => v[t],
                None => {
                    let c = self.coeffs[t].reaction;
                    let local = self.vertices[t].map(|v| nodal[v]);
                    let l2: f64 = self
                        .tri_rule
                        .points
                        .iter()
                        .zip(&self.tri_rule.weights)
                        .zip(&self.volume_data[t])
                        .map(|((l, w), r)| {
                            let uh = l[0] * local[0] + l[1] * local[1] + l[2] * local[2];
                            let res = r - c * uh;
                            w * geo.area * res * res
                        })
                        .sum();
                    h * h * l2
                }
            };
            volume + h * self.element_edges[t].iter().map(|&e| edge_sq[e]).sum::<f64>()
        };
        let values: Vec<f64> = if n >= PAR_MIN {
            (0..n).into_par_iter().map(element_term).collect()
        } else {
            (0..n).map(element_term).collect()
        };
        Indicators::new(values)
    }
}

/// Primal indicators `η(T)²` of `u`.
pub fn estimate_primal(
    mesh: &Mesh,
    dofmap: &DofMap,
    u: &[f64],
    problem: &ProblemData,
    degree: u32,
) -> Result<Indicators, EstimatorError> {
    ResidualEstimator::primal(mesh, problem, degree)?.evaluate(dofmap, u)
}

/// Dual indicators `ζ(T)²` of `z`.
pub fn estimate_dual(
    mesh: &Mesh,
    dofmap: &DofMap,
    z: &[f64],
    goal: &GoalData,
    coefficients: &CoefficientField,
    degree: u32,
) -> Result<Indicators, EstimatorError> {
    ResidualEstimator::dual(mesh, goal, coefficients, degree)?.evaluate(dofmap, z)
}
