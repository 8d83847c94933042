//! Problem data supplied as callables.

use std::fmt;
use std::sync::Arc;

use crate::mesh::Point;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;
/// Neumann datum, evaluated with the outward unit normal of the edge.
pub type NeumannFn = Arc<dyn Fn(Point, [f64; 2]) -> f64 + Send + Sync>;
/// Indicator of a goal region; evaluated at element centroids.
pub type RegionFn = Arc<dyn Fn(Point) -> bool + Send + Sync>;

/// A vector field with an optional divergence.
///
/// The divergence enters only the residual estimator; `None` means the field
/// is taken as divergence-free inside every element (true for the
/// piecewise-constant fields of the benchmarks).
#[derive(Clone)]
pub struct VectorField {
    pub value: VectorFn,
    pub divergence: Option<ScalarFn>,
}

impl VectorField {
    pub fn constant(v: [f64; 2]) -> Self {
        Self {
            value: Arc::new(move |_| v),
            divergence: None,
        }
    }

    pub fn new(value: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            divergence: None,
        }
    }

    pub fn with_divergence(mut self, div: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.divergence = Some(Arc::new(div));
        self
    }
}

/// Diffusion matrix `A` and reaction coefficient `c`, evaluated once per
/// element at its centroid.
#[derive(Clone)]
pub struct CoefficientField {
    pub diffusion: MatrixFn,
    pub reaction: ScalarFn,
}

impl CoefficientField {
    /// `A = I`, `c = 0`.
    pub fn laplace() -> Self {
        Self::constant([[1.0, 0.0], [0.0, 1.0]], 0.0)
    }

    pub fn constant(a: [[f64; 2]; 2], c: f64) -> Self {
        Self {
            diffusion: Arc::new(move |_| a),
            reaction: Arc::new(move |_| c),
        }
    }
}

impl Default for CoefficientField {
    fn default() -> Self {
        Self::laplace()
    }
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CoefficientField { .. }")
    }
}

/// Right-hand side of the primal problem:
/// `F(v) = ∫ f v - ∫ 𝒇·∇v + ∫_{Γ_N} φ v`.
#[derive(Clone, Default)]
pub struct ProblemData {
    pub source: Option<ScalarFn>,
    pub flux: Option<VectorField>,
    pub neumann: Option<NeumannFn>,
    pub coefficients: CoefficientField,
}

impl ProblemData {
    pub fn with_source(mut self, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(f));
        self
    }

    pub fn with_flux(mut self, flux: VectorField) -> Self {
        self.flux = Some(flux);
        self
    }

    pub fn with_neumann(mut self, phi: impl Fn(Point, [f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.neumann = Some(Arc::new(phi));
        self
    }

    pub fn with_coefficients(mut self, coefficients: CoefficientField) -> Self {
        self.coefficients = coefficients;
        self
    }
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("source", &self.source.is_some())
            .field("flux", &self.flux.is_some())
            .field("neumann", &self.neumann.is_some())
            .finish()
    }
}

/// Goal functional `G(v) = ∫ g v - ∫_ω 𝒈·∇v`.
///
/// When `region` is set, both terms are restricted to elements whose
/// centroid lies in ω, so meshes are expected to resolve ∂ω.
#[derive(Clone, Default)]
pub struct GoalData {
    pub weight: Option<ScalarFn>,
    pub gradient_weight: Option<VectorField>,
    pub region: Option<RegionFn>,
}

impl GoalData {
    pub fn with_weight(mut self, g: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.weight = Some(Arc::new(g));
        self
    }

    pub fn with_gradient_weight(mut self, g: VectorField) -> Self {
        self.gradient_weight = Some(g);
        self
    }

    pub fn with_region(mut self, region: impl Fn(Point) -> bool + Send + Sync + 'static) -> Self {
        self.region = Some(Arc::new(region));
        self
    }

    pub fn in_region(&self, centroid: Point) -> bool {
        self.region.as_ref().is_none_or(|r| r(centroid))
    }
}

impl fmt::Debug for GoalData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GoalData")
            .field("weight", &self.weight.is_some())
            .field("gradient_weight", &self.gradient_weight.is_some())
            .field("region", &self.region.is_some())
            .finish()
    }
}
