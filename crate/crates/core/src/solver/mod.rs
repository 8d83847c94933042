//! Preconditioned conjugate gradients, stepped one iteration at a time.
//!
//! The adaptive loop drives the solver step by step and needs the energy
//! norm of every increment, so [`PcgState`] exposes single steps instead of
//! a solve-to-tolerance routine.

mod multilevel;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use multilevel::MultilevelHierarchy;

use crate::assembly::{dot, AssemblyError, SparseSymmetricOperator};

/// Relative size of `sqrt(rᵀPr)` below which a step is a no-op.
pub const MACHINE_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("CG breakdown in step {step}: pᵀAp = {curvature}")]
    Breakdown { step: usize, curvature: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-positive diagonal entry {value} at index {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("multilevel hierarchy: {0}")]
    Hierarchy(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Symmetric positive definite approximation of `A⁻¹`.
pub trait Preconditioner: Send + Sync {
    /// `z = P r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal scaling `P = diag(A)⁻¹`.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(op: &SparseSymmetricOperator) -> Result<Self, SolverError> {
        let inv_diag = op
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(SolverError::NonPositiveDiagonal { index: i, value: d })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
    }
}

/// Which Krylov solver the adaptive loop uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// PCG with the multilevel additive Schwarz preconditioner.
    #[default]
    MlPcg,
    JacobiPcg,
    /// Unpreconditioned CG.
    Cg,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::MlPcg => "ml-pcg",
            SolverKind::JacobiPcg => "jacobi-pcg",
            SolverKind::Cg => "cg",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ml-pcg" => Ok(SolverKind::MlPcg),
            "jacobi-pcg" => Ok(SolverKind::JacobiPcg),
            "cg" => Ok(SolverKind::Cg),
            other => Err(format!("unknown solver '{other}' (expected ml-pcg, jacobi-pcg or cg)")),
        }
    }
}

/// Iterate, residual and search direction of a running PCG.
#[derive(Debug, Clone)]
pub struct PcgState {
    x: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    rz: f64,
    floor: f64,
    steps: usize,
}

impl PcgState {
    /// Starts PCG for `A x = rhs` at `x0`.
    pub fn new(
        op: &SparseSymmetricOperator,
        pre: &dyn Preconditioner,
        rhs: &[f64],
        x0: Vec<f64>,
    ) -> Result<Self, SolverError> {
        let n = op.dim();
        for len in [rhs.len(), x0.len()] {
            if len != n {
                return Err(SolverError::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let mut z = vec![0.0; n];
        pre.apply(rhs, &mut z);
        let floor = MACHINE_FLOOR * MACHINE_FLOOR * dot(rhs, &z);
        let ax = op.apply(&x0);
        let r: Vec<f64> = rhs.iter().zip(ax.iter()).map(|(b, a)| b - a).collect();
        pre.apply(&r, &mut z);
        let rz = dot(&r, &z);
        Ok(Self {
            x: x0,
            p: z.clone(),
            r,
            z,
            ap: vec![0.0; n],
            rz,
            floor,
            steps: 0,
        })
    }

    /// Performs one PCG step and returns the energy norm `⦀x_new - x_old⦀`.
    ///
    /// Once `rᵀPr` falls below the machine floor the step changes nothing and
    /// returns 0.
    pub fn step(&mut self, op: &SparseSymmetricOperator, pre: &dyn Preconditioner) -> Result<f64, SolverError> {
        self.steps += 1;
        if self.rz <= self.floor || self.rz == 0.0 {
            return Ok(0.0);
        }
        op.apply_into(&self.p, &mut self.ap);
        let pap = dot(&self.p, &self.ap);
        if !(pap > 0.0) {
            return Err(SolverError::Breakdown {
                step: self.steps,
                curvature: pap,
            });
        }
        let alpha = self.rz / pap;
        for i in 0..self.x.len() {
            self.x[i] += alpha * self.p[i];
            self.r[i] -= alpha * self.ap[i];
        }
        pre.apply(&self.r, &mut self.z);
        let rz_new = dot(&self.r, &self.z);
        let beta = rz_new / self.rz;
        for (p, z) in self.p.iter_mut().zip(&self.z) {
            *p = z + beta * *p;
        }
        self.rz = rz_new;
        Ok(alpha.abs() * pap.sqrt())
    }

    pub fn solution(&self) -> &[f64] {
        &self.x
    }

    pub fn into_solution(self) -> Vec<f64> {
        self.x
    }

    /// `sqrt(rᵀ P r)` of the current residual.
    pub fn preconditioned_residual(&self) -> f64 {
        self.rz.max(0.0).sqrt()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Error-reduction factors `⦀x* - x_k⦀ / ⦀x* - x_{k-1}⦀` of up to `steps`
/// PCG steps from `x0`, stopping once the error drops below `1e-12` times
/// the initial error.
pub fn measure_contraction(
    op: &SparseSymmetricOperator,
    pre: &dyn Preconditioner,
    rhs: &[f64],
    x0: Vec<f64>,
    exact: &[f64],
    steps: usize,
) -> Result<Vec<f64>, SolverError> {
    let err = |x: &[f64]| {
        let e: Vec<f64> = exact.iter().zip(x).map(|(a, b)| a - b).collect();
        op.bilinear(&e, &e).max(0.0).sqrt()
    };
    let mut state = PcgState::new(op, pre, rhs, x0)?;
    let initial = err(state.solution());
    let mut prev = initial;
    let mut factors = Vec::new();
    for _ in 0..steps {
        if prev <= 1e-12 * initial || prev == 0.0 {
            break;
        }
        state.step(op, pre)?;
        let e = err(state.solution());
        factors.push(e / prev);
        prev = e;
    }
    Ok(factors)
}

#[cfg(test)]
mod tests;
