//! Free-DOF numbering, coefficient vectors and the sparse symmetric operator.

use std::ops::{Deref, DerefMut};

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rayon::prelude::*;

use super::AssemblyError;
use crate::mesh::Mesh;

const PAR_MIN_ROWS: usize = 4096;

/// Bijection between free (non-Dirichlet) vertices and `0..n_free`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    vertex_to_dof: Vec<Option<usize>>,
    dof_to_vertex: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let constrained = mesh.dirichlet_vertices();
        let mut vertex_to_dof = vec![None; mesh.num_vertices()];
        let mut dof_to_vertex = Vec::new();
        for (v, &c) in constrained.iter().enumerate() {
            if !c {
                vertex_to_dof[v] = Some(dof_to_vertex.len());
                dof_to_vertex.push(v);
            }
        }
        Self {
            vertex_to_dof,
            dof_to_vertex,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_to_vertex.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_to_dof.len()
    }

    pub fn dof(&self, vertex: usize) -> Option<usize> {
        self.vertex_to_dof[vertex]
    }

    pub fn vertex(&self, dof: usize) -> usize {
        self.dof_to_vertex[dof]
    }

    /// Nodal values on all vertices (zero on Dirichlet vertices).
    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.vertex_to_dof.len()];
        for (d, &vx) in self.dof_to_vertex.iter().enumerate() {
            full[vx] = v[d];
        }
        full
    }

    /// Free-vertex values of a nodal vector.
    pub fn restrict(&self, nodal: &[f64]) -> FemVector {
        FemVector(self.dof_to_vertex.iter().map(|&v| nodal[v]).collect())
    }
}

/// Coefficients of a P1 function with respect to the free hat functions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FemVector(pub Vec<f64>);

impl FemVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FemVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FemVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for FemVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric matrix in CSR storage (both triangles stored, columns sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetricOperator {
    /// Empty operator with the sparsity of the given rows. Columns within a
    /// row must be sorted and unique.
    pub(crate) fn with_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows {
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Diagonal matrix; mostly for tests.
    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut op = Self::with_pattern((0..d.len()).map(|i| vec![i]).collect());
        op.values.copy_from_slice(d);
        op
    }

    /// Builds an operator from a dense symmetric matrix, dropping zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let pattern = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (0..r.len()).filter(|&j| r[j] != 0.0 || i == j).collect())
            .collect();
        let mut op = Self::with_pattern(pattern);
        for i in 0..op.n {
            for p in op.row_ptr[i]..op.row_ptr[i + 1] {
                op.values[p] = rows[i][op.col_idx[p]];
            }
        }
        op
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        let p = row.binary_search(&j).expect("entry outside sparsity pattern");
        self.values[self.row_ptr[i] + p] += v;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j)
            .map(|p| self.values[self.row_ptr[i] + p])
            .unwrap_or(0.0)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `out = A x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        let row = |(i, o): (usize, &mut f64)| {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *o = s;
        };
        if self.n >= PAR_MIN_ROWS {
            out.par_iter_mut()
                .enumerate()
                .with_min_len(PAR_MIN_ROWS / 4)
                .for_each(row);
        } else {
            out.iter_mut().enumerate().for_each(row);
        }
    }

    pub fn apply(&self, x: &[f64]) -> FemVector {
        let mut out = FemVector::zeros(self.n);
        self.apply_into(x, &mut out);
        out
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    /// Largest entry-wise asymmetry `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Sparse Cholesky factorization of an SPD operator.
pub struct DirectSolver {
    n: usize,
    factor: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl DirectSolver {
    pub fn factor(op: &SparseSymmetricOperator) -> Result<Self, AssemblyError> {
        let n = op.dim();
        let mut triplets = Vec::with_capacity(op.nnz() / 2 + n);
        for i in 0..n {
            for (j, v) in op.row(i) {
                if j <= i {
                    triplets.push(Triplet::new(i, j, v));
                }
            }
        }
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| AssemblyError::Factorization(format!("{e:?}")))?;
        let factor = matrix
            .sp_cholesky(Side::Lower)
            .map_err(|e| AssemblyError::Factorization(format!("{e:?}")))?;
        Ok(Self { n, factor })
    }

    pub fn solve(&self, rhs: &[f64]) -> FemVector {
        assert_eq!(rhs.len(), self.n);
        if self.n == 0 {
            return FemVector::default();
        }
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.factor.solve_in_place(&mut b);
        FemVector((0..self.n).map(|i| b[(i, 0)]).collect())
    }
}

/// Solves `op x = rhs` by sparse Cholesky factorization.
pub fn direct_solve(op: &SparseSymmetricOperator, rhs: &[f64]) -> Result<FemVector, AssemblyError> {
    if rhs.len() != op.dim() {
        return Err(AssemblyError::DimensionMismatch {
            expected: op.dim(),
            found: rhs.len(),
        });
    }
    Ok(DirectSolver::factor(op)?.solve(rhs))
}
