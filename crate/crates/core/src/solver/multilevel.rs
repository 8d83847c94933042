//! Additive multilevel diagonal preconditioner on the NVB refinement history.
//!
//! Level 0 smooths every free vertex of the initial mesh; level `j` only the
//! vertices created in refinement step `j` and the endpoints of the edges
//! bisected there. Grid transfer is the nodal midpoint interpolation, so the
//! whole application costs `O(#vertices + Σ_j #local_j)`.

use crate::assembly::{local_stiffness, CoefficientField, DofMap, ElementGeometry};
use crate::mesh::Mesh;

use super::{Preconditioner, SolverError};

#[derive(Debug, Clone)]
struct Level {
    /// Vertices created on this level (`start..end`) with their parents.
    new_start: usize,
    parents: Vec<[usize; 2]>,
    /// Free vertices smoothed on this level and their inverse diagonal.
    local: Vec<usize>,
    inv_diag: Vec<f64>,
}

/// Multilevel hierarchy that grows with every refinement of the mesh.
#[derive(Debug, Clone)]
pub struct MultilevelHierarchy {
    levels: Vec<Level>,
    dofs: DofMap,
    coefficients: CoefficientField,
}

/// Nodal diagonal `a(φ_v, φ_v)` of the stiffness matrix on `mesh`.
fn nodal_diagonal(mesh: &Mesh, coefficients: &CoefficientField) -> Result<Vec<f64>, SolverError> {
    let coeffs = coefficients.evaluate(mesh)?;
    let mut diag = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = local_stiffness(&ElementGeometry::of(mesh, t), &coeffs[t]);
        for i in 0..3 {
            diag[tri.vertices[i]] += k[i][i];
        }
    }
    Ok(diag)
}

fn inverted(local: &[usize], diag: &[f64]) -> Result<Vec<f64>, SolverError> {
    local
        .iter()
        .map(|&v| {
            if diag[v] > 0.0 {
                Ok(1.0 / diag[v])
            } else {
                Err(SolverError::NonPositiveDiagonal {
                    index: v,
                    value: diag[v],
                })
            }
        })
        .collect()
}

impl MultilevelHierarchy {
    pub fn new(initial: &Mesh, coefficients: &CoefficientField) -> Result<Self, SolverError> {
        let dofs = DofMap::new(initial);
        let diag = nodal_diagonal(initial, coefficients)?;
        let local: Vec<usize> = (0..dofs.num_dofs()).map(|d| dofs.vertex(d)).collect();
        let inv_diag = inverted(&local, &diag)?;
        Ok(Self {
            levels: vec![Level {
                new_start: 0,
                parents: Vec::new(),
                local,
                inv_diag,
            }],
            dofs,
            coefficients: coefficients.clone(),
        })
    }

    /// Appends the level produced by one call of [`Mesh::refine`] on the
    /// current finest mesh.
    pub fn push_level(&mut self, mesh: &Mesh) -> Result<(), SolverError> {
        let record = mesh
            .refinement()
            .ok_or_else(|| SolverError::Hierarchy("mesh carries no refinement record".into()))?;
        let nv_old = self.dofs.num_vertices();
        if record.previous_vertex_count != nv_old {
            return Err(SolverError::Hierarchy(format!(
                "mesh refines a mesh with {} vertices, hierarchy ends at {nv_old}",
                record.previous_vertex_count
            )));
        }
        let dofs = DofMap::new(mesh);
        let mut is_local = vec![false; mesh.num_vertices()];
        let mut parents = Vec::with_capacity(record.bisected_edges.len());
        for (i, &[a, b]) in record.bisected_edges.iter().enumerate() {
            is_local[a] = true;
            is_local[b] = true;
            is_local[nv_old + i] = true;
            parents.push([a, b]);
        }
        let local: Vec<usize> = (0..mesh.num_vertices())
            .filter(|&v| is_local[v] && dofs.dof(v).is_some())
            .collect();
        let diag = nodal_diagonal(mesh, &self.coefficients)?;
        let inv_diag = inverted(&local, &diag)?;
        self.levels.push(Level {
            new_start: nv_old,
            parents,
            local,
            inv_diag,
        });
        self.dofs = dofs;
        Ok(())
    }

    /// Builds the hierarchy of a refinement sequence `meshes[0] -> meshes[1] -> ...`.
    pub fn build(meshes: &[Mesh], coefficients: &CoefficientField) -> Result<Self, SolverError> {
        let (first, rest) = meshes
            .split_first()
            .ok_or_else(|| SolverError::Hierarchy("empty mesh sequence".into()))?;
        let mut h = Self::new(first, coefficients)?;
        for m in rest {
            h.push_level(m)?;
        }
        Ok(h)
    }

    /// Number of levels (1 for the initial mesh alone).
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.num_dofs()
    }

    /// Smoothed vertices per level.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.local.len()).collect()
    }
}

impl Preconditioner for MultilevelHierarchy {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        assert_eq!(r.len(), self.dofs.num_dofs());
        let mut buf = self.dofs.expand(r);
        let mut corrections: Vec<Vec<f64>> = Vec::with_capacity(self.levels.len());
        for level in self.levels.iter().rev() {
            corrections.push(level.local.iter().zip(&level.inv_diag).map(|(&v, d)| d * buf[v]).collect());
            for (i, &[a, b]) in level.parents.iter().enumerate().rev() {
                let m = level.new_start + i;
                // Free vertices never have constrained children, so skipping
                // constrained ones leaves the free residuals exact.
                if self.dofs.dof(m).is_none() {
                    continue;
                }
                let half = 0.5 * buf[m];
                buf[a] += half;
                buf[b] += half;
            }
        }
        buf.iter_mut().for_each(|x| *x = 0.0);
        for (level, corr) in self.levels.iter().zip(corrections.iter().rev()) {
            for (i, &[a, b]) in level.parents.iter().enumerate() {
                buf[level.new_start + i] = 0.5 * (buf[a] + buf[b]);
            }
            for (&v, c) in level.local.iter().zip(corr) {
                buf[v] += c;
            }
        }
        for (d, zi) in z.iter_mut().enumerate() {
            *zi = buf[self.dofs.vertex(d)];
        }
    }
}
