use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::assembly::{assemble_operator, direct_solve, CoefficientField, DofMap};
use crate::mesh::{BoundaryKind, Mesh, Point};

fn square(kind: BoundaryKind) -> Mesh {
    let pts = vec![
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
        Point::new(0.5, 0.5),
    ];
    let bnd: Vec<_> = [[0, 1], [1, 2], [2, 3], [3, 0]].into_iter().map(|e| (e, kind)).collect();
    Mesh::build_initial(pts, &[[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]], &bnd).unwrap()
}

/// Graded sequence: uniform steps followed by refinement towards the origin.
fn sequence(kind: BoundaryKind) -> Vec<Mesh> {
    let mut meshes = vec![square(kind)];
    for step in 0..10 {
        let last = meshes.last().unwrap();
        let next = if step < 3 {
            last.refine_uniform().unwrap()
        } else {
            let marked: Vec<usize> = (0..last.num_elements())
                .filter(|&t| {
                    let c = last.centroid(t);
                    c.x + c.y < 0.3
                })
                .collect();
            last.refine(&marked).unwrap()
        };
        meshes.push(next);
    }
    meshes
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn apply(pre: &dyn Preconditioner, r: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; r.len()];
    pre.apply(r, &mut z);
    z
}

#[test]
fn multilevel_is_symmetric_linear_and_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
        let meshes = sequence(kind);
        let coeff = if kind == BoundaryKind::Neumann {
            CoefficientField::constant([[1.0, 0.0], [0.0, 1.0]], 1.0)
        } else {
            CoefficientField::laplace()
        };
        let h = MultilevelHierarchy::build(&meshes, &coeff).unwrap();
        assert_eq!(h.depth(), meshes.len());
        let n = h.num_dofs();
        for _ in 0..5 {
            let u = random_vec(n, &mut rng);
            let v = random_vec(n, &mut rng);
            let (pu, pv) = (apply(&h, &u), apply(&h, &v));
            let (a, b) = (dot(&v, &pu), dot(&u, &pv));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{a} vs {b}");
            assert!(dot(&u, &pu) > 0.0);
            let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
            let pw = apply(&h, &w);
            for i in 0..n {
                assert!((pw[i] - (2.0 * pu[i] - 3.0 * pv[i])).abs() < 1e-12 * (1.0 + pw[i].abs()));
            }
        }
    }
}

#[test]
fn single_level_equals_jacobi() {
    let mesh = square(BoundaryKind::Dirichlet).refine_uniform().unwrap().refine_uniform().unwrap();
    let coeff = CoefficientField::laplace();
    let op = assemble_operator(&mesh, &coeff, &DofMap::new(&mesh)).unwrap();
    let h = MultilevelHierarchy::new(&mesh, &coeff).unwrap();
    let j = Jacobi::new(&op).unwrap();
    let r: Vec<f64> = (0..op.dim()).map(|i| (i as f64).cos()).collect();
    assert_eq!(apply(&h, &r), apply(&j, &r));
}

#[test]
fn push_level_rejects_foreign_mesh() {
    let mesh = square(BoundaryKind::Dirichlet);
    let mut h = MultilevelHierarchy::new(&mesh, &CoefficientField::laplace()).unwrap();
    assert!(h.push_level(&mesh).is_err());
    let twice = mesh.refine_uniform().unwrap().refine_uniform().unwrap();
    assert!(h.push_level(&twice).is_err());
}

#[test]
fn identity_operator_converges_in_one_step() {
    let op = SparseSymmetricOperator::from_diagonal(&[1.0; 4]);
    let b = [1.0, -2.0, 3.0, 0.5];
    let mut s = PcgState::new(&op, &Identity, &b, vec![0.0; 4]).unwrap();
    let inc = s.step(&op, &Identity).unwrap();
    assert!((inc - dot(&b, &b).sqrt()).abs() < 1e-14);
    for (x, y) in s.solution().iter().zip(&b) {
        assert!((x - y).abs() < 1e-15);
    }
    assert_eq!(s.step(&op, &Identity).unwrap(), 0.0);
}

#[test]
fn cg_terminates_in_n_steps() {
    let mesh = square(BoundaryKind::Dirichlet).refine_uniform().unwrap();
    let op = assemble_operator(&mesh, &CoefficientField::laplace(), &DofMap::new(&mesh)).unwrap();
    let n = op.dim();
    let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
    let exact = direct_solve(&op, &b).unwrap();
    let mut s = PcgState::new(&op, &Identity, &b, vec![0.0; n]).unwrap();
    for _ in 0..n {
        s.step(&op, &Identity).unwrap();
    }
    for (x, y) in s.solution().iter().zip(exact.iter()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn energy_error_decreases_monotonically() {
    let meshes = sequence(BoundaryKind::Dirichlet);
    let mesh = meshes.last().unwrap();
    let coeff = CoefficientField::laplace();
    let op = assemble_operator(mesh, &coeff, &DofMap::new(mesh)).unwrap();
    let h = MultilevelHierarchy::build(&meshes, &coeff).unwrap();
    let b = vec![1.0; op.dim()];
    let exact = direct_solve(&op, &b).unwrap();
    for pre in [&h as &dyn Preconditioner, &Jacobi::new(&op).unwrap(), &Identity] {
        let q = measure_contraction(&op, pre, &b, vec![0.0; op.dim()], &exact, 30).unwrap();
        assert!(!q.is_empty());
        assert!(q.iter().all(|&f| f <= 1.0 + 1e-12), "{q:?}");
    }
    // The multilevel preconditioner needs few steps on a graded mesh.
    let q = measure_contraction(&op, &h, &b, vec![0.0; op.dim()], &exact, 200).unwrap();
    assert!(q.len() < 60, "{} steps", q.len());
}

#[test]
fn increments_match_energy_of_difference() {
    let mesh = square(BoundaryKind::Dirichlet).refine_uniform().unwrap().refine_uniform().unwrap();
    let op = assemble_operator(&mesh, &CoefficientField::laplace(), &DofMap::new(&mesh)).unwrap();
    let pre = Jacobi::new(&op).unwrap();
    let b = vec![1.0; op.dim()];
    let mut s = PcgState::new(&op, &pre, &b, vec![0.0; op.dim()]).unwrap();
    for _ in 0..4 {
        let before = s.solution().to_vec();
        let inc = s.step(&op, &pre).unwrap();
        let d: Vec<f64> = s.solution().iter().zip(&before).map(|(a, b)| a - b).collect();
        assert!((inc - op.bilinear(&d, &d).sqrt()).abs() < 1e-12 * (1.0 + inc));
    }
}

#[test]
fn breakdown_and_dimension_errors() {
    let op = SparseSymmetricOperator::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
    let mut s = PcgState::new(&op, &Identity, &[0.0, 1.0], vec![0.0; 2]).unwrap();
    assert!(matches!(s.step(&op, &Identity), Err(SolverError::Breakdown { .. })));
    assert!(PcgState::new(&op, &Identity, &[1.0], vec![0.0; 2]).is_err());
    assert!(Jacobi::new(&op).is_err());
}

#[test]
fn solver_kind_parses() {
    for k in [SolverKind::MlPcg, SolverKind::JacobiPcg, SolverKind::Cg] {
        assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
    }
    assert!("gmres".parse::<SolverKind>().is_err());
}
