//! The two benchmark problems: a smooth solution with a singular goal on
//! the unit square, and a Z-shaped domain with a re-entrant corner.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::assembly::{GoalData, ProblemData, VectorField};
use crate::mesh::{BoundaryKind, Mesh, Point};

/// Initial mesh, data, goal and exact goal value of a benchmark.
#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub mesh: Mesh,
    pub problem: ProblemData,
    pub goal: GoalData,
    /// `G(u*)`.
    pub reference: f64,
    /// How the reference value was obtained.
    pub reference_note: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkName {
    SquareGoal,
    Zshape,
}

impl BenchmarkName {
    pub fn build(self) -> BenchmarkProblem {
        match self {
            BenchmarkName::SquareGoal => problem_square_goal(),
            BenchmarkName::Zshape => problem_zshape(),
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchmarkName::SquareGoal => "square-goal",
            BenchmarkName::Zshape => "zshape",
        })
    }
}

impl FromStr for BenchmarkName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "square-goal" => Ok(BenchmarkName::SquareGoal),
            "zshape" => Ok(BenchmarkName::Zshape),
            other => Err(format!("unknown problem '{other}' (expected square-goal or zshape)")),
        }
    }
}

/// Criss-cross mesh of an `nx × ny` grid of squares with side `h` and lower
/// left corner `origin`: every square is split by both diagonals. Elements
/// whose centroid fails `keep` are dropped, unused vertices removed, and
/// boundary edges labelled by `label`.
pub fn criss_cross(
    nx: usize,
    ny: usize,
    origin: Point,
    h: f64,
    keep: impl Fn(Point) -> bool,
    label: impl Fn(Point, Point) -> BoundaryKind,
) -> Mesh {
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let n_grid = (nx + 1) * (ny + 1);
    let mut points: Vec<Point> = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| (i, j)))
        .map(|(i, j)| Point::new(origin.x + i as f64 * h, origin.y + j as f64 * h))
        .collect();
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = n_grid + j * nx + i;
            points.push(Point::new(origin.x + (i as f64 + 0.5) * h, origin.y + (j as f64 + 0.5) * h));
            let (a, b, d, e) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
            for [p, q] in [[a, b], [b, d], [d, e], [e, a]] {
                triangles.push([p, q, c]);
            }
        }
    }
    let centroid = |t: &[usize; 3]| {
        let [a, b, c] = t.map(|v| points[v]);
        Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    };
    triangles.retain(|t| keep(centroid(t)));

    let mut renumber = vec![usize::MAX; points.len()];
    let mut used = Vec::new();
    for t in &triangles {
        for &v in t {
            if renumber[v] == usize::MAX {
                renumber[v] = 0;
            }
        }
    }
    for (v, r) in renumber.iter_mut().enumerate() {
        if *r == 0 {
            *r = used.len();
            used.push(points[v]);
        }
    }
    let triangles: Vec<[usize; 3]> = triangles.iter().map(|t| t.map(|v| renumber[v])).collect();

    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
    }
    let mut boundary: Vec<([usize; 2], BoundaryKind)> = count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .map(|(e, _)| (e, label(used[e[0]], used[e[1]])))
        .collect();
    boundary.sort_by_key(|(e, _)| *e);
    Mesh::build_initial(used, &triangles, &boundary).expect("criss-cross mesh is valid")
}

/// Unit square, `f = 2x(x-1) + 2y(y-1)`, homogeneous Dirichlet data, goal
/// `G(v) = ∫_ω ∂_x v` on `ω = {x + y ≥ 3/2}`.
pub fn problem_square_goal() -> BenchmarkProblem {
    let mesh = criss_cross(2, 2, Point::new(0.0, 0.0), 0.5, |_| true, |_, _| BoundaryKind::Dirichlet);
    let problem = ProblemData::default().with_source(|p| 2.0 * p.x * (p.x - 1.0) + 2.0 * p.y * (p.y - 1.0));
    let goal = GoalData::default()
        .with_gradient_weight(VectorField::constant([-1.0, 0.0]))
        .with_region(|c| c.x + c.y >= 1.5);
    BenchmarkProblem {
        name: "square-goal",
        mesh,
        problem,
        goal,
        reference: 11.0 / 960.0,
        reference_note: "closed form; u* = -x(1-x)y(1-y) solves the problem with the given f",
    }
}

/// Exact solution `r^{4/7} sin(4φ/7 + 3π/7)` of the Z-shape problem.
pub fn exact_solution_zshape(p: Point) -> f64 {
    let r = p.x.hypot(p.y);
    if r == 0.0 {
        return 0.0;
    }
    let phi = p.y.atan2(p.x);
    r.powf(4.0 / 7.0) * (4.0 * phi / 7.0 + 3.0 * PI / 7.0).sin()
}

/// Gradient of [`exact_solution_zshape`]; `None` at the corner.
pub fn exact_gradient_zshape(p: Point) -> Option<[f64; 2]> {
    let r = p.x.hypot(p.y);
    if r == 0.0 {
        return None;
    }
    let phi = p.y.atan2(p.x);
    let arg = 4.0 * phi / 7.0 + 3.0 * PI / 7.0;
    let scale = 4.0 / 7.0 * r.powf(-3.0 / 7.0);
    let (dr, dphi) = (scale * arg.sin(), scale * arg.cos());
    let (c, s) = (phi.cos(), phi.sin());
    Some([dr * c - dphi * s, dr * s + dphi * c])
}

/// `(-1,1)²` minus the triangle `(0,0), (-1,-1), (-1,0)`. Dirichlet data on
/// the two cut edges, Neumann data `∇u*·n` elsewhere, `f = 0`; goal
/// `G(v) = ∫_{T₂} ∂_x v + ∂_y v` on `T₂ = (-1/2, 1/2)² ∩ Ω`.
pub fn problem_zshape() -> BenchmarkProblem {
    let removed = |c: Point| c.x < 0.0 && c.y < 0.0 && c.y > c.x;
    let on_cut = |a: Point, b: Point| {
        let seg = |p: Point| p.x <= 0.0 && (p.y == 0.0 || p.y == p.x);
        seg(a) && seg(b) && ((a.y == 0.0 && b.y == 0.0) || (a.y == a.x && b.y == b.x))
    };
    let mesh = criss_cross(
        4,
        4,
        Point::new(-1.0, -1.0),
        0.5,
        |c| !removed(c),
        |a, b| {
            if on_cut(a, b) {
                BoundaryKind::Dirichlet
            } else {
                BoundaryKind::Neumann
            }
        },
    );
    let problem = ProblemData::default().with_neumann(|p, n| {
        let g = exact_gradient_zshape(p).unwrap_or([0.0, 0.0]);
        g[0] * n[0] + g[1] * n[1]
    });
    let goal = GoalData::default()
        .with_gradient_weight(VectorField::constant([-1.0, -1.0]))
        .with_region(|c| c.x.abs() < 0.5 && c.y.abs() < 0.5);
    BenchmarkProblem {
        name: "zshape",
        mesh,
        problem,
        goal,
        reference: 0.829_622_471_578_10,
        reference_note: "numerical integration; agrees with a boundary-integral evaluation to 13 digits",
    }
}
