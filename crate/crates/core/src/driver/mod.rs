//! The adaptive loop: solve (inexactly) - estimate - mark - refine.
//!
//! On every level the primal and the dual PCG are advanced one step at a
//! time, re-estimating after each step, until the increments are small
//! relative to the estimators:
//!
//! ```text
//! ⦀u^m - u^{m-1}⦀ ≤ λ_ctr η(u^m),   ⦀z^n - z^{n-1}⦀ ≤ λ_ctr ζ(z^n).
//! ```
//!
//! Each step is recorded together with the work spent so far, counted in
//! element-steps (`#T_ℓ` per step).

mod rate;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

pub use rate::{fit_slope, rate_estimate, series, windowed, RateError, Window, XField, YField};

use crate::assembly::{
    assemble_dual_load, assemble_operator, assemble_primal_load, dot, AssemblyError, DirectSolver, DofMap,
    GoalData, ProblemData, SparseSymmetricOperator, DEFAULT_QUADRATURE_DEGREE,
};
use crate::bench::BenchmarkProblem;
use crate::estimator::{EstimatorError, Indicators, ResidualEstimator};
use crate::marking::{mark, MarkingConfig, MarkingError};
use crate::mesh::{closure_ratio, sons_estimate_holds, Mesh, MeshError};
use crate::solver::{Identity, Jacobi, MultilevelHierarchy, PcgState, Preconditioner, SolverError, SolverKind};

/// Relative error below which a step is treated as converged to round-off
/// and no contraction factor is recorded.
pub const CONTRACTION_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("solver did not meet the stopping criterion on level {level} within {steps} steps")]
    SolverDidNotStop { level: usize, steps: usize },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Marking(#[from] MarkingError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// When the per-level solver iterations end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoppingMode {
    /// Each problem stops at its own first index satisfying its criterion;
    /// afterwards it is padded with the accepted iterate.
    #[default]
    Independent,
    /// Both problems iterate until both criteria hold at the same step.
    Stronger,
    /// Both problems iterate until each criterion has held at least once.
    Natural,
}

impl StoppingMode {
    pub fn name(self) -> &'static str {
        match self {
            StoppingMode::Independent => "independent",
            StoppingMode::Stronger => "stronger",
            StoppingMode::Natural => "natural",
        }
    }
}

impl fmt::Display for StoppingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StoppingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "independent" => Ok(StoppingMode::Independent),
            "stronger" => Ok(StoppingMode::Stronger),
            "natural" => Ok(StoppingMode::Natural),
            other => Err(format!(
                "unknown stopping mode '{other}' (expected independent, stronger or natural)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    pub marking: MarkingConfig,
    pub lambda_ctr: f64,
    pub solver: SolverKind,
    pub stopping: StoppingMode,
    /// Stop after the level on which `#T_ℓ` reaches this bound.
    pub max_elements: Option<usize>,
    /// Stop after the level on which the work reaches this bound.
    pub max_work: Option<u64>,
    /// Compute the quasi-error product with direct solves.
    pub diagnostics: bool,
    /// Skip diagnostics on levels with more free DOFs than this.
    pub diag_max_dofs: usize,
    pub quadrature_degree: u32,
    /// Estimators at or below this value count as zero and end the run.
    pub zero_tolerance: f64,
    /// Solver steps allowed per level before giving up.
    pub max_solver_steps: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            marking: MarkingConfig::default(),
            lambda_ctr: 1e-5,
            solver: SolverKind::MlPcg,
            stopping: StoppingMode::Independent,
            max_elements: Some(10_000),
            max_work: None,
            diagnostics: false,
            diag_max_dofs: 200_000,
            quadrature_degree: DEFAULT_QUADRATURE_DEGREE,
            zero_tolerance: 1e-12,
            max_solver_steps: 10_000,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::InvalidConfig(m));
        if !(self.lambda_ctr > 0.0 && self.lambda_ctr.is_finite()) {
            return bad(format!("lambda_ctr must be positive, got {}", self.lambda_ctr));
        }
        if let Err(e) = MarkingConfig::new(self.marking.strategy, self.marking.vartheta) {
            return bad(e.to_string());
        }
        if self.max_elements.is_none() && self.max_work.is_none() {
            return bad("an element or work budget is required".into());
        }
        if self.max_elements == Some(0) || self.max_work == Some(0) {
            return bad("budgets must be positive".into());
        }
        if !(self.zero_tolerance >= 0.0) {
            return bad("zero tolerance must be nonnegative".into());
        }
        if self.max_solver_steps == 0 {
            return bad("max_solver_steps must be positive".into());
        }
        Ok(())
    }
}

/// Whether `⦀increment⦀ ≤ λ_ctr · estimator`.
pub fn criterion_holds(increment: f64, estimator: f64, lambda_ctr: f64) -> bool {
    increment <= lambda_ctr * estimator
}

/// Per-field evaluation of the stopping criterion `(primal, dual)`.
pub fn solver_stopping(du: f64, eta: f64, dz: f64, zeta: f64, lambda_ctr: f64) -> (bool, bool) {
    (criterion_holds(du, eta, lambda_ctr), criterion_holds(dz, zeta, lambda_ctr))
}

/// Stopping state of one level.
#[derive(Debug, Clone)]
pub struct StopTracker {
    mode: StoppingMode,
    primal_first: Option<usize>,
    dual_first: Option<usize>,
    done: bool,
}

impl StopTracker {
    pub fn new(mode: StoppingMode) -> Self {
        Self {
            mode,
            primal_first: None,
            dual_first: None,
            done: false,
        }
    }

    /// Whether the primal solver takes a real step at the next index.
    pub fn primal_active(&self) -> bool {
        !self.done && (self.mode != StoppingMode::Independent || self.primal_first.is_none())
    }

    pub fn dual_active(&self) -> bool {
        !self.done && (self.mode != StoppingMode::Independent || self.dual_first.is_none())
    }

    /// Feeds the criteria observed at step `k`.
    pub fn observe(&mut self, k: usize, primal_ok: bool, dual_ok: bool) {
        if primal_ok && self.primal_first.is_none() {
            self.primal_first = Some(k);
        }
        if dual_ok && self.dual_first.is_none() {
            self.dual_first = Some(k);
        }
        self.done = match self.mode {
            StoppingMode::Stronger => primal_ok && dual_ok,
            StoppingMode::Independent | StoppingMode::Natural => {
                self.primal_first.is_some() && self.dual_first.is_some()
            }
        };
    }

    pub fn done(&self) -> bool {
        self.done
    }

    /// First steps at which each criterion held.
    pub fn first_indices(&self) -> (Option<usize>, Option<usize>) {
        (self.primal_first, self.dual_first)
    }
}

/// Stopping indices `(m̲, n̲, k̲)` for scripted increment/estimator
/// sequences, indexed by real solver step (entry `i` belongs to step `i+1`).
pub fn simulate_stopping(
    mode: StoppingMode,
    primal: &[(f64, f64)],
    dual: &[(f64, f64)],
    lambda_ctr: f64,
) -> Option<(usize, usize, usize)> {
    let mut tracker = StopTracker::new(mode);
    let (mut m, mut n, mut k) = (0, 0, 0);
    while !tracker.done() {
        k += 1;
        let mut pok = true;
        if tracker.primal_active() {
            let &(du, eta) = primal.get(m)?;
            m += 1;
            pok = criterion_holds(du, eta, lambda_ctr);
        }
        let mut dok = true;
        if tracker.dual_active() {
            let &(dz, zeta) = dual.get(n)?;
            n += 1;
            dok = criterion_holds(dz, zeta, lambda_ctr);
        }
        tracker.observe(k, pok, dok);
    }
    Some((m, n, k))
}

/// `Ξ = [η + ⦀Δu⦀][ζ + ⦀Δz⦀]`.
pub fn xi_bound(eta: f64, du: f64, zeta: f64, dz: f64) -> f64 {
    (eta + du) * (zeta + dz)
}

/// `Λ = [⦀u* - u⦀ + η][⦀z* - z⦀ + ζ]` from the algebraic errors.
pub fn lambda_quasi_error(err_u: f64, eta: f64, err_z: f64, zeta: f64) -> f64 {
    (err_u + eta) * (err_z + zeta)
}

fn energy_distance(op: &SparseSymmetricOperator, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    op.bilinear(&d, &d).max(0.0).sqrt()
}

/// `(G(u) + F(z) - a(u, z), F(z) - a(u, z))` where `G(u) = goal_load · u`.
pub fn discrete_goal(
    u: &[f64],
    z: &[f64],
    primal_load: &[f64],
    goal_load: &[f64],
    op: &SparseSymmetricOperator,
) -> (f64, f64) {
    let corrector = dot(primal_load, z) - op.bilinear(u, z);
    (dot(goal_load, u) + corrector, corrector)
}

/// One `(ℓ, k)` of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub ell: usize,
    pub k: usize,
    /// Real primal and dual solver steps taken on this level so far.
    pub m: usize,
    pub n: usize,
    pub num_elements: usize,
    pub num_dofs: usize,
    /// Cumulative element-steps.
    pub work: u64,
    pub eta: f64,
    pub zeta: f64,
    pub du_energy: f64,
    pub dz_energy: f64,
    pub xi: f64,
    pub goal_raw: f64,
    pub corrector: f64,
    pub goal_discrete: f64,
    pub goal_error: Option<f64>,
    pub lambda_diag: Option<f64>,
    /// Measured `⦀u* - u^k⦀ / ⦀u* - u^{k-1}⦀` for real primal and dual steps.
    pub q_primal: Option<f64>,
    pub q_dual: Option<f64>,
    pub wall_seconds: f64,
}

/// What happened on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub ell: usize,
    pub num_elements: usize,
    pub num_dofs: usize,
    /// Real solver steps taken.
    pub m_bar: usize,
    pub n_bar: usize,
    pub k_bar: usize,
    /// First steps at which each criterion held.
    pub primal_first: usize,
    pub dual_first: usize,
    /// Elements marked for the next refinement (0 on the last level).
    pub marked: usize,
    /// Sons estimate of the refinement leading to this level.
    pub sons_estimate: bool,
    /// `(#T_ℓ - #T_0) / Σ_{j<ℓ} #M_j`.
    pub closure_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ZeroEstimator,
    ElementBudget,
    WorkBudget,
}

#[derive(Debug, Clone)]
pub struct History {
    pub records: Vec<StepRecord>,
    pub levels: Vec<LevelSummary>,
    /// Quasi-error product of the initial guesses on the initial mesh.
    pub lambda_initial: Option<f64>,
    pub reference: Option<f64>,
    pub termination: Termination,
    pub config: AdaptiveConfig,
    pub final_mesh: Mesh,
}

impl History {
    /// Sets the exact goal value and fills in `goal_error`.
    pub fn set_reference(&mut self, reference: f64) {
        self.reference = Some(reference);
        for r in &mut self.records {
            r.goal_error = Some((reference - r.goal_discrete).abs());
        }
    }

    /// The last record of every level.
    pub fn accepted(&self) -> Vec<&StepRecord> {
        let mut out: Vec<&StepRecord> = Vec::new();
        for r in &self.records {
            match out.last_mut() {
                Some(last) if last.ell == r.ell => *last = r,
                _ => out.push(r),
            }
        }
        out
    }

    /// `|(ℓ, k)| = k + Σ_{j<ℓ} k̲(j)` for every record.
    pub fn total_indices(&self) -> Vec<usize> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            out.push(offset + r.k);
            if self.records.get(i + 1).is_none_or(|next| next.ell != r.ell) {
                offset += r.k;
            }
        }
        out
    }

    /// Recomputes the work column from `#T_ℓ` and compares exactly.
    pub fn check_work_ledger(&self) -> Result<(), String> {
        let mut work = 0u64;
        for r in &self.records {
            work += r.num_elements as u64;
            if work != r.work {
                return Err(format!("({}, {}): recorded {} != recomputed {work}", r.ell, r.k, r.work));
            }
        }
        Ok(())
    }

    /// Checks that every level stopped at the right step: the accepted
    /// iterates satisfy the criterion and earlier ones did not, in the
    /// sense of the configured stopping mode.
    pub fn check_bracketing(&self) -> Result<(), String> {
        let lambda = self.config.lambda_ctr;
        for level in &self.levels {
            let recs: Vec<&StepRecord> = self.records.iter().filter(|r| r.ell == level.ell).collect();
            let ok = |k: usize| {
                let r = recs[k - 1];
                solver_stopping(r.du_energy, r.eta, r.dz_energy, r.zeta, lambda)
            };
            let fail = |what: &str| Err(format!("level {}: {what}", level.ell));
            if recs.len() != level.k_bar || level.k_bar == 0 {
                return fail("record count differs from k̲");
            }
            let k_bar = level.k_bar;
            match self.config.stopping {
                StoppingMode::Independent => {
                    for (first, steps, pick) in [
                        (level.primal_first, level.m_bar, 0usize),
                        (level.dual_first, level.n_bar, 1usize),
                    ] {
                        let holds = |k: usize| if pick == 0 { ok(k).0 } else { ok(k).1 };
                        if first != steps || !holds(first) {
                            return fail("accepted iterate violates the criterion");
                        }
                        if first > 1 && holds(first - 1) {
                            return fail("predecessor of the accepted iterate satisfies the criterion");
                        }
                        if (first..=k_bar).any(|k| !holds(k)) {
                            return fail("padded iterate violates the criterion");
                        }
                    }
                }
                StoppingMode::Stronger => {
                    let (p, d) = ok(k_bar);
                    if !(p && d) {
                        return fail("accepted iterates violate the criterion");
                    }
                    if k_bar > 1 && ok(k_bar - 1) == (true, true) {
                        return fail("both criteria already held one step earlier");
                    }
                }
                StoppingMode::Natural => {
                    if level.primal_first.max(level.dual_first) != k_bar {
                        return fail("k̲ is not the later first-satisfying index");
                    }
                    if !ok(level.primal_first).0 || !ok(level.dual_first).1 {
                        return fail("first-satisfying indices do not satisfy the criterion");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs a benchmark and fills in the goal errors.
pub fn run_benchmark(bench: &BenchmarkProblem, config: &AdaptiveConfig) -> Result<History, DriverError> {
    let mut h = run(&bench.mesh, &bench.problem, &bench.goal, config)?;
    h.set_reference(bench.reference);
    Ok(h)
}

struct DirectSolutions {
    u: Vec<f64>,
    z: Vec<f64>,
}

/// Runs the adaptive algorithm from `initial` with zero initial guesses.
pub fn run(initial: &Mesh, problem: &ProblemData, goal: &GoalData, config: &AdaptiveConfig) -> Result<History, DriverError> {
    config.validate()?;
    let start = Instant::now();
    let degree = config.quadrature_degree;
    let lambda = config.lambda_ctr;

    let mut mesh = initial.clone();
    let mut hierarchy = match config.solver {
        SolverKind::MlPcg => Some(MultilevelHierarchy::new(&mesh, &problem.coefficients)?),
        _ => None,
    };
    let mut records: Vec<StepRecord> = Vec::new();
    let mut levels: Vec<LevelSummary> = Vec::new();
    let mut marked_counts: Vec<usize> = Vec::new();
    let mut lambda_initial = None;
    let mut work: u64 = 0;
    let mut guesses: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut sons_estimate = true;

    let termination = loop {
        let ell = levels.len();
        let dofs = DofMap::new(&mesh);
        let ndofs = dofs.num_dofs();
        let nel = mesh.num_elements();
        let op = assemble_operator(&mesh, &problem.coefficients, &dofs)?;
        let f = assemble_primal_load(&mesh, problem, &dofs, degree);
        let g = assemble_dual_load(&mesh, goal, &dofs, degree);
        let est_u = ResidualEstimator::primal(&mesh, problem, degree)?;
        let est_z = ResidualEstimator::dual(&mesh, goal, &problem.coefficients, degree)?;

        let jacobi;
        let pre: &dyn Preconditioner = match config.solver {
            SolverKind::MlPcg => hierarchy.as_ref().expect("hierarchy exists for ml-pcg"),
            SolverKind::JacobiPcg => {
                jacobi = Jacobi::new(&op)?;
                &jacobi
            }
            SolverKind::Cg => &Identity,
        };

        let (u0, z0) = guesses.take().unwrap_or_else(|| (vec![0.0; ndofs], vec![0.0; ndofs]));
        let direct = if config.diagnostics && ndofs <= config.diag_max_dofs {
            let solver = DirectSolver::factor(&op)?;
            Some(DirectSolutions {
                u: solver.solve(&f).into_inner(),
                z: solver.solve(&g).into_inner(),
            })
        } else {
            None
        };
        let mut err_u = direct.as_ref().map(|d| energy_distance(&op, &d.u, &u0));
        let mut err_z = direct.as_ref().map(|d| energy_distance(&op, &d.z, &z0));
        if ell == 0 {
            if let (Some(eu), Some(ez)) = (err_u, err_z) {
                let eta0 = est_u.evaluate(&dofs, &u0)?.total();
                let zeta0 = est_z.evaluate(&dofs, &z0)?.total();
                lambda_initial = Some(lambda_quasi_error(eu, eta0, ez, zeta0));
            }
        }

        // Contraction factors are only meaningful above round-off.
        let floor = |exact: &[f64], e0: f64| CONTRACTION_FLOOR * e0.max(op.bilinear(exact, exact).max(0.0).sqrt());
        let floor_u = direct.as_ref().zip(err_u).map(|(d, e)| floor(&d.u, e));
        let floor_z = direct.as_ref().zip(err_z).map(|(d, e)| floor(&d.z, e));
        let mut su = PcgState::new(&op, pre, &f, u0)?;
        let mut sz = PcgState::new(&op, pre, &g, z0)?;
        let mut tracker = StopTracker::new(config.stopping);
        let (mut m, mut n) = (0usize, 0usize);
        let mut eta_ind: Option<Indicators> = None;
        let mut zeta_ind: Option<Indicators> = None;
        let mut k = 0usize;
        while !tracker.done() {
            k += 1;
            if k > config.max_solver_steps {
                return Err(DriverError::SolverDidNotStop {
                    level: ell,
                    steps: config.max_solver_steps,
                });
            }
            let (mut du, mut dz) = (0.0, 0.0);
            let (mut q_primal, mut q_dual) = (None, None);
            if tracker.primal_active() {
                du = su.step(&op, pre)?;
                m += 1;
                eta_ind = Some(est_u.evaluate(&dofs, su.solution())?);
                if let Some(d) = &direct {
                    let e = energy_distance(&op, &d.u, su.solution());
                    q_primal = err_u.filter(|&p| p > floor_u.unwrap_or(0.0) && p > 0.0).map(|p| e / p);
                    err_u = Some(e);
                }
            }
            if tracker.dual_active() {
                dz = sz.step(&op, pre)?;
                n += 1;
                zeta_ind = Some(est_z.evaluate(&dofs, sz.solution())?);
                if let Some(d) = &direct {
                    let e = energy_distance(&op, &d.z, sz.solution());
                    q_dual = err_z.filter(|&p| p > floor_z.unwrap_or(0.0) && p > 0.0).map(|p| e / p);
                    err_z = Some(e);
                }
            }
            let eta = eta_ind.as_ref().expect("primal steps at k = 1").total();
            let zeta = zeta_ind.as_ref().expect("dual steps at k = 1").total();
            let (pok, dok) = solver_stopping(du, eta, dz, zeta, lambda);
            tracker.observe(k, pok, dok);

            work += nel as u64;
            let (u, z) = (su.solution(), sz.solution());
            let (goal_discrete, corrector) = discrete_goal(u, z, &f, &g, &op);
            records.push(StepRecord {
                ell,
                k,
                m,
                n,
                num_elements: nel,
                num_dofs: ndofs,
                work,
                eta,
                zeta,
                du_energy: du,
                dz_energy: dz,
                xi: xi_bound(eta, du, zeta, dz),
                goal_raw: dot(&g, u),
                corrector,
                goal_discrete,
                goal_error: None,
                lambda_diag: match (err_u, err_z) {
                    (Some(eu), Some(ez)) => Some(lambda_quasi_error(eu, eta, ez, zeta)),
                    _ => None,
                },
                q_primal,
                q_dual,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }

        let (pf, df) = tracker.first_indices();
        let mut summary = LevelSummary {
            ell,
            num_elements: nel,
            num_dofs: ndofs,
            m_bar: m,
            n_bar: n,
            k_bar: k,
            primal_first: pf.unwrap_or(k),
            dual_first: df.unwrap_or(k),
            marked: 0,
            sons_estimate,
            closure_ratio: if marked_counts.is_empty() {
                None
            } else {
                Some(closure_ratio(&marked_counts, nel, initial.num_elements())?)
            },
        };
        let eta_ind = eta_ind.expect("at least one step per level");
        let zeta_ind = zeta_ind.expect("at least one step per level");

        let stop = if eta_ind.total() <= config.zero_tolerance || zeta_ind.total() <= config.zero_tolerance {
            Some(Termination::ZeroEstimator)
        } else if config.max_elements.is_some_and(|b| nel >= b) {
            Some(Termination::ElementBudget)
        } else if config.max_work.is_some_and(|b| work >= b) {
            Some(Termination::WorkBudget)
        } else {
            None
        };
        if let Some(t) = stop {
            levels.push(summary);
            break t;
        }

        let marked = mark(&eta_ind, &zeta_ind, &config.marking)?;
        summary.marked = marked.len();
        marked_counts.push(marked.len());
        levels.push(summary);

        let fine = mesh.refine(&marked)?;
        sons_estimate = sons_estimate_holds(&mesh, &fine);
        if let Some(h) = hierarchy.as_mut() {
            h.push_level(&fine)?;
        }
        let fine_dofs = DofMap::new(&fine);
        let prolong = |x: &[f64]| fine_dofs.restrict(&fine.prolongate(&dofs.expand(x))).into_inner();
        guesses = Some((prolong(su.solution()), prolong(sz.solution())));
        mesh = fine;
    };

    Ok(History {
        records,
        levels,
        lambda_initial,
        reference: None,
        termination,
        config: config.clone(),
        final_mesh: mesh,
    })
}
