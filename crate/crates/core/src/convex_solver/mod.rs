//! Feasible-start log-barrier solver for smooth convex programs.
//!
//! Programs are stated as `maximize c^T x` subject to `g_i(x) <= 0` with
//! every `g_i` convex and smooth. Each centering step runs damped Newton on
//! `-t c^T x - sum_i log(-g_i(x))`; the barrier weight grows tenfold per
//! stage until the duality gap bound `m / t` falls below the tolerance.
//! Linear programs are handled by the same engine (see [`lp`]).

pub mod lp;
mod primal_dual;
mod system;

pub use lp::{solve_lp, solve_lp_from, LinearProgram, SparseRow};
pub use primal_dual::{solve_primal_dual, PrimalDualOptions};
pub use system::BlockStructure;

use system::{ArrowSystem, DenseSystem, NewtonSystem};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("start point is not strictly feasible: constraint {index} has value {value:e}")]
    InfeasibleStart { index: usize, value: f64 },
    #[error("linear program has no strictly feasible point (phase-I optimum {0:e})")]
    Infeasible(f64),
    #[error("barrier solve terminated early: {0:?}")]
    Terminated(Termination),
}

/// Curvature class of a constraint in its `g(x) <= 0` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Affine,
    ConvexSmooth,
    /// A norm bound `|a| <= b` written as `|a|^2 - b^2 <= 0`.
    SquaredNorm,
}

/// A convex constraint `g(x) <= 0` that only reads the variables in its support.
///
/// Gradients and Hessians are expressed in local coordinates: entry `i`
/// refers to variable `support()[i]`.
pub trait SmoothConstraint: Send + Sync {
    fn support(&self) -> &[usize];
    fn kind(&self) -> ConstraintKind;
    /// May return a non-finite value outside the function's domain.
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    /// Push the lower-triangle (`i >= j`, local indices) Hessian entries.
    fn hessian(&self, _x: &[f64], _out: &mut Vec<(usize, usize, f64)>) {}
}

/// `a^T x - rhs <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub support: Vec<usize>,
    pub coefs: Vec<f64>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(support: Vec<usize>, coefs: Vec<f64>, rhs: f64) -> Self {
        assert_eq!(support.len(), coefs.len());
        Self {
            support,
            coefs,
            rhs,
        }
    }

    /// `x[i] <= ub`.
    pub fn upper(i: usize, ub: f64) -> Self {
        Self::new(vec![i], vec![1.0], ub)
    }

    /// `x[i] >= lb`.
    pub fn lower(i: usize, lb: f64) -> Self {
        Self::new(vec![i], vec![-1.0], -lb)
    }
}

impl SmoothConstraint for LinearConstraint {
    fn support(&self) -> &[usize] {
        &self.support
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Affine
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coefs)
            .map(|(&i, &a)| a * x[i])
            .sum::<f64>()
            - self.rhs
    }
    fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
        grad.copy_from_slice(&self.coefs);
    }
}

/// `1/2 y^T Q y + a^T y + c0 <= 0` with `y = x[support]` and `Q` positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    pub support: Vec<usize>,
    /// Dense row-major `Q`.
    pub q: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub kind: ConstraintKind,
}

impl QuadraticConstraint {
    /// `|x[a] - x[b]|^2 <= r^2` for 2-vectors `a = (a0, a1)` and `b = (b0, b1)`.
    pub fn squared_distance(a: [usize; 2], b: [usize; 2], r: f64) -> Self {
        let q = vec![
            2.0, 0.0, -2.0, 0.0, //
            0.0, 2.0, 0.0, -2.0, //
            -2.0, 0.0, 2.0, 0.0, //
            0.0, -2.0, 0.0, 2.0,
        ];
        Self {
            support: vec![a[0], a[1], b[0], b[1]],
            q,
            linear: vec![0.0; 4],
            constant: -r * r,
            kind: ConstraintKind::SquaredNorm,
        }
    }

    /// `|x[p] - u|^2 - x[z] <= 0` for a 2-vector `p` and a scalar `z`.
    pub fn squared_distance_below(p: [usize; 2], u: [f64; 2], z: usize) -> Self {
        let q = vec![2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0];
        Self {
            support: vec![p[0], p[1], z],
            q,
            linear: vec![-2.0 * u[0], -2.0 * u[1], -1.0],
            constant: u[0] * u[0] + u[1] * u[1],
            kind: ConstraintKind::ConvexSmooth,
        }
    }
}

impl SmoothConstraint for QuadraticConstraint {
    fn support(&self) -> &[usize] {
        &self.support
    }
    fn kind(&self) -> ConstraintKind {
        self.kind
    }
    fn value(&self, x: &[f64]) -> f64 {
        let m = self.support.len();
        let mut v = self.constant;
        for a in 0..m {
            let ya = x[self.support[a]];
            v += self.linear[a] * ya;
            let row = &self.q[a * m..(a + 1) * m];
            let qy: f64 = row.iter().zip(&self.support).map(|(q, &j)| q * x[j]).sum();
            v += 0.5 * ya * qy;
        }
        v
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let m = self.support.len();
        for a in 0..m {
            let row = &self.q[a * m..(a + 1) * m];
            grad[a] = self.linear[a]
                + row
                    .iter()
                    .zip(&self.support)
                    .map(|(q, &j)| q * x[j])
                    .sum::<f64>();
        }
    }
    fn hessian(&self, _x: &[f64], out: &mut Vec<(usize, usize, f64)>) {
        let m = self.support.len();
        for a in 0..m {
            for b in 0..=a {
                let v = self.q[a * m + b];
                if v != 0.0 {
                    out.push((a, b, v));
                }
            }
        }
    }
}

/// `maximize objective^T x` subject to every constraint, from a strictly feasible start.
pub struct SmoothProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Box<dyn SmoothConstraint>>,
    pub start: Vec<f64>,
    /// Optional block-arrow layout of the Newton system.
    pub structure: Option<BlockStructure>,
}

impl SmoothProgram {
    pub fn new(objective: Vec<f64>, start: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
            start,
            structure: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, c: impl SmoothConstraint + 'static) {
        self.constraints.push(Box::new(c));
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest constraint value at `x` (negative means strictly feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Optimal,
    MaxIter,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStatus {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Duality gap bound `m / t` at the last completed centering.
    pub gap: f64,
    pub newton_iterations: usize,
    pub termination: Termination,
    /// Objective after each completed centering stage.
    pub stage_objectives: Vec<f64>,
}

/// Tuning knobs of the barrier method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    pub tol: f64,
    pub growth: f64,
    /// Armijo acceptance fraction.
    pub armijo: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
    /// Centering stops once half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    pub max_newton_per_stage: usize,
    pub max_newton_total: usize,
    pub initial_regularization: f64,
    /// Floor and ceiling on the "objective scale" used to pick the initial barrier weight.
    pub scale_bounds: (f64, f64),
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            growth: 10.0,
            armijo: 0.3,
            shrink: 0.8,
            newton_tol: 1e-9,
            max_newton_per_stage: 200,
            max_newton_total: 4000,
            initial_regularization: 1e-10,
            scale_bounds: (1e-2, 1e3),
        }
    }
}

/// Solve with default options at gap tolerance `tol`.
pub fn solve_barrier(prog: &SmoothProgram, tol: f64) -> Result<SolveStatus, SolverError> {
    solve_barrier_with(
        prog,
        &BarrierOptions {
            tol,
            ..BarrierOptions::default()
        },
    )
}

/// Validate `prog` and pick the Newton system its structure allows.
fn prepare(prog: &SmoothProgram, tol: f64) -> Result<Box<dyn NewtonSystem>, SolverError> {
    let n = prog.num_vars();
    if prog.start.len() != n {
        return Err(SolverError::Malformed(format!(
            "start has {} entries, expected {n}",
            prog.start.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(SolverError::Malformed("tolerance must be positive".into()));
    }
    if prog.constraints.is_empty() {
        return Err(SolverError::Malformed(
            "program has no constraints; objective is unbounded".into(),
        ));
    }
    for (ci, c) in prog.constraints.iter().enumerate() {
        if let Some(&bad) = c.support().iter().find(|&&i| i >= n) {
            return Err(SolverError::Malformed(format!(
                "constraint {ci} references variable {bad}"
            )));
        }
    }
    for (index, c) in prog.constraints.iter().enumerate() {
        let value = c.value(&prog.start);
        if !(value < 0.0) {
            return Err(SolverError::InfeasibleStart { index, value });
        }
    }
    match &prog.structure {
        Some(s)
            if s.is_well_formed(n)
                && prog
                    .constraints
                    .iter()
                    .all(|c| ArrowSystem::admits(s, c.support())) =>
        {
            Ok(Box::new(ArrowSystem::new(n, s)))
        }
        Some(_) => Err(SolverError::Malformed(
            "block structure does not match constraint supports".into(),
        )),
        None => Ok(Box::new(DenseSystem::new(n))),
    }
}

pub fn solve_barrier_with(
    prog: &SmoothProgram,
    opts: &BarrierOptions,
) -> Result<SolveStatus, SolverError> {
    let mut system = prepare(prog, opts.tol)?;
    let n = prog.num_vars();

    let m = prog.constraints.len();
    let mut x = prog.start.clone();
    let mut stage_objectives = Vec::new();
    let scale = prog
        .objective_at(&x)
        .abs()
        .clamp(opts.scale_bounds.0, opts.scale_bounds.1);
    let mut t = m as f64 / scale;
    let mut work = Workspace::new(n, prog);
    let mut newton_total = 0usize;
    let mut reg = opts.initial_regularization;

    loop {
        // Centering.
        let mut stage_iters = 0usize;
        loop {
            if newton_total >= opts.max_newton_total || stage_iters >= opts.max_newton_per_stage {
                return Ok(finish(
                    prog,
                    x,
                    m as f64 / t,
                    newton_total,
                    Termination::MaxIter,
                    stage_objectives,
                ));
            }
            work.assemble(prog, &x, t, system.as_mut());
            let mut solved = false;
            for _ in 0..12 {
                if system.solve(&work.neg_grad, reg, &mut work.dx) {
                    solved = true;
                    break;
                }
                reg *= 10.0;
            }
            if !solved {
                return Ok(finish(
                    prog,
                    x,
                    m as f64 / t,
                    newton_total,
                    Termination::Numeric,
                    stage_objectives,
                ));
            }
            reg = (reg * 0.1).max(opts.initial_regularization);
            newton_total += 1;
            stage_iters += 1;
            let decrement: f64 = work.neg_grad.iter().zip(&work.dx).map(|(g, d)| g * d).sum();
            if !decrement.is_finite() {
                return Ok(finish(
                    prog,
                    x,
                    m as f64 / t,
                    newton_total,
                    Termination::Numeric,
                    stage_objectives,
                ));
            }
            if decrement * 0.5 <= opts.newton_tol {
                break;
            }
            // Backtrack into the domain, then to sufficient decrease.
            let mut step = 1.0;
            let accepted = loop {
                if step < 1e-14 {
                    break false;
                }
                for i in 0..n {
                    work.trial[i] = x[i] + step * work.dx[i];
                }
                match barrier_change(
                    prog,
                    &work.g,
                    &work.trial,
                    step * t * prog.objective_at(&work.dx),
                ) {
                    Some(d) if d <= -opts.armijo * step * decrement => break true,
                    _ => step *= opts.shrink,
                }
            };
            if !accepted {
                // No further progress is representable at this barrier weight.
                break;
            }
            std::mem::swap(&mut x, &mut work.trial);
        }
        stage_objectives.push(prog.objective_at(&x));
        let gap = m as f64 / t;
        if gap <= opts.tol {
            return Ok(finish(
                prog,
                x,
                gap,
                newton_total,
                Termination::Optimal,
                stage_objectives,
            ));
        }
        t *= opts.growth;
    }
}

fn finish(
    prog: &SmoothProgram,
    x: Vec<f64>,
    gap: f64,
    newton_iterations: usize,
    termination: Termination,
    stage_objectives: Vec<f64>,
) -> SolveStatus {
    let objective = prog.objective_at(&x);
    SolveStatus {
        x,
        objective,
        gap,
        newton_iterations,
        termination,
        stage_objectives,
    }
}

/// Change of the barrier objective `-t c^T x - sum log(-g)` from the point
/// with constraint values `g` to `trial`, where `gain = t c^T (trial - x)`.
/// Summing log-ratios keeps it accurate when the objective itself is huge.
fn barrier_change(prog: &SmoothProgram, g: &[f64], trial: &[f64], gain: f64) -> Option<f64> {
    let mut d = -gain;
    for (c, &g0) in prog.constraints.iter().zip(g) {
        let g1 = c.value(trial);
        if !(g1 < 0.0) {
            return None;
        }
        d -= ((g0 - g1) / -g0).ln_1p();
    }
    d.is_finite().then_some(d)
}

pub(super) struct Workspace {
    neg_grad: Vec<f64>,
    dx: Vec<f64>,
    trial: Vec<f64>,
    grad_local: Vec<f64>,
    hess_local: Vec<(usize, usize, f64)>,
    /// Constraint values at the last assembled point.
    g: Vec<f64>,
}

impl Workspace {
    pub(super) fn new(n: usize, prog: &SmoothProgram) -> Self {
        let max_support = prog
            .constraints
            .iter()
            .map(|c| c.support().len())
            .max()
            .unwrap_or(0);
        Self {
            neg_grad: vec![0.0; n],
            dx: vec![0.0; n],
            trial: vec![0.0; n],
            grad_local: vec![0.0; max_support],
            hess_local: Vec::new(),
            g: vec![0.0; prog.constraints.len()],
        }
    }

    fn assemble(&mut self, prog: &SmoothProgram, x: &[f64], t: f64, sys: &mut dyn NewtonSystem) {
        let mut g_at = std::mem::take(&mut self.g);
        self.accumulate(prog, x, t, sys, |i, g| {
            g_at[i] = g;
            let inv = 1.0 / (-g);
            [inv, inv, inv * inv]
        });
        self.g = g_at;
    }

    /// Accumulate `neg_grad = s c - sum_i a_i grad g_i` and
    /// `H = sum_i b_i hess g_i + sum_i d_i grad g_i grad g_i^T`, where
    /// `[a_i, b_i, d_i] = coef(i, g_i(x))`.
    pub(super) fn accumulate(
        &mut self,
        prog: &SmoothProgram,
        x: &[f64],
        s: f64,
        sys: &mut dyn NewtonSystem,
        mut coef: impl FnMut(usize, f64) -> [f64; 3],
    ) {
        sys.clear();
        for (g, c) in self.neg_grad.iter_mut().zip(&prog.objective) {
            *g = s * c;
        }
        for (ci, c) in prog.constraints.iter().enumerate() {
            let support = c.support();
            let k = support.len();
            let [a, b, d] = coef(ci, c.value(x));
            let grad = &mut self.grad_local[..k];
            c.gradient(x, grad);
            for (j, &i) in support.iter().enumerate() {
                self.neg_grad[i] -= a * grad[j];
            }
            if d != 0.0 {
                sys.add_rank_one(support, grad, d);
            }
            if c.kind() != ConstraintKind::Affine {
                self.hess_local.clear();
                c.hessian(x, &mut self.hess_local);
                for &(p, q, v) in &self.hess_local {
                    let (ip, iq) = (support[p], support[q]);
                    if ip >= iq {
                        sys.add_lower(ip, iq, b * v);
                    } else {
                        sys.add_lower(iq, ip, b * v);
                    }
                }
            }
        }
    }
}
