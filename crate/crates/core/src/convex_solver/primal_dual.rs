//! Primal-dual interior-point method for the same programs the barrier
//! method accepts. Iterates stay strictly primal feasible; multipliers are
//! updated alongside the primal step, which usually takes a few dozen
//! Newton systems where the barrier method needs a hundred or more.

use super::{finish, prepare, SmoothProgram, SolveStatus, SolverError, Termination, Workspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalDualOptions {
    /// Stop once the surrogate duality gap `-g^T lambda` falls below this...
    pub tol: f64,
    /// ...and the dual residual is this small relative to the objective.
    pub dual_tol: f64,
    /// Centering parameter: the target gap shrinks by this factor per step.
    pub mu: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub max_iter: usize,
    pub initial_regularization: f64,
    pub scale_bounds: (f64, f64),
}

impl Default for PrimalDualOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            dual_tol: 1e-7,
            mu: 10.0,
            armijo: 0.01,
            shrink: 0.5,
            max_iter: 300,
            initial_regularization: 1e-10,
            scale_bounds: (1e-2, 1e3),
        }
    }
}

/// Dual residual `-c + sum_i lambda_i grad g_i` and constraint values at `x`.
struct Residuals {
    dual: Vec<f64>,
    g: Vec<f64>,
}

fn residuals(prog: &SmoothProgram, x: &[f64], lambda: &[f64], grad: &mut [f64]) -> Residuals {
    let mut dual: Vec<f64> = prog.objective.iter().map(|c| -c).collect();
    let mut g = Vec::with_capacity(prog.constraints.len());
    for (c, &l) in prog.constraints.iter().zip(lambda) {
        g.push(c.value(x));
        let k = c.support().len();
        c.gradient(x, &mut grad[..k]);
        for (&i, &v) in c.support().iter().zip(grad.iter()) {
            dual[i] += l * v;
        }
    }
    Residuals { dual, g }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// `|r_dual|^2 + |r_cent|^2` with `r_cent_i = -lambda_i g_i - 1/t`.
fn merit(r: &Residuals, lambda: &[f64], t: f64) -> f64 {
    let cent: f64 =
        r.g.iter()
            .zip(lambda)
            .map(|(g, l)| (-l * g - 1.0 / t).powi(2))
            .sum();
    norm_sq(&r.dual) + cent
}

pub fn solve_primal_dual(
    prog: &SmoothProgram,
    opts: &PrimalDualOptions,
) -> Result<SolveStatus, SolverError> {
    let mut system = prepare(prog, opts.tol)?;
    let n = prog.num_vars();
    let m = prog.constraints.len();
    let mut work = Workspace::new(n, prog);
    let mut grad = vec![0.0; work.grad_local.len()];
    let mut x = prog.start.clone();

    let scale = prog
        .objective_at(&x)
        .abs()
        .clamp(opts.scale_bounds.0, opts.scale_bounds.1);
    let t0 = m as f64 / scale;
    let mut lambda: Vec<f64> = prog
        .constraints
        .iter()
        .map(|c| 1.0 / (t0 * -c.value(&x)))
        .collect();
    let obj_norm = norm_sq(&prog.objective).sqrt().max(1.0);
    let mut reg = opts.initial_regularization;
    let mut history = Vec::new();
    let mut res = residuals(prog, &x, &lambda, &mut grad);
    let mut dlambda = vec![0.0; m];

    for iter in 0..opts.max_iter {
        let gap: f64 = res.g.iter().zip(&lambda).map(|(g, l)| -g * l).sum();
        if gap <= opts.tol && norm_sq(&res.dual).sqrt() <= opts.dual_tol * obj_norm {
            return Ok(finish(prog, x, gap, iter, Termination::Optimal, history));
        }
        let t = opts.mu * m as f64 / gap;

        work.accumulate(prog, &x, 1.0, system.as_mut(), |i, g| {
            let inv = 1.0 / (-g);
            [inv / t, lambda[i], lambda[i] * inv]
        });
        let mut solved = false;
        for _ in 0..12 {
            if system.solve(&work.neg_grad, reg, &mut work.dx) {
                solved = true;
                break;
            }
            reg *= 10.0;
        }
        if !solved {
            return Ok(finish(prog, x, gap, iter, Termination::Numeric, history));
        }
        reg = (reg * 0.1).max(opts.initial_regularization);

        // Multiplier step from the linearized complementarity condition.
        let mut s_max: f64 = 1.0;
        for (i, c) in prog.constraints.iter().enumerate() {
            let k = c.support().len();
            c.gradient(&x, &mut grad[..k]);
            let gdx: f64 = c
                .support()
                .iter()
                .zip(&grad[..k])
                .map(|(&j, &v)| v * work.dx[j])
                .sum();
            let neg_g = -res.g[i];
            dlambda[i] = -lambda[i] + 1.0 / (t * neg_g) + lambda[i] / neg_g * gdx;
            if dlambda[i] < 0.0 {
                s_max = s_max.min(-lambda[i] / dlambda[i]);
            }
        }
        let mut step = 0.99 * s_max;
        let r0 = merit(&res, &lambda, t).sqrt();
        let mut trial_lambda = vec![0.0; m];
        let accepted = loop {
            if step < 1e-14 {
                break None;
            }
            for i in 0..n {
                work.trial[i] = x[i] + step * work.dx[i];
            }
            if prog
                .constraints
                .iter()
                .any(|c| !(c.value(&work.trial) < 0.0))
            {
                step *= opts.shrink;
                continue;
            }
            for i in 0..m {
                trial_lambda[i] = lambda[i] + step * dlambda[i];
            }
            let r = residuals(prog, &work.trial, &trial_lambda, &mut grad);
            if merit(&r, &trial_lambda, t).sqrt() <= (1.0 - opts.armijo * step) * r0 {
                break Some(r);
            }
            step *= opts.shrink;
        };
        let Some(r) = accepted else {
            return Ok(finish(
                prog,
                x,
                gap,
                iter + 1,
                Termination::Numeric,
                history,
            ));
        };
        std::mem::swap(&mut x, &mut work.trial);
        std::mem::swap(&mut lambda, &mut trial_lambda);
        res = r;
        history.push(prog.objective_at(&x));
    }
    let gap: f64 = res.g.iter().zip(&lambda).map(|(g, l)| -g * l).sum();
    Ok(finish(
        prog,
        x,
        gap,
        opts.max_iter,
        Termination::MaxIter,
        history,
    ))
}
