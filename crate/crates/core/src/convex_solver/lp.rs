//! Linear programs on top of the barrier engine.
//!
//! Equality rows are eliminated by Gauss-Jordan substitution, inequality
//! rows are normalized, and a phase-I barrier solve finds a strictly
//! feasible start unless the caller supplies one.

use super::{
    solve_barrier_with, solve_primal_dual, BarrierOptions, LinearConstraint, PrimalDualOptions,
    SmoothProgram, SolveStatus, SolverError, Termination,
};

/// `sum_j coefs[j] * x[indices[j]]` compared against `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub coefs: Vec<f64>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(indices: Vec<usize>, coefs: Vec<f64>, rhs: f64) -> Self {
        assert_eq!(indices.len(), coefs.len());
        Self {
            indices,
            coefs,
            rhs,
        }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.coefs)
            .map(|(&i, &a)| a * x[i])
            .sum()
    }
}

/// `maximize objective^T x` s.t. `ineq_i . x <= rhs_i` and `eq_j . x = rhs_j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub inequalities: Vec<SparseRow>,
    pub equalities: Vec<SparseRow>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_leq(&mut self, indices: Vec<usize>, coefs: Vec<f64>, rhs: f64) {
        self.inequalities.push(SparseRow::new(indices, coefs, rhs));
    }

    pub fn add_eq(&mut self, indices: Vec<usize>, coefs: Vec<f64>, rhs: f64) {
        self.equalities.push(SparseRow::new(indices, coefs, rhs));
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation over all rows (equalities in absolute value).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let ineq = self.inequalities.iter().map(|r| r.dot(x) - r.rhs);
        let eq = self.equalities.iter().map(|r| (r.dot(x) - r.rhs).abs());
        ineq.chain(eq).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Solve `lp` to duality-gap tolerance `tol`.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<SolveStatus, SolverError> {
    solve_lp_from(lp, None, tol)
}

/// Like [`solve_lp`], skipping phase I when `hint` satisfies every
/// equality and strictly satisfies every inequality.
pub fn solve_lp_from(
    lp: &LinearProgram,
    hint: Option<&[f64]>,
    tol: f64,
) -> Result<SolveStatus, SolverError> {
    let n = lp.num_vars();
    for row in lp.inequalities.iter().chain(&lp.equalities) {
        if row.indices.iter().any(|&i| i >= n) {
            return Err(SolverError::Malformed(
                "row references a variable out of range".into(),
            ));
        }
    }
    if let Some(h) = hint {
        if h.len() != n {
            return Err(SolverError::Malformed("hint has the wrong length".into()));
        }
    }
    let elim = Elimination::new(lp)?;
    let reduced = elim.reduce(lp)?;
    let nf = elim.free.len();

    let start = hint
        .map(|h| elim.free.iter().map(|&j| h[j]).collect::<Vec<_>>())
        .filter(|y| reduced.rows.iter().all(|r| r.dot(y) - r.rhs < 0.0));
    let start = match start {
        Some(y) => y,
        None => phase_one(
            &reduced,
            nf,
            hint.map(|h| elim.free.iter().map(|&j| h[j]).collect()),
        )?,
    };

    let mut prog = SmoothProgram::new(reduced.objective.clone(), start);
    for r in &reduced.rows {
        prog.push(LinearConstraint::new(
            r.indices.clone(),
            r.coefs.clone(),
            r.rhs,
        ));
    }
    let status = solve_primal_dual(
        &prog,
        &PrimalDualOptions {
            tol,
            ..PrimalDualOptions::default()
        },
    )?;
    let x = elim.expand(&status.x);
    let objective = lp.objective_at(&x);
    Ok(SolveStatus {
        x,
        objective,
        ..status
    })
}

struct Reduced {
    objective: Vec<f64>,
    rows: Vec<SparseRow>,
}

/// `x[pivot_r] = value_r - sum_j coef_rj * x[j]` over free columns `j`.
struct Elimination {
    n: usize,
    free: Vec<usize>,
    /// Original index -> position in `free`, or `None` for pivots.
    free_pos: Vec<Option<usize>>,
    pivots: Vec<(usize, f64, Vec<(usize, f64)>)>,
    /// Original index -> position in `pivots` (meaningful for pivots only).
    pivot_of: Vec<usize>,
}

impl Elimination {
    fn new(lp: &LinearProgram) -> Result<Self, SolverError> {
        let n = lp.num_vars();
        let me = lp.equalities.len();
        let mut mat = vec![vec![0.0; n]; me];
        let mut rhs = vec![0.0; me];
        for (r, row) in lp.equalities.iter().enumerate() {
            for (&i, &a) in row.indices.iter().zip(&row.coefs) {
                mat[r][i] += a;
            }
            rhs[r] = row.rhs;
        }
        let mut is_pivot = vec![false; n];
        let mut pivot_rows: Vec<(usize, usize)> = Vec::new();
        for r in 0..me {
            let scale = mat[r]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(rhs[r].abs())
                .max(1.0);
            let mut best = None;
            let mut best_abs = 1e-12 * scale;
            for (j, &v) in mat[r].iter().enumerate() {
                if !is_pivot[j] && v.abs() > best_abs {
                    best_abs = v.abs();
                    best = Some(j);
                }
            }
            let Some(p) = best else {
                if rhs[r].abs() > 1e-9 * scale {
                    return Err(SolverError::Infeasible(rhs[r].abs()));
                }
                continue;
            };
            let inv = 1.0 / mat[r][p];
            for v in mat[r].iter_mut() {
                *v *= inv;
            }
            rhs[r] *= inv;
            let pivot_row = mat[r].clone();
            for r2 in 0..me {
                if r2 != r && mat[r2][p] != 0.0 {
                    let f = mat[r2][p];
                    for (v, &pv) in mat[r2].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    rhs[r2] -= f * rhs[r];
                    mat[r2][p] = 0.0;
                }
            }
            is_pivot[p] = true;
            pivot_rows.push((r, p));
        }
        let free: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
        let mut free_pos = vec![None; n];
        for (pos, &j) in free.iter().enumerate() {
            free_pos[j] = Some(pos);
        }
        let pivots = pivot_rows
            .into_iter()
            .map(|(r, p)| {
                let deps = free
                    .iter()
                    .filter(|&&j| mat[r][j] != 0.0)
                    .map(|&j| (j, mat[r][j]))
                    .collect();
                (p, rhs[r], deps)
            })
            .collect::<Vec<_>>();
        let mut pivot_of = vec![usize::MAX; n];
        for (k, (p, _, _)) in pivots.iter().enumerate() {
            pivot_of[*p] = k;
        }
        Ok(Self {
            n,
            free,
            free_pos,
            pivots,
            pivot_of,
        })
    }

    /// Substitute pivots into a row over original variables, returning reduced coefficients.
    fn substitute(
        &self,
        indices: &[usize],
        coefs: &[f64],
        scratch: &mut Vec<f64>,
        touched: &mut Vec<usize>,
    ) -> f64 {
        let mut constant = 0.0;
        // Duplicates in `touched` are removed by the caller.
        let add = |j: usize, v: f64, scratch: &mut Vec<f64>, touched: &mut Vec<usize>| {
            let pos = self.free_pos[j].expect("free column");
            touched.push(pos);
            scratch[pos] += v;
        };
        for (&i, &a) in indices.iter().zip(coefs) {
            if self.free_pos[i].is_some() {
                add(i, a, scratch, touched);
            } else {
                let (_, value, deps) = &self.pivots[self.pivot_of[i]];
                constant += a * value;
                for &(j, m) in deps {
                    add(j, -a * m, scratch, touched);
                }
            }
        }
        constant
    }

    fn reduce(&self, lp: &LinearProgram) -> Result<Reduced, SolverError> {
        let nf = self.free.len();
        let mut scratch = vec![0.0; nf];
        let mut touched = Vec::new();
        let mut collect = |indices: &[usize], coefs: &[f64]| {
            touched.clear();
            let constant = self.substitute(indices, coefs, &mut scratch, &mut touched);
            touched.sort_unstable();
            touched.dedup();
            let mut idx = Vec::with_capacity(touched.len());
            let mut val = Vec::with_capacity(touched.len());
            for &pos in touched.iter() {
                if scratch[pos] != 0.0 {
                    idx.push(pos);
                    val.push(scratch[pos]);
                }
                scratch[pos] = 0.0;
            }
            (idx, val, constant)
        };
        let all: Vec<usize> = (0..self.n).collect();
        let (oi, ov, _) = collect(&all, &lp.objective);
        let mut objective = vec![0.0; nf];
        for (i, v) in oi.into_iter().zip(ov) {
            objective[i] = v;
        }
        let mut rows = Vec::with_capacity(lp.inequalities.len());
        for row in &lp.inequalities {
            let (idx, val, constant) = collect(&row.indices, &row.coefs);
            let rhs = row.rhs - constant;
            let scale = val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                if rhs > 0.0 {
                    continue;
                }
                return Err(SolverError::Infeasible(-rhs));
            }
            let inv = 1.0 / scale;
            rows.push(SparseRow::new(
                idx,
                val.into_iter().map(|v| v * inv).collect(),
                rhs * inv,
            ));
        }
        Ok(Reduced { objective, rows })
    }

    fn expand(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (pos, &j) in self.free.iter().enumerate() {
            x[j] = y[pos];
        }
        for (p, value, deps) in &self.pivots {
            x[*p] = value - deps.iter().map(|&(j, m)| m * x[j]).sum::<f64>();
        }
        x
    }
}

/// Maximize `-s` s.t. `row . y - rhs <= s`, `s >= -1`, inside a wide box; returns a strictly feasible `y`.
fn phase_one(
    reduced: &Reduced,
    nf: usize,
    guess: Option<Vec<f64>>,
) -> Result<Vec<f64>, SolverError> {
    let y0 = guess.unwrap_or_else(|| vec![0.0; nf]);
    let worst = reduced
        .rows
        .iter()
        .map(|r| r.dot(&y0) - r.rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    if reduced.rows.is_empty() {
        return Ok(y0);
    }
    let s_idx = nf;
    let mut start = y0;
    start.push(worst.max(0.0) + 1.0);
    let mut objective = vec![0.0; nf + 1];
    objective[s_idx] = -1.0;
    let mut prog = SmoothProgram::new(objective, start);
    for r in &reduced.rows {
        let mut idx = r.indices.clone();
        let mut coefs = r.coefs.clone();
        idx.push(s_idx);
        coefs.push(-1.0);
        prog.push(LinearConstraint::new(idx, coefs, r.rhs));
    }
    prog.push(LinearConstraint::lower(s_idx, -1.0));
    // The centering problem needs a bounded region; the box only has to
    // contain some strictly feasible point.
    let reach = 1e3 * prog.start[..nf].iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..nf {
        let c = prog.start[i];
        prog.push(LinearConstraint::upper(i, c + reach));
        prog.push(LinearConstraint::lower(i, c - reach));
    }
    let status = solve_barrier_with(
        &prog,
        &BarrierOptions {
            tol: 1e-7,
            ..BarrierOptions::default()
        },
    )?;
    if status.termination == Termination::Numeric {
        return Err(SolverError::Terminated(Termination::Numeric));
    }
    let y: Vec<f64> = status.x[..nf].to_vec();
    let margin = reduced
        .rows
        .iter()
        .map(|r| r.dot(&y) - r.rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(margin < 0.0) {
        return Err(SolverError::Infeasible(margin));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_cap() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_leq(vec![0], vec![1.0], 0.06);
        lp.add_leq(vec![0], vec![-1.0], 0.0);
        lp.add_leq(vec![0], vec![1.0], 1.0);
        let s = solve_lp(&lp, 1e-10).unwrap();
        assert!((s.objective - 0.06).abs() < 1e-8);
    }

    #[test]
    fn equality_elimination() {
        // maximize x1 + 2 x2 s.t. x0 + x1 + x2 = 1, x >= 0, x2 <= 0.25.
        let mut lp = LinearProgram::new(vec![0.0, 1.0, 2.0]);
        lp.add_eq(vec![0, 1, 2], vec![1.0, 1.0, 1.0], 1.0);
        for i in 0..3 {
            lp.add_leq(vec![i], vec![-1.0], 0.0);
        }
        lp.add_leq(vec![2], vec![1.0], 0.25);
        let s = solve_lp(&lp, 1e-10).unwrap();
        assert!((s.objective - 1.25).abs() < 1e-8, "{}", s.objective);
        assert!((s.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_leq(vec![0], vec![1.0], -1.0);
        lp.add_leq(vec![0], vec![-1.0], 0.0);
        assert!(matches!(
            solve_lp(&lp, 1e-8),
            Err(SolverError::Infeasible(_))
        ));

        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.add_eq(vec![0, 1], vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![0, 1], vec![2.0, 2.0], 3.0);
        lp.add_leq(vec![0], vec![1.0], 5.0);
        assert!(matches!(
            solve_lp(&lp, 1e-8),
            Err(SolverError::Infeasible(_))
        ));
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.add_eq(vec![0, 1], vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![0, 1], vec![2.0, 2.0], 2.0);
        lp.add_leq(vec![0], vec![-1.0], 0.0);
        lp.add_leq(vec![1], vec![-1.0], 0.0);
        let s = solve_lp(&lp, 1e-10).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hint_skips_phase_one() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_leq(vec![0, 1], vec![1.0, 1.0], 1.0);
        lp.add_leq(vec![0], vec![-1.0], 0.0);
        lp.add_leq(vec![1], vec![-1.0], 0.0);
        let a = solve_lp_from(&lp, Some(&[0.2, 0.2]), 1e-10).unwrap();
        let b = solve_lp(&lp, 1e-10).unwrap();
        assert!((a.objective - 1.0).abs() < 1e-8 && (b.objective - 1.0).abs() < 1e-8);
    }
}
