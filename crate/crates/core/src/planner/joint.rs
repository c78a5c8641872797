//! Time allocation and uplink powers for fixed trajectories, solved jointly.
//!
//! With `y = tau * P / Pmax` the throughput of a slot is the perspective
//! `tau * log2(1 + a * y / tau)`, jointly concave, and every energy row is
//! linear. The program is convex, contains every point the allocation LP
//! can reach, and so never ends below it.

use std::f64::consts::LN_2;

use crate::convex_solver::{
    solve_barrier, ConstraintKind, LinearConstraint, SmoothConstraint, SmoothProgram,
};
use crate::model::{gain_from_dist_sq, PowerSchedule, Scenario, TimeAllocation};

use super::allocation::split_roles;
use super::subproblem::SubproblemSolution;
use super::PlannerError;

/// Weight of the strictly feasible anchor blended into the start point.
const ANCHOR: f64 = 1e-3;

/// `R - w * sum_n tau_n log2(1 + a_n y_n / tau_n) <= 0`.
struct PerspectiveRate {
    /// `[R, tau_1, y_1, tau_2, y_2, ...]`.
    support: Vec<usize>,
    a: Vec<f64>,
    w: f64,
}

impl PerspectiveRate {
    fn terms<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
        self.a
            .iter()
            .enumerate()
            .map(move |(i, &a)| (a, x[self.support[1 + 2 * i]], x[self.support[2 + 2 * i]]))
    }
}

impl SmoothConstraint for PerspectiveRate {
    fn support(&self) -> &[usize] {
        &self.support
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::ConvexSmooth
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (a, tau, y) in self.terms(x) {
            if !(tau > 0.0 && y >= 0.0) {
                return f64::INFINITY;
            }
            sum += tau * (a * y / tau).ln_1p();
        }
        x[self.support[0]] - self.w * sum / LN_2
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad[0] = 1.0;
        let c = self.w / LN_2;
        for (i, (a, tau, y)) in self.terms(x).enumerate() {
            let s = a * y / tau;
            let u = 1.0 + s;
            grad[1 + 2 * i] = -c * (s.ln_1p() - s / u);
            grad[2 + 2 * i] = -c * a / u;
        }
    }
    fn hessian(&self, x: &[f64], out: &mut Vec<(usize, usize, f64)>) {
        let c = self.w / LN_2;
        for (i, (a, tau, y)) in self.terms(x).enumerate() {
            let s = a * y / tau;
            let q = c / (tau * (1.0 + s) * (1.0 + s));
            let (t, e) = (1 + 2 * i, 2 + 2 * i);
            out.push((t, t, q * s * s));
            out.push((e, t, -q * a * s));
            out.push((e, e, q * a * a));
        }
    }
}

struct Layout {
    slots: usize,
    gts: usize,
}

impl Layout {
    fn tau(&self, n: usize, j: usize) -> usize {
        n * (self.gts + 1) + j
    }
    /// Scaled uplink energy of terminal `k` in slot `n >= 1`.
    fn y(&self, n: usize, k: usize) -> usize {
        self.slots * (self.gts + 1) + (n - 1) * self.gts + k
    }
    fn r(&self) -> usize {
        self.slots * (self.gts + 1) + (self.slots - 1) * self.gts
    }
}

/// Globally optimal allocation and powers for the given trajectories,
/// started from `(alloc, cur.powers)`. Returns `None` unless the exact
/// objective improves on `cur`.
pub fn allocate_time_and_power(
    sc: &Scenario,
    cur: &SubproblemSolution,
    alloc: &TimeAllocation,
    tol: f64,
) -> Result<Option<(TimeAllocation, SubproblemSolution)>, PlannerError> {
    let (info, energy) = split_roles(&cur.trajectories)?;
    let (slots, gts) = (sc.slots(), sc.num_gts());
    if slots < 2 {
        return Ok(None);
    }
    let lay = Layout { slots, gts };
    let pmax = sc.p_ul_max();
    let (h_i, h_e) = (sc.altitude(info.role), sc.altitude(energy.role));
    let table = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..slots)
            .map(|n| (0..gts).map(|k| f(n, k)).collect())
            .collect()
    };
    let snr = table(&|n, k| {
        sc.eta() * gain_from_dist_sq(info.positions[n].dist_sq(sc.gts()[k]), h_i, sc.g0()) * pmax
            / sc.sigma2()
    });
    // Harvest per unit tau0, in units of Pmax.
    let harvest = table(&|n, k| {
        sc.harvest_coeff() * gain_from_dist_sq(energy.positions[n].dist_sq(sc.gts()[k]), h_e, 1.0)
            / pmax
    });

    let start = start_point(&lay, cur, alloc, pmax, &snr, &harvest);
    let mut objective = vec![0.0; lay.r() + 1];
    objective[lay.r()] = 1.0;
    let mut prog = SmoothProgram::new(objective, start);
    for k in 0..gts {
        let mut support = vec![lay.r()];
        let mut a = Vec::with_capacity(slots - 1);
        for (n, row) in snr.iter().enumerate().skip(1) {
            support.extend([lay.tau(n, k + 1), lay.y(n, k)]);
            a.push(row[k]);
        }
        prog.push(PerspectiveRate {
            support,
            a,
            w: 1.0 / slots as f64,
        });
        for m in 1..slots {
            let mut idx: Vec<usize> = (1..=m).map(|i| lay.y(i, k)).collect();
            let mut coefs = vec![1.0; m];
            for (i, row) in harvest.iter().enumerate().take(m) {
                idx.push(lay.tau(i, 0));
                coefs.push(-row[k]);
            }
            prog.push(LinearConstraint::new(idx, coefs, 0.0));
        }
        for n in 1..slots {
            prog.push(LinearConstraint::lower(lay.y(n, k), 0.0));
            prog.push(LinearConstraint::new(
                vec![lay.y(n, k), lay.tau(n, k + 1)],
                vec![1.0, -1.0],
                0.0,
            ));
        }
    }
    for n in 0..slots {
        for j in 0..=gts {
            prog.push(LinearConstraint::lower(lay.tau(n, j), 0.0));
        }
        let idx: Vec<usize> = (0..=gts).map(|j| lay.tau(n, j)).collect();
        prog.push(LinearConstraint::new(idx, vec![1.0; gts + 1], 1.0));
    }
    let status = solve_barrier(&prog, tol).map_err(|source| PlannerError::Solver {
        stage: "joint allocation",
        source,
    })?;
    let x = &status.x;

    // Leftover slot time goes to energy transfer, which only adds harvest.
    // The first slot has nothing to transmit.
    let allocation = TimeAllocation::from_fn(slots, gts, |n, j| match (n, j) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (_, 0) => 1.0 - (1..=gts).map(|k| x[lay.tau(n, k)].max(0.0)).sum::<f64>(),
        _ => x[lay.tau(n, j)].max(0.0),
    });
    let powers = PowerSchedule::from_fn(slots, gts, |n, k| {
        if n == 0 {
            return 0.0;
        }
        let (tau, y) = (allocation.uplink(n, k), x[lay.y(n, k)].max(0.0));
        if tau > 0.0 {
            (pmax * y / tau).min(pmax)
        } else {
            0.0
        }
    });
    let next = SubproblemSolution::from_point(sc, cur.trajectories.clone(), &allocation, powers)?;
    Ok((next.r_min > cur.r_min).then_some((allocation, next)))
}

/// Blend of the current point with a strictly feasible anchor: uniform time
/// split, and per terminal a constant scaled energy at half of what its
/// energy rows admit.
fn start_point(
    lay: &Layout,
    cur: &SubproblemSolution,
    alloc: &TimeAllocation,
    pmax: f64,
    snr: &[Vec<f64>],
    harvest: &[Vec<f64>],
) -> Vec<f64> {
    let (slots, gts) = (lay.slots, lay.gts);
    let u = (1.0 - ANCHOR) / (gts + 1) as f64;
    let mut x = vec![0.0; lay.r() + 1];
    for n in 0..slots {
        for j in 0..=gts {
            x[lay.tau(n, j)] = (1.0 - ANCHOR) * alloc.get(n, j) + ANCHOR * u;
        }
    }
    let mut r = f64::INFINITY;
    for k in 0..gts {
        let mut level: f64 = 0.5;
        let mut stored = 0.0;
        for m in 1..slots {
            stored += harvest[m - 1][k] * u;
            level = level.min(0.5 * stored / (m as f64 * u));
        }
        let mut rate = 0.0;
        for n in 1..slots {
            let y_cur = alloc.uplink(n, k) * cur.powers.get(n, k) / pmax;
            let y = (1.0 - ANCHOR) * y_cur + ANCHOR * level * u;
            x[lay.y(n, k)] = y;
            let tau = x[lay.tau(n, k + 1)];
            rate += tau * (snr[n][k] * y / tau).ln_1p() / LN_2;
        }
        r = r.min(rate / slots as f64);
    }
    x[lay.r()] = r - 1e-6 * r.abs().max(1e-6);
    x
}
