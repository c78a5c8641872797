//! One concave-convex step over trajectories and uplink powers.
//!
//! The non-concave rate and energy terms are replaced by the surrogates of
//! [`crate::bounds`] linearized at the previous iterate, with auxiliary
//! variables `z >= |p - u|^2`. The resulting convex program is solved by the
//! barrier method in scaled variables: positions and distances are divided
//! by a layout length `L` (and `L^2`), powers by the peak uplink power.

use crate::bounds::{exact_rate, rate_lower, rate_lower_derivatives};
use crate::convex_solver::{
    solve_barrier, BlockStructure, ConstraintKind, LinearConstraint, QuadraticConstraint,
    SmoothConstraint, SmoothProgram, Termination,
};
use crate::model::{
    average_rates, gain_from_dist_sq, ModelError, Point2, PowerSchedule, Role, Scenario,
    SystemMode, TimeAllocation, Trajectory,
};

use super::allocation::split_roles;
use super::{PlannerConfig, PlannerError};

/// Which parts of the iterate a step may change.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOptions {
    /// Roles whose trajectories are held at their previous positions.
    pub frozen: Vec<Role>,
    /// Keep the previous powers as constants; energy rows are dropped.
    pub fixed_powers: bool,
}

impl StepOptions {
    pub fn frozen(roles: &[Role]) -> Self {
        Self {
            frozen: roles.to_vec(),
            fixed_powers: false,
        }
    }
}

/// An iterate of the inner loop, with its auxiliary distance variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub trajectories: Vec<Trajectory>,
    /// `z_info[n * K + k]` in m^2; bounds the decoding UAV's squared distance.
    pub z_info: Vec<f64>,
    /// Same for the charging UAV; equal to `z_info` in the integrated system.
    pub z_energy: Vec<f64>,
    pub powers: PowerSchedule,
    /// Exact minimum throughput under the allocation the step was built with.
    pub r_min: f64,
    pub per_gt_rates: Vec<f64>,
    /// Newton iterations of the solve that produced this point.
    pub newton_iterations: usize,
    pub termination: Option<Termination>,
}

fn squared_distances(sc: &Scenario, traj: &Trajectory) -> Vec<f64> {
    traj.positions
        .iter()
        .flat_map(|p| sc.gts().iter().map(move |u| p.dist_sq(*u)))
        .collect()
}

impl SubproblemSolution {
    /// Wrap a point with tight auxiliary variables.
    pub fn from_point(
        sc: &Scenario,
        trajectories: Vec<Trajectory>,
        alloc: &TimeAllocation,
        powers: PowerSchedule,
    ) -> Result<Self, ModelError> {
        let (info, energy) = split_roles(&trajectories)?;
        let per_gt_rates = average_rates(info, alloc, &powers, sc)?;
        let r_min = per_gt_rates.iter().copied().fold(f64::INFINITY, f64::min);
        let z_info = squared_distances(sc, info);
        let z_energy = squared_distances(sc, energy);
        Ok(Self {
            trajectories,
            z_info,
            z_energy,
            powers,
            r_min,
            per_gt_rates,
            newton_iterations: 0,
            termination: None,
        })
    }

    pub fn mode(&self) -> SystemMode {
        if self.trajectories.len() == 1 {
            SystemMode::Integrated
        } else {
            SystemMode::Separated
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Term {
    /// Power and distance both free.
    Both {
        weight: f64,
        w: usize,
        rho: usize,
        zhat: f64,
        h: f64,
    },
    /// Power fixed at `p` watts.
    FixedPower {
        weight: f64,
        w: usize,
        p: f64,
        zhat: f64,
        h: f64,
    },
    /// Distance fixed; `snr` is the SNR per unit scaled power.
    FixedDist { weight: f64, rho: usize, snr: f64 },
}

/// `R - constant - sum_t weight_t * f_t <= 0` for one terminal's surrogate throughput.
struct RateConstraint {
    support: Vec<usize>,
    terms: Vec<Term>,
    constant: f64,
    c: f64,
    l2: f64,
    pmax: f64,
}

impl RateConstraint {
    fn surrogate(&self, x: &[f64]) -> f64 {
        let s = &self.support;
        let mut total = self.constant;
        for t in &self.terms {
            total += match *t {
                Term::Both {
                    weight,
                    w,
                    rho,
                    zhat,
                    h,
                } => weight * rate_lower(self.l2 * x[s[w]], self.pmax * x[s[rho]], zhat, h, self.c),
                Term::FixedPower {
                    weight,
                    w,
                    p,
                    zhat,
                    h,
                } => weight * rate_lower(self.l2 * x[s[w]], p, zhat, h, self.c),
                Term::FixedDist { weight, rho, snr } => {
                    weight * (snr * x[s[rho]]).ln_1p() / std::f64::consts::LN_2
                }
            };
        }
        total
    }
}

impl SmoothConstraint for RateConstraint {
    fn support(&self) -> &[usize] {
        &self.support
    }
    fn kind(&self) -> ConstraintKind {
        ConstraintKind::ConvexSmooth
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[self.support[0]] - self.surrogate(x)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let s = &self.support;
        grad.fill(0.0);
        grad[0] = 1.0;
        for t in &self.terms {
            match *t {
                Term::Both {
                    weight,
                    w,
                    rho,
                    zhat,
                    h,
                } => {
                    let d = rate_lower_derivatives(
                        self.l2 * x[s[w]],
                        self.pmax * x[s[rho]],
                        zhat,
                        h,
                        self.c,
                    );
                    grad[w] -= weight * self.l2 * d.grad[0];
                    grad[rho] -= weight * self.pmax * d.grad[1];
                }
                Term::FixedPower {
                    weight,
                    w,
                    p,
                    zhat,
                    h,
                } => {
                    let d = rate_lower_derivatives(self.l2 * x[s[w]], p, zhat, h, self.c);
                    grad[w] -= weight * self.l2 * d.grad[0];
                }
                Term::FixedDist { weight, rho, snr } => {
                    grad[rho] -= weight * snr / ((1.0 + snr * x[s[rho]]) * std::f64::consts::LN_2);
                }
            }
        }
    }
    fn hessian(&self, x: &[f64], out: &mut Vec<(usize, usize, f64)>) {
        let s = &self.support;
        for t in &self.terms {
            match *t {
                Term::Both {
                    weight,
                    w,
                    rho,
                    zhat,
                    h,
                } => {
                    let d = rate_lower_derivatives(
                        self.l2 * x[s[w]],
                        self.pmax * x[s[rho]],
                        zhat,
                        h,
                        self.c,
                    );
                    let (hi, lo) = if w > rho { (w, rho) } else { (rho, w) };
                    out.push((w, w, -weight * self.l2 * self.l2 * d.hess[0][0]));
                    out.push((rho, rho, -weight * self.pmax * self.pmax * d.hess[1][1]));
                    out.push((hi, lo, -weight * self.l2 * self.pmax * d.hess[0][1]));
                }
                Term::FixedPower {
                    weight,
                    w,
                    p,
                    zhat,
                    h,
                } => {
                    let d = rate_lower_derivatives(self.l2 * x[s[w]], p, zhat, h, self.c);
                    out.push((w, w, -weight * self.l2 * self.l2 * d.hess[0][0]));
                }
                Term::FixedDist { weight, rho, snr } => {
                    let a = 1.0 + snr * x[s[rho]];
                    out.push((
                        rho,
                        rho,
                        weight * snr * snr / (a * a * std::f64::consts::LN_2),
                    ));
                }
            }
        }
    }
}

struct RoleLayout {
    role: Role,
    free: bool,
    /// Index of `q[0].x` in the full variable vector (free roles only).
    base: usize,
    prev: Vec<Point2>,
    start: Vec<Point2>,
    limit: f64,
}

/// Relative margin of the start point on speed rows, and the smallest blend
/// weight tried when pulling powers off their bounds.
const INTERIOR: f64 = 1e-6;

/// Contract a trajectory toward its own centroid until every step is
/// strictly inside the speed limit.
fn interior_start(prev: &[Point2], limit: f64) -> Vec<Point2> {
    let n = prev.len();
    let tight = |pts: &[Point2]| {
        (0..n).any(|i| pts[i].dist_sq(pts[(i + n - 1) % n]) >= limit * limit * (1.0 - INTERIOR))
    };
    let mut pts = prev.to_vec();
    let c = Point2::centroid(prev);
    let mut shrink = INTERIOR;
    while tight(&pts) && shrink < 1.0 {
        pts = prev.iter().map(|&p| c + (p - c) * (1.0 - shrink)).collect();
        shrink *= 10.0;
    }
    pts
}

/// One CCCP step for the time allocation `alloc`, linearized at `prev`.
///
/// The returned point is exactly feasible; its throughput is at least that
/// of `prev` up to the barrier tolerance whenever `prev` is feasible.
pub fn cccp_step(
    sc: &Scenario,
    cfg: &PlannerConfig,
    alloc: &TimeAllocation,
    prev: &SubproblemSolution,
    mode: SystemMode,
    opts: &StepOptions,
) -> Result<SubproblemSolution, PlannerError> {
    let roles: Vec<Role> = prev.trajectories.iter().map(|t| t.role).collect();
    if roles != mode.roles() {
        return Err(ModelError::Dimension(format!(
            "{} system with trajectories {roles:?}",
            mode.as_str()
        ))
        .into());
    }
    let (slots, gts) = (sc.slots(), sc.num_gts());
    if alloc.slots() != slots
        || alloc.gts() != gts
        || prev.powers.slots() != slots
        || prev.powers.gts() != gts
    {
        return Err(
            ModelError::Dimension("allocation or powers do not match the scenario".into()).into(),
        );
    }
    let shared = mode == SystemMode::Integrated;
    let pmax = sc.p_ul_max();
    let c = sc.snr_coeff();
    let coeff = sc.harvest_coeff();
    let inv_n = 1.0 / slots as f64;
    let center = sc.centroid();
    let spread = sc.gts().iter().map(|u| u.dist(center)).fold(0.0, f64::max);
    let (h_i, h_e) = sc.link_altitudes(mode);
    let l = spread.max(h_i).max(h_e).max(1.0);
    let l2 = l * l;
    let energy_rows = !opts.fixed_powers;

    // Roles and their global position variables (after R).
    let mut layouts: Vec<RoleLayout> = prev
        .trajectories
        .iter()
        .map(|t| {
            let limit = sc.step_limit(t.role);
            let free = !opts.frozen.contains(&t.role) && limit > 0.0;
            let start = if free {
                interior_start(&t.positions, limit)
            } else {
                t.positions.clone()
            };
            RoleLayout {
                role: t.role,
                free,
                base: 0,
                prev: t.positions.clone(),
                start,
                limit,
            }
        })
        .collect();
    let info_li = layouts
        .iter()
        .position(|r| r.role.decodes())
        .expect("roles checked");
    let energy_li = layouts
        .iter()
        .position(|r| r.role.charges())
        .expect("roles checked");
    let info_free = layouts[info_li].free;
    let energy_free = layouts[energy_li].free;

    // Fixed powers and which powers are variables.
    let mut fixed_p = vec![0.0; slots * gts];
    let mut rho_var = vec![false; slots * gts];
    for k in 0..gts {
        let first_harvest = (0..slots).find(|&n| alloc.wet(n) > 0.0);
        for n in 0..slots {
            let tau = alloc.uplink(n, k);
            let at = n * gts + k;
            if opts.fixed_powers {
                fixed_p[at] = prev.powers.get(n, k);
            } else if n == 0 {
                fixed_p[at] = 0.0;
            } else if tau == 0.0 {
                // No uplink time: the power is irrelevant here, and the most
                // useful value to offer the next time allocation.
                fixed_p[at] = pmax;
            } else if first_harvest.is_some_and(|f| f < n) {
                rho_var[at] = true;
            }
        }
    }

    // Local variables per terminal: powers, then decoding distances, then charging distances.
    let mut n_vars = 0usize;
    let mut blocks = Vec::new();
    let mut rho_idx = vec![usize::MAX; slots * gts];
    let mut wi_idx = vec![usize::MAX; slots * gts];
    let mut we_idx = vec![usize::MAX; slots * gts];
    let rate_term = |n: usize, k: usize, rho_var: &[bool], fixed_p: &[f64]| {
        n >= 1 && alloc.uplink(n, k) > 0.0 && (rho_var[n * gts + k] || fixed_p[n * gts + k] > 0.0)
    };
    for k in 0..gts {
        let start = n_vars;
        let has_rho = (0..slots).any(|n| rho_var[n * gts + k]);
        for n in 0..slots {
            if rho_var[n * gts + k] {
                rho_idx[n * gts + k] = n_vars;
                n_vars += 1;
            }
        }
        for n in 0..slots {
            if info_free && rate_term(n, k, &rho_var, &fixed_p) {
                wi_idx[n * gts + k] = n_vars;
                n_vars += 1;
            }
        }
        for n in 0..slots.saturating_sub(1) {
            if energy_rows && energy_free && has_rho && alloc.wet(n) > 0.0 {
                let at = n * gts + k;
                if shared && wi_idx[at] != usize::MAX {
                    we_idx[at] = wi_idx[at];
                } else {
                    we_idx[at] = n_vars;
                    n_vars += 1;
                }
            }
        }
        if n_vars > start {
            blocks.push(start..n_vars);
        }
    }
    // A trajectory that no distance variable refers to cannot affect the
    // program; keep it where it is rather than leave it unanchored.
    let has_wi = wi_idx.iter().any(|&i| i != usize::MAX);
    let has_we = we_idx.iter().any(|&i| i != usize::MAX);
    let keep = if shared {
        [has_wi || has_we, has_wi || has_we]
    } else {
        [has_wi, has_we]
    };
    for (li, keep) in [info_li, energy_li].into_iter().zip(keep) {
        if layouts[li].free && !keep {
            layouts[li].free = false;
            layouts[li].start = layouts[li].prev.clone();
        }
    }
    let r_idx = n_vars;
    n_vars += 1;
    for lay in layouts.iter_mut().filter(|r| r.free) {
        lay.base = n_vars;
        n_vars += 2 * slots;
    }

    // Linearization points and start values.
    let zhat_i = squared_distances(
        sc,
        &Trajectory::new(Role::Info, layouts[info_li].prev.clone()),
    );
    let zhat_e = squared_distances(
        sc,
        &Trajectory::new(Role::Energy, layouts[energy_li].prev.clone()),
    );
    let zs_i = squared_distances(
        sc,
        &Trajectory::new(Role::Info, layouts[info_li].start.clone()),
    );
    let zs_e = squared_distances(
        sc,
        &Trajectory::new(Role::Energy, layouts[energy_li].start.clone()),
    );
    let mut x0 = vec![0.0; n_vars];
    for lay in layouts.iter().filter(|r| r.free) {
        for (n, p) in lay.start.iter().enumerate() {
            x0[lay.base + 2 * n] = p.x / l;
            x0[lay.base + 2 * n + 1] = p.y / l;
        }
    }
    let mut w_start_max: f64 = 0.0;
    for at in 0..slots * gts {
        if wi_idx[at] != usize::MAX {
            x0[wi_idx[at]] = (zs_i[at] + cfg.eps_z) / l2;
            w_start_max = w_start_max.max(x0[wi_idx[at]]);
        }
        if we_idx[at] != usize::MAX {
            x0[we_idx[at]] = (zs_e[at] + cfg.eps_z) / l2;
            w_start_max = w_start_max.max(x0[we_idx[at]]);
        }
    }
    let reach = layouts
        .iter()
        .flat_map(|r| r.start.iter())
        .map(|p| p.dist(center))
        .fold(0.0, f64::max)
        + spread;
    let w_max = (4.0 * (reach + l) * (reach + l) / l2).max(2.0 * w_start_max);

    let mut prog = SmoothProgram::new(
        {
            let mut obj = vec![0.0; n_vars];
            obj[r_idx] = 1.0;
            obj
        },
        Vec::new(),
    );

    // Energy rows, normalized by the peak power: sum tau P / Pmax - sum tau0 E_lb / Pmax <= 0.
    // Each row is kept as (support, coefs, constant) so the start search can evaluate it.
    let mut energy_defs: Vec<(usize, Vec<usize>, Vec<f64>, f64)> = Vec::new();
    if energy_rows {
        for k in 0..gts {
            for m in 1..slots {
                let mut idx = Vec::new();
                let mut cf = Vec::new();
                let mut constant = 0.0;
                for i in 1..=m {
                    let at = i * gts + k;
                    let tau = alloc.uplink(i, k);
                    if rho_var[at] {
                        idx.push(rho_idx[at]);
                        cf.push(tau);
                    } else {
                        constant += tau * fixed_p[at] / pmax;
                    }
                }
                if idx.is_empty() {
                    continue;
                }
                for i in 0..m {
                    let at = i * gts + k;
                    let tau0 = alloc.wet(i);
                    if tau0 == 0.0 {
                        continue;
                    }
                    if we_idx[at] != usize::MAX {
                        let b = zhat_e[at] + h_e * h_e;
                        constant -= tau0 * coeff / b * (2.0 - h_e * h_e / b) / pmax;
                        idx.push(we_idx[at]);
                        cf.push(tau0 * coeff * l2 / (b * b * pmax));
                    } else {
                        constant -= tau0 * coeff / (zhat_e[at] + h_e * h_e) / pmax;
                    }
                }
                energy_defs.push((k, idx, cf, constant));
            }
        }
    }
    let row_value = |x: &[f64], idx: &[usize], cf: &[f64], constant: f64| -> f64 {
        idx.iter().zip(cf).map(|(&i, &a)| a * x[i]).sum::<f64>() + constant
    };

    // Power start: blend the previous powers with a uniform interior schedule.
    if rho_idx.iter().any(|&i| i != usize::MAX) {
        let mut is_rho = vec![false; n_vars];
        for &i in rho_idx.iter().filter(|&&i| i != usize::MAX) {
            is_rho[i] = true;
        }
        let mut rho_c = vec![0.5f64; gts];
        for (k, idx, cf, constant) in &energy_defs {
            let mut tau_sum = 0.0;
            let mut rest = *constant;
            for (&i, &a) in idx.iter().zip(cf) {
                if is_rho[i] {
                    tau_sum += a;
                } else {
                    rest += a * x0[i];
                }
            }
            if tau_sum > 0.0 {
                rho_c[*k] = rho_c[*k].min(0.5 * (-rest) / tau_sum);
            }
        }
        let mut found = false;
        let mut lambda = INTERIOR;
        while lambda <= 1.0 && !found {
            for k in 0..gts {
                for n in 0..slots {
                    let at = n * gts + k;
                    if rho_idx[at] != usize::MAX {
                        let prev_rho = (prev.powers.get(n, k) / pmax).clamp(0.0, 1.0);
                        x0[rho_idx[at]] = (1.0 - lambda) * prev_rho + lambda * rho_c[k];
                    }
                }
            }
            found = energy_defs
                .iter()
                .all(|(_, idx, cf, constant)| row_value(&x0, idx, cf, *constant) < 0.0)
                && rho_idx
                    .iter()
                    .filter(|&&i| i != usize::MAX)
                    .all(|&i| x0[i] > 0.0 && x0[i] < 1.0);
            lambda = if lambda >= 0.5 {
                lambda * 2.0
            } else {
                (lambda * 10.0).min(0.5)
            };
        }
        if !found {
            return Err(PlannerError::NoInterior("trajectory/power"));
        }
    }

    for (_, idx, cf, constant) in &energy_defs {
        prog.push(LinearConstraint::new(idx.clone(), cf.clone(), -constant));
    }

    // Throughput rows.
    let mut rate_rows = Vec::with_capacity(gts);
    for (k, &u) in sc.gts().iter().enumerate() {
        let mut support = vec![r_idx];
        let local = |global: usize, support: &mut Vec<usize>| {
            if let Some(p) = support.iter().position(|&s| s == global) {
                p
            } else {
                support.push(global);
                support.len() - 1
            }
        };
        let mut terms = Vec::new();
        let mut constant = 0.0;
        for n in 1..slots {
            if !rate_term(n, k, &rho_var, &fixed_p) {
                continue;
            }
            let at = n * gts + k;
            let weight = alloc.uplink(n, k) * inv_n;
            let w_var = wi_idx[at] != usize::MAX;
            match (rho_var[at], w_var) {
                (true, true) => {
                    let rho = local(rho_idx[at], &mut support);
                    let w = local(wi_idx[at], &mut support);
                    terms.push(Term::Both {
                        weight,
                        w,
                        rho,
                        zhat: zhat_i[at],
                        h: h_i,
                    });
                }
                (false, true) => {
                    let w = local(wi_idx[at], &mut support);
                    terms.push(Term::FixedPower {
                        weight,
                        w,
                        p: fixed_p[at],
                        zhat: zhat_i[at],
                        h: h_i,
                    });
                }
                (true, false) => {
                    let rho = local(rho_idx[at], &mut support);
                    let snr = c * pmax * gain_from_dist_sq(zhat_i[at], h_i, 1.0);
                    terms.push(Term::FixedDist { weight, rho, snr });
                }
                (false, false) => {
                    let d2 = layouts[info_li].prev[n].dist_sq(u);
                    constant += weight * exact_rate(d2, fixed_p[at], h_i, c);
                }
            }
        }
        rate_rows.push(RateConstraint {
            support,
            terms,
            constant,
            c,
            l2,
            pmax,
        });
    }
    let r0 = rate_rows
        .iter()
        .map(|r| r.surrogate(&x0))
        .fold(f64::INFINITY, f64::min);
    x0[r_idx] = r0 - cfg.r_slack;
    for row in rate_rows {
        prog.constraints.push(Box::new(row));
    }

    // Distance epigraphs and boxes.
    for k in 0..gts {
        let u = sc.gts()[k];
        let uq = [u.x / l, u.y / l];
        for n in 0..slots {
            let at = n * gts + k;
            if wi_idx[at] != usize::MAX {
                let b = layouts[info_li].base + 2 * n;
                prog.push(QuadraticConstraint::squared_distance_below(
                    [b, b + 1],
                    uq,
                    wi_idx[at],
                ));
                prog.push(LinearConstraint::upper(wi_idx[at], w_max));
            }
            if we_idx[at] != usize::MAX && we_idx[at] != wi_idx[at] {
                let b = layouts[energy_li].base + 2 * n;
                prog.push(QuadraticConstraint::squared_distance_below(
                    [b, b + 1],
                    uq,
                    we_idx[at],
                ));
                prog.push(LinearConstraint::upper(we_idx[at], w_max));
            }
            if rho_idx[at] != usize::MAX {
                prog.push(LinearConstraint::lower(rho_idx[at], 0.0));
                prog.push(LinearConstraint::upper(rho_idx[at], 1.0));
            }
        }
    }
    // Speed and periodicity.
    for lay in layouts.iter().filter(|r| r.free) {
        let r = lay.limit / l;
        for n in 0..slots {
            let prev_n = (n + slots - 1) % slots;
            let a = [lay.base + 2 * n, lay.base + 2 * n + 1];
            let b = [lay.base + 2 * prev_n, lay.base + 2 * prev_n + 1];
            prog.push(QuadraticConstraint::squared_distance(a, b, r));
        }
    }

    prog.start = x0;
    prog.structure = Some(BlockStructure::new(blocks));
    if prog.max_violation(&prog.start) >= 0.0 {
        return Err(PlannerError::NoInterior("trajectory/power"));
    }
    let status = solve_barrier(&prog, cfg.barrier_tol).map_err(|source| PlannerError::Solver {
        stage: "trajectory/power subproblem",
        source,
    })?;
    let x = &status.x;

    // Read back the point.
    let trajectories: Vec<Trajectory> = layouts
        .iter()
        .map(|lay| {
            let positions = if lay.free {
                (0..slots)
                    .map(|n| Point2::new(l * x[lay.base + 2 * n], l * x[lay.base + 2 * n + 1]))
                    .collect()
            } else {
                lay.prev.clone()
            };
            Trajectory::new(lay.role, positions)
        })
        .collect();
    let powers = PowerSchedule::from_fn(slots, gts, |n, k| {
        let at = n * gts + k;
        if rho_idx[at] != usize::MAX {
            pmax * x[rho_idx[at]].clamp(0.0, 1.0)
        } else {
            fixed_p[at]
        }
    });
    let (info, energy) = split_roles(&trajectories)?;
    let d_i = squared_distances(sc, info);
    let d_e = squared_distances(sc, energy);
    // Distances not tied to an active rate term may drop to the exact value;
    // the energy surrogate only grows when they do.
    let mut z_info = d_i.clone();
    let mut z_energy = d_e.clone();
    for at in 0..slots * gts {
        if wi_idx[at] != usize::MAX {
            let z = l2 * x[wi_idx[at]];
            let p = powers.get(at / gts, at % gts);
            if rate_lower(d_i[at], p, zhat_i[at], h_i, c) < rate_lower(z, p, zhat_i[at], h_i, c) {
                z_info[at] = z;
            }
        }
        if shared {
            z_energy[at] = z_info[at];
        }
    }
    let per_gt_rates = average_rates(info, alloc, &powers, sc)?;
    let r_min = per_gt_rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SubproblemSolution {
        trajectories,
        z_info,
        z_energy,
        powers,
        r_min,
        per_gt_rates,
        newton_iterations: status.newton_iterations,
        termination: Some(status.termination),
    })
}
