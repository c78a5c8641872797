//! Physical model of the UAV-aided wireless powered network.
//!
//! Everything here is in linear SI units: meters, seconds, watts, joules.
//! Slots are indexed from `0` internally; slot `0` is the first slot of the
//! horizon, in which no ground terminal can transmit yet because the energy
//! harvesting circuit has a one-slot delay.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
}

/// A point (or displacement) on the horizontal plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        (self - other).norm_sq()
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Arithmetic mean of a non-empty set of points.
    pub fn centroid(points: &[Point2]) -> Point2 {
        let n = points.len() as f64;
        let sum = points.iter().fold(Point2::default(), |acc, &p| acc + p);
        sum * (1.0 / n)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Which network architecture is being planned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemMode {
    /// One hybrid UAV both charges the terminals and decodes their uplink.
    Integrated,
    /// An energy-transfer UAV and a separate information-decoding UAV.
    Separated,
}

impl SystemMode {
    /// UAV roles flown in this architecture, in output order.
    pub fn roles(self) -> &'static [Role] {
        match self {
            SystemMode::Integrated => &[Role::Hybrid],
            SystemMode::Separated => &[Role::Info, Role::Energy],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SystemMode::Integrated => "integrated",
            SystemMode::Separated => "separated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Hybrid,
    Info,
    Energy,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Hybrid => "hybrid",
            Role::Info => "info",
            Role::Energy => "energy",
        }
    }

    pub fn decodes(self) -> bool {
        matches!(self, Role::Hybrid | Role::Info)
    }

    pub fn charges(self) -> bool {
        matches!(self, Role::Hybrid | Role::Energy)
    }
}

/// Raw scenario parameters, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub gts: Vec<Point2>,
    pub horizon: f64,
    pub slots: usize,
    pub altitude: f64,
    pub altitude_info: f64,
    pub altitude_energy: f64,
    pub vmax: f64,
    pub vmax_info: f64,
    pub vmax_energy: f64,
    pub p_dl: f64,
    pub p_ul_max: f64,
    pub zeta: f64,
    pub eta: f64,
    pub g0: f64,
    pub sigma2: f64,
}

impl ScenarioParams {
    /// Link budget used throughout the evaluation: 30 dBm downlink,
    /// -10 dBm peak uplink, -30 dB reference gain, -90 dBm noise,
    /// 8 m altitude and 5 m/s top speed for every UAV.
    pub fn with_default_link_budget(gts: Vec<Point2>, horizon: f64, slots: usize) -> Self {
        Self {
            gts,
            horizon,
            slots,
            altitude: 8.0,
            altitude_info: 8.0,
            altitude_energy: 8.0,
            vmax: 5.0,
            vmax_info: 5.0,
            vmax_energy: 5.0,
            p_dl: 1.0,
            p_ul_max: 1e-4,
            zeta: 0.6,
            eta: 0.9,
            g0: 1e-3,
            sigma2: 1e-12,
        }
    }
}

/// Seven-terminal layout shipped with the CLI as `configs/reference_layout.toml`.
///
/// The coordinates are a reconstruction chosen to resemble the published
/// figure markers; they are not tabulated data.
pub fn reference_layout() -> Vec<Point2> {
    vec![
        Point2::new(40.0, 45.0),
        Point2::new(0.0, 40.0),
        Point2::new(-45.0, 20.0),
        Point2::new(-30.0, -30.0),
        Point2::new(0.0, -45.0),
        Point2::new(35.0, -30.0),
        Point2::new(10.0, 5.0),
    ]
}

/// Validated, immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    params: ScenarioParams,
    slot_len: f64,
}

impl Scenario {
    pub fn new(params: ScenarioParams) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidScenario(msg));
        if params.gts.is_empty() {
            return bad("at least one ground terminal is required".into());
        }
        if let Some(i) = params.gts.iter().position(|p| !p.is_finite()) {
            return bad(format!(
                "ground terminal {} has a non-finite position",
                i + 1
            ));
        }
        if params.slots < 2 {
            return bad(format!(
                "slot count must be at least 2, got {}",
                params.slots
            ));
        }
        let positive = [
            ("horizon", params.horizon),
            ("altitude", params.altitude),
            ("altitude_info", params.altitude_info),
            ("altitude_energy", params.altitude_energy),
            ("p_dl", params.p_dl),
            ("p_ul_max", params.p_ul_max),
            ("g0", params.g0),
            ("sigma2", params.sigma2),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return bad(format!(
                    "{name} must be finite and strictly positive, got {value}"
                ));
            }
        }
        // A zero speed limit pins the UAV in place.
        for (name, value) in [
            ("vmax", params.vmax),
            ("vmax_info", params.vmax_info),
            ("vmax_energy", params.vmax_energy),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return bad(format!(
                    "{name} must be finite and non-negative, got {value}"
                ));
            }
        }
        for (name, value) in [("zeta", params.zeta), ("eta", params.eta)] {
            if !(value > 0.0 && value <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {value}"));
            }
        }
        let slot_len = params.horizon / params.slots as f64;
        Ok(Self { params, slot_len })
    }

    /// Same scenario with a different horizon; the slot count is kept.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self, ModelError> {
        let mut params = self.params.clone();
        params.horizon = horizon;
        Scenario::new(params)
    }

    /// Same scenario with every UAV speed limit replaced.
    pub fn with_speed(&self, vmax: f64) -> Result<Self, ModelError> {
        let mut params = self.params.clone();
        params.vmax = vmax;
        params.vmax_info = vmax;
        params.vmax_energy = vmax;
        Scenario::new(params)
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }
    pub fn gts(&self) -> &[Point2] {
        &self.params.gts
    }
    pub fn num_gts(&self) -> usize {
        self.params.gts.len()
    }
    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }
    pub fn slots(&self) -> usize {
        self.params.slots
    }
    /// Slot length `T / N`, never stored independently of the horizon.
    pub fn slot_len(&self) -> f64 {
        self.slot_len
    }
    pub fn p_dl(&self) -> f64 {
        self.params.p_dl
    }
    pub fn p_ul_max(&self) -> f64 {
        self.params.p_ul_max
    }
    pub fn zeta(&self) -> f64 {
        self.params.zeta
    }
    pub fn eta(&self) -> f64 {
        self.params.eta
    }
    pub fn g0(&self) -> f64 {
        self.params.g0
    }
    pub fn sigma2(&self) -> f64 {
        self.params.sigma2
    }

    pub fn altitude(&self, role: Role) -> f64 {
        match role {
            Role::Hybrid => self.params.altitude,
            Role::Info => self.params.altitude_info,
            Role::Energy => self.params.altitude_energy,
        }
    }

    pub fn vmax(&self, role: Role) -> f64 {
        match role {
            Role::Hybrid => self.params.vmax,
            Role::Info => self.params.vmax_info,
            Role::Energy => self.params.vmax_energy,
        }
    }

    /// Largest displacement allowed between consecutive slots.
    pub fn step_limit(&self, role: Role) -> f64 {
        self.slot_len * self.vmax(role)
    }

    /// Uplink SNR coefficient `g0 * eta / sigma2`, in 1/W at 1 m.
    pub fn snr_coeff(&self) -> f64 {
        self.params.g0 * self.params.eta / self.params.sigma2
    }

    /// Harvested power per unit WET fraction at 1 m, `zeta * g0 * P_dl`.
    pub fn harvest_coeff(&self) -> f64 {
        self.params.zeta * self.params.g0 * self.params.p_dl
    }

    pub fn centroid(&self) -> Point2 {
        Point2::centroid(&self.params.gts)
    }

    /// Altitude of the decoding UAV and of the charging UAV for `mode`.
    pub fn link_altitudes(&self, mode: SystemMode) -> (f64, f64) {
        match mode {
            SystemMode::Integrated => (self.altitude(Role::Hybrid), self.altitude(Role::Hybrid)),
            SystemMode::Separated => (self.altitude(Role::Info), self.altitude(Role::Energy)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub role: Role,
    pub positions: Vec<Point2>,
}

impl Trajectory {
    pub fn new(role: Role, positions: Vec<Point2>) -> Self {
        Self { role, positions }
    }

    pub fn hover(role: Role, at: Point2, slots: usize) -> Self {
        Self {
            role,
            positions: vec![at; slots],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Largest displacement between consecutive slots, the wrap-around pair included.
    pub fn max_step(&self) -> f64 {
        let n = self.positions.len();
        if n < 2 {
            return 0.0;
        }
        let mut worst = self.positions[n - 1].dist(self.positions[0]);
        for w in self.positions.windows(2) {
            worst = worst.max(w[1].dist(w[0]));
        }
        worst
    }

    pub fn centroid(&self) -> Point2 {
        Point2::centroid(&self.positions)
    }
}

/// TDMA fractions `tau[n][k]`; column `0` is the energy-transfer subslot and
/// column `k >= 1` is the uplink subslot of terminal `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    slots: usize,
    gts: usize,
    tau: Vec<f64>,
}

impl TimeAllocation {
    pub fn from_fn(slots: usize, gts: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut tau = Vec::with_capacity(slots * (gts + 1));
        for n in 0..slots {
            for k in 0..=gts {
                tau.push(f(n, k));
            }
        }
        Self { slots, gts, tau }
    }

    /// `tau = 1 / (K + 1)` everywhere.
    pub fn uniform(slots: usize, gts: usize) -> Self {
        let v = 1.0 / (gts as f64 + 1.0);
        Self::from_fn(slots, gts, |_, _| v)
    }

    pub fn slots(&self) -> usize {
        self.slots
    }
    pub fn gts(&self) -> usize {
        self.gts
    }

    /// Fraction of slot `n` given to subslot `k` (`0` = energy transfer).
    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.tau[n * (self.gts + 1) + k]
    }

    pub fn set(&mut self, n: usize, k: usize, v: f64) {
        self.tau[n * (self.gts + 1) + k] = v;
    }

    /// Energy-transfer fraction of slot `n`.
    pub fn wet(&self, n: usize) -> f64 {
        self.get(n, 0)
    }

    /// Uplink fraction of terminal `k` (0-based) in slot `n`.
    pub fn uplink(&self, n: usize, k: usize) -> f64 {
        self.get(n, k + 1)
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.gts + 1;
        &self.tau[n * w..(n + 1) * w]
    }
}

/// Uplink transmit powers `p_ul[n][k]` in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSchedule {
    slots: usize,
    gts: usize,
    p_ul: Vec<f64>,
}

impl PowerSchedule {
    pub fn zeros(slots: usize, gts: usize) -> Self {
        Self {
            slots,
            gts,
            p_ul: vec![0.0; slots * gts],
        }
    }

    pub fn from_fn(slots: usize, gts: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut p_ul = Vec::with_capacity(slots * gts);
        for n in 0..slots {
            for k in 0..gts {
                p_ul.push(f(n, k));
            }
        }
        Self { slots, gts, p_ul }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }
    pub fn gts(&self) -> usize {
        self.gts
    }
    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.p_ul[n * self.gts + k]
    }
    pub fn set(&mut self, n: usize, k: usize, v: f64) {
        self.p_ul[n * self.gts + k] = v;
    }
    pub fn row(&self, n: usize) -> &[f64] {
        &self.p_ul[n * self.gts..(n + 1) * self.gts]
    }
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            slots: self.slots,
            gts: self.gts,
            p_ul: self.p_ul.iter().map(|p| p * factor).collect(),
        }
    }
}

/// Where a trace entry was recorded in the alternating loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStage {
    Initial,
    Cccp,
    TimeAllocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Outer (alternation) iteration, `0` for the initial point.
    pub outer: usize,
    /// Inner iteration within the outer one.
    pub inner: usize,
    pub stage: TraceStage,
    /// Exact minimum throughput of the iterate, bits/s/Hz.
    pub r_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionBundle {
    pub mode: SystemMode,
    /// One trajectory per role of `mode`, in [`SystemMode::roles`] order.
    pub trajectories: Vec<Trajectory>,
    pub allocation: TimeAllocation,
    pub powers: PowerSchedule,
    pub r_min: f64,
    pub per_gt_rates: Vec<f64>,
    pub trace: Vec<TraceEntry>,
}

impl SolutionBundle {
    pub fn trajectory(&self, role: Role) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.role == role)
    }

    /// Trajectory whose UAV decodes uplink data.
    pub fn info_trajectory(&self) -> &Trajectory {
        self.trajectories
            .iter()
            .find(|t| t.role.decodes())
            .expect("bundle without a decoding UAV")
    }

    /// Trajectory whose UAV transfers energy.
    pub fn energy_trajectory(&self) -> &Trajectory {
        self.trajectories
            .iter()
            .find(|t| t.role.charges())
            .expect("bundle without a charging UAV")
    }

    /// Number of completed outer iterations recorded in the trace.
    pub fn outer_iterations(&self) -> usize {
        self.trace.iter().map(|e| e.outer).max().unwrap_or(0)
    }
}

/// Average channel power gain `g0 / (|p - u|^2 + h^2)`.
pub fn channel_gain(p: Point2, u: Point2, h: f64, g0: f64) -> Result<f64, ModelError> {
    if !(p.is_finite() && u.is_finite() && h.is_finite() && g0.is_finite()) {
        return Err(ModelError::NonFinite("channel_gain"));
    }
    Ok(gain_from_dist_sq(p.dist_sq(u), h, g0))
}

#[inline]
pub(crate) fn gain_from_dist_sq(d2: f64, h: f64, g0: f64) -> f64 {
    g0 / (d2 + h * h)
}

/// Energy harvested in one slot, `tau0 * delta * zeta * gain * p_dl` joules.
pub fn harvested_energy(tau0: f64, delta: f64, zeta: f64, gain: f64, p_dl: f64) -> f64 {
    tau0 * delta * zeta * gain * p_dl
}

/// Instantaneous uplink rate `log2(1 + eta * gain * p_ul / sigma2)`.
pub fn instantaneous_rate(p_ul: f64, gain: f64, eta: f64, sigma2: f64) -> f64 {
    (eta * gain * p_ul / sigma2).ln_1p() / std::f64::consts::LN_2
}

/// Average throughput of terminal `k` (0-based) over the horizon.
///
/// `traj` must be the decoding trajectory (hybrid or info role); its role
/// selects the altitude.
pub fn average_rate(
    k: usize,
    traj: &Trajectory,
    alloc: &TimeAllocation,
    powers: &PowerSchedule,
    sc: &Scenario,
) -> Result<f64, ModelError> {
    check_dims(traj, alloc, powers, sc)?;
    if k >= sc.num_gts() {
        return Err(ModelError::Dimension(format!(
            "terminal index {k} out of range"
        )));
    }
    let h = sc.altitude(traj.role);
    let u = sc.gts()[k];
    let sum: f64 = (1..sc.slots())
        .map(|n| {
            let gain = gain_from_dist_sq(traj.positions[n].dist_sq(u), h, sc.g0());
            alloc.uplink(n, k) * instantaneous_rate(powers.get(n, k), gain, sc.eta(), sc.sigma2())
        })
        .sum();
    Ok(sum / sc.slots() as f64)
}

/// Average throughput of every terminal.
pub fn average_rates(
    traj: &Trajectory,
    alloc: &TimeAllocation,
    powers: &PowerSchedule,
    sc: &Scenario,
) -> Result<Vec<f64>, ModelError> {
    (0..sc.num_gts())
        .map(|k| average_rate(k, traj, alloc, powers, sc))
        .collect()
}

pub(crate) fn check_dims(
    traj: &Trajectory,
    alloc: &TimeAllocation,
    powers: &PowerSchedule,
    sc: &Scenario,
) -> Result<(), ModelError> {
    let (n, k) = (sc.slots(), sc.num_gts());
    if traj.len() != n {
        return Err(ModelError::Dimension(format!(
            "trajectory has {} slots, expected {n}",
            traj.len()
        )));
    }
    if alloc.slots() != n || alloc.gts() != k {
        return Err(ModelError::Dimension(format!(
            "allocation is {}x{}, expected {n}x{}",
            alloc.slots(),
            alloc.gts() + 1,
            k + 1
        )));
    }
    if powers.slots() != n || powers.gts() != k {
        return Err(ModelError::Dimension(format!(
            "power schedule is {}x{}, expected {n}x{k}",
            powers.slots(),
            powers.gts()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tiny_scenario(slots: usize) -> Scenario {
        Scenario::new(ScenarioParams::with_default_link_budget(
            vec![Point2::new(0.0, 0.0)],
            2.0,
            slots,
        ))
        .unwrap()
    }

    #[test]
    fn channel_gain_examples() {
        let o = Point2::new(0.0, 0.0);
        assert_relative_eq!(
            channel_gain(o, o, 8.0, 1e-3).unwrap(),
            1.5625e-5,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            channel_gain(Point2::new(6.0, 0.0), o, 8.0, 1e-3).unwrap(),
            1.0e-5,
            max_relative = 1e-15
        );
        assert_eq!(
            channel_gain(Point2::new(3.0, -7.0), Point2::new(1.0, 1.0), 8.0, 0.0).unwrap(),
            0.0
        );
        assert!(channel_gain(Point2::new(f64::NAN, 0.0), o, 8.0, 1e-3).is_err());
        assert!(channel_gain(o, o, f64::INFINITY, 1e-3).is_err());
    }

    #[test]
    fn harvested_energy_examples() {
        assert_eq!(harvested_energy(0.0, 1.0, 0.6, 1e-5, 1.0), 0.0);
        assert_relative_eq!(
            harvested_energy(0.125, 1.0, 0.6, 1e-5, 1.0),
            7.5e-7,
            max_relative = 1e-14
        );
        assert_eq!(harvested_energy(1.0, 1.0, 1.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn instantaneous_rate_examples() {
        assert_eq!(instantaneous_rate(0.0, 1e-5, 0.9, 1e-12), 0.0);
        assert_relative_eq!(
            instantaneous_rate(1e-4, 1e-5, 0.9, 1e-12),
            901f64.log2(),
            max_relative = 1e-12
        );
        assert_relative_eq!(901f64.log2(), 9.815383, epsilon = 1e-6);
        assert_eq!(instantaneous_rate(2.0, 0.5, 1.0, 1.0), 1.0);
    }

    #[test]
    fn average_rate_examples() {
        // Single terminal right under a hovering UAV: gain = 1e-3 / 64.
        let sc = tiny_scenario(2);
        let traj = Trajectory::hover(Role::Hybrid, Point2::new(0.0, 0.0), 2);
        let mut alloc = TimeAllocation::uniform(2, 1);
        alloc.set(1, 1, 0.06);
        alloc.set(1, 0, 0.94);
        // Choose the power so the slot-2 SNR is exactly 900.
        let gain = 1e-3 / 64.0;
        let p = 900.0 * sc.sigma2() / (sc.eta() * gain);
        let mut powers = PowerSchedule::zeros(2, 1);
        powers.set(1, 0, p);
        let r = average_rate(0, &traj, &alloc, &powers, &sc).unwrap();
        assert_relative_eq!(r, 0.5 * 0.06 * 901f64.log2(), max_relative = 1e-12);
        assert_relative_eq!(r, 0.29446, epsilon = 1e-5);

        let zero_tau = TimeAllocation::from_fn(2, 1, |_, k| if k == 0 { 1.0 } else { 0.0 });
        assert_eq!(
            average_rate(0, &traj, &zero_tau, &powers, &sc).unwrap(),
            0.0
        );
        assert_eq!(
            average_rate(0, &traj, &alloc, &PowerSchedule::zeros(2, 1), &sc).unwrap(),
            0.0
        );
    }

    #[test]
    fn average_rate_rejects_bad_dimensions() {
        let sc = tiny_scenario(3);
        let traj = Trajectory::hover(Role::Hybrid, Point2::default(), 2);
        let alloc = TimeAllocation::uniform(3, 1);
        let powers = PowerSchedule::zeros(3, 1);
        assert!(matches!(
            average_rate(0, &traj, &alloc, &powers, &sc),
            Err(ModelError::Dimension(_))
        ));
        let traj = Trajectory::hover(Role::Hybrid, Point2::default(), 3);
        assert!(average_rate(0, &traj, &TimeAllocation::uniform(3, 2), &powers, &sc).is_err());
        assert!(average_rate(1, &traj, &alloc, &powers, &sc).is_err());
    }

    #[test]
    fn scenario_validation() {
        let ok = ScenarioParams::with_default_link_budget(reference_layout(), 30.0, 50);
        let sc = Scenario::new(ok.clone()).unwrap();
        assert_eq!(sc.slot_len() * sc.slots() as f64, sc.horizon());
        assert_relative_eq!(sc.snr_coeff(), 9e8, max_relative = 1e-12);

        let mut p = ok.clone();
        p.slots = 1;
        assert!(Scenario::new(p).is_err());
        let mut p = ok.clone();
        p.zeta = 1.5;
        assert!(Scenario::new(p).is_err());
        let mut p = ok.clone();
        p.altitude = 0.0;
        assert!(Scenario::new(p).is_err());
        let mut p = ok.clone();
        p.gts.clear();
        assert!(Scenario::new(p).is_err());
        let mut p = ok;
        p.sigma2 = -1.0;
        assert!(Scenario::new(p).is_err());
    }

    #[test]
    fn max_step_includes_wraparound() {
        let t = Trajectory::new(
            Role::Hybrid,
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(4.0, 0.0),
            ],
        );
        assert_eq!(t.max_step(), 4.0);
    }

    proptest! {
        #[test]
        fn gain_is_translation_invariant(
            px in -100.0..100.0f64, py in -100.0..100.0f64,
            ux in -100.0..100.0f64, uy in -100.0..100.0f64,
            ox in -1e3..1e3f64, oy in -1e3..1e3f64,
            h in 1.0..50.0f64,
        ) {
            let p = Point2::new(px, py);
            let u = Point2::new(ux, uy);
            let o = Point2::new(ox, oy);
            let a = channel_gain(p, u, h, 1e-3).unwrap();
            let b = channel_gain(p + o, u + o, h, 1e-3).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }

        #[test]
        fn gain_decreases_with_distance(d1 in 0.0..100.0f64, extra in 1e-3..100.0f64, h in 1.0..50.0f64) {
            let u = Point2::default();
            let a = channel_gain(Point2::new(d1, 0.0), u, h, 1e-3).unwrap();
            let b = channel_gain(Point2::new(d1 + extra, 0.0), u, h, 1e-3).unwrap();
            prop_assert!(b < a);
            prop_assert!(b > 0.0);
        }

        #[test]
        fn average_rate_is_linear_in_tau_and_monotone_in_power(
            taus in proptest::collection::vec(0.0..1.0f64, 4),
            powers in proptest::collection::vec(0.0..1e-4f64, 4),
            scale in 0.0..1.0f64,
            bump_slot in 1usize..4,
            bump in 0.0..1e-4f64,
        ) {
            let sc = Scenario::new(ScenarioParams::with_default_link_budget(vec![Point2::new(3.0, 4.0)], 4.0, 4)).unwrap();
            let traj = Trajectory::new(Role::Hybrid, (0..4).map(|n| Point2::new(n as f64, 0.0)).collect());
            let alloc = TimeAllocation::from_fn(4, 1, |n, k| if k == 1 { taus[n] } else { 1.0 - taus[n] });
            let scaled = TimeAllocation::from_fn(4, 1, |n, k| if k == 1 { scale * taus[n] } else { 1.0 });
            let pw = PowerSchedule::from_fn(4, 1, |n, _| powers[n]);
            let r = average_rate(0, &traj, &alloc, &pw, &sc).unwrap();
            let rs = average_rate(0, &traj, &scaled, &pw, &sc).unwrap();
            prop_assert!(r >= 0.0);
            prop_assert!((rs - scale * r).abs() <= 1e-12 * (1.0 + r));
            let mut bumped = pw.clone();
            bumped.set(bump_slot, 0, powers[bump_slot] + bump);
            prop_assert!(average_rate(0, &traj, &alloc, &bumped, &sc).unwrap() >= r);
        }
    }
}
