//! Result files. Every number is written with 17 significant digits so
//! identical runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use uav_wpcn::{Scenario, SolutionBundle, TraceStage};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// `role,n,t_sec,x_m,y_m`; slots are numbered from 1 and `t_sec = n * delta`.
pub fn trajectory_csv(b: &SolutionBundle, sc: &Scenario) -> String {
    let mut s = String::from("role,n,t_sec,x_m,y_m\n");
    for t in &b.trajectories {
        for (n, p) in t.positions.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                t.role.as_str(),
                n + 1,
                num((n + 1) as f64 * sc.slot_len()),
                num(p.x),
                num(p.y)
            );
        }
    }
    s
}

/// `n,tau_0,...,tau_K`.
pub fn tau_csv(b: &SolutionBundle) -> String {
    let k = b.allocation.gts();
    let mut s = String::from("n");
    for j in 0..=k {
        let _ = write!(s, ",tau_{j}");
    }
    s.push('\n');
    for n in 0..b.allocation.slots() {
        let _ = write!(s, "{}", n + 1);
        for &v in b.allocation.row(n) {
            let _ = write!(s, ",{}", num(v));
        }
        s.push('\n');
    }
    s
}

/// `n,P_1,...,P_K` in watts.
pub fn power_csv(b: &SolutionBundle) -> String {
    let mut s = String::from("n");
    for k in 1..=b.powers.gts() {
        let _ = write!(s, ",P_{k}");
    }
    s.push('\n');
    for n in 0..b.powers.slots() {
        let _ = write!(s, "{}", n + 1);
        for &v in b.powers.row(n) {
            let _ = write!(s, ",{}", num(v));
        }
        s.push('\n');
    }
    s
}

/// `k,R_k` in bits/s/Hz.
pub fn rates_csv(b: &SolutionBundle) -> String {
    let mut s = String::from("k,R_k\n");
    for (k, &r) in b.per_gt_rates.iter().enumerate() {
        let _ = writeln!(s, "{},{}", k + 1, num(r));
    }
    s
}

/// `q,i,stage,r_min` for every recorded iterate.
pub fn convergence_csv(b: &SolutionBundle) -> String {
    let mut s = String::from("q,i,stage,r_min\n");
    for e in &b.trace {
        let stage = match e.stage {
            TraceStage::Initial => "initial",
            TraceStage::Cccp => "cccp",
            TraceStage::TimeAllocation => "time_allocation",
        };
        let _ = writeln!(s, "{},{},{},{}", e.outer, e.inner, stage, num(e.r_min));
    }
    s
}

/// `T_sec,r_min`.
pub fn sweep_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("T_sec,r_min\n");
    for &(t, r) in rows {
        let _ = writeln!(s, "{},{}", num(t), num(r));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mode: String,
    pub scheme: String,
    pub horizon_s: f64,
    pub slots: usize,
    pub r_min: f64,
    pub per_gt_rates: Vec<f64>,
    pub outer_iterations: usize,
    pub cccp_iterations: usize,
    /// `r_min` recomputed by the feasibility checker.
    pub checked_r_min: f64,
    pub feasible: bool,
    pub input_sha256: String,
    pub seed: Option<u64>,
}

impl RunSummary {
    pub fn new(
        b: &SolutionBundle,
        sc: &Scenario,
        scheme: &str,
        checked_r_min: f64,
        feasible: bool,
        raw: &[u8],
        seed: Option<u64>,
    ) -> Self {
        Self {
            mode: b.mode.as_str().to_string(),
            scheme: scheme.to_string(),
            horizon_s: sc.horizon(),
            slots: sc.slots(),
            r_min: b.r_min,
            per_gt_rates: b.per_gt_rates.clone(),
            outer_iterations: b.outer_iterations(),
            cccp_iterations: b
                .trace
                .iter()
                .filter(|e| e.stage == TraceStage::Cccp)
                .count(),
            checked_r_min,
            feasible,
            input_sha256: sha256_hex(raw),
            seed,
        }
    }
}

/// Files are written into a hidden directory next to their destination and
/// moved in only once all of them exist; on drop without [`Staging::commit`]
/// nothing is left behind.
pub struct Staging {
    dir: tempfile::TempDir,
    dest: PathBuf,
    names: Vec<String>,
}

impl Staging {
    pub fn new(dest: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dest)?;
        let dir = tempfile::Builder::new()
            .prefix(".uav-wpcn-staging")
            .tempdir_in(dest)?;
        Ok(Self {
            dir,
            dest: dest.to_path_buf(),
            names: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        fs::write(self.dir.path().join(name), contents)?;
        self.names.push(name.to_string());
        Ok(())
    }

    pub fn commit(self) -> std::io::Result<()> {
        let mut moved = Vec::new();
        for name in &self.names {
            if let Err(e) = fs::rename(self.dir.path().join(name), self.dest.join(name)) {
                for m in &moved {
                    let _ = fs::remove_file(self.dest.join(m));
                }
                return Err(e);
            }
            moved.push(name);
        }
        Ok(())
    }
}
