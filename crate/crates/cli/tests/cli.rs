use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
gts = [[12.0, 0.0], [-8.0, 9.0], [-5.0, -14.0]]
T_seconds = 12.0
N_slots = 8
"#;

fn uav_wpcn(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uav-wpcn"))
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("run the binary")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn writes_every_output_for_a_feasible_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("run");
    let o = uav_wpcn(&["--system", "separated", "--plot"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trajectory.csv",
        "tau.csv",
        "power.csv",
        "rates.csv",
        "convergence.csv",
        "summary.json",
        "timing.json",
        "trajectory.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let s = summary(&out);
    assert_eq!(s["mode"], "separated");
    assert_eq!(s["feasible"], true);
    let r = s["r_min"].as_f64().unwrap();
    assert!(r > 0.0);
    assert!((r - s["checked_r_min"].as_f64().unwrap()).abs() <= 1e-9);
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "role,n,t_sec,x_m,y_m");
    // Two UAVs, eight slots each.
    assert_eq!(traj.lines().count(), 1 + 16);
    let tau = std::fs::read_to_string(out.join("tau.csv")).unwrap();
    for line in tau.lines().skip(1) {
        let sum: f64 = line
            .split(',')
            .skip(1)
            .map(|v| v.parse::<f64>().unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-9, "{line}");
    }
}

#[test]
fn sweep_writes_a_non_decreasing_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("sweep");
    let o = uav_wpcn(&["--sweep-T", "8,12,20"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("rmin_vs_T.csv")).unwrap();
    let vals: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 3);
    assert!(vals.windows(2).all(|w| w[1] >= w[0]), "{vals:?}");
}

#[test]
fn baselines_run_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    for scheme in ["static", "circular", "eta", "npc"] {
        let out = tmp.path().join(scheme);
        let o = uav_wpcn(&["--scheme", scheme], &cfg, &out);
        assert!(
            o.status.success(),
            "{scheme}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(summary(&out)["scheme"], scheme);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert!(uav_wpcn(&["--plot"], &cfg, d).status.success());
    }
    for f in [
        "trajectory.csv",
        "tau.csv",
        "power.csv",
        "rates.csv",
        "convergence.csv",
        "summary.json",
        "trajectory.svg",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn bad_configs_exit_with_the_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            "unknown.toml",
            "gts = [[0.0, 0.0]]\nT_seconds = 10.0\nN_slots = 4\nbogus = 1\n",
        ),
        (
            "negative.toml",
            "gts = [[0.0, 0.0]]\nT_seconds = -10.0\nN_slots = 4\n",
        ),
        ("syntax.toml", "gts = [[0.0, 0.0]\n"),
    ];
    for (name, text) in cases {
        let p = tmp.path().join(name);
        std::fs::write(&p, text).unwrap();
        let out = tmp.path().join(format!("{name}.out"));
        let o = uav_wpcn(&[], &p, &out);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!out.join("summary.json").exists());
    }
    let o = uav_wpcn(&[], &tmp.path().join("missing.toml"), &tmp.path().join("m"));
    assert_eq!(o.status.code(), Some(2));
}
