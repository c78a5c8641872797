//! A plain SVG rendering of the planned paths.

use std::fmt::Write as _;

use uav_wpcn::{Role, Scenario, SolutionBundle};

const SIZE: f64 = 600.0;
const PAD: f64 = 40.0;
const MARK_EVERY_S: f64 = 10.0;

fn color(role: Role) -> &'static str {
    match role {
        Role::Hybrid => "#1f77b4",
        Role::Info => "#d62728",
        Role::Energy => "#2ca02c",
    }
}

/// Slots (0-based) whose end time is the first to reach each multiple of ten seconds.
pub fn marker_slots(slots: usize, delta: f64) -> Vec<usize> {
    (0..slots)
        .filter(|&n| {
            let t = (n + 1) as f64 * delta;
            let before = n as f64 * delta;
            (t / MARK_EVERY_S + 1e-9).floor() > (before / MARK_EVERY_S + 1e-9).floor()
        })
        .collect()
}

pub fn trajectory_svg(b: &SolutionBundle, sc: &Scenario) -> String {
    let pts = sc
        .gts()
        .iter()
        .chain(b.trajectories.iter().flat_map(|t| t.positions.iter()));
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1.0);
    let scale = (SIZE - 2.0 * PAD) / span;
    let px = |x: f64| PAD + (x - x0) * scale;
    // SVG's y axis points down.
    let py = |y: f64| SIZE - PAD - (y - y0) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, u) in sc.gts().iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="black"/>"#,
            px(u.x) - 5.0,
            py(u.y) - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">GT{}</text>"#,
            px(u.x) + 7.0,
            py(u.y) - 7.0,
            k + 1
        );
    }
    let marks = marker_slots(sc.slots(), sc.slot_len());
    for (i, t) in b.trajectories.iter().enumerate() {
        let c = color(t.role);
        let mut d = String::new();
        for (n, p) in t.positions.iter().chain(t.positions.first()).enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if n == 0 { "M" } else { "L" },
                px(p.x),
                py(p.y)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        for &n in &marks {
            let p = t.positions[n];
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{c}"/>"#,
                px(p.x),
                py(p.y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{PAD}" y="{:.2}" font-size="12" fill="{c}">{} UAV</text>"#,
            16.0 + 14.0 * i as f64,
            t.role.as_str()
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_fall_every_ten_seconds() {
        assert_eq!(marker_slots(50, 0.6), vec![16, 33, 49]);
        assert_eq!(marker_slots(10, 10.0), (0..10).collect::<Vec<_>>());
        assert!(marker_slots(5, 1.0).is_empty());
    }
}
