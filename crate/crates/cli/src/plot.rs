//! Self-contained SVG line charts of `x_i(t)`.

use std::fmt::Write;

use opdyn::Trajectory;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 40.0;
const MAX_POINTS: usize = 1000;

fn colour(i: usize, n: usize) -> String {
    let hue = (i as f64 * 360.0 / n.max(1) as f64 + 210.0) % 360.0;
    format!("hsl({hue:.0},65%,42%)")
}

pub fn svg(traj: &Trajectory, title: &str) -> String {
    let n = traj.states.first().map_or(0, |s| s.len());
    let t_end = traj.final_time().max(f64::MIN_POSITIVE);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |t: f64| LEFT + pw * t / t_end;
    let sy = |x: f64| TOP + ph * (1.0 - x) / 2.0;
    let every = traj.states.len().div_ceil(MAX_POINTS).max(1);
    let mut idx: Vec<usize> = (0..traj.states.len()).step_by(every).collect();
    if idx.last() != Some(&(traj.states.len() - 1)) {
        idx.push(traj.states.len() - 1);
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="18">{}</text>"#, escape(title));
    for y in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{y}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            py + 4.0
        );
    }
    for k in 0..=4 {
        let t = t_end * k as f64 / 4.0;
        let px = sx(t);
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 16.0,
            tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        LEFT + pw / 2.0,
        H - 6.0
    );
    for i in 0..n {
        let pts: Vec<String> = idx
            .iter()
            .map(|&k| format!("{:.2},{:.2}", sx(traj.times[k]), sy(traj.states[k][i])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke-width="1.2" stroke="{}" points="{}"/>"#,
            colour(i, n),
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(t: f64) -> String {
    if t == 0.0 || (1e-2..1e4).contains(&t) {
        format!("{}", (t * 100.0).round() / 100.0)
    } else {
        format!("{t:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
