use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::mdpgame::Trajectory;

use super::ReachAvoidConfig;

type Path = Vec<(f64, f64)>;

/// Positions visited by both cars, including the final state.
fn paths(traj: &Trajectory) -> (Path, Path) {
    let states = traj
        .steps
        .iter()
        .map(|s| &s.state)
        .chain(std::iter::once(&traj.final_state));
    states.map(|s| ((s[0], s[1]), (s[3], s[4]))).unzip()
}

/// SVG drawing of episodes on the plane: goal ball in green, defender
/// paths in red, attacker paths in blue, capture ball at each end.
pub fn render_svg(trajs: &[Trajectory], cfg: &ReachAvoidConfig) -> String {
    let scale = 100.0;
    let span = cfg.env_max - cfg.env_min;
    let size = span * scale;
    let px = |x: f64| (x - cfg.env_min) * scale;
    let py = |y: f64| (cfg.env_max - y) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="0 0 {size:.0} {size:.0}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{size:.0}" height="{size:.0}" fill="white" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#b8e0b8" stroke="green"/>"##,
        px(cfg.goal_center[0]),
        py(cfg.goal_center[1]),
        cfg.goal_radius * scale
    );
    for traj in trajs {
        let (def, att) = paths(traj);
        for (pts, color) in [(&def, "#c0392b"), (&att, "#2c6fbb")] {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                coords.join(" ")
            );
        }
        if let Some(&(x, y)) = def.last() {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#c0392b" stroke-dasharray="4 3"/>"##,
                px(x),
                py(y),
                cfg.capture_radius * scale
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One row per visited state:
/// `t,defender_x,defender_y,defender_theta,attacker_x,attacker_y,attacker_theta,reward`.
/// The final row holds the terminal state and reward.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    writeln!(
        w,
        "t,defender_x,defender_y,defender_theta,attacker_x,attacker_y,attacker_theta,reward"
    )?;
    let rows = traj
        .steps
        .iter()
        .map(|st| (&st.state, st.reward))
        .chain(std::iter::once((&traj.final_state, traj.terminal_reward)));
    for (t, (s, r)) in rows.enumerate() {
        writeln!(
            w,
            "{t},{},{},{},{},{},{},{r}",
            s[0], s[1], s[2], s[3], s[4], s[5]
        )?;
    }
    Ok(())
}
