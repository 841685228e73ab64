use std::fmt::Write as _;

use crate::output::Stamp;
use crate::psa::{CtfResult, LabelSlice};

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Point-and-whisker chart of mean CTF per group, one row per group with
/// the toxic and non-toxic slices side by side. The horizontal axis is
/// symmetric around zero and spans the widest interval.
pub fn render_ctf_svg(provider: &str, results: &[CtfResult], stamp: &Stamp) -> String {
    const LEFT: f64 = 130.0;
    const PLOT_W: f64 = 420.0;
    const ROW_H: f64 = 28.0;
    const TOP: f64 = 50.0;
    let mut groups: Vec<&str> = results.iter().map(|r| r.group.as_str()).collect();
    groups.sort_unstable();
    groups.dedup();
    let extent = results
        .iter()
        .flat_map(|r| [r.mean_ctf, r.ci_low().unwrap_or(r.mean_ctf), r.ci_high().unwrap_or(r.mean_ctf)])
        .map(f64::abs)
        .fold(0.0, f64::max);
    let extent = if extent > 0.0 { extent * 1.1 } else { 1.0 };
    let x_of = |v: f64| LEFT + PLOT_W * (v + extent) / (2.0 * extent);
    let height = TOP + ROW_H * groups.len().max(1) as f64 + 40.0;
    let width = LEFT + PLOT_W + 30.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<desc>{}</desc>", escape(&stamp.comment_line()));
    let _ = writeln!(
        s,
        r#"<text x="10" y="20" font-size="14">Counterfactual token fairness: {}</text>"#,
        escape(provider)
    );
    let zero = x_of(0.0);
    let bottom = TOP + ROW_H * groups.len().max(1) as f64;
    let _ = writeln!(
        s,
        r##"<line x1="{zero:.1}" y1="{:.1}" x2="{zero:.1}" y2="{bottom:.1}" stroke="#888" stroke-dasharray="4 3"/>"##,
        TOP - 10.0
    );
    for (label, v) in [("-", -extent / 1.1), ("0", 0.0), ("+", extent / 1.1)] {
        let text = if label == "0" { "0".to_string() } else { format!("{v:+.3}") };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{text}</text>"#,
            x_of(v),
            bottom + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">score(dominant) - score(marginalized)</text>"#,
        LEFT + PLOT_W / 2.0,
        bottom + 34.0
    );
    for (row, g) in groups.iter().enumerate() {
        let y = TOP + ROW_H * row as f64 + ROW_H / 2.0;
        let _ = writeln!(s, r#"<text x="10" y="{:.1}">{}</text>"#, y + 4.0, escape(g));
        for r in results.iter().filter(|r| r.group == *g) {
            let (dy, colour) = match r.label_slice {
                LabelSlice::Toxic => (-5.0, "#c0392b"),
                LabelSlice::NonToxic => (5.0, "#2c6fbb"),
            };
            let yy = y + dy;
            if let (Some(lo), Some(hi)) = (r.ci_low(), r.ci_high()) {
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.1}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="{colour}" stroke-width="1.5"/>"#,
                    x_of(lo),
                    x_of(hi)
                );
            }
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{yy:.1}" r="3.5" fill="{colour}"><title>{} {}: {:+.4} (n={})</title></circle>"#,
                x_of(r.mean_ctf),
                escape(g),
                r.label_slice,
                r.mean_ctf,
                r.n
            );
        }
    }
    let _ = writeln!(
        s,
        r##"<text x="{:.1}" y="20" fill="#c0392b">toxic</text><text x="{:.1}" y="20" fill="#2c6fbb">non-toxic</text>"##,
        LEFT + PLOT_W - 90.0,
        LEFT + PLOT_W - 40.0
    );
    s.push_str("</svg>\n");
    s
}
