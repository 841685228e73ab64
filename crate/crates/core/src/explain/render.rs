use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ShapMode, TokenAttribution};

/// Line format of the attribution dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub id: String,
    pub provider: String,
    pub tokens: Vec<String>,
    pub shapley: Vec<f64>,
    pub base: f64,
    pub full: f64,
    pub mode: ShapMode,
}

impl From<&TokenAttribution> for AttributionRecord {
    fn from(a: &TokenAttribution) -> Self {
        Self {
            id: a.source_id.clone(),
            provider: a.provider_id.clone(),
            tokens: a.tokens.clone(),
            shapley: a.shapley.clone(),
            base: a.base_value,
            full: a.full_value,
            mode: a.mode,
        }
    }
}

/// Joins `##` continuation pieces to the preceding token, summing values.
/// Only used for display; attributions themselves stay per subword.
pub fn merge_subwords(tokens: &[String], values: &[f64]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for (t, v) in tokens.iter().zip(values) {
        match (t.strip_prefix("##"), out.last_mut()) {
            (Some(rest), Some(last)) => {
                last.0.push_str(rest);
                last.1 += v;
            }
            _ => out.push((t.clone(), *v)),
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Self-contained SVG with one box per word. Red shades push toward hate,
/// blue toward non-hate, with saturation scaled by the largest magnitude.
pub fn render_heatmap_svg(att: &TokenAttribution) -> String {
    const CHAR_W: f64 = 8.0;
    const PAD: f64 = 6.0;
    const H: f64 = 26.0;
    let words = merge_subwords(&att.tokens, &att.shapley);
    let max = words.iter().map(|w| w.1.abs()).fold(0.0, f64::max);
    let mut x = PAD;
    let mut body = String::new();
    for (w, v) in &words {
        let width = w.chars().count().max(1) as f64 * CHAR_W + 2.0 * PAD;
        let strength = if max > 0.0 { v.abs() / max } else { 0.0 };
        let fade = (255.0 * (1.0 - 0.75 * strength)).round() as u8;
        let fill = if *v > 0.0 {
            format!("rgb(255,{fade},{fade})")
        } else if *v < 0.0 {
            format!("rgb({fade},{fade},255)")
        } else {
            "rgb(255,255,255)".to_string()
        };
        let _ = writeln!(
            body,
            r##"<g><title>{t} {v:+.4}</title><rect x="{x:.1}" y="30" width="{width:.1}" height="{H}" fill="{fill}" stroke="#999"/><text x="{tx:.1}" y="48" font-family="monospace" font-size="13">{t}</text></g>"##,
            t = escape(w),
            tx = x + PAD,
        );
        x += width + 2.0;
    }
    let total_w = x + PAD;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0}" height="66" viewBox="0 0 {total_w:.0} 66">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="18" font-family="sans-serif" font-size="12">{} / {}: base {:.4}, full {:.4}</text>"#,
        escape(&att.provider_id),
        escape(&att.source_id),
        att.base_value,
        att.full_value
    );
    svg.push_str(&body);
    svg.push_str("</svg>\n");
    svg
}
