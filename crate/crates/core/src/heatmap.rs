//! SVG heatmap of test NMSE over the power × detuning grid.
//!
//! The image depends only on the CSV rows, so re-plotting a saved
//! `results.csv` reproduces the sweep's own SVG byte for byte.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sweep::{best_of_rows, GridRow, PointStatus};

const PLOT: f64 = 480.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 50.0;
const BAR_GAP: f64 = 30.0;
const BAR_W: f64 = 20.0;
const RIGHT: f64 = 110.0;
const BOTTOM: f64 = 60.0;

/// Viridis anchors, dark (low NMSE) to bright (high NMSE).
const PALETTE: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (t.floor() as usize).min(PALETTE.len() - 2);
    let f = t - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn label(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Tick stride keeping at most about ten labels per axis.
fn stride(n: usize) -> usize {
    n.div_ceil(10).max(1)
}

/// Renders the heatmap. Power runs up the vertical axis, detuning along
/// the horizontal one; colour is log10 of test NMSE; the best point is
/// circled and failed points are grey with a cross.
pub fn render(rows: &[GridRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Config("no grid rows to plot".into()));
    }
    let powers = sorted_unique(rows.iter().map(|r| r.power_dbm));
    let detunings = sorted_unique(rows.iter().map(|r| r.detuning_ghz));
    let (nr, nc) = (powers.len(), detunings.len());
    let cw = PLOT / nc as f64;
    let ch = PLOT / nr as f64;
    let x_of = |d: f64| detunings.iter().position(|v| *v == d).unwrap() as f64 * cw + LEFT;
    // Highest power at the top.
    let y_of = |p: f64| (nr - 1 - powers.iter().position(|v| *v == p).unwrap()) as f64 * ch + TOP;

    let ok: Vec<f64> = rows
        .iter()
        .filter(|r| r.status == PointStatus::Ok)
        .filter_map(|r| r.nmse_test)
        .filter(|v| *v > 0.0)
        .collect();
    let lo = ok.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ok.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = |v: f64| {
        if hi > lo {
            (v.log10() - lo.log10()) / (hi.log10() - lo.log10())
        } else {
            0.5
        }
    };
    let best = best_of_rows(rows).ok();

    let width = LEFT + PLOT + RIGHT;
    let height = TOP + PLOT + BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let title = match best {
        Some(b) => format!(
            "test NMSE (best {:.4} at {} dBm, {} GHz)",
            b.nmse,
            label(b.power_dbm),
            label(b.detuning_ghz)
        ),
        None => "test NMSE (no successful point)".to_string(),
    };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{title}</text>"#,
        LEFT + PLOT / 2.0,
        TOP - 20.0
    );

    for r in rows {
        let (x, y) = (x_of(r.detuning_ghz), y_of(r.power_dbm));
        match (r.status, r.nmse_test) {
            (PointStatus::Ok, Some(v)) if v > 0.0 => {
                let _ = writeln!(
                    s,
                    r#"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}"><title>{} dBm, {} GHz: {v:e}</title></rect>"#,
                    color(scale(v)),
                    label(r.power_dbm),
                    label(r.detuning_ghz)
                );
            }
            _ => {
                let _ = writeln!(
                    s,
                    r##"<g class="failed"><rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="#d0d0d0"/><path d="M{x:.2},{y:.2}l{cw:.2},{ch:.2}M{:.2},{y:.2}l{:.2},{ch:.2}" stroke="#707070"/></g>"##,
                    x + cw,
                    -cw
                );
            }
        }
    }

    if let Some(b) = best {
        let _ = writeln!(
            s,
            r#"<circle class="best" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="red" stroke-width="2"/>"#,
            x_of(b.detuning_ghz) + cw / 2.0,
            y_of(b.power_dbm) + ch / 2.0,
            0.42 * cw.min(ch)
        );
    }

    // Axes.
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{PLOT:.2}" height="{PLOT:.2}" fill="none" stroke="black"/>"#
    );
    for (i, d) in detunings.iter().enumerate().step_by(stride(nc)) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + (i as f64 + 0.5) * cw,
            TOP + PLOT + 16.0,
            label(*d)
        );
    }
    for (i, p) in powers.iter().enumerate().step_by(stride(nr)) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            TOP + (nr - 1 - i) as f64 * ch + ch / 2.0 + 4.0,
            label(*p)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">detuning (GHz)</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">total power (dBm)</text>"#,
        TOP + PLOT / 2.0,
        TOP + PLOT / 2.0
    );

    // Colour bar, bright (worst) at the top.
    let bx = LEFT + PLOT + BAR_GAP;
    let steps = 32;
    let seg = PLOT / steps as f64;
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bx:.2}" y="{:.2}" width="{BAR_W:.2}" height="{:.2}" fill="{}"/>"#,
            TOP + k as f64 * seg,
            seg + 0.5,
            color(t)
        );
    }
    if !ok.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{hi:.3e}</text>"#,
            bx + BAR_W + 4.0,
            TOP + 8.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{lo:.3e}</text>"#,
            bx + BAR_W + 4.0,
            TOP + PLOT
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">log NMSE</text>"#,
        bx + BAR_W / 2.0,
        TOP + PLOT + 16.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<GridRow> {
        let mut rows = Vec::new();
        for (i, p) in [-15.0, 5.0, 25.0].into_iter().enumerate() {
            for (j, d) in [-100.0, 0.0, 100.0].into_iter().enumerate() {
                let v = 0.1 * (1 + i + 3 * j) as f64;
                let failed = i == 2 && j == 2;
                rows.push(GridRow {
                    power_dbm: p,
                    detuning_ghz: d,
                    nmse_test: (!failed).then_some(v),
                    nmse_train: (!failed).then_some(v),
                    status: if failed {
                        PointStatus::Failed
                    } else {
                        PointStatus::Ok
                    },
                });
            }
        }
        rows
    }

    #[test]
    fn structure() {
        let svg = render(&grid()).unwrap();
        assert_eq!(svg.matches(r#"class="cell""#).count(), 8);
        assert_eq!(svg.matches(r#"class="failed""#).count(), 1);
        assert_eq!(svg.matches(r#"class="best""#).count(), 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn best_circle_sits_on_lowest_point() {
        // Lowest NMSE is at -15 dBm (bottom row), -100 GHz (left column).
        let svg = render(&grid()).unwrap();
        let cell = PLOT / 3.0;
        let cx = LEFT + cell / 2.0;
        let cy = TOP + 2.0 * cell + cell / 2.0;
        assert!(
            svg.contains(&format!(r#"cx="{cx:.2}" cy="{cy:.2}""#)),
            "{svg}"
        );
    }

    #[test]
    fn deterministic_and_order_independent() {
        let rows = grid();
        let mut rev = rows.clone();
        rev.reverse();
        let a = render(&rows).unwrap();
        // Cell order follows the input order, so compare cell sets.
        let mut ca: Vec<&str> = a.lines().collect();
        let b = render(&rev).unwrap();
        let mut cb: Vec<&str> = b.lines().collect();
        ca.sort();
        cb.sort();
        assert_eq!(ca, cb);
        assert_eq!(a, render(&rows).unwrap());
    }

    #[test]
    fn palette_ends() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(-3.0), color(0.0));
    }

    #[test]
    fn empty_rows_rejected() {
        assert!(render(&[]).is_err());
    }
}
