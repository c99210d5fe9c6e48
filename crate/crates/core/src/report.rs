//! Grouped bar charts (models by modes) as plain SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{AggregateRow, AGGREGATE_HEADER, METRIC_NAMES};

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

pub fn parse_aggregate(text: &str) -> Result<Vec<AggregateRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == AGGREGATE_HEADER => {}
        _ => return Err(Error::Schema("unexpected aggregate header".into())),
    }
    let rows: Vec<AggregateRow> = lines
        .filter(|l| !l.trim().is_empty())
        .map(AggregateRow::from_csv_row)
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::Empty("aggregate rows"));
    }
    Ok(rows)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut v: Vec<&str> = Vec::new();
    for i in items {
        if !v.contains(&i) {
            v.push(i);
        }
    }
    v
}

/// One chart: a bar group per model, one bar per mode, whiskers at one std.
pub fn bar_chart_svg(rows: &[AggregateRow], metric: &str) -> String {
    let rows: Vec<&AggregateRow> = rows.iter().filter(|r| r.metric == metric).collect();
    let models = first_seen(rows.iter().map(|r| r.model.as_str()));
    let modes = first_seen(rows.iter().map(|r| r.mode.as_str()));
    let (lo, hi) = if metric == "mcc" { (-1.0, 1.0) } else { (0.0, 1.0) };

    let (left, top, plot_h, bottom) = (60.0, 40.0, 300.0, 120.0);
    let bar_w = 14.0;
    let group_w = bar_w * modes.len().max(1) as f64 + 16.0;
    let plot_w = group_w * models.len().max(1) as f64;
    let (width, height) = (left + plot_w + 130.0, top + plot_h + bottom);
    let y_of = |v: f64| top + plot_h * (hi - v.clamp(lo, hi)) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{} (mean, whiskers 1 std)</text>"#,
        left + plot_w / 2.0,
        escape(metric)
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0
        );
    }
    for (gi, model) in models.iter().enumerate() {
        let gx = left + gi as f64 * group_w + 8.0;
        for (mi, mode) in modes.iter().enumerate() {
            let Some(r) = rows.iter().find(|r| r.model == *model && r.mode == *mode) else {
                continue;
            };
            let Some(mean) = r.summary.mean else {
                continue;
            };
            let x = gx + mi as f64 * bar_w;
            let (y0, y1) = (y_of(0.0_f64.max(lo)), y_of(mean));
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"><title>{} {}: {mean:.3}</title></rect>"#,
                y0.min(y1),
                bar_w - 2.0,
                (y0 - y1).abs(),
                PALETTE[mi % PALETTE.len()],
                escape(model),
                escape(mode)
            );
            if let Some(sd) = r.summary.std {
                let cx = x + (bar_w - 2.0) / 2.0;
                let _ = writeln!(
                    s,
                    r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                    y_of(mean - sd),
                    y_of(mean + sd)
                );
            }
        }
        let lx = gx + (group_w - 16.0) / 2.0;
        let ly = top + plot_h + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.1}" y="{ly:.1}" transform="rotate(45 {lx:.1} {ly:.1})">{}</text>"#,
            escape(model)
        );
    }
    for (mi, mode) in modes.iter().enumerate() {
        let y = top + 10.0 + mi as f64 * 18.0;
        let x = left + plot_w + 20.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
            y - 10.0,
            PALETTE[mi % PALETTE.len()],
            x + 18.0,
            escape(mode)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<metric>.svg` for every metric present and returns the paths.
pub fn write_report(rows: &[AggregateRow], out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for metric in METRIC_NAMES {
        if !rows.iter().any(|r| r.metric == metric) {
            continue;
        }
        let path = out.join(format!("{metric}.svg"));
        fs::write(&path, bar_chart_svg(rows, metric)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
