//! Grouped bar charts of a result table as standalone SVG: one panel per
//! variant, one group per samples-per-class value, one bar per map column.

use std::fmt::Write as _;
use std::path::Path;

use super::table::{ResultTable, MAP_COLUMNS};
use crate::error::Result;
use crate::models::Variant;

/// Height in pixels of a bar with macro F1 = 1.
pub const PLOT_HEIGHT: f64 = 240.0;
const BAR_WIDTH: f64 = 18.0;
const BAR_GAP: f64 = 3.0;
const GROUP_GAP: f64 = 28.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 50.0;
const PANEL_GAP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const COLORS: [&str; 4] = ["#7f7f7f", "#1f77b4", "#d62728", "#2ca02c"];

/// Renders `table` as an SVG document. Fails with the list of missing cells
/// if the table is incomplete.
pub fn render_svg_bars(table: &ResultTable) -> Result<String> {
    table.ensure_complete()?;
    let mut panels: Vec<Variant> = Vec::new();
    for r in &table.rows {
        if !panels.contains(&r.variant) {
            panels.push(r.variant);
        }
    }
    let group_width = 4.0 * BAR_WIDTH + 3.0 * BAR_GAP;
    let max_groups = panels
        .iter()
        .map(|v| table.rows.iter().filter(|r| r.variant == *v).count())
        .max()
        .unwrap_or(1) as f64;
    let panel_width = max_groups * group_width + (max_groups + 1.0) * GROUP_GAP;
    let width = LEFT + panels.len() as f64 * (panel_width + PANEL_GAP);
    let height = TOP + PLOT_HEIGHT + BOTTOM;
    let base = TOP + PLOT_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">Macro F1 on {}</text>"#,
        width / 2.0,
        table.dataset
    );

    for (pi, variant) in panels.iter().enumerate() {
        let x0 = LEFT + pi as f64 * (panel_width + PANEL_GAP);
        let _ = writeln!(s, r#"<g class="panel" data-variant="{variant}">"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + panel_width / 2.0,
            TOP - 8.0,
            variant.table_label()
        );
        // y axis with ticks every 0.2
        let _ = writeln!(
            s,
            r#"<line class="axis" x1="{x0}" y1="{TOP}" x2="{x0}" y2="{base}" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<line class="axis" x1="{x0}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
            x0 + panel_width
        );
        for t in 0..=5 {
            let v = t as f64 * 0.2;
            let y = base - v * PLOT_HEIGHT;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">Macro F1</text>"#,
            x0 - 40.0,
            TOP + PLOT_HEIGHT / 2.0,
            x0 - 40.0,
            TOP + PLOT_HEIGHT / 2.0
        );
        let rows = table.rows.iter().filter(|r| r.variant == *variant);
        for (gi, row) in rows.enumerate() {
            let gx = x0 + GROUP_GAP + gi as f64 * (group_width + GROUP_GAP);
            for (c, map) in MAP_COLUMNS.iter().enumerate() {
                let f1 = row.f1[c].expect("table is complete");
                let h = f1.clamp(0.0, 1.0) * PLOT_HEIGHT;
                let x = gx + c as f64 * (BAR_WIDTH + BAR_GAP);
                let _ = writeln!(
                    s,
                    r#"<rect class="bar" data-k="{}" data-map="{}" data-f1="{f1}" x="{x:.2}" y="{:.2}" width="{BAR_WIDTH}" height="{h:.2}" fill="{}"/>"#,
                    row.samples_per_class,
                    map.short_label(),
                    base - h,
                    COLORS[c]
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                gx + group_width / 2.0,
                base + 16.0,
                row.samples_per_class
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">Samples per class</text>"#,
            x0 + panel_width / 2.0,
            base + 36.0
        );
        s.push_str("</g>\n");
    }

    let _ = writeln!(s, r#"<g class="legend">"#);
    for (c, map) in MAP_COLUMNS.iter().enumerate() {
        let x = LEFT + c as f64 * 60.0;
        let y = base + 50.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            COLORS[c],
            x + 16.0,
            y + 11.0,
            map.short_label()
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn emit_svg_bars(table: &ResultTable, path: &Path) -> Result<()> {
    let svg = render_svg_bars(table)?;
    std::fs::write(path, svg)?;
    Ok(())
}
