//! Static SVG figures built from result records.
//!
//! Every figure is a pure function of its records and the stream's ground
//! truth, so plots can be redrawn from saved CSV files.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::detect::{DetectionRecord, DetectorKind};
use crate::events::{EventKind, GroundTruth};
use crate::osr::ScoreRecord;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 160.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 30.0;
const GAP_X: f64 = 40.0;
const GAP_Y: f64 = 50.0;

/// Colours for line series, cycled.
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"];

struct Frame {
    x: f64,
    y: f64,
    n_chunks: usize,
}

impl Frame {
    fn cx(&self, chunk: f64) -> f64 {
        self.x + PANEL_W * chunk / self.n_chunks.max(1) as f64
    }

    /// `v` in `[0, 1]` from bottom to top.
    fn cy(&self, v: f64) -> f64 {
        self.y + PANEL_H * (1.0 - v)
    }
}

fn open_svg(width: f64, height: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn panel_box(s: &mut String, f: &Frame, title: &str) {
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#,
        f.x, f.y
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, f.x + PANEL_W / 2.0, f.y - 8.0, escape(title));
    for tick in 0..=4 {
        let chunk = f.n_chunks as f64 * tick as f64 / 4.0;
        let x = f.cx(chunk);
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            f.y + PANEL_H + 14.0,
            chunk.round()
        );
    }
}

fn event_lines(s: &mut String, f: &Frame, truth: &GroundTruth) {
    for e in truth.events() {
        let x = f.cx(e.chunk as f64);
        let dash = if e.kind == EventKind::Drift { "" } else { r#" stroke-dasharray="4 2""# };
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="red"{dash}/><text x="{x}" y="{}" fill="red" font-size="9" text-anchor="middle">{}</text>"#,
            f.y,
            f.y + PANEL_H,
            f.y + PANEL_H + 26.0,
            e.marker()
        );
    }
}

/// One row of the detection figure: a stream and the detections on it.
pub struct DetectionRow<'a> {
    pub label: String,
    pub truth: &'a GroundTruth,
    pub records: &'a [DetectionRecord],
}

/// Detectors as columns and streams as rows. Inside a panel each grid value
/// is a horizontal lane, the most sensitive at the top; a black tick marks a
/// detection, darker when more seeds agree. Red lines mark drifts (solid)
/// and emerging classes (dashed).
pub fn detection_svg(rows: &[DetectionRow], columns: &[(DetectorKind, Vec<f64>)]) -> String {
    let width = MARGIN_L + columns.len() as f64 * (PANEL_W + GAP_X);
    let height = MARGIN_T + rows.len() as f64 * (PANEL_H + GAP_Y);
    let mut s = open_svg(width, height);
    for (r, row) in rows.iter().enumerate() {
        let seeds: Vec<u64> = {
            let mut v: Vec<u64> = row.records.iter().map(|d| d.seed).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let n_seeds = seeds.len().max(1) as f64;
        for (c, (kind, grid)) in columns.iter().enumerate() {
            let f = Frame {
                x: MARGIN_L + c as f64 * (PANEL_W + GAP_X),
                y: MARGIN_T + r as f64 * (PANEL_H + GAP_Y),
                n_chunks: row.truth.n_chunks,
            };
            panel_box(&mut s, &f, &format!("{kind} | {}", row.label));
            let lanes = kind.by_sensitivity(grid);
            let lane_h = PANEL_H / lanes.len().max(1) as f64;
            for (i, p) in lanes.iter().enumerate() {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="end" font-size="8">{:.3}</text>"#,
                    f.x - 4.0,
                    f.y + lane_h * (i as f64 + 0.5) + 3.0,
                    p
                );
            }
            event_lines(&mut s, &f, row.truth);
            let mut hits: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for d in row.records.iter().filter(|d| d.detector == *kind) {
                if let Some(lane) = lanes.iter().position(|&p| p == d.param) {
                    *hits.entry((lane, d.chunk)).or_default() += 1;
                }
            }
            for ((lane, chunk), count) in hits {
                let x = f.cx(chunk as f64);
                let y = f.y + lane_h * lane as f64;
                let _ = writeln!(
                    s,
                    r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black" stroke-opacity="{:.3}"/>"#,
                    y + 1.0,
                    y + lane_h - 1.0,
                    count as f64 / n_seeds
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Mean over seeds of one score per (epsilon, chunk); undefined values are
/// skipped.
fn mean_series(records: &[ScoreRecord], pick: fn(&ScoreRecord) -> Option<f64>) -> BTreeMap<u64, BTreeMap<usize, f64>> {
    let mut acc: BTreeMap<u64, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in records {
        if let Some(v) = pick(r) {
            let e = acc.entry(r.epsilon.to_bits()).or_default().entry(r.chunk).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(e, m)| (e, m.into_iter().map(|(c, (sum, n))| (c, sum / n as f64)).collect()))
        .collect()
}

type Metric = (&'static str, fn(&ScoreRecord) -> Option<f64>);

/// Four panels (inner, outer, halfpoint, overall) against chunk index, one
/// line per epsilon averaged over seeds.
pub fn scores_svg(records: &[ScoreRecord], truth: &GroundTruth) -> String {
    let metrics: [Metric; 4] = [
        ("inner", |r| r.scores.inner),
        ("outer", |r| r.scores.outer),
        ("halfpoint", |r| r.scores.halfpoint),
        ("overall", |r| r.scores.overall),
    ];
    let mut epsilons: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    epsilons.sort_by(f64::total_cmp);
    epsilons.dedup();

    let width = MARGIN_L + 2.0 * (PANEL_W + GAP_X) + 120.0;
    let height = MARGIN_T + 2.0 * (PANEL_H + GAP_Y);
    let mut s = open_svg(width, height);
    for (m, (name, pick)) in metrics.iter().enumerate() {
        let f = Frame {
            x: MARGIN_L + (m % 2) as f64 * (PANEL_W + GAP_X),
            y: MARGIN_T + (m / 2) as f64 * (PANEL_H + GAP_Y),
            n_chunks: truth.n_chunks,
        };
        panel_box(&mut s, &f, name);
        for v in [0.0, 0.5, 1.0] {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, f.x - 4.0, f.cy(v) + 4.0);
        }
        event_lines(&mut s, &f, truth);
        for (e, series) in mean_series(records, *pick) {
            let idx = epsilons.iter().position(|x| x.to_bits() == e).unwrap_or(0);
            let colour = PALETTE[idx % PALETTE.len()];
            // break the line wherever a chunk is missing
            let mut path = String::new();
            let mut prev: Option<usize> = None;
            for (&chunk, &v) in &series {
                let cmd = if prev == Some(chunk.wrapping_sub(1)) { 'L' } else { 'M' };
                let _ = write!(path, "{cmd}{:.2},{:.2} ", f.cx(chunk as f64), f.cy(v));
                prev = Some(chunk);
            }
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1"/>"#, path.trim_end());
        }
    }
    let lx = MARGIN_L + 2.0 * (PANEL_W + GAP_X);
    for (i, e) in epsilons.iter().enumerate() {
        let y = MARGIN_T + 14.0 * i as f64;
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">eps = {e}</text>"#,
            lx + 20.0,
            lx + 24.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
