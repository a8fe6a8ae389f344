//! Minimal SVG line plots built from table rows alone.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::bundle::Row;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Parameters that split runs into separate series.
const GROUP_PARAMS: [&str; 4] = ["scaling_exponent", "dilation_ratio", "leak_rate", "channels"];

struct PlotSpec {
    file: &'static str,
    title: &'static str,
    metrics: &'static [&'static str],
}

const PLOTS: [PlotSpec; 3] = [
    PlotSpec {
        file: "plot_width.svg",
        title: "std_width",
        metrics: &["std_width"],
    },
    PlotSpec {
        file: "plot_error.svg",
        title: "l1_error",
        metrics: &["l1_error", "lattice_l1_error"],
    },
    PlotSpec {
        file: "plot_mass_split.svg",
        title: "mass split",
        metrics: &["mass_x", "mass_y"],
    },
];

#[derive(Default)]
struct Run {
    role: String,
    params: BTreeMap<String, f64>,
    metrics: BTreeMap<String, f64>,
}

fn collect_runs(rows: &[Row]) -> BTreeMap<String, Run> {
    let mut runs: BTreeMap<String, Run> = BTreeMap::new();
    for r in rows {
        let target = match r.kind {
            "param" => true,
            "metric" => false,
            _ => continue,
        };
        let Ok(v) = r.value.parse::<f64>() else { continue };
        let run = runs.entry(r.run.clone()).or_default();
        run.role = r.role.clone();
        if target {
            run.params.insert(r.name.clone(), v);
        } else {
            run.metrics.insert(r.name.clone(), v);
        }
    }
    runs
}

type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn build_series(runs: &BTreeMap<String, Run>, x: &str, metrics: &[&str]) -> Series {
    let mut out: Series = BTreeMap::new();
    for run in runs.values() {
        let Some(xv) = run.params.get(x) else { continue };
        for m in metrics {
            let Some(yv) = run.metrics.get(*m) else { continue };
            let mut label = format!("{} {m}", run.role);
            for g in GROUP_PARAMS {
                if g != x {
                    if let Some(v) = run.params.get(g) {
                        let _ = write!(label, " {g}={v}");
                    }
                }
            }
            out.entry(label).or_default().push((*xv, *yv));
        }
    }
    for pts in out.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out.retain(|_, pts| pts.len() >= 2);
    out
}

/// Every plot that has at least one series with two or more points.
pub fn plots(rows: &[Row]) -> Vec<(String, String)> {
    let runs = collect_runs(rows);
    let x = if runs.values().any(|r| r.params.contains_key("sequence_length")) {
        "sequence_length"
    } else {
        "depth"
    };
    PLOTS
        .iter()
        .filter_map(|p| {
            let series = build_series(&runs, x, p.metrics);
            (!series.is_empty()).then(|| (p.file.to_string(), render(p.title, x, &series)))
        })
        .collect()
}

fn render(title: &str, x_label: &str, series: &Series) -> String {
    let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let log_x = all.iter().all(|p| p.0 > 0.0);
    let log_y = all.iter().all(|p| p.1 > 0.0);
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let range = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(all.iter().map(|p| tx(p.0)).collect());
    let (y0, y1) = range(all.iter().map(|p| ty(p.1)).collect());
    let px = |v: f64| MARGIN + (tx(v) - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |v: f64| H - MARGIN - (ty(v) - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let scale = |log: bool| if log { " (log)" } else { "" };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}{}</text>"#,
        W / 2.0,
        H - 15.0,
        scale(log_x)
    );
    let axis_value = |v: f64, log: bool| if log { 10f64.powf(v) } else { v };
    for (v, anchor, x) in [(x0, "start", MARGIN), (x1, "end", W - MARGIN)] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}">{:.4}</text>"#,
            H - MARGIN + 15.0,
            axis_value(v, log_x)
        );
    }
    for (v, y) in [(y0, H - MARGIN), (y1, MARGIN)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end">{:.4e}</text>"#,
            MARGIN - 4.0,
            axis_value(v, log_y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">value{}</text>"#,
        H / 2.0,
        H / 2.0,
        scale(log_y)
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            path.join(" ")
        );
        for (x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                px(*x),
                py(*y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{label}</text>"#,
            MARGIN + 8.0,
            MARGIN + 14.0 * (i as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}
