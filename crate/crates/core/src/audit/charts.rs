//! Static SVG charts drawn from a finished report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{write_file, AuditError, AuditReport};
use crate::metrics::PointStatus;

const W: f64 = 760.0;
const H: f64 = 380.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Series {
    name: String,
    values: Vec<Option<f64>>,
    /// Points drawn hollow (estimated rather than observed).
    hollow: Vec<bool>,
}

impl Series {
    fn new(name: &str, values: Vec<Option<f64>>) -> Self {
        let hollow = vec![false; values.len()];
        Series {
            name: name.to_string(),
            values,
            hollow,
        }
    }
}

struct Frame {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Frame {
    fn new(series: &[Series], stacked: bool) -> Self {
        let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for i in 0..n {
            let vals = series.iter().filter_map(|s| s.values.get(i).copied().flatten());
            if stacked {
                let (pos, neg): (Vec<f64>, Vec<f64>) = vals.partition(|v| *v >= 0.0);
                hi = hi.max(pos.iter().sum());
                lo = lo.min(neg.iter().sum());
            } else {
                for v in vals {
                    hi = hi.max(v);
                    lo = lo.min(v);
                }
            }
        }
        if hi - lo <= 0.0 {
            hi = lo + 1.0;
        }
        let pad = 0.05 * (hi - lo);
        Frame {
            lo: if lo < 0.0 { lo - pad } else { lo },
            hi: hi + pad,
            n,
        }
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (self.hi - v) / (self.hi - self.lo) * (H - TOP - BOTTOM)
    }

    fn slot(&self) -> f64 {
        (W - LEFT - RIGHT) / self.n.max(1) as f64
    }

    fn x(&self, i: usize) -> f64 {
        LEFT + (i as f64 + 0.5) * self.slot()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        (W - RIGHT + LEFT) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (H - BOTTOM + TOP) / 2.0,
        escape(y_label)
    );
    s
}

fn axes(s: &mut String, f: &Frame, labels: &[String]) {
    for k in 0..=4 {
        let v = f.lo + (f.hi - f.lo) * k as f64 / 4.0;
        let y = f.y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            W - RIGHT,
            LEFT - 4.0,
            y + 4.0
        );
    }
    if f.lo < 0.0 {
        let y = f.y(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#444"/>"##,
            W - RIGHT
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="#444"/><line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#444"/>"##,
        H - BOTTOM,
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    );
    // thin out labels so they do not collide
    let step = (labels.len() / 24).max(1);
    for (i, l) in labels.iter().enumerate().filter(|(i, _)| i % step == 0) {
        let _ = writeln!(
            s,
            r#"<text transform="translate({:.1},{:.1}) rotate(-45)" text-anchor="end">{}</text>"#,
            f.x(i),
            H - BOTTOM + 14.0,
            escape(l)
        );
    }
}

fn legend(s: &mut String, series: &[Series]) {
    for (k, ser) in series.iter().enumerate() {
        let y = TOP + 8.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - RIGHT + 12.0,
            y - 9.0,
            PALETTE[k % PALETTE.len()],
            W - RIGHT + 26.0,
            y,
            escape(&ser.name)
        );
    }
}

fn line_chart(title: &str, y_label: &str, labels: &[String], series: &[Series]) -> String {
    let f = Frame::new(series, false);
    let mut s = open(title, y_label);
    axes(&mut s, &f, labels);
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        // break the polyline at missing values
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (i, v) in ser.values.iter().enumerate() {
            match v {
                Some(v) => runs.last_mut().expect("non-empty").push((f.x(i), f.y(*v))),
                None => runs.push(Vec::new()),
            }
        }
        for run in runs.iter().filter(|r| r.len() > 1) {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        for (i, v) in ser.values.iter().enumerate() {
            if let Some(v) = v {
                let fill = if ser.hollow[i] { "white" } else { color };
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{fill}" stroke="{color}"/>"#,
                    f.x(i),
                    f.y(*v)
                );
            }
        }
    }
    legend(&mut s, series);
    s.push_str("</svg>\n");
    s
}

fn bar_chart(title: &str, y_label: &str, labels: &[String], series: &[Series], stacked: bool) -> String {
    let f = Frame::new(series, stacked);
    let mut s = open(title, y_label);
    axes(&mut s, &f, labels);
    let slot = f.slot();
    let n = series.len().max(1);
    let mut pos = vec![0.0f64; f.n];
    let mut neg = vec![0.0f64; f.n];
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for (i, v) in ser.values.iter().enumerate() {
            let Some(v) = *v else { continue };
            let (x, w, base) = if stacked {
                let base = if v >= 0.0 { pos[i] } else { neg[i] };
                if v >= 0.0 {
                    pos[i] += v;
                } else {
                    neg[i] += v;
                }
                (f.x(i) - 0.4 * slot, 0.8 * slot, base)
            } else {
                let w = 0.8 * slot / n as f64;
                (f.x(i) - 0.4 * slot + w * k as f64, w, 0.0)
            };
            let (y0, y1) = (f.y(base), f.y(base + v));
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{color}"/>"#,
                y0.min(y1),
                (y1 - y0).abs()
            );
        }
    }
    legend(&mut s, series);
    s.push_str("</svg>\n");
    s
}

/// Writes the five report charts into `dir`.
pub fn write_charts(report: &AuditReport, dir: &Path) -> Result<Vec<PathBuf>, AuditError> {
    std::fs::create_dir_all(dir).map_err(|e| AuditError::Io(dir.to_path_buf(), e))?;
    let mut out = Vec::new();
    let mut emit = |name: &str, svg: String| -> Result<(), AuditError> {
        let p = dir.join(name);
        write_file(&p, &svg)?;
        out.push(p);
        Ok(())
    };

    let months: Vec<String> = report.pay.monthly.keys().map(|m| m.to_string()).collect();
    emit(
        "pay_per_hour.svg",
        line_chart(
            "Pay per hour by month",
            "£ per hour",
            &months,
            &[
                Series::new(
                    "tribunal",
                    report.pay.monthly.values().map(|p| p.per_hour_tribunal).collect(),
                ),
                Series::new(
                    "platform",
                    report.pay.monthly.values().map(|p| p.per_hour_platform).collect(),
                ),
            ],
        ),
    )?;

    let u = &report.utilisation.monthly;
    emit(
        "utilisation.svg",
        bar_chart(
            "Hours per driver-day by state",
            "hours",
            &u.keys().map(|m| m.to_string()).collect::<Vec<_>>(),
            &[
                Series::new("standby", u.values().map(|x| Some(x.standby)).collect()),
                Series::new("en route", u.values().map(|x| Some(x.en_route)).collect()),
                Series::new("on trip", u.values().map(|x| Some(x.on_trip)).collect()),
            ],
            true,
        ),
    )?;

    let mut labels: Vec<String> = Vec::new();
    let mut hist: Vec<Series> = Vec::new();
    for (era, t) in &report.take_rate {
        let total = t.histogram.total();
        if total == 0 {
            continue;
        }
        labels = t.histogram.bins.iter().map(|b| b.label.clone()).collect();
        hist.push(Series::new(
            era.as_str(),
            t.histogram
                .bins
                .iter()
                .map(|b| Some(b.count as f64 / total as f64))
                .collect(),
        ));
    }
    emit(
        "take_rate_histogram.svg",
        bar_chart("Driver share of fare", "fraction of trips", &labels, &hist, false),
    )?;

    let series = &report.surplus.series;
    let mut surplus = Series::new("surplus", series.iter().map(|p| p.value).collect());
    surplus.hollow = series.iter().map(|p| p.status == PointStatus::Interpolated).collect();
    emit(
        "surplus.svg",
        line_chart(
            "Surplus per on-trip hour (hollow: interpolated)",
            "£ per hour",
            &series.iter().map(|p| p.month.to_string()).collect::<Vec<_>>(),
            &[surplus],
        ),
    )?;

    // the latest era with priced trips
    let mut bins: Vec<(String, f64, f64)> = report
        .take_rate
        .values()
        .rev()
        .find(|t| !t.per_minute.is_empty())
        .map(|t| {
            t.per_minute
                .iter()
                .map(|b| (b.label.clone(), b.driver_per_min, b.platform_per_min))
                .collect()
        })
        .unwrap_or_default();
    // highest driver share first
    bins.reverse();
    emit(
        "per_minute_split.svg",
        bar_chart(
            "Fare per minute by split",
            "£ per minute",
            &bins.iter().map(|b| b.0.clone()).collect::<Vec<_>>(),
            &[
                Series::new("driver", bins.iter().map(|b| Some(b.1)).collect()),
                Series::new("platform", bins.iter().map(|b| Some(b.2)).collect()),
            ],
            true,
        ),
    )?;
    Ok(out)
}
