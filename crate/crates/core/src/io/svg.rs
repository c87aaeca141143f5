use std::fmt::Write;

use crate::error::{Error, Result};
use crate::integrator::{Sample, Trajectory};

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 760.0;
const HEADER: f64 = 40.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 64.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
const TICKS: usize = 5;

struct Series {
    id: &'static str,
    label: &'static str,
    color: &'static str,
    right: bool,
    value: fn(&Sample) -> f64,
}

struct Panel {
    title: &'static str,
    left_label: &'static str,
    right_label: Option<&'static str>,
    series: Vec<Series>,
}

fn panels() -> Vec<Panel> {
    vec![
        Panel {
            title: "wage share and employment",
            left_label: "ratio",
            right_label: None,
            series: vec![
                Series {
                    id: "wage_share",
                    label: "omega",
                    color: "#1f77b4",
                    right: false,
                    value: |s| s.core.wage_share,
                },
                Series {
                    id: "employment",
                    label: "lambda",
                    color: "#d62728",
                    right: false,
                    value: |s| s.core.employment,
                },
            ],
        },
        Panel {
            title: "private and public debt",
            left_label: "ratio to output",
            right_label: None,
            series: vec![
                Series {
                    id: "private_debt_ratio",
                    label: "ell",
                    color: "#2ca02c",
                    right: false,
                    value: |s| s.core.private_debt_ratio,
                },
                Series {
                    id: "gov_debt_ratio",
                    label: "b",
                    color: "#9467bd",
                    right: false,
                    value: |s| s.aux.gov_debt_ratio,
                },
            ],
        },
        Panel {
            title: "policy and target rates",
            left_label: "rate",
            right_label: None,
            series: vec![
                Series {
                    id: "policy_rate",
                    label: "r_g",
                    color: "#1f77b4",
                    right: false,
                    value: |s| s.core.policy_rate,
                },
                Series {
                    id: "target_rate",
                    label: "rho",
                    color: "#ff7f0e",
                    right: false,
                    value: |s| s.core.target_rate,
                },
            ],
        },
        Panel {
            title: "output and inflation",
            left_label: "log10 Y",
            right_label: Some("inflation"),
            series: vec![
                Series {
                    id: "log_output",
                    label: "log10 Y",
                    color: "#8c564b",
                    right: false,
                    value: |s| s.aux.real_output.log10(),
                },
                Series {
                    id: "inflation",
                    label: "inflation",
                    color: "#e377c2",
                    right: true,
                    value: |s| s.derived.inflation,
                },
            ],
        },
    ]
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of<'a>(values: impl Iterator<Item = &'a f64>) -> Option<Range> {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(*v), b.max(*v))
            });
        if lo > hi {
            return None;
        }
        let span = hi - lo;
        let pad = if span > 0.0 {
            0.05 * span
        } else {
            0.5 * lo.abs().max(1.0)
        };
        Some(Range {
            lo: lo - pad,
            hi: hi + pad,
        })
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Round-number ticks inside the range, with labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        let raw = (self.hi - self.lo) / TICKS as f64;
        if !(raw > 0.0 && raw.is_finite()) {
            return Vec::new();
        }
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        let scientific = self.lo.abs().max(self.hi.abs()) >= 1e5 || decimals > 4;
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last)
            .map(|k| {
                let v = k as f64 * step;
                let label = if scientific {
                    format!("{v:.1e}")
                } else if v == 0.0 {
                    "0".to_string()
                } else {
                    format!("{v:.decimals$}")
                };
                (v, label)
            })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Four-panel chart as a standalone SVG document. Output depends only on the
/// trajectory and the title.
pub fn render_svg(traj: &Trajectory, title: &str) -> Result<String> {
    if traj.samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{} (termination: {})</text>"#,
        WIDTH / 2.0,
        escape(title),
        traj.termination
    );

    let t0 = traj.first().t;
    let t1 = traj.end_time().max(t0 + 1e-12);
    let cell_w = WIDTH / 2.0;
    let cell_h = (HEIGHT - HEADER) / 2.0;

    for (k, panel) in panels().iter().enumerate() {
        let x0 = (k % 2) as f64 * cell_w + MARGIN_L;
        let y0 = HEADER + (k / 2) as f64 * cell_h + MARGIN_T;
        let w = cell_w - MARGIN_L - MARGIN_R;
        let h = cell_h - MARGIN_T - MARGIN_B;
        let data: Vec<Vec<f64>> = panel
            .series
            .iter()
            .map(|s| traj.samples.iter().map(|p| (s.value)(p)).collect())
            .collect();
        let axis_range = |right: bool| {
            Range::of(
                panel
                    .series
                    .iter()
                    .zip(&data)
                    .filter(|(s, _)| s.right == right)
                    .flat_map(|(_, d)| d.iter()),
            )
        };
        let left = axis_range(false).unwrap_or(Range { lo: -1.0, hi: 1.0 });
        let right = axis_range(true);
        let px = |t: f64| x0 + w * (t - t0) / (t1 - t0);
        let py = |r: &Range, v: f64| y0 + h * (1.0 - r.frac(v));

        let _ = writeln!(out, r#"<g id="panel-{k}">"#);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#333"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + w / 2.0,
            y0 - 10.0,
            panel.title
        );

        let time = Range { lo: t0, hi: t1 };
        for (t, label) in time.ticks() {
            let x = px(t);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
                y0 + h,
                y0 + h + 4.0,
                y0 + h + 16.0,
            );
        }
        for (v, label) in left.ticks() {
            let y = py(&left, v);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0,
            );
        }
        if let Some(r) = right {
            for (v, label) in r.ticks() {
                let y = py(&r, v);
                let _ = writeln!(
                    out,
                    r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="start">{label}</text>"##,
                    x0 + w,
                    x0 + w + 4.0,
                    x0 + w + 6.0,
                    y + 4.0,
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t (years)</text>"#,
            x0 + w / 2.0,
            y0 + h + 32.0
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            x0 - 50.0,
            y0 + h / 2.0,
            panel.left_label
        );
        if let Some(label) = panel.right_label {
            let _ = writeln!(
                out,
                r#"<text transform="translate({:.2},{:.2}) rotate(90)" text-anchor="middle">{label}</text>"#,
                x0 + w + 50.0,
                y0 + h / 2.0
            );
        }

        for (side, range) in [("left", Some(left)), ("right", right)] {
            if let Some(r) = range {
                if r.lo < 0.0 && r.hi > 0.0 {
                    let y = py(&r, 0.0);
                    let _ = writeln!(
                        out,
                        r##"<line class="zero" id="zero-{k}-{side}" x1="{x0:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                        x0 + w
                    );
                }
            }
        }

        for (j, (s, d)) in panel.series.iter().zip(&data).enumerate() {
            let r = if s.right { right.unwrap_or(left) } else { left };
            let mut points = String::new();
            for (p, v) in traj.samples.iter().zip(d) {
                if v.is_finite() {
                    let _ = write!(points, "{:.2},{:.2} ", px(p.t), py(&r, *v));
                }
            }
            let _ = writeln!(
                out,
                r#"<polyline id="series-{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                s.id,
                s.color,
                points.trim_end()
            );
            let ly = y0 + 14.0 + 14.0 * j as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                x0 + w - 90.0,
                ly - 4.0,
                x0 + w - 70.0,
                ly - 4.0,
                s.color,
                x0 + w - 64.0,
                ly,
                s.label
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::Termination;

    #[test]
    fn empty_trajectory_is_rejected() {
        let t = Trajectory {
            samples: vec![],
            termination: Termination::HorizonReached,
            accumulated_error: 0.0,
            rejected_steps: 0,
        };
        assert!(matches!(render_svg(&t, "x"), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn title_is_escaped() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn degenerate_range_is_padded() {
        let r = Range::of([2.0, 2.0].iter()).unwrap();
        assert!(r.lo < 2.0 && r.hi > 2.0);
        assert!(Range::of([f64::NAN].iter()).is_none());
    }

    #[test]
    fn ticks_are_round_numbers() {
        let labels: Vec<String> = Range {
            lo: -0.058,
            hi: 0.024,
        }
        .ticks()
        .into_iter()
        .map(|(_, l)| l)
        .collect();
        assert_eq!(labels, ["-0.04", "-0.02", "0", "0.02"]);
        let t: Vec<f64> = Range {
            lo: 0.0,
            hi: 334.67,
        }
        .ticks()
        .into_iter()
        .map(|(v, _)| v)
        .collect();
        assert_eq!(t, [0.0, 100.0, 200.0, 300.0]);
    }
}
