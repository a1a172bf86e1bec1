//! Self-contained SVG line charts for regret curves.
//!
//! Reads the per-seed ledger CSVs from an experiment directory, averages
//! them per algorithm, and emits one chart per metric: cumulative and
//! running-average regret for both the reward and the constraint. Pure-text
//! SVG, no external assets.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::regret::RegretLedger;

/// One labeled polyline.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 200.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 64.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const MAX_POINTS_PER_LINE: usize = 1500;

/// Render one chart. Rejects charts with no series or empty series.
pub fn render_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::InvalidInput(format!(
            "chart '{title}' has no data to plot"
        )));
    }

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    let (x_lo, x_hi, x_step) = axis_bounds(x_min, x_max);
    let (y_lo, y_hi, y_step) = axis_bounds(y_min, y_max);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let px = MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let py = MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;
        (px, py)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"Helvetica, Arial, sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    ));

    // Axes.
    svg.push_str(&format!(
        "  <rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
    ));

    // Ticks and grid lines.
    let mut tick = x_lo;
    while tick <= x_hi + 1e-9 * (x_hi - x_lo) {
        let (px, _) = to_px(tick, y_lo);
        svg.push_str(&format!(
            "  <line x1=\"{px:.2}\" y1=\"{}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        ));
        svg.push_str(&format!(
            "  <text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + plot_h + 20.0,
            format_tick(tick)
        ));
        tick += x_step;
    }
    let mut tick = y_lo;
    while tick <= y_hi + 1e-9 * (y_hi - y_lo) {
        let (_, py) = to_px(x_lo, tick);
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{py:.2}\" x2=\"{}\" y2=\"{py:.2}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            py + 4.0,
            format_tick(tick)
        ));
        tick += y_step;
    }

    // Axis labels.
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"22\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 22 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    ));

    // Data and legend.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: String = downsample(&s.points)
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{pts}\"/>\n"
        ));
        let ly = MARGIN_TOP + 16.0 + 22.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 16.0;
        svg.push_str(&format!(
            "  <line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 24.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\">{}</text>\n",
            lx + 30.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Tick bounds covering [min, max] with a 1/2/5-stepped grid.
fn axis_bounds(min: f64, max: f64) -> (f64, f64, f64) {
    let (min, max) = if (max - min).abs() < f64::EPSILON {
        (min - 0.5, max + 0.5)
    } else {
        (min, max)
    };
    let raw_step = (max - min) / 5.0;
    let magnitude = 10f64.powf(raw_step.abs().log10().floor());
    let norm = raw_step / magnitude;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    let step = nice * magnitude;
    let lo = (min / step).floor() * step;
    let hi = (max / step).ceil() * step;
    (lo, hi, step)
}

fn downsample(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS_PER_LINE {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS_PER_LINE);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(stride).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().unwrap());
    }
    out
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 10.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

type MetricFn = Box<dyn Fn(&RegretLedger, usize) -> f64>;

/// The four regret charts rendered from an experiment directory.
///
/// `out_prefix` may be a directory or a path prefix; a `.svg` suffix is
/// stripped. Returns the written paths.
pub fn emit_plots(input_dir: &Path, out_prefix: &Path) -> Result<Vec<PathBuf>> {
    let grouped = load_grouped_ledgers(input_dir)?;

    let metrics: [(&str, &str, MetricFn); 4] = [
        (
            "cumulative_reward_regret",
            "cumulative reward regret",
            Box::new(|l, i| l.cum_reward[i]),
        ),
        (
            "cumulative_constraint_regret",
            "cumulative constraint regret",
            Box::new(|l, i| l.cum_constraint[i]),
        ),
        (
            "average_reward_regret",
            "average reward regret",
            Box::new(|l, i| l.cum_reward[i] / (i + 1) as f64),
        ),
        (
            "average_constraint_regret",
            "average constraint regret",
            Box::new(|l, i| l.cum_constraint[i] / (i + 1) as f64),
        ),
    ];

    let mut written = Vec::new();
    for (slug, label, extract) in &metrics {
        let mut series = Vec::new();
        for (algorithm, ledgers) in &grouped {
            let len = ledgers[0].len();
            let points: Vec<(f64, f64)> = (0..len)
                .map(|i| {
                    let mean =
                        ledgers.iter().map(|l| extract(l, i)).sum::<f64>() / ledgers.len() as f64;
                    ((i + 1) as f64, mean)
                })
                .collect();
            series.push(Series {
                label: algorithm.clone(),
                points,
            });
        }
        let svg = render_line_chart(label, "episode", label, &series)?;
        let path = metric_path(out_prefix, slug);
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Seed-ledger files per algorithm, sorted for reproducible ordering.
fn load_grouped_ledgers(input_dir: &Path) -> Result<BTreeMap<String, Vec<RegretLedger>>> {
    let mut grouped: BTreeMap<String, Vec<(u64, RegretLedger)>> = BTreeMap::new();
    let entries = fs::read_dir(input_dir).map_err(|e| Error::io(input_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(input_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(stem) = name.strip_suffix(".csv") else {
            continue;
        };
        let Some((algorithm, seed_text)) = stem.rsplit_once("_seed") else {
            continue;
        };
        let Ok(seed) = seed_text.parse::<u64>() else {
            continue;
        };
        let ledger = RegretLedger::read_csv(&entry.path(), seed, String::new())?;
        if ledger.is_empty() {
            return Err(Error::InvalidInput(format!(
                "ledger {} contains no episodes",
                entry.path().display()
            )));
        }
        grouped
            .entry(algorithm.to_string())
            .or_default()
            .push((seed, ledger));
    }
    if grouped.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no ledger CSVs (*_seed*.csv) found in {}",
            input_dir.display()
        )));
    }
    let mut out = BTreeMap::new();
    for (algorithm, mut ledgers) in grouped {
        ledgers.sort_by_key(|(seed, _)| *seed);
        let len = ledgers[0].1.len();
        if ledgers.iter().any(|(_, l)| l.len() != len) {
            return Err(Error::InvalidInput(format!(
                "ledgers for {algorithm} disagree on episode count"
            )));
        }
        out.insert(algorithm, ledgers.into_iter().map(|(_, l)| l).collect());
    }
    Ok(out)
}

fn metric_path(out_prefix: &Path, slug: &str) -> PathBuf {
    if out_prefix.is_dir() {
        return out_prefix.join(format!("{slug}.svg"));
    }
    let text = out_prefix.to_string_lossy();
    let base = text.strip_suffix(".svg").unwrap_or(&text);
    if base.ends_with('/') {
        PathBuf::from(format!("{base}{slug}.svg"))
    } else {
        PathBuf::from(format!("{base}_{slug}.svg"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_covers_data_range() {
        for (min, max) in [(0.0, 97.3), (-12.5, 4.0), (3.0, 3.0), (0.001, 0.009)] {
            let (lo, hi, step) = axis_bounds(min, max);
            assert!(lo <= min, "{lo} > {min}");
            assert!(hi >= max, "{hi} < {max}");
            assert!(step > 0.0);
            assert!((hi - lo) / step < 13.0);
        }
    }

    #[test]
    fn chart_has_one_polyline_per_series() {
        let series = vec![
            Series {
                label: "a".into(),
                points: (1..=100).map(|i| (i as f64, i as f64)).collect(),
            },
            Series {
                label: "b".into(),
                points: (1..=100).map(|i| (i as f64, -(i as f64))).collect(),
            },
        ];
        let svg = render_line_chart("t", "x", "y", &series).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn rejects_empty_series() {
        assert!(render_line_chart("t", "x", "y", &[]).is_err());
        let empty = vec![Series {
            label: "a".into(),
            points: vec![],
        }];
        assert!(render_line_chart("t", "x", "y", &empty).is_err());
    }

    #[test]
    fn long_series_are_downsampled_with_endpoint_kept() {
        let points: Vec<(f64, f64)> = (0..100_000).map(|i| (i as f64, i as f64)).collect();
        let ds = downsample(&points);
        assert!(ds.len() <= MAX_POINTS_PER_LINE + 1);
        assert_eq!(ds.last(), points.last());
    }
}
