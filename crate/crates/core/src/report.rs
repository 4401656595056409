//! Figure emitters: dependency-free SVG (rects, paths, text) paired with
//! the CSV holding every number the figure displays. Figures are
//! diagnostic quality; the CSVs are the artifact of record.
//!
//! Numbers are formatted with the shortest round-trip form (`{}`) in both
//! the CSV value columns and the summary JSON, so a textual diff can
//! verify they agree. Text printed inside a figure is repeated verbatim
//! in a `label` column of its CSV.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::problems::{PdeFamily, ALL_FAMILIES};
use crate::stats::{DegradationSummary, GrowthBand};
use crate::stress::{ScenarioKind, SpectralSummary, ALL_SCENARIOS};

/// One figure: the drawing and the data behind it.
#[derive(Clone, Debug)]
pub struct Figure {
    /// Basename without extension; the caller appends .svg / .csv.
    pub name: String,
    pub svg: String,
    pub csv: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeatmapScale {
    /// Diverging color centered at D = 1 on a log axis (default: the
    /// observed range spans more than an order of magnitude).
    Log,
    Linear,
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const ML: f64 = 90.0;
const MR: f64 = 30.0;
const MT: f64 = 50.0;
const MB: f64 = 70.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Display label: three significant-ish decimals, the form printed inside
/// figures. Kept as a function so the CSV label column matches exactly.
fn label3(v: f64) -> String {
    format!("{v:.3}")
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        esc(title)
    );
    s
}

fn text(s: &mut String, x: f64, y: f64, anchor: &str, content: &str) {
    let _ = write!(
        s,
        "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\">{}</text>\n",
        esc(content)
    );
}

fn line(s: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
    let _ = write!(
        s,
        "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" {style}/>\n"
    );
}

fn rect(s: &mut String, x: f64, y: f64, w: f64, h: f64, style: &str) {
    let _ = write!(
        s,
        "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" {style}/>\n"
    );
}

/// Diverging blue-white-red ramp on t in [-1, 1].
fn diverging_color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let u = -t;
        (
            255.0 + u * (44.0 - 255.0),
            255.0 + u * (123.0 - 255.0),
            255.0 + u * (182.0 - 255.0),
        )
    } else {
        (
            255.0 + t * (215.0 - 255.0),
            255.0 + t * (25.0 - 255.0),
            255.0 + t * (28.0 - 255.0),
        )
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Heatmap of mean degradation factors. Rows and columns with no data at
/// all are dropped, so a scoped campaign yields a smaller grid; cells that
/// are inapplicable stay white.
pub fn heatmap_figure(summaries: &[DegradationSummary], scale: HeatmapScale) -> Result<Figure> {
    if summaries.is_empty() {
        return Err(Error::Campaign("nothing to report: no summaries".into()));
    }
    let matrix = crate::stats::heatmap_matrix(summaries);
    let rows: Vec<usize> = (0..5).filter(|r| matrix[*r].iter().any(Option::is_some)).collect();
    let cols: Vec<usize> =
        (0..5).filter(|c| (0..5).any(|r| matrix[r][*c].is_some())).collect();

    let vals: Vec<f64> = matrix.iter().flatten().filter_map(|v| *v).collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));

    let cell_w = (W - ML - MR) / cols.len() as f64;
    let cell_h = (H - MT - MB) / rows.len() as f64;

    let mut svg = svg_open("Mean degradation factor by task and stress scenario");
    let mut csv = String::from("pde,scenario,mean_d,label\n");

    for (ri, &r) in rows.iter().enumerate() {
        let fam = ALL_FAMILIES[r];
        let y = MT + ri as f64 * cell_h;
        text(&mut svg, ML - 8.0, y + cell_h / 2.0 + 4.0, "end", fam.tag());
        for (ci, &c) in cols.iter().enumerate() {
            let kind = ALL_SCENARIOS[c];
            let x = ML + ci as f64 * cell_w;
            match matrix[r][c] {
                Some(d) => {
                    let t = match scale {
                        HeatmapScale::Log => {
                            let span = (hi.ln().abs()).max(lo.ln().abs()).max(1e-9);
                            d.ln() / span
                        }
                        HeatmapScale::Linear => {
                            if hi > lo {
                                2.0 * (d - lo) / (hi - lo) - 1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    let fill = diverging_color(t);
                    rect(
                        &mut svg,
                        x,
                        y,
                        cell_w,
                        cell_h,
                        &format!("fill=\"{fill}\" stroke=\"#888888\""),
                    );
                    let lbl = label3(d);
                    text(&mut svg, x + cell_w / 2.0, y + cell_h / 2.0 + 4.0, "middle", &lbl);
                    let _ = writeln!(csv, "{},{},{},{}", fam.tag(), kind.tag(), fmt(d), lbl);
                }
                None => {
                    rect(&mut svg, x, y, cell_w, cell_h, "fill=\"white\" stroke=\"#cccccc\"");
                    let _ = writeln!(csv, "{},{},,", fam.tag(), kind.tag());
                }
            }
        }
    }
    for (ci, &c) in cols.iter().enumerate() {
        let x = ML + ci as f64 * cell_w + cell_w / 2.0;
        text(&mut svg, x, H - MB + 18.0, "middle", ALL_SCENARIOS[c].tag());
    }
    svg.push_str("</svg>\n");
    Ok(Figure {
        name: "heatmap".into(),
        svg,
        csv,
    })
}

/// Per-task bar chart of mean degradation factors with 95% CI whiskers.
pub fn bar_chart_figure(family: PdeFamily, summaries: &[DegradationSummary]) -> Result<Figure> {
    let bars: Vec<&DegradationSummary> = ALL_SCENARIOS
        .iter()
        .filter_map(|k| {
            summaries
                .iter()
                .find(|s| s.scenario == *k && s.pde == family.tag())
        })
        .collect();
    if bars.is_empty() {
        return Err(Error::Campaign(format!(
            "nothing to report: no summaries for {}",
            family.tag()
        )));
    }
    let top = bars
        .iter()
        .map(|b| b.stats.ci_high)
        .fold(1.0f64, f64::max)
        * 1.15;

    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;
    let y_of = |v: f64| MT + plot_h * (1.0 - v / top);

    let mut svg = svg_open(&format!(
        "{}: degradation factor by scenario (whiskers: 95% CI)",
        family.tag()
    ));
    let mut csv = String::from("pde,scenario,mean,ci_low,ci_high,label\n");

    // Frame and the D = 1 reference line.
    line(&mut svg, ML, MT, ML, MT + plot_h, "stroke=\"black\"");
    line(&mut svg, ML, MT + plot_h, ML + plot_w, MT + plot_h, "stroke=\"black\"");
    line(
        &mut svg,
        ML,
        y_of(1.0),
        ML + plot_w,
        y_of(1.0),
        "stroke=\"#888888\" stroke-dasharray=\"4 3\"",
    );

    let slot = plot_w / bars.len() as f64;
    for (i, b) in bars.iter().enumerate() {
        let cx = ML + (i as f64 + 0.5) * slot;
        let bw = slot * 0.5;
        let mean = b.stats.mean;
        rect(
            &mut svg,
            cx - bw / 2.0,
            y_of(mean),
            bw,
            MT + plot_h - y_of(mean),
            "fill=\"#6699cc\" stroke=\"#333333\"",
        );
        // CI whisker with serifs.
        line(&mut svg, cx, y_of(b.stats.ci_low), cx, y_of(b.stats.ci_high), "stroke=\"black\"");
        line(
            &mut svg,
            cx - 6.0,
            y_of(b.stats.ci_low),
            cx + 6.0,
            y_of(b.stats.ci_low),
            "stroke=\"black\"",
        );
        line(
            &mut svg,
            cx - 6.0,
            y_of(b.stats.ci_high),
            cx + 6.0,
            y_of(b.stats.ci_high),
            "stroke=\"black\"",
        );
        let lbl = label3(mean);
        text(&mut svg, cx, y_of(b.stats.ci_high) - 8.0, "middle", &lbl);
        text(&mut svg, cx, MT + plot_h + 18.0, "middle", b.scenario.tag());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            family.tag(),
            b.scenario.tag(),
            fmt(mean),
            fmt(b.stats.ci_low),
            fmt(b.stats.ci_high),
            lbl
        );
    }
    svg.push_str("</svg>\n");
    Ok(Figure {
        name: format!("bars_{}", family.tag()),
        svg,
        csv,
    })
}

/// Spectral error profile from the resolution scenario: per-bin share of
/// squared error against wavenumber, with the training Nyquist marked.
pub fn spectral_figure(
    family: PdeFamily,
    spectral: &SpectralSummary,
    train_nyquist: f64,
) -> Result<Figure> {
    let p = &spectral.profile;
    if p.energies.is_empty() || p.degenerate {
        return Err(Error::Degenerate(format!(
            "spectral profile for {} carries no energy",
            family.tag()
        )));
    }
    let kmax = *p.bin_edges.last().unwrap();
    let emax = p.energies.iter().cloned().fold(f64::MIN, f64::max).max(1e-12);

    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;
    let x_of = |k: f64| ML + plot_w * k / kmax;
    let y_of = |e: f64| MT + plot_h * (1.0 - e / (emax * 1.1));

    let mut svg = svg_open(&format!(
        "{}: resolution-shift error energy by wavenumber",
        family.tag()
    ));
    let mut csv = String::from("pde,quantity,bin_lo,bin_hi,value,label\n");

    line(&mut svg, ML, MT, ML, MT + plot_h, "stroke=\"black\"");
    line(&mut svg, ML, MT + plot_h, ML + plot_w, MT + plot_h, "stroke=\"black\"");

    for (i, e) in p.energies.iter().enumerate() {
        let lo = p.bin_edges[i];
        let hi = p.bin_edges[i + 1];
        rect(
            &mut svg,
            x_of(lo),
            y_of(*e),
            x_of(hi) - x_of(lo),
            MT + plot_h - y_of(*e),
            "fill=\"#cc8844\" stroke=\"#333333\"",
        );
        let _ = writeln!(
            csv,
            "{},bin,{},{},{},",
            family.tag(),
            fmt(lo),
            fmt(hi),
            fmt(*e)
        );
    }

    // Training Nyquist cut and the share of error above it.
    let xc = x_of(train_nyquist);
    line(&mut svg, xc, MT, xc, MT + plot_h, "stroke=\"#cc0000\" stroke-dasharray=\"5 3\"");
    let frac = spectral.frac_above_train_nyquist;
    let lbl = format!("above train Nyquist: {}", label3(frac));
    text(&mut svg, (xc + W - MR) / 2.0, MT + 16.0, "middle", &lbl);
    let nyq_lbl = label3(train_nyquist);
    text(&mut svg, xc, MT + plot_h + 18.0, "middle", &nyq_lbl);
    let _ = writeln!(
        csv,
        "{},frac_above_train_nyquist,{},,{},{}",
        family.tag(),
        fmt(train_nyquist),
        fmt(frac),
        label3(frac)
    );
    let _ = writeln!(
        csv,
        "{},train_nyquist,{},,,{}",
        family.tag(),
        fmt(train_nyquist),
        nyq_lbl
    );

    svg.push_str("</svg>\n");
    Ok(Figure {
        name: format!("spectral_{}", family.tag()),
        svg,
        csv,
    })
}

/// Rollout error growth: mean curve with a shaded 95% band.
pub fn growth_figure(family: PdeFamily, band: &GrowthBand) -> Result<Figure> {
    if band.times.is_empty() || band.times.len() != band.stats.len() {
        return Err(Error::Shape("growth band is empty or misaligned".into()));
    }
    let tmax = *band.times.last().unwrap();
    let emax = band.stats.iter().map(|s| s.ci_high).fold(f64::MIN, f64::max) * 1.15;

    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;
    let x_of = |t: f64| ML + plot_w * (t - 1.0) / (tmax - 1.0).max(1e-9);
    let y_of = |e: f64| MT + plot_h * (1.0 - e / emax);

    let mut svg = svg_open(&format!(
        "{}: rollout error growth (band: 95% CI)",
        family.tag()
    ));
    let mut csv = String::from("pde,horizon_multiple,mean_error,std,ci_low,ci_high,n,label\n");

    line(&mut svg, ML, MT, ML, MT + plot_h, "stroke=\"black\"");
    line(&mut svg, ML, MT + plot_h, ML + plot_w, MT + plot_h, "stroke=\"black\"");

    // CI band polygon: upper edge forward, lower edge back.
    let mut pts = String::new();
    for (t, s) in band.times.iter().zip(&band.stats) {
        let _ = write!(pts, "{:.1},{:.1} ", x_of(*t), y_of(s.ci_high));
    }
    for (t, s) in band.times.iter().zip(&band.stats).rev() {
        let _ = write!(pts, "{:.1},{:.1} ", x_of(*t), y_of(s.ci_low));
    }
    let _ = write!(
        svg,
        "<polygon points=\"{}\" fill=\"#bbccee\" stroke=\"none\"/>\n",
        pts.trim_end()
    );

    let mut path = String::new();
    for (i, (t, s)) in band.times.iter().zip(&band.stats).enumerate() {
        let _ = write!(
            path,
            "{}{:.1},{:.1} ",
            if i == 0 { "M" } else { "L" },
            x_of(*t),
            y_of(s.mean)
        );
    }
    let _ = write!(
        svg,
        "<path d=\"{}\" fill=\"none\" stroke=\"#224488\" stroke-width=\"2\"/>\n",
        path.trim_end()
    );

    for (t, s) in band.times.iter().zip(&band.stats) {
        let cx = x_of(*t);
        let _ = write!(
            svg,
            "<circle cx=\"{cx:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"#224488\"/>\n",
            y_of(s.mean)
        );
        let mean_lbl = label3(s.mean);
        text(&mut svg, cx, y_of(s.mean) - 10.0, "middle", &mean_lbl);
        let t_lbl = label3(*t);
        text(&mut svg, cx, MT + plot_h + 18.0, "middle", &t_lbl);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{} {}",
            family.tag(),
            fmt(*t),
            fmt(s.mean),
            fmt(s.std),
            fmt(s.ci_low),
            fmt(s.ci_high),
            s.n,
            t_lbl,
            mean_lbl
        );
    }
    svg.push_str("</svg>\n");
    Ok(Figure {
        name: format!("growth_{}", family.tag()),
        svg,
        csv,
    })
}

/// The campaign summary table as CSV, mirroring the JSON schema.
pub fn summary_csv(summaries: &[DegradationSummary]) -> String {
    let mut csv = String::from("pde,scenario,mean,std,ci_low,ci_high,n\n");
    for s in summaries {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.pde,
            s.scenario.tag(),
            fmt(s.stats.mean),
            fmt(s.stats.std),
            fmt(s.stats.ci_low),
            fmt(s.stats.ci_high),
            s.stats.n
        );
    }
    csv
}

/// Applicable (family, scenario) pairs absent from the summaries; the
/// report step treats a nonempty answer as a completeness failure unless
/// the campaign was explicitly scoped.
pub fn missing_cells(summaries: &[DegradationSummary]) -> Vec<(PdeFamily, ScenarioKind)> {
    let mut missing = Vec::new();
    for fam in ALL_FAMILIES {
        for kind in ALL_SCENARIOS {
            if !kind.applies_to(fam) {
                continue;
            }
            let found = summaries
                .iter()
                .any(|s| s.pde == fam.tag() && s.scenario == kind);
            if !found {
                missing.push((fam, kind));
            }
        }
    }
    missing
}
