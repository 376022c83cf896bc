//! Aggregation of experiment CSVs into per-figure series and SVG charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::harness::config::{Algorithm, ExperimentKind};
use crate::harness::record::{format_float, ExperimentRecord, TrialTag, SCHEMA_HEADER};
use crate::stats::{loglog_slope, quantile};

/// One point of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub algorithm: Algorithm,
    pub x: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub count: usize,
    /// Least-squares slope of `ln median` against `ln x` over the series.
    pub slope: Option<f64>,
}

/// The grid variable an experiment sweeps.
pub fn x_of(kind: ExperimentKind, rec: &ExperimentRecord) -> usize {
    match kind {
        ExperimentKind::Varm => rec.m,
        ExperimentKind::Varr => rec.r,
        ExperimentKind::Varn | ExperimentKind::Single | ExperimentKind::Bounds => rec.n,
    }
}

/// Group trial rows by (algorithm, x); median rows are recomputed, not read.
pub fn aggregate(records: &[ExperimentRecord]) -> Result<(ExperimentKind, Vec<PlotRow>)> {
    let kind = records.first().ok_or_else(|| Error::Parse("no records to aggregate".into()))?.experiment;
    if records.iter().any(|r| r.experiment != kind) {
        return Err(Error::Parse("records mix several experiments".into()));
    }
    let mut groups: BTreeMap<(Algorithm, usize), Vec<f64>> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.trial != TrialTag::Median) {
        groups.entry((rec.algorithm, x_of(kind, rec))).or_default().push(rec.relative_max_error);
    }
    let mut rows = groups
        .into_iter()
        .map(|((algorithm, x), v)| {
            Ok(PlotRow {
                algorithm,
                x,
                median: quantile(&v, 0.5)?,
                q25: quantile(&v, 0.25)?,
                q75: quantile(&v, 0.75)?,
                count: v.len(),
                slope: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut algs: Vec<Algorithm> = rows.iter().map(|r| r.algorithm).collect();
    algs.dedup();
    for alg in algs {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.algorithm == alg).map(|r| (r.x as f64, r.median)).unzip();
        let slope = loglog_slope(&xs, &ys).ok();
        rows.iter_mut().filter(|r| r.algorithm == alg).for_each(|r| r.slope = slope);
    }
    Ok((kind, rows))
}

pub fn write_plot_csv<W: Write>(mut w: W, kind: ExperimentKind, rows: &[PlotRow]) -> Result<()> {
    writeln!(w, "{SCHEMA_HEADER}")?;
    writeln!(w, "experiment,algorithm,x,median,q25,q75,count,loglog_slope")?;
    for r in rows {
        writeln!(
            w,
            "{kind},{},{},{},{},{},{},{}",
            r.algorithm,
            r.x,
            format_float(r.median),
            format_float(r.q25),
            format_float(r.q75),
            r.count,
            r.slope.map(format_float).unwrap_or_default()
        )?;
    }
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLOURS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Log-log line chart of the medians with interquartile bars.
pub fn render_svg(kind: ExperimentKind, rows: &[PlotRow]) -> String {
    let pos: Vec<&PlotRow> = rows.iter().filter(|r| r.q25 > 0.0 && r.x > 0).collect();
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo.is_finite() && hi > lo {
            (lo.ln(), hi.ln())
        } else if lo.is_finite() {
            (lo.ln() - 0.5, lo.ln() + 0.5)
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = range(&mut pos.iter().map(|r| r.x as f64));
    let (y0, y1) = range(&mut pos.iter().flat_map(|r| [r.q25, r.q75]));
    let px = |x: f64| MARGIN + (x.ln() - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y.ln() - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let axis = match kind {
        ExperimentKind::Varm => "m",
        ExperimentKind::Varr => "r",
        _ => "n",
    };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{axis} (log scale)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">relative max error (log scale)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">{kind}</text>"#, WIDTH / 2.0);
    let mut algs: Vec<Algorithm> = pos.iter().map(|r| r.algorithm).collect();
    algs.dedup();
    for (k, alg) in algs.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let series: Vec<&&PlotRow> = pos.iter().filter(|r| r.algorithm == *alg).collect();
        let path: Vec<String> =
            series.iter().map(|r| format!("{:.2},{:.2}", px(r.x as f64), py(r.median))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, path.join(" "));
        for r in &series {
            let x = px(r.x as f64);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{colour}"/><circle cx="{x:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                py(r.q25),
                py(r.q75),
                py(r.median)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{alg}</text>"#,
            WIDTH - MARGIN - 90.0,
            MARGIN + 16.0 * k as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::altproj::TestFunction;
    use crate::sampling::SamplingScheme;

    fn rec(kind: ExperimentKind, r: usize, trial: usize, err: f64) -> ExperimentRecord {
        ExperimentRecord {
            experiment: kind,
            function: TestFunction::F1,
            scheme: SamplingScheme::Symmetric,
            n: 100,
            m: 10,
            r,
            trial: TrialTag::Index(trial),
            seed: Some(trial as u64),
            algorithm: Algorithm::AltProj,
            relative_max_error: err,
            baseline_relative_max_error: None,
            bound: None,
            wall_time_s: None,
        }
    }

    #[test]
    fn median_is_middle_of_five() {
        let recs: Vec<_> = [0.5, 0.1, 0.4, 0.2, 0.3].iter().enumerate().map(|(i, &e)| rec(ExperimentKind::Varr, 5, i, e)).collect();
        let (_, rows) = aggregate(&recs).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].median, 0.3);
        assert_eq!((rows[0].q25, rows[0].q75), (0.2, 0.4));
        assert_eq!(rows[0].slope, None);
    }

    #[test]
    fn single_point_collapses_quartiles() {
        let (_, rows) = aggregate(&[rec(ExperimentKind::Single, 5, 0, 0.25)]).unwrap();
        assert_eq!((rows[0].q25, rows[0].median, rows[0].q75), (0.25, 0.25, 0.25));
    }

    #[test]
    fn slope_of_inverse_square_root_data() {
        let recs: Vec<_> = [5usize, 10, 20, 40, 80]
            .iter()
            .flat_map(|&r| (0..5).map(move |t| rec(ExperimentKind::Varr, r, t, 0.4 / (r as f64).sqrt() * (1.0 + 0.01 * t as f64))))
            .collect();
        let (kind, rows) = aggregate(&recs).unwrap();
        let slope = rows[0].slope.unwrap();
        assert!((slope + 0.5).abs() < 0.02, "{slope}");
        let mut csv = Vec::new();
        write_plot_csv(&mut csv, kind, &rows).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 7);
        let svg = render_svg(kind, &rows);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn rejects_mixed_or_empty_input() {
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[rec(ExperimentKind::Varr, 5, 0, 0.1), rec(ExperimentKind::Varm, 5, 0, 0.1)]).is_err());
    }
}
