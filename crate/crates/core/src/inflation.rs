//! Benchmark inflation: per-model accuracy gaps between a public benchmark and
//! its retro-holdout, with Fisher's exact significance and plots.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{paired_estimates, EvalError, EvalSummary};
use crate::stats::{AccuracyEstimate, GapEstimate, StatsError, ALPHA};
use crate::svg::{Canvas, Scale};

#[derive(Debug, Error)]
pub enum InflationError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("unsupported report format {0:?} (expected json, csv, svg_scatter or svg_bars)")]
    UnsupportedFormat(String),
    #[error("nothing to report")]
    Empty,
    #[error("malformed report: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationRow {
    pub model_id: String,
    pub gap: GapEstimate,
    /// Fisher's exact p below 5%.
    pub significant: bool,
}

impl InflationRow {
    pub fn from_estimates(
        model_id: impl Into<String>,
        target: AccuracyEstimate,
        retro: AccuracyEstimate,
    ) -> Result<Self, InflationError> {
        let model_id = model_id.into();
        let gap = GapEstimate::new(target, retro)?;
        let significant = gap.fisher_p < ALPHA;
        if gap.gap_pp.abs() > gap.bound_99 && !significant {
            log::info!(
                "{model_id}: gap {:.2} pp exceeds the 99% bound {:.2} but Fisher p = {:.4}",
                gap.gap_pp,
                gap.bound_99,
                gap.fisher_p
            );
        }
        Ok(InflationRow { model_id, gap, significant })
    }
}

/// Inflation of one model, from its evaluations on both datasets.
pub fn compute_inflation(target: &EvalSummary, retro: &EvalSummary) -> Result<InflationRow, InflationError> {
    let (t, r) = paired_estimates(target, retro)?;
    InflationRow::from_estimates(target.model_id.clone(), t, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    SvgScatter,
    SvgBars,
}

impl FromStr for ReportFormat {
    type Err = InflationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "svg_scatter" | "scatter" => Ok(ReportFormat::SvgScatter),
            "svg_bars" | "bars" => Ok(ReportFormat::SvgBars),
            _ => Err(InflationError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::SvgScatter | ReportFormat::SvgBars => "svg",
        }
    }
}

pub fn render_report(rows: &[InflationRow], format: ReportFormat) -> Result<String, InflationError> {
    if rows.is_empty() {
        return Err(InflationError::Empty);
    }
    Ok(match format {
        ReportFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
        ReportFormat::Csv => to_csv(rows),
        ReportFormat::SvgScatter => scatter(rows),
        ReportFormat::SvgBars => bars(rows),
    })
}

const CSV_HEADER: [&str; 15] = [
    "model_id",
    "acc_target",
    "sigma_target",
    "acc_retro",
    "sigma_retro",
    "gap_pp",
    "fisher_p",
    "significant",
    "correct_target",
    "total_target",
    "correct_retro",
    "total_retro",
    "u_p",
    "u_h",
    "bound_99",
];

fn to_csv(rows: &[InflationRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        let g = &r.gap;
        w.write_record([
            r.model_id.clone(),
            g.acc_target.acc.to_string(),
            g.acc_target.sigma.to_string(),
            g.acc_retro.acc.to_string(),
            g.acc_retro.sigma.to_string(),
            g.gap_pp.to_string(),
            g.fisher_p.to_string(),
            r.significant.to_string(),
            g.acc_target.correct.to_string(),
            g.acc_target.total.to_string(),
            g.acc_retro.correct.to_string(),
            g.acc_retro.total.to_string(),
            g.u_p.to_string(),
            g.u_h.to_string(),
            g.bound_99.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn rows_from_json(text: &str) -> Result<Vec<InflationRow>, InflationError> {
    serde_json::from_str(text).map_err(|e| InflationError::Parse(e.to_string()))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<InflationRow>, InflationError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| InflationError::Parse(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(InflationError::Parse("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| InflationError::Parse(e.to_string()))?;
        let bad = |col: &str| InflationError::Parse(format!("row {}: bad {col}", i + 1));
        let f = |j: usize| rec[j].parse::<f64>().map_err(|_| bad(CSV_HEADER[j]));
        let u = |j: usize| rec[j].parse::<u64>().map_err(|_| bad(CSV_HEADER[j]));
        let acc_target = AccuracyEstimate { correct: u(8)?, total: u(9)?, acc: f(1)?, sigma: f(2)? };
        let acc_retro = AccuracyEstimate { correct: u(10)?, total: u(11)?, acc: f(3)?, sigma: f(4)? };
        out.push(InflationRow {
            model_id: rec[0].to_string(),
            gap: GapEstimate {
                acc_target,
                acc_retro,
                gap_pp: f(5)?,
                u_p: f(12)?,
                u_h: f(13)?,
                bound_99: f(14)?,
                fisher_p: f(6)?,
            },
            significant: rec[7].parse().map_err(|_| bad("significant"))?,
        });
    }
    Ok(out)
}

/// Target accuracy against retro accuracy, with the diagonal of equal
/// performance and 1-sigma bars on both axes.
fn scatter(rows: &[InflationRow]) -> String {
    let mut c = Canvas::new(560.0, 560.0, "Accuracy on target vs retro-holdout");
    let lo = rows
        .iter()
        .flat_map(|r| [r.gap.acc_target.acc - r.gap.acc_target.sigma, r.gap.acc_retro.acc - r.gap.acc_retro.sigma])
        .fold(1.0f64, f64::min)
        .max(0.0);
    let hi = rows
        .iter()
        .flat_map(|r| [r.gap.acc_target.acc + r.gap.acc_target.sigma, r.gap.acc_retro.acc + r.gap.acc_retro.sigma])
        .fold(0.0f64, f64::max)
        .min(1.0);
    let pad = ((hi - lo) * 0.05).max(0.01);
    let (lo, hi) = ((lo - pad).max(0.0), (hi + pad).min(1.0));
    let xs = Scale::new((lo, hi), c.x_range());
    let ys = Scale::new((lo, hi), c.y_range());
    c.line(xs.at(lo), ys.at(lo), xs.at(hi), ys.at(hi), "diagonal");
    for r in rows {
        let (x, y) = (r.gap.acc_retro.acc, r.gap.acc_target.acc);
        let (sx, sy) = (r.gap.acc_retro.sigma, r.gap.acc_target.sigma);
        c.line(xs.at(x - sx), ys.at(y), xs.at(x + sx), ys.at(y), "errorbar");
        c.line(xs.at(x), ys.at(y - sy), xs.at(x), ys.at(y + sy), "errorbar");
        let tip = format!("{}: target {:.1}%, retro {:.1}%", r.model_id, 100.0 * y, 100.0 * x);
        c.circle(xs.at(x), ys.at(y), 4.0, "point", &tip);
        c.text(xs.at(x) + 6.0, ys.at(y) - 6.0, &r.model_id, "tick", "start");
    }
    c.axes("retro-holdout accuracy", "target accuracy");
    c.finish()
}

/// Gap per model in percentage points; significant rows get a star.
fn bars(rows: &[InflationRow]) -> String {
    let height = 80.0 + 28.0 * rows.len() as f64;
    let mut c = Canvas::new(640.0, height.max(200.0), "Benchmark inflation (pp)");
    c.margin = 140.0;
    let lo = rows.iter().map(|r| r.gap.gap_pp).fold(0.0f64, f64::min);
    let hi = rows.iter().map(|r| r.gap.gap_pp).fold(0.0f64, f64::max);
    let xs = Scale::new((lo, hi), c.x_range());
    let zero = xs.at(0.0);
    for (i, r) in rows.iter().enumerate() {
        let y = 50.0 + 28.0 * i as f64;
        let x = xs.at(r.gap.gap_pp);
        let tip = format!("{}: {:+.1} pp, Fisher p = {:.4}", r.model_id, r.gap.gap_pp, r.gap.fisher_p);
        c.rect(zero.min(x), y, (x - zero).abs(), 20.0, "bar", &tip);
        c.text(c.margin - 8.0, y + 14.0, &r.model_id, "tick", "end");
        let mut label = format!("{:+.1}", r.gap.gap_pp);
        if r.significant {
            c.text(zero.max(x) + 4.0, y + 15.0, "*", "star", "start");
            label.insert(0, ' ');
        }
        c.text(zero.max(x) + 14.0, y + 14.0, &label, "tick", "start");
    }
    c.finish()
}
