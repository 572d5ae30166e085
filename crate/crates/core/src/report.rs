//! CSV, TOML and SVG report emitters, plus the predictions CSV reader.
//!
//! Every CSV has a header row, `,` separators, `.` decimals and LF line
//! endings. Floats use Rust's shortest round-trip formatting. An optional
//! first line `# generated <unix seconds>` is the only part that varies
//! between identical runs; readers skip `#` lines.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{ComparisonReport, EvaluationReport, PrPoint, Prediction};

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>, timestamp: Option<u64>) -> Result<String> {
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    let body = String::from_utf8(body).expect("csv output is utf-8");
    Ok(match timestamp {
        Some(t) => format!("# generated {t}\n{body}"),
        None => body,
    })
}

fn joined<T>(items: impl Iterator<Item = T>, f: impl Fn(T) -> String) -> String {
    items.map(f).collect::<Vec<_>>().join(";")
}

pub const PREDICTIONS_HEADER: [&str; 7] =
    ["method", "query", "predicted", "confidence", "selected", "posteriors", "fallbacks"];

/// One row per query. For switching methods `selected` lists
/// `unit:technique` per unit, with matching `posteriors` and `fallbacks`
/// (1 when the unit fell back to its best visited technique).
pub fn predictions_csv(method: &str, predictions: &[Prediction], timestamp: Option<u64>) -> Result<String> {
    let mut w = writer();
    w.write_record(PREDICTIONS_HEADER)?;
    for p in predictions {
        let d = &p.decisions;
        w.write_record([
            method.to_string(),
            p.query.to_string(),
            p.predicted.to_string(),
            p.confidence.to_string(),
            joined(d.iter(), |u| format!("{}:{}", u.unit_label, u.selected_technique)),
            joined(d.iter(), |u| u.selected_posterior.to_string()),
            joined(d.iter(), |u| (u.fallback_used as u8).to_string()),
        ])?;
    }
    finish(w, timestamp)
}

/// Reads a predictions CSV back into the method name and bare predictions
/// (unit decisions are not reconstructed).
pub fn parse_predictions_csv(text: &str) -> Result<(String, Vec<Prediction>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().take(4).ne(PREDICTIONS_HEADER.iter().take(4).copied()) {
        return Err(Error::Format(format!(
            "predictions header must start with `method,query,predicted,confidence`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut method: Option<String> = None;
    let mut predictions = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::Format(format!("predictions row {}: bad {what} `{}`", row + 1, record.iter().collect::<Vec<_>>().join(",")));
        match &method {
            None => method = Some(field(0).to_string()),
            Some(m) if m != field(0) => {
                return Err(Error::Format(format!(
                    "predictions mix methods `{m}` and `{}`",
                    field(0)
                )))
            }
            Some(_) => {}
        }
        let confidence: f64 = field(3).parse().map_err(|_| bad("confidence"))?;
        if !confidence.is_finite() {
            return Err(bad("confidence"));
        }
        predictions.push(Prediction {
            query: field(1).parse().map_err(|_| bad("query"))?,
            predicted: field(2).parse().map_err(|_| bad("reference"))?,
            confidence,
            decisions: Vec::new(),
        });
    }
    let method = method.ok_or_else(|| Error::EmptySet("predictions file has no rows".into()))?;
    Ok((method, predictions))
}

pub fn outcomes_csv(report: &EvaluationReport, timestamp: Option<u64>) -> Result<String> {
    let mut w = writer();
    w.write_record(["query", "predicted", "confidence", "correct"])?;
    for o in &report.outcomes {
        w.write_record([
            o.query.to_string(),
            o.predicted.to_string(),
            o.confidence.to_string(),
            (o.correct as u8).to_string(),
        ])?;
    }
    finish(w, timestamp)
}

pub fn pr_csv(points: &[PrPoint], timestamp: Option<u64>) -> Result<String> {
    let mut w = writer();
    w.write_record(["threshold", "precision", "recall"])?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.precision.to_string(), p.recall.to_string()])?;
    }
    finish(w, timestamp)
}

pub fn comparison_csv(report: &ComparisonReport, timestamp: Option<u64>) -> Result<String> {
    let mut w = writer();
    w.write_record(["method", "accuracy", "correct", "accuracy_delta", "correct_delta"])?;
    for r in &report.rows {
        w.write_record([
            r.method.clone(),
            r.accuracy.to_string(),
            r.correct_count.to_string(),
            r.accuracy_delta.to_string(),
            r.correct_delta.to_string(),
        ])?;
    }
    finish(w, timestamp)
}

#[derive(Serialize)]
struct Summary<'a> {
    method: &'a str,
    accuracy: f64,
    correct: usize,
    queries: usize,
    pr_points: usize,
}

pub fn summary_toml(report: &EvaluationReport) -> String {
    toml::to_string(&Summary {
        method: &report.method,
        accuracy: report.accuracy,
        correct: report.correct_count,
        queries: report.query_count,
        pr_points: report.pr_points.len(),
    })
    .expect("summary serializes")
}

/// A self-contained SVG precision-recall plot.
pub fn pr_svg(method: &str, points: &[PrPoint]) -> String {
    const W: f64 = 400.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let x = |r: f64| M + r * (W - 2.0 * M);
    let y = |p: f64| H - M - p * (H - 2.0 * M);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{} {} L{} {} L{} {}" fill="none" stroke="black"/>"#,
        x(0.0),
        y(1.0),
        x(0.0),
        y(0.0),
        x(1.0),
        y(0.0)
    )
    .unwrap();
    for t in [0.0, 0.5, 1.0] {
        writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{t}</text>"#, x(t), y(0.0) + 18.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{t}</text>"#, x(0.0) - 6.0, y(t) + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">recall</text>"#, W / 2.0, H - 12.0).unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {})">precision</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, xml_escape(method)).unwrap();
    if !points.is_empty() {
        let coords: Vec<String> = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.recall), y(p.precision)))
            .collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, coords.join(" ")).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
