//! Report rows and writers. The CSV column set is versioned and ordered:
//! p,a,b,Px,Py,d,label,ordP,R,twist,N,S_re,S_im,S_abs,zero_count,theorem,
//! rhs,ratio,flags,ms. Exact quantities stay integer-typed; absent values
//! are empty cells.

use anyhow::Result;
use divchar::sums::HypothesisFlag;
use serde::Serialize;
use std::io::Write;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 20] = [
    "p", "a", "b", "Px", "Py", "d", "label", "ordP", "R", "twist", "N", "S_re", "S_im", "S_abs",
    "zero_count", "theorem", "rhs", "ratio", "flags", "ms",
];

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub p: u64,
    pub a: u64,
    pub b: u64,
    #[serde(rename = "Px")]
    pub px: u64,
    #[serde(rename = "Py")]
    pub py: u64,
    pub d: u64,
    pub label: u64,
    #[serde(rename = "ordP")]
    pub ord_p: u64,
    #[serde(rename = "R")]
    pub r: u64,
    pub twist: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub s_re: Option<f64>,
    pub s_im: Option<f64>,
    pub s_abs: Option<f64>,
    pub zero_count: Option<u64>,
    pub theorem: Option<String>,
    pub rhs: Option<f64>,
    pub ratio: Option<f64>,
    pub flags: String,
    pub ms: u64,
}

/// Renders hypothesis flags plus any extra tokens as "name=0/1" joined by
/// semicolons, in a fixed order.
pub fn flags_string(flags: &[HypothesisFlag], extra: &[String]) -> String {
    let mut parts: Vec<String> = flags
        .iter()
        .map(|f| format!("{}={}", f.name, u8::from(f.satisfied)))
        .collect();
    parts.extend(extra.iter().cloned());
    parts.join(";")
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub artifact: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub config_hash: String,
}

impl ReportMeta {
    pub fn new(config_hash: String) -> Self {
        ReportMeta {
            artifact: "divchar",
            version: env!("CARGO_PKG_VERSION"),
            schema: SCHEMA_VERSION,
            config_hash,
        }
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: &mut W, meta: &ReportMeta, rows: &[ReportRow]) -> Result<()> {
    writeln!(
        out,
        "# {} v{} schema={} config={}",
        meta.artifact, meta.version, meta.schema, meta.config_hash
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.a.to_string(),
            r.b.to_string(),
            r.px.to_string(),
            r.py.to_string(),
            r.d.to_string(),
            r.label.to_string(),
            r.ord_p.to_string(),
            r.r.to_string(),
            r.twist.clone(),
            r.n.to_string(),
            opt_f64(r.s_re),
            opt_f64(r.s_im),
            opt_f64(r.s_abs),
            opt_u64(r.zero_count),
            r.theorem.clone().unwrap_or_default(),
            opt_f64(r.rhs),
            opt_f64(r.ratio),
            r.flags.clone(),
            r.ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct JsonReport<'a> {
    #[serde(flatten)]
    meta: &'a ReportMeta,
    rows: &'a [ReportRow],
}

pub fn write_json<W: Write>(out: &mut W, meta: &ReportMeta, rows: &[ReportRow]) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &JsonReport { meta, rows })?;
    writeln!(out)?;
    Ok(())
}

/// Aggregate view per bound family: the `table` subcommand's output and the
/// scan's stderr summary.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremAggregate {
    pub theorem: String,
    pub rows: usize,
    pub hypotheses_ok: usize,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
}

pub fn aggregate(rows: &[ReportRow]) -> Vec<TheoremAggregate> {
    let mut labels: Vec<String> = rows.iter().filter_map(|r| r.theorem.clone()).collect();
    labels.sort();
    labels.dedup();
    labels
        .into_iter()
        .map(|label| {
            let of_label: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| r.theorem.as_deref() == Some(&label))
                .collect();
            let mut ratios: Vec<f64> = of_label.iter().filter_map(|r| r.ratio).collect();
            ratios.sort_by(|a, b| a.total_cmp(b));
            let hypotheses_ok = of_label
                .iter()
                .filter(|r| !r.flags.contains("=0") && !r.flags.contains("error"))
                .count();
            TheoremAggregate {
                theorem: label,
                rows: of_label.len(),
                hypotheses_ok,
                max_ratio: ratios.last().copied(),
                median_ratio: if ratios.is_empty() {
                    None
                } else {
                    Some(ratios[ratios.len() / 2])
                },
            }
        })
        .collect()
}

pub fn write_aggregate_table<W: Write>(out: &mut W, aggs: &[TheoremAggregate]) -> Result<()> {
    writeln!(
        out,
        "{:<8} {:>6} {:>14} {:>12} {:>12}",
        "family", "rows", "hypotheses_ok", "max_ratio", "median_ratio"
    )?;
    for a in aggs {
        writeln!(
            out,
            "{:<8} {:>6} {:>14} {:>12} {:>12}",
            a.theorem,
            a.rows,
            a.hypotheses_ok,
            a.max_ratio.map(|x| format!("{x:.4}")).unwrap_or_default(),
            a.median_ratio.map(|x| format!("{x:.4}")).unwrap_or_default(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> ReportRow {
        ReportRow {
            p: 5,
            a: 1,
            b: 1,
            px: 0,
            py: 1,
            d: 2,
            label: 1,
            ord_p: 9,
            r: 18,
            twist: "one".into(),
            n: 4,
            s_re: Some(2.0),
            s_im: Some(0.0),
            s_abs: Some(2.0),
            zero_count: Some(0),
            theorem: None,
            rhs: None,
            ratio: None,
            flags: String::new(),
            ms: 0,
        }
    }

    #[test]
    fn csv_has_header_and_quotes_commas() {
        let mut row = sample_row();
        row.twist = "dirichlet:q=4,exp=1".into();
        let meta = ReportMeta::new("deadbeef".into());
        let mut buf = Vec::new();
        write_csv(&mut buf, &meta, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# divchar"));
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let data = lines.next().unwrap();
        assert!(data.contains("\"dirichlet:q=4,exp=1\""));
    }

    #[test]
    fn aggregates_compute_max_and_median() {
        let mut rows = Vec::new();
        for (i, ratio) in [0.5, 0.1, 0.9].iter().enumerate() {
            let mut r = sample_row();
            r.theorem = Some("1.1".into());
            r.ratio = Some(*ratio);
            r.n = i as u64 + 1;
            rows.push(r);
        }
        let aggs = aggregate(&rows);
        assert_eq!(aggs.len(), 1);
        assert_eq!(aggs[0].rows, 3);
        assert_eq!(aggs[0].max_ratio, Some(0.9));
        assert_eq!(aggs[0].median_ratio, Some(0.5));
    }
}
