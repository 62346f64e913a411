//! Trace files: one record per recorded step, as JSON lines or CSV.
//!
//! Floats are written with 17 significant digits so every value parses
//! back to the same `f64`. Non-finite values are written as `null` in
//! JSON and as `NaN`/`inf`/`-inf` in CSV.

use std::io::{self, Write};

use serde::Deserialize;

use crate::error::{AgrfError, Result};
use crate::linalg::SymMatrix;
use crate::objective::fmt_f64;
use crate::ode::TracePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Jsonl,
    Csv,
}

impl TraceFormat {
    pub fn from_name(name: &str) -> Option<TraceFormat> {
        match name {
            "jsonl" => Some(TraceFormat::Jsonl),
            "csv" => Some(TraceFormat::Csv),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TraceFormat::Jsonl => "jsonl",
            TraceFormat::Csv => "csv",
        }
    }
}

fn json_num(v: f64) -> String {
    if v.is_finite() {
        fmt_f64(v)
    } else {
        "null".into()
    }
}

fn json_array(vs: &[f64]) -> String {
    let items: Vec<String> = vs.iter().map(|&v| json_num(v)).collect();
    format!("[{}]", items.join(","))
}

/// A single JSON object, without the trailing newline.
pub fn jsonl_line(p: &TracePoint) -> String {
    let rows: Vec<String> = (0..p.cov.dim()).map(|i| json_array(p.cov.row(i))).collect();
    format!(
        "{{\"t\":{},\"m\":{},\"C\":[{}],\"f_at_mean\":{},\"expected_f\":{},\"det_C\":{},\"h\":{}}}",
        json_num(p.t),
        json_array(&p.mean),
        rows.join(","),
        json_num(p.f_at_mean),
        json_num(p.expected_f),
        json_num(p.det_cov),
        json_num(p.step_size)
    )
}

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("m_{i}")));
    for i in 0..n {
        cols.extend((0..n).map(|j| format!("C_{i}_{j}")));
    }
    cols.extend(["f_at_mean", "expected_f", "det_C", "h"].map(String::from));
    cols.join(",")
}

fn csv_num(v: f64) -> String {
    if v.is_finite() {
        fmt_f64(v)
    } else {
        v.to_string()
    }
}

pub fn csv_row(p: &TracePoint) -> String {
    let mut vals = vec![p.t];
    vals.extend_from_slice(&p.mean);
    vals.extend_from_slice(p.cov.as_slice());
    vals.extend([p.f_at_mean, p.expected_f, p.det_cov, p.step_size]);
    vals.iter().map(|&v| csv_num(v)).collect::<Vec<_>>().join(",")
}

pub fn write_trace<W: Write>(points: &[TracePoint], format: TraceFormat, mut w: W) -> io::Result<()> {
    match format {
        TraceFormat::Jsonl => {
            for p in points {
                writeln!(w, "{}", jsonl_line(p))?;
            }
        }
        TraceFormat::Csv => {
            let n = points.first().map_or(0, TracePoint::dim);
            writeln!(w, "{}", csv_header(n))?;
            for p in points {
                writeln!(w, "{}", csv_row(p))?;
            }
        }
    }
    w.flush()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonPoint {
    t: Option<f64>,
    m: Vec<Option<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<Option<f64>>>,
    f_at_mean: Option<f64>,
    expected_f: Option<f64>,
    #[serde(rename = "det_C")]
    det_c: Option<f64>,
    h: Option<f64>,
}

fn nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn parse_line_err(line: usize, msg: impl std::fmt::Display) -> AgrfError {
    AgrfError::Parse(format!("trace line {line}: {msg}"))
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TracePoint>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let jp: JsonPoint = serde_json::from_str(line).map_err(|e| parse_line_err(k + 1, e))?;
        let rows: Vec<Vec<f64>> = jp.c.into_iter().map(|r| r.into_iter().map(nan).collect()).collect();
        if rows.len() != jp.m.len() {
            return Err(parse_line_err(k + 1, "covariance and mean sizes differ"));
        }
        let cov = SymMatrix::from_rows(&rows).map_err(|e| parse_line_err(k + 1, e))?;
        out.push(TracePoint {
            t: nan(jp.t),
            mean: jp.m.into_iter().map(nan).collect(),
            cov,
            f_at_mean: nan(jp.f_at_mean),
            expected_f: nan(jp.expected_f),
            det_cov: nan(jp.det_c),
            step_size: nan(jp.h),
        });
    }
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<Vec<TracePoint>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let ncols = header.split(',').count();
    let n = (1..=ncols)
        .find(|&n| 1 + n + n * n + 4 == ncols)
        .ok_or_else(|| AgrfError::Parse(format!("unexpected CSV column count {ncols}")))?;
    if header.trim() != csv_header(n) {
        return Err(AgrfError::Parse(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for (k, line) in lines {
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| parse_line_err(k + 1, e))?;
        if vals.len() != ncols {
            return Err(parse_line_err(k + 1, format!("expected {ncols} fields, got {}", vals.len())));
        }
        let cov_flat = &vals[1 + n..1 + n + n * n];
        let rows: Vec<Vec<f64>> = cov_flat.chunks(n).map(<[f64]>::to_vec).collect();
        let cov = SymMatrix::from_rows(&rows).map_err(|e| parse_line_err(k + 1, e))?;
        let tail = &vals[1 + n + n * n..];
        out.push(TracePoint {
            t: vals[0],
            mean: vals[1..1 + n].to_vec(),
            cov,
            f_at_mean: tail[0],
            expected_f: tail[1],
            det_cov: tail[2],
            step_size: tail[3],
        });
    }
    Ok(out)
}

pub fn parse_trace(text: &str, format: TraceFormat) -> Result<Vec<TracePoint>> {
    match format {
        TraceFormat::Jsonl => parse_jsonl(text),
        TraceFormat::Csv => parse_csv(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point() -> TracePoint {
        TracePoint {
            t: 0.1,
            mean: vec![1.0 / 3.0, -2.5e-300],
            cov: SymMatrix::from_rows(&[vec![2.0, 0.1], vec![0.1, 1e10]]).unwrap(),
            f_at_mean: std::f64::consts::PI,
            expected_f: f64::NAN,
            det_cov: 1.9999999999999998e10,
            step_size: 0.0,
        }
    }

    fn same(a: &TracePoint, b: &TracePoint) -> bool {
        let bits = |p: &TracePoint| {
            let mut v = vec![p.t, p.f_at_mean, p.det_cov, p.step_size];
            v.extend(&p.mean);
            v.extend(p.cov.as_slice());
            v.into_iter().map(f64::to_bits).collect::<Vec<_>>()
        };
        bits(a) == bits(b) && (a.expected_f.to_bits() == b.expected_f.to_bits() || (a.expected_f.is_nan() && b.expected_f.is_nan()))
    }

    #[test]
    fn jsonl_round_trip() {
        let p = point();
        let line = jsonl_line(&p);
        assert!(line.starts_with("{\"t\":1.0000000000000001e-1,\"m\":[3.3333333333333331e-1,"));
        assert!(line.contains("\"expected_f\":null"));
        let back = parse_jsonl(&line).unwrap();
        assert!(same(&back[0], &p));
    }

    #[test]
    fn csv_round_trip() {
        let p = point();
        let mut buf = Vec::new();
        write_trace(&[p.clone(), p.clone()], TraceFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,m_0,m_1,C_0_0,C_0_1,C_1_0,C_1_1,f_at_mean,expected_f,det_C,h\n"));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert!(same(&back[1], &p));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_jsonl("{\"t\":1}"), Err(AgrfError::Parse(_))));
        assert!(matches!(parse_csv("a,b\n1,2\n"), Err(AgrfError::Parse(_))));
        let bad = "t,m_0,C_0_0,f_at_mean,expected_f,det_C,h\n1,2,3\n";
        assert!(matches!(parse_csv(bad), Err(AgrfError::Parse(_))));
        assert!(parse_csv("").unwrap().is_empty());
    }

    #[test]
    fn format_names() {
        assert_eq!(TraceFormat::from_name("csv"), Some(TraceFormat::Csv));
        assert_eq!(TraceFormat::from_name("xml"), None);
        assert_eq!(TraceFormat::Jsonl.name(), "jsonl");
    }
}
