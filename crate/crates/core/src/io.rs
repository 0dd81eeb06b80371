//! CSV and JSON formats.
//!
//! * field: `i1,...,iN,value`, one row per site in lexicographic order
//! * dataset: `x1,...,xd,y`
//! * targets: `i1,...,iN`
//! * predictions: `i1,...,iN,prediction`
//!
//! Reals are written as `{:.16e}`, which round-trips every `f64`. JSON
//! reports are rounded to [`JSON_SIGNIFICANT_DIGITS`] significant digits.

use std::io::{Read, Write};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lattice::{LatticeRegion, RegressionDataset, ScalarField, Site};

pub const JSON_SIGNIFICANT_DIGITS: usize = 12;

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn site_header(ndim: usize) -> Vec<String> {
    (1..=ndim).map(|k| format!("i{k}")).collect()
}

fn parse_real(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {line}: `{s}` is not a number")))
}

fn parse_coord(s: &str, line: usize) -> Result<i64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {line}: `{s}` is not an integer index")))
}

fn check_header(headers: &csv::StringRecord, expected: &[String]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Parse(format!(
            "expected header `{}`, got `{}`",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

pub fn write_field<W: Write>(field: &ScalarField, out: W) -> Result<()> {
    let region = field.region();
    let mut w = csv::Writer::from_writer(out);
    let mut header = site_header(region.ndim());
    header.push("value".into());
    w.write_record(&header)?;
    for (site, v) in region.iter().zip(field.values()) {
        let mut row: Vec<String> = site.coords().iter().map(i64::to_string).collect();
        row.push(fmt_real(*v));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field CSV. Rows may come in any order but must cover a full
/// rectangle exactly once.
pub fn read_field<R: Read>(input: R) -> Result<ScalarField> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    let ndim = headers.len().checked_sub(1).filter(|&n| n > 0).ok_or_else(|| {
        Error::Parse("field CSV needs at least one index column and a value column".into())
    })?;
    let mut expected = site_header(ndim);
    expected.push("value".into());
    check_header(&headers, &expected)?;

    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let coords = (0..ndim)
            .map(|k| parse_coord(&rec[k], line + 2))
            .collect::<Result<Vec<_>>>()?;
        rows.push((coords, parse_real(&rec[ndim], line + 2)?));
    }
    if rows.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut lo = rows[0].0.clone();
    let mut hi = rows[0].0.clone();
    for (c, _) in &rows {
        for k in 0..ndim {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    let dims = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect();
    let region = LatticeRegion::with_origin(lo, dims)?;
    if region.cardinality() != rows.len() {
        return Err(Error::Parse(format!(
            "{} rows do not fill the {} sites of their bounding box",
            rows.len(),
            region.cardinality()
        )));
    }
    let mut values = vec![f64::NAN; rows.len()];
    let mut seen = vec![false; rows.len()];
    for (c, v) in rows {
        let site = Site::new(c)?;
        let idx = region.linear_index(&site).expect("inside bounding box");
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::Parse(format!("site {site} listed twice")));
        }
        values[idx] = v;
    }
    ScalarField::new(region, values)
}

pub fn write_dataset<W: Write>(data: &RegressionDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.dim()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.x(i).iter().copied().map(fmt_real).collect();
        row.push(fmt_real(data.ys()[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<RegressionDataset> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    let d = headers
        .len()
        .checked_sub(1)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parse("dataset CSV needs x columns and a y column".into()))?;
    let mut expected: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    expected.push("y".into());
    check_header(&headers, &expected)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for k in 0..d {
            xs.push(parse_real(&rec[k], line + 2)?);
        }
        ys.push(parse_real(&rec[d], line + 2)?);
    }
    RegressionDataset::new(d, xs, ys)
}

pub fn read_targets<R: Read>(input: R) -> Result<Vec<Site>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Parse("targets CSV has no columns".into()));
    }
    check_header(&headers, &site_header(headers.len()))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let coords = rec
            .iter()
            .map(|s| parse_coord(s, line + 2))
            .collect::<Result<Vec<_>>>()?;
        out.push(Site::new(coords)?);
    }
    Ok(out)
}

pub fn write_targets<W: Write>(sites: &[Site], ndim: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(site_header(ndim))?;
    for s in sites {
        w.write_record(s.coords().iter().map(i64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions<W: Write>(rows: &[(Site, f64)], ndim: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = site_header(ndim);
    header.push("prediction".into());
    w.write_record(&header)?;
    for (site, p) in rows {
        let mut row: Vec<String> = site.coords().iter().map(i64::to_string).collect();
        row.push(fmt_real(*p));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rounds `v` to `digits` significant digits.
pub fn round_significant(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v).parse().unwrap_or(v)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_significant(n.as_f64().unwrap_or(0.0), JSON_SIGNIFICANT_DIGITS);
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with reals rounded to 12 significant digits and a trailing
/// newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
