//! CSV and JSON output of named columns with metadata, and comparison of
//! produced tables against stored reference files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::types::{Error, Result, Termination};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocKind {
    Table,
    Profile,
    Field,
    Streamlines,
    Report,
}

impl DocKind {
    pub fn name(self) -> &'static str {
        match self {
            DocKind::Table => "table",
            DocKind::Profile => "profile",
            DocKind::Field => "field",
            DocKind::Streamlines => "streamlines",
            DocKind::Report => "report",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "table" => DocKind::Table,
            "profile" => DocKind::Profile,
            "field" => DocKind::Field,
            "streamlines" => DocKind::Streamlines,
            "report" => DocKind::Report,
            _ => return Err(Error::InvalidDoc(format!("unknown document kind '{s}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Num(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Num(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_num(&self) -> Option<&[f64]> {
        match self {
            Column::Num(v) => Some(v),
            Column::Text(_) => None,
        }
    }
}

/// A named set of equal-length columns plus string metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputDoc {
    pub kind: DocKind,
    pub columns: Vec<(String, Column)>,
    pub metadata: BTreeMap<String, String>,
    /// Rendered as the final comment line of a CSV file.
    pub termination: Option<String>,
}

impl OutputDoc {
    pub fn new(kind: DocKind) -> Self {
        OutputDoc {
            kind,
            columns: Vec::new(),
            metadata: BTreeMap::new(),
            termination: None,
        }
    }

    pub fn num(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.to_string(), Column::Num(values)));
        self
    }

    pub fn text(mut self, name: &str, values: Vec<String>) -> Self {
        self.columns.push((name.to_string(), Column::Text(values)));
        self
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_termination(mut self, t: &Termination) -> Self {
        self.termination = Some(termination_line(t));
        self
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidDoc("document has no columns".into()));
        }
        let n = self.rows();
        for (name, c) in &self.columns {
            if c.len() != n {
                return Err(Error::InvalidDoc(format!(
                    "column '{name}' has {} rows, expected {n}",
                    c.len()
                )));
            }
            if name.is_empty() || name.contains([',', '\n', '"']) {
                return Err(Error::InvalidDoc(format!("bad column name '{name}'")));
            }
        }
        for (k, v) in &self.metadata {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::InvalidDoc(format!("bad metadata entry '{k}'")));
            }
        }
        Ok(())
    }
}

/// `termination=...` text for a trajectory end.
pub fn termination_line(t: &Termination) -> String {
    match t {
        Termination::Completed => "termination=completed".into(),
        Termination::PoleAt(tp) => format!("termination=pole tau_p={}", fmt_sig9(*tp)),
        Termination::Truncated(why) => format!("termination=truncated reason={}", why.replace('\n', " ")),
    }
}

/// Nine significant digits, trailing zeros dropped; plain notation for
/// moderate magnitudes, exponent notation otherwise.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let e: i32 = exp.parse().unwrap_or(0);
    if (-5..9).contains(&e) {
        let decimals = (8 - e).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{e}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Render the CSV text of a document.
pub fn to_csv_string(doc: &OutputDoc) -> Result<String> {
    doc.validate()?;
    let mut out = String::new();
    out.push_str(&format!("# kind={}\n", doc.kind.name()));
    for (k, v) in &doc.metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header: Vec<&str> = doc.columns.iter().map(|(n, _)| n.as_str()).collect();
    let csv_err = |e: csv::Error| Error::InvalidDoc(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..doc.rows() {
        let row: Vec<String> = doc
            .columns
            .iter()
            .map(|(_, c)| match c {
                Column::Num(v) => fmt_sig9(v[i]),
                Column::Text(v) => v[i].clone(),
            })
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::InvalidDoc(e.to_string()))?;
    out.push_str(&String::from_utf8_lossy(&body));
    if let Some(t) = &doc.termination {
        out.push_str(&format!("# {t}\n"));
    }
    Ok(out)
}

pub fn write_csv(doc: &OutputDoc, path: &Path) -> Result<()> {
    let text = to_csv_string(doc)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parse CSV text produced by [`to_csv_string`]. Columns whose every entry
/// parses as a number come back numeric.
pub fn from_csv_str(text: &str) -> Result<OutputDoc> {
    let mut kind = DocKind::Table;
    let mut metadata = BTreeMap::new();
    let mut termination = None;
    let mut body = String::new();
    let mut seen_body = false;
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim_start();
            if seen_body {
                termination = Some(c.to_string());
                continue;
            }
            let (k, v) = c
                .split_once('=')
                .ok_or_else(|| Error::InvalidDoc(format!("bad comment line '{line}'")))?;
            if k == "kind" {
                kind = DocKind::parse(v)?;
            } else {
                metadata.insert(k.to_string(), v.to_string());
            }
        } else {
            seen_body = true;
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let csv_err = |e: csv::Error| Error::InvalidDoc(e.to_string());
    let names: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for (j, v) in rec.iter().enumerate() {
            raw[j].push(v.to_string());
        }
    }
    let columns = names
        .into_iter()
        .zip(raw)
        .map(|(n, vals)| {
            let nums: Option<Vec<f64>> = vals.iter().map(|v| v.parse::<f64>().ok()).collect();
            match nums {
                Some(v) if !vals.is_empty() => (n, Column::Num(v)),
                _ => (n, Column::Text(vals)),
            }
        })
        .collect();
    let doc = OutputDoc {
        kind,
        columns,
        metadata,
        termination,
    };
    doc.validate()?;
    Ok(doc)
}

pub fn read_csv(path: &Path) -> Result<OutputDoc> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_csv_str(&text)
}

/// Render a document as one JSON object; non-finite numbers become null and
/// set the `nonfinite_values` metadata flag.
pub fn to_json_value(doc: &OutputDoc) -> Result<Value> {
    doc.validate()?;
    let mut metadata = doc.metadata.clone();
    let mut nonfinite = false;
    let columns: Vec<Value> = doc
        .columns
        .iter()
        .map(|(n, c)| {
            let values: Vec<Value> = match c {
                Column::Num(v) => v
                    .iter()
                    .map(|x| {
                        if x.is_finite() {
                            json!(x)
                        } else {
                            nonfinite = true;
                            Value::Null
                        }
                    })
                    .collect(),
                Column::Text(v) => v.iter().map(|s| json!(s)).collect(),
            };
            json!({ "name": n, "values": values })
        })
        .collect();
    if nonfinite {
        metadata.insert("nonfinite_values".into(), "true".into());
    }
    let meta: Map<String, Value> = metadata.into_iter().map(|(k, v)| (k, Value::String(v))).collect();
    Ok(json!({
        "kind": doc.kind.name(),
        "metadata": meta,
        "columns": columns,
        "termination": doc.termination,
    }))
}

pub fn write_json(doc: &OutputDoc, path: &Path) -> Result<()> {
    let v = to_json_value(doc)?;
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidDoc(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn from_json_value(v: &Value) -> Result<OutputDoc> {
    let bad = |what: &str| Error::InvalidDoc(format!("json document: {what}"));
    let kind = DocKind::parse(v["kind"].as_str().ok_or_else(|| bad("missing kind"))?)?;
    let mut metadata = BTreeMap::new();
    for (k, val) in v["metadata"].as_object().ok_or_else(|| bad("missing metadata"))? {
        metadata.insert(
            k.clone(),
            val.as_str()
                .ok_or_else(|| bad("metadata values must be strings"))?
                .to_string(),
        );
    }
    let mut columns = Vec::new();
    for c in v["columns"].as_array().ok_or_else(|| bad("missing columns"))? {
        let name = c["name"]
            .as_str()
            .ok_or_else(|| bad("column without name"))?
            .to_string();
        let vals = c["values"].as_array().ok_or_else(|| bad("column without values"))?;
        let col = if vals.iter().all(|x| x.is_number() || x.is_null()) {
            Column::Num(vals.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
        } else {
            Column::Text(
                vals.iter()
                    .map(|x| x.as_str().unwrap_or_default().to_string())
                    .collect(),
            )
        };
        columns.push((name, col));
    }
    let termination = v["termination"].as_str().map(str::to_string);
    let doc = OutputDoc {
        kind,
        columns,
        metadata,
        termination,
    };
    doc.validate()?;
    Ok(doc)
}

pub fn read_json(path: &Path) -> Result<OutputDoc> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::InvalidDoc(format!("{}: {e}", path.display())))?;
    from_json_value(&v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl ColumnTolerance {
    pub fn abs(abs: f64) -> Self {
        ColumnTolerance { abs, rel: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnDeviation {
    pub name: String,
    pub max_abs: f64,
    pub max_rel: f64,
    /// Row of the largest excess over the tolerance (or of the largest
    /// absolute deviation when everything passes).
    pub worst_row: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldenReport {
    pub columns: Vec<ColumnDeviation>,
}

impl GoldenReport {
    pub fn pass(&self) -> bool {
        self.columns.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| !c.pass)
            .map(|c| {
                format!(
                    "column '{}' row {}: max abs deviation {:e}, max rel deviation {:e}",
                    c.name, c.worst_row, c.max_abs, c.max_rel
                )
            })
            .collect()
    }
}

/// Compare numeric columns of `produced` with a stored CSV file. Columns
/// without an entry in `tolerances` use `default`. A value passes when
/// `|p - g| <= abs + rel |g|`; NaN matches only NaN.
pub fn compare_golden(
    produced: &OutputDoc,
    golden: &Path,
    tolerances: &[(&str, ColumnTolerance)],
    default: ColumnTolerance,
) -> Result<GoldenReport> {
    if !golden.exists() {
        return Err(Error::GoldenNotFound(golden.display().to_string()));
    }
    let reference = read_csv(golden)?;
    compare_docs(produced, &reference, tolerances, default)
}

pub fn compare_docs(
    produced: &OutputDoc,
    reference: &OutputDoc,
    tolerances: &[(&str, ColumnTolerance)],
    default: ColumnTolerance,
) -> Result<GoldenReport> {
    let names = |d: &OutputDoc| d.columns.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    if names(produced) != names(reference) {
        return Err(Error::SchemaMismatch(format!(
            "columns {:?} differ from reference {:?}",
            names(produced),
            names(reference)
        )));
    }
    if produced.rows() != reference.rows() {
        return Err(Error::SchemaMismatch(format!(
            "{} rows produced, reference has {}",
            produced.rows(),
            reference.rows()
        )));
    }
    let mut out = Vec::new();
    for ((name, p), (_, g)) in produced.columns.iter().zip(&reference.columns) {
        let (p, g) = match (p, g) {
            (Column::Num(p), Column::Num(g)) => (p, g),
            (Column::Text(_), Column::Text(_)) => continue,
            _ => return Err(Error::SchemaMismatch(format!("column '{name}' changes type"))),
        };
        let tol = tolerances.iter().find(|(n, _)| n == name).map_or(default, |(_, t)| *t);
        let mut dev = ColumnDeviation {
            name: name.clone(),
            max_abs: 0.0,
            max_rel: 0.0,
            worst_row: 0,
            pass: true,
        };
        let mut worst_excess = f64::NEG_INFINITY;
        for (i, (&pv, &gv)) in p.iter().zip(g).enumerate() {
            if pv.is_nan() && gv.is_nan() {
                continue;
            }
            let d = (pv - gv).abs();
            let d = if d.is_nan() { f64::INFINITY } else { d };
            dev.max_abs = dev.max_abs.max(d);
            if gv != 0.0 {
                dev.max_rel = dev.max_rel.max(d / gv.abs());
            }
            let excess = d - (tol.abs + tol.rel * gv.abs());
            if excess > worst_excess {
                worst_excess = excess;
                dev.worst_row = i;
            }
            if excess > 0.0 {
                dev.pass = false;
            }
        }
        out.push(dev);
    }
    Ok(GoldenReport { columns: out })
}
