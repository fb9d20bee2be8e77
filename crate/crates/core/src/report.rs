//! Metric reports: named, nested values plus the parameters that produced
//! them.

use std::io::{Read, Write};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

impl ParamValue {
    pub fn list<I, V>(values: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<f64>,
    {
        ParamValue::List(values.into_iter().map(Into::into).collect())
    }

    fn render(&self) -> String {
        match self {
            ParamValue::Number(v) => v.to_string(),
            ParamValue::List(vs) => vs.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            ParamValue::Text(t) => t.clone(),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricNode {
    Value(f64),
    Group(IndexMap<String, MetricNode>),
}

/// Insertion-ordered report. Two reports built by the same code path from
/// the same inputs serialize identically.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    #[serde(default)]
    pub params: IndexMap<String, ParamValue>,
    #[serde(default)]
    pub metadata: IndexMap<String, String>,
    #[serde(default)]
    pub values: IndexMap<String, MetricNode>,
}

impl MetricReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn param(&mut self, key: impl Into<String>, value: impl Into<ParamValue>) -> &mut Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn value(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.values.insert(key.into(), MetricNode::Value(value));
        self
    }

    /// Adds or extends the group at `key`.
    pub fn group(&mut self, key: impl Into<String>) -> &mut IndexMap<String, MetricNode> {
        subgroup(&mut self.values, key)
    }

    /// Looks up a value by `/`-separated path.
    pub fn get(&self, path: &str) -> Option<f64> {
        let mut parts = path.split('/');
        let mut node = self.values.get(parts.next()?)?;
        for part in parts {
            match node {
                MetricNode::Group(map) => node = map.get(part)?,
                MetricNode::Value(_) => return None,
            }
        }
        match node {
            MetricNode::Value(v) => Some(*v),
            MetricNode::Group(_) => None,
        }
    }

    /// Flattened `(path, value)` pairs in insertion order.
    pub fn flatten(&self) -> Vec<(String, f64)> {
        fn walk(prefix: &str, map: &IndexMap<String, MetricNode>, out: &mut Vec<(String, f64)>) {
            for (k, node) in map {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}/{k}")
                };
                match node {
                    MetricNode::Value(v) => out.push((path, *v)),
                    MetricNode::Group(g) => walk(&path, g, out),
                }
            }
        }
        let mut out = Vec::new();
        walk("", &self.values, &mut out);
        out
    }
}

/// Adds or extends the nested group at `key`, replacing a plain value.
pub fn subgroup(
    map: &mut IndexMap<String, MetricNode>,
    key: impl Into<String>,
) -> &mut IndexMap<String, MetricNode> {
    let node = map
        .entry(key.into())
        .or_insert_with(|| MetricNode::Group(IndexMap::new()));
    if let MetricNode::Value(_) = node {
        *node = MetricNode::Group(IndexMap::new());
    }
    match node {
        MetricNode::Group(map) => map,
        MetricNode::Value(_) => unreachable!(),
    }
}

pub fn group_value(map: &mut IndexMap<String, MetricNode>, key: impl Into<String>, value: f64) {
    map.insert(key.into(), MetricNode::Value(value));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Tab-separated `metric<TAB>value` lines, four decimals, with `#`
    /// header lines for the parameterization.
    Tabular,
    /// Pretty-printed JSON.
    Structured,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" | "tabular" => Ok(ReportFormat::Tabular),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(Error::invalid("report format", format!("{other:?}"))),
        }
    }
}

pub fn write_report<W: Write>(
    report: &MetricReport,
    format: ReportFormat,
    mut out: W,
) -> Result<()> {
    match format {
        ReportFormat::Structured => {
            serde_json::to_writer_pretty(&mut out, report).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        ReportFormat::Tabular => {
            writeln!(out, "# report\t{}", report.name)?;
            for (k, v) in &report.params {
                writeln!(out, "# param\t{k}\t{}", v.render())?;
            }
            for (k, v) in &report.metadata {
                writeln!(out, "# meta\t{k}\t{v}")?;
            }
            for (path, value) in report.flatten() {
                writeln!(out, "{path}\t{value:.4}")?;
            }
        }
    }
    Ok(())
}

pub fn read_structured_report<R: Read>(reader: R) -> Result<MetricReport> {
    serde_json::from_reader(reader).map_err(|e| Error::format(e.line(), e.to_string()))
}
