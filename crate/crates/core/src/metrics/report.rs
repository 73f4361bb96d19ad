use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker written in the CSV `value` column for undefined metrics.
pub const UNDEFINED: &str = "undefined";

/// One metric cell: `(arm, head, metric, stratum, value, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub arm: String,
    pub head: String,
    pub metric: String,
    pub stratum: String,
    pub value: Option<f64>,
    pub n: u64,
}

impl ReportRow {
    pub fn new(
        arm: impl Into<String>,
        head: impl Into<String>,
        metric: impl Into<String>,
        stratum: impl Into<String>,
        value: Option<f64>,
        n: u64,
    ) -> Self {
        Self {
            arm: arm.into(),
            head: head.into(),
            metric: metric.into(),
            stratum: stratum.into(),
            value: value.filter(|v| v.is_finite()),
            n,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["arm", "head", "metric", "stratum", "value", "n"])
        .map_err(fmt)?;
    for r in rows {
        let value = r.value.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string());
        w.write_record([
            r.arm.as_str(),
            r.head.as_str(),
            r.metric.as_str(),
            r.stratum.as_str(),
            value.as_str(),
            r.n.to_string().as_str(),
        ])
        .map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(fmt)?;
        if rec.len() != 6 {
            return Err(Error::Format(format!("report row has {} columns", rec.len())));
        }
        let value = match &rec[4] {
            UNDEFINED => None,
            v => Some(v.parse::<f64>().map_err(|e| Error::Format(e.to_string()))?),
        };
        rows.push(ReportRow {
            arm: rec[0].to_string(),
            head: rec[1].to_string(),
            metric: rec[2].to_string(),
            stratum: rec[3].to_string(),
            value,
            n: rec[5].parse().map_err(|e: std::num::ParseIntError| Error::Format(e.to_string()))?,
        });
    }
    Ok(rows)
}

/// JSON array with the same fields; undefined values are `null`.
pub fn write_json<W: Write>(rows: &[ReportRow], mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, rows)?;
    writer
        .write_all(b"\n")
        .map_err(|e| Error::Format(e.to_string()))
}
