//! Result record shared by every experiment and its three serializations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use satlab_core::Verdict;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
        }
    }
}

/// Outcome of one check. `margin > 0` means the check holds with room to
/// spare; `null` in JSON when no margin exists (e.g. no candidate found).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRow {
    pub check: String,
    pub verdict: Verdict,
    pub margin: f64,
    pub detail: String,
}

impl VerdictRow {
    pub fn from_margin(check: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
            margin,
            detail: detail.into(),
        }
    }

    pub fn with_verdict(check: impl Into<String>, verdict: Verdict, margin: f64, detail: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            verdict,
            margin,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    /// SHA-256 of the config bytes followed by the effective CLI overrides.
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Evidence {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

impl Evidence {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns.iter().map(|(n, u)| Column::new(n, u)).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary
            .insert(key.into(), serde_json::to_value(value).expect("serializable summary"));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub experiment: String,
    pub provenance: Provenance,
    pub wall_time_s: f64,
    pub config: serde_json::Value,
    pub evidence: Evidence,
    pub verdicts: Vec<VerdictRow>,
}

impl ResultRecord {
    pub fn failed(&self) -> bool {
        self.verdicts.iter().any(|v| v.verdict == Verdict::Fail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    #[value(name = "gnuplot-dat")]
    GnuplotDat,
}

/// File name and contents for each artifact of `record` in `format`.
pub fn render(record: &ResultRecord, format: Format) -> Vec<(String, String)> {
    let stem = &record.experiment;
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(record).expect("record serializes");
            s.push('\n');
            vec![(format!("{stem}.json"), s)]
        }
        Format::Csv => vec![
            (format!("{stem}.csv"), evidence_csv(&record.evidence)),
            (format!("{stem}.verdicts.csv"), verdicts_csv(&record.verdicts)),
        ],
        Format::GnuplotDat => vec![(format!("{stem}.dat"), gnuplot(record))],
    }
}

fn number(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn evidence_csv(e: &Evidence) -> String {
    let mut out = e
        .columns
        .iter()
        .map(|c| csv_field(&format!("{} [{}]", c.name, c.unit)))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in &e.rows {
        out.push_str(&row.iter().map(|v| number(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn verdicts_csv(rows: &[VerdictRow]) -> String {
    let mut out = String::from("check,verdict,margin [1],detail\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_field(&r.check),
            verdict_name(r.verdict),
            number(r.margin),
            csv_field(&r.detail)
        );
    }
    out
}

fn gnuplot(record: &ResultRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# experiment: {}", record.experiment);
    let _ = writeln!(out, "# schema_version: {}", record.schema_version);
    let _ = writeln!(out, "# config_hash: {}", record.provenance.config_hash);
    let _ = writeln!(out, "# code_version: {}", record.provenance.code_version);
    let _ = writeln!(out, "# seed: {}", record.provenance.seed);
    for r in &record.verdicts {
        let _ = writeln!(
            out,
            "# verdict: {} {} margin={} {}",
            r.check,
            verdict_name(r.verdict),
            number(r.margin),
            r.detail
        );
    }
    let cols = record
        .evidence
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}:{}[{}]", i + 1, c.name, c.unit))
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "# columns: {cols}");
    for row in &record.evidence.rows {
        out.push_str(&row.iter().map(|v| number(*v)).collect::<Vec<_>>().join(" "));
        out.push('\n');
    }
    out
}

pub fn print_summary(record: &ResultRecord) {
    for r in &record.verdicts {
        println!(
            "{:<14} {:<40} margin {:>12}  {}",
            verdict_name(r.verdict).to_uppercase(),
            r.check,
            number(r.margin),
            r.detail
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultRecord {
        let mut e = Evidence::new(&[("t", "s"), ("norm", "1")]);
        e.push(vec![0.0, 1.0]);
        e.push(vec![0.5, f64::NAN]);
        ResultRecord {
            schema_version: SCHEMA_VERSION,
            experiment: "demo".into(),
            provenance: Provenance {
                config_hash: "abc".into(),
                code_version: "0".into(),
                seed: 1,
            },
            wall_time_s: 0.0,
            config: serde_json::Value::Null,
            evidence: e,
            verdicts: vec![VerdictRow::from_margin("check, one", -1.0, "x")],
        }
    }

    #[test]
    fn csv_header_has_units() {
        let files = render(&sample(), Format::Csv);
        assert!(files[0].1.starts_with("t [s],norm [1]\n"));
        assert!(files[0].1.contains("5e-1,NaN"));
        assert!(files[1].1.contains("\"check, one\",fail,-1e0,x"));
    }

    #[test]
    fn gnuplot_rows_are_numeric() {
        let files = render(&sample(), Format::GnuplotDat);
        for line in files[0].1.lines().filter(|l| !l.starts_with('#')) {
            for tok in line.split_whitespace() {
                assert!(tok.parse::<f64>().is_ok(), "{tok}");
            }
        }
    }

    #[test]
    fn json_is_one_object() {
        let files = render(&sample(), Format::Json);
        let v: serde_json::Value = serde_json::from_str(&files[0].1).unwrap();
        assert!(v.is_object());
        assert_eq!(v["schema_version"], 1);
        assert!(v["evidence"]["rows"][1][1].is_null());
        assert!(sample().failed());
    }
}
