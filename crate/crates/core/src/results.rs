//! Result records and their JSON / CSV serialisation.
//!
//! Output is deterministic: keys keep a fixed order and floating-point values
//! are printed with nine significant digits, so identical records always
//! produce identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::nn::{MaskMode, ScaleMode};

/// One row of experiment output. The configuration fields are enough to
/// re-run the measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: String,
    pub lambda_frozen: usize,
    pub drop_prob: f64,
    pub passes: usize,
    pub seed: u64,
    pub mode: MaskMode,
    pub scale_mode: ScaleMode,
    pub n_inputs: Option<usize>,
    pub accuracy: Option<f64>,
    pub nll: Option<f64>,
    pub mean_entropy: Option<f64>,
    pub std_entropy: Option<f64>,
    pub angle: Option<f64>,
    pub id_mean_entropy: Option<f64>,
    pub ood_mean_entropy: Option<f64>,
    pub auroc: Option<f64>,
    pub flops_frozen: u64,
    pub flops_stochastic: u64,
    pub flops_grand_total: u64,
    pub gflops: f64,
    pub wall_time_ms: Option<f64>,
}

enum Value {
    Int(u64),
    Float(f64),
    Str(String),
    Null,
}

fn opt_f(v: Option<f64>) -> Value {
    v.map_or(Value::Null, Value::Float)
}

impl ResultRecord {
    /// A record with the configuration filled in and every metric empty.
    pub fn new(command: &str, mc: &crate::mc::McConfig) -> Self {
        ResultRecord {
            command: command.to_string(),
            lambda_frozen: mc.lambda_frozen,
            drop_prob: mc.drop_prob,
            passes: mc.passes,
            seed: mc.seed,
            mode: mc.mode,
            scale_mode: mc.scale_mode,
            n_inputs: None,
            accuracy: None,
            nll: None,
            mean_entropy: None,
            std_entropy: None,
            angle: None,
            id_mean_entropy: None,
            ood_mean_entropy: None,
            auroc: None,
            flops_frozen: 0,
            flops_stochastic: 0,
            flops_grand_total: 0,
            gflops: 0.0,
            wall_time_ms: None,
        }
    }

    /// The inference settings echoed by this record.
    pub fn mc_config(&self) -> crate::mc::McConfig {
        crate::mc::McConfig {
            passes: self.passes,
            lambda_frozen: self.lambda_frozen,
            drop_prob: self.drop_prob,
            mode: self.mode,
            scale_mode: self.scale_mode,
            seed: self.seed,
            keep_passes: false,
        }
    }

    pub fn set_flops(&mut self, report: &crate::analysis::FlopsReport) {
        self.flops_frozen = report.frozen_total;
        self.flops_stochastic = report.stochastic_total;
        self.flops_grand_total = report.grand_total;
        self.gflops = report.grand_total as f64 / 1e9;
    }

    fn fields(&self) -> Vec<(&'static str, Value)> {
        vec![
            ("command", Value::Str(self.command.clone())),
            ("lambda_frozen", Value::Int(self.lambda_frozen as u64)),
            ("drop_prob", Value::Float(self.drop_prob)),
            ("passes", Value::Int(self.passes as u64)),
            ("seed", Value::Int(self.seed)),
            ("mode", Value::Str(self.mode.to_string())),
            ("scale_mode", Value::Str(self.scale_mode.to_string())),
            ("n_inputs", self.n_inputs.map_or(Value::Null, |n| Value::Int(n as u64))),
            ("accuracy", opt_f(self.accuracy)),
            ("nll", opt_f(self.nll)),
            ("mean_entropy", opt_f(self.mean_entropy)),
            ("std_entropy", opt_f(self.std_entropy)),
            ("angle", opt_f(self.angle)),
            ("id_mean_entropy", opt_f(self.id_mean_entropy)),
            ("ood_mean_entropy", opt_f(self.ood_mean_entropy)),
            ("auroc", opt_f(self.auroc)),
            ("flops_frozen", Value::Int(self.flops_frozen)),
            ("flops_stochastic", Value::Int(self.flops_stochastic)),
            ("flops_grand_total", Value::Int(self.flops_grand_total)),
            ("gflops", Value::Float(self.gflops)),
            ("wall_time_ms", opt_f(self.wall_time_ms)),
        ]
    }
}

/// `printf("%.9g")`: nine significant digits, trailing zeros removed,
/// scientific notation outside `[1e-4, 1e9)`.
pub fn format_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn json_value(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(f) if f.is_finite() => format_g9(*f),
        Value::Float(_) | Value::Null => "null".into(),
        Value::Str(s) => serde_json::to_string(s).expect("string serialises"),
    }
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_g9(*f),
        Value::Str(s) => s.clone(),
        Value::Null => String::new(),
    }
}

/// JSON array of flat objects, one per record, keys in declaration order.
pub fn to_json(records: &[ResultRecord]) -> String {
    let mut out = String::from("[\n");
    for (i, r) in records.iter().enumerate() {
        let body: Vec<String> = r
            .fields()
            .iter()
            .map(|(k, v)| format!("    \"{k}\": {}", json_value(v)))
            .collect();
        out.push_str("  {\n");
        out.push_str(&body.join(",\n"));
        out.push_str("\n  }");
        if i + 1 < records.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

/// Header plus one row per record, CRLF line endings, RFC 4180 quoting.
pub fn to_csv(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(vec![]);
    let csv_err = |e: csv::Error| Error::data(format!("csv: {e}"));
    if let Some(first) = records.first() {
        w.write_record(first.fields().iter().map(|(k, _)| *k)).map_err(csv_err)?;
    }
    for r in records {
        w.write_record(r.fields().iter().map(|(_, v)| csv_value(v))).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::data(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn render(records: &[ResultRecord], format: OutputFormat) -> Result<String> {
    if records.is_empty() {
        return Err(Error::data("no result records to write"));
    }
    match format {
        OutputFormat::Json => Ok(to_json(records)),
        OutputFormat::Csv => to_csv(records),
    }
}

pub fn emit_results(records: &[ResultRecord], format: OutputFormat, path: impl AsRef<Path>) -> Result<()> {
    let text = render(records, format)?;
    ensure_parent(path.as_ref())?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Create the directory that will hold `path`, if it names one.
pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(std::fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::McConfig;

    fn record(i: usize) -> ResultRecord {
        let mut r = ResultRecord::new("predict", &McConfig::new(25, i, 0.1, 7));
        r.accuracy = Some(0.987654321987);
        r.nll = Some(1.0 / 3.0);
        r.angle = Some(90.0);
        r
    }

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (500.0, "500"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (2.302585092994046, "2.30258509"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-0.5, "-0.5"),
            (9.9999999999, "10"),
            (6.5e-3, "0.0065"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g9(v), want, "{v}");
        }
    }

    #[test]
    fn json_shape_and_nulls() {
        let text = to_json(&[record(0)]);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let arr = v.as_array().unwrap();
        assert_eq!(arr.len(), 1);
        assert_eq!(arr[0]["passes"], 25);
        assert!(arr[0]["auroc"].is_null());
        assert_eq!(arr[0]["accuracy"].as_f64().unwrap(), 0.987654322);
        let keys: Vec<&str> = text.lines().filter_map(|l| l.trim().split('"').nth(1)).collect();
        assert_eq!(keys[0], "command");
        assert_eq!(*keys.last().unwrap(), "wall_time_ms");
    }

    #[test]
    fn csv_rows_and_quoting() {
        let mut r = record(1);
        r.command = "say \"hi\", twice".into();
        let text = to_csv(&[record(0), r]).unwrap();
        let lines: Vec<&str> = text.split("\r\n").filter(|l| !l.is_empty()).collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("\"say \"\"hi\"\", twice\",1,"));
        assert!(lines[1].contains(",,"));
    }

    #[test]
    fn byte_identical_on_repeat() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record(0), record(2)];
        for fmt in [OutputFormat::Json, OutputFormat::Csv] {
            let (a, b) = (dir.path().join("a"), dir.path().join("b"));
            emit_results(&recs, fmt, &a).unwrap();
            emit_results(&recs, fmt, &b).unwrap();
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
        assert!(render(&[], OutputFormat::Json).is_err());
    }
}
