//! Simulation log as CSV: fixed header, LF line endings, floats with 17
//! significant digits so every value round-trips exactly.

use std::io::{self, Write};

use lpv_fdi::vehicle::{SimLog, SimRecord};
use sha2::{Digest, Sha256};

pub const HEADER: &str =
    "k,t,v_x,u,y_yawrate,y_lat,y_head,phi,kappa,f_true,r_lpv,r_lti,synth_time_s";

/// Columns after `k`, in header order.
pub const FLOAT_COLUMNS: usize = 12;

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn row_values(r: &SimRecord) -> [f64; FLOAT_COLUMNS] {
    [
        r.t,
        r.v_x,
        r.u,
        r.y[0],
        r.y[1],
        r.y[2],
        r.phi,
        r.kappa,
        r.f_true,
        r.r_lpv,
        r.r_lti,
        r.synth_time_s,
    ]
}

/// One parsed data row: `k` and the float columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub k: usize,
    pub values: [f64; FLOAT_COLUMNS],
}

impl Row {
    pub fn from_record(r: &SimRecord) -> Self {
        Self {
            k: r.k,
            values: row_values(r),
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = self.k.to_string();
        for v in &self.values {
            line.push(',');
            line.push_str(&format_float(*v));
        }
        line
    }
}

pub fn write<W: Write>(out: &mut W, log: &SimLog) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in &log.records {
        writeln!(out, "{}", Row::from_record(r).to_line())?;
    }
    Ok(())
}

pub fn render(log: &SimLog) -> String {
    let mut buf = Vec::new();
    write(&mut buf, log).expect("writing to memory");
    String::from_utf8(buf).expect("ASCII output")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

pub fn parse(text: &str) -> Result<Vec<Row>, ParseError> {
    let mut lines = text.split_terminator('\n');
    match lines.next() {
        Some(HEADER) => {}
        _ => {
            return Err(ParseError {
                line: 1,
                message: "unexpected header".into(),
            })
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let err = |message: String| ParseError { line: i + 2, message };
            let mut fields = line.split(',');
            let k = fields
                .next()
                .unwrap_or_default()
                .parse()
                .map_err(|e| err(format!("sample index: {e}")))?;
            let mut values = [0.0; FLOAT_COLUMNS];
            for (c, slot) in values.iter_mut().enumerate() {
                let field = fields
                    .next()
                    .ok_or_else(|| err(format!("missing column {}", c + 2)))?;
                *slot = field.parse().map_err(|e| err(format!("column {}: {e}", c + 2)))?;
            }
            if fields.next().is_some() {
                return Err(err("too many columns".into()));
            }
            Ok(Row { k, values })
        })
        .collect()
}

pub fn serialize(rows: &[Row]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

/// SHA-256 of the CSV with the wall-clock column removed, so the digest
/// depends only on the deterministic outputs.
pub fn digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    for line in text.split_terminator('\n') {
        let kept = line.rsplit_once(',').map_or(line, |(head, _)| head);
        hasher.update(kept.as_bytes());
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_value_formatting() {
        assert_eq!(format_float(0.1 * std::f64::consts::PI / 180.0), "1.7453292519943296e-3");
        assert_eq!(format_float(0.0), "0.0000000000000000e0");
        assert_eq!(format_float(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = format!(
            "{HEADER}\n3,{}\n",
            [0.1, 1.0 / 3.0, -1e-300, 5e300, 0.0, -0.0, 1.0, 2.0, 3.0, 4.0, 5.0, f64::MIN_POSITIVE]
                .map(format_float)
                .join(",")
        );
        assert_eq!(serialize(&parse(&text).unwrap()), text);
    }

    #[test]
    fn header_only() {
        let text = format!("{HEADER}\n");
        assert!(parse(&text).unwrap().is_empty());
        assert_eq!(serialize(&[]), text);
    }

    #[test]
    fn digest_ignores_timing_column() {
        let a = format!("{HEADER}\n0,1,2,3,4,5,6,7,8,9,10,11,0.5\n");
        let b = format!("{HEADER}\n0,1,2,3,4,5,6,7,8,9,10,11,0.7\n");
        let c = format!("{HEADER}\n0,1,2,3,4,5,6,7,8,9,10,12,0.5\n");
        assert_eq!(digest(&a), digest(&b));
        assert_ne!(digest(&a), digest(&c));
    }

    #[test]
    fn malformed_rows_are_located() {
        let text = format!("{HEADER}\n0,1\n");
        assert_eq!(parse(&text).unwrap_err().line, 2);
    }
}
