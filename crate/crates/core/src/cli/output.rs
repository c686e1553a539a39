//! CSV and JSON writers for the command outputs.
//!
//! CSV files are comma separated with LF line endings. Commands that emit a
//! summary write it as a second table after one blank line. Reals are
//! written in plain decimal notation with 17 significant digits, which is
//! enough to round-trip every `f64`.

use serde::Serialize;

pub const SIGNIFICANT_DIGITS: i32 = 17;

/// Plain decimal rendering with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn decimal(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return format!("{:.*}", (SIGNIFICANT_DIGITS - 1) as usize, 0.0);
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS - 1 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn optional(v: Option<f64>) -> String {
    v.map(decimal).unwrap_or_default()
}

/// A CSV table: header plus rows of pre-rendered fields.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, out: &mut Vec<u8>) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Tables separated by a single blank line.
pub fn render_csv(tables: &[Table]) -> csv::Result<Vec<u8>> {
    let mut out = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push(b'\n');
        }
        t.write(&mut out)?;
    }
    Ok(out)
}

#[derive(Serialize)]
pub struct JsonDocument<M, R, S> {
    pub meta: M,
    pub records: R,
    pub summary: S,
}

pub fn render_json<T: Serialize>(doc: &T) -> serde_json::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn significant_digits(s: &str) -> usize {
        s.trim_start_matches('-')
            .chars()
            .filter(char::is_ascii_digit)
            .collect::<String>()
            .trim_start_matches('0')
            .len()
    }

    #[test]
    fn decimal_has_enough_digits_and_round_trips() {
        for v in [
            1.0 / 36.0,
            0.5,
            -0.025,
            123456.789,
            1e-9,
            3.0e12,
            f64::MIN_POSITIVE * 1e10,
        ] {
            let s = decimal(v);
            assert!(!s.contains('e'), "{s}");
            assert!(significant_digits(&s) >= 15, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(decimal(0.0), "0.0000000000000000");
        assert_eq!(decimal(0.5), "0.50000000000000000");
        assert_eq!(optional(None), "");
    }

    #[test]
    fn tables_use_lf_and_blank_separator() {
        let mut a = Table::new(vec!["x", "y"]);
        a.push(vec!["1".into(), "v:0.2,0.2,0.6".into()]);
        let mut b = Table::new(vec!["z"]);
        b.push(vec!["2".into()]);
        let out = String::from_utf8(render_csv(&[a, b]).unwrap()).unwrap();
        assert_eq!(out, "x,y\n1,\"v:0.2,0.2,0.6\"\n\nz\n2\n");
    }
}
