//! Number formatting and CSV assembly.

use std::fmt::Write;

/// `x` to `digits` significant digits, fixed-point for moderate magnitudes
/// and scientific otherwise, trailing zeros trimmed.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Ten significant digits, the precision of every emitted float.
pub fn num(x: f64) -> String {
    sig(x, 10)
}

/// A CSV document: `#` comment lines, one header row, data rows, LF endings.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(comments: &[String], columns: &[&str]) -> Self {
        let mut text = String::new();
        for line in comments {
            writeln!(text, "# {line}").expect("string write");
        }
        writeln!(text, "{}", columns.join(",")).expect("string write");
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        writeln!(self.text, "{}", cells.join(",")).expect("string write");
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
