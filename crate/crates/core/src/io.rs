//! Shared output conventions: CSV with a single header row and LF line
//! endings, floats at nine significant digits.

use std::io::Write;

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Formats `x` with nine significant digits in positional notation.
///
/// The output depends only on the bit pattern of `x`, which is what makes
/// CSV bodies byte-stable across runs.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Round first so that e.g. 9.999999999 picks the right exponent.
    let sci = format!("{x:.8e}");
    let (_, exp) = sci
        .split_once('e')
        .expect("scientific notation has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}
