//! Deterministic text formatting for CSV and JSON reports.

/// 17 significant digits in scientific notation; round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Joins cells with `,` and ends the line with `\n`.
pub fn csv_line<I, S>(cells: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut line = cells.into_iter().map(|c| c.as_ref().to_string()).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}
