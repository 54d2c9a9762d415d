//! CSV formatting shared by every exporter.

/// 17 significant digits in scientific notation, `.` decimal separator.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| fmt17(*v))
        .collect::<Vec<_>>()
        .join(",")
}
