//! Fixed-format numeric output shared by the CSV/JSON writers.

use std::fmt::Write as _;

/// 17 significant digits, round-trip exact and platform independent.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Collapse -0.0 so byte-identical reruns don't depend on sign of zero.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Renders a CSV table with a header row.
pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
        assert_eq!(fmt_f64(-0.0), fmt_f64(0.0));
    }
}
