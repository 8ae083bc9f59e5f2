//! CSV rendering of experiment rows.

use std::io::Write;

use crate::error::Result;
use crate::evalbench::ExperimentRow;

pub const CSV_HEADER: &str =
    "metric,sweep_axis,sweep_value,trials,accuracy,mean_rmse_pr,mean_eval_time_s,index_build_time_s";

/// Columns that hold wall-clock measurements and vary between runs.
pub const TIMING_COLUMNS: [usize; 2] = [6, 7];

/// `printf("%.6g")`-style rendering: six significant digits, trailing zeros
/// dropped, exponent form outside `[1e-4, 1e6)`.
pub fn format_sig6(v: f64) -> String {
    const SIG: i32 = 6;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..SIG).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_row(row: &ExperimentRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        row.metric.name(),
        row.sweep_axis.name(),
        format_sig6(row.sweep_value),
        row.trials,
        format_sig6(row.accuracy),
        format_sig6(row.mean_rmse_pr),
        format_sig6(row.mean_eval_time_s),
        format_sig6(row.index_build_time_s),
    )
}

pub fn render_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format_row(row));
        out.push('\n');
    }
    out
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], mut w: W) -> Result<()> {
    w.write_all(render_csv(rows).as_bytes())?;
    Ok(())
}

/// Drops the timing columns so two reports can be compared for replay.
pub fn strip_timing(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(i, _)| !TIMING_COLUMNS.contains(i))
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
