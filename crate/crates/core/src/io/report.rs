//! Accuracy-report rendering: one row per (oversampling layers, snapshot)
//! pair, as an aligned text table and as a full-precision CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Oversampling layers used for the coarse model.
    pub layers: usize,
    /// Time-step index of the snapshot.
    pub step: usize,
    pub time: f64,
    /// Relative L2 error of the coarse matrix pressure, in percent.
    pub err_matrix_pct: f64,
    /// Same for the fracture pressure; absent when there are no fractures.
    pub err_fracture_pct: Option<f64>,
    pub dof_fine: usize,
    pub dof_coarse: usize,
}

/// Renders rows as an aligned table for the terminal and report.txt.
pub fn format_report(rows: &[ReportRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>5} {:>12} {:>14} {:>14} {:>9} {:>9}",
        "layers", "step", "time", "err_m (%)", "err_f (%)", "dof_fine", "dof_c"
    );
    for r in rows {
        let err_f = match r.err_fracture_pct {
            Some(e) => format!("{e:>14.6}"),
            None => format!("{:>14}", "-"),
        };
        let _ = writeln!(
            s,
            "{:>6} {:>5} {:>12.6} {:>14.6} {} {:>9} {:>9}",
            r.layers, r.step, r.time, r.err_matrix_pct, err_f, r.dof_fine, r.dof_coarse
        );
    }
    s
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut s = String::from("layers,step,time,err_matrix_pct,err_fracture_pct,dof_fine,dof_coarse\n");
    for r in rows {
        let err_f = match r.err_fracture_pct {
            Some(e) => format!("{e:.16e}"),
            None => String::new(),
        };
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{},{},{}",
            r.layers, r.step, r.time, r.err_matrix_pct, err_f, r.dof_fine, r.dof_coarse
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path)?;
    let parse_err = |line: usize, msg: &str| Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    };
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("layers,") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(parse_err(line_no, "expected 7 comma-separated fields"));
        }
        let err_fracture_pct = if parts[4].is_empty() {
            None
        } else {
            Some(
                parts[4]
                    .parse()
                    .map_err(|_| parse_err(line_no, "bad fracture error"))?,
            )
        };
        rows.push(ReportRow {
            layers: parts[0]
                .parse()
                .map_err(|_| parse_err(line_no, "bad layers"))?,
            step: parts[1]
                .parse()
                .map_err(|_| parse_err(line_no, "bad step"))?,
            time: parts[2]
                .parse()
                .map_err(|_| parse_err(line_no, "bad time"))?,
            err_matrix_pct: parts[3]
                .parse()
                .map_err(|_| parse_err(line_no, "bad matrix error"))?,
            err_fracture_pct,
            dof_fine: parts[5]
                .parse()
                .map_err(|_| parse_err(line_no, "bad fine dof count"))?,
            dof_coarse: parts[6]
                .parse()
                .map_err(|_| parse_err(line_no, "bad coarse dof count"))?,
        });
    }
    Ok(rows)
}
