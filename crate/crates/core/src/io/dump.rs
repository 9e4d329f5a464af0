//! Text artifacts for the pipeline stages and debugging: sparse matrices
//! (`row col value`), vectors (`index value`), basis functions and
//! trajectory CSVs. Floating-point values are written with 17 significant
//! digits, so every artifact round-trips bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::nlmc::{BasisFunction, BasisKind};
use crate::sim::Trajectory;
use crate::{Error, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Writes a sparse matrix as `row col value` lines under a dimension header.
pub fn write_matrix(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut s = String::with_capacity(32 * m.nnz() + 64);
    let sym = if m.symmetric { "symmetric" } else { "general" };
    let _ = writeln!(s, "# {} {} {} {}", m.nrows(), m.ncols(), m.nnz(), sym);
    for (r, c, v) in m.iter() {
        let _ = writeln!(s, "{r} {c} {v:.16e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<SparseMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut header: Option<(usize, usize, bool)> = None;
    let mut tb: Option<TripletBuilder> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if let Some(h) = raw.strip_prefix('#') {
            if header.is_none() {
                let parts: Vec<&str> = h.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(parse_err(path, line_no, "malformed matrix header"));
                }
                let nrows = parts[0].parse().map_err(|_| {
                    parse_err(path, line_no, "bad row count in matrix header")
                })?;
                let ncols = parts[1].parse().map_err(|_| {
                    parse_err(path, line_no, "bad column count in matrix header")
                })?;
                header = Some((nrows, ncols, parts[3] == "symmetric"));
                tb = Some(TripletBuilder::new(nrows, ncols));
            }
            continue;
        }
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tb = tb
            .as_mut()
            .ok_or_else(|| parse_err(path, line_no, "matrix entries before the header"))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(path, line_no, "expected `row col value`"));
        }
        let r: usize = parts[0]
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad row index"))?;
        let c: usize = parts[1]
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad column index"))?;
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad value"))?;
        let (nrows, ncols, _) = header.unwrap();
        if r >= nrows || c >= ncols {
            return Err(parse_err(
                path,
                line_no,
                format!("entry ({r},{c}) outside the declared {nrows}x{ncols} shape"),
            ));
        }
        tb.push(r, c, v);
    }
    let (_, _, sym) = header.ok_or_else(|| parse_err(path, 1, "missing matrix header"))?;
    Ok(tb.unwrap().build(sym))
}

/// Writes a vector as `index value` lines under a length header.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(24 * v.len() + 16);
    let _ = writeln!(s, "# {}", v.len());
    for (i, x) in v.iter().enumerate() {
        let _ = writeln!(s, "{i} {x:.16e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out: Option<Vec<f64>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if let Some(h) = raw.strip_prefix('#') {
            if out.is_none() {
                let n: usize = h
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(path, line_no, "bad vector header"))?;
                out = Some(vec![0.0; n]);
            }
            continue;
        }
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let out = out
            .as_mut()
            .ok_or_else(|| parse_err(path, line_no, "vector entries before the header"))?;
        let (i, v) = line
            .split_once(' ')
            .ok_or_else(|| parse_err(path, line_no, "expected `index value`"))?;
        let i: usize = i
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad index"))?;
        if i >= out.len() {
            return Err(parse_err(path, line_no, format!("index {i} out of range")));
        }
        out[i] = v
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad value"))?;
    }
    out.ok_or_else(|| parse_err(path, 1, "missing vector header"))
}

/// Debug dump of one basis: `basis_<cell>_<m|f>_<network>.txt` with
/// `index value` lines over the basis support (global fine flow indices).
pub fn write_basis(dir: &Path, basis: &BasisFunction, network: usize) -> Result<()> {
    let kind = match basis.kind {
        BasisKind::Matrix => "m",
        BasisKind::Fracture { .. } => "f",
    };
    let name = format!("basis_{}_{}_{}.txt", basis.owner, kind, network);
    let mut s = String::with_capacity(24 * basis.indices.len());
    for (&i, &v) in basis.indices.iter().zip(&basis.values) {
        let _ = writeln!(s, "{i} {v:.16e}");
    }
    std::fs::write(dir.join(name), s)?;
    Ok(())
}

/// Trajectory export: `step,time,dof_id,value` rows for every state.
pub fn write_trajectory_csv(path: &Path, t: &Trajectory) -> Result<()> {
    let n = t.states.first().map_or(0, Vec::len);
    let mut s = String::with_capacity(32 * (t.states.len() * n + 1));
    s.push_str("step,time,dof_id,value\n");
    for (k, state) in t.states.iter().enumerate() {
        for (d, v) in state.iter().enumerate() {
            let _ = writeln!(s, "{k},{:.16e},{d},{v:.16e}", t.times[k]);
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path)?;
    let mut times: Vec<f64> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("step,") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(parse_err(path, line_no, "expected `step,time,dof_id,value`"));
        }
        let k: usize = parts[0]
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad step"))?;
        let time: f64 = parts[1]
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad time"))?;
        let d: usize = parts[2]
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad dof id"))?;
        let v: f64 = parts[3]
            .parse()
            .map_err(|_| parse_err(path, line_no, "bad value"))?;
        if k == states.len() {
            states.push(Vec::new());
            times.push(time);
        } else if k > states.len() {
            return Err(parse_err(path, line_no, format!("step {k} out of order")));
        }
        if d != states[k].len() {
            return Err(parse_err(
                path,
                line_no,
                format!("dof id {d} out of order within step {k}"),
            ));
        }
        states[k].push(v);
    }
    if states.is_empty() {
        return Err(parse_err(path, 1, "empty trajectory"));
    }
    Ok(Trajectory { times, states })
}

/// Wall-time records, one `name = seconds` line each. Kept separate from the
/// numeric artifacts so reruns stay byte-identical.
pub fn write_timing(path: &Path, entries: &[(String, f64)]) -> Result<()> {
    let mut s = String::new();
    for (name, secs) in entries {
        let _ = writeln!(s, "{name} = {secs:.6}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_timing(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (name, secs) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, idx + 1, "expected `name = seconds`"))?;
        let secs: f64 = secs
            .trim()
            .parse()
            .map_err(|_| parse_err(path, idx + 1, "bad seconds value"))?;
        out.push((name.trim().to_string(), secs));
    }
    Ok(out)
}
