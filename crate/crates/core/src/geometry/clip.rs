//! Clipping of fracture segments against the fine mesh.

use super::mesh::{CellLocator, FineMesh};
use super::{cross, dist};
use crate::{Error, Result};

/// One piece of a clipped segment: the part of the segment lying in one cell.
#[derive(Debug, Clone, Copy)]
pub struct SubSegment {
    pub cell: usize,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub length: f64,
}

/// Splits a segment at every mesh-facet crossing and assigns each piece to
/// the cell containing its midpoint.
///
/// The breakpoint parameters partition `[0, 1]` exactly, so the piece lengths
/// sum to the segment length by construction (each piece lies in its cell's
/// closure). A segment of length ≤ 1e-14 of the domain diameter yields an
/// empty list; endpoints outside the closed domain are an input error.
pub fn clip_segment_to_cells(
    a: [f64; 2],
    b: [f64; 2],
    mesh: &FineMesh,
    locator: &CellLocator,
) -> Result<Vec<SubSegment>> {
    let diam = mesh.domain.diameter();
    let tol = super::GEOM_REL_TOL * diam;
    if !mesh.domain.contains(a, tol) || !mesh.domain.contains(b, tol) {
        return Err(Error::Geometry(format!(
            "segment ({:.6},{:.6})-({:.6},{:.6}) leaves the domain",
            a[0], a[1], b[0], b[1]
        )));
    }
    let len = dist(a, b);
    if len <= 1e-14 * diam {
        return Ok(Vec::new());
    }

    // Collect crossing parameters t along the segment for every facet it
    // meets, including grazing touches and collinear overlaps.
    let mut ts: Vec<f64> = vec![0.0, 1.0];
    let r = [b[0] - a[0], b[1] - a[1]];
    for facet in &mesh.facets {
        let (pa, pb) = (mesh.vertices[facet.v[0]], mesh.vertices[facet.v[1]]);
        let s = [pb[0] - pa[0], pb[1] - pa[1]];
        let denom = r[0] * s[1] - r[1] * s[0];
        let qp = [pa[0] - a[0], pa[1] - a[1]];
        if denom.abs() > 1e-14 * len * facet.length {
            let t = (qp[0] * s[1] - qp[1] * s[0]) / denom;
            let u = (qp[0] * r[1] - qp[1] * r[0]) / denom;
            let (et, eu) = (tol / len, tol / facet.length);
            if t >= -et && t <= 1.0 + et && u >= -eu && u <= 1.0 + eu {
                ts.push(t.clamp(0.0, 1.0));
            }
        } else if cross(a, b, pa).abs() <= tol * len {
            // Collinear: facet endpoints break the segment.
            for p in [pa, pb] {
                let t = ((p[0] - a[0]) * r[0] + (p[1] - a[1]) * r[1]) / (len * len);
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    }

    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
    // Keep the full [0,1] cover after dedup so lengths telescope exactly.
    if ts[0] != 0.0 {
        ts[0] = 0.0;
    }
    let last = ts.len() - 1;
    if ts[last] != 1.0 {
        ts[last] = 1.0;
    }

    let mut pieces: Vec<SubSegment> = Vec::new();
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = 0.5 * (t0 + t1);
        let mp = [a[0] + mid * r[0], a[1] + mid * r[1]];
        let cell = locator.locate(mp).ok_or_else(|| {
            Error::Geometry(format!(
                "no cell contains clipped segment midpoint ({:.6},{:.6})",
                mp[0], mp[1]
            ))
        })?;
        let pa = [a[0] + t0 * r[0], a[1] + t0 * r[1]];
        let pb = [a[0] + t1 * r[0], a[1] + t1 * r[1]];
        let plen = (t1 - t0) * len;
        // Merge grazing touches that do not change the cell.
        match pieces.last_mut() {
            Some(prev) if prev.cell == cell => {
                prev.b = pb;
                prev.length += plen;
            }
            _ => pieces.push(SubSegment {
                cell,
                a: pa,
                b: pb,
                length: plen,
            }),
        }
    }
    Ok(pieces)
}
