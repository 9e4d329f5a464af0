//! Fracture sets and network labeling.

use super::mesh::FineMesh;
use super::{cross, dist, GEOM_REL_TOL};
use crate::{Error, Result};

/// How fractures relate to the fine mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractureMode {
    /// Discrete fracture model: every fracture segment coincides with a mesh
    /// facet; matrix–matrix flux across those facets is replaced by
    /// matrix–fracture transfer.
    Dfm,
    /// Embedded fracture model: fractures are independent of the mesh and
    /// coupled through clipped sub-segments.
    Efm,
}

/// A straight fracture segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Segment {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        dist(self.a, self.b)
    }

    pub fn midpoint(&self) -> [f64; 2] {
        [(self.a[0] + self.b[0]) / 2.0, (self.a[1] + self.b[1]) / 2.0]
    }

    /// Distance from `p` to this segment.
    pub fn distance_to_point(&self, p: [f64; 2]) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        if len2 == 0.0 {
            return dist(self.a, p);
        }
        let t = (((p[0] - self.a[0]) * d[0] + (p[1] - self.a[1]) * d[1]) / len2).clamp(0.0, 1.0);
        dist([self.a[0] + t * d[0], self.a[1] + t * d[1]], p)
    }
}

/// Returns a contact point of two segments if they touch or cross within
/// `tol`: a proper crossing returns the intersection point, an endpoint or
/// T-contact returns the touching point, and `None` means the segments stay
/// farther than `tol` apart.
pub(crate) fn segment_contact(s: &Segment, t: &Segment, tol: f64) -> Option<[f64; 2]> {
    // Proper crossing via orientation tests.
    let d1 = cross(t.a, t.b, s.a);
    let d2 = cross(t.a, t.b, s.b);
    let d3 = cross(s.a, s.b, t.a);
    let d4 = cross(s.a, s.b, t.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        let u = d1 / (d1 - d2);
        return Some([s.a[0] + u * (s.b[0] - s.a[0]), s.a[1] + u * (s.b[1] - s.a[1])]);
    }
    // Endpoint / T / near contact.
    let candidates = [
        (t.distance_to_point(s.a), s.a),
        (t.distance_to_point(s.b), s.b),
        (s.distance_to_point(t.a), t.a),
        (s.distance_to_point(t.b), t.b),
    ];
    candidates
        .iter()
        .filter(|(d, _)| *d <= tol)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|&(_, p)| p)
}

/// A fracture set with connected-component network labels.
#[derive(Debug, Clone)]
pub struct FractureGeometry {
    pub mode: FractureMode,
    pub segments: Vec<Segment>,
    /// Network label per segment, in `0..n_networks`.
    pub network_id: Vec<usize>,
    pub n_networks: usize,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Deterministic: smaller root wins.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Labels fracture networks: segments sharing an endpoint or crossing (within
/// a tolerance of 1e-9 of the bounding diameter) belong to one network.
/// Labels are dense, 0-based, and ordered by the lowest segment index in each
/// network.
pub fn label_networks(segments: Vec<Segment>, mode: FractureMode) -> Result<FractureGeometry> {
    label_networks_with_hints(segments, &[], mode)
}

/// Like [`label_networks`], but additionally merges segments that carry the
/// same external network hint (from a mesh file's FRACTURES section).
pub fn label_networks_with_hints(
    segments: Vec<Segment>,
    hints: &[Option<usize>],
    mode: FractureMode,
) -> Result<FractureGeometry> {
    if segments.is_empty() {
        return Err(Error::Geometry("empty fracture segment list".into()));
    }
    let diameter = bounding_diameter(&segments);
    let tol = GEOM_REL_TOL * diameter.max(f64::MIN_POSITIVE);
    let mut uf = UnionFind::new(segments.len());
    for i in 0..segments.len() {
        for j in (i + 1)..segments.len() {
            if segment_contact(&segments[i], &segments[j], tol).is_some() {
                uf.union(i, j);
            }
        }
    }
    if !hints.is_empty() {
        let mut first_with_hint: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        for (i, hint) in hints.iter().enumerate() {
            if let Some(h) = hint {
                match first_with_hint.get(h) {
                    Some(&j) => uf.union(i, j),
                    None => {
                        first_with_hint.insert(*h, i);
                    }
                }
            }
        }
    }
    let mut label_of_root: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut network_id = Vec::with_capacity(segments.len());
    for i in 0..segments.len() {
        let root = uf.find(i);
        let next = label_of_root.len();
        let label = *label_of_root.entry(root).or_insert(next);
        network_id.push(label);
    }
    let n_networks = label_of_root.len();
    Ok(FractureGeometry {
        mode,
        segments,
        network_id,
        n_networks,
    })
}

fn bounding_diameter(segments: &[Segment]) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in segments {
        for p in [s.a, s.b] {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
    }
    (x1 - x0).hypot(y1 - y0)
}

impl FractureGeometry {
    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    /// Total length of network `l`.
    pub fn network_length(&self, l: usize) -> f64 {
        self.segments
            .iter()
            .zip(&self.network_id)
            .filter(|(_, &net)| net == l)
            .map(|(s, _)| s.length())
            .sum()
    }

    /// DFM conformity: matches every segment to exactly one mesh facet
    /// (endpoints within 1e-9 of the domain diameter). Conformity is
    /// validated, never repaired; a segment matching no facet, or two
    /// segments claiming the same facet, is an error.
    pub fn match_to_facets(&self, mesh: &FineMesh) -> Result<Vec<usize>> {
        if self.mode != FractureMode::Dfm {
            return Err(Error::Geometry("facet matching requires DFM mode".into()));
        }
        let tol = GEOM_REL_TOL * mesh.domain.diameter();
        let mut used = vec![false; mesh.n_facets()];
        let mut matched = Vec::with_capacity(self.segments.len());
        for (si, seg) in self.segments.iter().enumerate() {
            let mut found = None;
            for (fi, facet) in mesh.facets.iter().enumerate() {
                let (pa, pb) = (mesh.vertices[facet.v[0]], mesh.vertices[facet.v[1]]);
                let direct = dist(seg.a, pa) <= tol && dist(seg.b, pb) <= tol;
                let flipped = dist(seg.a, pb) <= tol && dist(seg.b, pa) <= tol;
                if direct || flipped {
                    found = Some(fi);
                    break;
                }
            }
            match found {
                None => {
                    return Err(Error::Geometry(format!(
                        "fracture segment {si} (({:.6},{:.6})-({:.6},{:.6})) does not conform to any mesh facet",
                        seg.a[0], seg.a[1], seg.b[0], seg.b[1]
                    )))
                }
                Some(fi) => {
                    if used[fi] {
                        return Err(Error::Geometry(format!(
                            "fracture segment {si} duplicates facet {fi} already claimed by another segment"
                        )));
                    }
                    used[fi] = true;
                    matched.push(fi);
                }
            }
        }
        Ok(matched)
    }
}
