//! Fine triangular meshes: construction, validation, text I/O and point
//! location.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Axis-aligned rectangle, used for domains, coarse cells and source regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect { x0, y0, x1, y1 }
    }

    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Closed containment with an absolute slack `tol`.
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }

    /// Open containment (strict inequalities), used for source regions where
    /// placements are stated as e.g. `0.1 < x < 0.15`.
    pub fn contains_open(&self, p: [f64; 2]) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }
}

/// A unique mesh edge with its incident cells.
#[derive(Debug, Clone, Copy)]
pub struct Facet {
    /// Endpoint vertex indices.
    pub v: [usize; 2],
    /// First incident cell (always present).
    pub left: usize,
    /// Second incident cell; `None` on the boundary.
    pub right: Option<usize>,
    pub length: f64,
    pub midpoint: [f64; 2],
}

impl Facet {
    pub fn is_interior(&self) -> bool {
        self.right.is_some()
    }
}

/// Conforming triangular mesh of an axis-aligned rectangular domain.
///
/// Cells are stored with positive orientation (counter-clockwise vertex
/// order); facets are unique edges shared by at most two cells. All derived
/// quantities (areas, centroids, facet lengths and midpoints) are computed at
/// construction and the mesh is immutable afterwards.
#[derive(Debug, Clone)]
pub struct FineMesh {
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    /// The three facet indices of each cell, in local edge order
    /// (v0–v1, v1–v2, v2–v0).
    pub cell_facets: Vec<[usize; 3]>,
    pub cell_area: Vec<f64>,
    pub cell_centroid: Vec<[f64; 2]>,
    pub domain: Rect,
}

impl FineMesh {
    /// Builds a mesh from raw vertex and cell lists, fixing orientation and
    /// deriving facets. Fails on degenerate cells, out-of-range indices, or
    /// an edge shared by more than two cells.
    pub fn from_parts(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>, domain: Rect) -> Result<FineMesh> {
        if domain.width() <= 0.0 || domain.height() <= 0.0 {
            return Err(Error::Geometry("degenerate domain rectangle".into()));
        }
        let mut cells = cells;
        let mut cell_area = Vec::with_capacity(cells.len());
        let mut cell_centroid = Vec::with_capacity(cells.len());
        for (ci, tri) in cells.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= vertices.len() {
                    return Err(Error::Geometry(format!(
                        "cell {ci} references vertex {v} out of range"
                    )));
                }
            }
            let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let signed = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
            if signed < 0.0 {
                tri.swap(1, 2);
            }
            let area = signed.abs();
            if area <= f64::EPSILON * domain.area() {
                return Err(Error::Geometry(format!("cell {ci} is degenerate (area {area:e})")));
            }
            cell_area.push(area);
            cell_centroid.push([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]);
        }

        // Unique edges; first incident cell becomes `left`.
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut cell_facets = vec![[usize::MAX; 3]; cells.len()];
        for (ci, tri) in cells.iter().enumerate() {
            for e in 0..3 {
                let (va, vb) = (tri[e], tri[(e + 1) % 3]);
                let key = (va.min(vb), va.max(vb));
                match edge_map.get(&key) {
                    None => {
                        let (pa, pb) = (vertices[va], vertices[vb]);
                        facets.push(Facet {
                            v: [va, vb],
                            left: ci,
                            right: None,
                            length: super::dist(pa, pb),
                            midpoint: [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0],
                        });
                        edge_map.insert(key, facets.len() - 1);
                        cell_facets[ci][e] = facets.len() - 1;
                    }
                    Some(&fi) => {
                        let facet = &mut facets[fi];
                        if facet.right.is_some() {
                            return Err(Error::Geometry(format!(
                                "facet ({va},{vb}) incident to more than two cells"
                            )));
                        }
                        if facet.left == ci {
                            return Err(Error::Geometry(format!(
                                "cell {ci} repeats edge ({va},{vb})"
                            )));
                        }
                        facet.right = Some(ci);
                        cell_facets[ci][e] = fi;
                    }
                }
            }
        }

        let mesh = FineMesh {
            vertices,
            cells,
            facets,
            cell_facets,
            cell_area,
            cell_centroid,
            domain,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn total_area(&self) -> f64 {
        self.cell_area.iter().sum()
    }

    /// Checks the construction invariants: two distinct incident cells per
    /// interior facet, positive areas, and total area matching the domain.
    pub fn validate(&self) -> Result<()> {
        for (fi, f) in self.facets.iter().enumerate() {
            if let Some(r) = f.right {
                if r == f.left {
                    return Err(Error::Geometry(format!(
                        "facet {fi} lists the same cell on both sides"
                    )));
                }
            }
        }
        let total = self.total_area();
        let darea = self.domain.area();
        if (total - darea).abs() > 1e-10 * darea {
            return Err(Error::Geometry(format!(
                "cell areas sum to {total} but the domain area is {darea}"
            )));
        }
        Ok(())
    }

    /// Signed doubled area of triangle (a, b, c).
    fn tri_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }

    /// Closed point-in-cell test with tolerance relative to the cell size.
    pub fn cell_contains(&self, ci: usize, p: [f64; 2]) -> bool {
        let [a, b, c] = [
            self.vertices[self.cells[ci][0]],
            self.vertices[self.cells[ci][1]],
            self.vertices[self.cells[ci][2]],
        ];
        let eps = 1e-10 * 2.0 * self.cell_area[ci].max(f64::MIN_POSITIVE);
        Self::tri_cross(a, b, p) >= -eps && Self::tri_cross(b, c, p) >= -eps && Self::tri_cross(c, a, p) >= -eps
    }

    /// Builds a uniform-bin point locator for this mesh.
    pub fn locator(&self) -> CellLocator<'_> {
        CellLocator::new(self)
    }
}

/// Uniform-grid spatial index for point-in-cell queries.
pub struct CellLocator<'m> {
    mesh: &'m FineMesh,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

impl<'m> CellLocator<'m> {
    fn new(mesh: &'m FineMesh) -> CellLocator<'m> {
        // Aim for a handful of cells per bin.
        let n = (mesh.n_cells() as f64 / 4.0).sqrt().ceil().max(1.0) as usize;
        let (nx, ny) = (n, n);
        let mut bins = vec![Vec::new(); nx * ny];
        let d = mesh.domain;
        for (ci, tri) in mesh.cells.iter().enumerate() {
            let pts = [mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]];
            let bx0 = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let bx1 = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            let by0 = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let by1 = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            let ix0 = Self::bin_coord(bx0, d.x0, d.width(), nx);
            let ix1 = Self::bin_coord(bx1, d.x0, d.width(), nx);
            let iy0 = Self::bin_coord(by0, d.y0, d.height(), ny);
            let iy1 = Self::bin_coord(by1, d.y0, d.height(), ny);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    bins[iy * nx + ix].push(ci);
                }
            }
        }
        CellLocator { mesh, nx, ny, bins }
    }

    fn bin_coord(x: f64, origin: f64, extent: f64, n: usize) -> usize {
        let t = ((x - origin) / extent * n as f64).floor();
        (t.max(0.0) as usize).min(n - 1)
    }

    /// Finds a cell whose closure contains `p`; ties on shared edges resolve
    /// to the lowest cell index. Returns `None` for points outside the mesh.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        let d = self.mesh.domain;
        if !d.contains(p, super::GEOM_REL_TOL * d.diameter()) {
            return None;
        }
        let ix = Self::bin_coord(p[0], d.x0, d.width(), self.nx);
        let iy = Self::bin_coord(p[1], d.y0, d.height(), self.ny);
        self.bins[iy * self.nx + ix]
            .iter()
            .copied()
            .find(|&ci| self.mesh.cell_contains(ci, p))
    }
}

/// Generates the structured triangulation of `domain`: an `nx`×`ny` grid of
/// quads, each split along its SW–NE diagonal into two triangles.
pub fn generate_structured_mesh(nx: usize, ny: usize, domain: Rect) -> Result<FineMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config(format!("mesh resolution {nx}x{ny} must be positive")));
    }
    if domain.width() <= 0.0 || domain.height() <= 0.0 {
        return Err(Error::Config("degenerate domain rectangle".into()));
    }
    let (hx, hy) = (domain.width() / nx as f64, domain.height() / ny as f64);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Exact endpoints on the domain boundary.
            let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
            let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
            vertices.push([x, y]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    FineMesh::from_parts(vertices, cells, domain)
}

/// A fracture line as stored in mesh files: endpoints plus an optional
/// network hint (fractures sharing a hint are forced into one network).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractureSpec {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub network_hint: Option<usize>,
}

struct LineReader<'a> {
    path: &'a str,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (idx, raw) in self.lines.by_ref() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                return Some((idx + 1, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_content().ok_or_else(|| Error::Parse {
            path: self.path.to_string(),
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}

fn parse_fields<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    s.split_whitespace().map(|t| t.parse().ok()).collect()
}

/// Reads the text mesh format:
///
/// ```text
/// MESH2D
/// VERTICES n
/// x y            (n lines)
/// CELLS m
/// v0 v1 v2       (m lines, 0-based)
/// FRACTURES k    (optional)
/// x0 y0 x1 y1 network_hint   (k lines; hint -1 = automatic labeling)
/// ```
///
/// `#` starts a comment. The domain is the bounding box of the vertices.
pub fn read_mesh(path: &Path) -> Result<(FineMesh, Vec<FractureSpec>)> {
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut rd = LineReader {
        path: &path_str,
        lines: text.lines().enumerate(),
    };

    let (ln, header) = rd.expect("MESH2D header")?;
    if header != "MESH2D" {
        return Err(rd.err(ln, format!("expected MESH2D header, found {header:?}")));
    }

    let (ln, vline) = rd.expect("VERTICES section")?;
    let n: usize = match vline.strip_prefix("VERTICES") {
        Some(rest) => rest
            .trim()
            .parse()
            .map_err(|_| rd.err(ln, "invalid vertex count"))?,
        None => return Err(rd.err(ln, "expected VERTICES section")),
    };
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, line) = rd.expect("vertex line")?;
        let f: Vec<f64> = parse_fields(line).ok_or_else(|| rd.err(ln, "invalid vertex coordinates"))?;
        if f.len() != 2 {
            return Err(rd.err(ln, format!("expected 2 coordinates, found {}", f.len())));
        }
        vertices.push([f[0], f[1]]);
    }

    let (ln, cline) = rd.expect("CELLS section")?;
    let m: usize = match cline.strip_prefix("CELLS") {
        Some(rest) => rest.trim().parse().map_err(|_| rd.err(ln, "invalid cell count"))?,
        None => return Err(rd.err(ln, "expected CELLS section")),
    };
    let mut cells = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, line) = rd.expect("cell line")?;
        let f: Vec<usize> = parse_fields(line).ok_or_else(|| rd.err(ln, "invalid cell vertex indices"))?;
        if f.len() != 3 {
            return Err(rd.err(ln, format!("expected 3 vertex indices, found {}", f.len())));
        }
        cells.push([f[0], f[1], f[2]]);
    }

    let mut fractures = Vec::new();
    if let Some((ln, fline)) = rd.next_content() {
        let k: usize = match fline.strip_prefix("FRACTURES") {
            Some(rest) => rest
                .trim()
                .parse()
                .map_err(|_| rd.err(ln, "invalid fracture count"))?,
            None => return Err(rd.err(ln, format!("unexpected content {fline:?}"))),
        };
        for _ in 0..k {
            let (ln, line) = rd.expect("fracture line")?;
            let f: Vec<f64> = parse_fields(line).ok_or_else(|| rd.err(ln, "invalid fracture line"))?;
            if f.len() != 5 {
                return Err(rd.err(ln, format!("expected x0 y0 x1 y1 hint, found {} fields", f.len())));
            }
            let hint = if f[4] < 0.0 { None } else { Some(f[4] as usize) };
            fractures.push(FractureSpec {
                a: [f[0], f[1]],
                b: [f[2], f[3]],
                network_hint: hint,
            });
        }
        if let Some((ln, extra)) = rd.next_content() {
            return Err(rd.err(ln, format!("unexpected trailing content {extra:?}")));
        }
    }

    if vertices.is_empty() {
        return Err(Error::Geometry("mesh has no vertices".into()));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &vertices {
        x0 = x0.min(v[0]);
        y0 = y0.min(v[1]);
        x1 = x1.max(v[0]);
        y1 = y1.max(v[1]);
    }
    let mesh = FineMesh::from_parts(vertices, cells, Rect::new(x0, y0, x1, y1))?;
    Ok((mesh, fractures))
}

/// Writes the text mesh format read by [`read_mesh`]. Coordinates use 17
/// significant digits so the round trip is bit-exact.
pub fn write_mesh(path: &Path, mesh: &FineMesh, fractures: &[FractureSpec]) -> Result<()> {
    let mut out = String::new();
    out.push_str("MESH2D\n");
    let _ = writeln!(out, "VERTICES {}", mesh.n_vertices());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.16e} {:.16e}", v[0], v[1]);
    }
    let _ = writeln!(out, "CELLS {}", mesh.n_cells());
    for c in &mesh.cells {
        let _ = writeln!(out, "{} {} {}", c[0], c[1], c[2]);
    }
    if !fractures.is_empty() {
        let _ = writeln!(out, "FRACTURES {}", fractures.len());
        for f in fractures {
            let hint = f.network_hint.map_or(-1i64, |h| h as i64);
            let _ = writeln!(
                out,
                "{:.16e} {:.16e} {:.16e} {:.16e} {hint}",
                f.a[0], f.a[1], f.b[0], f.b[1]
            );
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a per-cell scalar field: header `CELLDATA m`, then m values in cell
/// order.
pub fn read_celldata(path: &Path, n_cells: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut rd = LineReader {
        path: &path_str,
        lines: text.lines().enumerate(),
    };
    let (ln, header) = rd.expect("CELLDATA header")?;
    let m: usize = match header.strip_prefix("CELLDATA") {
        Some(rest) => rest.trim().parse().map_err(|_| rd.err(ln, "invalid value count"))?,
        None => return Err(rd.err(ln, "expected CELLDATA header")),
    };
    if m != n_cells {
        return Err(Error::Config(format!(
            "cell data has {m} values but the mesh has {n_cells} cells"
        )));
    }
    let mut values = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, line) = rd.expect("cell value")?;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| rd.err(ln, "invalid value"))?;
            values.push(v);
        }
        if values.len() >= m {
            break;
        }
    }
    if values.len() != m {
        return Err(Error::Config(format!(
            "cell data has {} values but the header declares {m}",
            values.len()
        )));
    }
    Ok(values)
}
